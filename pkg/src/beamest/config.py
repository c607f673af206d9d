"""Flat key=value experiment configuration with a typed schema.

Config files are plain text: one ``key = value`` per line, ``#`` comments,
blank lines ignored. Keys are dotted and must exist in the schema below;
values are coerced to the schema type (int, float, bool, str, or a comma-
separated list). Command-line overrides use the same ``key=value`` syntax
and take precedence. The resolved config hashes to a stable identifier that
every output file embeds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .channel import ArrayGeometry, PathGenConfig, ScenarioConfig
from .dictionary import AngularGrid, GridAxis
from .recovery import IstaConfig, TrainConfig

_LIST_F = "list[float]"
_LIST_S = "list[str]"

# key -> (type, default)
SCHEMA: dict[str, tuple[str, object]] = {
    "scenario.carrier_freq_hz": ("float", 28e9),
    "scenario.subcarrier_spacing_hz": ("float", 120e3),
    "scenario.num_tones": ("int", 4096),
    "scenario.gnb_tx_power_dbm": ("float", 23.0),
    "scenario.gnb_antenna_gain_dbi": ("float", 5.0),
    "scenario.ue_noise_figure_db": ("float", 13.0),
    "scenario.seed": ("int", 1),
    "ue.rows": ("int", 2), "ue.cols": ("int", 2),
    "ue.spacing": ("float", 0.5), "ue.polarizations": ("int", 2),
    "ue.slant_deg": ("float", 45.0), "ue.orientation_deg": (_LIST_F, [0.0, 0.0, 0.0]),
    "gnb.rows": ("int", 4), "gnb.cols": ("int", 4),
    "gnb.spacing": ("float", 0.5), "gnb.polarizations": ("int", 2),
    "gnb.slant_deg": ("float", 45.0), "gnb.orientation_deg": (_LIST_F, [0.0, 0.0, 0.0]),
    "paths.taps_min": ("int", 2), "paths.taps_max": ("int", 4),
    "paths.paths_per_tap_min": ("int", 1), "paths.paths_per_tap_max": ("int", 3),
    "paths.clusters_per_tap_min": ("int", 1), "paths.clusters_per_tap_max": ("int", 1),
    "paths.cluster_pool": ("int", 8),
    "paths.angular_spread_deg": ("float", 2.0),
    "paths.pdp_decay": ("float", 1.0),
    "paths.on_grid": ("bool", False),
    "grid.ue_az_n": ("int", 36), "grid.ue_az_start": ("float", 0.0),
    "grid.ue_az_stop": ("float", 360.0), "grid.ue_az_endpoint": ("bool", False),
    "grid.ue_zen_n": ("int", 6), "grid.ue_zen_start": ("float", 30.0),
    "grid.ue_zen_stop": ("float", 80.0), "grid.ue_zen_endpoint": ("bool", True),
    "grid.nb_az_n": ("int", 36), "grid.nb_az_start": ("float", 0.0),
    "grid.nb_az_stop": ("float", 360.0), "grid.nb_az_endpoint": ("bool", False),
    "grid.nb_zen_n": ("int", 6), "grid.nb_zen_start": ("float", 30.0),
    "grid.nb_zen_stop": ("float", 80.0), "grid.nb_zen_endpoint": ("bool", True),
    "measure.num_pairs": ("int", 5),
    "measure.noise_var": ("float", 0.0),
    "measure.sweep": ("str", "refine"),  # refine | distinct | top
    "dataset.num_ues": ("int", 120),
    "dataset.dominant_taps": ("int", 3),
    "dict.method": ("str", "spca"),
    "dict.atoms": ("int", 200),
    "dict.sparsity": ("int", 0),
    "dict.iterations": ("int", 30),
    "dlista.layers": ("int", 10),
    "dlista.shared": ("bool", False),
    "dlista.freeze_psi": ("bool", False),
    "dlista.init": ("str", "spca"),
    "dlista.gamma0": ("float", 0.0),
    "dlista.theta0": ("float", 1e-2),
    "train.epochs": ("int", 200),
    "train.batch_size": ("int", 32),
    "train.lr_gamma": ("float", 1e-2),
    "train.lr_theta": ("float", 1e-2),
    "train.lr_psi": ("float", 1e-3),
    "train.weight_decay": ("float", 1e-4),
    "train.patience": ("int", 20),
    "train.split": (_LIST_F, [0.75, 0.08, 0.17]),
    "train.seed": ("int", 0),
    "train.normalize": ("bool", True),
    "omp.max_iters": ("int", 8),
    "omp.residual_tol": ("float", 1e-8),
    "omp.normalize_columns": ("bool", True),
    "omp.literal_coeffs": ("bool", False),
    "ista.step": ("float", 0.0),
    "ista.threshold": ("float", 0.0),
    "ista.iterations": ("int", 10),
    "ista.step_grid": (_LIST_F, [0.1, 0.3, 0.9]),
    "ista.theta_grid": (_LIST_F, [1e-4, 1e-3, 1e-2]),
    "eval.estimators": (_LIST_S, ["omp", "dlista"]),
    "eval.snr_db": ("float", 15.0),
    "eval.oversampling": ("int", 4),
    "output.dir": ("str", "runs/default"),
}


class ConfigError(ValueError):
    """Malformed config file, unknown key, or bad value."""


def _coerce(key: str, kind: str, text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        text = text[1:-1]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "false"):
                return low == "true"
            raise ValueError("expected true/false")
        if kind == "str":
            return text
        if kind == _LIST_F:
            return [float(t) for t in text.split(",") if t.strip()]
        if kind == _LIST_S:
            return [t.strip() for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}") from exc
    raise ConfigError(f"{key}: unknown schema type {kind}")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<string>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, SCHEMA[key][0], val)
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved flat config plus typed views onto its sections."""

    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def canonical(self) -> str:
        return "\n".join(f"{k} = {_format(self.values[k])}" for k in sorted(self.values)) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]

    def _geom(self, prefix: str) -> ArrayGeometry:
        v = self.values
        return ArrayGeometry(rows=v[f"{prefix}.rows"], cols=v[f"{prefix}.cols"],
                             element_spacing=v[f"{prefix}.spacing"],
                             polarizations=v[f"{prefix}.polarizations"],
                             slant_deg=v[f"{prefix}.slant_deg"],
                             orientation_deg=tuple(v[f"{prefix}.orientation_deg"]))

    def scenario(self) -> ScenarioConfig:
        v = self.values
        grid = self.grid()
        paths = PathGenConfig(
            tap_count_range=(v["paths.taps_min"], v["paths.taps_max"]),
            paths_per_tap_range=(v["paths.paths_per_tap_min"], v["paths.paths_per_tap_max"]),
            clusters_per_tap_range=(v["paths.clusters_per_tap_min"],
                                    v["paths.clusters_per_tap_max"]),
            cluster_pool_size=v["paths.cluster_pool"],
            angular_spread_deg=v["paths.angular_spread_deg"],
            pdp_decay=v["paths.pdp_decay"],
            on_grid=v["paths.on_grid"],
            aoa_az_range=(grid.ue_az.start, grid.ue_az.stop),
            aoa_zen_range=(grid.ue_zen.start, grid.ue_zen.stop),
            aod_az_range=(grid.nb_az.start, grid.nb_az.stop),
            aod_zen_range=(grid.nb_zen.start, grid.nb_zen.stop),
        )
        return ScenarioConfig(
            ue_geom=self._geom("ue"), gnb_geom=self._geom("gnb"),
            carrier_freq_hz=v["scenario.carrier_freq_hz"],
            subcarrier_spacing_hz=v["scenario.subcarrier_spacing_hz"],
            num_tones=v["scenario.num_tones"],
            gnb_tx_power_dbm=v["scenario.gnb_tx_power_dbm"],
            gnb_antenna_gain_dbi=v["scenario.gnb_antenna_gain_dbi"],
            ue_noise_figure_db=v["scenario.ue_noise_figure_db"],
            rng_seed=v["scenario.seed"], paths=paths)

    def grid(self) -> AngularGrid:
        v = self.values

        def axis(name: str) -> GridAxis:
            return GridAxis(n=v[f"grid.{name}_n"], start=v[f"grid.{name}_start"],
                            stop=v[f"grid.{name}_stop"], endpoint=v[f"grid.{name}_endpoint"])

        return AngularGrid(ue_az=axis("ue_az"), ue_zen=axis("ue_zen"),
                           nb_az=axis("nb_az"), nb_zen=axis("nb_zen"))

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(epochs=v["train.epochs"], batch_size=v["train.batch_size"],
                           lr_gamma=v["train.lr_gamma"], lr_theta=v["train.lr_theta"],
                           lr_psi=v["train.lr_psi"], weight_decay=v["train.weight_decay"],
                           patience=v["train.patience"], split=tuple(v["train.split"]),
                           seed=v["train.seed"], normalize=v["train.normalize"],
                           freeze_psi=v["dlista.freeze_psi"])

    def ista_config(self) -> IstaConfig | None:
        v = self.values
        if v["ista.step"] <= 0.0:
            return None  # grid search decides
        return IstaConfig(step=v["ista.step"], threshold=v["ista.threshold"],
                          iterations=v["ista.iterations"])


def resolve_config(file_values: dict | None = None,
                   overrides: list[str] | None = None) -> ExperimentConfig:
    """Defaults, updated by file values, updated by 'key=value' overrides."""
    values = {k: v for k, (_, v) in SCHEMA.items()}
    values.update(file_values or {})
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, val = (p.strip() for p in item.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _coerce(key, SCHEMA[key][0], val)
    return ExperimentConfig(values=values)


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return resolve_config(parse_config_text(text, source=str(path)), overrides)


__all__ = ["SCHEMA", "ConfigError", "ExperimentConfig", "parse_config_text",
           "resolve_config", "load_config"]
