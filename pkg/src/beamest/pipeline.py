"""End-to-end experiment steps behind the command-line interface.

A dataset is a tensor container of per-sample records: the true tap channel,
the stacked beamformed observation, and the beam-pair indices that rebuild
the sensing matrix against the config's codebooks. Estimators consume
(MeasurementSet, true channel) pairs; reports are CSV files with one comment
line carrying the config hash and seed, so identical inputs reproduce
byte-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beameval import (build_cdf, custom_beam, exhaustive_beam_search,
                       rank2_digital_bound, spectral_efficiency)
from .channel import ChannelTap, channel_taps, dominant_taps, synth_paths
from .config import ConfigError, ExperimentConfig
from .container import load_container, save_container
from .dictionary import (GridDictionary, LearnedDictionary, ksvd,
                         random_dictionary, spca_iht)
from .measure import (BeamPair, MeasurementSet, build_sensing_matrix,
                      dft_codebook, measure_channel, refinement_pairs,
                      rsrp_rank)
from .recovery import (DlistaParams, EffectiveOperator, IstaConfig, TrainConfig,
                       dlista_predict, grid_search_ista, init_dlista_params,
                       ista, nmse_db, omp, operator_sq_norm, split_dataset,
                       train_dlista)
from .vecops import vec

DATA_KEYS = ("scenario.", "ue.", "gnb.", "paths.", "grid.", "measure.", "dataset.")


def data_hash(cfg: ExperimentConfig) -> str:
    """Hash of the config keys that determine dataset contents."""
    import hashlib

    lines = [f"{k} = {cfg.values[k]}" for k in sorted(cfg.values)
             if k.startswith(DATA_KEYS)]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]


@dataclass
class Sample:
    """One (UE, tap) record: ground truth plus its beamformed observation."""

    ue_id: int
    tap: int
    h: np.ndarray            # (num_rx, num_tx) true tap channel
    y: np.ndarray            # (M,)
    ue_beams: np.ndarray     # (M,) codebook indices
    gnb_beams: np.ndarray    # (M,)


def build_codebooks(cfg: ExperimentConfig, oversampling: int = 1):
    scen = cfg.scenario()
    return (dft_codebook(scen.ue_geom, oversampling, side="UE"),
            dft_codebook(scen.gnb_geom, oversampling, side="gNB"))


def generate_dataset(cfg: ExperimentConfig) -> list[Sample]:
    """Synthesize channels, rank beams, and record measurements per (UE, tap)."""
    scen = cfg.scenario()
    grid = cfg.grid()
    ue_cb, gnb_cb = build_codebooks(cfg)
    noise_var = cfg["measure.noise_var"]
    num_pairs = cfg["measure.num_pairs"]
    rng = np.random.default_rng(scen.rng_seed)

    sweep = cfg["measure.sweep"]
    if sweep not in ("refine", "distinct", "top"):
        raise ConfigError(f"unknown measure.sweep {sweep!r}")

    samples = []
    for ue in range(cfg["dataset.num_ues"]):
        paths = synth_paths(scen, rng, grid=grid)
        taps = channel_taps(paths, scen.ue_geom, scen.gnb_geom)
        keep = dominant_taps(taps, cfg["dataset.dominant_taps"])
        strongest = [taps[i] for i in keep]
        if sweep == "refine":
            pairs = refinement_pairs(strongest, ue_cb, gnb_cb, num_pairs,
                                     noise_var, rng)
        else:
            pairs = rsrp_rank(strongest, ue_cb, gnb_cb, num_pairs, noise_var, rng,
                              distinct_beams=(sweep == "distinct"))
        for tap in strongest:
            ms = measure_channel(tap, pairs, ue_cb, gnb_cb, noise_var, rng)
            samples.append(Sample(
                ue_id=ue, tap=tap.tap, h=tap.matrix, y=ms.y,
                ue_beams=np.array([p.ue_beam_index for p in pairs], dtype=np.int64),
                gnb_beams=np.array([p.gnb_beam_index for p in pairs], dtype=np.int64)))
    return samples


def save_dataset(path, samples: list[Sample], cfg: ExperimentConfig):
    tensors = {
        "h": np.stack([s.h for s in samples]).astype(np.complex128),
        "y": np.stack([s.y for s in samples]).astype(np.complex128),
        "ue_beams": np.stack([s.ue_beams for s in samples]),
        "gnb_beams": np.stack([s.gnb_beams for s in samples]),
        "tap": np.array([s.tap for s in samples], dtype=np.int64),
        "ue_id": np.array([s.ue_id for s in samples], dtype=np.int64),
    }
    meta = {"kind": "dataset", "config_hash": cfg.config_hash,
            "data_hash": data_hash(cfg), "seed": cfg["scenario.seed"],
            "num_samples": len(samples), "num_ues": cfg["dataset.num_ues"],
            "noise_var": cfg["measure.noise_var"]}
    save_container(path, tensors, meta)


def load_dataset(path, cfg: ExperimentConfig) -> list[Sample]:
    tensors, meta = load_container(path)
    if meta.get("kind") != "dataset":
        raise ConfigError(f"{path} is not a dataset container")
    if meta.get("data_hash") != data_hash(cfg):
        raise ConfigError(f"{path} was generated with different data settings "
                          f"({meta.get('data_hash')} != {data_hash(cfg)})")
    return [Sample(ue_id=int(tensors["ue_id"][i]), tap=int(tensors["tap"][i]),
                   h=tensors["h"][i], y=tensors["y"][i],
                   ue_beams=tensors["ue_beams"][i], gnb_beams=tensors["gnb_beams"][i])
            for i in range(tensors["h"].shape[0])]


def measurement_pairs(samples: list[Sample], cfg: ExperimentConfig):
    """Rebuild (MeasurementSet, vec(h)) pairs from stored beam indices."""
    ue_cb, gnb_cb = build_codebooks(cfg)
    noise_var = cfg["measure.noise_var"]
    out = []
    for s in samples:
        bp = [BeamPair(int(u), int(g), 0.0) for u, g in zip(s.ue_beams, s.gnb_beams)]
        phi = build_sensing_matrix(bp, ue_cb, gnb_cb)
        out.append((MeasurementSet(y=s.y, phi=phi, noise_var=noise_var, tap=s.tap),
                    vec(s.h)))
    return out


# ---------------------------------------------------------------------------
# dictionary learning

def learn_dictionary(samples: list[Sample], cfg: ExperimentConfig) -> LearnedDictionary:
    """Fit the configured dictionary on the training-split channels."""
    train, _, _ = split_dataset(samples, tuple(cfg["train.split"]), cfg["train.seed"])
    h = np.stack([vec(s.h) for s in train], axis=1)
    method = cfg["dict.method"]
    atoms = cfg["dict.atoms"]
    sparsity = cfg["dict.sparsity"] or None
    rng = np.random.default_rng(cfg["train.seed"])
    if method == "spca":
        return spca_iht(h, iterations=cfg["dict.iterations"], sparsity=sparsity,
                        rng=rng, num_atoms=atoms)
    if method == "ksvd":
        return ksvd(h, num_atoms=atoms, sparsity=sparsity or 3,
                    iterations=min(cfg["dict.iterations"], 5), rng=rng)
    if method == "random":
        return random_dictionary(h.shape[0], atoms, rng)
    raise ConfigError(f"unknown dictionary method {method!r}")


def save_dictionary(path, d: LearnedDictionary, cfg: ExperimentConfig):
    save_container(path, {"d": d.d},
                   {"kind": "dictionary", "method": d.method, "atoms": d.num_atoms,
                    "sparsity": d.sparsity, "iterations": d.iterations,
                    "seed": cfg["train.seed"], "config_hash": cfg.config_hash,
                    "data_hash": data_hash(cfg)})


def load_dictionary(path) -> LearnedDictionary:
    tensors, meta = load_container(path)
    if meta.get("kind") != "dictionary":
        raise ConfigError(f"{path} is not a dictionary container")
    return LearnedDictionary(d=tensors["d"], method=meta["method"],
                             sparsity=meta["sparsity"], iterations=meta["iterations"],
                             seed=meta.get("seed", 0))


# ---------------------------------------------------------------------------
# DLISTA training

def auto_step(pairs, dictionary, limit: int = 32) -> float:
    """0.9 / median ||Phi Psi||^2 over a few samples (safe default step)."""
    norms = [operator_sq_norm(EffectiveOperator(ms.phi, dictionary))
             for ms, _ in pairs[:limit]]
    top = float(np.median(norms))
    return 0.9 / top if top > 0 else 1.0


def init_params_from_config(cfg: ExperimentConfig, train_pairs,
                            dictionary: LearnedDictionary | None) -> DlistaParams:
    if dictionary is None:
        raise ConfigError("DLISTA init needs a dictionary (learn-dict first "
                          "or dlista.init=random)")
    gamma0 = cfg["dlista.gamma0"]
    if gamma0 <= 0:
        gamma0 = auto_step(train_pairs, dictionary)
    return init_dlista_params(dictionary.d, num_layers=cfg["dlista.layers"],
                              shared_weights=cfg["dlista.shared"], gamma0=gamma0,
                              theta0=cfg["dlista.theta0"])


def train_from_config(samples: list[Sample], cfg: ExperimentConfig,
                      dictionary: LearnedDictionary | None):
    """Split, initialize, and train; returns (params, metrics, val pairs)."""
    pairs = measurement_pairs(samples, cfg)
    tcfg = cfg.train_config()
    train, val, _ = split_dataset(pairs, tcfg.split, tcfg.seed)
    if cfg["dlista.init"] == "random":
        rng = np.random.default_rng(tcfg.seed)
        n = pairs[0][1].size
        dictionary = random_dictionary(n, cfg["dict.atoms"], rng)
    params = init_params_from_config(cfg, train, dictionary)
    best, metrics = train_dlista(train, val, params, tcfg)
    return best, metrics, val


def save_checkpoint(path, params: DlistaParams, cfg: ExperimentConfig):
    tensors = {"gamma": params.gamma.astype(np.float64),
               "theta_raw": params.theta_raw.astype(np.float64),
               "psi_layers": np.stack(params.psi_layers),
               "psi_final": params.psi_final}
    save_container(path, tensors,
                   {"kind": "checkpoint", "layers": params.num_layers,
                    "atoms": params.num_atoms, "shared": params.shared_weights,
                    "init": cfg["dlista.init"], "config_hash": cfg.config_hash,
                    "data_hash": data_hash(cfg), "seed": cfg["train.seed"]})


def load_checkpoint(path) -> DlistaParams:
    tensors, meta = load_container(path)
    if meta.get("kind") != "checkpoint":
        raise ConfigError(f"{path} is not a checkpoint container")
    return DlistaParams(gamma=tensors["gamma"], theta_raw=tensors["theta_raw"],
                        psi_layers=list(tensors["psi_layers"]),
                        psi_final=tensors["psi_final"],
                        shared_weights=bool(meta["shared"]))


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class EvalOutputs:
    nmse: dict[str, np.ndarray]          # estimator -> per-sample NMSE (dB)
    se: dict[str, np.ndarray]            # method -> per-UE SE (bits/s/Hz)
    omp_quads: dict[int, tuple]          # sample index -> strongest quadruple


def run_estimators(pairs, cfg: ExperimentConfig,
                   dictionary: LearnedDictionary | None = None,
                   checkpoint: DlistaParams | None = None,
                   ista_cfg: IstaConfig | None = None):
    """Per-sample channel estimates for each configured estimator.

    Returns (estimates, omp results); estimates maps estimator name to an
    (S, n) array of vectorized channels.
    """
    scen = cfg.scenario()
    grid_dict = GridDictionary(cfg.grid(), scen.ue_geom, scen.gnb_geom)
    estimates: dict[str, np.ndarray] = {}
    omp_results = []
    names = list(cfg["eval.estimators"])

    if "truth" in names:
        estimates["truth"] = np.stack([h for _, h in pairs])
    if "omp" in names:
        h_hat = []
        for ms, _ in pairs:
            res = omp(ms, grid_dict, max_iters=cfg["omp.max_iters"],
                      residual_tol=cfg["omp.residual_tol"],
                      normalize_columns=cfg["omp.normalize_columns"],
                      literal_coeffs=cfg["omp.literal_coeffs"])
            omp_results.append(res)
            h_hat.append(vec(res.estimated_channel.matrix))
        estimates["omp"] = np.stack(h_hat)
    if "ista" in names:
        if dictionary is None:
            raise ConfigError("ista evaluation needs a learned dictionary")
        icfg = ista_cfg or cfg.ista_config()
        if icfg is None:
            raise ConfigError("ista.step not set and no grid-search result given")
        estimates["ista"] = np.stack([
            ista(ms, dictionary, icfg, check_step=False).channel_vec()
            for ms, _ in pairs])
    if "dlista" in names:
        if checkpoint is None:
            raise ConfigError("dlista evaluation needs a checkpoint")
        estimates["dlista"] = dlista_predict(pairs, checkpoint,
                                             normalize=cfg["train.normalize"])
    return estimates, omp_results


def evaluate(samples: list[Sample], cfg: ExperimentConfig,
             dictionary: LearnedDictionary | None = None,
             checkpoint: DlistaParams | None = None,
             ista_cfg: IstaConfig | None = None,
             subset: str = "test") -> EvalOutputs:
    """NMSE CDFs for the chosen estimators and SE CDFs against baselines."""
    pairs_all = measurement_pairs(samples, cfg)
    order = list(range(len(samples)))
    tcfg = cfg.train_config()
    tr, va, te = split_dataset(order, tcfg.split, tcfg.seed)
    keep = {"train": tr, "val": va, "test": te, "all": order}[subset]
    sel_samples = [samples[i] for i in keep]
    pairs = [pairs_all[i] for i in keep]

    if ista_cfg is None and "ista" in cfg["eval.estimators"] and cfg.ista_config() is None:
        if dictionary is None:
            raise ConfigError("ista evaluation needs a learned dictionary")
        val_pairs = [pairs_all[i] for i in va]
        ista_cfg = grid_search_ista(val_pairs or pairs, dictionary,
                                    cfg["ista.step_grid"], cfg["ista.theta_grid"],
                                    cfg["ista.iterations"])

    estimates, omp_results = run_estimators(pairs, cfg, dictionary, checkpoint, ista_cfg)

    nmse = {}
    for name, h_hat in estimates.items():
        nmse[name] = np.array([nmse_db(h, h_hat[i]) for i, (_, h) in enumerate(pairs)])

    # SE per UE on its strongest recorded tap
    scen = cfg.scenario()
    snr = 10.0 ** (cfg["eval.snr_db"] / 10.0)
    ue_cb, gnb_cb = build_codebooks(cfg)
    ue_cb_ov, gnb_cb_ov = build_codebooks(cfg, cfg["eval.oversampling"])
    by_ue: dict[int, int] = {}
    for i, s in enumerate(sel_samples):
        if s.ue_id not in by_ue or np.linalg.norm(s.h) > np.linalg.norm(
                sel_samples[by_ue[s.ue_id]].h):
            by_ue[s.ue_id] = i

    se: dict[str, list[float]] = {"rank2_digital": [], "codebook": [], "oversampled": []}
    if "omp" in estimates:
        se["custom_omp"] = []
    if "dlista" in estimates:
        se["dlista_exhaustive"] = []
    omp_quads = {}

    for ue, i in sorted(by_ue.items()):
        h_true = ChannelTap(tap=sel_samples[i].tap, matrix=sel_samples[i].h)
        se["rank2_digital"].append(rank2_digital_bound(h_true, snr))
        sel = exhaustive_beam_search(h_true, ue_cb, gnb_cb, method="codebook")
        se["codebook"].append(spectral_efficiency(h_true, sel, snr))
        sel = exhaustive_beam_search(h_true, ue_cb_ov, gnb_cb_ov, method="oversampled")
        se["oversampled"].append(spectral_efficiency(h_true, sel, snr))
        if "omp" in estimates:
            res = omp_results[i]
            if res.num_paths:
                omp_quads[i] = res.quadruples[0]
                beam = custom_beam(res.quadruples[0], scen.gnb_geom, scen.ue_geom)
            else:
                beam = exhaustive_beam_search(h_true, ue_cb, gnb_cb, method="codebook")
            se["custom_omp"].append(spectral_efficiency(h_true, beam, snr))
        if "dlista" in estimates:
            h_hat = ChannelTap(tap=sel_samples[i].tap, matrix=np.asarray(
                estimates["dlista"][i]).reshape(sel_samples[i].h.shape, order="F"))
            sel = exhaustive_beam_search(h_hat, ue_cb_ov, gnb_cb_ov)
            se["dlista_exhaustive"].append(spectral_efficiency(h_true, sel, snr))

    return EvalOutputs(nmse=nmse, se={k: np.array(v) for k, v in se.items()},
                       omp_quads=omp_quads)


# ---------------------------------------------------------------------------
# CSV reports

def write_csv(path, header: list[str], rows, cfg: ExperimentConfig, seed: int):
    lines = [f"# config_hash={cfg.config_hash} seed={seed}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_cell(c) for c in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def format_cell(c) -> str:
    if isinstance(c, float):
        return repr(c)
    return str(c)


def write_cdf_csv(path, values, cfg: ExperimentConfig, seed: int):
    cdf = build_cdf(values)
    write_csv(path, ["value", "quantile"],
              [(float(v), float(q)) for v, q in zip(cdf.values, cdf.quantiles)],
              cfg, seed)


def read_cdf_csv(path):
    vals, quants = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or line.startswith("value"):
            continue
        v, q = line.split(",")
        vals.append(float(v))
        quants.append(float(q))
    return np.array(vals), np.array(quants)


__all__ = [
    "Sample", "EvalOutputs", "data_hash", "build_codebooks", "generate_dataset",
    "save_dataset", "load_dataset", "measurement_pairs", "learn_dictionary",
    "save_dictionary", "load_dictionary", "auto_step", "init_params_from_config",
    "train_from_config", "save_checkpoint", "load_checkpoint", "run_estimators",
    "evaluate", "write_csv", "write_cdf_csv", "read_cdf_csv",
]
