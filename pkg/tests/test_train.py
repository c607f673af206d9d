"""Training-loop tests: Adam updates, splits, determinism, improvement."""

import numpy as np
import pytest

from beamest import (DlistaBatch, MeasurementSet, TrainConfig, dlista_forward,
                     init_dlista_params, split_dataset, train_dlista)
from beamest.measure import SensingMatrix, apply_phi
from beamest.recovery.dlista import _forward_batch, nmse_loss
from beamest.recovery.train import Adam
from beamest.vecops import crandn


def make_dataset(rng, n=48, num_meas=4, num_rx=2, num_tx=3, atoms=5):
    """Learnable toy set: targets live in the span of a few fixed atoms."""
    dim = num_rx * num_tx
    basis = crandn(rng, dim, atoms)
    basis /= np.linalg.norm(basis, axis=0, keepdims=True)
    pairs = []
    for _ in range(n):
        z = np.zeros(atoms, dtype=complex)
        z[rng.integers(atoms)] = rng.standard_normal() + 1j * rng.standard_normal()
        h = basis @ z
        blocks = [(crandn(rng, 1, num_rx), crandn(rng, num_tx, 1))
                  for _ in range(num_meas)]
        phi = SensingMatrix(blocks=blocks, num_rx=num_rx, num_tx=num_tx)
        y = apply_phi(phi, h)
        pairs.append((MeasurementSet(y=y, phi=phi, noise_var=0.0, tap=0), h))
    return pairs, basis


class TestAdam:
    def test_matches_reference_updates(self):
        # hand-rolled reference of the bias-corrected update on a scalar
        x = np.array([1.0])
        opt = Adam()
        g = np.array([0.5])
        m = v = 0.0
        ref = 1.0
        for t in range(1, 6):
            opt.step([(x, g, 0.1)])
            m = 0.9 * m + 0.1 * 0.5
            v = 0.999 * v + 0.001 * 0.25
            ref -= 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            assert x[0] == pytest.approx(ref, rel=1e-12)

    def test_complex_params_updated_as_real_pairs(self):
        x = np.array([1.0 + 1.0j])
        g = np.array([1.0 + 0.0j])  # gradient only on the real part
        opt = Adam()
        opt.step([(x, g, 0.1)])
        assert x[0].imag == 1.0
        assert x[0].real < 1.0

    def test_zero_lr_is_bit_exact_noop(self):
        x = np.array([0.1234567890123456789 + 0.987654321j])
        before = x.copy()
        opt = Adam()
        for _ in range(3):
            opt.step([(x, np.zeros_like(x), 0.0)])
        assert np.array_equal(x.view(np.float64), before.view(np.float64))


class TestSplit:
    def test_ratios_and_disjoint(self):
        samples = list(range(342))
        train, val, test = split_dataset(samples, (0.75, 0.08, 0.17), seed=3)
        assert len(train) == 256
        assert len(val) == 27
        assert len(test) == 342 - 256 - 27
        assert set(train) | set(val) | set(test) == set(samples)

    def test_deterministic(self):
        samples = list(range(50))
        a = split_dataset(samples, (0.6, 0.2, 0.2), seed=9)
        b = split_dataset(samples, (0.6, 0.2, 0.2), seed=9)
        assert a == b

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            split_dataset([], (0.75, 0.08, 0.17), seed=0)


class TestTrainDlista:
    def _init(self, rng, pairs, atoms=5, layers=4):
        dim = pairs[0][1].size
        psi0 = crandn(rng, dim, atoms)
        psi0 /= np.linalg.norm(psi0, axis=0, keepdims=True)
        return init_dlista_params(psi0, layers, gamma0=0.2, theta0=1e-3)

    def test_training_improves_validation(self):
        rng = np.random.default_rng(0)
        pairs, _ = make_dataset(rng, n=64)
        train, val, _ = split_dataset(pairs, (0.75, 0.125, 0.125), seed=0)
        params = self._init(rng, pairs)
        cfg = TrainConfig(epochs=60, batch_size=16, patience=60, seed=1,
                          split=(0.75, 0.125, 0.125))
        val_batch = DlistaBatch.from_pairs(val).normalized()[0]
        before = nmse_loss(val_batch.h,
                           _forward_batch(val_batch, params, False)[0])[0]
        best, metrics = train_dlista(train, val, params, cfg)
        after = min(m.val_nmse_db for m in metrics)
        assert np.isfinite(after)
        assert after < before - 3.0  # strictly better than the untrained model

    def test_same_seed_identical_parameters(self):
        rng = np.random.default_rng(1)
        pairs, _ = make_dataset(rng, n=32)
        train, val, _ = split_dataset(pairs, (0.7, 0.15, 0.15), seed=2)
        cfg = TrainConfig(epochs=5, batch_size=8, patience=5, seed=7)
        p0 = self._init(np.random.default_rng(5), pairs)
        a, _ = train_dlista(train, val, p0, cfg)
        b, _ = train_dlista(train, val, p0, cfg)
        assert np.array_equal(a.gamma, b.gamma)
        assert np.array_equal(a.theta_raw, b.theta_raw)
        assert all(np.array_equal(x, y) for x, y in zip(a.psi_layers, b.psi_layers))
        assert np.array_equal(a.psi_final, b.psi_final)

    def test_frozen_shared_zero_lr_unchanged(self):
        rng = np.random.default_rng(2)
        pairs, _ = make_dataset(rng, n=24)
        train, val, _ = split_dataset(pairs, (0.7, 0.15, 0.15), seed=0)
        dim = pairs[0][1].size
        psi0 = crandn(rng, dim, 5)
        params = init_dlista_params(psi0, 3, shared_weights=True,
                                    gamma0=0.1, theta0=1e-2)
        cfg = TrainConfig(epochs=3, batch_size=8, patience=3, seed=0,
                          lr_gamma=0.0, lr_theta=0.0, lr_psi=0.0,
                          weight_decay=0.0, freeze_psi=True)
        best, _ = train_dlista(train, val, params, cfg)
        assert np.array_equal(best.gamma, params.gamma)
        assert np.array_equal(best.theta_raw, params.theta_raw)
        assert np.array_equal(best.psi_layers[0].view(np.float64),
                              params.psi_layers[0].view(np.float64))
        assert np.array_equal(best.psi_final.view(np.float64),
                              params.psi_final.view(np.float64))

    def test_early_stopping_stops(self):
        rng = np.random.default_rng(3)
        pairs, _ = make_dataset(rng, n=24)
        train, val, _ = split_dataset(pairs, (0.7, 0.15, 0.15), seed=0)
        params = self._init(rng, pairs)
        cfg = TrainConfig(epochs=100, batch_size=8, patience=2, seed=0,
                          lr_gamma=0.0, lr_theta=0.0, lr_psi=0.0,
                          weight_decay=0.0)
        _, metrics = train_dlista(train, val, params, cfg)
        # no learning possible: stops right after the patience budget
        assert len(metrics) <= 4

    def test_input_params_not_mutated(self):
        rng = np.random.default_rng(4)
        pairs, _ = make_dataset(rng, n=24)
        train, val, _ = split_dataset(pairs, (0.7, 0.15, 0.15), seed=0)
        params = self._init(rng, pairs)
        snapshot = params.copy()
        train_dlista(train, val, params, TrainConfig(epochs=2, batch_size=8,
                                                     patience=2, seed=0))
        assert np.array_equal(params.gamma, snapshot.gamma)
        assert np.array_equal(params.psi_final, snapshot.psi_final)

    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            train_dlista([], [], None, TrainConfig())
