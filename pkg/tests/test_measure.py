"""Measurement tests: codebooks, beamformed observations, sensing operator."""

import numpy as np
import pytest

from beamest import (ArrayGeometry, BeamPair, ChannelTap, PathParams,
                     apply_phi, apply_phi_adj, beamform_measure,
                     build_channel_tap, build_sensing_matrix, dft_codebook,
                     measure_channel, rsrp_rank, steering_vector, vec)
from beamest.vecops import crandn, unvec


class TestDftCodebook:
    def test_single_element(self):
        cb = dft_codebook(ArrayGeometry(1, 1, polarizations=1))
        assert cb.num_beams == 1
        assert cb.beam(0)[0] == pytest.approx(1.0)

    def test_ula_orthogonality(self):
        cb = dft_codebook(ArrayGeometry(1, 4, polarizations=1))
        gram = cb.beams.conj().T @ cb.beams
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)

    def test_oversampled_count_and_norms(self):
        cb = dft_codebook(ArrayGeometry(2, 2, polarizations=1), oversampling=2)
        assert cb.num_beams == 2 * 2 * 4  # rows*cols*ov^2
        np.testing.assert_allclose(np.linalg.norm(cb.beams, axis=0), 1.0, atol=1e-12)

    def test_dual_pol_doubles_count(self, ue_geom):
        cb = dft_codebook(ue_geom)
        assert cb.num_beams == ue_geom.rows * ue_geom.cols * 2
        np.testing.assert_allclose(np.linalg.norm(cb.beams, axis=0), 1.0, atol=1e-12)

    def test_invalid_oversampling(self, ue_geom):
        with pytest.raises(ValueError):
            dft_codebook(ue_geom, 0)


class TestBeamformMeasure:
    def test_scalar_identity_case(self):
        h = ChannelTap(tap=0, matrix=np.array([[2.0 - 1.0j]]))
        out = beamform_measure(h, np.array([1.0 + 0j]), np.array([1.0 + 0j]))
        np.testing.assert_allclose(out, [2.0 - 1.0j])

    def test_matched_beams_return_gain(self, ue_geom, gnb_geom):
        p = PathParams(gain=0.8 + 0.3j, aoa_az=40.0, aoa_zen=60.0,
                       aod_az=250.0, aod_zen=40.0, tap=0)
        h = build_channel_tap([p], ue_geom, gnb_geom)
        w = steering_vector(ue_geom, p.aoa_az, p.aoa_zen)
        f = steering_vector(gnb_geom, p.aod_az, p.aod_zen)
        out = beamform_measure(h, w, f)
        np.testing.assert_allclose(out, [p.gain], atol=1e-12)

    def test_zero_beams_give_noise_only(self, ue_geom, gnb_geom):
        h = ChannelTap(tap=0, matrix=crandn(np.random.default_rng(0),
                                            ue_geom.num_elements, gnb_geom.num_elements))
        # zero channel instead of zero beams: unit-norm beams are required
        zero_h = ChannelTap(tap=0, matrix=np.zeros_like(h.matrix))
        w = steering_vector(ue_geom, 0.0, 45.0)
        f = steering_vector(gnb_geom, 0.0, 45.0)
        assert beamform_measure(zero_h, w, f)[0] == 0.0
        noisy = beamform_measure(zero_h, w, f, noise_var=1.0,
                                 rng=np.random.default_rng(1))
        assert noisy[0] != 0.0

    def test_dimension_mismatch(self, ue_geom, gnb_geom):
        h = ChannelTap(tap=0, matrix=np.zeros((ue_geom.num_elements,
                                               gnb_geom.num_elements)))
        with pytest.raises(ValueError):
            beamform_measure(h, np.ones(3), np.ones(gnb_geom.num_elements))


class TestVecIdentity:
    def test_kron_vec_identity_random_triples(self):
        # vec(A X B) == (B^T kron A) vec(X) for 200 random triples, dims <= 8
        rng = np.random.default_rng(42)
        for _ in range(200):
            p, q, r, s = rng.integers(1, 9, size=4)
            a = crandn(rng, p, q)
            x = crandn(rng, q, r)
            b = crandn(rng, r, s)
            lhs = vec(a @ x @ b)
            rhs = np.kron(b.T, a) @ vec(x)
            assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(lhs), 1.0)


class TestSensingMatrix:
    def _random_ms(self, rng, ue_cb, gnb_cb, m=5):
        pairs = [BeamPair(int(rng.integers(ue_cb.num_beams)),
                          int(rng.integers(gnb_cb.num_beams)), 0.0) for _ in range(m)]
        return build_sensing_matrix(pairs, ue_cb, gnb_cb)

    def test_single_pair_matches_kron(self, ue_cb, gnb_cb):
        phi = build_sensing_matrix([BeamPair(1, 2, 0.0)], ue_cb, gnb_cb)
        dense = phi.densify()
        assert dense.shape == (1, ue_cb.beams.shape[0] * gnb_cb.beams.shape[0])
        a = ue_cb.beam(1).conj()[None, :]
        b = gnb_cb.beam(2)[:, None]
        np.testing.assert_allclose(dense, np.kron(b.T, a), atol=1e-14)

    def test_five_pairs_five_rows(self, ue_cb, gnb_cb):
        phi = self._random_ms(np.random.default_rng(0), ue_cb, gnb_cb, m=5)
        assert phi.rows == 5
        assert phi.cols == ue_cb.beams.shape[0] * gnb_cb.beams.shape[0]

    def test_duplicate_pair_duplicates_rows(self, ue_cb, gnb_cb):
        phi = build_sensing_matrix([BeamPair(0, 0, 0.0), BeamPair(0, 0, 0.0)],
                                   ue_cb, gnb_cb)
        dense = phi.densify()
        np.testing.assert_allclose(dense[0], dense[1])

    def test_apply_matches_dense(self, ue_cb, gnb_cb):
        rng = np.random.default_rng(1)
        phi = self._random_ms(rng, ue_cb, gnb_cb)
        dense = phi.densify()
        v = crandn(rng, phi.cols)
        out = apply_phi(phi, v)
        ref = dense @ v
        assert np.linalg.norm(out - ref) <= 1e-12 * np.linalg.norm(ref)
        assert np.linalg.norm(apply_phi(phi, np.zeros(phi.cols))) == 0.0

    def test_adjoint_identity(self, ue_cb, gnb_cb):
        rng = np.random.default_rng(2)
        phi = self._random_ms(rng, ue_cb, gnb_cb)
        for _ in range(10):
            v = crandn(rng, phi.cols)
            u = crandn(rng, phi.rows)
            lhs = np.vdot(u, apply_phi(phi, v))
            rhs = np.vdot(apply_phi_adj(phi, u), v)
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)

    def test_multi_rf_chain_blocks(self):
        # matrix beams: shape contracts + dense equivalence
        from beamest.measure import SensingMatrix

        rng = np.random.default_rng(3)
        a = crandn(rng, 2, 4)  # 2 UE RF chains, 4 elements
        b = crandn(rng, 6, 3)  # 6 gNB elements, 3 RF chains
        phi = SensingMatrix(blocks=[(a, b)], num_rx=4, num_tx=6)
        assert phi.rows == 6
        assert not phi.rank1
        v = crandn(rng, 24)
        np.testing.assert_allclose(apply_phi(phi, v), phi.densify() @ v, atol=1e-12)
        u = crandn(rng, 6)
        np.testing.assert_allclose(apply_phi_adj(phi, u),
                                   phi.densify().conj().T @ u, atol=1e-12)

    def test_length_validation(self, ue_cb, gnb_cb):
        phi = self._random_ms(np.random.default_rng(4), ue_cb, gnb_cb)
        with pytest.raises(ValueError):
            apply_phi(phi, np.zeros(phi.cols + 1))
        with pytest.raises(ValueError):
            apply_phi_adj(phi, np.zeros(phi.rows + 1))


class TestRsrpRank:
    def test_on_grid_matched_pair_ranks_first(self, ue_geom, gnb_geom, desk_grid):
        # brute-force oracle: the pair with max |w^H H f| must come out on top
        ue_cb = dft_codebook(ue_geom)
        gnb_cb = dft_codebook(gnb_geom)
        rng = np.random.default_rng(5)
        for _ in range(5):
            p = PathParams(gain=1.0,
                           aoa_az=float(rng.choice(desk_grid.ue_az_points)),
                           aoa_zen=float(rng.choice(desk_grid.ue_zen_points)),
                           aod_az=float(rng.choice(desk_grid.nb_az_points)),
                           aod_zen=float(rng.choice(desk_grid.nb_zen_points)), tap=0)
            h = build_channel_tap([p], ue_geom, gnb_geom)
            best = rsrp_rank(h, ue_cb, gnb_cb, 1)[0]
            power = np.abs(ue_cb.beams.conj().T @ h.matrix @ gnb_cb.beams) ** 2
            i, j = np.unravel_index(np.argmax(power), power.shape)
            assert (best.ue_beam_index, best.gnb_beam_index) == (i, j)

    def test_all_pairs_sorted(self, ue_geom, gnb_geom):
        ue_cb = dft_codebook(ue_geom)
        gnb_cb = dft_codebook(gnb_geom)
        h = ChannelTap(tap=0, matrix=crandn(np.random.default_rng(6),
                                            ue_geom.num_elements, gnb_geom.num_elements))
        total = ue_cb.num_beams * gnb_cb.num_beams
        pairs = rsrp_rank(h, ue_cb, gnb_cb, total)
        rsrps = [p.rsrp_db for p in pairs]
        assert rsrps == sorted(rsrps, reverse=True)
        assert len({(p.ue_beam_index, p.gnb_beam_index) for p in pairs}) == total

    def test_zero_channel_tie_break(self, ue_geom, gnb_geom):
        ue_cb = dft_codebook(ue_geom)
        gnb_cb = dft_codebook(gnb_geom)
        h = ChannelTap(tap=0, matrix=np.zeros((ue_geom.num_elements,
                                               gnb_geom.num_elements)))
        pairs = rsrp_rank(h, ue_cb, gnb_cb, 3)
        assert [(p.ue_beam_index, p.gnb_beam_index) for p in pairs] == \
            [(0, 0), (0, 1), (0, 2)]

    def test_global_phase_invariance(self, ue_geom, gnb_geom):
        ue_cb = dft_codebook(ue_geom)
        gnb_cb = dft_codebook(gnb_geom)
        m = crandn(np.random.default_rng(7), ue_geom.num_elements, gnb_geom.num_elements)
        a = rsrp_rank(ChannelTap(tap=0, matrix=m), ue_cb, gnb_cb, 5)
        b = rsrp_rank(ChannelTap(tap=0, matrix=np.exp(0.73j) * m), ue_cb, gnb_cb, 5)
        assert [(p.ue_beam_index, p.gnb_beam_index) for p in a] == \
            [(p.ue_beam_index, p.gnb_beam_index) for p in b]

    def test_m_validation(self, ue_geom, gnb_geom):
        ue_cb = dft_codebook(ue_geom)
        gnb_cb = dft_codebook(gnb_geom)
        h = ChannelTap(tap=0, matrix=np.zeros((ue_geom.num_elements,
                                               gnb_geom.num_elements)))
        with pytest.raises(ValueError):
            rsrp_rank(h, ue_cb, gnb_cb, 0)
        with pytest.raises(ValueError):
            rsrp_rank(h, ue_cb, gnb_cb, ue_cb.num_beams * gnb_cb.num_beams + 1)


def test_measure_channel_noiseless_zero_channel(ue_geom, gnb_geom, ue_cb, gnb_cb):
    h = ChannelTap(tap=0, matrix=np.zeros((ue_geom.num_elements,
                                           gnb_geom.num_elements)))
    ms = measure_channel(h, [BeamPair(0, 0, 0.0), BeamPair(1, 3, 0.0)], ue_cb, gnb_cb)
    assert np.all(ms.y == 0.0)
    assert ms.phi.rows == 2
