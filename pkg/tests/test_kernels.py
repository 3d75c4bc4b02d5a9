"""Kernel values, Gram matrices, the two-sided error-evolution bound, and
the flip-set perturbation ceilings."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdyn.kernels import (empirical_kernel_matrix, capture_gram_run,
                             gram_matrices, h_matrix, kernel_value,
                             perturbation_norms, sandwich_check, save_matrix)
from specdyn.relu_net import NetState, gd_step, init_network, predictions
from specdyn.sphere_data import (FeatureSet, build_dataset,
                                 make_polynomial_target, sample_uniform_sphere)


def _dataset(n, d, seed, degree=1):
    feats = sample_uniform_sphere(n, d, seed)
    return build_dataset(make_polynomial_target(degree, d, seed + 1), feats)


class TestKernelValue:
    def test_reference_points(self):
        assert kernel_value(1.0) == pytest.approx(0.5, abs=1e-15)
        assert kernel_value(0.0) == 0.0
        assert kernel_value(-1.0) == pytest.approx(0.0, abs=1e-15)
        assert kernel_value(0.0, biased=True) == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert kernel_value(1.0, biased=True) == pytest.approx(1.0, abs=1e-15)

    def test_clamps_rounding_noise(self):
        assert kernel_value(1.0 + 1e-13) == pytest.approx(0.5, abs=1e-12)

    def test_rejects_material_excess(self):
        with pytest.raises(ValueError):
            kernel_value(1.001)

    @given(st.floats(min_value=-1.0, max_value=1.0))
    @settings(max_examples=200, deadline=None)
    def test_bounds(self, u):
        # the unbiased kernel dips slightly negative for u < 0 (min ~ -0.09
        # near u = -0.65); only its sup is 1/2.  The biased kernel is
        # non-negative because both factors are.
        assert -0.1 <= kernel_value(u) <= 0.5
        assert 0.0 <= kernel_value(u, biased=True) <= 1.0


class TestKernelMatrix:
    def test_diagonals(self):
        fs = sample_uniform_sphere(16, 5, 1)
        k_plain = empirical_kernel_matrix(fs, biased=False)
        k_bias = empirical_kernel_matrix(fs, biased=True)
        np.testing.assert_allclose(np.diag(k_plain.entries), 1.0 / 32, atol=1e-15)
        np.testing.assert_allclose(np.diag(k_bias.entries), 1.0 / 16, atol=1e-15)

    def test_entry_bounds_and_symmetry(self):
        fs = sample_uniform_sphere(40, 6, 2)
        for biased, cap in ((False, 0.5), (True, 1.0)):
            km = empirical_kernel_matrix(fs, biased)
            assert np.array_equal(km.entries, km.entries.T)
            assert np.max(np.abs(km.entries)) <= cap / 40 + 1e-15
            # PSD within tolerance
            assert np.linalg.eigvalsh(km.entries)[0] >= -1e-10

    def test_rejects_augmented_features(self):
        from specdyn.sphere_data import augment_with_bias
        fs = augment_with_bias(sample_uniform_sphere(5, 4, 3))
        with pytest.raises(ValueError):
            empirical_kernel_matrix(fs)

    def test_matches_initialization_expectation(self):
        # average of H over 2000 single-neuron initializations vs K;
        # the pair-activation probability is (pi - arccos u) / (2 pi)
        n, d = 20, 5
        fs = sample_uniform_sphere(n, d, 11)
        km = empirical_kernel_matrix(fs, biased=False)
        acc = np.zeros((n, n))
        for s in range(2000):
            net = init_network(1, d, 1.0, False, seed=300000 + s)
            acc += h_matrix(net, fs)
        acc /= 2000
        assert np.max(np.abs(acc - km.entries)) <= 0.02 / n


class TestGramMatrices:
    def test_zero_step_collapses_tildes(self):
        ds = _dataset(12, 4, 4)
        net = init_network(30, 4, 0.5, False, 5)
        gs = gram_matrices(net, net, ds.features)
        assert np.array_equal(gs.Hp, gs.Hp_tilde)
        assert np.array_equal(gs.Hm, gs.Hm_tilde)
        assert np.array_equal(gs.Hp, gs.Hp.T)
        assert np.array_equal(gs.Hm, gs.Hm.T)

    def test_fully_active_network_recovers_gram(self):
        # all weights share a direction aligned with every feature, so every
        # indicator fires and Hp + Hm is the plain scaled Gram matrix
        base = sample_uniform_sphere(10, 4, 6).points
        pts = (base + 3.0 * np.eye(4)[0]) / np.linalg.norm(
            base + 3.0 * np.eye(4)[0], axis=1, keepdims=True)
        fs = FeatureSet(d=4, n=10, points=pts, seed=6)
        m = 8
        W = np.tile(np.eye(4)[0], (m, 1))
        a = np.array([1.0] * 4 + [-1.0] * 4)
        net = NetState(W=W, a=a, nu=1.0, bias_mode=False, t=0, seed=0)
        gs = gram_matrices(net, net, fs)
        np.testing.assert_allclose(gs.H, pts @ pts.T / 10, atol=1e-15)

    def test_positive_semidefinite(self):
        ds = _dataset(30, 5, 7)
        net = init_network(200, 5, 0.7, False, 8)
        gs = gram_matrices(net, net, ds.features)
        assert np.linalg.eigvalsh(gs.Hp)[0] >= -1e-10
        assert np.linalg.eigvalsh(gs.Hm)[0] >= -1e-10

    def test_integer_count_structure(self):
        # each entry is <x_i, x_j>/(nm) times an integer neuron count
        ds = _dataset(15, 4, 9)
        n, m = 15, 24
        net = init_network(m, 4, 0.5, False, 10)
        gs = gram_matrices(net, net, ds.features)
        gram = ds.features.points @ ds.features.points.T
        n_pos = int(np.sum(net.a > 0))
        counts = gs.Hp * (n * m) / gram
        assert np.max(np.abs(counts - np.round(counts))) < 1e-9
        assert counts.min() >= -1e-9 and counts.max() <= n_pos + 1e-9

    def test_entry_magnitude_cap(self):
        ds = _dataset(20, 5, 11)
        net = init_network(50, 5, 0.5, False, 12)
        gs = gram_matrices(net, net, ds.features)
        for mat in (gs.Hp, gs.Hm, gs.Hp_tilde, gs.Hm_tilde):
            assert np.max(np.abs(mat)) <= 1.0 / 20 + 1e-15

    def test_state_mismatch_rejected(self):
        ds = _dataset(8, 3, 13)
        net_a = init_network(10, 3, 0.5, False, 14)
        net_b = init_network(10, 3, 0.5, False, 15)
        with pytest.raises(ValueError):
            gram_matrices(net_a, net_b, ds.features)


class TestSandwich:
    def test_zero_stepsize_zero_slack(self):
        ds = _dataset(10, 4, 16)
        net = init_network(12, 4, 0.5, False, 17)
        gs = gram_matrices(net, net, ds.features)
        r = ds.responses - predictions(net, ds.features.points)
        lower, upper = sandwich_check(r, r, gs, eta=0.0)
        assert np.all(lower == 0.0) and np.all(upper == 0.0)

    def test_slack_nonnegative_along_run(self):
        ds = _dataset(20, 5, 18)
        net = init_network(100, 5, 1.0 / math.sqrt(20), False, 19)
        worst = math.inf
        for gs, r_t, r_t1, _ in capture_gram_run(net, ds, eta=0.5, T=10):
            lower, upper = sandwich_check(r_t, r_t1, gs, eta=0.5)
            worst = min(worst, float(lower.min()), float(upper.min()))
        assert worst >= -1e-9

    def test_shape_mismatch(self):
        ds = _dataset(6, 3, 20)
        net = init_network(5, 3, 0.5, False, 21)
        gs = gram_matrices(net, net, ds.features)
        with pytest.raises(ValueError):
            sandwich_check(np.zeros(5), np.zeros(6), gs, 0.1)


class TestPerturbations:
    def test_initial_transition_from_unflipped_state(self):
        ds = _dataset(15, 4, 22)
        net = init_network(40, 4, 1.0 / math.sqrt(15), False, 23)
        km = empirical_kernel_matrix(ds.features, biased=False)
        h0 = h_matrix(net, ds.features)
        gs = gram_matrices(net, net, ds.features)
        report = perturbation_norms(gs, km, np.zeros(15), h0, 40)
        assert report.norm_M == 0.0 and report.norm_L == 0.0
        assert report.norm_H_drift == 0.0 and report.ceiling == 0.0

    def test_spectral_norm_below_frobenius(self):
        ds = _dataset(25, 5, 24)
        net = init_network(80, 5, 1.0 / math.sqrt(25), False, 25)
        stepped = gd_step(net, ds, 0.9)
        gs = gram_matrices(net, stepped, ds.features)
        assert np.linalg.norm(gs.M, 2) <= np.linalg.norm(gs.M, "fro") + 1e-12

    def test_ceilings_hold_along_run(self):
        n, m = 50, 500
        ds = _dataset(n, 5, 26)
        net = init_network(m, 5, 1.0 / math.sqrt(n), False, 27)
        km = empirical_kernel_matrix(ds.features, biased=False)
        h0 = h_matrix(net, ds.features)
        saw_flips = False
        for gs, _, _, flips in capture_gram_run(net, ds, eta=0.5, T=10):
            report = perturbation_norms(gs, km, flips, h0, m)  # raises on violation
            saw_flips = saw_flips or flips.max() > 0
            assert report.norm_M <= report.ceiling / 2 + 1e-12
            assert report.norm_H_drift <= report.ceiling + 1e-12
        assert saw_flips

    def test_h_norm_at_most_one(self):
        ds = _dataset(40, 6, 28)
        net = init_network(120, 6, 1.0 / math.sqrt(40), False, 29)
        for gs, _, _, _ in capture_gram_run(net, ds, eta=0.8, T=5):
            assert np.linalg.norm(gs.H, 2) <= 1.0 + 1e-10


def test_matrix_csv_round_trip(tmp_path):
    mat = sample_uniform_sphere(6, 5, 30).points
    save_matrix(mat, tmp_path / "m.csv")
    back = np.loadtxt(tmp_path / "m.csv", delimiter=",")
    assert np.array_equal(back, mat)
    save_matrix(mat, tmp_path / "m.csv.gz", compress=True)
    import gzip
    with gzip.open(tmp_path / "m.csv.gz", "rt") as fh:
        line = fh.readline()
    assert line.count(",") == 4
