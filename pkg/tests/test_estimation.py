import numpy as np
import pytest

from samid import (
    Dataset,
    FitOptions,
    NoiseSpec,
    NumericalError,
    SwitchingSpec,
    assign_labels,
    clairvoyant_fit,
    feature_cluster_labels,
    fit_submodels,
    generate_inputs,
    gpca_lite_fit,
    match_clusters,
    noise_for_target_snr,
    scs_label,
    simulate,
    tls_linear,
)
from samid.rng import derive_seed


def orthogonal_cost(theta, gamma, x, y):
    """Sum of squared orthogonal distances from (x, y) points to y = theta x + gamma."""
    return float(np.sum((y - theta * x - gamma) ** 2) / (1.0 + theta**2))


def total_mse(estimates, model, perm):
    out = 0.0
    for i, est in enumerate(estimates):
        theta, gamma = model.submodels[perm[i]]
        out += float(np.mean((est.Theta_hat - theta) ** 2))
        out += float(np.mean((est.Gamma_hat - gamma) ** 2))
    return out


class TestTlsLinear:
    def test_noiseless_line(self):
        theta = tls_linear([[1.0, -1.0]], [[2.0, -2.0]])
        assert theta[0, 0] == pytest.approx(2.0, abs=1e-14)

    def test_noiseless_mimo_submodel(self, mimo_model):
        D = generate_inputs(2, 10, seed=31)
        data = simulate(mimo_model, D, np.zeros(10, dtype=int), NoiseSpec(0, 0), seed=0)
        Xc = data.X - data.X.mean(axis=1, keepdims=True)
        Yc = data.Y - data.Y.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(tls_linear(Xc, Yc), [[0.7, 0.4], [0.2, 0.3]], atol=1e-10)

    def test_swapping_x_and_y_gives_the_same_line(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=40)
        y = 1.4 * x + rng.normal(scale=0.3, size=40)
        xc, yc = x - x.mean(), y - y.mean()
        forward = tls_linear(xc[None, :], yc[None, :])[0, 0]
        backward = tls_linear(yc[None, :], xc[None, :])[0, 0]
        # orthogonal regression is symmetric in the roles of x and y
        assert forward * backward == pytest.approx(1.0, abs=1e-10)

    def test_grid_optimality(self):
        rng = np.random.default_rng(11)
        for case in range(10):
            x = rng.normal(size=30)
            y = rng.uniform(0.3, 3.0) * x + rng.uniform(-1, 1) + rng.normal(scale=0.2, size=30)
            xc, yc = x - x.mean(), y - y.mean()
            theta = tls_linear(xc[None, :], yc[None, :])[0, 0]
            gamma = y.mean() - theta * x.mean()
            best = orthogonal_cost(theta, gamma, x, y)
            for dt in np.arange(-5e-4, 5.1e-4, 1e-4):
                for dg in np.arange(-5e-4, 5.1e-4, 1e-4):
                    assert best <= orthogonal_cost(theta + dt, gamma + dg, x, y) + 1e-12

    def test_too_few_columns(self):
        with pytest.raises(ValueError):
            tls_linear(np.zeros((2, 2)), np.zeros((1, 2)))

    def test_nongeneric_rejected(self):
        # output carries all the variance: trailing right-singular block is singular
        Xc = np.array([[0.0, 0.0, 0.0]])
        Yc = np.array([[1.0, -1.0, 0.0]])
        with pytest.raises(NumericalError):
            tls_linear(Xc, Yc)


class TestFitSubmodels:
    def test_noiseless_exact(self, siso_model, sign_switching):
        D = generate_inputs(1, 60, seed=3)
        labels = assign_labels(sign_switching, D, seed=0)
        data = simulate(siso_model, D, labels, NoiseSpec(0, 0), seed=0)
        estimates = fit_submodels(data, labels)
        assert estimates[0].Theta_hat[0, 0] == pytest.approx(1.7, abs=1e-10)
        assert estimates[0].Gamma_hat[0] == pytest.approx(0.9, abs=1e-10)
        assert estimates[1].Theta_hat[0, 0] == pytest.approx(2.8, abs=1e-10)
        assert estimates[1].Gamma_hat[0] == pytest.approx(1.2, abs=1e-10)

    def test_equal_weights_match_unweighted(self, siso_model, sign_switching):
        D = generate_inputs(1, 50, seed=8)
        labels = assign_labels(sign_switching, D, seed=0)
        data = simulate(siso_model, D, labels, NoiseSpec(0.05, 0.05), seed=4)
        flat = np.full(50, 0.37)
        weighted = fit_submodels(
            data, labels, M_diag=flat, opts=FitOptions(weight_mode="adjacency_diagonal")
        )
        plain = fit_submodels(data, labels)
        for a, b in zip(weighted, plain):
            np.testing.assert_allclose(a.Theta_hat, b.Theta_hat, atol=1e-12)
            np.testing.assert_allclose(a.Gamma_hat, b.Gamma_hat, atol=1e-12)

    def test_cluster_too_small(self, siso_model):
        data = simulate(siso_model, [[1.0, 2.0, 3.0]], [0, 0, 1], NoiseSpec(0, 0), seed=0)
        with pytest.raises(NumericalError):
            fit_submodels(data, data.labels)

    def test_threshold_drops_points(self, siso_model, sign_switching):
        D = generate_inputs(1, 40, seed=9)
        labels = assign_labels(sign_switching, D, seed=0)
        data = simulate(siso_model, D, labels, NoiseSpec(0, 0), seed=0)
        diag = np.abs(D[0]) + 0.1
        kept = fit_submodels(data, labels, M_diag=diag, opts=FitOptions(diag_threshold=0.5))
        assert all(e.n_used < np.sum(labels == e.cluster_index) for e in kept)

    def test_weighting_helps_in_the_breakdown_region(self, siso_model, sign_switching):
        # at 30 dB the pipeline mislabels points near the intersection; the
        # adjacency diagonal downweights exactly those
        D = generate_inputs(1, 200, seed=77)
        labels = assign_labels(sign_switching, D, seed=0)
        noise = noise_for_target_snr(siso_model, D, labels, 30.0, 1.0)
        sum_weighted, sum_plain, used = 0.0, 0.0, 0
        for r in range(100):
            data = simulate(siso_model, D, labels, noise, derive_seed(404, r))
            try:
                pred, diag = scs_label(data, 2, seed=derive_seed(405, r))
                perm, _ = match_clusters(pred, labels, 2)
                weighted = fit_submodels(
                    data,
                    pred,
                    M_diag=diag.adjacency_diag,
                    opts=FitOptions(weight_mode="adjacency_diagonal"),
                )
                plain = fit_submodels(data, pred)
            except NumericalError:
                continue
            sum_weighted += total_mse(weighted, siso_model, perm)
            sum_plain += total_mse(plain, siso_model, perm)
            used += 1
        assert used >= 90
        assert sum_weighted <= 1.05 * sum_plain

    def test_translation_equivariance(self, siso_model, sign_switching):
        D = generate_inputs(1, 60, seed=14)
        labels = assign_labels(sign_switching, D, seed=0)
        data = simulate(siso_model, D, labels, NoiseSpec(0.02, 0.02), seed=5)
        a, b = 0.8, -1.3
        moved = Dataset(X=data.X + a, Y=data.Y + b, labels=labels)
        for base, shifted in zip(fit_submodels(data, labels), fit_submodels(moved, labels)):
            np.testing.assert_allclose(shifted.Theta_hat, base.Theta_hat, atol=1e-10)
            expected = base.Gamma_hat + b - base.Theta_hat @ np.array([a])
            np.testing.assert_allclose(shifted.Gamma_hat, expected, atol=1e-10)


class TestClairvoyant:
    def test_noiseless_exact(self, mimo_model):
        D = generate_inputs(2, 30, seed=6)
        labels = assign_labels(SwitchingSpec.jump([0.5, 0.5]), D, seed=7)
        data = simulate(mimo_model, D, labels, NoiseSpec(0, 0), seed=0)
        for i, est in enumerate(clairvoyant_fit(data)):
            np.testing.assert_allclose(est.Theta_hat, mimo_model.theta(i), atol=1e-10)
            np.testing.assert_allclose(est.Gamma_hat, mimo_model.gamma(i), atol=1e-10)

    def test_missing_labels_rejected(self, siso_model):
        data = Dataset(X=np.ones((1, 5)), Y=np.ones((1, 5)))
        with pytest.raises(ValueError):
            clairvoyant_fit(data)

    def test_order_invariance(self, siso_model, sign_switching):
        D = generate_inputs(1, 50, seed=20)
        labels = assign_labels(sign_switching, D, seed=0)
        data = simulate(siso_model, D, labels, NoiseSpec(0.05, 0.05), seed=9)
        order = np.random.default_rng(1).permutation(50)
        shuffled = Dataset(X=data.X[:, order], Y=data.Y[:, order], labels=labels[order])
        for a, b in zip(clairvoyant_fit(data), clairvoyant_fit(shuffled)):
            np.testing.assert_allclose(a.Theta_hat, b.Theta_hat, atol=1e-12)
            np.testing.assert_allclose(a.Gamma_hat, b.Gamma_hat, atol=1e-12)

    def test_beats_unlabeled_methods_on_shared_data(self, siso_model, sign_switching):
        # extra information must win: clairvoyant MSE below every unlabeled
        # method on the same draw (large-N single-dataset comparison)
        D = generate_inputs(1, 10_000, seed=5)
        labels = assign_labels(sign_switching, D, seed=0)
        noise = noise_for_target_snr(siso_model, D, labels, 35.0, 1.0)
        data = simulate(siso_model, D, labels, noise, seed=9)
        cml = total_mse(clairvoyant_fit(data), siso_model, (0, 1))
        gpca = total_mse(gpca_lite_fit(data), siso_model, (0, 1))
        fk_labels = feature_cluster_labels(data, 2, c=7, seed=3)
        perm, _ = match_clusters(fk_labels, labels, 2)
        feature = total_mse(fit_submodels(data, fk_labels), siso_model, perm)
        assert cml < gpca
        assert cml < feature

    def test_beats_subspace_labels_at_moderate_snr(self, siso_model, sign_switching):
        D = generate_inputs(1, 2000, seed=5)
        labels = assign_labels(sign_switching, D, seed=0)
        noise = noise_for_target_snr(siso_model, D, labels, 35.0, 1.0)
        data = simulate(siso_model, D, labels, noise, seed=9)
        pred, _ = scs_label(data, 2, seed=11)
        perm, mismatches = match_clusters(pred, labels, 2)
        assert mismatches > 0
        scs = total_mse(fit_submodels(data, pred), siso_model, perm)
        cml = total_mse(clairvoyant_fit(data), siso_model, (0, 1))
        assert cml < scs
