"""Benchmark methods: feature-space K-means and a polynomial-coefficient fit.

``feature_cluster_labels`` clusters observations after mapping each one to the
parameters of a local affine fit over its nearest neighbors in input space
(meaningful only when nearby inputs tend to share a submodel).

``gpca_lite_fit`` recovers scalar bi-model parameters directly from the fitted
degree-2 vanishing polynomial: the two slopes are the roots of the quadratic
built from the coefficients and the offsets follow from a 2x2 solve. Squaring
the observations turns zero-mean noise into noise with mean -sigma^2, so this
route is biased; complex roots at low SNR are reported as failures.
"""

import numpy as np

from .errors import NumericalError
from .estimation import SubmodelEstimate
from .intersection import fit_hdc_coefficients
from .models import Dataset
from .subspace import kmeans_rows

_NEIGHBOR_CHUNK = 512


def local_affine_features(data: Dataset, c: int) -> np.ndarray:
    """Per-observation features: flattened (theta, gamma) of a local OLS fit.

    For each observation the ``c`` nearest observations in input space
    (Euclidean, the point itself included) are fit with ordinary least
    squares; the feature row is theta flattened row-major followed by gamma.
    """
    n = data.n_observations
    if c < data.nx + 1:
        raise ValueError(f"need a neighborhood of at least {data.nx + 1}, got c={c}")
    if n <= c:
        raise ValueError(f"need more than c={c} observations, got {n}")
    X, Y = data.X, data.Y
    p = data.nx + 1
    sq_norms = np.sum(X * X, axis=0)
    features = np.empty((n, data.ny * data.nx + data.ny))
    for start in range(0, n, _NEIGHBOR_CHUNK):
        stop = min(start + _NEIGHBOR_CHUNK, n)
        d2 = sq_norms[start:stop, None] - 2.0 * X[:, start:stop].T @ X + sq_norms[None, :]
        nearest = np.sort(np.argpartition(d2, c - 1, axis=1)[:, :c], axis=1)
        designs = np.concatenate(
            [X[:, nearest].transpose(1, 2, 0), np.ones((stop - start, c, 1))], axis=2
        )
        targets = Y[:, nearest].transpose(1, 2, 0)
        u, s, vt = np.linalg.svd(designs, full_matrices=False)
        bad = s[:, -1] <= max(c, p) * np.finfo(float).eps * s[:, 0]
        if np.any(bad):
            raise NumericalError(
                f"degenerate local neighborhood around observation "
                f"{start + int(np.argmax(bad))}"
            )
        beta = (vt.transpose(0, 2, 1) / s[:, None, :]) @ (u.transpose(0, 2, 1) @ targets)
        features[start:stop, : data.ny * data.nx] = beta[:, : data.nx].transpose(0, 2, 1).reshape(
            stop - start, -1
        )
        features[start:stop, data.ny * data.nx :] = beta[:, data.nx]
    return features


def feature_cluster_labels(
    data: Dataset, K: int, c: int, seed: int, restarts: int = 10
) -> np.ndarray:
    """K-means labels over the local affine-fit features."""
    return kmeans_rows(local_affine_features(data, c), K, restarts=restarts, seed=seed)


def parameters_from_hdc_coefficients(coeffs: np.ndarray) -> list[tuple[float, float]]:
    """Invert the degree-2 scalar polynomial coefficients to [(theta, gamma)].

    With coefficients [1, a, b, d, e, f] on the basis [y^2, xy, x^2, y, x, 1]
    the slopes solve t^2 + a t + b = 0 and the offsets the linear system
    {gamma_1 + gamma_2 = -d, gamma_1 theta_2 + gamma_2 theta_1 = e}. Submodels
    are returned sorted by slope.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (6,):
        raise ValueError("expected 6 coefficients of a degree-2 polynomial in (y, x)")
    c = coeffs / coeffs[0]
    theta_sum, theta_prod = -c[1], c[2]
    discriminant = theta_sum**2 - 4.0 * theta_prod
    if discriminant < 0:
        raise NumericalError(
            f"slope quadratic has complex roots (discriminant {discriminant:.3e})"
        )
    root = np.sqrt(discriminant)
    theta_1 = (theta_sum - root) / 2.0
    theta_2 = (theta_sum + root) / 2.0
    if root == 0:
        raise NumericalError("repeated slope root: offsets are not separable")
    gammas = np.linalg.solve(
        np.array([[1.0, 1.0], [theta_2, theta_1]]), np.array([-c[3], c[4]])
    )
    return [(theta_1, float(gammas[0])), (theta_2, float(gammas[1]))]


def gpca_lite_fit(data: Dataset) -> list[SubmodelEstimate]:
    """Bi-model scalar fit from the degree-2 vanishing polynomial.

    Only defined for Nx = Ny = 1 and two submodels; estimates come back in
    ascending-slope order.
    """
    if data.nx != 1 or data.ny != 1:
        raise ValueError("this method handles scalar input and output only")
    poly = fit_hdc_coefficients(data, K=2)
    pairs = parameters_from_hdc_coefficients(poly.channels[0])
    return [
        SubmodelEstimate(
            Theta_hat=np.array([[theta]]),
            Gamma_hat=np.array([gamma]),
            n_used=data.n_observations,
            cluster_index=i,
        )
        for i, (theta, gamma) in enumerate(pairs)
    ]
