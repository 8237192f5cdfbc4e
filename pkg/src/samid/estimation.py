"""Per-cluster parameter estimation with total least squares.

Both the input and the output observations carry noise, so each submodel is
fit by TLS: stack the centered inputs and outputs, take the SVD, and read the
parameter matrix off the right-singular block structure. The affine term is
handled by centering (the constant regressor is noise-free, so augmenting the
input with a 1 would wrongly perturb it); the fitted plane always passes
through the (weighted) data mean.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .models import Dataset

_TLS_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class SubmodelEstimate:
    """Fitted (Theta, Gamma) for one cluster of observations."""

    Theta_hat: np.ndarray
    Gamma_hat: np.ndarray
    n_used: int
    cluster_index: int


@dataclass(frozen=True)
class FitOptions:
    """Options for the per-cluster fit.

    ``weight_mode`` "adjacency_diagonal" weights observations by the diagonal
    of the adjacency matrix (points near the intersection carry little
    information and get downweighted); ``diag_threshold`` drops observations
    whose diagonal entry falls below that fraction of the cluster maximum.
    """

    weight_mode: str = "none"
    diag_threshold: float = 0.0

    def __post_init__(self):
        if self.weight_mode not in ("none", "adjacency_diagonal"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")
        if not 0.0 <= self.diag_threshold < 1.0:
            raise ValueError("diag_threshold must lie in [0, 1)")


def tls_linear(Xc: np.ndarray, Yc: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Total least squares matrix solving Yc ~ Theta Xc on centered data.

    Columns are scaled by sqrt(weight) when weights are given. With the SVD
    of [Xc; Yc]^T partitioned as V = [[V11, V12], [V21, V22]] (last Ny
    singular directions on the right), the solution is
    Theta = -V22^{-T} V12^T.
    """
    Xc = np.atleast_2d(np.asarray(Xc, dtype=float))
    Yc = np.atleast_2d(np.asarray(Yc, dtype=float))
    nx, m = Xc.shape
    ny = Yc.shape[0]
    if Yc.shape[1] != m:
        raise ValueError("input and output column counts differ")
    if m < nx + ny:
        raise ValueError(f"need at least {nx + ny} observations for TLS, got {m}")
    stacked = np.vstack([Xc, Yc])
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (m,) or np.any(weights <= 0):
            raise ValueError("weights must be positive and one per observation")
        stacked = stacked * np.sqrt(weights)[None, :]
    _, _, vt = np.linalg.svd(stacked.T, full_matrices=False)
    V = vt.T
    V12 = V[:nx, nx:]
    V22 = V[nx:, nx:]
    if np.linalg.svd(V22, compute_uv=False)[-1] <= _TLS_SINGULAR_TOL:
        raise NumericalError("nongeneric TLS problem: trailing singular block is singular")
    return -np.linalg.solve(V22.T, V12.T)


def _weighted_mean(values: np.ndarray, weights: np.ndarray | None) -> np.ndarray:
    if weights is None:
        return values.mean(axis=1)
    return values @ weights / weights.sum()


def _affine_tls(
    X: np.ndarray,
    Y: np.ndarray,
    weights: np.ndarray | None = None,
    input_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Affine TLS fit via centering; optionally rescales inputs before TLS.

    ``input_scale`` divides the centered inputs prior to the TLS step (used
    to equalize noise levels when sigma_x != sigma_y) and is undone on the
    returned Theta.
    """
    xbar = _weighted_mean(X, weights)
    ybar = _weighted_mean(Y, weights)
    theta = tls_linear((X - xbar[:, None]) / input_scale, Y - ybar[:, None], weights)
    theta = theta / input_scale
    gamma = ybar - theta @ xbar
    return theta, gamma


def fit_submodels(
    data: Dataset,
    labels: np.ndarray,
    M_diag: np.ndarray | None = None,
    opts: FitOptions = FitOptions(),
) -> list[SubmodelEstimate]:
    """TLS fit of every cluster given a labeling.

    ``M_diag`` supplies the adjacency diagonal used for thresholding and/or
    weighting per ``opts``; clusters left with fewer than Nx+Ny observations
    raise :class:`NumericalError`.
    """
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (data.n_observations,):
        raise ValueError("labels length must match the observation count")
    needs_diag = opts.weight_mode == "adjacency_diagonal" or opts.diag_threshold > 0
    if needs_diag and M_diag is None:
        raise ValueError("the requested fit options need the adjacency diagonal")
    if M_diag is not None:
        M_diag = np.asarray(M_diag, dtype=float)
        if M_diag.shape != (data.n_observations,):
            raise ValueError("M_diag length must match the observation count")
    estimates = []
    for i in range(labels.max() + 1):
        mask = labels == i
        X, Y = data.X[:, mask], data.Y[:, mask]
        diag = M_diag[mask] if M_diag is not None else None
        if opts.diag_threshold > 0:
            keep = diag >= opts.diag_threshold * diag.max()
            X, Y, diag = X[:, keep], Y[:, keep], diag[keep]
        m = X.shape[1]
        if m < data.nx + data.ny:
            raise NumericalError(
                f"cluster {i} has {m} observations after thresholding; "
                f"need at least {data.nx + data.ny}"
            )
        weights = diag if opts.weight_mode == "adjacency_diagonal" else None
        if weights is not None and np.any(weights <= 0):
            weights = np.maximum(weights, 1e-300)
        theta, gamma = _affine_tls(X, Y, weights)
        estimates.append(
            SubmodelEstimate(Theta_hat=theta, Gamma_hat=gamma, n_used=m, cluster_index=i)
        )
    return estimates


def clairvoyant_fit(data: Dataset, sigma_ratio: float = 1.0) -> list[SubmodelEstimate]:
    """Reference fit with the true labels (equal-weight TLS per cluster).

    TLS is the maximum-likelihood estimate for isotropic Gaussian noise on
    both sides; when sigma_x != sigma_y the inputs are rescaled by
    ``sigma_ratio`` = sigma_x / sigma_y before the TLS step so the implied
    noise stays isotropic.
    """
    if data.labels is None:
        raise ValueError("clairvoyant fit needs the true labels")
    if sigma_ratio <= 0:
        raise ValueError("sigma_ratio must be positive")
    labels = data.labels
    estimates = []
    for i in range(labels.max() + 1):
        mask = labels == i
        X, Y = data.X[:, mask], data.Y[:, mask]
        if X.shape[1] < data.nx + data.ny:
            raise NumericalError(f"cluster {i} too small for TLS")
        theta, gamma = _affine_tls(X, Y, weights=None, input_scale=sigma_ratio)
        estimates.append(
            SubmodelEstimate(Theta_hat=theta, Gamma_hat=gamma, n_used=X.shape[1], cluster_index=i)
        )
    return estimates
