"""Subspace machinery: row space, adjacency matrix, spectral labeling.

After subtracting the intersection point from every observation, the data
matrix factors through the (block-diagonal up to permutation) input matrix, so
the dominant right-singular subspace V gives an adjacency matrix M = |V V^T|
whose normalized form has K leading unit eigenvalues whose eigenvectors
indicate submodel membership. Clustering the rows of those eigenvectors with
K-means recovers the labels.
"""

import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .intersection import IntersectionPoint, estimate_intersection, fit_hdc_coefficients
from .models import Dataset
from .rng import generator

_ROW_SUM_FLOOR = 1e-12  # relative floor on adjacency row sums
_KMEANS_MAX_ITER = 100
_KMEANS_REL_TOL = 1e-9


@dataclass(frozen=True)
class RowSpace:
    """Dominant right-singular subspace of the centered observation matrix."""

    V: np.ndarray
    singular_values: np.ndarray
    residual_energy: float


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Nonnegative symmetric affinity M with its row sums and normalization."""

    M: np.ndarray
    W: np.ndarray
    Mbar: np.ndarray

    @classmethod
    def from_dense(cls, M: np.ndarray) -> "AdjacencyMatrix":
        M = 0.5 * (M + M.T)
        W = M.sum(axis=1)
        W = np.maximum(W, _ROW_SUM_FLOOR * W.max())
        inv_sqrt = 1.0 / np.sqrt(W)
        return cls(M=M, W=W, Mbar=M * inv_sqrt[:, None] * inv_sqrt[None, :])


@dataclass(frozen=True)
class SpectralEmbedding:
    """Eigenvectors of the normalized adjacency for its K largest eigenvalues."""

    E: np.ndarray
    eigenvalues: np.ndarray
    next_eigenvalue: float | None = None


def row_space(Z: np.ndarray, z0: np.ndarray, r: int) -> RowSpace:
    """Top-r right-singular vectors of Z with z0 subtracted from every column."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    z0 = np.asarray(z0, dtype=float).ravel()
    n = Z.shape[1]
    if r < 1 or r > min(Z.shape):
        raise ValueError(f"retained rank {r} outside [1, {min(Z.shape)}]")
    if n <= r:
        raise ValueError(f"need more than r={r} observations, got {n}")
    _, s, vt = np.linalg.svd(Z - z0[:, None], full_matrices=False)
    return RowSpace(
        V=vt[:r].T.copy(),
        singular_values=s[:r].copy(),
        residual_energy=float(np.sum(s[r:] ** 2)),
    )


def adjacency(rowspace: RowSpace) -> AdjacencyMatrix:
    """Elementwise absolute value of V V^T, symmetrized and normalized.

    Row sums are floored at 1e-12 of their maximum: observations sitting on
    the intersection point produce near-zero rows that would otherwise blow up
    the normalization.
    """
    return AdjacencyMatrix.from_dense(np.abs(rowspace.V @ rowspace.V.T))


def spectral_embed(adj: AdjacencyMatrix, K: int) -> SpectralEmbedding:
    """Eigenvectors of the K algebraically largest eigenvalues of Mbar."""
    n = adj.Mbar.shape[0]
    if not 0 < K < n:
        raise ValueError(f"need 0 < K < N, got K={K}, N={n}")
    eigenvalues, eigenvectors = np.linalg.eigh(adj.Mbar)
    order = np.argsort(eigenvalues)[::-1]
    return SpectralEmbedding(
        E=eigenvectors[:, order[:K]],
        eigenvalues=eigenvalues[order[:K]],
        next_eigenvalue=float(eigenvalues[order[K]]) if K < n else None,
    )


def _kmeans_pp_centers(rows: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centers = np.empty((K, rows.shape[1]))
    centers[0] = rows[int(rng.integers(n))]
    d2 = np.sum((rows - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total > 0:
            cdf = np.cumsum(d2 / total)
            idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), n - 1)
        else:
            idx = int(rng.integers(n))
        centers[k] = rows[idx]
        d2 = np.minimum(d2, np.sum((rows - centers[k]) ** 2, axis=1))
    return centers


def _lloyd(rows: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float] | None:
    """One converged K-means run; None if a cluster empties."""
    K = centers.shape[0]
    previous_inertia = np.inf
    labels = None
    for _ in range(_KMEANS_MAX_ITER):
        d2 = np.sum((rows[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        counts = np.bincount(labels, minlength=K)
        if np.any(counts == 0):
            return None
        inertia = float(d2[np.arange(rows.shape[0]), labels].sum())
        for k in range(K):
            centers[k] = rows[labels == k].mean(axis=0)
        if previous_inertia - inertia <= _KMEANS_REL_TOL * max(previous_inertia, 1e-300):
            break
        previous_inertia = inertia
    d2 = np.sum((rows[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    if np.any(np.bincount(labels, minlength=K) == 0):
        return None
    return labels, float(d2[np.arange(rows.shape[0]), labels].sum())


def kmeans_rows_detailed(
    rows: np.ndarray, K: int, restarts: int = 10, seed: int = 0
) -> tuple[np.ndarray, list[float]]:
    """K-means over the rows, returning the winning labels and restart scores.

    Each restart uses k-means++ seeding from its own derived sub-seed; the
    labeling with the lowest within-cluster sum of squares wins, ties broken
    by restart index so the result is independent of execution order. Failed
    restarts (an empty cluster at convergence) score NaN; if every restart
    fails a :class:`NumericalError` is raised.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if restarts < 1:
        raise ValueError(f"need at least one restart, got {restarts}")
    if K < 1 or K > rows.shape[0]:
        raise ValueError(f"cluster count {K} outside [1, {rows.shape[0]}]")
    best = None
    scores: list[float] = []
    for restart in range(restarts):
        rng = generator(seed, restart)
        outcome = _lloyd(rows, _kmeans_pp_centers(rows, K, rng))
        if outcome is None:
            scores.append(float("nan"))
            continue
        labels, inertia = outcome
        scores.append(inertia)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    if best is None:
        raise NumericalError("every K-means restart converged with an empty cluster")
    return best[0], scores


def kmeans_rows(rows: np.ndarray, K: int, restarts: int = 10, seed: int = 0) -> np.ndarray:
    """Labels from :func:`kmeans_rows_detailed`."""
    return kmeans_rows_detailed(rows, K, restarts, seed)[0]


@dataclass
class ScsDiagnostics:
    """Per-run diagnostics of the spectral labeling pipeline."""

    intersection_residual: float
    eigenvalues: np.ndarray
    eigengap: float
    restart_scores: list[float]
    adjacency_diag: np.ndarray = field(repr=False, default=None)
    intersection: IntersectionPoint | None = None

    def to_dict(self) -> dict:
        return {
            "intersection_residual": self.intersection_residual,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigengap": self.eigengap,
            "restart_scores": [float(v) for v in self.restart_scores],
        }


def scs_label(
    data: Dataset, K: int, seed: int, restarts: int = 10
) -> tuple[np.ndarray, ScsDiagnostics]:
    """Label observations by spectral clustering on the observation subspace.

    Pipeline: estimate the intersection point from the data, subtract it,
    take the rank-(K*Nx) row space, form the normalized adjacency matrix, and
    K-means the rows of its top-K eigenvectors.
    """
    if data.n_observations < K * data.nx + 1:
        raise ValueError(
            f"need at least {K * data.nx + 1} observations for K={K}, "
            f"Nx={data.nx}; got {data.n_observations}"
        )
    point = estimate_intersection(fit_hdc_coefficients(data, K))
    space = row_space(data.z_matrix(), point.z0, r=K * data.nx)
    adj = adjacency(space)
    embedding = spectral_embed(adj, K)
    labels, scores = kmeans_rows_detailed(embedding.E, K, restarts=restarts, seed=seed)
    gap = float("nan")
    if embedding.next_eigenvalue is not None:
        gap = float(embedding.eigenvalues[-1] - embedding.next_eigenvalue)
    diagnostics = ScsDiagnostics(
        intersection_residual=point.residual,
        eigenvalues=embedding.eigenvalues,
        eigengap=gap,
        restart_scores=scores,
        adjacency_diag=np.diag(adj.M).copy(),
        intersection=point,
    )
    return labels, diagnostics
