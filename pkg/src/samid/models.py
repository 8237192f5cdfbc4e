"""Switched affine models: definition, simulation, SNR accounting, file I/O.

A switched affine model owns K affine submodels (Theta_i, Gamma_i). At every
step one submodel is selected (by an input-dependent rule, by chance, or by an
explicit schedule) and the noisy observation is

    x_n = d_n + e_n,        e_n ~ N(0, sigma_x^2 I)
    y_n = Theta_i d_n + Gamma_i + w_n,   w_n ~ N(0, sigma_y^2 I)

with d_n the noiseless input. All operations here are pure functions of their
arguments including the seed.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .rng import derive_seed, generator, standard_normal


@dataclass(frozen=True)
class SwitchedAffineModel:
    """K affine submodels sharing input dimension Nx and output dimension Ny.

    ``submodels`` is an ordered tuple of (Theta, Gamma) pairs with Theta of
    shape (Ny, Nx) and Gamma of length Ny. Instances are treated as immutable
    and are safe to share across threads.
    """

    K: int
    Nx: int
    Ny: int
    submodels: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"need at least 2 submodels, got K={self.K}")
        if self.Nx < 1 or self.Ny < 1:
            raise ValueError("input and output dimensions must be positive")
        if len(self.submodels) != self.K:
            raise ValueError("submodel count does not match K")
        for theta, gamma in self.submodels:
            if theta.shape != (self.Ny, self.Nx):
                raise ValueError(f"expected Theta of shape {(self.Ny, self.Nx)}, got {theta.shape}")
            if gamma.shape != (self.Ny,):
                raise ValueError(f"expected Gamma of length {self.Ny}, got shape {gamma.shape}")

    @classmethod
    def from_parameters(cls, pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> "SwitchedAffineModel":
        """Build a model from (Theta, Gamma) pairs, inferring K, Nx, Ny."""
        pairs = tuple(
            (np.atleast_2d(np.asarray(t, dtype=float)), np.atleast_1d(np.asarray(g, dtype=float)))
            for t, g in pairs
        )
        if not pairs:
            raise ValueError("no submodels given")
        ny, nx = pairs[0][0].shape
        return cls(K=len(pairs), Nx=nx, Ny=ny, submodels=pairs)

    def theta(self, i: int) -> np.ndarray:
        return self.submodels[i][0]

    def gamma(self, i: int) -> np.ndarray:
        return self.submodels[i][1]

    def evaluate(self, i: int, D: np.ndarray) -> np.ndarray:
        """Noiseless outputs Theta_i D + Gamma_i for a column-stacked input matrix."""
        theta, gamma = self.submodels[i]
        return theta @ D + gamma[:, None]

    def stacked_parameter_matrix(self) -> np.ndarray:
        """The (Nx+Ny) x (K*Nx) matrix [I ... I; Theta_1 ... Theta_K]."""
        top = np.tile(np.eye(self.Nx), (1, self.K))
        bottom = np.hstack([t for t, _ in self.submodels])
        return np.vstack([top, bottom])


@dataclass
class Dataset:
    """Column-stacked observations; column n of every field describes step n."""

    X: np.ndarray
    Y: np.ndarray
    labels: np.ndarray | None = None
    D: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if self.X.shape[1] != self.Y.shape[1]:
            raise ValueError("X and Y must have the same number of columns")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.X.shape[1],):
                raise ValueError("labels length must match the observation count")
        if self.D is not None:
            self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
            if self.D.shape != self.X.shape:
                raise ValueError("D must have the same shape as X")

    @property
    def n_observations(self) -> int:
        return self.X.shape[1]

    @property
    def nx(self) -> int:
        return self.X.shape[0]

    @property
    def ny(self) -> int:
        return self.Y.shape[0]

    def z_matrix(self) -> np.ndarray:
        """Stacked observation matrix with columns z_n = [x_n; y_n]."""
        return np.vstack([self.X, self.Y])


@dataclass(frozen=True)
class NoiseSpec:
    """Per-component standard deviations of the input and output noise."""

    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class SwitchingSpec:
    """How observations are routed to submodels.

    mode "piecewise": ``predicates[i](d_n)`` decides membership; the first
    matching predicate wins and a column matching none is an error.
    mode "jump": label drawn i.i.d. from ``probabilities``.
    mode "explicit": ``labels`` used verbatim.
    """

    mode: str
    predicates: tuple[Callable[[np.ndarray], bool], ...] | None = None
    probabilities: tuple[float, ...] | None = None
    labels: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.mode == "piecewise":
            if not self.predicates:
                raise ValueError("piecewise switching needs predicates")
        elif self.mode == "jump":
            if not self.probabilities:
                raise ValueError("jump switching needs probabilities")
            p = np.asarray(self.probabilities, dtype=float)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("jump probabilities must be nonnegative and sum to 1")
        elif self.mode == "explicit":
            if self.labels is None:
                raise ValueError("explicit switching needs labels")
        else:
            raise ValueError(f"unknown switching mode {self.mode!r}")

    @classmethod
    def piecewise(cls, predicates) -> "SwitchingSpec":
        return cls(mode="piecewise", predicates=tuple(predicates))

    @classmethod
    def jump(cls, probabilities) -> "SwitchingSpec":
        return cls(mode="jump", probabilities=tuple(float(p) for p in probabilities))

    @classmethod
    def explicit(cls, labels) -> "SwitchingSpec":
        return cls(mode="explicit", labels=tuple(int(v) for v in labels))


def first_coordinate_slabs(K: int) -> tuple[Callable[[np.ndarray], bool], ...]:
    """Partition inputs into K equal-mass slabs of the first coordinate.

    Thresholds are standard-normal quantiles, so with standard-normal inputs
    the submodels receive equal shares. Labels run from the highest slab down:
    for K=2 this is the rule ``label 0 iff d[0] >= 0``.
    """
    if K < 2:
        raise ValueError("need at least two slabs")
    quantiles = [NormalDist().inv_cdf(i / K) for i in range(1, K)]

    def make(lo: float | None, hi: float | None):
        def predicate(d: np.ndarray) -> bool:
            v = float(np.atleast_1d(d)[0])
            return (lo is None or v >= lo) and (hi is None or v < hi)

        return predicate

    bounds = [None, *quantiles, None]
    # label i covers [bounds[K-1-i], bounds[K-i]); label 0 is the top slab
    return tuple(make(bounds[K - 1 - i], bounds[K - i]) for i in range(K))


def generate_inputs(Nx: int, N: int, seed: int) -> np.ndarray:
    """Deterministic i.i.d. standard-normal input matrix of shape (Nx, N)."""
    if N < 1:
        raise ValueError(f"need at least one observation, got N={N}")
    if Nx < 1:
        raise ValueError(f"input dimension must be positive, got Nx={Nx}")
    return standard_normal(generator(seed), (Nx, N))


def assign_labels(spec: SwitchingSpec, D: np.ndarray, seed: int) -> np.ndarray:
    """Length-N label vector for the columns of D under the switching spec."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    n = D.shape[1]
    if spec.mode == "piecewise":
        labels = np.empty(n, dtype=int)
        for col in range(n):
            for i, predicate in enumerate(spec.predicates):
                if predicate(D[:, col]):
                    labels[col] = i
                    break
            else:
                raise ValueError(f"input column {col} matched no piecewise predicate")
        return labels
    if spec.mode == "jump":
        cdf = np.cumsum(np.asarray(spec.probabilities, dtype=float))
        u = generator(seed).random(n)
        return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1).astype(int)
    labels = np.asarray(spec.labels, dtype=int)
    if labels.shape != (n,):
        raise ValueError(f"explicit labels have length {labels.size}, expected {n}")
    return labels.copy()


def simulate(
    model: SwitchedAffineModel,
    D: np.ndarray,
    labels: np.ndarray,
    noise: NoiseSpec,
    seed: int,
) -> Dataset:
    """Draw one noisy dataset from the measurement model.

    Input noise is drawn first, output noise second, from a single generator
    seeded with ``seed``; repeated calls with identical arguments return
    bitwise-identical datasets.
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if D.shape[0] != model.Nx:
        raise ValueError(f"D has {D.shape[0]} rows, model expects {model.Nx}")
    if labels.shape != (D.shape[1],):
        raise ValueError("labels length must match the number of input columns")
    if labels.size and (labels.min() < 0 or labels.max() >= model.K):
        raise ValueError("labels out of range")
    rng = generator(seed)
    X = D + noise.sigma_x * standard_normal(rng, D.shape)
    Y = np.empty((model.Ny, D.shape[1]))
    for i in range(model.K):
        mask = labels == i
        if np.any(mask):
            Y[:, mask] = model.evaluate(i, D[:, mask])
    Y += noise.sigma_y * standard_normal(rng, Y.shape)
    return Dataset(X=X, Y=Y, labels=labels.copy(), D=D.copy(), seed=seed)


def _signal_energy(model: SwitchedAffineModel, D: np.ndarray, labels: np.ndarray) -> float:
    D = np.atleast_2d(np.asarray(D, dtype=float))
    labels = np.asarray(labels, dtype=int)
    total = float(np.sum(D * D))
    for i in range(model.K):
        mask = labels == i
        if np.any(mask):
            out = model.evaluate(i, D[:, mask])
            total += float(np.sum(out * out))
    return total


def snr_db(model: SwitchedAffineModel, D: np.ndarray, labels: np.ndarray, noise: NoiseSpec) -> float:
    """Signal-to-noise ratio in dB.

    The signal energy sums ``||Theta_i d_n + Gamma_i||^2`` for the submodel
    that actually produced observation n plus ``||d_n||^2``; the noise energy
    is ``N (Nx sigma_x^2 + Ny sigma_y^2)``.
    """
    noise_energy = np.atleast_2d(D).shape[1] * (
        model.Nx * noise.sigma_x**2 + model.Ny * noise.sigma_y**2
    )
    if noise_energy == 0:
        raise ValueError("SNR undefined for zero noise")
    return 10.0 * math.log10(_signal_energy(model, D, labels) / noise_energy)


def noise_for_target_snr(
    model: SwitchedAffineModel,
    D: np.ndarray,
    labels: np.ndarray,
    target_db: float,
    ratio: float,
) -> NoiseSpec:
    """Invert the SNR formula: the NoiseSpec hitting ``target_db`` exactly.

    ``ratio`` is sigma_x / sigma_y; pass 0 for output-only noise.
    """
    if not math.isfinite(target_db):
        raise ValueError("target SNR must be finite")
    if not math.isfinite(ratio) or ratio < 0:
        raise ValueError("sigma ratio must be finite and nonnegative")
    n = np.atleast_2d(D).shape[1]
    signal = _signal_energy(model, D, labels)
    snr_linear = 10.0 ** (target_db / 10.0)
    sigma_y_sq = signal / (n * snr_linear * (model.Nx * ratio**2 + model.Ny))
    sigma_y = math.sqrt(sigma_y_sq)
    return NoiseSpec(sigma_x=ratio * sigma_y, sigma_y=sigma_y)


@dataclass(frozen=True)
class IdentifiabilityCheck:
    """Numerical rank verdict on the stacked parameter matrix."""

    ok: bool
    singular_values: np.ndarray = field(repr=False)
    threshold: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def check_identifiability(model: SwitchedAffineModel) -> IdentifiabilityCheck:
    """Whether [I ... I; Theta_1 ... Theta_K] has full column rank.

    Uses the standard numerical rank test: singular values above
    ``max(shape) * eps * s_max`` count toward the rank.
    """
    A = model.stacked_parameter_matrix()
    s = np.linalg.svd(A, compute_uv=False)
    threshold = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > threshold))
    return IdentifiabilityCheck(ok=rank == model.K * model.Nx, singular_values=s, threshold=threshold)


# ---------------------------------------------------------------------------
# File formats


def model_to_dict(model: SwitchedAffineModel) -> dict:
    """JSON-ready dict: theta flattened row-major, gamma as a flat list."""
    return {
        "K": model.K,
        "Nx": model.Nx,
        "Ny": model.Ny,
        "submodels": [
            {"theta": [float(v) for v in t.ravel()], "gamma": [float(v) for v in g]}
            for t, g in model.submodels
        ],
    }


def model_from_dict(payload: dict) -> SwitchedAffineModel:
    required = {"K", "Nx", "Ny", "submodels"}
    if set(payload) != required:
        raise ValueError(f"model JSON must have exactly the keys {sorted(required)}")
    K, nx, ny = int(payload["K"]), int(payload["Nx"]), int(payload["Ny"])
    pairs = []
    for entry in payload["submodels"]:
        if set(entry) != {"theta", "gamma"}:
            raise ValueError("each submodel needs exactly the keys theta, gamma")
        theta = np.asarray(entry["theta"], dtype=float).reshape(ny, nx)
        gamma = np.asarray(entry["gamma"], dtype=float)
        pairs.append((theta, gamma))
    return SwitchedAffineModel(K=K, Nx=nx, Ny=ny, submodels=tuple(pairs))


def save_model_json(model: SwitchedAffineModel, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_dict(model), handle, indent=2)
        handle.write("\n")


def load_model_json(path) -> SwitchedAffineModel:
    with open(path, "r", encoding="utf-8") as handle:
        return model_from_dict(json.load(handle))


def save_dataset_csv(dataset: Dataset, path, include_labels: bool | None = None) -> None:
    """Write observations as ``x1..xNx,y1..yNy[,label]`` rows.

    Floats use Python repr, i.e. the shortest decimal that round-trips the
    IEEE-754 value exactly.
    """
    if include_labels is None:
        include_labels = dataset.labels is not None
    if include_labels and dataset.labels is None:
        raise ValueError("dataset has no labels to write")
    header = [f"x{i + 1}" for i in range(dataset.nx)] + [f"y{i + 1}" for i in range(dataset.ny)]
    if include_labels:
        header.append("label")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for n in range(dataset.n_observations):
            row = [repr(float(v)) for v in dataset.X[:, n]]
            row += [repr(float(v)) for v in dataset.Y[:, n]]
            if include_labels:
                row.append(str(int(dataset.labels[n])))
            writer.writerow(row)


def load_dataset_csv(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset_csv`; dims from the header."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise ValueError("empty dataset file")
        nx = sum(1 for name in header if name.startswith("x"))
        ny = sum(1 for name in header if name.startswith("y"))
        has_labels = header[-1] == "label"
        expected = [f"x{i + 1}" for i in range(nx)] + [f"y{i + 1}" for i in range(ny)]
        if has_labels:
            expected.append("label")
        if header != expected or nx == 0 or ny == 0:
            raise ValueError(f"unexpected dataset header {header!r}")
        rows = [line for line in reader if line]
    if not rows:
        raise ValueError("dataset file has no observations")
    values = np.array([[float(v) for v in row[: nx + ny]] for row in rows]).T
    labels = np.array([int(row[-1]) for row in rows]) if has_labels else None
    return Dataset(X=values[:nx], Y=values[nx:], labels=labels)
