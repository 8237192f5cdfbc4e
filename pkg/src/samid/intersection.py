"""Estimating the common point of all submodels from unlabeled data.

Every noiseless observation satisfies the degree-K polynomial identity
``prod_i (y_j - Theta_i[j,:] x - Gamma_i[j]) = 0`` in each output channel j.
Fitting those polynomial coefficients by a null-space least squares over the
monomial (Veronese) embedding, then equating all order-(K-1) partial
derivatives to zero, pins the point (x0, y0) shared by all submodels: the
derivatives are affine, so the final step is a plain linear least squares.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .models import Dataset, SwitchedAffineModel

Monomial = tuple[int, ...]

# relative floor on the leading (y^K) coefficient of the fitted null vector
_LEADING_COEFF_TOL = 1e-8


def monomial_basis(num_vars: int, degree: int) -> list[Monomial]:
    """Exponent tuples of all monomials of total degree <= ``degree``.

    Graded lexicographic: highest total degree first, and within a grade the
    first variable (the output channel) dominates, e.g. for two variables and
    degree 2: y^2, yx, x^2, y, x, 1.
    """
    if degree < 1:
        raise ValueError(f"degree must be at least 1, got {degree}")
    if num_vars < 1:
        raise ValueError(f"need at least one variable, got {num_vars}")
    monomials = [
        e
        for e in itertools.product(range(degree + 1), repeat=num_vars)
        if sum(e) <= degree
    ]
    monomials.sort(key=lambda e: (-sum(e), tuple(-v for v in e)))
    return monomials


def _exponent_matrix(basis: list[Monomial]) -> np.ndarray:
    return np.asarray(basis, dtype=int)


def _embed_columns(variables: np.ndarray, basis: list[Monomial]) -> np.ndarray:
    """Monomial evaluations: (num_vars, N) variables -> (N, len(basis))."""
    cols = variables.T
    out = np.empty((cols.shape[0], len(basis)))
    for b, expo in enumerate(_exponent_matrix(basis)):
        out[:, b] = np.prod(cols**expo, axis=1)
    return out


def veronese_embed(z, basis: list[Monomial]) -> np.ndarray:
    """Evaluate every basis monomial at one observation.

    ``z`` lists the input coordinates first and the output channel value
    last, i.e. (x_1, ..., x_Nx, y_j); internally the channel value is the
    leading variable of the basis.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size != len(basis[0]):
        raise ValueError(f"observation has {z.size} coordinates, basis expects {len(basis[0])}")
    ordered = np.concatenate([z[-1:], z[:-1]])
    return _embed_columns(ordered[:, None], basis)[0]


@dataclass(frozen=True)
class HybridPolynomial:
    """Per-channel coefficients of the degree-K switching polynomial.

    ``channels[j]`` holds coefficients over ``basis`` (variables: the channel
    output y_j followed by the inputs x_1..x_Nx) with the y_j^K coefficient
    normalized to 1.
    """

    degree: int
    num_vars: int
    basis: tuple[Monomial, ...]
    channels: tuple[np.ndarray, ...]

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "num_vars": self.num_vars,
            "basis": [list(e) for e in self.basis],
            "channels": [[float(v) for v in c] for c in self.channels],
        }


@dataclass(frozen=True)
class IntersectionPoint:
    """A point satisfying all submodels, with the residual of its defining system."""

    x0: np.ndarray
    y0: np.ndarray
    residual: float

    @property
    def z0(self) -> np.ndarray:
        return np.concatenate([self.x0, self.y0])


def fit_hdc_coefficients(data: Dataset, K: int) -> HybridPolynomial:
    """Least-squares coefficients of the vanishing polynomial, per channel.

    Observations are rescaled by their max absolute value before embedding
    (degree-K monomials are badly conditioned otherwise); the returned
    coefficients are expressed back in the original coordinates.
    """
    basis = monomial_basis(data.nx + 1, K)
    if data.n_observations <= len(basis):
        raise ValueError(
            f"need more than {len(basis)} observations to fit a degree-{K} "
            f"polynomial in {data.nx + 1} variables, got {data.n_observations}"
        )
    grades = np.array([sum(e) for e in basis])
    channels = []
    for j in range(data.ny):
        variables = np.vstack([data.Y[j : j + 1], data.X])
        scale = float(np.max(np.abs(variables)))
        if scale == 0.0:
            raise NumericalError(f"channel {j} observations are identically zero")
        rows = _embed_columns(variables / scale, basis)
        _, _, vt = np.linalg.svd(rows, full_matrices=False)
        coeffs = vt[-1]
        if abs(coeffs[0]) < _LEADING_COEFF_TOL:
            raise NumericalError(
                f"channel {j}: leading polynomial coefficient is {coeffs[0]:.3e}; "
                "degenerate data or wrong submodel count"
            )
        coeffs = coeffs / scale**grades  # undo the pre-scaling
        channels.append(coeffs / coeffs[0])
    return HybridPolynomial(
        degree=K, num_vars=data.nx + 1, basis=tuple(basis), channels=tuple(channels)
    )


def differentiate(coeffs: np.ndarray, basis: list[Monomial], var: int) -> np.ndarray:
    """Partial derivative of a polynomial, expressed over the same basis."""
    index = {e: i for i, e in enumerate(basis)}
    out = np.zeros_like(np.asarray(coeffs, dtype=float))
    for pos, expo in enumerate(basis):
        k = expo[var]
        if k:
            reduced = expo[:var] + (k - 1,) + expo[var + 1 :]
            out[index[reduced]] += k * coeffs[pos]
    return out


def evaluate_polynomial(coeffs: np.ndarray, basis: list[Monomial], z) -> float:
    """Evaluate a basis-expanded polynomial at (x..., y_j)."""
    return float(np.dot(coeffs, veronese_embed(z, basis)))


def estimate_intersection(poly: HybridPolynomial) -> IntersectionPoint:
    """Solve the stacked order-(K-1) derivative conditions in least squares.

    Each order-(K-1) partial derivative of a channel polynomial is affine in
    (x, y_j); all channels' conditions are stacked into one linear system over
    (x, y) and the minimizer is returned together with the RMS residual.
    """
    basis = list(poly.basis)
    nvars = poly.num_vars
    nx = nvars - 1
    ny = len(poly.channels)
    index = {e: i for i, e in enumerate(basis)}
    const = index[(0,) * nvars]
    unit = [index[tuple(int(v == w) for w in range(nvars))] for v in range(nvars)]
    rows, rhs = [], []
    for j, coeffs in enumerate(poly.channels):
        for order in itertools.combinations_with_replacement(range(nvars), poly.degree - 1):
            d = np.asarray(coeffs, dtype=float)
            for var in order:
                d = differentiate(d, basis, var)
            row = np.zeros(nx + ny)
            row[nx + j] = d[unit[0]]
            row[:nx] = [d[unit[v]] for v in range(1, nvars)]
            rows.append(row)
            rhs.append(-d[const])
    A = np.array(rows)
    b = np.array(rhs)
    solution, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < nx + ny:
        raise NumericalError(
            "derivative system is rank deficient: the intersection point is not "
            "unique (parallel or degenerate submodels)"
        )
    residual = float(np.sqrt(np.mean((A @ solution - b) ** 2)))
    return IntersectionPoint(x0=solution[:nx], y0=solution[nx:], residual=residual)


def intersection_oracle(model: SwitchedAffineModel) -> IntersectionPoint:
    """Exact intersection from known parameters; the test oracle.

    Solves the stacked system (Theta_i - Theta_1) d0 = Gamma_1 - Gamma_i in
    least squares and rejects inconsistent (empty-intersection) models.
    """
    A = np.vstack([model.theta(i) - model.theta(0) for i in range(1, model.K)])
    b = np.concatenate([model.gamma(0) - model.gamma(i) for i in range(1, model.K)])
    d0, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    misfit = float(np.linalg.norm(A @ d0 - b))
    if misfit > 1e-8 * (1.0 + float(np.linalg.norm(b))):
        raise NumericalError("submodels have no common point (inconsistent system)")
    y0 = model.theta(0) @ d0 + model.gamma(0)
    residual = float(np.sqrt(np.mean((A @ d0 - b) ** 2))) if b.size else 0.0
    return IntersectionPoint(x0=d0, y0=y0, residual=residual)
