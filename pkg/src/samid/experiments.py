"""Seeded Monte Carlo harness: metrics, SNR sweeps, CSV/JSON plumbing.

The input sequence and the switching labels are generated once per experiment
from the master seed and held fixed; every (SNR point, run) pair then draws
its own noise from a seed derived with the package's 64-bit mix, so sweeps
are reproducible run-for-run and independent of the thread count.
"""

import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import feature_cluster_labels, gpca_lite_fit
from .errors import NumericalError
from .estimation import FitOptions, SubmodelEstimate, clairvoyant_fit, fit_submodels
from .models import (
    Dataset,
    SwitchedAffineModel,
    SwitchingSpec,
    assign_labels,
    check_identifiability,
    first_coordinate_slabs,
    generate_inputs,
    model_from_dict,
    noise_for_target_snr,
    simulate,
)
from .rng import derive_seed
from .subspace import scs_label

METHOD_NAMES = ("scs", "cml", "feature-kmeans", "gpca-lite")
RESULT_COLUMNS = (
    "snr_db",
    "method",
    "submodel",
    "mse_theta",
    "mse_gamma",
    "misclassification",
    "failures",
    "runs_used",
)
_MAX_BRUTE_FORCE_K = 8


@dataclass(frozen=True)
class MethodOptions:
    """Per-method tuning knobs shared across the sweep."""

    c: int = 7
    restarts: int = 10
    diag_threshold: float = 0.0
    weight_mode: str = "none"


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment: a model, a switching rule and an SNR grid."""

    model: SwitchedAffineModel
    switching: SwitchingSpec
    n_per_submodel: int
    snr_grid: tuple[float, ...]
    sigma_ratio: float = 1.0
    runs: int = 200
    methods: tuple[str, ...] = ("scs", "cml")
    master_seed: int = 0
    options: MethodOptions = field(default_factory=MethodOptions)

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("need at least one Monte Carlo run")
        if not self.snr_grid:
            raise ValueError("snr_grid must not be empty")
        if not self.methods:
            raise ValueError("methods must not be empty")
        for name in self.methods:
            if name not in METHOD_NAMES:
                raise ValueError(f"unknown method {name!r}; choose from {METHOD_NAMES}")
        if self.n_per_submodel < 1:
            raise ValueError("n_per_submodel must be positive")
        if self.sigma_ratio < 0:
            raise ValueError("sigma_ratio must be nonnegative")


@dataclass(frozen=True)
class ResultRow:
    """One aggregated (SNR, method, submodel) record."""

    snr_db: float
    method: str
    submodel: int
    mse_theta: float
    mse_gamma: float
    misclassification: float
    failures: int
    runs_used: int


@dataclass(frozen=True)
class MethodRunResult:
    misclassification: float
    per_submodel: tuple[tuple[float, float], ...]


def match_clusters(pred, truth, K: int) -> tuple[tuple[int, ...], int]:
    """Best relabeling of predicted clusters onto true labels (brute force).

    Returns ``(perm, mismatches)`` where ``perm[i]`` is the true label matched
    to predicted cluster i and ``mismatches`` is minimal over all K!
    permutations (ties broken by lexicographic permutation order).
    """
    if K > _MAX_BRUTE_FORCE_K:
        raise ValueError(f"brute-force matching supports K <= {_MAX_BRUTE_FORCE_K}")
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape:
        raise ValueError("label vectors differ in length")
    for name, vec in (("pred", pred), ("truth", truth)):
        if vec.size and (vec.min() < 0 or vec.max() >= K):
            raise ValueError(f"{name} labels out of range for K={K}")
    contingency = np.zeros((K, K), dtype=int)
    np.add.at(contingency, (pred, truth), 1)
    best_perm, best_matches = None, -1
    for perm in itertools.permutations(range(K)):
        matches = sum(contingency[i, perm[i]] for i in range(K))
        if matches > best_matches:
            best_perm, best_matches = perm, matches
    return best_perm, int(pred.size - best_matches)


def misclassification_ratio(pred, truth, K: int) -> float:
    """Fraction of observations mislabeled after optimal cluster matching."""
    pred = np.asarray(pred)
    _, mismatches = match_clusters(pred, truth, K)
    return mismatches / pred.size


def parameter_mse(
    estimates: list[SubmodelEstimate],
    model: SwitchedAffineModel,
    permutation: tuple[int, ...],
) -> list[tuple[float, float]]:
    """Entry-averaged squared errors per true submodel.

    Estimate i is compared against true submodel ``permutation[i]``; the
    output list is indexed by true submodel.
    """
    if len(estimates) != model.K or len(permutation) != model.K:
        raise ValueError("need one estimate and one permutation entry per submodel")
    out: list[tuple[float, float] | None] = [None] * model.K
    for i, estimate in enumerate(estimates):
        target = permutation[i]
        theta, gamma = model.submodels[target]
        if estimate.Theta_hat.shape != theta.shape or estimate.Gamma_hat.shape != gamma.shape:
            raise ValueError("estimate and model dimensions differ")
        out[target] = (
            float(np.mean((estimate.Theta_hat - theta) ** 2)),
            float(np.mean((estimate.Gamma_hat - gamma) ** 2)),
        )
    return out


def _nearest_submodel_labels(data: Dataset, estimates: list[SubmodelEstimate]) -> np.ndarray:
    residuals = np.stack(
        [
            np.linalg.norm(data.Y - est.Theta_hat @ data.X - est.Gamma_hat[:, None], axis=0)
            for est in estimates
        ]
    )
    return np.argmin(residuals, axis=0)


def _run_scs(data: Dataset, model, config: ExperimentConfig, run_seed: int) -> MethodRunResult:
    labels_hat, diag = scs_label(data, model.K, seed=run_seed, restarts=config.options.restarts)
    perm, mismatches = match_clusters(labels_hat, data.labels, model.K)
    opts = FitOptions(
        weight_mode=config.options.weight_mode, diag_threshold=config.options.diag_threshold
    )
    estimates = fit_submodels(data, labels_hat, M_diag=diag.adjacency_diag, opts=opts)
    mse = parameter_mse(estimates, model, perm)
    return MethodRunResult(mismatches / data.n_observations, tuple(mse))


def _run_cml(data: Dataset, model, config: ExperimentConfig, run_seed: int) -> MethodRunResult:
    estimates = clairvoyant_fit(data, sigma_ratio=config.sigma_ratio)
    mse = parameter_mse(estimates, model, tuple(range(model.K)))
    return MethodRunResult(0.0, tuple(mse))


def _run_feature_kmeans(
    data: Dataset, model, config: ExperimentConfig, run_seed: int
) -> MethodRunResult:
    labels_hat = feature_cluster_labels(
        data, model.K, c=config.options.c, seed=run_seed, restarts=config.options.restarts
    )
    perm, mismatches = match_clusters(labels_hat, data.labels, model.K)
    estimates = fit_submodels(data, labels_hat)
    mse = parameter_mse(estimates, model, perm)
    return MethodRunResult(mismatches / data.n_observations, tuple(mse))


def _run_gpca_lite(data: Dataset, model, config: ExperimentConfig, run_seed: int) -> MethodRunResult:
    estimates = gpca_lite_fit(data)
    slope_order = np.argsort([model.theta(i)[0, 0] for i in range(model.K)], kind="stable")
    perm = tuple(int(v) for v in slope_order)  # estimates come in ascending-slope order
    mse = parameter_mse(estimates, model, perm)
    labels_hat = _nearest_submodel_labels(data, estimates)
    _, mismatches = match_clusters(labels_hat, data.labels, model.K)
    return MethodRunResult(mismatches / data.n_observations, tuple(mse))


_METHODS = {
    "scs": _run_scs,
    "cml": _run_cml,
    "feature-kmeans": _run_feature_kmeans,
    "gpca-lite": _run_gpca_lite,
}


def resolve_thread_count(threads: int | None = None) -> int:
    """Explicit argument, else the SAMID_THREADS env var, else the CPU count."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SAMID_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_monte_carlo(
    config: ExperimentConfig, threads: int | None = None, progress=None
) -> list[ResultRow]:
    """Run the configured sweep and aggregate per (SNR, method, submodel).

    Failed runs of a method (for example complex slope roots of gpca-lite at
    low SNR) are excluded from that method's means and reported in the
    ``failures`` column. Output is deterministic for a fixed config, whatever
    the thread count: runs are aggregated in run-index order.
    """
    model = config.model
    if not check_identifiability(model):
        raise ValueError("model fails the identifiability rank check")
    n = config.n_per_submodel * model.K
    if n < model.K * model.Nx + 1:
        raise ValueError(f"need at least {model.K * model.Nx + 1} observations, got {n}")
    D = generate_inputs(model.Nx, n, derive_seed(config.master_seed, 0, 0))
    labels = assign_labels(config.switching, D, derive_seed(config.master_seed, 0, 1))
    workers = resolve_thread_count(threads)
    rows: list[ResultRow] = []
    for snr_index, snr in enumerate(config.snr_grid):
        noise = noise_for_target_snr(model, D, labels, snr, config.sigma_ratio)

        def one_run(r: int) -> dict[str, MethodRunResult | None]:
            run_seed = derive_seed(config.master_seed, 1 + snr_index, r)
            data = simulate(model, D, labels, noise, run_seed)
            outcome: dict[str, MethodRunResult | None] = {}
            for method in config.methods:
                try:
                    outcome[method] = _METHODS[method](data, model, config, run_seed)
                except (NumericalError, np.linalg.LinAlgError):
                    outcome[method] = None
            return outcome

        if workers == 1:
            run_results = [one_run(r) for r in range(config.runs)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                run_results = list(pool.map(one_run, range(config.runs)))

        for method in config.methods:
            successes = [res[method] for res in run_results if res[method] is not None]
            failures = config.runs - len(successes)
            if successes:
                miscls = sum(res.misclassification for res in successes) / len(successes)
                theta_means = [
                    sum(res.per_submodel[i][0] for res in successes) / len(successes)
                    for i in range(model.K)
                ]
                gamma_means = [
                    sum(res.per_submodel[i][1] for res in successes) / len(successes)
                    for i in range(model.K)
                ]
            else:
                miscls = float("nan")
                theta_means = [float("nan")] * model.K
                gamma_means = [float("nan")] * model.K
            for i in range(model.K):
                rows.append(
                    ResultRow(
                        snr_db=float(snr),
                        method=method,
                        submodel=i,
                        mse_theta=theta_means[i],
                        mse_gamma=gamma_means[i],
                        misclassification=miscls,
                        failures=failures,
                        runs_used=len(successes),
                    )
                )
        if progress is not None:
            failed = {m: config.runs - sum(1 for r in run_results if r[m] is not None)
                      for m in config.methods}
            noted = ", ".join(f"{m}: {f} failed" for m, f in failed.items() if f)
            print(
                f"[sweep] {snr:g} dB: {config.runs} runs" + (f" ({noted})" if noted else ""),
                file=progress,
                flush=True,
            )
    return rows


# ---------------------------------------------------------------------------
# Config and results files


def _reject_unknown(payload: dict, allowed: set[str], context: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ValueError(f"unknown {context} keys: {sorted(unknown)}")


def _parse_switching(payload: dict, K: int) -> SwitchingSpec:
    if not isinstance(payload, dict) or "mode" not in payload:
        raise ValueError("switching must be an object with a 'mode' key")
    mode = payload["mode"]
    if mode == "piecewise":
        _reject_unknown(payload, {"mode"}, "switching")
        return SwitchingSpec.piecewise(first_coordinate_slabs(K))
    if mode == "jump":
        _reject_unknown(payload, {"mode", "probabilities"}, "switching")
        probabilities = payload.get("probabilities", [1.0 / K] * K)
        if len(probabilities) != K:
            raise ValueError(f"jump probabilities must have length K={K}")
        return SwitchingSpec.jump(probabilities)
    if mode == "explicit":
        _reject_unknown(payload, {"mode", "labels"}, "switching")
        return SwitchingSpec.explicit(payload["labels"])
    raise ValueError(f"unknown switching mode {mode!r}")


def parse_experiment_config(payload: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a JSON payload; unknown keys rejected."""
    allowed = {
        "model",
        "switching",
        "n_per_submodel",
        "snr_grid",
        "sigma_ratio",
        "runs",
        "methods",
        "master_seed",
        "options",
    }
    _reject_unknown(payload, allowed, "config")
    for key in ("model", "switching", "n_per_submodel", "snr_grid"):
        if key not in payload:
            raise ValueError(f"config is missing required key {key!r}")
    model_field = payload["model"]
    if isinstance(model_field, str):
        path = Path(model_field)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        with open(path, "r", encoding="utf-8") as handle:
            model = model_from_dict(json.load(handle))
    else:
        model = model_from_dict(model_field)
    options_payload = payload.get("options", {})
    _reject_unknown(options_payload, {"c", "restarts", "diag_threshold", "weight_mode"}, "options")
    options = MethodOptions(**options_payload)
    return ExperimentConfig(
        model=model,
        switching=_parse_switching(payload["switching"], model.K),
        n_per_submodel=int(payload["n_per_submodel"]),
        snr_grid=tuple(float(v) for v in payload["snr_grid"]),
        sigma_ratio=float(payload.get("sigma_ratio", 1.0)),
        runs=int(payload.get("runs", 200)),
        methods=tuple(payload.get("methods", ("scs", "cml"))),
        master_seed=int(payload.get("master_seed", 0)),
        options=options,
    )


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as handle:
        return parse_experiment_config(json.load(handle), base_dir=path.parent)


def results_to_csv_text(rows: list[ResultRow]) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                (
                    repr(row.snr_db),
                    row.method,
                    str(row.submodel),
                    repr(row.mse_theta),
                    repr(row.mse_gamma),
                    repr(row.misclassification),
                    str(row.failures),
                    str(row.runs_used),
                )
            )
        )
    return "\n".join(lines) + "\n"


def save_results_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(results_to_csv_text(rows))
