"""Command line interface: simulate datasets, identify models, run sweeps.

Exit codes: 0 on success, 1 for configuration/usage errors, 2 when a
numerical procedure fails on the given data. All errors go to stderr.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import feature_cluster_labels, gpca_lite_fit
from .errors import NumericalError
from .estimation import FitOptions, clairvoyant_fit, fit_submodels
from .experiments import (
    METHOD_NAMES,
    load_experiment_config,
    run_monte_carlo,
    save_results_csv,
)
from .models import (
    SwitchedAffineModel,
    SwitchingSpec,
    assign_labels,
    first_coordinate_slabs,
    generate_inputs,
    load_dataset_csv,
    load_model_json,
    noise_for_target_snr,
    save_dataset_csv,
    save_model_json,
    simulate,
)
from .rng import derive_seed
from .subspace import scs_label


class _UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors are exit 1
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="samid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="draw a noisy dataset from a model file")
    sim.add_argument("--model", required=True, help="model JSON file")
    sim.add_argument(
        "--switching",
        required=True,
        help="'piecewise' (slabs of the first input coordinate), 'jump', "
        "'jump:p1,p2,...' or 'explicit:l1,l2,...'",
    )
    sim.add_argument("--n", type=int, required=True, help="total observation count")
    sim.add_argument("--snr", type=float, required=True, help="target SNR in dB")
    sim.add_argument("--sigma-ratio", type=float, default=1.0, help="sigma_x / sigma_y")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--no-labels", action="store_true", help="omit the label column")

    ident = sub.add_parser("identify", help="estimate submodel parameters from a dataset CSV")
    ident.add_argument("--data", required=True, help="dataset CSV")
    ident.add_argument("--k", type=int, required=True, help="number of submodels")
    ident.add_argument("--method", choices=METHOD_NAMES, default="scs")
    ident.add_argument("--seed", type=int, default=0)
    ident.add_argument("--out", required=True, help="output model JSON path")
    ident.add_argument("--c", type=int, default=7, help="feature-kmeans neighborhood size")
    ident.add_argument("--restarts", type=int, default=10)
    ident.add_argument("--weight-mode", choices=("none", "adjacency_diagonal"), default="none")
    ident.add_argument("--diag-threshold", type=float, default=0.0)
    ident.add_argument("--sigma-ratio", type=float, default=1.0, help="used by the cml method")

    sweep = sub.add_parser("sweep", help="run a Monte Carlo SNR sweep from a config file")
    sweep.add_argument("--config", required=True, help="experiment config JSON")
    sweep.add_argument("--out", required=True, help="output results CSV")
    sweep.add_argument("--threads", type=int, default=None)
    sweep.add_argument("--quiet", action="store_true", help="suppress progress on stderr")

    return parser


def _parse_switching_arg(text: str, K: int) -> SwitchingSpec:
    if text == "piecewise":
        return SwitchingSpec.piecewise(first_coordinate_slabs(K))
    if text == "jump":
        return SwitchingSpec.jump([1.0 / K] * K)
    kind, _, payload = text.partition(":")
    if kind == "jump" and payload:
        return SwitchingSpec.jump([float(v) for v in payload.split(",")])
    if kind == "explicit" and payload:
        return SwitchingSpec.explicit([int(v) for v in payload.split(",")])
    raise ValueError(f"cannot parse switching spec {text!r}")


def _cmd_simulate(args) -> int:
    model = load_model_json(args.model)
    spec = _parse_switching_arg(args.switching, model.K)
    D = generate_inputs(model.Nx, args.n, derive_seed(args.seed, 0, 0))
    labels = assign_labels(spec, D, derive_seed(args.seed, 0, 1))
    noise = noise_for_target_snr(model, D, labels, args.snr, args.sigma_ratio)
    dataset = simulate(model, D, labels, noise, derive_seed(args.seed, 1, 0))
    save_dataset_csv(dataset, args.out, include_labels=not args.no_labels)
    return 0


def _estimates_to_model(estimates, nx: int, ny: int) -> SwitchedAffineModel:
    ordered = sorted(estimates, key=lambda e: e.cluster_index)
    return SwitchedAffineModel(
        K=len(ordered),
        Nx=nx,
        Ny=ny,
        submodels=tuple((e.Theta_hat.copy(), e.Gamma_hat.copy()) for e in ordered),
    )


def _cmd_identify(args) -> int:
    data = load_dataset_csv(args.data)
    diagnostics: dict = {"method": args.method}
    if args.method == "scs":
        labels, diag = scs_label(data, args.k, seed=args.seed, restarts=args.restarts)
        opts = FitOptions(weight_mode=args.weight_mode, diag_threshold=args.diag_threshold)
        estimates = fit_submodels(data, labels, M_diag=diag.adjacency_diag, opts=opts)
        diagnostics.update(diag.to_dict())
    elif args.method == "cml":
        if data.labels is None:
            raise ValueError("the cml method needs a dataset with a label column")
        estimates = clairvoyant_fit(data, sigma_ratio=args.sigma_ratio)
    elif args.method == "feature-kmeans":
        labels = feature_cluster_labels(data, args.k, c=args.c, seed=args.seed,
                                        restarts=args.restarts)
        estimates = fit_submodels(data, labels)
    else:  # gpca-lite
        if args.k != 2:
            raise ValueError("gpca-lite supports exactly two submodels")
        estimates = gpca_lite_fit(data)
    save_model_json(_estimates_to_model(estimates, data.nx, data.ny), args.out)
    out = Path(args.out)
    diag_path = out.with_name(out.stem + ".diagnostics.json")
    with open(diag_path, "w", encoding="utf-8") as handle:
        json.dump(diagnostics, handle, indent=2)
        handle.write("\n")
    return 0


def _cmd_sweep(args) -> int:
    config = load_experiment_config(args.config)
    progress = None if args.quiet else sys.stderr
    rows = run_monte_carlo(config, threads=args.threads, progress=progress)
    save_results_csv(rows, args.out)
    return 0


def cli_main(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "identify":
            return _cmd_identify(args)
        return _cmd_sweep(args)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
