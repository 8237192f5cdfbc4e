import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from samid import (
    ExperimentConfig,
    MethodOptions,
    SwitchedAffineModel,
    SwitchingSpec,
    first_coordinate_slabs,
    match_clusters,
    misclassification_ratio,
    parameter_mse,
    parse_experiment_config,
    run_monte_carlo,
)
from samid.estimation import SubmodelEstimate
from samid.experiments import RESULT_COLUMNS, results_to_csv_text
from samid.rng import generator


def siso_config(**overrides):
    model = SwitchedAffineModel.from_parameters([([[1.7]], [0.9]), ([[2.8]], [1.2])])
    defaults = dict(
        model=model,
        switching=SwitchingSpec.piecewise(first_coordinate_slabs(2)),
        n_per_submodel=50,
        snr_grid=(50.0,),
        runs=3,
        methods=("scs", "cml"),
        master_seed=7,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


class TestMatchClusters:
    def test_swap(self):
        perm, mismatches = match_clusters([0, 0, 1, 1], [1, 1, 0, 0], 2)
        assert perm == (1, 0) and mismatches == 0

    def test_identity(self):
        perm, mismatches = match_clusters([0, 1, 0], [0, 1, 0], 2)
        assert perm == (0, 1) and mismatches == 0

    def test_unavoidable_mismatches(self):
        _, mismatches = match_clusters([0, 1, 0, 1], [0, 0, 1, 1], 2)
        assert mismatches == 2

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            match_clusters([0, 3], [0, 1], 2)

    @given(st.lists(st.integers(0, 2), min_size=3, max_size=40), st.permutations([0, 1, 2]))
    @settings(max_examples=50, deadline=None)
    def test_relabeling_is_free(self, labels, relabel):
        relabeled = [relabel[v] for v in labels]
        _, mismatches = match_clusters(relabeled, labels, 3)
        assert mismatches == 0


class TestMisclassificationRatio:
    def test_perfect_up_to_relabeling(self):
        assert misclassification_ratio([1, 1, 0], [0, 0, 1], 2) == 0.0

    def test_random_against_balanced_truth(self):
        n = 10_000
        rng = generator(99)
        truth = np.arange(n) % 2
        pred = (rng.random(n) < 0.5).astype(int)
        assert misclassification_ratio(pred, truth, 2) == pytest.approx(0.5, abs=0.02)

    def test_single_flip(self):
        truth = np.zeros(200, dtype=int)
        truth[100:] = 1
        pred = truth.copy()
        pred[0] = 1
        assert misclassification_ratio(pred, truth, 2) == pytest.approx(0.005)

    def test_symmetry_under_relabeling(self):
        pred = np.array([0, 1, 1, 0, 1])
        truth = np.array([1, 1, 0, 0, 0])
        base = misclassification_ratio(pred, truth, 2)
        assert misclassification_ratio(1 - pred, truth, 2) == base
        assert misclassification_ratio(pred, 1 - truth, 2) == base


class TestParameterMse:
    def test_exact_is_zero(self, mimo_model):
        estimates = [
            SubmodelEstimate(mimo_model.theta(i).copy(), mimo_model.gamma(i).copy(), 10, i)
            for i in range(2)
        ]
        assert parameter_mse(estimates, mimo_model, (0, 1)) == [(0.0, 0.0), (0.0, 0.0)]

    def test_constant_offset(self, mimo_model):
        estimates = [
            SubmodelEstimate(mimo_model.theta(i) + 0.1, mimo_model.gamma(i).copy(), 10, i)
            for i in range(2)
        ]
        for mse_theta, mse_gamma in parameter_mse(estimates, mimo_model, (0, 1)):
            assert mse_theta == pytest.approx(0.01)
            assert mse_gamma == 0.0

    def test_permutation_reorders_targets(self, siso_model):
        estimates = [
            SubmodelEstimate(np.array([[2.8]]), np.array([1.2]), 10, 0),
            SubmodelEstimate(np.array([[1.7]]), np.array([0.9]), 10, 1),
        ]
        assert parameter_mse(estimates, siso_model, (1, 0)) == [(0.0, 0.0), (0.0, 0.0)]


class TestRunMonteCarlo:
    def test_near_noiseless_run(self):
        config = siso_config(snr_grid=(200.0,), runs=1, methods=("scs",), n_per_submodel=100)
        rows = run_monte_carlo(config, threads=1)
        assert len(rows) == 2
        for row in rows:
            assert row.misclassification == 0.0
            assert row.mse_theta < 1e-12 and row.mse_gamma < 1e-12
            assert row.failures == 0 and row.runs_used == 1

    def test_deterministic_bytes_across_threads(self):
        config = siso_config(snr_grid=(40.0, 50.0), runs=4)
        texts = {
            results_to_csv_text(run_monte_carlo(config, threads=t)) for t in (1, 4, None)
        }
        assert len(texts) == 1

    def test_csv_layout(self):
        config = siso_config(runs=2, methods=("cml",))
        text = results_to_csv_text(run_monte_carlo(config, threads=1))
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(RESULT_COLUMNS)
        assert len(lines) == 1 + 2  # one row per (snr, method, submodel)
        first = lines[1].split(",")
        assert first[0] == "50.0" and first[1] == "cml" and first[2] == "0"

    def test_row_order_and_failure_accounting(self):
        config = siso_config(runs=2, methods=("gpca-lite", "cml"))
        rows = run_monte_carlo(config, threads=1)
        assert [r.method for r in rows] == ["gpca-lite", "gpca-lite", "cml", "cml"]
        for row in rows:
            assert row.failures + row.runs_used == config.runs

    def test_rejects_unidentifiable_model(self):
        model = SwitchedAffineModel.from_parameters([([[1.0]], [0.0]), ([[1.0]], [1.0])])
        config = siso_config(model=model)
        with pytest.raises(ValueError, match="identifiability"):
            run_monte_carlo(config)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            siso_config(runs=0)
        with pytest.raises(ValueError):
            siso_config(methods=())
        with pytest.raises(ValueError):
            siso_config(methods=("nope",))
        with pytest.raises(ValueError):
            siso_config(snr_grid=())


class TestConfigParsing:
    def payload(self, **overrides):
        base = {
            "model": {
                "K": 2,
                "Nx": 1,
                "Ny": 1,
                "submodels": [
                    {"theta": [1.7], "gamma": [0.9]},
                    {"theta": [2.8], "gamma": [1.2]},
                ],
            },
            "switching": {"mode": "piecewise"},
            "n_per_submodel": 10,
            "snr_grid": [40.0],
        }
        base.update(overrides)
        return base

    def test_minimal_config(self):
        config = parse_experiment_config(self.payload())
        assert config.runs == 200
        assert config.methods == ("scs", "cml")
        assert config.options == MethodOptions()

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            parse_experiment_config(self.payload(extra=1))

    def test_unknown_option_rejected(self):
        with pytest.raises(ValueError, match="unknown options keys"):
            parse_experiment_config(self.payload(options={"c": 7, "bogus": 1}))

    def test_missing_required_key(self):
        payload = self.payload()
        del payload["model"]
        with pytest.raises(ValueError, match="missing required"):
            parse_experiment_config(payload)

    def test_model_file_reference(self, tmp_path, siso_model):
        from samid import save_model_json

        save_model_json(siso_model, tmp_path / "m.json")
        payload = self.payload(model="m.json")
        config = parse_experiment_config(payload, base_dir=tmp_path)
        assert config.model.K == 2

    def test_jump_probability_length_checked(self):
        with pytest.raises(ValueError):
            parse_experiment_config(
                self.payload(switching={"mode": "jump", "probabilities": [1.0]})
            )

    def test_explicit_labels(self):
        payload = self.payload(switching={"mode": "explicit", "labels": [0, 1] * 10})
        config = parse_experiment_config(payload)
        assert config.switching.mode == "explicit"


class TestSeededRunArithmetic:
    def test_mse_recomputable_from_serialized_estimate(self, siso_model):
        # one seeded run: the reported MSE must equal the arithmetic recomputed
        # from the JSON-serialized estimate
        from samid import NoiseSpec, assign_labels, fit_submodels, generate_inputs, simulate
        from samid.models import model_to_dict
        from samid.cli import _estimates_to_model

        D = generate_inputs(1, 80, seed=4)
        labels = assign_labels(SwitchingSpec.piecewise(first_coordinate_slabs(2)), D, seed=0)
        data = simulate(siso_model, D, labels, NoiseSpec(0.01, 0.01), seed=12)
        estimates = fit_submodels(data, labels)
        reported = parameter_mse(estimates, siso_model, (0, 1))
        payload = model_to_dict(_estimates_to_model(estimates, 1, 1))
        for i in range(2):
            theta_json = payload["submodels"][i]["theta"][0]
            gamma_json = payload["submodels"][i]["gamma"][0]
            assert reported[i][0] == pytest.approx((theta_json - siso_model.theta(i)[0, 0]) ** 2)
            assert reported[i][1] == pytest.approx((gamma_json - siso_model.gamma(i)[0]) ** 2)
