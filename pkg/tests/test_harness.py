"""Tests for the experiment harness: configs, presets, runs, and sweeps."""

import dataclasses
import json
import math

import numpy as np
import pytest

from noodl.harness import (
    ALGORITHMS,
    CONFIG_SCHEMA,
    ExperimentConfig,
    KINDS,
    PHASE_GRID_FIELDS,
    PhaseCell,
    SweepGrid,
    _cell_problem,
    config_from_dict,
    config_to_dict,
    ground_truth_for,
    load_config,
    phase_trial_seed,
    preset,
    preset_names,
    run_convergence,
    run_experiment,
    run_phase_transition,
    save_config,
)
from noodl.model import check_unit_columns

from conftest import micro_phase, read_rows_without_timing, tiny_convergence


class TestSweepGrid:
    def test_defaults_cover_documented_grid(self):
        grid = SweepGrid()
        assert grid.m_values == (50, 100, 200, 400)
        assert grid.ratios == (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0)
        assert grid.trials == 10
        assert grid.success_threshold == 5e-7
        assert grid.iteration_cap == 50
        assert grid.eta_a_scale == 0.5
        grid.validate()

    @pytest.mark.parametrize("bad", [
        dict(m_values=()),
        dict(ratios=()),
        dict(m_values=(50, 0)),
        dict(ratios=(0.5, 0.0)),
        dict(ratios=(-0.5,)),
        dict(trials=0),
        dict(success_threshold=0.0),
        dict(iteration_cap=0),
        dict(eta_a_scale=0.0),
    ])
    def test_invalid_grids_are_rejected(self, bad):
        with pytest.raises(ValueError):
            SweepGrid(**bad).validate()


class TestPhaseCell:
    def test_holds_rates(self):
        cell = PhaseCell(m=50, ratio=1.5, success_rate_a=0.9, success_rate_x=1.0)
        assert (cell.m, cell.ratio) == (50, 1.5)

    @pytest.mark.parametrize("rates", [(1.2, 0.5), (0.5, -0.1)])
    def test_rates_must_be_probabilities(self, rates):
        with pytest.raises(ValueError, match="must lie in"):
            PhaseCell(m=50, ratio=1.0, success_rate_a=rates[0], success_rate_x=rates[1])


class TestExperimentConfigValidation:
    def test_tiny_config_is_valid(self):
        tiny_convergence().validate()
        micro_phase().validate()

    def test_kind_must_be_known(self):
        cfg = dataclasses.replace(tiny_convergence(), kind="trace")
        with pytest.raises(ValueError, match="unknown experiment kind"):
            cfg.validate()
        assert set(KINDS) == {"convergence", "phase", "compare"}

    def test_algorithms_must_be_known_and_unique(self):
        cfg = tiny_convergence()
        with pytest.raises(ValueError, match="at least one algorithm"):
            dataclasses.replace(cfg, algorithms=()).validate()
        with pytest.raises(ValueError, match="unknown algorithms"):
            dataclasses.replace(cfg, algorithms=("noodl", "omp")).validate()
        with pytest.raises(ValueError, match="duplicate"):
            dataclasses.replace(cfg, algorithms=("noodl", "noodl")).validate()
        assert set(ALGORITHMS) == {"noodl", "biased_ht"}

    def test_experiment_seed_owns_solver_seed(self):
        cfg = tiny_convergence(seed=11)
        mismatched = dataclasses.replace(
            cfg, solver=dataclasses.replace(cfg.solver, seed=12))
        with pytest.raises(ValueError, match="seed"):
            mismatched.validate()

    def test_phase_requires_sweep_and_single_algorithm(self):
        cfg = micro_phase()
        with pytest.raises(ValueError, match="need a sweep"):
            dataclasses.replace(cfg, sweep=None).validate()
        with pytest.raises(ValueError, match="exactly one algorithm"):
            dataclasses.replace(cfg, algorithms=("noodl", "biased_ht")).validate()


class TestPresets:
    def test_names_are_sorted_and_complete(self):
        names = preset_names()
        assert names == tuple(sorted(names))
        assert set(names) == {"bias-compare", "fig2-k10", "fig2-k100", "fig2-k20",
                              "fig2-k50", "fig2-phase", "scaled-small"}

    @pytest.mark.parametrize("name", preset_names())
    def test_every_preset_is_fully_valid(self, name):
        cfg = preset(name)
        cfg.validate()
        assert cfg.seed == 0
        assert cfg.solver.seed == 0

    def test_unknown_preset_is_an_error(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset("fig2-k11")

    def test_k10_convergence_parameters(self):
        cfg = preset("fig2-k10")
        assert cfg.kind == "convergence"
        assert (cfg.model.n, cfg.model.m, cfg.model.k) == (1000, 1500, 10)
        assert cfg.model.epsilon0 == 2 / math.log(1000)
        assert cfg.solver.p == 5000
        assert cfg.solver.eta_a == 30.0
        assert cfg.solver.coeff.eta_x == 0.2
        assert cfg.solver.coeff.tau == 0.1
        assert cfg.solver.coeff.delta_r == 1e-14
        assert cfg.solver.dict_stop == 1e-10

    def test_denser_problems_use_the_smaller_dictionary_step(self):
        assert preset("fig2-k20").solver.eta_a == 30.0
        assert preset("fig2-k50").solver.eta_a == 15.0
        assert preset("fig2-k100").solver.eta_a == 15.0
        assert preset("fig2-k50").model.k == 50

    def test_compare_preset_runs_both_algorithms(self):
        cfg = preset("bias-compare")
        assert cfg.kind == "compare"
        assert cfg.algorithms == ("noodl", "biased_ht")
        assert cfg.solver.iters == 50
        assert cfg.model.k == 10

    def test_phase_preset_solver_matches_first_cell(self):
        cfg = preset("fig2-phase")
        assert cfg.kind == "phase"
        assert cfg.sweep == SweepGrid()
        assert (cfg.model.n, cfg.model.k) == (100, 3)
        assert cfg.model.epsilon0 == 2 / math.log(100)
        assert cfg.model.m == cfg.sweep.m_values[0]
        assert cfg.solver.p == math.ceil(cfg.sweep.ratios[0] * cfg.sweep.m_values[0])
        assert cfg.solver.eta_a == 0.5 * cfg.sweep.m_values[0] / 3
        assert cfg.solver.iters == cfg.sweep.iteration_cap

    def test_scaled_small_parameters(self):
        cfg = preset("scaled-small")
        assert (cfg.model.n, cfg.model.m, cfg.model.k) == (100, 150, 3)
        assert cfg.solver.p == 600
        assert cfg.solver.eta_a == 0.2 * 150 / 3


class TestConfigRoundTrip:
    @pytest.mark.parametrize("name", preset_names())
    def test_every_preset_survives_dict_round_trip(self, name):
        cfg = preset(name)
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_explicit_step_count_survives_round_trip(self):
        cfg = tiny_convergence()
        again = config_from_dict(config_to_dict(cfg))
        assert again == cfg
        assert again.solver.coeff.r_steps == 25
        assert again.solver.coeff.delta_r is None

    def test_file_round_trip(self, tmp_path):
        cfg = micro_phase(seed=21)
        path = tmp_path / "config.json"
        save_config(path, cfg)
        assert load_config(path) == cfg

    def test_schema_field_is_pinned(self, tmp_path):
        doc = config_to_dict(tiny_convergence())
        assert doc["schema"] == CONFIG_SCHEMA
        doc["schema"] = "noodl-experiment-v0"
        with pytest.raises(ValueError, match="schema"):
            config_from_dict(doc)

    def test_solver_dict_carries_no_seed(self):
        doc = config_to_dict(tiny_convergence(seed=9))
        assert "seed" not in doc["solver"]
        assert doc["seed"] == 9

    def test_missing_and_unknown_fields_are_errors(self):
        doc = config_to_dict(tiny_convergence())
        missing = dict(doc)
        del missing["seed"]
        with pytest.raises(ValueError, match="missing fields"):
            config_from_dict(missing)
        extra = dict(doc)
        extra["model"] = dict(doc["model"], sigma=0.1)
        with pytest.raises(ValueError, match="unexpected fields"):
            config_from_dict(extra)

    def test_unreadable_file_is_a_value_error(self, tmp_path):
        with pytest.raises(ValueError, match="cannot read config"):
            load_config(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ValueError, match="cannot read config"):
            load_config(bad)


class TestSeedDerivations:
    def test_phase_trial_seeds_are_deterministic_ints(self):
        s = phase_trial_seed(3, 50, 0.5, 2)
        assert isinstance(s, int)
        assert s == phase_trial_seed(3, 50, 0.5, 2)

    def test_phase_trial_seeds_are_disjoint_across_the_grid(self):
        seeds = {
            phase_trial_seed(master, m, ratio, trial)
            for master in (0, 1)
            for m in (50, 100)
            for ratio in (0.25, 0.5, 2.0)
            for trial in range(5)
        }
        assert len(seeds) == 2 * 2 * 3 * 5

    def test_ratio_resolved_to_parts_per_million(self):
        assert phase_trial_seed(0, 50, 0.5, 0) != phase_trial_seed(0, 50, 0.500001, 0)

    def test_ground_truth_depends_only_on_seed_and_shape(self):
        cfg = tiny_convergence(seed=4)
        a = ground_truth_for(cfg)
        assert a.shape == (128, 160)
        check_unit_columns(a)
        np.testing.assert_array_equal(a, ground_truth_for(cfg))
        assert not np.array_equal(a, ground_truth_for(tiny_convergence(seed=5)))


class TestCellProblem:
    def test_sample_count_rounds_up(self):
        cfg = micro_phase()
        model, solver = _cell_problem(cfg, m=50, ratio=0.75)
        assert model.m == 50
        assert (model.n, model.k) == (cfg.model.n, cfg.model.k)
        assert solver.p == 38  # ceil(0.75 * 50)
        assert solver.eta_a == cfg.sweep.eta_a_scale * 50 / cfg.model.k
        assert solver.iters == cfg.sweep.iteration_cap

    def test_exact_ratio_needs_no_rounding(self):
        cfg = micro_phase()
        _, solver = _cell_problem(cfg, m=24, ratio=2.0)
        assert solver.p == 48


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    cfg = tiny_convergence(seed=11)
    out = tmp_path_factory.mktemp("conv")
    results = run_convergence(cfg, out_dir=out)
    return cfg, out, results


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    cfg = micro_phase(seed=7)
    out = tmp_path_factory.mktemp("phase")
    cells = run_phase_transition(cfg, out_dir=out)
    return cfg, out, cells


class TestRunConvergence:
    def test_returns_one_result_per_algorithm(self, run):
        cfg, _, results = run
        assert set(results) == set(cfg.algorithms)
        assert results["noodl"].iterations == cfg.solver.iters

    def test_writes_config_trace_and_summary(self, run):
        cfg, out, results = run
        assert load_config(out / "config.json") == cfg
        assert (out / "trace_noodl_k3.csv").is_file()
        assert (out / "trace_noodl_k3.json").is_file()
        doc = json.loads((out / "summary.json").read_text())
        assert doc["schema"] == "noodl-summary-v1"
        assert config_from_dict(doc["config"]) == cfg
        entry = doc["results"]["noodl"]
        assert entry["iterations"] == results["noodl"].iterations
        assert entry["termination"] == results["noodl"].termination.value
        assert entry["final"]["max_col_err"] == results["noodl"].final().max_col_err

    def test_trace_json_rows_match_iterations(self, run):
        _, out, results = run
        doc = json.loads((out / "trace_noodl_k3.json").read_text())
        assert doc["schema"] == "noodl-trace-v1"
        assert len(doc["rows"]) == results["noodl"].iterations
        assert doc["rows"][0]["t"] == 0

    def test_rerun_is_identical_apart_from_timing(self, run, tmp_path):
        cfg, out, _ = run
        run_convergence(cfg, out_dir=tmp_path)
        assert read_rows_without_timing(tmp_path / "trace_noodl_k3.csv") == \
            read_rows_without_timing(out / "trace_noodl_k3.csv")
        first = json.loads((out / "summary.json").read_text())
        second = json.loads((tmp_path / "summary.json").read_text())
        for doc in (first, second):
            for entry in doc["results"].values():
                entry.pop("total_wall_ms")
        assert first == second
        assert (tmp_path / "config.json").read_bytes() == (out / "config.json").read_bytes()

    def test_compare_kind_traces_both_algorithms(self, tmp_path):
        cfg = tiny_convergence(seed=3, iters=2, algorithms=("noodl", "biased_ht"))
        cfg = dataclasses.replace(cfg, kind="compare")
        results = run_experiment(cfg, out_dir=tmp_path)
        assert set(results) == {"noodl", "biased_ht"}
        assert (tmp_path / "trace_biased_ht_k3.csv").is_file()
        assert (tmp_path / "trace_noodl_k3.csv").is_file()


class TestRunPhaseTransition:
    def test_one_cell_per_grid_point_in_order(self, sweep):
        cfg, _, cells = sweep
        expected = [(m, r) for m in cfg.sweep.m_values for r in cfg.sweep.ratios]
        assert [(c.m, c.ratio) for c in cells] == expected
        for cell in cells:
            assert 0.0 <= cell.success_rate_a <= 1.0
            assert 0.0 <= cell.success_rate_x <= 1.0

    def test_grid_csv_layout(self, sweep):
        _, out, cells = sweep
        lines = (out / "phase_grid.csv").read_text().splitlines()
        assert lines[0] == "# schema: noodl-phase-grid-v1"
        assert lines[1] == ",".join(PHASE_GRID_FIELDS) == "m,ratio,succ_A,succ_X"
        assert len(lines) == 2 + len(cells)
        first = lines[2].split(",")
        assert int(first[0]) == cells[0].m
        assert float(first[1]) == cells[0].ratio

    def test_summary_json_mirrors_cells(self, sweep):
        cfg, out, cells = sweep
        doc = json.loads((out / "phase_summary.json").read_text())
        assert doc["schema"] == "noodl-phase-grid-v1"
        assert config_from_dict(doc["config"]) == cfg
        assert doc["cells"] == [
            {"m": c.m, "ratio": c.ratio, "succ_A": c.success_rate_a,
             "succ_X": c.success_rate_x} for c in cells]

    def test_rerun_is_byte_identical(self, sweep, tmp_path):
        cfg, out, _ = sweep
        run_phase_transition(cfg, out_dir=tmp_path)
        for name in ("phase_grid.csv", "phase_summary.json", "config.json"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    def test_thread_pool_does_not_change_results(self, sweep, tmp_path):
        cfg, out, _ = sweep
        run_phase_transition(cfg, out_dir=tmp_path, threads=2)
        assert (tmp_path / "phase_grid.csv").read_bytes() == \
            (out / "phase_grid.csv").read_bytes()

    def test_requires_a_phase_config(self, tmp_path):
        with pytest.raises(ValueError, match="phase config"):
            run_phase_transition(tiny_convergence(), out_dir=tmp_path)

    def test_dispatch_routes_phase_to_the_sweep(self, sweep, tmp_path):
        cfg, _, cells = sweep
        assert run_experiment(cfg, out_dir=tmp_path) == cells
