# tests/test_experiments.py
"""
Tests for configuration parsing, the configuration grid, bias reports and the
files written by each subcommand.
"""

import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import pandas as pd

from gibias import ConfigError, ExperimentConfig, InvariantViolation, load_config
from gibias.experiments import (
    DEFAULTS,
    bias_report,
    cmd_biases,
    cmd_emt,
    cmd_index_table,
    cmd_oracle_check,
    cmd_simulate,
    histogram_frame,
)
from gibias.simulation import EnsembleResult, TrajectorySummary


def summary(**changes) -> TrajectorySummary:
    record = dict(
        config_id=0, trial=0, seed=0, true_prob_bad=0.05, tau=3, censored=False,
        pattern="FiniteLearning", switches=1, reverse_switches=0, obs_before_tau="B",
        p_hat_0=0.5, p_hat_tau=0.6, p_hat_final=0.6, discounted_payoff=1.0,
        boundary_uncertain=0, switch_boundary_uncertain=False, foresight_action="Experiment",
    )
    record.update(changes)
    return TrajectorySummary(**record)


class TestConfig(unittest.TestCase):
    def test_defaults(self):
        """Test that an empty configuration takes every default."""
        config = ExperimentConfig.from_dict({})
        self.assertEqual(config.horizon, 1000)
        self.assertEqual(len(config.grid()), 1)
        resolved = config.resolved()
        self.assertEqual(set(DEFAULTS) - set(resolved), set())
        json.dumps(resolved)

    def test_grid_order(self):
        """Test payoffs x discount x prior x true_prob_bad, last key fastest."""
        config = ExperimentConfig.from_dict({
            "payoffs": [{"bad": 0, "avoid": 0.5, "good": 1}, {"bad": -1, "avoid": -0.2, "good": 0}],
            "discount": [0.5, 0.9],
            "prior": {"n_bad": 1, "n_good": 2},
            "true_prob_bad": [0.05, 0.1],
        })
        grid = config.grid()
        self.assertEqual(len(grid), 8)
        self.assertEqual([p.config_id for p in grid], list(range(8)))
        self.assertEqual((grid[1].payoffs.discount, grid[1].true_prob_bad), (0.5, 0.1))
        self.assertEqual((grid[2].payoffs.discount, grid[2].true_prob_bad), (0.9, 0.05))
        self.assertEqual(grid[4].payoffs.payoff_bad, -1.0)

    def test_costs(self):
        config = ExperimentConfig.from_dict({"costs": {"encounter": 5, "avoid": 2, "no_encounter": 1}})
        self.assertAlmostEqual(config.grid()[0].payoffs.critical_probability, 0.25)
        self.assertIn("costs", config.resolved())

    def test_elicitation(self):
        """Test an elicitation run replaces the prior."""
        config = ExperimentConfig.from_dict({"elicitation_run": "GGGB"})
        self.assertEqual(config.priors[0].prior, (1.0, 3.0))
        config = ExperimentConfig.from_dict({"elicitation_run": ["B", "B", "G"]})
        self.assertEqual(config.priors[0].prior, (2.0, 1.0))
        config = ExperimentConfig.from_dict({"elicitation_run": ["GB", "BBG"]})
        self.assertEqual(len(config.priors), 2)

    def test_rejected(self):
        """Test the configurations that must not load."""
        bad = [
            {"unknown": 1},
            {"trials": 0},
            {"trials": 2.5},
            {"horizon": True},
            {"true_prob_bad": []},
            {"true_prob_bad": 1.5},
            {"discount": 1.0},
            {"payoffs": {"bad": 1, "avoid": 0.5, "good": 0}},
            {"payoffs": {"bad": 0, "avoid": 0.5}},
            {"costs": {"encounter": 5, "avoid": 2, "no_encounter": 1}, "payoffs": {"bad": 0, "avoid": 0.5, "good": 1}},
            {"elicitation_run": "GGGG"},
            {"elicitation_run": ["Gorilla", "Banana"]},
            {"tolerance": 0},
            {"seed": 2 ** 64},
            [],
        ]
        for data in bad:
            with self.assertRaises(ConfigError, msg=repr(data)):
                ExperimentConfig.from_dict(data)

    def test_overrides(self):
        config = ExperimentConfig.from_dict({"seed": 3}).with_overrides(seed=9, workers=2)
        self.assertEqual((config.seed, config.workers), (9, 2))
        with self.assertRaises(ConfigError):
            config.with_overrides(tolerance=-1.0)

    def test_load_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "c.json"
            path.write_text('{"trials": 12}')
            self.assertEqual(load_config(path).trials, 12)
            path.write_text("{not json")
            with self.assertRaises(ConfigError):
                load_config(path)
            with self.assertRaises(ConfigError):
                load_config(Path(tmp) / "missing.json")
        self.assertEqual(load_config(None).trials, DEFAULTS["trials"])


class TestBiasReport(unittest.TestCase):
    def setUp(self):
        self.point = ExperimentConfig.from_dict({"discount": 0.9}).grid()[0]

    def test_clean_ensemble(self):
        summaries = [
            summary(trial=0),
            summary(trial=1, pattern="StillExperimenting", tau=None, censored=True, switches=0,
                    obs_before_tau=None, p_hat_tau=None, p_hat_final=0.05),
            summary(trial=2, pattern="NoLearning", tau=0, switches=0, obs_before_tau=None,
                    p_hat_tau=0.55),
        ]
        report = bias_report(self.point, summaries, 1000, 1e-6)
        self.assertEqual(sum(report.counts.values()), 3)
        self.assertEqual(report.violations, 0)
        self.assertEqual(report.fraction_phat_tau_ge_pc, 1.0)
        self.assertEqual(report.censored_within_band, 1.0)
        self.assertAlmostEqual(report.incomplete_learning_fraction, 2 / 3)
        self.assertEqual(report.estimate_table[0]["count"], 2)
        record = report.as_record()
        self.assertEqual(record["mean_lifetime"], 9.0)
        json.dumps(record)

    def test_violations_counted(self):
        """Test reverse switches, salience misses and underestimates are caught."""
        summaries = [
            summary(trial=0, reverse_switches=1, switches=2),
            summary(trial=1, obs_before_tau="G"),
            summary(trial=2, obs_before_tau="G", switch_boundary_uncertain=True),
            summary(trial=3, p_hat_tau=0.3),
        ]
        report = bias_report(self.point, summaries, 1000, 1e-6)
        self.assertEqual(report.status_quo_violations, 1)
        self.assertEqual(report.salience_violations, 1)
        self.assertEqual(report.salience_boundary_excluded, 1)
        self.assertEqual(report.overestimation_violations, 1)
        self.assertEqual(report.violations, 3)

    def test_histogram(self):
        frame = histogram_frame({0: [1, 2, 2, 9], 1: []}, 5, (0.0, 10.0))
        self.assertEqual(len(frame), 10)
        self.assertEqual(frame[frame["config_id"] == 0]["count"].sum(), 4)


class TestCommands(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def config(self, **values) -> ExperimentConfig:
        data = {"tolerance": 1e-4, "discount": 0.9, "horizon": 60, "trials": 20,
                "out_dir": str(self.out / "run")}
        data.update(values)
        return ExperimentConfig.from_dict(data)

    def test_emt(self):
        """Test Avoid iff p >= p_c and identical tables from costs and payoffs."""
        frame = cmd_emt(self.config())
        self.assertEqual(list(frame["action"] == "Avoid"), [p >= 0.5 for p in frame["prob_bad"]])
        by_payoffs = cmd_emt(self.config(payoffs={"bad": -5, "avoid": -2, "good": -1}))
        by_costs = cmd_emt(self.config(costs={"encounter": 5, "avoid": 2, "no_encounter": 1}))
        self.assertEqual(list(by_payoffs["action"]), list(by_costs["action"]))
        self.assertTrue((self.out / "run" / "emt.csv").exists())
        self.assertTrue((self.out / "run" / "config.json").exists())

    def test_index_table(self):
        """Test depth 0 gives one row and reruns are byte-identical."""
        path = cmd_index_table(self.config(table_depth=0))[0]
        self.assertEqual(path.name, "index_table.csv")
        self.assertEqual(len(pd.read_csv(path, skiprows=1)), 1)
        config = self.config(table_depth=5)
        first = cmd_index_table(config)[0].read_bytes()
        second = cmd_index_table(config)[0].read_bytes()
        self.assertEqual(first, second)
        frame = pd.read_csv(cmd_index_table(config)[0], skiprows=1)
        self.assertTrue((frame["normalized_index"] >= frame["good_fraction"] - 1e-4).all())

    def test_index_table_per_config(self):
        paths = cmd_index_table(self.config(table_depth=2, discount=[0.5, 0.9]))
        self.assertEqual([p.name for p in paths], ["index_table_c0.csv", "index_table_c1.csv"])

    def test_simulate_without_bad_outcomes(self):
        """Test that p = 0 never shows a Bad and never switches."""
        summary_ = cmd_simulate(self.config(true_prob_bad=0.0, trials=3, export_trajectories=2))
        run = self.out / "run"
        runs = pd.read_csv(run / "runs.csv")
        self.assertEqual(len(runs), 3)
        self.assertTrue((runs["switches"] == 0).all())
        steps = pd.read_csv(run / "trajectories.csv")
        self.assertEqual(len(steps), 2 * 60)
        self.assertFalse((steps["observation"] == "B").any())
        self.assertEqual(summary_["configs"][0]["counts"]["StillExperimenting"], 3)

    def test_simulate_reproducible(self):
        config = self.config(true_prob_bad=0.3, trials=10)
        cmd_simulate(config)
        first = {name: (self.out / "run" / name).read_bytes()
                 for name in ("runs.csv", "summary.json", "trajectories.csv", "config.json")}
        cmd_simulate(config)
        for name, data in first.items():
            self.assertEqual((self.out / "run" / name).read_bytes(), data, msg=name)

    def test_simulate_certain_bad(self):
        """Test that p = 1 stops every experimenting run right after a Bad."""
        cmd_simulate(self.config(true_prob_bad=1.0, trials=5))
        runs = pd.read_csv(self.out / "run" / "runs.csv")
        self.assertTrue((runs["pattern"] == "FiniteLearning").all())
        self.assertTrue((runs["obs_before_tau"] == "B").all())

    def test_biases(self):
        """Test a low-risk ensemble has no violations and overestimates when it stops."""
        reports = cmd_biases(self.config(true_prob_bad=0.05, trials=100, horizon=150, svg=True))
        report = reports[0]
        self.assertEqual(sum(report.counts.values()), 100)
        self.assertEqual(report.violations, 0)
        self.assertEqual(report.overestimation_violations, 0)
        run = self.out / "run"
        for name in ("summary.json", "runs.csv", "tau_hist.csv", "phat_hist.csv",
                     "index_table.csv", "tau_hist.svg", "phat_hist.svg", "config.json"):
            self.assertTrue((run / name).exists(), msg=name)
        written = json.loads((run / "summary.json").read_text())
        self.assertEqual(written["violations"], 0)

    def test_biases_stopped_runs_overestimate(self):
        """Test every run that stops does so with p_hat at or above p_c."""
        report = cmd_biases(self.config(true_prob_bad=0.3, trials=100, horizon=150))[0]
        self.assertGreater(report.counts["FiniteLearning"], 0)
        self.assertEqual(report.overestimation_violations, 0)
        self.assertEqual(report.fraction_phat_tau_ge_pc, 1.0)
        self.assertEqual(report.status_quo_violations, 0)

    def test_censored_estimates_in_band(self):
        """Test runs still experimenting at the horizon estimate p within the 3-sigma band."""
        report = cmd_biases(self.config(true_prob_bad=0.05, trials=200, horizon=300))[0]
        self.assertGreater(report.counts["StillExperimenting"], 0)
        self.assertIsNotNone(report.censored_band)
        self.assertGreaterEqual(report.censored_within_band, 0.99)

    def test_biases_invariant_violation(self):
        """Test that a violating ensemble still writes its report, then raises."""
        fake = EnsembleResult(summaries=[summary(reverse_switches=1, switches=2)], trajectories=[])
        with patch("gibias.experiments.run_ensemble", return_value=fake):
            with self.assertRaises(InvariantViolation) as ctx:
                cmd_biases(self.config(table_depth=1))
        self.assertEqual(ctx.exception.report[0].status_quo_violations, 1)
        written = json.loads((self.out / "run" / "summary.json").read_text())
        self.assertEqual(written["violations"], 1)

    def test_oracle_check(self):
        config = self.config(
            payoffs={"bad": 0, "avoid": 0.55, "good": 1}, discount=0.5, oracle_lattice_total=6,
            sweep_lattice_total=8, lifetime_trials=20000, policy_trials=100, dp_horizon=30,
        )
        report = cmd_oracle_check(config)
        self.assertEqual(report["violations"], 0, msg=report["failures"])
        self.assertEqual(report["mean_lifetime"]["0.5"], 1.0)
        self.assertTrue((self.out / "run" / "oracle_report.json").exists())
        dp = pd.read_csv(self.out / "run" / "dp_values.csv")
        self.assertTrue(set(dp["action"]) <= {"A", "E"})
        self.assertEqual(dp["config_id"].unique().tolist(), [0])


if __name__ == '__main__':
    unittest.main()
