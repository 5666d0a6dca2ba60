# pygibias/gibias/experiments.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Batch experiments: JSON configuration, configuration grids, seeded ensembles,
bias reports and the files every subcommand writes.

Each output directory holds the resolved ``config.json`` next to the results,
and nothing time-dependent is written, so a rerun with the same configuration
reproduces every file byte for byte.
"""

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .belief import BeliefState, elicit_prior, estimate_band, init_prior
from .decision import (
    CostTable,
    ModelInputError,
    PayoffSpec,
    costs_to_payoffs,
    emt_rule,
    expected_cost,
    expected_payoff,
    mean_lifetime,
)
from .gittins import BOUNDARY_FACTOR, DEFAULT_MAX_HORIZON, build_table, get_calculator, lattice_sweep
from .oracle import TrueModel, compare_policies, dp_agreement, dp_optimal, lifetime_equivalence, stream_length
from .simulation import SEED_LIMIT, Pattern, TrajectorySummary, run_ensemble

logger = logging.getLogger("pygibias.experiments")


class ConfigError(Exception):
    """Raised when a configuration file cannot be read or holds invalid values."""
    pass


class InvariantViolation(Exception):
    """Raised when a must-be-zero check of a report is nonzero."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


DEFAULTS: Dict[str, Any] = {
    "payoffs": {"bad": 0.0, "avoid": 0.5, "good": 1.0},
    "discount": 0.95,
    "prior": {"n_bad": 1.0, "n_good": 1.0},
    "true_prob_bad": 0.05,
    "horizon": 1000,
    "trials": 1000,
    "seed": 0,
    "out_dir": "runs/gibias",
    "tolerance": 1e-6,
    "workers": 1,
    "table_depth": 20,
    "export_trajectories": 5,
    "emt_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    "max_index_horizon": DEFAULT_MAX_HORIZON,
    "svg": False,
    "histogram_bins": 50,
    "dp_horizon": 30,
    "oracle_lattice_total": 10,
    "sweep_lattice_total": 20,
    "lifetime_trials": 100000,
    "policy_trials": 10000,
}

# keys that may replace their default counterpart
ALTERNATIVES = {"costs": "payoffs", "elicitation_run": "prior"}

# integer settings and their smallest allowed value
_INTEGER_KEYS = {
    "horizon": 1,
    "trials": 1,
    "seed": 0,
    "workers": 1,
    "table_depth": 0,
    "export_trajectories": 0,
    "max_index_horizon": 1,
    "histogram_bins": 1,
    "dp_horizon": 1,
    "oracle_lattice_total": 2,
    "sweep_lattice_total": 2,
    "lifetime_trials": 1,
    "policy_trials": 1,
}


def _as_list(value: Any) -> list:
    return list(value) if isinstance(value, list) else [value]


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    return float(value)


def _integer(key: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value}")
    return value


def _fields(key: str, item: Any, names: Sequence[str]) -> Dict[str, float]:
    if not isinstance(item, dict):
        raise ConfigError(f"{key}: expected an object with keys {', '.join(names)}, got {item!r}")
    missing = [n for n in names if n not in item]
    extra = sorted(set(item) - set(names))
    if missing or extra:
        raise ConfigError(f"{key}: missing keys {missing}, unknown keys {extra}")
    return {n: _number(f"{key}.{n}", item[n]) for n in names}


def _nonempty(key: str, items: list) -> list:
    if not items:
        raise ConfigError(f"{key}: configuration grid is empty")
    return items


def _elicitation_runs(raw: Any) -> Tuple[str, ...]:
    # "GGGB" or ["G", "G", "G", "B"] is one run; ["GGGB", "BBG"] is a grid of runs
    if isinstance(raw, str):
        return (raw,)
    if isinstance(raw, list) and all(isinstance(x, str) for x in _nonempty("elicitation_run", raw)):
        if all(len(x) == 1 for x in raw):
            return ("".join(raw),)
        return tuple(raw)
    raise ConfigError(f"elicitation_run: expected a string or a list of strings, got {raw!r}")


@dataclass(frozen=True)
class GridPoint:
    """One configuration of the grid; payoffs carry the discount."""
    config_id: int
    payoffs: PayoffSpec
    prior: BeliefState
    true_prob_bad: float

    def as_record(self) -> dict:
        n_bad0, n_good0 = self.prior.prior
        return {
            "config_id": self.config_id,
            "payoffs": self.payoffs.as_record(),
            "prior": {"n_bad": n_bad0, "n_good": n_good0},
            "true_prob_bad": self.true_prob_bad,
            "critical_probability": self.payoffs.critical_probability,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Parsed experiment configuration.

    ``payoffs`` hold the undiscounted payoff tables; ``grid()`` combines them
    with every discount, prior and true probability.
    """
    payoffs: Tuple[PayoffSpec, ...]
    discounts: Tuple[float, ...]
    priors: Tuple[BeliefState, ...]
    true_probs: Tuple[float, ...]
    horizon: int = DEFAULTS["horizon"]
    trials: int = DEFAULTS["trials"]
    seed: int = DEFAULTS["seed"]
    out_dir: str = DEFAULTS["out_dir"]
    tolerance: float = DEFAULTS["tolerance"]
    workers: int = DEFAULTS["workers"]
    table_depth: int = DEFAULTS["table_depth"]
    export_trajectories: int = DEFAULTS["export_trajectories"]
    emt_grid: Tuple[float, ...] = tuple(DEFAULTS["emt_grid"])
    max_index_horizon: int = DEFAULTS["max_index_horizon"]
    svg: bool = DEFAULTS["svg"]
    histogram_bins: int = DEFAULTS["histogram_bins"]
    dp_horizon: int = DEFAULTS["dp_horizon"]
    oracle_lattice_total: int = DEFAULTS["oracle_lattice_total"]
    sweep_lattice_total: int = DEFAULTS["sweep_lattice_total"]
    lifetime_trials: int = DEFAULTS["lifetime_trials"]
    policy_trials: int = DEFAULTS["policy_trials"]
    costs: Optional[Tuple[CostTable, ...]] = None
    elicitation_runs: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        for name in ("payoffs", "discounts", "priors", "true_probs"):
            _nonempty(name, list(getattr(self, name)))
        for key, minimum in _INTEGER_KEYS.items():
            _integer(key, getattr(self, key), minimum)
        if self.seed >= SEED_LIMIT:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")
        if not (math.isfinite(self.tolerance) and self.tolerance > 0.0):
            raise ConfigError(f"tolerance: must be positive, got {self.tolerance!r}")
        for name, values in (("true_prob_bad", self.true_probs), ("emt_grid", self.emt_grid)):
            for p in values:
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"{name}: probabilities must lie in [0, 1], got {p!r}")
        for rho in self.discounts:
            if not 0.0 <= rho < 1.0:
                raise ConfigError(f"discount: must lie in [0, 1), got {rho!r}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Build a configuration from decoded JSON.

        :param data: mapping of configuration keys; missing keys take DEFAULTS
        :raises ConfigError: on unknown keys, wrong types or invalid values
        """
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = sorted(set(data) - set(DEFAULTS) - set(ALTERNATIVES))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        for alt, base in ALTERNATIVES.items():
            if alt in data and base in data:
                raise ConfigError(f"give either {base!r} or {alt!r}, not both")

        try:
            costs = None
            if "costs" in data:
                costs = tuple(
                    CostTable(f["avoid"], f["encounter"], f["no_encounter"])
                    for f in (_fields("costs", c, ("encounter", "avoid", "no_encounter"))
                              for c in _nonempty("costs", _as_list(data["costs"])))
                )
                payoffs = tuple(costs_to_payoffs(c) for c in costs)
            else:
                payoffs = tuple(
                    PayoffSpec(f["bad"], f["avoid"], f["good"])
                    for f in (_fields("payoffs", p, ("bad", "avoid", "good"))
                              for p in _nonempty("payoffs", _as_list(data.get("payoffs", DEFAULTS["payoffs"]))))
                )

            runs = None
            if "elicitation_run" in data:
                runs = _elicitation_runs(data["elicitation_run"])
                priors = tuple(init_prior(*elicit_prior(r)) for r in runs)
            else:
                priors = tuple(
                    init_prior(f["n_bad"], f["n_good"])
                    for f in (_fields("prior", p, ("n_bad", "n_good"))
                              for p in _nonempty("prior", _as_list(data.get("prior", DEFAULTS["prior"]))))
                )
        except ModelInputError as e:
            raise ConfigError(str(e)) from e

        discounts = tuple(_number("discount", d)
                          for d in _nonempty("discount", _as_list(data.get("discount", DEFAULTS["discount"]))))
        true_probs = tuple(_number("true_prob_bad", p)
                           for p in _nonempty("true_prob_bad",
                                              _as_list(data.get("true_prob_bad", DEFAULTS["true_prob_bad"]))))
        emt_grid = tuple(_number("emt_grid", p) for p in _as_list(data.get("emt_grid", DEFAULTS["emt_grid"])))

        scalars = {key: data.get(key, DEFAULTS[key]) for key in _INTEGER_KEYS}
        tolerance = _number("tolerance", data.get("tolerance", DEFAULTS["tolerance"]))
        out_dir = data.get("out_dir", DEFAULTS["out_dir"])
        if not isinstance(out_dir, str) or not out_dir:
            raise ConfigError(f"out_dir: expected a nonempty path string, got {out_dir!r}")
        svg = data.get("svg", DEFAULTS["svg"])
        if not isinstance(svg, bool):
            raise ConfigError(f"svg: expected true or false, got {svg!r}")

        return cls(
            payoffs=payoffs,
            discounts=discounts,
            priors=priors,
            true_probs=true_probs,
            tolerance=tolerance,
            out_dir=out_dir,
            svg=svg,
            emt_grid=emt_grid,
            costs=costs,
            elicitation_runs=runs,
            **scalars,
        )

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None,
                       workers: Optional[int] = None,
                       tolerance: Optional[float] = None) -> "ExperimentConfig":
        """Apply command-line overrides; None leaves a value unchanged."""
        changes = {k: v for k, v in (("seed", seed), ("out_dir", out_dir), ("workers", workers),
                                     ("tolerance", tolerance)) if v is not None}
        if changes:
            logger.debug("Config overrides: %s", changes)
        return replace(self, **changes) if changes else self

    def grid(self) -> List[GridPoint]:
        """Cartesian product payoffs x discount x prior x true_prob_bad, numbered from 0."""
        points = []
        product = itertools.product(self.payoffs, self.discounts, self.priors, self.true_probs)
        for config_id, (payoffs, rho, prior, p) in enumerate(product):
            try:
                spec = payoffs.with_discount(rho)
            except ModelInputError as e:
                raise ConfigError(str(e)) from e
            points.append(GridPoint(config_id, spec, prior, p))
        return points

    def resolved(self) -> Dict[str, Any]:
        """Every setting with defaults filled in, as written to config.json."""
        out: Dict[str, Any] = {}
        if self.costs is not None:
            out["costs"] = [{"encounter": c.cost_encounter, "avoid": c.cost_avoid,
                             "no_encounter": c.cost_no_encounter} for c in self.costs]
        out["payoffs"] = [{"bad": p.payoff_bad, "avoid": p.payoff_avoid, "good": p.payoff_good}
                          for p in self.payoffs]
        out["discount"] = list(self.discounts)
        if self.elicitation_runs is not None:
            out["elicitation_run"] = list(self.elicitation_runs)
        out["prior"] = [{"n_bad": b.prior[0], "n_good": b.prior[1]} for b in self.priors]
        out["true_prob_bad"] = list(self.true_probs)
        for key in DEFAULTS:
            if key not in ("payoffs", "discount", "prior", "true_prob_bad"):
                value = getattr(self, key)
                out[key] = list(value) if isinstance(value, tuple) else value
        return out

    def calculator(self, discount: float):
        return get_calculator(discount, self.tolerance, self.max_index_horizon)


def load_config(path: Union[str, Path, None]) -> ExperimentConfig:
    """
    Read a JSON configuration file; None gives the defaults.

    :raises ConfigError: if the file is missing, not JSON, or invalid
    """
    if path is None:
        return ExperimentConfig.from_dict({})
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"{path}: cannot read configuration: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    config = ExperimentConfig.from_dict(data)
    logger.info("Loaded configuration %s (%d grid points)", path, len(config.grid()))
    return config


def write_json(path: Path, obj: Any) -> Path:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def _prepare(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", config.resolved())
    return out


def _table_name(config_id: int, many: bool) -> str:
    return f"index_table_c{config_id}.csv" if many else "index_table.csv"


def _mean(values: Sequence[float]) -> Optional[float]:
    return float(np.mean(values)) if len(values) else None


def _stats(values: Sequence[float]) -> Dict[str, Optional[float]]:
    if not len(values):
        return {"count": 0, "mean": None, "median": None, "min": None, "max": None}
    arr = np.asarray(values, dtype=float)
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }


@dataclass
class BiasReport:
    """
    Pattern counts and bias checks for one configuration's ensemble.

    ``status_quo_violations``, ``salience_violations`` and
    ``overestimation_violations`` must be zero; salience misses at switches
    that were boundary-uncertain are counted in ``salience_boundary_excluded``
    instead.
    """
    point: GridPoint
    trials: int
    horizon: int
    epsilon: float
    counts: Dict[str, int]
    status_quo_violations: int
    salience_violations: int
    salience_boundary_excluded: int
    boundary_uncertain_decisions: int
    unlikely_bad: bool
    overestimation_violations: int
    fraction_phat_tau_ge_pc: Optional[float]
    fraction_phat_tau_ge_true: Optional[float]
    tau: Dict[str, Optional[float]]
    p_hat_tau: Dict[str, Optional[float]]
    censored_abs_error: Dict[str, Optional[float]]
    censored_band: Optional[float]
    censored_within_band: Optional[float]
    incomplete_learning_fraction: float
    mean_discounted_payoff: float
    stderr_discounted_payoff: float
    estimate_table: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return self.status_quo_violations + self.salience_violations + self.overestimation_violations

    def as_record(self) -> dict:
        record = self.point.as_record()
        record["mean_lifetime"] = mean_lifetime(self.point.payoffs.discount)
        body = asdict(self)
        del body["point"]
        record.update(body)
        record["violations"] = self.violations
        return record


def bias_report(point: GridPoint, summaries: Sequence[TrajectorySummary], horizon: int,
                tolerance: float) -> BiasReport:
    """
    Scan an ensemble for the status-quo, salience and overestimation biases.

    :param point: the configuration the ensemble ran
    :param summaries: one summary per trial
    :param horizon: simulated periods
    :param tolerance: index tolerance; estimates may undershoot p_c by 2 tolerances
    :raises InvariantViolation: if the pattern counts do not add up to the trials
    """
    trials = len(summaries)
    if trials == 0:
        raise ConfigError("bias report needs at least one trial")
    counts = {p.value: sum(s.pattern == p.value for s in summaries) for p in Pattern}
    if sum(counts.values()) != trials:
        raise InvariantViolation(f"pattern counts {counts} do not sum to {trials}")

    p_c = point.payoffs.critical_probability
    p_true = point.true_prob_bad
    eps = BOUNDARY_FACTOR * tolerance

    status_quo = sum(1 for s in summaries if s.reverse_switches > 0 or s.switches > 1)
    learners = [s for s in summaries if s.pattern == Pattern.FINITE_LEARNING.value]
    misses = [s for s in learners if s.obs_before_tau != "B"]
    excluded = sum(1 for s in misses if s.switch_boundary_uncertain)
    stopped = [s for s in summaries if s.pattern != Pattern.STILL_EXPERIMENTING.value]
    censored = [s for s in summaries if s.censored]

    unlikely = p_true <= p_c
    over_pc = [s.p_hat_tau >= p_c - eps for s in stopped]
    over_true = [s.p_hat_tau >= p_true - eps for s in stopped]
    over_violations = sum(1 for ok in over_pc if not ok) if unlikely else 0

    errors = [abs(s.p_hat_final - p_true) for s in censored]
    band = None
    within = None
    if censored:
        band = estimate_band(p_true, point.prior.prior, horizon)
        within = float(np.mean([e <= band + 1e-12 for e in errors]))

    payoffs = np.array([s.discounted_payoff for s in summaries])
    incomplete = sum(1 for s in stopped if s.foresight_action == "Experiment")

    estimate_table = [
        {
            "regime": "stopped",
            "count": len(stopped),
            "true_prob_bad": p_true,
            "p_hat_mean": _mean([s.p_hat_tau for s in stopped]),
            "bias_mean": _mean([s.p_hat_tau - p_true for s in stopped]),
            "fraction_overestimating": _mean([s.p_hat_tau > p_true for s in stopped]),
        },
        {
            "regime": "still_experimenting",
            "count": len(censored),
            "true_prob_bad": p_true,
            "p_hat_mean": _mean([s.p_hat_final for s in censored]),
            "bias_mean": _mean([s.p_hat_final - p_true for s in censored]),
            "fraction_overestimating": _mean([s.p_hat_final > p_true for s in censored]),
        },
    ]

    report = BiasReport(
        point=point,
        trials=trials,
        horizon=horizon,
        epsilon=eps,
        counts=counts,
        status_quo_violations=status_quo,
        salience_violations=len(misses) - excluded,
        salience_boundary_excluded=excluded,
        boundary_uncertain_decisions=int(sum(s.boundary_uncertain for s in summaries)),
        unlikely_bad=unlikely,
        overestimation_violations=over_violations,
        fraction_phat_tau_ge_pc=_mean(over_pc),
        fraction_phat_tau_ge_true=_mean(over_true),
        tau=_stats([s.tau for s in learners]),
        p_hat_tau=_stats([s.p_hat_tau for s in learners]),
        censored_abs_error=_stats(errors),
        censored_band=band,
        censored_within_band=within,
        incomplete_learning_fraction=incomplete / trials,
        mean_discounted_payoff=float(payoffs.mean()),
        stderr_discounted_payoff=float(payoffs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        estimate_table=estimate_table,
    )
    if excluded:
        logger.warning("Config %d: %d salience misses at boundary-uncertain switches excluded",
                       point.config_id, excluded)
    if within is not None and within < 0.99:
        logger.warning("Config %d: only %.4f of censored estimates inside the %.4g band",
                       point.config_id, within, band)
    if report.violations:
        logger.error("Config %d: %d bias invariant violations", point.config_id, report.violations)
    return report


def histogram_frame(values: Dict[int, Sequence[float]], bins: int,
                    value_range: Tuple[float, float]) -> pd.DataFrame:
    """Histogram rows (config_id, bin_left, bin_right, count) on fixed bins."""
    edges = np.linspace(value_range[0], value_range[1], bins + 1)
    frames = []
    for config_id, data in values.items():
        counts, _ = np.histogram(np.asarray(data, dtype=float), bins=edges)
        frames.append(pd.DataFrame({
            "config_id": config_id,
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "count": counts,
        }))
    return pd.concat(frames, ignore_index=True)


def write_histogram_svg(path: Path, frame: pd.DataFrame, xlabel: str) -> Path:
    """Static SVG of a histogram frame, one step line per configuration."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "pygibias"
    fig, ax = plt.subplots(figsize=(6, 4))
    for config_id, rows in frame.groupby("config_id", sort=True):
        ax.stairs(rows["count"].to_numpy(), np.append(rows["bin_left"].to_numpy(),
                                                      rows["bin_right"].to_numpy()[-1]),
                  label=f"config {config_id}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("trajectories")
    if frame["config_id"].nunique() > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path


def cmd_emt(config: ExperimentConfig) -> pd.DataFrame:
    """
    Known-risk decision table: for each payoff table and each p in the EMT grid,
    p_c, the expected payoff of experimenting, and the EMT action.
    Writes emt.csv.
    """
    out = _prepare(config)
    rows = []
    for k, payoffs in enumerate(config.payoffs):
        p_c = payoffs.critical_probability
        for p in config.emt_grid:
            row = {
                "payoffs_id": k,
                "prob_bad": p,
                "critical_probability": p_c,
                "expected_payoff": expected_payoff(p, payoffs),
                "action": emt_rule(p, payoffs).value,
            }
            if config.costs is not None:
                row["expected_cost"] = expected_cost(p, config.costs[k])
            rows.append(row)
    frame = pd.DataFrame(rows)
    write_csv(out / "emt.csv", frame)
    return frame


def cmd_index_table(config: ExperimentConfig) -> List[Path]:
    """Write the index table of every grid point (one file when the grid has one point)."""
    out = _prepare(config)
    points = config.grid()
    many = len(points) > 1
    paths = []
    for point in points:
        table = build_table(point.prior, point.payoffs, config.table_depth,
                            calculator=config.calculator(point.payoffs.discount))
        paths.append(table.to_csv(out / _table_name(point.config_id, many)))
    return paths


def _run_grid(config: ExperimentConfig, progress: bool, keep: int):
    for point in config.grid():
        result = run_ensemble(
            point.prior, point.payoffs, point.true_prob_bad, config.horizon, config.trials,
            config.seed, calculator=config.calculator(point.payoffs.discount),
            workers=config.workers, keep=keep, config_id=point.config_id, progress=progress,
        )
        yield point, result


def cmd_simulate(config: ExperimentConfig, progress: bool = False) -> Dict[str, Any]:
    """
    Run every grid point's ensemble; write runs.csv, summary.json and, for the
    first ``export_trajectories`` trials of each point, trajectories.csv.
    """
    out = _prepare(config)
    runs = []
    steps = []
    configs = []
    for point, result in _run_grid(config, progress, config.export_trajectories):
        runs.extend(s.as_record() for s in result.summaries)
        calc = config.calculator(point.payoffs.discount)
        for trajectory in result.trajectories:
            frame = trajectory.to_frame(calc)
            frame.insert(0, "trial", trajectory.scenario.index)
            frame.insert(0, "config_id", point.config_id)
            steps.append(frame)
        payoffs = [s.discounted_payoff for s in result.summaries]
        record = point.as_record()
        record["counts"] = {p.value: sum(s.pattern == p.value for s in result.summaries)
                            for p in Pattern}
        record["mean_discounted_payoff"] = float(np.mean(payoffs))
        record["mean_learning_time"] = _mean([s.tau for s in result.summaries if s.tau is not None])
        configs.append(record)
    write_csv(out / "runs.csv", pd.DataFrame(runs))
    if steps:
        write_csv(out / "trajectories.csv", pd.concat(steps, ignore_index=True))
    summary = {"trials": config.trials, "horizon": config.horizon, "seed": config.seed,
               "configs": configs}
    write_json(out / "summary.json", summary)
    return summary


def cmd_biases(config: ExperimentConfig, progress: bool = False) -> List[BiasReport]:
    """
    Ensembles plus bias reports: summary.json, runs.csv, tau_hist.csv,
    phat_hist.csv, the index tables and optional SVG histograms.

    :raises InvariantViolation: after writing, if any report has violations
    """
    out = _prepare(config)
    points = config.grid()
    many = len(points) > 1
    reports = []
    runs = []
    taus: Dict[int, List[float]] = {}
    phats: Dict[int, List[float]] = {}
    for point, result in _run_grid(config, progress, 0):
        runs.extend(s.as_record() for s in result.summaries)
        learners = [s for s in result.summaries if s.pattern == Pattern.FINITE_LEARNING.value]
        taus[point.config_id] = [s.tau for s in learners]
        phats[point.config_id] = [s.p_hat_tau for s in learners]
        reports.append(bias_report(point, result.summaries, config.horizon, config.tolerance))
        table = build_table(point.prior, point.payoffs, config.table_depth,
                            calculator=config.calculator(point.payoffs.discount))
        table.to_csv(out / _table_name(point.config_id, many))

    write_csv(out / "runs.csv", pd.DataFrame(runs))
    tau_hist = histogram_frame(taus, config.histogram_bins, (0.0, float(config.horizon)))
    phat_hist = histogram_frame(phats, config.histogram_bins, (0.0, 1.0))
    write_csv(out / "tau_hist.csv", tau_hist)
    write_csv(out / "phat_hist.csv", phat_hist)
    if config.svg:
        write_histogram_svg(out / "tau_hist.svg", tau_hist, "learning time")
        write_histogram_svg(out / "phat_hist.svg", phat_hist, "estimate at learning time")

    total = sum(r.violations for r in reports)
    write_json(out / "summary.json", {"violations": total,
                                      "reports": [r.as_record() for r in reports]})
    if total:
        raise InvariantViolation(f"{total} bias invariant violations", reports)
    return reports


def cmd_oracle_check(config: ExperimentConfig, progress: bool = False) -> Dict[str, Any]:
    """
    Brute-force checks per distinct discount and payoff table: lifetime identity,
    lattice sweep, DP agreement with the index rule and the DP-side index, and
    GI dominance under the prior. Writes oracle_report.json and dp_values.csv.

    :raises InvariantViolation: after writing, if any check failed
    """
    out = _prepare(config)
    points = config.grid()
    failures = []

    lifetimes = []
    sweeps = []
    for rho in config.discounts:
        stream = np.ones(stream_length(rho))
        check = lifetime_equivalence(stream, rho, config.lifetime_trials, config.seed)
        lifetimes.append(check.as_record())
        if not check.within(3.0):
            failures.append(f"lifetime identity at discount {rho:g} (z={check.z_score:.2f})")
        sweep = lattice_sweep(rho, config.sweep_lattice_total, config.tolerance,
                              calculator=config.calculator(rho))
        sweeps.append(sweep.as_record())
        if sweep.lower_bound_violations or sweep.good_monotonicity_violations:
            failures.append(f"lattice sweep at discount {rho:g}")

    agreements = []
    seen = set()
    for point in points:
        key = (point.payoffs.payoff_bad, point.payoffs.payoff_avoid, point.payoffs.payoff_good,
               point.payoffs.discount)
        if key in seen:
            continue
        seen.add(key)
        result = dp_agreement(point.payoffs, config.oracle_lattice_total, config.dp_horizon,
                              calculator=config.calculator(point.payoffs.discount))
        record = result.as_record()
        record["payoffs"] = point.payoffs.as_record()
        agreements.append(record)
        if result.disagreements or result.index_mismatches:
            failures.append(f"DP agreement for payoffs {point.payoffs.as_record()}")

    dp_frames = []
    policies = []
    seen = set()
    for point in points:
        dp = dp_optimal(point.prior, point.payoffs, config.dp_horizon)
        frame = dp.to_frame()
        frame.insert(0, "config_id", point.config_id)
        dp_frames.append(frame)

        key = (point.payoffs, point.prior.prior)
        if key in seen:
            continue
        seen.add(key)
        comparison = compare_policies(
            point.prior, point.payoffs, TrueModel.from_prior(), config.policy_trials,
            config.seed, horizon=config.horizon,
            calculator=config.calculator(point.payoffs.discount),
        )
        record = comparison.as_record()
        record["config_id"] = point.config_id
        record["dp_value"] = dp.value
        record["dp_first_action"] = dp.first_action.value
        record["dp_tail_bound"] = dp.tail_bound
        policies.append(record)
        if not comparison.dominance_ok:
            failures.append(f"policy dominance for config {point.config_id}")

    write_csv(out / "dp_values.csv", pd.concat(dp_frames, ignore_index=True))
    report = {
        "violations": len(failures),
        "failures": failures,
        "mean_lifetime": {str(rho): mean_lifetime(rho) for rho in config.discounts},
        "lifetime": lifetimes,
        "lattice_sweep": sweeps,
        "dp_agreement": agreements,
        "policies": policies,
    }
    write_json(out / "oracle_report.json", report)
    if failures:
        for failure in failures:
            logger.error("Oracle check failed: %s", failure)
        raise InvariantViolation(f"{len(failures)} oracle checks failed", report)
    return report


__all__ = [
    "DEFAULTS",
    "BiasReport",
    "ConfigError",
    "ExperimentConfig",
    "GridPoint",
    "InvariantViolation",
    "bias_report",
    "cmd_biases",
    "cmd_emt",
    "cmd_index_table",
    "cmd_oracle_check",
    "cmd_simulate",
    "histogram_frame",
    "load_config",
    "write_histogram_svg",
]
