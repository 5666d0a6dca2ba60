# pygibias/gibias/simulation.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Runs the index decision-maker against seeded scenarios of Nature.

Time runs t = 0 .. T-1: the decision v_t is taken on belief pi_t, the state
X_{t+1} (``scenario.bad[t]``) is drawn, and the observation Y_{t+1} is the
state when experimenting and blank when avoiding.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .belief import BeliefState, Observation, Outcome
from .decision import Action, ModelInputError, PayoffSpec, emt_rule
from .gittins import BOUNDARY_FACTOR, DEFAULT_TOLERANCE, GittinsIndex, get_calculator

logger = logging.getLogger("pygibias.simulation")

DEFAULT_HORIZON = 1000
SEED_LIMIT = 2 ** 64


class Pattern(str, Enum):
    """The three behaviors of the index decision-maker."""
    NO_LEARNING = "NoLearning"
    FINITE_LEARNING = "FiniteLearning"
    STILL_EXPERIMENTING = "StillExperimenting"


def substream(seed: int, index: int) -> np.random.Generator:
    """
    Counter-based Philox generator for trajectory `index` under base `seed`.

    Substreams depend only on (seed, index), so ensembles give the same
    draws whatever the execution order.
    """
    if not 0 <= seed < SEED_LIMIT:
        raise ModelInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if index < 0:
        raise ModelInputError(f"substream index must be nonnegative, got {index}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True, eq=False)
class Scenario:
    """A finite run of i.i.d. Bernoulli states of Nature; ``bad[t]`` is X_{t+1} == Bad."""
    true_prob_bad: float
    horizon: int
    seed: int
    index: int
    bad: np.ndarray = field(repr=False)

    @property
    def states(self) -> Tuple[Outcome, ...]:
        return tuple(Outcome.BAD if b else Outcome.GOOD for b in self.bad)

    def outcome(self, t: int) -> Outcome:
        return Outcome.BAD if self.bad[t] else Outcome.GOOD

    @property
    def bad_frequency(self) -> float:
        return float(self.bad.mean())


def generate_scenario(true_prob_bad: float, horizon: int, seed: int, index: int = 0) -> Scenario:
    """
    Draw `horizon` states with P(Bad) = true_prob_bad from substream (seed, index).

    The same uniforms are used for every probability, so scenarios sharing
    (seed, index) are coupled.
    """
    if not 0.0 <= true_prob_bad <= 1.0:
        raise ModelInputError(f"true_prob_bad must lie in [0, 1], got {true_prob_bad!r}")
    if horizon < 1:
        raise ModelInputError(f"horizon must be >= 1, got {horizon}")
    uniforms = substream(seed, index).random(horizon)
    return Scenario(
        true_prob_bad=float(true_prob_bad),
        horizon=int(horizon),
        seed=int(seed),
        index=int(index),
        bad=uniforms < true_prob_bad,
    )


def observe(action: Action, state: Outcome) -> Observation:
    """Observation mapping: experimenting reveals the state, avoiding reveals nothing."""
    if action is Action.AVOID:
        return Observation.NONE
    return Observation.from_outcome(state)


def discounted_payoff(experiment: np.ndarray, bad: np.ndarray, payoffs: PayoffSpec) -> float:
    """
    J = sum_t rho^t U(v_t, X_{t+1}) over the simulated horizon.

    :param experiment: boolean array, True where v_t is Experiment
    :param bad: boolean array, True where X_{t+1} is Bad
    """
    experiment = np.asarray(experiment, dtype=bool)
    bad = np.asarray(bad, dtype=bool)
    rewards = np.where(experiment, np.where(bad, payoffs.payoff_bad, payoffs.payoff_good),
                       payoffs.payoff_avoid)
    weights = payoffs.discount ** np.arange(len(rewards), dtype=float)
    return float(rewards @ weights)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    One simulated life of the index decision-maker.

    ``n_bad`` and ``n_good`` hold the belief path pi_0 .. pi_T; ``learning_time``
    equals the horizon when no switch happened (censored).
    """
    scenario: Scenario
    prior: BeliefState
    payoffs: PayoffSpec
    experiment: np.ndarray = field(repr=False)
    n_bad: np.ndarray = field(repr=False)
    n_good: np.ndarray = field(repr=False)
    learning_time: int
    censored: bool
    discounted_payoff: float
    pattern: Pattern
    boundary_uncertain: int = 0
    switch_boundary_uncertain: bool = False

    @property
    def horizon(self) -> int:
        return self.scenario.horizon

    @property
    def tau(self) -> Optional[int]:
        return None if self.censored else self.learning_time

    @property
    def actions(self) -> Tuple[Action, ...]:
        return tuple(Action.EXPERIMENT if e else Action.AVOID for e in self.experiment)

    @property
    def observations(self) -> Tuple[Observation, ...]:
        return tuple(observe(a, s) for a, s in zip(self.actions, self.scenario.states))

    def belief_at(self, t: int) -> BeliefState:
        return BeliefState(
            float(self.n_bad[t]),
            float(self.n_good[t]),
            self.prior.count_bad + int(round(self.n_bad[t] - self.prior.n_bad)),
            self.prior.count_good + int(round(self.n_good[t] - self.prior.n_good)),
        )

    @property
    def beliefs(self) -> List[BeliefState]:
        return [self.belief_at(t) for t in range(self.horizon + 1)]

    @property
    def p_hat(self) -> np.ndarray:
        return self.n_bad / (self.n_bad + self.n_good)

    def to_frame(self, calculator: Optional[GittinsIndex] = None) -> pd.DataFrame:
        """One row per period: t, action, state, observation, n_bad, n_good, p_hat, index_value."""
        calc = calculator or get_calculator(self.payoffs.discount)
        T = self.horizon
        index_values = calc.normalized_indices(self.n_bad[:T], self.n_good[:T])
        observation = np.where(self.experiment, np.where(self.scenario.bad, "B", "G"), "-")
        return pd.DataFrame({
            "t": np.arange(T),
            "action": np.where(self.experiment, "E", "A"),
            "state": np.where(self.scenario.bad, "B", "G"),
            "observation": observation,
            "n_bad": self.n_bad[:T],
            "n_good": self.n_good[:T],
            "p_hat": self.p_hat[:T],
            "index_value": index_values,
        })


def run_gi(prior: BeliefState, payoffs: PayoffSpec, scenario: Scenario,
           calculator: Optional[GittinsIndex] = None,
           tolerance: float = DEFAULT_TOLERANCE) -> Trajectory:
    """
    Follow the prudent index strategy through a scenario.

    While experimenting the belief path is fixed by the scenario's running
    counts, so it is built in one pass; only beliefs whose good fraction does
    not already clear the threshold are put to the index rule, in time order,
    until the first Avoid. From then on every period is still decided by the
    index rule, on a posterior that only moves when it experiments, so a
    return to experimenting shows up as a reverse switch.

    :param prior: initial belief
    :param payoffs: payoffs and discount
    :param scenario: states of Nature
    :param calculator: shared index calculator, defaults to the module one
    :param tolerance: index tolerance when no calculator is given
    """
    calc = calculator or get_calculator(payoffs.discount, tolerance)
    T = scenario.horizon
    bad = scenario.bad
    cum_bad = np.concatenate(([0], np.cumsum(bad)))
    cum_good = np.arange(T + 1) - cum_bad
    n_bad = prior.n_bad + cum_bad.astype(float)
    n_good = prior.n_good + cum_good.astype(float)

    threshold = payoffs.threshold
    settled = n_good[:T] / (n_bad[:T] + n_good[:T]) > threshold + BOUNDARY_FACTOR * calc.tolerance
    tau = T
    uncertain = 0
    switch_uncertain = False
    for t in np.flatnonzero(~settled):
        belief = BeliefState(
            float(n_bad[t]), float(n_good[t]),
            prior.count_bad + int(cum_bad[t]), prior.count_good + int(cum_good[t]),
        )
        decision = calc.assess(belief, payoffs)
        uncertain += int(decision.boundary_uncertain)
        if decision.action is Action.AVOID:
            tau = int(t)
            switch_uncertain = decision.boundary_uncertain
            break

    experiment = np.arange(T) < tau
    if tau < T:
        # the posterior only moves on Experiment periods
        nb, ng = float(n_bad[tau]), float(n_good[tau])
        cb, cg = prior.count_bad + int(cum_bad[tau]), prior.count_good + int(cum_good[tau])
        for t in range(tau + 1, T):
            n_bad[t], n_good[t] = nb, ng
            decision = calc.assess(BeliefState(nb, ng, cb, cg), payoffs)
            uncertain += int(decision.boundary_uncertain)
            if decision.action is Action.EXPERIMENT:
                experiment[t] = True
                if bad[t]:
                    nb, cb = nb + 1.0, cb + 1
                else:
                    ng, cg = ng + 1.0, cg + 1
        n_bad[T], n_good[T] = nb, ng
    if tau == T:
        pattern = Pattern.STILL_EXPERIMENTING
    elif tau == 0:
        pattern = Pattern.NO_LEARNING
    else:
        pattern = Pattern.FINITE_LEARNING
    return Trajectory(
        scenario=scenario,
        prior=prior,
        payoffs=payoffs,
        experiment=experiment,
        n_bad=n_bad,
        n_good=n_good,
        learning_time=tau,
        censored=tau == T,
        discounted_payoff=discounted_payoff(experiment, bad, payoffs),
        pattern=pattern,
        boundary_uncertain=uncertain,
        switch_boundary_uncertain=switch_uncertain,
    )


@dataclass(frozen=True)
class Classification:
    """Behavior pattern recovered from the action sequence alone."""
    pattern: Pattern
    learning_time: Optional[int]
    switches: int
    reverse_switches: int
    p_hat_initial: float
    p_hat_tau: Optional[float]
    p_hat_final: float
    observation_before_switch: Optional[Observation]

    @property
    def salience_ok(self) -> bool:
        return self.observation_before_switch in (None, Observation.BAD)


def classify_actions(experiment: np.ndarray, bad: np.ndarray,
                     p_hat: np.ndarray) -> Classification:
    """
    Classify a run from its actions, states and estimate path.

    :param experiment: boolean array of length T
    :param bad: boolean array of length T
    :param p_hat: estimates for t = 0 .. T
    """
    experiment = np.asarray(experiment, dtype=bool)
    switches = int(np.count_nonzero(experiment[:-1] & ~experiment[1:]))
    reverse = int(np.count_nonzero(~experiment[:-1] & experiment[1:]))
    avoided = np.flatnonzero(~experiment)
    if avoided.size == 0:
        pattern, tau, p_tau, before = Pattern.STILL_EXPERIMENTING, None, None, None
    else:
        tau = int(avoided[0])
        p_tau = float(p_hat[tau])
        if tau == 0:
            pattern, before = Pattern.NO_LEARNING, None
        else:
            pattern = Pattern.FINITE_LEARNING
            before = Observation.BAD if bad[tau - 1] else Observation.GOOD
    return Classification(
        pattern=pattern,
        learning_time=tau,
        switches=switches,
        reverse_switches=reverse,
        p_hat_initial=float(p_hat[0]),
        p_hat_tau=p_tau,
        p_hat_final=float(p_hat[-1]),
        observation_before_switch=before,
    )


def classify(trajectory: Trajectory) -> Classification:
    return classify_actions(trajectory.experiment, trajectory.scenario.bad, trajectory.p_hat)


@dataclass(frozen=True)
class TrajectorySummary:
    """Per-trajectory record written to runs.csv and the JSON summaries."""
    config_id: int
    trial: int
    seed: int
    true_prob_bad: float
    tau: Optional[int]
    censored: bool
    pattern: str
    switches: int
    reverse_switches: int
    obs_before_tau: Optional[str]
    p_hat_0: float
    p_hat_tau: Optional[float]
    p_hat_final: float
    discounted_payoff: float
    boundary_uncertain: int
    switch_boundary_uncertain: bool
    foresight_action: str

    def as_record(self) -> dict:
        return asdict(self)


def summarize(trajectory: Trajectory, config_id: int = 0) -> TrajectorySummary:
    c = classify(trajectory)
    scenario = trajectory.scenario
    return TrajectorySummary(
        config_id=config_id,
        trial=scenario.index,
        seed=scenario.seed,
        true_prob_bad=scenario.true_prob_bad,
        tau=c.learning_time,
        censored=trajectory.censored,
        pattern=c.pattern.value,
        switches=c.switches,
        reverse_switches=c.reverse_switches,
        obs_before_tau=c.observation_before_switch.code if c.observation_before_switch else None,
        p_hat_0=c.p_hat_initial,
        p_hat_tau=c.p_hat_tau,
        p_hat_final=c.p_hat_final,
        discounted_payoff=trajectory.discounted_payoff,
        boundary_uncertain=trajectory.boundary_uncertain,
        switch_boundary_uncertain=trajectory.switch_boundary_uncertain,
        foresight_action=emt_rule(scenario.true_prob_bad, trajectory.payoffs).value,
    )


@dataclass
class EnsembleResult:
    """Summaries of every trial, ordered by trial index, plus the kept trajectories."""
    summaries: List[TrajectorySummary]
    trajectories: List[Trajectory]


def run_ensemble(prior: BeliefState, payoffs: PayoffSpec, true_prob_bad: float,
                 horizon: int, trials: int, seed: int,
                 calculator: Optional[GittinsIndex] = None, workers: int = 1,
                 keep: int = 0, config_id: int = 0, progress: bool = False) -> EnsembleResult:
    """
    Run `trials` independent trajectories on substreams 0 .. trials-1.

    :param workers: thread pool size; results are merged by trial index
    :param keep: number of leading trajectories kept in full
    :param progress: show a progress bar
    """
    if trials < 1:
        raise ModelInputError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise ModelInputError(f"workers must be >= 1, got {workers}")
    calc = calculator or get_calculator(payoffs.discount)

    def one(k: int):
        scenario = generate_scenario(true_prob_bad, horizon, seed, k)
        trajectory = run_gi(prior, payoffs, scenario, calculator=calc)
        return summarize(trajectory, config_id), (trajectory if k < keep else None)

    logger.info(
        "Ensemble %d: %d trials, p_bad=%g, horizon=%d, prior=%s, discount=%g, workers=%d",
        config_id, trials, true_prob_bad, horizon, prior, payoffs.discount, workers,
    )
    desc = f"config {config_id}"
    if workers == 1:
        results = [one(k) for k in tqdm(range(trials), desc=desc, disable=not progress)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(one, range(trials)), total=trials, desc=desc,
                                disable=not progress))
    summaries = [r[0] for r in results]
    kept = [r[1] for r in results if r[1] is not None]
    counts = {p.value: sum(s.pattern == p.value for s in summaries) for p in Pattern}
    logger.info("Ensemble %d done: %s", config_id, counts)
    return EnsembleResult(summaries=summaries, trajectories=kept)


__all__ = [
    "DEFAULT_HORIZON",
    "Classification",
    "EnsembleResult",
    "Pattern",
    "Scenario",
    "Trajectory",
    "TrajectorySummary",
    "classify",
    "classify_actions",
    "discounted_payoff",
    "generate_scenario",
    "observe",
    "run_ensemble",
    "run_gi",
    "substream",
    "summarize",
]
