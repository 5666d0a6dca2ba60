# pygibias/gibias/oracle.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Brute-force checks: exact finite-horizon dynamic programming over beliefs,
Monte Carlo policy values, and the geometric-lifetime reading of discounting.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from .belief import BeliefState
from .decision import Action, ModelInputError, PayoffSpec, emt_rule, mean_lifetime
from .gittins import DEFAULT_TOLERANCE, GittinsIndex, get_calculator
from .simulation import DEFAULT_HORIZON, Scenario, discounted_payoff, run_gi, substream

logger = logging.getLogger("pygibias.oracle")


@dataclass(frozen=True, eq=False)
class DpResult:
    """
    Finite-horizon optimum from a prior.

    ``values[(i, j)]`` and ``actions[(i, j)]`` describe the node reached after
    i Bad and j Good observations, at time i + j.
    """
    prior: BeliefState
    payoffs: PayoffSpec
    horizon: int
    value: float
    first_action: Action
    tail_bound: float
    values: Dict[Tuple[int, int], float] = field(repr=False)
    actions: Dict[Tuple[int, int], Action] = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "i": i,
                "j": j,
                "n_bad": self.prior.n_bad + i,
                "n_good": self.prior.n_good + j,
                "value": value,
                "action": self.actions[(i, j)].code,
            }
            for (i, j), value in sorted(self.values.items(), key=lambda kv: (sum(kv[0]), -kv[0][0]))
        ]
        return pd.DataFrame(rows, columns=["i", "j", "n_bad", "n_good", "value", "action"])


def _backward(prior: BeliefState, payoffs: PayoffSpec, horizon: int, record: bool):
    size = horizon + 1
    ii = np.arange(size + 1, dtype=float)[:, None]
    jj = np.arange(size + 1, dtype=float)[None, :]
    nb = prior.n_bad + ii
    ng = prior.n_good + jj
    p_bad = (nb / (nb + ng))[:size, :size]
    rho = payoffs.discount
    nxt = np.zeros((size + 1, size + 1))
    values: Dict[Tuple[int, int], float] = {}
    actions: Dict[Tuple[int, int], Action] = {}
    for t in range(horizon - 1, -1, -1):
        stay = nxt[:size, :size]
        avoid = payoffs.payoff_avoid + rho * stay
        experiment = (p_bad * (payoffs.payoff_bad + rho * nxt[1:, :size])
                      + (1.0 - p_bad) * (payoffs.payoff_good + rho * nxt[:size, 1:]))
        cur = np.zeros_like(nxt)
        cur[:size, :size] = np.maximum(avoid, experiment)
        if record or t == 0:
            for i in range(t + 1):
                j = t - i
                values[(i, j)] = float(cur[i, j])
                # ties resolve to Avoid
                actions[(i, j)] = Action.EXPERIMENT if experiment[i, j] > avoid[i, j] else Action.AVOID
        nxt = cur
    return values, actions


def dp_optimal(prior: BeliefState, payoffs: PayoffSpec, horizon: int) -> DpResult:
    """
    Backward induction V_H = 0,
    V_t(s) = max(U_A + rho V_{t+1}(s),
                 p(s)(U^B + rho V_{t+1}(s+Bad)) + (1-p(s))(U^G + rho V_{t+1}(s+Good))),
    with p(s) the posterior mean of the bad-outcome probability.

    :param prior: initial belief
    :param payoffs: payoffs and discount
    :param horizon: number of periods H >= 1
    """
    if horizon < 1:
        raise ModelInputError(f"horizon must be >= 1, got {horizon}")
    values, actions = _backward(prior, payoffs, horizon, record=True)
    tail = payoffs.discount ** horizon * payoffs.spread / (1.0 - payoffs.discount)
    return DpResult(
        prior=prior,
        payoffs=payoffs,
        horizon=horizon,
        value=values[(0, 0)],
        first_action=actions[(0, 0)],
        tail_bound=tail,
        values=values,
        actions=actions,
    )


def dp_first_action(prior: BeliefState, payoffs: PayoffSpec, horizon: int) -> Action:
    if horizon < 1:
        raise ModelInputError(f"horizon must be >= 1, got {horizon}")
    return _backward(prior, payoffs, horizon, record=False)[1][(0, 0)]


def dp_index(belief: BeliefState, discount: float, horizon: int,
             tolerance: float = DEFAULT_TOLERANCE) -> float:
    """
    Index recomputed from the DP alone: bisect the sure payoff lam in (0, 1)
    until the first action under payoffs (0, lam, 1) flips.
    """
    lo, hi = 0.0, 1.0
    while hi - lo > tolerance:
        lam = 0.5 * (lo + hi)
        spec = PayoffSpec(0.0, lam, 1.0, discount)
        if dp_first_action(belief, spec, horizon) is Action.EXPERIMENT:
            lo = lam
        else:
            hi = lam
    return 0.5 * (lo + hi)


def integer_lattice(total: int) -> List[BeliefState]:
    """All beta(a, b) with integer a, b >= 1 and a + b <= total."""
    return [BeliefState(float(a), float(s - a)) for s in range(2, total + 1) for a in range(1, s)]


@dataclass(frozen=True)
class AgreementResult:
    """DP first actions against the index rule on a lattice of beliefs."""
    states: int
    certified: int
    disagreements: int
    index_mismatches: int
    max_index_error: float
    bound: float

    def as_record(self) -> dict:
        return asdict(self)


def dp_agreement(payoffs: PayoffSpec, total: int, horizon: int,
                 tolerance: float = DEFAULT_TOLERANCE,
                 calculator: Optional[GittinsIndex] = None,
                 check_index: bool = True) -> AgreementResult:
    """
    Compare DP first actions with the index rule on every integer belief with
    n_bad + n_good <= total.

    A state is certified when |index_payoff - U_A| exceeds
    2 * tail + 2 * (U^G - U^B) * tolerance; only certified states can
    disagree. With ``check_index`` the DP-side index is also bisected, on a
    horizon at least as long as the calculator's truncation horizon, and
    compared with the calibrated one within 2 tolerances.
    """
    calc = calculator or get_calculator(payoffs.discount, tolerance)
    tail = payoffs.discount ** horizon * payoffs.spread / (1.0 - payoffs.discount)
    bound = 2.0 * tail + 2.0 * payoffs.spread * calc.tolerance
    beliefs = integer_lattice(total)
    indices = calc.normalized_indices([b.n_bad for b in beliefs], [b.n_good for b in beliefs])
    certified = disagreements = mismatches = 0
    max_error = 0.0
    index_horizon = max(horizon, calc.horizon)
    for belief, index in zip(beliefs, indices):
        margin = abs(payoffs.payoff_bad + payoffs.spread * index - payoffs.payoff_avoid)
        if margin > bound:
            certified += 1
            if dp_first_action(belief, payoffs, horizon) is not calc.decide(belief, payoffs):
                disagreements += 1
                logger.error("DP and index rule disagree at %s (margin %.3g)", belief, margin)
        if check_index:
            error = abs(dp_index(belief, payoffs.discount, index_horizon, calc.tolerance) - index)
            max_error = max(max_error, error)
            if error > 2.0 * calc.tolerance:
                mismatches += 1
                logger.error("DP-side index differs at %s by %.3g", belief, error)
    return AgreementResult(
        states=len(beliefs),
        certified=certified,
        disagreements=disagreements,
        index_mismatches=mismatches,
        max_index_error=max_error,
        bound=bound,
    )


class Strategy(str, Enum):
    """Policies compared by Monte Carlo."""
    GI = "GI"
    ALWAYS_AVOID = "AlwaysAvoid"
    ALWAYS_EXPERIMENT = "AlwaysExperiment"
    EMT_KNOWN_P = "EMTKnownP"


@dataclass(frozen=True)
class TrueModel:
    """Where the true bad-outcome probability comes from: fixed, or drawn from the prior."""
    prob_bad: Optional[float] = None

    def __post_init__(self):
        if self.prob_bad is not None and not 0.0 <= self.prob_bad <= 1.0:
            raise ModelInputError(f"prob_bad must lie in [0, 1], got {self.prob_bad!r}")

    @classmethod
    def fixed(cls, prob_bad: float) -> "TrueModel":
        return cls(prob_bad)

    @classmethod
    def from_prior(cls) -> "TrueModel":
        return cls(None)

    @property
    def label(self) -> str:
        return "prior" if self.prob_bad is None else f"fixed:{self.prob_bad:g}"

    def draw(self, prior: BeliefState, rng: np.random.Generator) -> float:
        if self.prob_bad is None:
            return float(rng.beta(prior.n_bad, prior.n_good))
        return self.prob_bad


@dataclass(frozen=True)
class McEstimate:
    strategy: Strategy
    mean: float
    stderr: float
    trials: int

    def as_record(self) -> dict:
        return {"strategy": self.strategy.value, "mean": self.mean, "stderr": self.stderr,
                "trials": self.trials}


def _stderr(samples: np.ndarray) -> float:
    if samples.size < 2:
        return 0.0
    return float(samples.std(ddof=1) / math.sqrt(samples.size))


def _policy_payoffs(strategies: Sequence[Strategy], prior: BeliefState, payoffs: PayoffSpec,
                    true_model: TrueModel, trials: int, seed: int, horizon: int,
                    calculator: Optional[GittinsIndex]) -> Dict[Strategy, np.ndarray]:
    # trial k draws p then the states from substream k, shared by all strategies
    if trials < 1:
        raise ModelInputError(f"trials must be >= 1, got {trials}")
    calc = calculator
    if Strategy.GI in strategies and calc is None:
        calc = get_calculator(payoffs.discount)
    out = {s: np.empty(trials) for s in strategies}
    never = np.zeros(horizon, dtype=bool)
    always = np.ones(horizon, dtype=bool)
    for k in range(trials):
        rng = substream(seed, k)
        p = true_model.draw(prior, rng)
        bad = rng.random(horizon) < p
        for s in strategies:
            if s is Strategy.GI:
                scenario = Scenario(p, horizon, seed, k, bad)
                out[s][k] = run_gi(prior, payoffs, scenario, calculator=calc).discounted_payoff
            elif s is Strategy.ALWAYS_AVOID:
                out[s][k] = discounted_payoff(never, bad, payoffs)
            elif s is Strategy.ALWAYS_EXPERIMENT:
                out[s][k] = discounted_payoff(always, bad, payoffs)
            else:
                chosen = never if emt_rule(p, payoffs) is Action.AVOID else always
                out[s][k] = discounted_payoff(chosen, bad, payoffs)
    return out


def policy_value_mc(strategy: Strategy, prior: BeliefState, payoffs: PayoffSpec,
                    true_model: TrueModel, trials: int, seed: int,
                    horizon: int = DEFAULT_HORIZON,
                    calculator: Optional[GittinsIndex] = None) -> McEstimate:
    """
    Mean discounted payoff of a strategy and its standard error.

    :param strategy: policy to evaluate
    :param true_model: fixed probability, or drawn from the prior each trial
    :param trials: number of Monte Carlo trials, >= 1
    :param seed: base seed of the trial substreams
    :param horizon: simulated periods
    """
    samples = _policy_payoffs([Strategy(strategy)], prior, payoffs, true_model, trials, seed,
                              horizon, calculator)[Strategy(strategy)]
    return McEstimate(Strategy(strategy), float(samples.mean()), _stderr(samples), trials)


@dataclass(frozen=True)
class PolicyComparison:
    """GI against the other strategies on common random numbers."""
    true_model: str
    payoffs: PayoffSpec
    estimates: Dict[Strategy, McEstimate]
    paired_diff: Dict[Strategy, Tuple[float, float]]
    dominance_ok: bool

    def as_record(self) -> dict:
        record = {
            "true_model": self.true_model,
            "payoffs": self.payoffs.as_record(),
            "estimates": [e.as_record() for e in self.estimates.values()],
            "gi_minus": {},
            "dominance_ok": self.dominance_ok,
        }
        for s, (mean, paired_se) in self.paired_diff.items():
            gi, other = self.estimates[Strategy.GI], self.estimates[s]
            record["gi_minus"][s.value] = {
                "mean": mean,
                "paired_stderr": paired_se,
                "combined_stderr": math.hypot(gi.stderr, other.stderr),
            }
        return record


# comparators GI must not lose to; the known-p rule sees information GI lacks
NON_CLAIRVOYANT = (Strategy.ALWAYS_AVOID, Strategy.ALWAYS_EXPERIMENT)


def compare_policies(prior: BeliefState, payoffs: PayoffSpec, true_model: TrueModel,
                     trials: int, seed: int, horizon: int = DEFAULT_HORIZON,
                     calculator: Optional[GittinsIndex] = None,
                     strategies: Iterable[Strategy] = tuple(Strategy)) -> PolicyComparison:
    """
    Evaluate strategies on the same draws and check GI dominance.

    GI passes when, for each non-clairvoyant comparator, mean(GI) - mean(other)
    >= -3 * sqrt(se_GI^2 + se_other^2).
    """
    strategies = list(dict.fromkeys([Strategy.GI, *strategies]))
    samples = _policy_payoffs(strategies, prior, payoffs, true_model, trials, seed, horizon,
                              calculator)
    estimates = {s: McEstimate(s, float(v.mean()), _stderr(v), trials) for s, v in samples.items()}
    paired = {}
    ok = True
    for s in strategies:
        if s is Strategy.GI:
            continue
        diff = samples[Strategy.GI] - samples[s]
        paired[s] = (float(diff.mean()), _stderr(diff))
        if s in NON_CLAIRVOYANT:
            combined = math.hypot(estimates[Strategy.GI].stderr, estimates[s].stderr)
            if diff.mean() < -3.0 * combined:
                ok = False
                logger.error("GI below %s by %.4g (combined se %.3g)", s.value, -diff.mean(), combined)
    logger.info("Policy comparison (%s, %d trials): %s", true_model.label, trials,
                {s.value: round(e.mean, 6) for s, e in estimates.items()})
    return PolicyComparison(true_model.label, payoffs, estimates, paired, ok)


def geometric_lifetimes(discount: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Lifetimes theta on {0, 1, 2, ...} with P(theta >= t) = rho^t."""
    return stats.geom(1.0 - discount, loc=-1).rvs(size=size, random_state=rng).astype(int)


@dataclass(frozen=True)
class LifetimeCheck:
    """Discounted sum against the lifetime-truncated sum."""
    discount: float
    mean_lifetime: float
    discounted_sum: float
    mc_mean: float
    mc_stderr: float
    trials: int

    @property
    def z_score(self) -> float:
        diff = self.mc_mean - self.discounted_sum
        if self.mc_stderr == 0.0:
            return 0.0 if abs(diff) < 1e-12 else math.inf
        return diff / self.mc_stderr

    def within(self, k: float = 3.0) -> bool:
        return abs(self.z_score) <= k

    def as_record(self) -> dict:
        record = asdict(self)
        record["z_score"] = self.z_score
        return record


def lifetime_equivalence(payoff_stream: Sequence[float], discount: float, trials: int,
                         seed: int) -> LifetimeCheck:
    """
    sum_t rho^t u_t against E[sum_{t <= theta} u_t] for a geometric lifetime
    of mean rho / (1 - rho). Lifetimes past the stream's end count the whole stream.
    """
    if not 0.0 <= discount < 1.0:
        raise ModelInputError(f"discount must lie in [0, 1), got {discount!r}")
    if trials < 1:
        raise ModelInputError(f"trials must be >= 1, got {trials}")
    stream = np.asarray(payoff_stream, dtype=float)
    if stream.ndim != 1 or stream.size == 0 or not np.all(np.isfinite(stream)):
        raise ModelInputError("payoff stream must be a nonempty finite sequence")
    discounted = float(stream @ (discount ** np.arange(stream.size, dtype=float)))
    lifetimes = geometric_lifetimes(discount, trials, substream(seed, 0))
    partial = np.cumsum(stream)[np.minimum(lifetimes, stream.size - 1)]
    return LifetimeCheck(
        discount=discount,
        mean_lifetime=mean_lifetime(discount),
        discounted_sum=discounted,
        mc_mean=float(partial.mean()),
        mc_stderr=_stderr(partial),
        trials=trials,
    )


def stream_length(discount: float, precision: float = 1e-12) -> int:
    """Periods after which rho^t drops below `precision`."""
    if discount == 0.0:
        return 1
    return max(1, math.ceil(math.log(precision) / math.log(discount)))


__all__ = [
    "AgreementResult",
    "DpResult",
    "LifetimeCheck",
    "McEstimate",
    "PolicyComparison",
    "Strategy",
    "TrueModel",
    "compare_policies",
    "dp_agreement",
    "dp_first_action",
    "dp_index",
    "dp_optimal",
    "geometric_lifetimes",
    "integer_lattice",
    "lifetime_equivalence",
    "policy_value_mc",
    "stream_length",
]
