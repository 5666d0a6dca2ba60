# pygibias/gibias/belief.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Beta posterior bookkeeping for the unknown probability of the bad outcome.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Sequence, Tuple, Union

from scipy import stats

from .decision import ModelInputError

logger = logging.getLogger("pygibias.belief")


class Outcome(str, Enum):
    """State of Nature in one period."""
    BAD = "Bad"
    GOOD = "Good"

    @property
    def code(self) -> str:
        return "B" if self is Outcome.BAD else "G"


class Observation(str, Enum):
    """What the decision-maker sees at the end of a period; NONE is the blank symbol."""
    BAD = "Bad"
    GOOD = "Good"
    NONE = "None"

    @property
    def code(self) -> str:
        return {"Bad": "B", "Good": "G", "None": "-"}[self.value]

    @classmethod
    def from_outcome(cls, outcome: Outcome) -> "Observation":
        return cls.BAD if outcome is Outcome.BAD else cls.GOOD


_SYMBOLS = {"B": Outcome.BAD, "BAD": Outcome.BAD, "G": Outcome.GOOD, "GOOD": Outcome.GOOD}


@dataclass(frozen=True)
class BeliefState:
    """
    Beta posterior beta(n_bad, n_good) over the bad-outcome probability.

    n_bad = n^B_0 + N^B and n_good = n^G_0 + N^G, with N^B and N^G the
    observed counts, so the prior is always recoverable.
    """
    n_bad: float
    n_good: float
    count_bad: int = 0
    count_good: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.n_bad) and math.isfinite(self.n_good)):
            raise ModelInputError("beta parameters must be finite")
        if self.count_bad < 0 or self.count_good < 0:
            raise ModelInputError("observation counts must be nonnegative")
        if not (self.n_bad - self.count_bad > 0 and self.n_good - self.count_good > 0):
            raise ModelInputError(
                f"prior parameters must be positive, got ({self.n_bad - self.count_bad}, "
                f"{self.n_good - self.count_good})"
            )

    @property
    def prior(self) -> Tuple[float, float]:
        """(n^B_0, n^G_0)."""
        return (self.n_bad - self.count_bad, self.n_good - self.count_good)

    @property
    def observations(self) -> int:
        return self.count_bad + self.count_good

    @property
    def p_hat(self) -> float:
        return point_estimate(self)

    def as_record(self) -> Dict[str, float]:
        return {
            "n_bad": self.n_bad,
            "n_good": self.n_good,
            "count_bad": self.count_bad,
            "count_good": self.count_good,
        }

    @classmethod
    def from_record(cls, record: Dict[str, float]) -> "BeliefState":
        return cls(
            n_bad=float(record["n_bad"]),
            n_good=float(record["n_good"]),
            count_bad=int(record["count_bad"]),
            count_good=int(record["count_good"]),
        )

    def __str__(self) -> str:
        return f"beta({self.n_bad:g}, {self.n_good:g})"


def init_prior(n_bad0: float, n_good0: float) -> BeliefState:
    """
    Beta prior with no observations yet.

    :param n_bad0: prior weight on the bad outcome, > 0
    :param n_good0: prior weight on the good outcome, > 0
    :return: belief state with zero counts
    """
    try:
        n_bad0 = float(n_bad0)
        n_good0 = float(n_good0)
    except (TypeError, ValueError):
        raise ModelInputError(f"prior parameters must be numbers, got ({n_bad0!r}, {n_good0!r})")
    if not (n_bad0 > 0 and n_good0 > 0):
        raise ModelInputError(f"prior parameters must be positive, got ({n_bad0}, {n_good0})")
    return BeliefState(n_bad=n_bad0, n_good=n_good0)


def update(state: BeliefState, obs: Observation) -> BeliefState:
    """Posterior after one observation; the blank observation leaves it unchanged."""
    if obs is Observation.BAD:
        return BeliefState(state.n_bad + 1, state.n_good, state.count_bad + 1, state.count_good)
    if obs is Observation.GOOD:
        return BeliefState(state.n_bad, state.n_good + 1, state.count_bad, state.count_good + 1)
    return state


def update_many(state: BeliefState, observations: Iterable[Observation]) -> BeliefState:
    for obs in observations:
        state = update(state, obs)
    return state


def point_estimate(state: BeliefState) -> float:
    """p_hat = n_bad / (n_bad + n_good), the posterior mean of p^B."""
    return state.n_bad / (state.n_bad + state.n_good)


def parse_run(run: Union[str, Sequence[Union[str, Outcome]]]) -> Tuple[Outcome, ...]:
    """Read an outcome run written as ``"GGGB"`` or a sequence of symbols/outcomes."""
    outcomes = []
    for item in run:
        if isinstance(item, Outcome):
            outcomes.append(item)
            continue
        key = str(item).strip().upper()
        if key not in _SYMBOLS:
            raise ModelInputError(f"unknown outcome symbol {item!r}; use 'B', 'G', 'Bad' or 'Good'")
        outcomes.append(_SYMBOLS[key])
    return tuple(outcomes)


def elicit_prior(initial_run: Union[str, Sequence[Union[str, Outcome]]]) -> Tuple[int, int]:
    """
    Prior parameters from the set-up trials.

    The decision-maker experiments until the first change of outcome: n goods
    followed by one bad give (1, n); n bads followed by one good give (n, 1).

    :param initial_run: n >= 1 identical outcomes then exactly one opposite outcome
    :return: (n_bad0, n_good0)
    """
    outcomes = parse_run(initial_run)
    if len(outcomes) < 2:
        raise ModelInputError("elicitation run needs at least two outcomes")
    first, last = outcomes[0], outcomes[-1]
    if first is last:
        raise ModelInputError("elicitation run never switches outcome")
    if any(o is not first for o in outcomes[:-1]):
        raise ModelInputError("elicitation run must switch exactly once, at its last outcome")
    n = len(outcomes) - 1
    prior = (1, n) if first is Outcome.GOOD else (n, 1)
    logger.debug("Elicited prior %s from %d outcomes", prior, len(outcomes))
    return prior


def estimate_band(true_prob_bad: float, prior: Tuple[float, float], observations: int,
                  width: float = 3.0) -> float:
    """
    Half-width of the band p_hat should fall in after `observations` i.i.d. draws.

    ``width`` binomial standard deviations of the empirical frequency, plus the
    deterministic pull of the prior pseudo-counts.
    """
    if observations <= 0:
        raise ModelInputError("estimate band needs at least one observation")
    n_bad0, n_good0 = prior
    n0 = n_bad0 + n_good0
    sigma = stats.binom.std(observations, true_prob_bad) / observations
    pull = abs(n_bad0 - true_prob_bad * n0) / (n0 + observations)
    return width * sigma + pull
