# pygibias/gibias/decision.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Decision under known risk: cost and payoff tables, the critical probability,
and the static error-management rule.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

logger = logging.getLogger("pygibias.decision")


class ModelInputError(ValueError):
    """Raised when a model input violates its ordering or range constraints."""
    pass


class Action(str, Enum):
    """The two decisions open to the decision-maker."""
    AVOID = "Avoid"
    EXPERIMENT = "Experiment"

    @property
    def code(self) -> str:
        return "A" if self is Action.AVOID else "E"


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ModelInputError(f"{name} must be finite, got {value!r}")


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ModelInputError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class CostTable:
    """
    Fitness costs of the three situations.

    :param cost_avoid: cost of avoiding (C_A)
    :param cost_encounter: cost of meeting the bad outcome (C^B)
    :param cost_no_encounter: cost when the good outcome occurs (C^G)
    """
    cost_avoid: float
    cost_encounter: float
    cost_no_encounter: float

    def __post_init__(self):
        _check_finite(
            cost_avoid=self.cost_avoid,
            cost_encounter=self.cost_encounter,
            cost_no_encounter=self.cost_no_encounter,
        )
        if not self.cost_no_encounter < self.cost_avoid < self.cost_encounter:
            raise ModelInputError(
                "costs must satisfy cost_no_encounter < cost_avoid < cost_encounter, got "
                f"({self.cost_no_encounter}, {self.cost_avoid}, {self.cost_encounter})"
            )


@dataclass(frozen=True)
class PayoffSpec:
    """
    Instant payoffs U^B < U_A < U^G and the discount factor.

    :param payoff_bad: payoff when experimenting meets the bad outcome
    :param payoff_avoid: sure payoff of avoiding
    :param payoff_good: payoff when experimenting meets the good outcome
    :param discount: discount factor in [0, 1)
    """
    payoff_bad: float
    payoff_avoid: float
    payoff_good: float
    discount: float = 0.0

    def __post_init__(self):
        _check_finite(
            payoff_bad=self.payoff_bad,
            payoff_avoid=self.payoff_avoid,
            payoff_good=self.payoff_good,
            discount=self.discount,
        )
        if not self.payoff_good > self.payoff_avoid > self.payoff_bad:
            raise ModelInputError(
                "payoffs must satisfy payoff_good > payoff_avoid > payoff_bad, got "
                f"({self.payoff_bad}, {self.payoff_avoid}, {self.payoff_good})"
            )
        if not 0.0 <= self.discount < 1.0:
            raise ModelInputError(f"discount must lie in [0, 1), got {self.discount!r}")

    @property
    def spread(self) -> float:
        """U^G - U^B, the scale between normalized and payoff units."""
        return self.payoff_good - self.payoff_bad

    @property
    def critical_probability(self) -> float:
        return critical_probability_payoffs(self)

    @property
    def threshold(self) -> float:
        """Normalized index threshold 1 - p_c; experimenting requires an index above it."""
        return 1.0 - self.critical_probability

    def with_discount(self, discount: float) -> "PayoffSpec":
        return replace(self, discount=discount)

    def payoff(self, action: Action, bad: bool) -> float:
        """Instant payoff U(v, X) of one period."""
        if action is Action.AVOID:
            return self.payoff_avoid
        return self.payoff_bad if bad else self.payoff_good

    def as_record(self) -> dict:
        return {
            "bad": self.payoff_bad,
            "avoid": self.payoff_avoid,
            "good": self.payoff_good,
            "discount": self.discount,
        }


def critical_probability_costs(costs: CostTable) -> float:
    """
    Critical probability from costs: relative cost of avoidance over relative
    cost of encounter.

    :param costs: validated cost table
    :return: (C_A - C^G) / (C^B - C^G), strictly inside (0, 1)
    """
    if not isinstance(costs, CostTable):
        raise ModelInputError("critical_probability_costs expects a CostTable")
    return (costs.cost_avoid - costs.cost_no_encounter) / (
        costs.cost_encounter - costs.cost_no_encounter
    )


def critical_probability_payoffs(payoffs: PayoffSpec) -> float:
    """
    Critical probability from payoffs.

    :param payoffs: validated payoff specification
    :return: (U^G - U_A) / (U^G - U^B), strictly inside (0, 1)
    """
    if not isinstance(payoffs, PayoffSpec):
        raise ModelInputError("critical_probability_payoffs expects a PayoffSpec")
    return (payoffs.payoff_good - payoffs.payoff_avoid) / (
        payoffs.payoff_good - payoffs.payoff_bad
    )


def costs_to_payoffs(costs: CostTable, discount: float = 0.0) -> PayoffSpec:
    """Payoffs are negated costs; the discount is supplied separately."""
    payoffs = PayoffSpec(
        payoff_bad=-costs.cost_encounter,
        payoff_avoid=-costs.cost_avoid,
        payoff_good=-costs.cost_no_encounter,
        discount=discount,
    )
    logger.debug("Costs %s mapped to payoffs %s", costs, payoffs)
    return payoffs


def expected_cost(prob_bad: float, costs: CostTable) -> float:
    """Expected cost of crossing: p C^B + (1 - p) C^G."""
    _check_probability("prob_bad", prob_bad)
    return prob_bad * costs.cost_encounter + (1.0 - prob_bad) * costs.cost_no_encounter


def expected_payoff(prob_bad: float, payoffs: PayoffSpec) -> float:
    """Expected one-period payoff of experimenting: p U^B + (1 - p) U^G."""
    _check_probability("prob_bad", prob_bad)
    return prob_bad * payoffs.payoff_bad + (1.0 - prob_bad) * payoffs.payoff_good


def emt_rule(prob_bad: float, payoffs: PayoffSpec) -> Action:
    """
    Optimal decision when the probability of the bad outcome is known.

    Ties (prob_bad == p_c) resolve to Avoid, the same prudence convention the
    learning strategy uses.

    :param prob_bad: known probability of the bad outcome
    :param payoffs: payoff specification
    :return: Action.AVOID iff prob_bad >= p_c
    """
    _check_probability("prob_bad", prob_bad)
    if prob_bad >= critical_probability_payoffs(payoffs):
        return Action.AVOID
    return Action.EXPERIMENT


def _exact_decimal(value: float) -> Fraction:
    # discounts come from decimal text; 0.95 should mean 19/20
    return Fraction(value).limit_denominator(10 ** 9)


def mean_lifetime(discount: float) -> float:
    """
    Mean of the geometric lifetime equivalent to a discount factor.

    :param discount: discount factor in [0, 1)
    :return: rho / (1 - rho); 0.95 gives 19 periods
    """
    if not 0.0 <= discount < 1.0:
        raise ModelInputError(f"discount must lie in [0, 1), got {discount!r}")
    rho = _exact_decimal(discount)
    return float(rho / (1 - rho))


def discount_for_lifetime(lifetime: float) -> float:
    """Inverse of :func:`mean_lifetime`: theta / (theta + 1)."""
    if not (math.isfinite(lifetime) and lifetime >= 0.0):
        raise ModelInputError(f"mean lifetime must be a nonnegative number, got {lifetime!r}")
    theta = _exact_decimal(lifetime)
    return float(theta / (theta + 1))
