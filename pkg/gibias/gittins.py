# pygibias/gibias/gittins.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

"""
Gittins index of a discounted beta-Bernoulli arm and the prudent index rule.

The index is computed by calibration: for a sure per-period payoff lam, the
optimal-stopping problem "retire forever on lam, or pull once more" is solved
by backward induction on the beta lattice, truncated at a horizon H whose
tail rho^H / (1 - rho) stays below half the tolerance; lam is then bisected
to the indifference point. Rewards are 1 on Good and 0 on Bad, so indices
live in [0, 1]; payoff units follow by the affine map U^B + (U^G - U^B) x.
"""

import logging
import math
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .belief import BeliefState
from .decision import Action, ModelInputError, PayoffSpec

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_HORIZON = 20000
DEFAULT_BATCH = 256

# decisions within this many tolerances of the threshold are flagged
BOUNDARY_FACTOR = 2.0


class IndexResourceError(Exception):
    """Raised when the requested accuracy needs a truncation horizon above the limit."""

    def __init__(self, message: str, achieved_bound: float, horizon: int):
        super().__init__(message)
        self.achieved_bound = achieved_bound
        self.horizon = horizon


def _validate(discount: float, tolerance: float) -> None:
    if not 0.0 <= discount < 1.0:
        raise ModelInputError(f"discount must lie in [0, 1), got {discount!r}")
    if not (math.isfinite(tolerance) and tolerance > 0.0):
        raise ModelInputError(f"tolerance must be positive, got {tolerance!r}")


def tail_bound(discount: float, horizon: int) -> float:
    """rho^H / (1 - rho): what truncating at H can change, in normalized units."""
    return discount ** horizon / (1.0 - discount)


def truncation_horizon(discount: float, tolerance: float,
                       max_horizon: int = DEFAULT_MAX_HORIZON) -> int:
    """
    Smallest H with rho^H / (1 - rho) < tolerance / 2.

    :raises IndexResourceError: if H would exceed max_horizon
    """
    _validate(discount, tolerance)
    if discount == 0.0:
        return 1
    target = tolerance / 2.0
    horizon = max(1, math.ceil(math.log(target * (1.0 - discount)) / math.log(discount)))
    while tail_bound(discount, horizon) >= target:
        horizon += 1
    if horizon > max_horizon:
        achieved = tail_bound(discount, max_horizon)
        raise IndexResourceError(
            f"tolerance {tolerance:g} at discount {discount:g} needs horizon {horizon} "
            f"> {max_horizon}; best achievable bound {achieved:.3g}",
            achieved_bound=achieved,
            horizon=horizon,
        )
    return horizon


def continuation_gap(n_bad: np.ndarray, n_good: np.ndarray, lam: np.ndarray,
                     discount: float, horizon: int) -> np.ndarray:
    """
    Value of pulling once then continuing optimally, minus the retirement value.

    Vectorized over states: row m is the lattice rooted at
    beta(n_bad[m], n_good[m]) with sure payoff lam[m]. Positive means pulling
    is strictly better, i.e. lam lies below the (truncated) index.
    """
    n_bad = np.asarray(n_bad, dtype=float)
    n_good = np.asarray(n_good, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), n_bad.shape)
    total = n_bad + n_good
    if discount == 0.0:
        return n_good / total - lam
    retire = lam / (1.0 - discount)
    k = np.arange(horizon + 1, dtype=float)
    # depth H: column k holds the state with k Goods among H draws
    mu = (n_good[:, None] + k[None, :]) / (total[:, None] + horizon)
    w = np.maximum(lam[:, None], mu) / (1.0 - discount)
    for depth in range(horizon - 1, -1, -1):
        mu = (n_good[:, None] + k[None, :depth + 1]) / (total[:, None] + depth)
        cont = mu + discount * (mu * w[:, 1:depth + 2] + (1.0 - mu) * w[:, :depth + 1])
        if depth == 0:
            return cont[:, 0] - retire
        w = np.maximum(retire[:, None], cont)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class IndexQuery:
    """A single index request."""
    belief: BeliefState
    discount: float
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        _validate(self.discount, self.tolerance)


@dataclass(frozen=True)
class Decision:
    """
    Outcome of the prudent index rule at one belief.

    ``normalized_index`` is None when the decision was settled without the
    full bisection (the belief was provably far from the threshold).
    """
    action: Action
    normalized_index: Optional[float]
    boundary_uncertain: bool


class GittinsIndex:
    """
    Calibration-based Gittins index calculator for one discount and tolerance.

    Instances memoize indices and decisions and are safe to share between
    threads.
    """

    def __init__(self, discount: float, tolerance: float = DEFAULT_TOLERANCE,
                 max_horizon: int = DEFAULT_MAX_HORIZON, batch_size: int = DEFAULT_BATCH):
        """
        :param discount: discount factor in [0, 1)
        :param tolerance: target accuracy of the normalized index
        :param max_horizon: largest truncation horizon allowed
        :param batch_size: states per vectorized backward induction
        """
        _validate(discount, tolerance)
        self.discount = float(discount)
        self.tolerance = float(tolerance)
        self.horizon = truncation_horizon(discount, tolerance, max_horizon)
        self.batch_size = max(1, int(batch_size))
        self.bisection_steps = max(1, math.ceil(math.log2(2.0 / tolerance)))
        self._indices: Dict[Tuple[float, float], float] = {}
        self._decisions: Dict[Tuple[float, float, float], Decision] = {}
        self._lock = threading.Lock()
        self.logger = logging.getLogger("pygibias.gittins")
        self.logger.debug(
            "Index calculator: discount=%g tolerance=%g horizon=%d bisection_steps=%d",
            self.discount, self.tolerance, self.horizon, self.bisection_steps,
        )

    @property
    def tail(self) -> float:
        return 0.0 if self.discount == 0.0 else tail_bound(self.discount, self.horizon)

    @property
    def certified_error(self) -> float:
        """Truncation tail plus half the final bisection bracket."""
        if self.discount == 0.0:
            return 0.0
        return self.tail + 0.5 ** (self.bisection_steps + 1)

    def gap(self, belief: BeliefState, lam: float) -> float:
        return float(continuation_gap(
            np.array([belief.n_bad]), np.array([belief.n_good]), np.array([lam]),
            self.discount, self.horizon,
        )[0])

    def _bisect(self, n_bad: np.ndarray, n_good: np.ndarray) -> np.ndarray:
        mean = n_good / (n_bad + n_good)
        if self.discount == 0.0:
            return mean
        # the good fraction is a lower bound on the index
        lo = mean.copy()
        hi = np.ones_like(mean)
        for _ in range(self.bisection_steps):
            mid = 0.5 * (lo + hi)
            up = continuation_gap(n_bad, n_good, mid, self.discount, self.horizon) > 0.0
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
        return 0.5 * (lo + hi)

    def normalized_indices(self, n_bad, n_good) -> np.ndarray:
        """
        Indices for many states at once.

        :param n_bad: array of beta parameters on Bad
        :param n_good: array of beta parameters on Good, same shape
        :return: array of normalized indices in [0, 1]
        """
        n_bad = np.atleast_1d(np.asarray(n_bad, dtype=float))
        n_good = np.atleast_1d(np.asarray(n_good, dtype=float))
        if n_bad.shape != n_good.shape:
            raise ModelInputError("n_bad and n_good must have the same shape")
        if np.any(n_bad <= 0) or np.any(n_good <= 0):
            raise ModelInputError("beta parameters must be positive")
        out = np.empty(n_bad.shape, dtype=float)
        missing = []
        with self._lock:
            for pos, key in enumerate(zip(n_bad.tolist(), n_good.tolist())):
                value = self._indices.get(key)
                if value is None:
                    missing.append(pos)
                else:
                    out[pos] = value
        if missing:
            todo = np.array(missing)
            self.logger.debug("Computing %d indices at horizon %d", len(todo), self.horizon)
            for start in range(0, len(todo), self.batch_size):
                chunk = todo[start:start + self.batch_size]
                out[chunk] = self._bisect(n_bad[chunk], n_good[chunk])
            with self._lock:
                for pos in missing:
                    self._indices[(float(n_bad[pos]), float(n_good[pos]))] = float(out[pos])
        return out

    def normalized_index(self, belief: BeliefState) -> float:
        return float(self.normalized_indices([belief.n_bad], [belief.n_good])[0])

    def index_payoff(self, belief: BeliefState, payoffs: PayoffSpec) -> float:
        """Index in payoff units: U^B + (U^G - U^B) * normalized index."""
        self._check_discount(payoffs)
        return payoffs.payoff_bad + payoffs.spread * self.normalized_index(belief)

    def _check_discount(self, payoffs: PayoffSpec) -> None:
        if payoffs.discount != self.discount:
            raise ModelInputError(
                f"payoff discount {payoffs.discount} does not match calculator discount {self.discount}"
            )

    def assess(self, belief: BeliefState, payoffs: PayoffSpec) -> Decision:
        """
        Prudent index rule with diagnostics.

        Experiment iff the normalized index exceeds 1 - p_c; ties and beliefs
        within the boundary band of the threshold go to Avoid.
        Beliefs whose good fraction, or whose continuation gap at
        threshold +/- 3 tolerances, settles the comparison skip the bisection;
        the action always equals what the bisected index would give.
        """
        self._check_discount(payoffs)
        threshold = payoffs.threshold
        key = (belief.n_bad, belief.n_good, threshold)
        with self._lock:
            cached = self._decisions.get(key)
        if cached is not None:
            return cached

        band = BOUNDARY_FACTOR * self.tolerance
        mean = belief.n_good / (belief.n_bad + belief.n_good)
        decision = None
        if self.discount > 0.0 and key[:2] not in self._indices:
            if mean > threshold + band:
                decision = Decision(Action.EXPERIMENT, None, False)
            else:
                probe = threshold + 1.5 * band
                if probe < 1.0 and self.gap(belief, probe) > 0.0:
                    decision = Decision(Action.EXPERIMENT, None, False)
                else:
                    probe = threshold - 1.5 * band
                    if probe > mean and self.gap(belief, probe) <= 0.0:
                        decision = Decision(Action.AVOID, None, False)
        if decision is None:
            index = self.normalized_index(belief)
            uncertain = abs(index - threshold) <= band
            # inside the band resolve to Avoid
            action = Action.AVOID if uncertain or index <= threshold else Action.EXPERIMENT
            if uncertain:
                self.logger.warning(
                    "Boundary-uncertain decision at %s: index %.9f vs threshold %.9f",
                    belief, index, threshold,
                )
            decision = Decision(action, index, uncertain)
        with self._lock:
            self._decisions[key] = decision
        return decision

    def decide(self, belief: BeliefState, payoffs: PayoffSpec) -> Action:
        return self.assess(belief, payoffs).action


_calculators: Dict[Tuple[float, float, int], GittinsIndex] = {}
_calculators_lock = threading.Lock()


def get_calculator(discount: float, tolerance: float = DEFAULT_TOLERANCE,
                   max_horizon: int = DEFAULT_MAX_HORIZON) -> GittinsIndex:
    """Shared calculator per (discount, tolerance, max_horizon)."""
    key = (float(discount), float(tolerance), int(max_horizon))
    with _calculators_lock:
        calc = _calculators.get(key)
        if calc is None:
            calc = GittinsIndex(discount, tolerance, max_horizon)
            _calculators[key] = calc
        return calc


def normalized_index(belief: BeliefState, discount: float,
                     tolerance: float = DEFAULT_TOLERANCE) -> float:
    """
    Gittins index of beta(n_bad, n_good) with reward 1 on Good, 0 on Bad.

    :param belief: current posterior
    :param discount: discount factor in [0, 1)
    :param tolerance: accuracy of the returned value
    :return: break-even sure payoff in [0, 1]
    :raises IndexResourceError: if the tolerance is out of reach
    """
    query = IndexQuery(belief, discount, tolerance)
    return get_calculator(query.discount, query.tolerance).normalized_index(query.belief)


def index_payoff(belief: BeliefState, payoffs: PayoffSpec,
                 tolerance: float = DEFAULT_TOLERANCE) -> float:
    return get_calculator(payoffs.discount, tolerance).index_payoff(belief, payoffs)


def decide(belief: BeliefState, payoffs: PayoffSpec,
           tolerance: float = DEFAULT_TOLERANCE) -> Action:
    """Avoid iff index_payoff <= U_A; Experiment otherwise."""
    return get_calculator(payoffs.discount, tolerance).decide(belief, payoffs)


@dataclass(frozen=True)
class IndexTable:
    """
    Normalized indices over {(n^B_0 + i, n^G_0 + j) : i + j <= depth}.

    ``values[i, j]`` is NaN outside the triangle.
    """
    n_bad0: float
    n_good0: float
    depth: int
    discount: float
    tolerance: float
    certified_error: float
    values: np.ndarray = field(repr=False)

    def value(self, i: int, j: int) -> float:
        if i < 0 or j < 0 or i + j > self.depth:
            raise KeyError((i, j))
        return float(self.values[i, j])

    def lookup(self, belief: BeliefState) -> float:
        """Stored index for a belief on this table's lattice."""
        i = belief.n_bad - self.n_bad0
        j = belief.n_good - self.n_good0
        ri, rj = int(round(i)), int(round(j))
        if not (math.isclose(i, ri, abs_tol=1e-9) and math.isclose(j, rj, abs_tol=1e-9)):
            raise KeyError(str(belief))
        return self.value(ri, rj)

    def __len__(self) -> int:
        return (self.depth + 1) * (self.depth + 2) // 2

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for total in range(self.depth + 1):
            for i in range(total, -1, -1):
                j = total - i
                n_bad = self.n_bad0 + i
                n_good = self.n_good0 + j
                rows.append({
                    "i": i,
                    "j": j,
                    "n_bad": n_bad,
                    "n_good": n_good,
                    "good_fraction": n_good / (n_bad + n_good),
                    "normalized_index": self.values[i, j],
                })
        return pd.DataFrame(rows, columns=["i", "j", "n_bad", "n_good", "good_fraction",
                                           "normalized_index"])

    def header(self) -> str:
        return (f"# discount={self.discount!r},depth={self.depth},tolerance={self.tolerance!r},"
                f"certified_error={self.certified_error!r},n_bad0={self.n_bad0!r},"
                f"n_good0={self.n_good0!r}")

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(self.header() + "\n")
            self.to_frame().to_csv(fh, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "IndexTable":
        path = Path(path)
        with path.open() as fh:
            first = fh.readline().strip()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing index table header")
        meta = dict(item.split("=", 1) for item in first[1:].strip().split(","))
        depth = int(meta["depth"])
        frame = pd.read_csv(path, skiprows=1)
        values = np.full((depth + 1, depth + 1), np.nan)
        values[frame["i"].to_numpy(), frame["j"].to_numpy()] = frame["normalized_index"].to_numpy()
        return cls(
            n_bad0=float(meta["n_bad0"]),
            n_good0=float(meta["n_good0"]),
            depth=depth,
            discount=float(meta["discount"]),
            tolerance=float(meta["tolerance"]),
            certified_error=float(meta["certified_error"]),
            values=values,
        )


def build_table(prior: BeliefState, payoffs: PayoffSpec, depth: int,
                tolerance: float = DEFAULT_TOLERANCE,
                calculator: Optional[GittinsIndex] = None) -> IndexTable:
    """
    Index table over every belief reachable from `prior` in at most `depth` experiments.

    :param prior: root belief
    :param payoffs: payoff specification; only its discount matters here
    :param depth: number of experiments covered, >= 0
    :param tolerance: index accuracy
    :param calculator: optional shared calculator (must match discount and tolerance)
    """
    if depth < 0:
        raise ModelInputError(f"table depth must be nonnegative, got {depth}")
    calc = calculator or get_calculator(payoffs.discount, tolerance)
    if calc.discount != payoffs.discount:
        raise ModelInputError("calculator discount does not match payoffs")
    ii, jj = np.meshgrid(np.arange(depth + 1), np.arange(depth + 1), indexing="ij")
    mask = ii + jj <= depth
    values = np.full((depth + 1, depth + 1), np.nan)
    values[mask] = calc.normalized_indices(prior.n_bad + ii[mask], prior.n_good + jj[mask])
    logging.getLogger("pygibias.gittins").info(
        "Built index table: %d states, depth %d, discount %g", int(mask.sum()), depth, payoffs.discount
    )
    return IndexTable(
        n_bad0=prior.n_bad,
        n_good0=prior.n_good,
        depth=depth,
        discount=payoffs.discount,
        tolerance=calc.tolerance,
        certified_error=calc.certified_error,
        values=values,
    )


@dataclass(frozen=True)
class SweepResult:
    """Property checks over an integer lattice of beliefs."""
    discount: float
    total: int
    tolerance: float
    states: int
    lower_bound_violations: int
    min_lower_bound_gap: float
    good_monotonicity_violations: int
    bad_update_increases: int
    max_bad_update_increase: float

    def as_record(self) -> dict:
        return asdict(self)


def lattice_sweep(discount: float, total: int, tolerance: float = DEFAULT_TOLERANCE,
                  calculator: Optional[GittinsIndex] = None) -> SweepResult:
    """
    Check the index on all integer states with n_bad + n_good <= total.

    Asserted properties: index >= good fraction - tolerance, with the
    continuation gap at the good fraction nonnegative; and a Good update never
    lowers the index by more than 2 tolerances. The effect of a Bad update is
    only measured.
    """
    if total < 2:
        raise ModelInputError("lattice sweep needs total >= 2")
    calc = calculator or get_calculator(discount, tolerance)
    states = [(a, b) for s in range(2, total + 2) for a in range(1, s) for b in [s - a]]
    a = np.array([s[0] for s in states], dtype=float)
    b = np.array([s[1] for s in states], dtype=float)
    values = dict(zip(states, calc.normalized_indices(a, b).tolist()))

    inside = [(x, y) for (x, y) in states if x + y <= total]
    lb_violations = 0
    good_violations = 0
    bad_increases = 0
    max_bad = -math.inf
    for (x, y) in inside:
        index = values[(x, y)]
        if index < y / (x + y) - tolerance:
            lb_violations += 1
        if values[(x, y + 1)] < index - 2.0 * tolerance:
            good_violations += 1
        delta = values[(x + 1, y)] - index
        if delta > 2.0 * tolerance:
            bad_increases += 1
        max_bad = max(max_bad, delta)
    ia = np.array([s[0] for s in inside], dtype=float)
    ib = np.array([s[1] for s in inside], dtype=float)
    gaps = continuation_gap(ia, ib, ib / (ia + ib), calc.discount, calc.horizon)
    return SweepResult(
        discount=calc.discount,
        total=total,
        tolerance=calc.tolerance,
        states=len(inside),
        lower_bound_violations=lb_violations,
        min_lower_bound_gap=float(gaps.min()),
        good_monotonicity_violations=good_violations,
        bad_update_increases=bad_increases,
        max_bad_update_increase=float(max_bad),
    )


__all__ = [
    "DEFAULT_TOLERANCE",
    "Decision",
    "GittinsIndex",
    "IndexQuery",
    "IndexResourceError",
    "IndexTable",
    "SweepResult",
    "build_table",
    "continuation_gap",
    "decide",
    "get_calculator",
    "index_payoff",
    "lattice_sweep",
    "normalized_index",
    "tail_bound",
    "truncation_horizon",
]
