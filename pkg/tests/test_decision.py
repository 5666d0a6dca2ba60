# tests/test_decision.py
"""
Tests for the known-risk decision layer: orderings, critical probability, EMT rule.
"""

import unittest

from gibias import (
    Action,
    CostTable,
    ModelInputError,
    PayoffSpec,
    costs_to_payoffs,
    critical_probability_costs,
    critical_probability_payoffs,
    discount_for_lifetime,
    emt_rule,
    expected_cost,
    expected_payoff,
    mean_lifetime,
)


class TestCriticalProbability(unittest.TestCase):
    def setUp(self):
        """Costs C^G=1, C_A=2, C^B=5."""
        self.costs = CostTable(cost_avoid=2.0, cost_encounter=5.0, cost_no_encounter=1.0)

    def test_from_costs(self):
        """Test (C_A - C^G) / (C^B - C^G) on a hand-computed table."""
        self.assertAlmostEqual(critical_probability_costs(self.costs), 0.25, places=12)
        self.assertEqual(f"{critical_probability_costs(self.costs):.6f}", "0.250000")

    def test_from_payoffs(self):
        """Test (U^G - U_A) / (U^G - U^B)."""
        self.assertAlmostEqual(critical_probability_payoffs(PayoffSpec(0.0, 0.75, 1.0)), 0.25, places=12)

    def test_conversion_preserves_critical_probability(self):
        """Test that negating costs leaves p_c unchanged."""
        payoffs = costs_to_payoffs(self.costs, discount=0.9)
        self.assertAlmostEqual(payoffs.critical_probability, critical_probability_costs(self.costs))
        self.assertEqual(payoffs.discount, 0.9)
        self.assertEqual(payoffs.payoff_bad, -5.0)

    def test_threshold(self):
        """Test the normalized index threshold 1 - p_c."""
        payoffs = PayoffSpec(-1.0, -0.4, 0.0)
        self.assertAlmostEqual(payoffs.critical_probability, 0.4)
        self.assertEqual(payoffs.threshold, 1.0 - payoffs.critical_probability)

    def test_bad_ordering_rejected(self):
        """Test that orderings other than U^B < U_A < U^G are rejected."""
        with self.assertRaises(ModelInputError):
            PayoffSpec(0.0, 1.0, 1.0)
        with self.assertRaises(ModelInputError):
            PayoffSpec(1.0, 0.5, 0.0)
        with self.assertRaises(ModelInputError):
            CostTable(cost_avoid=6.0, cost_encounter=5.0, cost_no_encounter=1.0)
        with self.assertRaises(ModelInputError):
            PayoffSpec(0.0, float("nan"), 1.0)

    def test_discount_range(self):
        """Test that the discount must lie in [0, 1)."""
        PayoffSpec(0.0, 0.5, 1.0, 0.0)
        with self.assertRaises(ModelInputError):
            PayoffSpec(0.0, 0.5, 1.0, 1.0)
        with self.assertRaises(ModelInputError):
            PayoffSpec(0.0, 0.5, 1.0, -0.1)

    def test_wrong_type_rejected(self):
        with self.assertRaises(ModelInputError):
            critical_probability_payoffs(self.costs)


class TestEmtRule(unittest.TestCase):
    def test_tie_goes_to_avoid(self):
        """Test Avoid iff p >= p_c, with p == p_c resolving to Avoid."""
        payoffs = PayoffSpec(0.0, 0.5, 1.0)
        self.assertIs(emt_rule(0.5, payoffs), Action.AVOID)
        self.assertIs(emt_rule(0.49, payoffs), Action.EXPERIMENT)
        self.assertIs(emt_rule(1.0, payoffs), Action.AVOID)
        self.assertIs(emt_rule(0.0, payoffs), Action.EXPERIMENT)

    def test_probability_range(self):
        with self.assertRaises(ModelInputError):
            emt_rule(1.2, PayoffSpec(0.0, 0.5, 1.0))

    def test_expected_cost_equivalence(self):
        """Test Avoid iff the expected cost of crossing is at least C_A."""
        costs = CostTable(cost_avoid=2.0, cost_encounter=5.0, cost_no_encounter=1.0)
        payoffs = costs_to_payoffs(costs)
        for k in range(21):
            p = k / 20
            avoid = expected_cost(p, costs) >= costs.cost_avoid
            self.assertEqual(emt_rule(p, payoffs) is Action.AVOID, avoid, msg=f"p={p}")

    def test_expected_payoff(self):
        payoffs = PayoffSpec(0.0, 0.5, 1.0)
        self.assertAlmostEqual(expected_payoff(0.2, payoffs), 0.8)

    def test_instant_payoff(self):
        """Test U(v, X) for both actions and states."""
        payoffs = PayoffSpec(-3.0, -1.0, 2.0)
        self.assertEqual(payoffs.payoff(Action.AVOID, True), -1.0)
        self.assertEqual(payoffs.payoff(Action.AVOID, False), -1.0)
        self.assertEqual(payoffs.payoff(Action.EXPERIMENT, True), -3.0)
        self.assertEqual(payoffs.payoff(Action.EXPERIMENT, False), 2.0)
        self.assertEqual(Action.EXPERIMENT.code, "E")


class TestLifetime(unittest.TestCase):
    def test_mean_lifetime_exact(self):
        """Test that a discount of 0.95 means exactly 19 periods."""
        self.assertEqual(mean_lifetime(0.95), 19.0)
        self.assertEqual(mean_lifetime(0.0), 0.0)
        self.assertEqual(mean_lifetime(0.5), 1.0)

    def test_inverse(self):
        self.assertEqual(discount_for_lifetime(19.0), 0.95)
        self.assertEqual(discount_for_lifetime(0.0), 0.0)

    def test_invalid(self):
        with self.assertRaises(ModelInputError):
            mean_lifetime(1.0)
        with self.assertRaises(ModelInputError):
            discount_for_lifetime(-1.0)


if __name__ == '__main__':
    unittest.main()
