# tests/test_belief.py
"""
Tests for beta posterior updates, prior elicitation and the estimate band.
"""

import math
import unittest

import numpy as np

from gibias import (
    BeliefState,
    ModelInputError,
    Observation,
    Outcome,
    elicit_prior,
    estimate_band,
    init_prior,
    parse_run,
    point_estimate,
    update,
    update_many,
)


class TestBeliefState(unittest.TestCase):
    def setUp(self):
        self.prior = init_prior(1, 1)

    def test_prior(self):
        """Test a fresh prior carries no observations."""
        self.assertEqual(self.prior.n_bad, 1.0)
        self.assertEqual(self.prior.observations, 0)
        self.assertEqual(point_estimate(self.prior), 0.5)
        self.assertEqual(str(self.prior), "beta(1, 1)")

    def test_nonpositive_prior_rejected(self):
        with self.assertRaises(ModelInputError):
            init_prior(0, 1)
        with self.assertRaises(ModelInputError):
            init_prior(1, -2)
        with self.assertRaises(ModelInputError):
            init_prior("a", 1)
        with self.assertRaises(ModelInputError):
            BeliefState(1.0, 1.0, count_bad=1)

    def test_update(self):
        """Test Bad and Good updates add one pseudo-count each."""
        bad = update(self.prior, Observation.BAD)
        self.assertEqual((bad.n_bad, bad.n_good), (2.0, 1.0))
        good = update(bad, Observation.GOOD)
        self.assertEqual((good.n_bad, good.n_good), (2.0, 2.0))
        self.assertEqual((good.count_bad, good.count_good), (1, 1))

    def test_blank_observation(self):
        """Test that avoiding leaves the posterior unchanged."""
        self.assertIs(update(self.prior, Observation.NONE), self.prior)

    def test_prior_recoverable(self):
        """Test n^B_0 = n_bad - N^B after many updates."""
        obs = [Observation.BAD, Observation.GOOD, Observation.NONE, Observation.GOOD]
        state = update_many(init_prior(0.5, 2.0), obs)
        self.assertEqual(state.prior, (0.5, 2.0))
        self.assertEqual(state.observations, 3)
        self.assertAlmostEqual(state.p_hat, 1.5 / 5.5)

    def test_record(self):
        state = update_many(self.prior, [Observation.BAD] * 3)
        self.assertEqual(BeliefState.from_record(state.as_record()), state)

    def test_observation_codes(self):
        self.assertIs(Observation.from_outcome(Outcome.BAD), Observation.BAD)
        self.assertEqual(Observation.NONE.code, "-")
        self.assertEqual(Outcome.GOOD.code, "G")

    def test_update_order_commutes(self):
        """Test any ordering of the same Bads and Goods reaches the same posterior."""
        seq = [Observation.BAD, Observation.GOOD, Observation.GOOD, Observation.BAD, Observation.GOOD]
        forward = update_many(init_prior(0.7, 1.3), seq)
        backward = update_many(init_prior(0.7, 1.3), reversed(seq))
        grouped = update_many(init_prior(0.7, 1.3), sorted(seq, key=lambda o: o.value))
        self.assertEqual(forward, backward)
        self.assertEqual(forward, grouped)

    def test_good_updates_lower_estimate(self):
        """Test p_hat after k Good updates from beta(a, b) is a / (a + b + k)."""
        for a, b in [(1.0, 1.0), (2.5, 0.5), (7.0, 3.0)]:
            for k in (1, 5, 40):
                state = update_many(init_prior(a, b), [Observation.GOOD] * k)
                self.assertAlmostEqual(point_estimate(state), a / (a + b + k), places=12)

    def test_estimate_converges(self):
        """Test p_hat after T draws lies within the 3-sigma band of the true probability."""
        rng = np.random.default_rng(2024)
        for p_bad in (0.05, 0.3, 0.8):
            draws = rng.random(5000) < p_bad
            obs = [Observation.BAD if d else Observation.GOOD for d in draws]
            state = update_many(init_prior(1, 1), obs)
            band = estimate_band(p_bad, (1, 1), len(obs))
            self.assertLessEqual(abs(point_estimate(state) - p_bad), band, msg=f"p={p_bad}")


class TestElicitation(unittest.TestCase):
    def test_goods_then_bad(self):
        """Test n Goods then one Bad give (1, n)."""
        self.assertEqual(elicit_prior("GGGB"), (1, 3))
        self.assertEqual(elicit_prior("GB"), (1, 1))
        self.assertEqual(elicit_prior([Outcome.GOOD, Outcome.GOOD, Outcome.BAD]), (1, 2))

    def test_bads_then_good(self):
        """Test n Bads then one Good give (n, 1)."""
        self.assertEqual(elicit_prior("BBG"), (2, 1))
        self.assertEqual(elicit_prior(["b", "b", "b", "b", "g"]), (4, 1))

    def test_no_switch_rejected(self):
        with self.assertRaises(ModelInputError):
            elicit_prior("GGGG")

    def test_malformed_rejected(self):
        with self.assertRaises(ModelInputError):
            elicit_prior("GBGB")
        with self.assertRaises(ModelInputError):
            elicit_prior("G")
        with self.assertRaises(ModelInputError):
            parse_run("GXB")

    def test_word_symbols(self):
        """Test whole-word symbols are read case-insensitively."""
        self.assertEqual(parse_run(["Good", "good", "BAD", " b "]),
                         (Outcome.GOOD, Outcome.GOOD, Outcome.BAD, Outcome.BAD))
        self.assertEqual(elicit_prior(["Good", "Bad"]), (1, 1))

    def test_unknown_words_rejected(self):
        """Test symbols that merely start with B or G are rejected."""
        with self.assertRaises(ModelInputError):
            parse_run(["Gorilla", "Banana"])
        with self.assertRaises(ModelInputError):
            elicit_prior(["good", "bogus"])
        with self.assertRaises(ModelInputError):
            parse_run(["Gx"])


class TestEstimateBand(unittest.TestCase):
    def test_band(self):
        """Test 3 binomial sigmas plus the prior pull."""
        expected = 3 * math.sqrt(0.05 * 0.95 / 1000) + abs(1 - 0.05 * 2) / 1002
        self.assertAlmostEqual(estimate_band(0.05, (1, 1), 1000), expected, places=12)

    def test_degenerate_probability(self):
        """Test that p = 0 leaves only the prior pull."""
        self.assertAlmostEqual(estimate_band(0.0, (1, 1), 98), 0.01, places=12)

    def test_no_observations(self):
        with self.assertRaises(ModelInputError):
            estimate_band(0.1, (1, 1), 0)


if __name__ == '__main__':
    unittest.main()
