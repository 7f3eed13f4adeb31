import math

import numpy as np
import pytest

from subassign.core import EnumerationTooLargeError, FunctionOracle, GroundSet, InvalidInputError
from subassign.environments import AdClickOracle, alice_bob_model, random_coverage
from subassign.oracle import brute_force_opt, count_assignments, regret_curve

from . import oracles


def test_alice_bob_opt():
    m = alice_bob_model(0.1)
    res = brute_force_opt(AdClickOracle(m), m.ground_set())
    assert res.best == {0, 3} and res.value == pytest.approx(1.0, abs=1e-12) and res.enumerated == 4


def test_single_item():
    gs = GroundSet([[0]])
    res = brute_force_opt(FunctionOracle(lambda s: 2.5 * len(s)), gs)
    assert res.best == {0} and res.value == 2.5


def test_ties_lexicographic():
    gs = GroundSet([[0, 1], [2, 3]])
    res = brute_force_opt(FunctionOracle(lambda s: 1.0), gs)
    assert res.best == {0, 2}


def test_empty_slots_and_cap():
    gs = GroundSet([[0, 1], [2]])
    f = FunctionOracle(lambda s: -float(len(s)))
    res = brute_force_opt(f, gs, allow_empty_slots=True)
    assert res.best == frozenset() and res.enumerated == 6
    assert count_assignments(gs, True) == 6
    with pytest.raises(EnumerationTooLargeError):
        brute_force_opt(f, GroundSet.from_sizes([10] * 7), cap=10**6)


def test_opt_dominates_random_assignments():
    rng = np.random.default_rng(0)
    for _ in range(10):
        gs = GroundSet.from_sizes([3, 4, 2])
        f = random_coverage(gs, 7, rng)
        res = brute_force_opt(f, gs)
        assert res.value == pytest.approx(oracles.opt_value(f, gs.partitions))
        assert res.value == f(res.best) and gs.is_feasible(res.best)
        for _ in range(1000):
            a = frozenset(int(rng.choice(p)) for p in gs.partitions)
            assert f(a) <= res.value + 1e-12


def test_regret_curve():
    T, opt = 10, 5.0
    factor = 1 - 1 / math.e
    flat = regret_curve(np.full(T, factor * opt / T), opt)
    np.testing.assert_allclose(flat, 0.0, atol=1e-12)
    zero = regret_curve(np.zeros(T), opt)
    np.testing.assert_allclose(zero, factor * opt * np.arange(1, T + 1) / T)
    with pytest.raises(InvalidInputError):
        regret_curve(np.zeros(3), 1.0, factor=0.0)
