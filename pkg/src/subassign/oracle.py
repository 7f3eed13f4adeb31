"""Exhaustive reference solutions used to check every approximation claim."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import ENUMERATION_CAP, TOL, EnumerationTooLargeError, GroundSet, InvalidInputError, ValueOracle


@dataclass
class OptResult:
    best: frozenset
    value: float
    enumerated: int


def count_assignments(gs: GroundSet, allow_empty_slots: bool = False) -> int:
    return math.prod(len(p) + allow_empty_slots for p in gs.partitions)


def brute_force_opt(f: ValueOracle, gs: GroundSet, allow_empty_slots: bool = False,
                    cap: int = ENUMERATION_CAP) -> OptResult:
    """Best feasible assignment by full enumeration.

    Slots are enumerated odometer-style (last partition fastest). Values
    within TOL of the maximum count as ties, broken toward the
    lexicographically smallest sorted item-id tuple.
    """
    total = count_assignments(gs, allow_empty_slots)
    if total > cap:
        raise EnumerationTooLargeError(f"{total} feasible assignments exceed cap {cap}")
    options = [list(p) + ([None] if allow_empty_slots else []) for p in gs.partitions]
    best_val = -math.inf
    best: list[tuple] = []
    for combo in itertools.product(*options):
        items = tuple(sorted(x for x in combo if x is not None))
        v = f(frozenset(items))
        if v > best_val + TOL:
            # drop old ties that no longer sit within TOL of the new best
            best = [(bv, b) for bv, b in best if bv >= v - TOL] + [(v, items)]
            best_val = v
        elif v >= best_val - TOL:
            best.append((v, items))
            best_val = max(best_val, v)
    best = [(bv, b) for bv, b in best if bv >= best_val - TOL]
    value, items = min(best, key=lambda t: t[1])
    return OptResult(frozenset(items), float(value), total)


def regret_curve(rewards, f_sum_opt: float, factor: float = 1.0 - 1.0 / math.e,
                 opt_prefix=None) -> np.ndarray:
    """Per-round cumulative ``factor * OPT_prefix(t) - sum_{s<=t} reward_s``.

    ``f_sum_opt`` is the static optimum of the summed utilities over all
    T rounds; for a stationary run its prefix is taken as f_sum_opt * t / T.
    Pass ``opt_prefix`` (length T) to supply prefix optima directly.
    """
    if not 0.0 < factor <= 1.0:
        raise InvalidInputError("factor must lie in (0, 1]")
    rewards = np.asarray(rewards, dtype=float)
    T = rewards.size
    if opt_prefix is None:
        opt_prefix = f_sum_opt * np.arange(1, T + 1) / T
    return factor * np.asarray(opt_prefix, dtype=float) - np.cumsum(rewards)
