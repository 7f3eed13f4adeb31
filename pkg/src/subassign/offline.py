"""Offline assignment algorithms: locally greedy and TabularGreedy."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    ENUMERATION_CAP,
    TOL,
    ColorTable,
    EnumerationTooLargeError,
    GroundSet,
    InvalidInputError,
    ValueOracle,
    estimate_F,
    exact_F,
    sample_colored,
)

log = logging.getLogger(__name__)


@dataclass
class GreedyConfig:
    """Settings shared by the greedy algorithms.

    ``position_order`` is a permutation of ``range(K)`` (default
    ascending). ``eval_mode`` is "exact" or "monte_carlo"; in Monte-Carlo
    mode every candidate at a greedy step is scored on the same
    ``n_samples`` color vectors. ``null_items`` lets a position stay
    empty when no item strictly improves the value.
    """

    position_order: Sequence[int] | None = None
    eval_mode: str = "exact"
    n_samples: int = 100
    seed: int | None = None
    null_items: bool = False
    cap: int = ENUMERATION_CAP

    def __post_init__(self):
        if self.eval_mode not in ("exact", "monte_carlo"):
            raise InvalidInputError(f"unknown eval_mode {self.eval_mode!r}")
        if self.eval_mode == "monte_carlo" and self.n_samples < 1:
            raise InvalidInputError("n_samples must be at least 1")

    def order(self, K: int) -> list[int]:
        if self.position_order is None:
            return list(range(K))
        order = [int(k) for k in self.position_order]
        if sorted(order) != list(range(K)):
            raise InvalidInputError(f"position_order {order} is not a permutation of range({K})")
        return order


@dataclass
class TabularResult:
    table: ColorTable
    grid: list  # grid[k][c - 1] = item chosen for partition k, color c
    sampled_cvec: tuple
    assignment: frozenset
    estimated_value: float
    scores: list = field(default_factory=list, repr=False)


def _pick(scores: np.ndarray, candidates: Sequence[int]) -> int:
    """Index of the lowest item id whose score is within TOL of the best."""
    best = scores.max()
    tied = [j for j in range(len(candidates)) if scores[j] >= best - TOL]
    return min(tied, key=lambda j: candidates[j])


def locally_greedy(f: ValueOracle, gs: GroundSet, cfg: GreedyConfig | None = None) -> frozenset:
    """Fill positions one by one with the item of largest f(current + s)."""
    cfg = cfg or GreedyConfig()
    current: frozenset = frozenset()
    for k in cfg.order(gs.K):
        cands = gs.partitions[k]
        vals = np.asarray(f.values_with([current], cands))[0]
        j = _pick(vals, cands)
        if cfg.null_items and f(current) > vals[j] + TOL:
            continue
        current = current | {cands[j]}
    return current


def beta(K: int, C: int) -> float:
    """Approximation constant 1 - (1 - 1/C)^C - K(K-1)/(2C); may be negative."""
    if K < 1 or C < 1:
        raise InvalidInputError("K and C must be positive")
    return 1.0 - (1.0 - 1.0 / C) ** C - K * (K - 1) / (2.0 * C)


def _step_colorings(K: int, C: int, k: int, c: int, cfg: GreedyConfig, rng):
    """Color vectors (1-based) with cvec[k] = c plus their weights.

    Only these colorings see the candidate at cell (k, c); on all others
    adding the candidate changes nothing, so they cannot move the argmax.
    """
    if cfg.eval_mode == "exact":
        others = itertools.product(range(1, C + 1), repeat=K - 1)
        cvecs = [ov[:k] + (c,) + ov[k:] for ov in others]
        return cvecs, np.full(len(cvecs), 1.0 / C**K)
    draws = rng.integers(1, C + 1, size=(cfg.n_samples, K))
    draws[:, k] = c
    uniq, counts = np.unique(draws, axis=0, return_counts=True)
    return [tuple(int(v) for v in row) for row in uniq], counts / (C * cfg.n_samples)


def tabular_greedy(f: ValueOracle, gs: GroundSet, C: int, cfg: GreedyConfig | None = None) -> TabularResult:
    """Greedy over the K x C table of (item, color) cells, then sample.

    Cells are filled color by color, position by position; each cell takes
    the item maximizing the table value with that cell added, i.e. the
    mean of f over uniform colorings.
    In Monte-Carlo mode the colorings with cvec[k] = c are sampled
    directly (the others do not depend on the candidate), scaled by 1/C.
    """
    cfg = cfg or GreedyConfig()
    if C < 1:
        raise InvalidInputError("C must be positive")
    K = gs.K
    if cfg.eval_mode == "exact" and C**K > cfg.cap:
        raise EnumerationTooLargeError(
            f"exact mode needs {C}**{K} colorings (> cap {cfg.cap}); use eval_mode='monte_carlo'"
        )
    greedy_ss, sample_ss, estimate_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    rng = np.random.default_rng(greedy_ss)

    cells: dict[tuple[int, int], int] = {}
    grid = [[None] * C for _ in range(K)]
    scores = []
    for c in range(1, C + 1):
        for k in cfg.order(K):
            cvecs, weights = _step_colorings(K, C, k, c, cfg, rng)
            bases = [
                frozenset(cells[(kk, cv[kk])] for kk in range(K) if (kk, cv[kk]) in cells)
                for cv in cvecs
            ]
            cands = gs.partitions[k]
            vals = np.asarray(f.values_with(bases, cands))
            step_scores = weights @ vals
            j = _pick(step_scores, cands)
            cells[(k, c)] = cands[j]
            grid[k][c - 1] = cands[j]
            scores.append(step_scores)

    table = ColorTable(frozenset((x, c) for (k, c), x in cells.items()), C)
    cvec = tuple(int(v) for v in np.random.default_rng(sample_ss).integers(1, C + 1, size=K))
    assignment = sample_colored(table, cvec, gs)
    if cfg.eval_mode == "exact":
        value = exact_F(f, table, gs, cap=cfg.cap)
    else:
        value = estimate_F(f, table, gs, cfg.n_samples, seed=estimate_ss)
    return TabularResult(table, grid, cvec, assignment, value, scores)
