"""Online TabularGreedy: one no-regret expert per (partition, color) cell.

Each round consumes a fixed block of uniforms from the state's generator,
laid out as ``[K*C expert draws][K colors][explore coin][k][c][x]``.
:class:`BanditBatch` runs R independent replicas of the bandit variant
with the same layout, so replica r seeded with s reproduces a
:class:`TGBandit` seeded with s exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ColorTable, FunctionOracle, GroundSet, InvalidInputError, ValueOracle
from .experts import ESTIMATED, FULL_INFO, Hedge, hedge_eta

log = logging.getLogger(__name__)

BANDIT = "bandit"


class UsageError(RuntimeError):
    pass


def default_explore_prob(K: int, C: int, n_items: int, horizon: int) -> float:
    """min(1, (K C |E| ln|E|)^(1/3) T^(-1/3))."""
    scale = K * C * n_items * math.log(max(n_items, 2))
    return min(1.0, (scale / horizon) ** (1.0 / 3.0))


@dataclass
class RoundSelection:
    """One round's plays. ``chosen[k][c - 1]`` is expert (k, c)'s item;
    ``cvec`` is 1-based; ``explore_meta`` is (k, c, x) on exploration rounds."""

    chosen: list
    cvec: tuple
    played: frozenset
    explored: bool = False
    explore_meta: tuple | None = None


def prefix_pairs(chosen: Sequence[Sequence[int]], k: int, c: int) -> set:
    """Cells preceding (k, c): every smaller color, plus color c at
    partitions before k. Returns (item, color) pairs."""
    pairs = {(row[cc - 1], cc) for row in chosen for cc in range(1, c)}
    pairs |= {(chosen[kk][c - 1], c) for kk in range(k)}
    return pairs


def prefix_table(chosen, k: int, c: int, C: int) -> ColorTable:
    return ColorTable(frozenset(prefix_pairs(chosen, k, c)), C)


def _explore_slot(chosen_slot, kk, cv, k, c, x):
    # item of partition kk in sample_cvec(prefix(k, c) + (x, c))
    if cv < c or (cv == c and kk < k):
        return chosen_slot
    if kk == k and cv == c:
        return x
    return None


class TGBandit:
    """State of the online algorithm (full-information or bandit feedback).

    In bandit mode every round explores with probability ``explore_prob``:
    a uniform cell (k, c) and item x are drawn, and the played set is
    sample_cvec(prefix(k, c) + (x, c)); the observed reward times the
    importance weight K*C*|P_k|/explore_prob is the estimate fed to
    expert (k, c). Exploitation rounds update nothing.
    """

    def __init__(self, gs: GroundSet, C: int, horizon: int, mode: str = FULL_INFO,
                 bound: float = 1.0, explore_prob: float | None = None, eta: float | None = None,
                 max_importance_weight: float | None = None, seed=None):
        if C < 1 or horizon < 1:
            raise InvalidInputError("C and horizon must be positive")
        if mode not in (FULL_INFO, BANDIT):
            raise InvalidInputError(f"unknown feedback mode {mode!r}")
        self.gs = gs
        self.C = C
        self.K = gs.K
        self.horizon = horizon
        self.mode = mode
        self.bound = float(bound)
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.n_uniforms = self.K * C + self.K + 4
        if mode == BANDIT:
            self.explore_prob = (
                default_explore_prob(self.K, C, gs.n_items, horizon) if explore_prob is None else explore_prob
            )
            if not 0.0 < self.explore_prob <= 1.0:
                raise InvalidInputError("explore_prob must lie in (0, 1]")
            self.importance_weight = [
                self._importance_weight(len(p), max_importance_weight) for p in gs.partitions
            ]
            self.etas = [
                self.explore_prob / (self.K * C * len(p)) if eta is None else eta for p in gs.partitions
            ]
            self.experts = [
                [
                    Hedge(len(p), eta=self.etas[k], bound=bound, mode=ESTIMATED,
                          estimate_cap=bound * self.importance_weight[k])
                    for _ in range(C)
                ]
                for k, p in enumerate(gs.partitions)
            ]
        else:
            self.explore_prob = 0.0
            self.etas = [hedge_eta(len(p), horizon) if eta is None else eta for p in gs.partitions]
            self.experts = [
                [Hedge(len(p), eta=self.etas[k], bound=bound) for _ in range(C)]
                for k, p in enumerate(gs.partitions)
            ]

    def _importance_weight(self, size, cap):
        w = self.K * self.C * size / self.explore_prob
        return w if cap is None else min(w, cap)

    # -- selection ---------------------------------------------------------

    def select_round(self, chosen=None) -> RoundSelection:
        """Draw this round's plays. ``chosen`` overrides the experts' picks
        (a K x C item grid), e.g. to freeze the round context in tests."""
        return self.round_from_uniforms(self.rng.random(self.n_uniforms), chosen)

    def round_from_uniforms(self, u: np.ndarray, chosen=None) -> RoundSelection:
        K, C, parts = self.K, self.C, self.gs.partitions
        if chosen is None:
            chosen = [
                [parts[k][self.experts[k][c].select_from_uniform(u[k * C + c])] for c in range(C)]
                for k in range(K)
            ]
        cvec = tuple(int(u[K * C + k] * C) + 1 for k in range(K))
        slots = [chosen[k][cvec[k] - 1] for k in range(K)]
        explored = self.mode == BANDIT and u[K * C + K] < self.explore_prob
        meta = None
        if explored:
            ke = int(u[K * C + K + 1] * K)
            ce = int(u[K * C + K + 2] * C) + 1
            xe = parts[ke][int(u[K * C + K + 3] * len(parts[ke]))]
            slots = [_explore_slot(slots[kk], kk, cvec[kk], ke, ce, xe) for kk in range(K)]
            meta = (ke, ce, xe)
        self.t += 1
        played = frozenset(x for x in slots if x is not None)
        return RoundSelection(chosen, cvec, played, explored, meta)

    # -- feedback ----------------------------------------------------------

    def _clamp(self, r: float) -> float:
        if r > self.bound or r < 0:
            log.warning("reward %.6g outside [0, %.6g]; clamping", r, self.bound)
            return min(max(r, 0.0), self.bound)
        return r

    def reward_vectors(self, sel: RoundSelection, f_t) -> dict:
        """Per-cell rewards F_t(prefix(k, c) + x) for every x in P_k, using
        the round's realized color vector."""
        if not isinstance(f_t, ValueOracle):
            f_t = FunctionOracle(f_t)
        out = {}
        for k, part in enumerate(self.gs.partitions):
            for c in range(1, self.C + 1):
                base = frozenset(
                    x for x, cc in prefix_pairs(sel.chosen, k, c)
                    if cc == sel.cvec[int(self.gs.partition_of[x])]
                )
                if sel.cvec[k] == c:
                    vals = np.asarray(f_t.values_with([base], part), dtype=float)[0]
                else:
                    # x is not sampled under this coloring: every action earns F_t(prefix)
                    vals = np.full(len(part), float(f_t(base)))
                if (vals > self.bound).any() or (vals < 0).any():
                    log.warning("rewards outside [0, %.6g]; clamping", self.bound)
                    vals = np.clip(vals, 0.0, self.bound)
                out[(k, c)] = vals
        return out

    def feedback_full(self, sel: RoundSelection, f_t) -> None:
        if self.mode != FULL_INFO:
            raise UsageError("full-information feedback on a bandit-mode state")
        for (k, c), vals in self.reward_vectors(sel, f_t).items():
            self.experts[k][c - 1].update_full(vals)

    def estimate(self, sel: RoundSelection, observed_reward: float) -> float:
        k = sel.explore_meta[0]
        return self._clamp(float(observed_reward)) * self.importance_weight[k]

    def feedback_bandit(self, sel: RoundSelection, observed_reward: float) -> None:
        if self.mode != BANDIT:
            raise UsageError("bandit feedback on a full-information state")
        if not sel.explored:
            return
        if sel.explore_meta is None:
            raise UsageError("exploration round without exploration metadata")
        k, c, x = sel.explore_meta
        action = self.gs.partitions[k].index(x)
        self.experts[k][c - 1].update_estimate(action, self.estimate(sel, observed_reward))

    def expert_regrets(self) -> np.ndarray:
        return np.array([[e.regret() for e in row] for row in self.experts])


def tg_select_round(state: TGBandit, chosen=None) -> RoundSelection:
    return state.select_round(chosen)


def tg_feedback_full(state: TGBandit, sel: RoundSelection, f_t) -> TGBandit:
    state.feedback_full(sel, f_t)
    return state


def tg_feedback_bandit(state: TGBandit, sel: RoundSelection, observed_reward: float) -> TGBandit:
    state.feedback_bandit(sel, observed_reward)
    return state


def run_full_info(state: TGBandit, oracles, T: int) -> np.ndarray:
    """Play T rounds; ``oracles`` is one ValueOracle (stationary) or a
    callable ``t -> ValueOracle``. Returns the per-round rewards f_t(G_t)."""
    rewards = np.empty(T)
    for t in range(T):
        f_t = oracles(t) if callable(oracles) and not isinstance(oracles, ValueOracle) else oracles
        sel = state.select_round()
        rewards[t] = f_t(sel.played)
        state.feedback_full(sel, f_t)
    return rewards


def run_bandit(state: TGBandit, reward_fn: Callable, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Play T bandit rounds; ``reward_fn(played, rng)`` draws the realized
    reward using the state's own generator. Returns rewards and explore flags."""
    rewards = np.empty(T)
    explored = np.zeros(T, dtype=bool)
    for t in range(T):
        sel = state.select_round()
        rewards[t] = reward_fn(sel.played, state.rng)
        explored[t] = sel.explored
        state.feedback_bandit(sel, rewards[t])
    return rewards, explored


class BanditBatch:
    """R independent bandit-mode replicas advanced in lockstep.

    ``reward_fn(slots, u)`` receives an (R, K) array of within-partition
    item indices (-1 for empty) and (R, n_env_uniforms) uniforms, and
    returns R rewards. Each replica owns its generator; uniforms are
    drawn in blocks of ``block`` rounds.
    """

    def __init__(self, gs: GroundSet, C: int, horizon: int, seeds: Sequence, n_env_uniforms: int = 0,
                 bound: float = 1.0, explore_prob: float | None = None, eta: float | None = None,
                 max_importance_weight: float | None = None, block: int = 1024):
        # a throwaway scalar state resolves the defaults exactly as TGBandit does
        ref = TGBandit(gs, C, horizon, BANDIT, bound, explore_prob, eta, max_importance_weight)
        self.gs, self.C, self.K = gs, C, gs.K
        self.R = len(seeds)
        self.bound = float(bound)
        self.explore_prob = ref.explore_prob
        self.sizes = np.array(gs.sizes)
        self.eta = np.array(ref.etas, dtype=float)
        self.iw = np.array(ref.importance_weight, dtype=float)
        self.n_tg = ref.n_uniforms
        self.n_env = n_env_uniforms
        self.rngs = [np.random.default_rng(s) for s in seeds]
        self.block = block
        self._buf = np.empty((0, self.R, self.n_tg + self.n_env))
        self._pos = 0
        self.logw = np.full((self.R, self.K, C, self.sizes.max()), -np.inf)
        for k, n in enumerate(self.sizes):
            self.logw[:, k, :, :n] = 0.0
        self._cdf = self._cdf_of(self.logw)
        self.t = 0

    @staticmethod
    def _cdf_of(logw):
        # same arithmetic as experts.sample_index, cached per cell
        return np.cumsum(np.exp(logw - logw.max(axis=-1, keepdims=True)), axis=-1)

    def _uniforms(self) -> np.ndarray:
        if self._pos == len(self._buf):
            width = self.n_tg + self.n_env
            self._buf = np.stack([g.random((self.block, width)) for g in self.rngs], axis=1)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def step(self, reward_fn) -> tuple[np.ndarray, np.ndarray]:
        K, C, R = self.K, self.C, self.R
        u = self._uniforms()
        o = K * C
        cdf = self._cdf
        idx = (cdf < u[:, :o].reshape(R, K, C)[..., None] * cdf[..., -1:]).sum(axis=-1)
        cv = (u[:, o:o + K] * C).astype(np.int64)
        rows = np.arange(R)[:, None]
        exploit = idx[rows, np.arange(K)[None, :], cv]
        explored = u[:, o + K] < self.explore_prob
        ke = (u[:, o + K + 1] * K).astype(np.int64)
        ce = (u[:, o + K + 2] * C).astype(np.int64)
        xe = (u[:, o + K + 3] * self.sizes[ke]).astype(np.int64)
        kk = np.arange(K)[None, :]
        before = (cv < ce[:, None]) | ((cv == ce[:, None]) & (kk < ke[:, None]))
        at_cell = (kk == ke[:, None]) & (cv == ce[:, None])
        explore_slots = np.where(before, exploit, np.where(at_cell, xe[:, None], -1))
        slots = np.where(explored[:, None], explore_slots, exploit)
        rewards = np.asarray(reward_fn(slots, u[:, self.n_tg:]), dtype=float)
        if (rewards > self.bound).any() or (rewards < 0).any():
            log.warning("rewards outside [0, %.6g]; clamping", self.bound)
            rewards = np.clip(rewards, 0.0, self.bound)
        upd = np.flatnonzero(explored & (rewards != 0))
        if upd.size:
            k = ke[upd]
            est = rewards[upd] * self.iw[k]
            self.logw[upd, k, ce[upd], xe[upd]] += self.eta[k] * est / self.bound
            self._cdf[upd, k, ce[upd]] = self._cdf_of(self.logw[upd, k, ce[upd]])
        self.t += 1
        return rewards, explored

    def probabilities(self) -> np.ndarray:
        p = np.exp(self.logw - self.logw.max(axis=-1, keepdims=True))
        return p / p.sum(axis=-1, keepdims=True)
