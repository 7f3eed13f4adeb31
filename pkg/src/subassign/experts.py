"""No-regret experts: Hedge (randomized weighted majority) with full
information, and an importance-weighted variant fed bandit estimates."""

from __future__ import annotations

import math

import numpy as np

from .core import TOL, InvalidInputError

FULL_INFO = "full_info"
ESTIMATED = "estimated"


def hedge_eta(n: int, horizon: int) -> float:
    """Learning rate sqrt(8 ln n / T), which gives regret <= B sqrt(T ln n / 2)."""
    if horizon < 1:
        raise InvalidInputError("horizon must be positive")
    return math.sqrt(8.0 * math.log(n) / horizon) if n > 1 else 0.0


def hedge_regret_bound(n: int, horizon: int, bound: float = 1.0) -> float:
    return bound * math.sqrt(horizon * math.log(n) / 2.0)


def sample_index(logw: np.ndarray, u) -> np.ndarray:
    """Inverse-CDF draw from softmax(logw) along the last axis.

    Works on any leading batch shape; ``u`` holds one uniform per row.
    Entries of -inf (padding) are never drawn.
    """
    p = np.exp(logw - logw.max(axis=-1, keepdims=True))
    cdf = np.cumsum(p, axis=-1)
    return (cdf < np.asarray(u)[..., None] * cdf[..., -1:]).sum(axis=-1)


class Hedge:
    """Multiplicative weights over ``n`` actions with rewards in [0, bound].

    Weights are stored as logs. Full-information updates multiply every
    weight by exp(eta * r_i / bound); estimated updates touch one action
    with an importance-weighted reward estimate, capped at ``estimate_cap``.
    """

    def __init__(self, n: int, eta: float | None = None, horizon: int | None = None,
                 bound: float = 1.0, mode: str = FULL_INFO, estimate_cap: float = math.inf):
        if n < 1:
            raise InvalidInputError("need at least one action")
        if mode not in (FULL_INFO, ESTIMATED):
            raise InvalidInputError(f"unknown mode {mode!r}")
        if eta is None:
            if horizon is None:
                raise InvalidInputError("give either eta or a horizon")
            eta = hedge_eta(n, horizon)
        if eta < 0 or bound <= 0:
            raise InvalidInputError("eta must be >= 0 and bound > 0")
        self.n = n
        self.eta = float(eta)
        self.bound = float(bound)
        self.mode = mode
        self.estimate_cap = estimate_cap
        self.logw = np.zeros(n)
        self.cumulative_rewards = np.zeros(n)
        self.expected_reward = 0.0
        self.rounds = 0

    @classmethod
    def from_weights(cls, weights, **kwargs) -> "Hedge":
        weights = np.asarray(weights, dtype=float)
        if (weights <= 0).any():
            raise InvalidInputError("weights must be positive")
        h = cls(weights.size, **{"eta": 0.0, **kwargs})
        h.logw = np.log(weights)
        return h

    @property
    def weights(self) -> np.ndarray:
        """Weights rescaled so the largest is 1."""
        return np.exp(self.logw - self.logw.max())

    def probabilities(self) -> np.ndarray:
        w = self.weights
        return w / w.sum()

    def select(self, rng) -> int:
        return self.select_from_uniform(rng.random())

    def select_from_uniform(self, u: float) -> int:
        return int(sample_index(self.logw, u))

    def update_full(self, rewards) -> None:
        if self.mode != FULL_INFO:
            raise InvalidInputError("full-information update on an estimated-mode expert")
        r = np.asarray(rewards, dtype=float)
        if r.shape != (self.n,):
            raise InvalidInputError(f"expected {self.n} rewards, got shape {r.shape}")
        if (r < -TOL).any() or (r > self.bound + TOL).any():
            raise InvalidInputError(
                f"rewards must lie in [0, {self.bound}] (got {r.min():.6g}..{r.max():.6g}); "
                "is the reward bound misconfigured?"
            )
        self.expected_reward += float(self.probabilities() @ r)
        self.cumulative_rewards += r
        self.logw += self.eta * r / self.bound
        self.rounds += 1

    def update_estimate(self, action: int, estimate: float) -> None:
        if self.mode != ESTIMATED:
            raise InvalidInputError("estimate update on a full-information expert")
        if not 0 <= action < self.n:
            raise InvalidInputError(f"action {action} outside 0..{self.n - 1}")
        if estimate < 0 or estimate > self.estimate_cap * (1 + TOL):
            raise InvalidInputError(
                f"estimate {estimate:.6g} outside [0, {self.estimate_cap:.6g}]; wrong importance weight?"
            )
        if estimate == 0:
            return
        self.cumulative_rewards[action] += estimate
        self.logw[action] += self.eta * estimate / self.bound

    def regret(self) -> float:
        """Best fixed action's cumulative reward minus the expected reward earned."""
        return float(self.cumulative_rewards.max() - self.expected_reward)


class DoublingHedge:
    """Anytime Hedge: restarts with horizon 2**j at the start of epoch j."""

    def __init__(self, n: int, bound: float = 1.0):
        self.n = n
        self.bound = bound
        self.epoch = 0
        self.cumulative_rewards = np.zeros(n)
        self.expected_reward = 0.0
        self._start_epoch()

    def _start_epoch(self):
        self._inner = Hedge(self.n, horizon=2**self.epoch, bound=self.bound)

    def probabilities(self) -> np.ndarray:
        return self._inner.probabilities()

    def select(self, rng) -> int:
        return self._inner.select(rng)

    def update_full(self, rewards) -> None:
        r = np.asarray(rewards, dtype=float)
        self.expected_reward += float(self._inner.probabilities() @ r)
        self._inner.update_full(r)
        self.cumulative_rewards += r
        if self._inner.rounds >= 2**self.epoch:
            self.epoch += 1
            self._start_epoch()

    def regret(self) -> float:
        return float(self.cumulative_rewards.max() - self.expected_reward)
