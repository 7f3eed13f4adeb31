"""Reward models: weighted coverage, position-discounted coverage over
blog rankings, the Markov ad-click scan model and separable CTRs.

Every position-based model uses the ground set ``P_k = items x {k}``
with item id ``k * n_items + i`` (0-based position k).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import GroundSet, InvalidInputError, ValueOracle


def positional_ground_set(n_items: int, K: int) -> GroundSet:
    parts = [list(range(k * n_items, (k + 1) * n_items)) for k in range(K)]
    labels = [(i, k + 1) for k in range(K) for i in range(n_items)]
    return GroundSet(parts, labels)


def _decode_slots(items, n_items: int, K: int) -> list[list[int]]:
    slots: list[list[int]] = [[] for _ in range(K)]
    for x in items:
        slots[x // n_items].append(x % n_items)
    return slots


# ---------------------------------------------------------------------------
# Coverage


def _fix_present(out, bases, cand, base_vals):
    # f(base + x) = f(base) when x is already in base
    pos = {x: j for j, x in enumerate(cand)}
    for i, base in enumerate(bases):
        hits = [pos[x] for x in base if x in pos]
        if hits:
            out[i, hits] = base_vals[i]
    return out


class WeightedCoverage(ValueOracle):
    """g(A) = sum_e w_e * (1 - prod_{x in A} (1 - p[x, e])).

    With 0/1 incidence this is plain weighted set coverage.
    """

    def __init__(self, incidence, weights):
        self.incidence = np.asarray(incidence, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.incidence.ndim != 2 or self.incidence.shape[1] != self.weights.size:
            raise InvalidInputError("incidence must be (n_items, n_elements)")
        if (self.weights < 0).any() or (self.incidence < 0).any() or (self.incidence > 1).any():
            raise InvalidInputError("weights must be >= 0 and incidences in [0, 1]")
        self.bound = float(self.weights.sum())

    def __call__(self, items):
        idx = list(items)
        if not idx:
            return 0.0
        miss = np.prod(1.0 - self.incidence[idx], axis=0)
        return float(self.weights @ (1.0 - miss))

    def values_with(self, bases, candidates):
        cand = list(candidates)
        out = np.empty((len(bases), len(cand)))
        covered = np.empty(len(bases))
        for i, base in enumerate(bases):
            idx = list(base)
            miss = np.prod(1.0 - self.incidence[idx], axis=0) if idx else np.ones(self.weights.size)
            covered[i] = self.weights @ (1.0 - miss)
            out[i] = covered[i] + (self.incidence[cand] * miss) @ self.weights
        return _fix_present(out, bases, cand, covered)


def random_coverage(gs: GroundSet, n_elements: int, rng, density: float = 0.4,
                    weight_dist: str = "uniform") -> WeightedCoverage:
    """Random 0/1 weighted coverage function on ``gs`` (test instances)."""
    incidence = rng.random((gs.n_items, n_elements)) < density
    return WeightedCoverage(incidence, _draw_weights(rng, n_elements, weight_dist))


def _draw_weights(rng, n: int, dist: str) -> np.ndarray:
    if dist == "unit":
        return np.ones(n)
    if dist == "uniform":
        return rng.random(n)
    if dist == "exponential":
        return rng.exponential(1.0, n)
    if dist == "lognormal":
        return rng.lognormal(0.0, 1.0, n)
    raise InvalidInputError(f"unknown weight distribution {dist!r}")


@dataclass
class CoverageInstance:
    """Blogs covering cascades, ranked into K positions with discount gamma."""

    weights: np.ndarray
    incidence: np.ndarray
    gamma: float
    K: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.incidence = np.asarray(self.incidence, dtype=float)
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInputError("discount gamma must lie in (0, 1)")
        if (self.weights < 0).any():
            raise InvalidInputError("cascade weights must be nonnegative")
        if (self.incidence < 0).any() or (self.incidence > 1).any():
            raise InvalidInputError("incidence probabilities must lie in [0, 1]")
        if self.incidence.shape != (self.incidence.shape[0], self.weights.size):
            raise InvalidInputError("incidence must be (n_blogs, n_elements)")
        if self.K < 1:
            raise InvalidInputError("need at least one position")

    @property
    def n_blogs(self) -> int:
        return self.incidence.shape[0]

    def ground_set(self) -> GroundSet:
        return positional_ground_set(self.n_blogs, self.K)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "incidence": self.incidence.tolist(),
            "gamma": self.gamma,
            "K": self.K,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CoverageInstance":
        return cls(np.array(d["weights"]), np.array(d["incidence"]), d["gamma"], d["K"])


def discounted_coverage_eval(inst: CoverageInstance, items) -> float:
    """sum_k gamma**k * (g(S^[k]) - g(S^[k-1])) with positions k = 1..K."""
    miss = np.ones(inst.weights.size)
    prev = 0.0
    total = 0.0
    for k, blogs in enumerate(_decode_slots(items, inst.n_blogs, inst.K), start=1):
        for b in blogs:
            miss = miss * (1.0 - inst.incidence[b])
        g = float(inst.weights @ (1.0 - miss))
        total += inst.gamma**k * (g - prev)
        prev = g
    return total


class DiscountedCoverage(ValueOracle):
    """Oracle wrapper around :func:`discounted_coverage_eval`."""

    def __init__(self, inst: CoverageInstance):
        self.inst = inst
        self.bound = inst.gamma * float(inst.weights.sum())
        self._disc = inst.gamma ** np.arange(1, inst.K + 1)

    def __call__(self, items):
        return discounted_coverage_eval(self.inst, items)

    def _prefix_miss(self, bases) -> np.ndarray:
        # miss[i, j, e]: prob. element e is uncovered by base i's positions <= j
        inst = self.inst
        factors = np.ones((len(bases), inst.K, inst.weights.size))
        nb = inst.n_blogs
        for i, base in enumerate(bases):
            for x in base:
                factors[i, x // nb] *= 1.0 - inst.incidence[x % nb]
        miss = np.ones((len(bases), inst.K + 1, inst.weights.size))
        miss[:, 1:] = np.cumprod(factors, axis=1)
        return miss

    def values_with(self, bases, candidates):
        # Adding blog b at position k scales miss[j] for j >= k by (1 - p_b);
        # the value change is p_b . v_k with
        # v_k = w * (gamma^k miss_k - sum_{j>k} gamma^j (miss_{j-1} - miss_j)).
        inst = self.inst
        miss = self._prefix_miss(bases)
        drops = miss[:, :-1] - miss[:, 1:]
        base_vals = np.einsum("ije,e,j->i", drops, inst.weights, self._disc)
        tail = (drops * self._disc[None, :, None])[:, ::-1].cumsum(axis=1)[:, ::-1]
        later = np.zeros_like(tail)
        later[:, :-1] = tail[:, 1:]
        v = (self._disc[None, :, None] * miss[:, 1:] - later) * inst.weights
        cand = np.asarray(list(candidates), dtype=np.int64)
        out = np.empty((len(bases), cand.size))
        pos, blog = cand // inst.n_blogs, cand % inst.n_blogs
        for k in np.unique(pos):
            sel = pos == k
            out[:, sel] = v[:, k] @ inst.incidence[blog[sel]].T
        return _fix_present(out + base_vals[:, None], bases, cand.tolist(), base_vals)


def cascade_gen(n_blogs: int, n_elements: int, density: float, weight_dist: str = "uniform",
                gamma: float = 0.8, K: int = 5, seed=None,
                probabilistic: bool = False) -> CoverageInstance:
    """Synthetic blog/cascade instance with Bernoulli(density) incidence.

    Incidence entries are 1 on edges, or Uniform(0, 1] when
    ``probabilistic`` is set. Deterministic given ``seed``.
    """
    if n_blogs < 1 or n_elements < 1:
        raise InvalidInputError("sizes must be positive")
    if not 0.0 <= density <= 1.0:
        raise InvalidInputError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = rng.random((n_blogs, n_elements)) < density
    weights = _draw_weights(rng, n_elements, weight_dist)
    incidence = edges.astype(float)
    if probabilistic:
        incidence *= 1.0 - rng.random((n_blogs, n_elements))
    return CoverageInstance(weights, incidence, gamma, K)


# ---------------------------------------------------------------------------
# Markov ad-click model


@dataclass
class AdModel:
    """Mixture of user types scanning K ad slots top-down.

    ``p_click[u, a]`` and ``p_abandon[u, k]`` are per user type ``u``.
    """

    type_weights: np.ndarray
    p_click: np.ndarray
    p_abandon: np.ndarray

    def __post_init__(self):
        self.type_weights = np.asarray(self.type_weights, dtype=float)
        self.p_click = np.atleast_2d(np.asarray(self.p_click, dtype=float))
        self.p_abandon = np.atleast_2d(np.asarray(self.p_abandon, dtype=float))
        U = self.type_weights.size
        if self.p_click.shape[0] != U or self.p_abandon.shape[0] != U:
            raise InvalidInputError("need p_click and p_abandon rows for every user type")
        if abs(self.type_weights.sum() - 1.0) > 1e-9:
            raise InvalidInputError("user type weights must sum to 1")
        for name in ("type_weights", "p_click", "p_abandon"):
            arr = getattr(self, name)
            if (arr < 0).any() or (arr > 1).any():
                raise InvalidInputError(f"{name} entries must be probabilities")
        self._cum = np.cumsum(self.type_weights)

    @property
    def n_ads(self) -> int:
        return self.p_click.shape[1]

    @property
    def K(self) -> int:
        return self.p_abandon.shape[1]

    def ground_set(self) -> GroundSet:
        return positional_ground_set(self.n_ads, self.K)

    def slot_ads(self, items) -> list[int]:
        """Ad index per slot, -1 for empty; ``items`` must be feasible."""
        out = [-1] * self.K
        for k, ads in enumerate(_decode_slots(items, self.n_ads, self.K)):
            if len(ads) > 1:
                raise InvalidInputError(f"slot {k + 1} holds more than one ad")
            if ads:
                out[k] = ads[0]
        return out

    def to_dict(self) -> dict:
        return {
            "type_weights": self.type_weights.tolist(),
            "p_click": self.p_click.tolist(),
            "p_abandon": self.p_abandon.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdModel":
        return cls(d["type_weights"], d["p_click"], d["p_abandon"])


def ad_expected_clicks(model: AdModel, items) -> float:
    slots = model.slot_ads(items)
    total = 0.0
    for u, w in enumerate(model.type_weights):
        survive, clicks = 1.0, 0.0
        for k, a in enumerate(slots):
            pc = model.p_click[u, a] if a >= 0 else 0.0
            clicks += survive * pc
            survive *= (1.0 - pc) * (1.0 - model.p_abandon[u, k])
        total += w * clicks
    return total


def _user_type(cum: np.ndarray, u0):
    return np.minimum((np.asarray(u0)[..., None] >= cum).sum(-1), cum.shape[-1] - 1)


def ad_round(model: AdModel, items, rng) -> int:
    """Simulate one user; returns 1 on a click, else 0.

    Always consumes ``1 + K`` uniforms from ``rng``: one for the user
    type and one per scanned slot.
    """
    slots = model.slot_ads(items)
    u = rng.random(1 + model.K)
    typ = int(_user_type(model._cum, u[0]))
    for k, a in enumerate(slots):
        pc = model.p_click[typ, a] if a >= 0 else 0.0
        if u[k + 1] < pc:
            return 1
        if u[k + 1] < pc + (1.0 - pc) * model.p_abandon[typ, k]:
            return 0
    return 0


def ad_rounds_batch(type_cum, p_click, p_abandon, slots, u) -> np.ndarray:
    """Vectorized :func:`ad_round` over R independent replicas.

    Shapes: ``type_cum`` (R, U), ``p_click`` (R, U, A), ``p_abandon``
    (R, U, K), ``slots`` (R, K) ad index or -1, ``u`` (R, 1 + K).
    Given the same uniforms it returns exactly what ``ad_round`` would.
    """
    R, K = slots.shape
    rows = np.arange(R)
    typ = _user_type(type_cum, u[:, 0])
    pc = np.take_along_axis(p_click[rows, typ], np.maximum(slots, 0), axis=1)
    pc = np.where(slots >= 0, pc, 0.0)
    uk = u[:, 1:K + 1]
    stop = uk < pc + (1.0 - pc) * p_abandon[rows, typ]
    first = stop.argmax(axis=1)
    # a click implies a stop, so the scan clicks iff it clicks at its first stop
    return (stop[rows, first] & (uk[rows, first] < pc[rows, first])).astype(float)


class AdClickOracle(ValueOracle):
    bound = 1.0

    def __init__(self, model: AdModel):
        self.model = model

    def __call__(self, items):
        return ad_expected_clicks(self.model, items)


def alice_bob_model(eps: float = 0.1) -> AdModel:
    """Two ads, two slots. Alice (prob 1/2 - eps) wants ad 1 and only looks
    at slot 1; Bob (prob 1/2 + eps) wants ad 2 and scans every slot."""
    return AdModel(
        type_weights=[0.5 - eps, 0.5 + eps],
        p_click=[[1.0, 0.0], [0.0, 1.0]],
        p_abandon=[[1.0, 1.0], [0.0, 0.0]],
    )


def random_ad_model(rng, K: int = 6, n_ads: int = 6, abandon=(0.0, 0.5),
                    type_weights=(0.5, 0.5)) -> AdModel:
    """User types with constant abandonment rates and independent
    Uniform[0, 1] click probabilities per (type, ad)."""
    U = len(abandon)
    return AdModel(
        type_weights=np.asarray(type_weights, dtype=float),
        p_click=rng.random((U, n_ads)),
        p_abandon=np.repeat(np.asarray(abandon, dtype=float)[:, None], K, axis=1),
    )


# ---------------------------------------------------------------------------
# Separable click-through rates


class SeparableCTR(ValueOracle):
    """Modular value sum over (ad, k) in S of bid(a) * alpha(a) * beta(k)."""

    def __init__(self, alpha, beta_pos, bids):
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta_pos = np.asarray(beta_pos, dtype=float)
        self.bids = np.asarray(bids, dtype=float)
        if self.alpha.shape != self.bids.shape:
            raise InvalidInputError("alpha and bids need one entry per ad")
        if (self.bids < 0).any():
            raise InvalidInputError("bids must be nonnegative")
        for arr in (self.alpha, self.beta_pos):
            if (arr < 0).any() or (arr > 1).any():
                raise InvalidInputError("alpha and beta_pos must lie in [0, 1]")
        self.values = np.outer(self.beta_pos, self.bids * self.alpha)  # (K, A)
        self.bound = float(self.values.max(axis=1).sum())

    @property
    def n_ads(self) -> int:
        return self.alpha.size

    @property
    def K(self) -> int:
        return self.beta_pos.size

    def ground_set(self) -> GroundSet:
        return positional_ground_set(self.n_ads, self.K)

    def __call__(self, items):
        n = self.n_ads
        return float(sum(self.values[x // n, x % n] for x in items))


def separable_ctr_model(alpha, beta_pos, bids) -> SeparableCTR:
    return SeparableCTR(alpha, beta_pos, bids)
