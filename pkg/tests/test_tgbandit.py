import numpy as np
import pytest

from subassign.core import ColorTable, FunctionOracle, GroundSet, InvalidInputError, sample_colored
from subassign.environments import ad_round, ad_rounds_batch, random_ad_model, random_coverage
from subassign.experts import FULL_INFO
from subassign.tgbandit import (
    BANDIT,
    BanditBatch,
    TGBandit,
    UsageError,
    default_explore_prob,
    prefix_pairs,
    run_bandit,
    run_full_info,
    tg_feedback_bandit,
    tg_feedback_full,
    tg_select_round,
)


def test_grid_and_feasibility():
    gs = GroundSet.from_sizes([3, 2, 4])
    st = TGBandit(gs, 3, 100, seed=0)
    assert len(st.experts) == 3 and all(len(row) == 3 for row in st.experts)
    assert [row[0].n for row in st.experts] == [3, 2, 4]
    for _ in range(50):
        sel = tg_select_round(st)
        assert sum(len(r) for r in sel.chosen) == 9
        assert gs.is_feasible(sel.played)
        table = ColorTable.from_grid(sel.chosen)
        assert sel.played == sample_colored(table, sel.cvec, gs)


def test_single_color_plays_every_choice():
    gs = GroundSet.from_sizes([2, 3])
    st = TGBandit(gs, 1, 10, seed=1)
    for _ in range(20):
        sel = st.select_round()
        assert sel.played == {row[0] for row in sel.chosen}


def test_prefix_definition_by_enumeration():
    chosen = [[10, 11, 12], [20, 21, 22], [30, 31, 32]]
    for k in range(3):
        for c in range(1, 4):
            want = {(chosen[kk][cc - 1], cc) for kk in range(3) for cc in range(1, 4)
                    if cc < c or (cc == c and kk < k)}
            assert prefix_pairs(chosen, k, c) == want


def test_single_cell_gets_singleton_values():
    gs = GroundSet([[0, 1, 2]])
    w = [0.2, 0.9, 0.5]
    f = FunctionOracle(lambda s: sum(w[x] for x in s), bound=1.0)
    st = TGBandit(gs, 1, 10, seed=0)
    sel = st.select_round()
    vecs = st.reward_vectors(sel, f)
    np.testing.assert_allclose(vecs[(0, 1)], w)


def test_zero_rewards_leave_weights():
    gs = GroundSet.from_sizes([2, 2])
    st = TGBandit(gs, 2, 10, seed=0)
    sel = st.select_round()
    tg_feedback_full(st, sel, FunctionOracle(lambda s: 0.0))
    assert all((e.logw == 0).all() for row in st.experts for e in row)


def test_reward_vectors_use_realized_colors_and_are_idempotent():
    gs = GroundSet.from_sizes([2, 3])
    f = random_coverage(gs, 5, np.random.default_rng(0))
    st = TGBandit(gs, 2, 100, bound=f.bound, seed=2)
    sel = st.select_round()
    a, b = st.reward_vectors(sel, f), st.reward_vectors(sel, f)
    assert all(np.array_equal(a[key], b[key]) for key in a)
    part_of = gs.partition_of
    for (k, c), vals in a.items():
        prefix = prefix_pairs(sel.chosen, k, c)
        for j, x in enumerate(gs.partitions[k]):
            pairs = prefix | {(x, c)}
            played = frozenset(y for y, cc in pairs if sel.cvec[part_of[y]] == cc)
            assert vals[j] == pytest.approx(f(played))


def test_mode_mismatch_errors():
    gs = GroundSet.from_sizes([2])
    full = TGBandit(gs, 1, 10, seed=0)
    band = TGBandit(gs, 1, 10, BANDIT, seed=0)
    with pytest.raises(UsageError):
        full.feedback_bandit(full.select_round(), 1.0)
    with pytest.raises(UsageError):
        band.feedback_full(band.select_round(), FunctionOracle(lambda s: 0.0))
    sel = band.select_round()
    sel.explored, sel.explore_meta = True, None
    with pytest.raises(UsageError):
        band.feedback_bandit(sel, 1.0)
    with pytest.raises(InvalidInputError):
        TGBandit(gs, 1, 10, "other")


def test_bandit_zero_reward_changes_nothing():
    gs = GroundSet.from_sizes([2, 2])
    st = TGBandit(gs, 2, 10, BANDIT, explore_prob=1.0, seed=0)
    for _ in range(20):
        tg_feedback_bandit(st, st.select_round(), 0.0)
    assert all((e.logw == 0).all() for row in st.experts for e in row)


def test_exploration_triples_uniform():
    gs = GroundSet.from_sizes([2, 3])
    st = TGBandit(gs, 2, 10, BANDIT, explore_prob=1.0, seed=4)
    n = 10**5
    counts = {}
    for _ in range(n):
        sel = st.select_round()
        assert sel.explored
        counts[sel.explore_meta] = counts.get(sel.explore_meta, 0) + 1
    for (k, c, x), cnt in counts.items():
        p = 1 / (2 * 2 * gs.sizes[k])
        assert abs(cnt - n * p) < 3 * np.sqrt(n * p * (1 - p)) + 1
    assert len(counts) == 2 * (2 + 3)


def test_exploration_play_is_prefix_plus_candidate():
    gs = GroundSet.from_sizes([2, 2, 2])
    st = TGBandit(gs, 3, 10, BANDIT, explore_prob=1.0, seed=5)
    for _ in range(200):
        sel = st.select_round()
        k, c, x = sel.explore_meta
        pairs = prefix_pairs(sel.chosen, k, c) | {(x, c)}
        want = frozenset(y for y, cc in pairs if sel.cvec[gs.partition_of[y]] == cc)
        assert sel.played == want


def test_default_explore_prob():
    assert default_explore_prob(6, 4, 36, 10**6) == pytest.approx((6 * 4 * 36 * np.log(36)) ** (1 / 3) / 100)
    assert default_explore_prob(6, 4, 36, 10) == 1.0


def test_importance_weight_cap():
    gs = GroundSet.from_sizes([3, 3])
    st = TGBandit(gs, 2, 100, BANDIT, explore_prob=0.1, max_importance_weight=50.0, seed=0)
    assert st.importance_weight == [50.0, 50.0]
    st2 = TGBandit(gs, 2, 100, BANDIT, explore_prob=0.1, seed=0)
    assert st2.importance_weight == [pytest.approx(120.0)] * 2


def test_clamping_logs(caplog):
    gs = GroundSet.from_sizes([2])
    st = TGBandit(gs, 1, 10, BANDIT, explore_prob=1.0, seed=0)
    sel = st.select_round()
    with caplog.at_level("WARNING"):
        st.feedback_bandit(sel, 3.0)
    assert "clamping" in caplog.text


def test_full_info_learns_best_modular_items():
    gs = GroundSet.from_sizes([3, 3])
    w = [0.1, 0.9, 0.3, 0.8, 0.2, 0.1]
    f = FunctionOracle(lambda s: sum(w[x] for x in s) / 2, bound=1.0)
    st = TGBandit(gs, 2, 2000, seed=0)
    rewards = run_full_info(st, f, 2000)
    assert rewards[-200:].mean() > 0.8
    assert st.expert_regrets().max() < 60


def test_determinism():
    gs = GroundSet.from_sizes([2, 3])
    f = random_coverage(gs, 5, np.random.default_rng(0))
    a = run_full_info(TGBandit(gs, 2, 300, bound=f.bound, seed=9), f, 300)
    b = run_full_info(TGBandit(gs, 2, 300, bound=f.bound, seed=9), f, 300)
    assert np.array_equal(a, b)


def test_batch_bit_identical_to_scalar():
    rng = np.random.default_rng(0)
    models = [random_ad_model(rng, K=3, n_ads=4) for _ in range(4)]
    gs = models[0].ground_set()
    seeds = [11, 12, 13, 14]
    T = 3000
    batch = BanditBatch(gs, 2, T, seeds, n_env_uniforms=4, explore_prob=0.3, block=128)
    cum = np.stack([m._cum for m in models])
    pc = np.stack([m.p_click for m in models])
    pa = np.stack([m.p_abandon for m in models])
    got = np.array([batch.step(lambda s, u: ad_rounds_batch(cum, pc, pa, s, u))[0] for _ in range(T)])
    for r, (m, s) in enumerate(zip(models, seeds)):
        st = TGBandit(gs, 2, T, BANDIT, explore_prob=0.3, seed=s)
        want, _ = run_bandit(st, lambda played, g: ad_round(m, played, g), T)
        assert np.array_equal(got[:, r], want)
        probs = np.array([[e.probabilities() for e in row] for row in st.experts])
        np.testing.assert_allclose(batch.probabilities()[r], probs, rtol=0, atol=1e-15)
