import itertools

import numpy as np
import pytest

from sweeptree.dataset import Dataset, generate_xor3
from sweeptree.likelihood import DirichletPrior, log_marginal_likelihood, log_tree_prior
from sweeptree.proposals import MoveConfig, MoveProposal, kind_probabilities, log_death_ratio
from sweeptree.sampler import (
    ChainTrace,
    SamplerConfig,
    handle_standard,
    handle_sweeping,
    initial_tree,
    run_chain,
)
from sweeptree.tree import DecisionTree, change_split, split_terminal

# the enumerable instance: 8 rows, one feature with values 0, 1, 2
ORACLE_X = [0, 0, 0, 1, 1, 1, 2, 2]
ORACLE_Y = [1, 1, 1, 2, 2, 2, 1, 1]
ORACLE_K = 3


def enumerate_trees(ds, K):
    """Every tree with at most K terminals built from observed-value splits."""
    vals = ds.meta[0].observed_values
    level = [DecisionTree.from_dataset(ds)]
    out = {level[0].structure_key(): level[0]}
    while level:
        nxt = {}
        for t in level:
            if t.k >= K:
                continue
            for nid, r in itertools.product(t.terminals(), vals):
                c = split_terminal(t, nid, 0, float(r))
                nxt.setdefault(c.structure_key(), c)
        out.update(nxt)
        level = list(nxt.values())
    return out


def exact_posterior(ds, K, p_min, cfg):
    """Posterior over usable trees, and the same reweighted by the chance that
    a fresh draw from each tree is usable (what redrawing samples)."""
    prior = DirichletPrior.uniform(ds.n_classes)
    trees = {k: t for k, t in enumerate_trees(ds, K).items() if t.min_partition() >= p_min}
    keys = list(trees)
    lp = np.array([log_marginal_likelihood(trees[k], prior) + log_tree_prior(trees[k], ds, K) for k in keys])
    post = np.exp(lp - lp.max())
    post /= post.sum()
    vals = ds.meta[0].observed_values
    usable = []
    for k in keys:
        t = trees[k]
        p = kind_probabilities(cfg, t.k, K, ds.m)
        a = p[1]
        if p[0]:
            a += p[0] * np.mean([split_terminal(t, n, 0, float(r)).min_partition() >= p_min
                                 for n in t.terminals() for r in vals])
        if p[3]:
            a += p[3] * np.mean([change_split(t, n, 0, float(r)).min_partition() >= p_min
                                 for n in t.splits() for r in vals])
        usable.append(a)
    reweighted = post * np.array(usable)
    return keys, post, reweighted / reweighted.sum()


def empirical(res, keys):
    counts = {}
    for s in res.samples:
        k = s.tree.structure_key()
        counts[k] = counts.get(k, 0) + 1
    assert set(counts) <= set(keys)
    return np.array([counts.get(k, 0) for k in keys]) / len(res.samples)


def oracle_dataset():
    return Dataset.from_arrays(ORACLE_X, ORACLE_Y)


def small_cfg(**kw):
    base = dict(move=MoveConfig(p_min=5), strategy="sweeping", burn_in=300, post_burn_in=300, thin=3, seed=1)
    base.update(kw)
    return SamplerConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(strategy="other")
    with pytest.raises(ValueError):
        SamplerConfig(post_burn_in=0)
    with pytest.raises(ValueError):
        SamplerConfig(thin=0)
    with pytest.raises(ValueError):
        SamplerConfig(burn_in=-1)
    assert SamplerConfig(strategy="standard").rule_mode == "discrete"
    assert SamplerConfig(strategy="sweeping").rule_mode == "continuous"


def test_initial_tree():
    ds = generate_xor3(1000, seed=0)
    t = initial_tree(ds)
    assert t.k == 1 and t.nodes[t.root].idx.size == 1000
    assert len(t.prunable()) == 0
    prior = DirichletPrior.uniform(2)
    assert log_marginal_likelihood(t, prior) == pytest.approx(
        log_marginal_likelihood(ds.class_counts()[None, :], prior))


def test_single_sample_bookkeeping():
    res = run_chain(generate_xor3(60, seed=0), small_cfg(burn_in=0, post_burn_in=1, thin=1))
    assert len(res.samples) == 1 and len(res.trace) == 1


@pytest.mark.parametrize("post, thin", [(100, 7), (99, 1), (10, 10), (6, 7)])
def test_retained_count(post, thin):
    res = run_chain(generate_xor3(60, seed=0), small_cfg(burn_in=5, post_burn_in=post, thin=thin))
    assert len(res.samples) == post // thin
    assert all((s.iteration - 5 + 1) % thin == 0 for s in res.samples)


def test_p_min_too_large():
    with pytest.raises(ValueError):
        run_chain(generate_xor3(5, seed=0), small_cfg(move=MoveConfig(p_min=5)))


def test_same_seed_same_trace(tmp_path):
    ds = generate_xor3(120, seed=2)
    for strategy in ("standard", "sweeping"):
        a = run_chain(ds, small_cfg(strategy=strategy))
        b = run_chain(ds, small_cfg(strategy=strategy))
        a.trace.to_csv(tmp_path / "a.csv")
        b.trace.to_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        back = ChainTrace.from_csv(tmp_path / "a.csv")
        assert back.k == a.trace.k and back.special == a.trace.special


def test_trace_consistency():
    ds = generate_xor3(150, seed=3)
    res = run_chain(ds, small_cfg(check_every=1))
    arr = res.trace.arrays()
    assert len(res.trace) == 600
    assert set(arr["phase"]) == {"burn-in", "post"}
    assert res.acceptance_rate["post"] == pytest.approx(arr["accepted"][arr["phase"] == "post"].mean())
    # k only changes on accepted moves
    changed = np.flatnonzero(np.diff(arr["k"]) != 0) + 1
    assert arr["accepted"][changed].all()
    assert arr["log_lik"][-1] == pytest.approx(log_marginal_likelihood(res.final_tree, DirichletPrior.uniform(2)))


def test_retained_samples_respect_p_min():
    ds = generate_xor3(200, seed=4)
    for strategy in ("standard", "sweeping"):
        res = run_chain(ds, small_cfg(strategy=strategy, burn_in=1500, post_burn_in=600, thin=2))
        for s in res.samples:
            assert s.tree.terminal_counts().sum(axis=1).min() >= 5


def test_callback_sees_every_iteration():
    seen = []
    run_chain(generate_xor3(50, seed=0), small_cfg(burn_in=3, post_burn_in=4), callback=lambda i, t, ll: seen.append(i))
    assert seen == list(range(7))


# -- strategy handlers --------------------------------------------------------


def _ds_line(n=10):
    return Dataset.from_arrays(np.c_[np.arange(float(n)), np.arange(float(n))[::-1]], [1, 2] * (n // 2))


def test_standard_marks_small_birth_unavailable():
    ds = _ds_line()
    t = DecisionTree.from_dataset(ds)
    new = split_terminal(t, 0, 0, 0.0)  # one-row left child
    prop = MoveProposal("birth", 0, 0, 0.0, 0.0, new)
    assert handle_standard(t, prop, 3) is None
    assert handle_standard(t, prop, 1) is prop


def test_standard_death_always_passes():
    ds = _ds_line()
    t = split_terminal(DecisionTree.from_dataset(ds), 0, 0, 0.0)
    prop = MoveProposal("death", 0, None, None, 0.0, DecisionTree.from_dataset(ds))
    assert handle_standard(t, prop, 3) is prop


def test_sweeping_case_one_passes_through():
    ds = _ds_line()
    t = split_terminal(DecisionTree.from_dataset(ds), 0, 0, 4.0)
    prop = MoveProposal("change_rule", 0, 0, 5.0, 0.0, change_split(t, 0, 0, 5.0))
    assert handle_sweeping(t, prop, 3, MoveConfig(), 9, 2) is prop


def test_sweeping_birth_with_one_starving_child_resamples():
    ds = _ds_line()
    t = DecisionTree.from_dataset(ds)
    prop = MoveProposal("birth", 0, 0, 0.0, 0.0, split_terminal(t, 0, 0, 0.0))
    assert handle_sweeping(t, prop, 3, MoveConfig(), 9, 2) is None


def test_sweeping_change_with_one_starving_leaf_becomes_death():
    ds = _ds_line()
    cfg = MoveConfig()
    t = split_terminal(DecisionTree.from_dataset(ds), 0, 0, 4.0)  # rows 0-4 | 5-9
    t = split_terminal(t, t.nodes[0].right, 0, 7.0)  # 5-7 | 8-9
    # moving the root rule to 8 leaves the right subtree with only row 9
    changed = change_split(t, 0, 0, 8.0)
    prop = MoveProposal("change_rule", 0, 0, 8.0, 0.0, changed)
    out = handle_sweeping(t, prop, 1, cfg, 9, 2)
    assert out is not None and out.swept
    assert out.tree.k == t.k - 1
    assert out.tree.min_partition() >= 1
    K, k = 9, t.k
    expect = log_death_ratio(k, len(changed.prunable()), kind_probabilities(cfg, k - 1, K, 2)[0],
                             kind_probabilities(cfg, k, K, 2)[1])
    assert out.log_R == pytest.approx(expect)


def test_sweeping_two_starving_leaves_resample():
    ds = _ds_line()
    t = split_terminal(DecisionTree.from_dataset(ds), 0, 0, 4.0)
    t = split_terminal(t, t.nodes[0].left, 0, 2.0)
    t = split_terminal(t, t.nodes[0].right, 0, 7.0)
    changed = change_split(t, 0, 0, 9.0)  # the whole right subtree is empty
    prop = MoveProposal("change_split", 0, 0, 9.0, 0.0, changed)
    assert handle_sweeping(t, prop, 1, MoveConfig(), 9, 2) is None


# -- stationary distribution on the enumerable instance ----------------------


def test_enumeration_is_complete():
    ds = oracle_dataset()
    trees = enumerate_trees(ds, ORACLE_K)
    usable = [t for t in trees.values() if t.min_partition() >= 1]
    # root; splits at 0 or 1; the 0-split can refine its right child at 1 and
    # the 1-split its left child at 0
    assert len(usable) == 5


def test_redraw_chain_matches_reweighted_posterior():
    ds = oracle_dataset()
    cfg = MoveConfig(p_min=1, rule_mode="discrete")
    keys, post, reweighted = exact_posterior(ds, ORACLE_K, 1, cfg)
    res = run_chain(ds, SamplerConfig(move=cfg, strategy="standard", burn_in=1000, post_burn_in=60_000,
                                      thin=1, seed=11, max_terminals=ORACLE_K))
    emp = empirical(res, keys)
    assert 0.5 * np.abs(emp - reweighted).sum() < 0.02


def test_reject_policy_matches_posterior():
    ds = oracle_dataset()
    cfg = MoveConfig(p_min=1, rule_mode="discrete")
    keys, post, _ = exact_posterior(ds, ORACLE_K, 1, cfg)
    res = run_chain(ds, SamplerConfig(move=cfg, strategy="standard", burn_in=1000, post_burn_in=150_000,
                                      thin=1, seed=12, max_terminals=ORACLE_K, on_unavailable="reject"))
    emp = empirical(res, keys)
    assert 0.5 * np.abs(emp - post).sum() < 0.03


def test_reject_policy_exact_with_two_features():
    """Two features, so change-split moves take part as well."""
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1], [0, 0], [1, 1], [2, 1]], dtype=float)
    ds = Dataset.from_arrays(X, [1, 2, 2, 1, 1, 1, 2])
    cfg = MoveConfig(p_min=1, rule_mode="discrete")
    K = 3
    prior = DirichletPrior.uniform(2)
    level = [DecisionTree.from_dataset(ds)]
    trees = {level[0].structure_key(): level[0]}
    while level:
        nxt = {}
        for t in level:
            if t.k >= K:
                continue
            for nid, v in itertools.product(t.terminals(), range(2)):
                for r in ds.meta[v].observed_values:
                    c = split_terminal(t, nid, v, float(r))
                    nxt.setdefault(c.structure_key(), c)
        trees.update(nxt)
        level = list(nxt.values())
    trees = {k: t for k, t in trees.items() if t.min_partition() >= 1}
    keys = list(trees)
    lp = np.array([log_marginal_likelihood(trees[k], prior) + log_tree_prior(trees[k], ds, K) for k in keys])
    post = np.exp(lp - lp.max())
    post /= post.sum()
    res = run_chain(ds, SamplerConfig(move=cfg, strategy="standard", burn_in=1000, post_burn_in=150_000,
                                      thin=1, seed=5, max_terminals=K, on_unavailable="reject"))
    emp = empirical(res, keys)
    assert 0.5 * np.abs(emp - post).sum() < 0.03


def test_xor3_acceptance_rate_band():
    ds = generate_xor3(1000, seed=0)
    res = run_chain(ds, SamplerConfig(move=MoveConfig(p_min=5), strategy="sweeping", burn_in=10_000,
                                      post_burn_in=2_000, thin=5, seed=0))
    for phase, rate in res.acceptance_rate.items():
        assert 0.10 <= rate <= 0.45, f"{phase} acceptance {rate:.3f}"
