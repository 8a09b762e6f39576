"""
Checking a chain against an enumerated posterior
================================================

Eight rows, one feature with values 0, 1, 2 and at most three terminals:
small enough to list every tree. Redrawing unusable moves samples the
posterior reweighted by how often a fresh draw is usable from each tree;
treating them as rejections samples the posterior itself.
"""

import itertools

import numpy as np

from sweeptree import Dataset, DirichletPrior, MoveConfig, SamplerConfig, run_chain
from sweeptree.likelihood import log_marginal_likelihood, log_tree_prior
from sweeptree.proposals import kind_probabilities
from sweeptree.tree import DecisionTree, change_split, split_terminal

ds = Dataset.from_arrays([0, 0, 0, 1, 1, 1, 2, 2], [1, 1, 1, 2, 2, 2, 1, 1])
K = 3
vals = ds.meta[0].observed_values
cfg = MoveConfig(p_min=1, rule_mode="discrete")

# every tree reachable by splitting on observed values
trees, level = {}, [DecisionTree.from_dataset(ds)]
while level:
    nxt = {}
    for t in level:
        trees[t.structure_key()] = t
        if t.k < K:
            for nid, r in itertools.product(t.terminals(), vals):
                c = split_terminal(t, nid, 0, float(r))
                nxt[c.structure_key()] = c
    level = list(nxt.values())
usable = {k: t for k, t in trees.items() if t.min_partition() >= 1}
keys = list(usable)
print(f"{len(trees)} trees, {len(usable)} without empty terminals")

prior = DirichletPrior.uniform(2)
lp = np.array([log_marginal_likelihood(usable[k], prior) + log_tree_prior(usable[k], ds, K) for k in keys])
post = np.exp(lp - lp.max())
post /= post.sum()


def usable_draw_probability(t):
    p = kind_probabilities(cfg, t.k, K, ds.m)
    a = p[1]
    if p[0]:
        a += p[0] * np.mean([split_terminal(t, n, 0, float(r)).min_partition() >= 1
                             for n in t.terminals() for r in vals])
    if p[3]:
        a += p[3] * np.mean([change_split(t, n, 0, float(r)).min_partition() >= 1
                             for n in t.splits() for r in vals])
    return a


reweighted = post * np.array([usable_draw_probability(usable[k]) for k in keys])
reweighted /= reweighted.sum()

for policy in ("resample", "reject"):
    res = run_chain(ds, SamplerConfig(move=cfg, strategy="standard", burn_in=1_000, post_burn_in=100_000,
                                      thin=1, seed=1, max_terminals=K, on_unavailable=policy))
    hits = [s.tree.structure_key() for s in res.samples]
    emp = np.array([hits.count(k) for k in keys]) / len(hits)
    print(f"{policy:8s} TV to posterior {0.5 * np.abs(emp - post).sum():.4f}, "
          f"TV to reweighted {0.5 * np.abs(emp - reweighted).sum():.4f}")

for k, p, q in zip(keys, post, reweighted):
    print(f"  {str(k):45s} posterior {p:.4f}  reweighted {q:.4f}")
