"""Reversible-jump move kernel: birth, death, change-split and change-rule.

Every ``propose_*`` function returns a :class:`MoveProposal` holding the
proposed tree (a fresh copy; the current tree is never touched) and
``log_R``, the log of prior ratio x reverse/forward proposal ratio. The
Metropolis-Hastings test then only needs the likelihood difference.

Move-kind probabilities are renormalised over the kinds that are
structurally possible in the current state (no death or change at ``k = 1``,
no birth at ``k = K``, no change-split with a single feature), and the
birth/death ratios use these state-dependent ``b_k`` / ``d_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import log_catalan
from .tree import DecisionTree, change_split, prune_split, split_terminal

__all__ = [
    "KINDS",
    "MoveUnavailable",
    "MoveConfig",
    "MoveProposal",
    "ChipmanPrior",
    "kind_probabilities",
    "draw_move_kind",
    "draw_rule",
    "log_birth_ratio",
    "log_death_ratio",
    "propose",
    "propose_birth",
    "propose_death",
    "propose_change_split",
    "propose_change_rule",
    "chipman_split_probability",
    "log_chipman_tree_prior",
    "splitting_prior_ps",
]

KINDS = ("birth", "death", "change_split", "change_rule")
BIRTH, DEATH, CHANGE_SPLIT, CHANGE_RULE = KINDS
RULE_MODES = ("discrete", "continuous")


class MoveUnavailable(Exception):
    """The requested move cannot be made from the current tree."""


@dataclass(frozen=True)
class MoveConfig:
    """Move-kind probabilities and rule-proposal settings.

    ``rule_mode`` is ``"discrete"`` (rules drawn from the observed training
    values; change-rule redraws from them too) or ``"continuous"`` (rules
    drawn uniformly on the feature's full range; change-rule is a Gaussian
    random walk). ``None`` lets the sampler pick from its strategy.
    ``sigma`` overrides the per-feature random-walk scale, which otherwise is
    ``sigma_frac`` times the feature range.
    """

    p_birth: float = 0.1
    p_death: float = 0.1
    p_change_split: float = 0.1
    p_change_rule: float = 0.7
    p_min: int = 1
    rule_mode: str | None = None
    sigma_frac: float = 0.1
    sigma: tuple[float, ...] | None = None

    def __post_init__(self):
        p = self.probs
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"move probabilities must be >= 0 and sum to 1, got {p.tolist()}")
        if self.p_min < 1:
            raise ValueError("p_min must be >= 1")
        if self.rule_mode is not None and self.rule_mode not in RULE_MODES:
            raise ValueError(f"rule_mode must be one of {RULE_MODES}")
        if self.sigma_frac <= 0:
            raise ValueError("sigma_frac must be positive")
        if self.sigma is not None and any(s <= 0 for s in self.sigma):
            raise ValueError("sigma entries must be positive")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p_birth, self.p_death, self.p_change_split, self.p_change_rule], dtype=float)

    def sigmas(self, meta) -> np.ndarray:
        if self.sigma is not None:
            if len(self.sigma) != len(meta):
                raise ValueError(f"sigma has {len(self.sigma)} entries for {len(meta)} features")
            return np.asarray(self.sigma, dtype=float)
        # a constant feature still needs a positive step
        return np.array([self.sigma_frac * fm.root_range if fm.root_range > 0 else 1.0 for fm in meta])


@dataclass(frozen=True)
class ChipmanPrior:
    """Depth-dependent split prior ``gamma * (1 + depth) ** -delta``."""

    gamma: float = 0.95
    delta: float = 1.0
    enabled: bool = False

    def __post_init__(self):
        if self.enabled and not (0 < self.gamma <= 1 and self.delta >= 0):
            raise ValueError("Chipman prior needs 0 < gamma <= 1 and delta >= 0")


@dataclass
class MoveProposal:
    kind: str
    node: int
    var: int | None
    rule: float | None
    log_R: float
    tree: DecisionTree = field(repr=False)
    swept: bool = False


def kind_probabilities(cfg: MoveConfig, k: int, max_terminals: int, m: int) -> np.ndarray:
    """Move-kind probabilities at a tree with ``k`` terminals, renormalised over
    the kinds that exist there."""
    p = cfg.probs.copy()
    if k >= max_terminals:
        p[0] = 0.0
    if k < 2:
        p[1:] = 0.0
    if m < 2:
        p[2] = 0.0
    s = p.sum()
    if s <= 0:
        raise MoveUnavailable(f"no move has positive probability at k={k}")
    return p / s


def draw_move_kind(cfg: MoveConfig, rng, k: int = 2, max_terminals: int = 2**62, m: int = 2) -> str:
    """Categorical draw of a move kind (structurally impossible kinds excluded)."""
    cdf = np.cumsum(kind_probabilities(cfg, k, max_terminals, m))
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return KINDS[min(i, 3)]


def draw_rule(fm, mode: str, rng) -> float:
    """New splitting value for feature ``fm`` from the rule prior."""
    if mode == "discrete":
        v = fm.observed_values
        return float(v[rng.integers(v.size)])
    return float(rng.uniform(fm.root_min, fm.root_max))


def log_birth_ratio(k: int, n_prunable_after: int, b_k: float, d_k1: float) -> float:
    """log R for growing a tree from ``k`` to ``k + 1`` terminals.

    R = d_{k+1}/b_k * k / D_Q1 * S_k / S_{k+1}, with ``D_Q1`` counted on the
    grown tree.
    """
    return (math.log(d_k1) - math.log(b_k) + math.log(k) - math.log(n_prunable_after)
            + log_catalan(k) - log_catalan(k + 1))


def log_death_ratio(k: int, n_prunable: int, b_km1: float, d_k: float) -> float:
    """log R for pruning a ``k``-terminal tree; the exact negative of the
    matching :func:`log_birth_ratio`."""
    return (math.log(b_km1) - math.log(d_k) + math.log(n_prunable) - math.log(k - 1)
            + log_catalan(k) - log_catalan(k - 1))


# -- Chipman depth prior ------------------------------------------------------


def chipman_split_probability(depth, prior: ChipmanPrior) -> float:
    """``gamma * (1 + depth) ** -delta``, clamped to (0, 1]."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    p = prior.gamma * (1.0 + depth) ** (-prior.delta)
    return float(min(max(p, np.finfo(float).tiny), 1.0))


def log_chipman_tree_prior(tree: DecisionTree, prior: ChipmanPrior) -> float:
    """Sum of log p_split over splitting nodes and log(1 - p_split) over
    terminals. Zero when the prior is disabled."""
    if not prior.enabled:
        return 0.0
    nodes = tree.nodes
    depth = {}
    total = 0.0
    for i in tree.preorder():
        nd = nodes[i]
        d = 0 if nd.parent < 0 else depth[nd.parent] + 1
        depth[i] = d
        p = chipman_split_probability(d, prior)
        if nd.left >= 0:
            total += math.log(p)
        else:
            total += math.log1p(-p) if p < 1.0 else -math.inf
    return total


def _chipman_delta(old: DecisionTree, new: DecisionTree, prior: ChipmanPrior | None) -> float:
    if prior is None or not prior.enabled:
        return 0.0
    a, b = log_chipman_tree_prior(new, prior), log_chipman_tree_prior(old, prior)
    if a == b:
        return 0.0
    return a - b


def splitting_prior_ps(bounds, node: int, var: int, meta) -> float:
    """Fraction of feature ``var``'s full range still spanned by the rows at
    ``node``: (max - min at node) / (max - min over the training set).

    A node that receives no rows has no spread and gets 0.
    """
    fm = meta[var]
    if fm.root_range <= 0:
        raise ValueError(f"feature {fm.name!r} has zero range")
    lo, hi = bounds.of(node)
    if np.isnan(lo[var]):
        return 0.0
    return float((hi[var] - lo[var]) / fm.root_range)


# -- proposals ----------------------------------------------------------------


def _mode(cfg: MoveConfig) -> str:
    return cfg.rule_mode or "discrete"


def propose_birth(tree: DecisionTree, meta, cfg: MoveConfig, rng,
                  max_terminals: int | None = None, chipman: ChipmanPrior | None = None, **_) -> MoveProposal:
    m = len(meta)
    K = tree.n - 1 if max_terminals is None else max_terminals
    k = tree.k
    if k >= K:
        raise MoveUnavailable(f"tree already has the maximal {K} terminals")
    terms = tree.terminals()
    nid = terms[rng.integers(len(terms))]
    var = int(rng.integers(m))
    rule = draw_rule(meta[var], _mode(cfg), rng)
    new = split_terminal(tree, nid, var, rule)
    b_k = kind_probabilities(cfg, k, K, m)[0]
    d_k1 = kind_probabilities(cfg, k + 1, K, m)[1]
    log_R = log_birth_ratio(k, len(new.prunable()), b_k, d_k1)
    log_R += _chipman_delta(tree, new, chipman)
    return MoveProposal(BIRTH, nid, var, rule, log_R, new)


def propose_death(tree: DecisionTree, meta, cfg: MoveConfig, rng,
                  max_terminals: int | None = None, chipman: ChipmanPrior | None = None, **_) -> MoveProposal:
    m = len(meta)
    K = tree.n - 1 if max_terminals is None else max_terminals
    k = tree.k
    if k < 2:
        raise MoveUnavailable("a single-terminal tree has nothing to prune")
    cand = tree.prunable()
    nid = cand[rng.integers(len(cand))]
    new = prune_split(tree, nid)
    b_km1 = kind_probabilities(cfg, k - 1, K, m)[0]
    d_k = kind_probabilities(cfg, k, K, m)[1]
    log_R = log_death_ratio(k, len(cand), b_km1, d_k)
    log_R += _chipman_delta(tree, new, chipman)
    return MoveProposal(DEATH, nid, None, None, log_R, new)


def propose_change_split(tree: DecisionTree, meta, cfg: MoveConfig, rng, **_) -> MoveProposal:
    m = len(meta)
    if m < 2:
        raise MoveUnavailable("change-split needs at least two features")
    splits = tree.splits()
    if not splits:
        raise MoveUnavailable("no splitting node to change")
    nid = splits[rng.integers(len(splits))]
    cur = tree.nodes[nid].var
    var = int(rng.integers(m - 1))
    if var >= cur:
        var += 1
    rule = draw_rule(meta[var], _mode(cfg), rng)
    return MoveProposal(CHANGE_SPLIT, nid, var, rule, 0.0, change_split(tree, nid, var, rule))


def propose_change_rule(tree: DecisionTree, meta, cfg: MoveConfig, rng, sigma=None, **_) -> MoveProposal:
    splits = tree.splits()
    if not splits:
        raise MoveUnavailable("no splitting node to change")
    nid = splits[rng.integers(len(splits))]
    nd = tree.nodes[nid]
    var = nd.var
    if _mode(cfg) == "continuous":
        if sigma is None:
            sigma = cfg.sigmas(meta)
        rule = float(nd.rule + sigma[var] * rng.standard_normal())
    else:
        rule = draw_rule(meta[var], "discrete", rng)
    return MoveProposal(CHANGE_RULE, nid, var, rule, 0.0, change_split(tree, nid, var, rule))


_PROPOSERS = {
    BIRTH: propose_birth,
    DEATH: propose_death,
    CHANGE_SPLIT: propose_change_split,
    CHANGE_RULE: propose_change_rule,
}


def propose(kind: str, tree: DecisionTree, meta, cfg: MoveConfig, rng, **kw) -> MoveProposal:
    return _PROPOSERS[kind](tree, meta, cfg, rng, **kw)
