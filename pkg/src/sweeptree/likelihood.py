"""Dirichlet-multinomial marginal likelihood, structural tree prior and
Catalan numbers. Everything is in natural-log space."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "DirichletPrior",
    "log_terminal_likelihood",
    "log_marginal_likelihood",
    "terminal_class_posterior",
    "log_catalan",
    "log_tree_prior",
]


@dataclass(frozen=True)
class DirichletPrior:
    """Symmetric or per-class Dirichlet concentration for terminal-node class
    probabilities."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.ndim != 1 or a.size == 0 or not np.all(a > 0) or not np.all(np.isfinite(a)):
            raise ValueError(f"Dirichlet alpha must be positive and finite, got {self.alpha!r}")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def uniform(cls, n_classes: int, value: float = 1.0) -> "DirichletPrior":
        return cls(np.full(n_classes, float(value)))

    def resolve(self, n_classes: int) -> "DirichletPrior":
        """Broadcast a length-1 prior to ``n_classes``."""
        if self.alpha.size == n_classes:
            return self
        if self.alpha.size == 1:
            return DirichletPrior(np.full(n_classes, self.alpha[0]))
        raise ValueError(f"alpha has {self.alpha.size} entries for {n_classes} classes")


def log_terminal_likelihood(counts, prior: DirichletPrior) -> np.ndarray:
    """Per-terminal log Dirichlet-multinomial evidence.

    ``counts`` is ``(k, C)`` (or ``(C,)``); returns a length-``k`` array (or a
    scalar) of

        lnG(sum a) - sum lnG(a_j) + sum lnG(m_j + a_j) - lnG(n + sum a).
    """
    counts = np.asarray(counts, dtype=float)
    a = prior.resolve(counts.shape[-1]).alpha
    a0 = a.sum()
    const = gammaln(a0) - gammaln(a).sum()
    return const + gammaln(counts + a).sum(axis=-1) - gammaln(counts.sum(axis=-1) + a0)


def log_marginal_likelihood(tree_or_counts, prior: DirichletPrior) -> float:
    """log p(D | tree): sum of :func:`log_terminal_likelihood` over terminals.

    Accepts a :class:`~sweeptree.tree.DecisionTree`, a
    :class:`~sweeptree.tree.FrozenTree`, or a ``(k, C)`` count matrix.
    """
    if hasattr(tree_or_counts, "terminal_counts"):
        counts = tree_or_counts.terminal_counts()
    else:
        counts = np.atleast_2d(tree_or_counts)
    return float(log_terminal_likelihood(counts, prior).sum())


def terminal_class_posterior(counts, prior: DirichletPrior) -> np.ndarray:
    """Posterior-mean class probabilities ``(m_j + a_j) / (n + sum a)``.

    Works row-wise on a ``(k, C)`` matrix.
    """
    counts = np.asarray(counts, dtype=float)
    a = prior.resolve(counts.shape[-1]).alpha
    num = counts + a
    return num / num.sum(axis=-1, keepdims=True)


_SMALL_K = 64


def log_catalan(k) -> float | np.ndarray:
    """log of the Catalan number ``binom(2k, k) / (k + 1)``, for ``k >= 1``.

    Small integer ``k`` uses the product ``prod_{i=2..k} (k + i) / i`` (exactly
    0 at ``k = 1``), larger ``k`` the log-gamma form.
    """
    if isinstance(k, (int, np.integer)):
        k = int(k)
        if k < 1:
            raise ValueError(f"log_catalan needs k >= 1, got {k}")
        if k <= _SMALL_K:
            return math.fsum(math.log((k + i) / i) for i in range(2, k + 1))
        return math.lgamma(2 * k + 1) - 2 * math.lgamma(k + 1) - math.log(k + 1)
    k_arr = np.asarray(k)
    if np.any(k_arr < 1):
        raise ValueError(f"log_catalan needs k >= 1, got {k}")
    kf = k_arr.astype(float)
    out = gammaln(2 * kf + 1) - 2 * gammaln(kf + 1) - np.log(kf + 1)
    return float(out) if out.ndim == 0 else out


def log_tree_prior(tree, meta, max_terminals: int | None = None) -> float:
    """Structural log prior of a tree.

    Each split contributes ``-log N(var) - log m`` (``N`` = number of
    candidate rules for the variable), and the size term is
    ``-log S_k - log K`` with ``S_k`` the Catalan number and ``K`` the
    maximal number of terminals (``n - 1`` by default).

    This is the prior for which the birth/death acceptance ratios in
    :mod:`sweeptree.proposals` are exact.

    Parameters
    ----------
    tree : DecisionTree or FrozenTree
    meta : sequence of FeatureMeta, or a Dataset
    """
    if hasattr(meta, "meta"):
        n = meta.n
        meta = meta.meta
    else:
        n = None
    if max_terminals is None:
        if n is None:
            raise ValueError("max_terminals is required when meta is not a Dataset")
        max_terminals = n - 1
    m = len(meta)
    if hasattr(tree, "split_vars"):
        split_vars = tree.split_vars()
        k = tree.k
    else:
        split_vars = [int(v) for v in tree.var if v >= 0]
        k = tree.k
    lp = -sum(np.log(meta[v].n_rules) for v in split_vars) - len(split_vars) * np.log(m)
    return float(lp - log_catalan(k) - np.log(max_terminals))
