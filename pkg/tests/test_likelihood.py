import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset, random_tree
from sweeptree.dataset import Dataset
from sweeptree.likelihood import (
    DirichletPrior,
    log_catalan,
    log_marginal_likelihood,
    log_terminal_likelihood,
    log_tree_prior,
    terminal_class_posterior,
)
from sweeptree.tree import DecisionTree, FrozenTree, split_terminal

U2 = DirichletPrior.uniform(2)


def polya_probability(labels, alpha) -> Fraction:
    """Probability of one particular label sequence under a Dirichlet-
    categorical model, by the sequential predictive (urn) rule."""
    seen = [0] * len(alpha)
    a0 = sum(alpha)
    p = Fraction(1)
    for i, lab in enumerate(labels):
        p *= Fraction(seen[lab] + alpha[lab]) / (i + a0)
        seen[lab] += 1
    return p


def test_known_value():
    assert log_marginal_likelihood(np.array([[2, 1]]), U2) == pytest.approx(math.log(1 / 12), abs=1e-12)


def test_empty_terminal_is_zero():
    assert log_marginal_likelihood(np.array([[0, 0]]), U2) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("alpha", [(1, 1), (2, 1), (1, 1, 1), (3, 1, 2)])
def test_matches_urn_oracle_on_small_nodes(alpha):
    """Every label sequence of length <= 6 against exact rational arithmetic."""
    prior = DirichletPrior(np.array(alpha, dtype=float))
    C = len(alpha)
    for n in range(0, 7):
        for labels in product(range(C), repeat=n):
            counts = np.bincount(np.array(labels, dtype=int), minlength=C)
            expect = math.log(polya_probability(labels, alpha))
            got = log_marginal_likelihood(counts[None, :], prior)
            assert abs(got - expect) <= 1e-10


def test_matches_numerical_integration():
    """Beta-binomial sequence probability by quadrature, (4, 2) with alpha (0.5, 1.5)."""
    from scipy import integrate
    from scipy.special import beta as B

    a, b = 0.5, 1.5
    val, _ = integrate.quad(lambda p: p ** (4 + a - 1) * (1 - p) ** (2 + b - 1), 0, 1, epsabs=1e-14)
    got = log_marginal_likelihood(np.array([[4, 2]]), DirichletPrior(np.array([a, b])))
    assert got == pytest.approx(math.log(val / B(a, b)), abs=1e-10)


def test_additive_over_terminals(tiny):
    t = split_terminal(DecisionTree.from_dataset(tiny), 0, 0, 2.0)
    per = log_terminal_likelihood(t.terminal_counts(), U2)
    assert log_marginal_likelihood(t, U2) == pytest.approx(per.sum())
    assert log_marginal_likelihood(FrozenTree.from_tree(t), U2) == pytest.approx(per.sum())


def test_split_of_pure_terminal_never_increases():
    # (n, 0) scores 1/(n+1); children (a, 0), (b, 0) score 1/((a+1)(b+1)) <= 1/(n+1)
    ds = Dataset.from_arrays(np.arange(8.0), [1] * 8, n_classes=2)
    t = DecisionTree.from_dataset(ds)
    base = log_marginal_likelihood(t, U2)
    for r in range(8):
        s = log_marginal_likelihood(split_terminal(t, 0, 0, float(r)), U2)
        assert s <= base + 1e-12
        assert (s == pytest.approx(base)) == (r == 7)  # only the empty split ties


def test_posterior_values():
    np.testing.assert_allclose(terminal_class_posterior([0, 0], U2), [0.5, 0.5])
    np.testing.assert_allclose(terminal_class_posterior([3, 1], U2), [4 / 6, 2 / 6])
    np.testing.assert_allclose(terminal_class_posterior([100, 0], U2), [101 / 102, 1 / 102])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=2, max_size=6))
def test_posterior_sums_to_one(counts):
    prior = DirichletPrior.uniform(len(counts), 0.7)
    assert abs(terminal_class_posterior(counts, prior).sum() - 1) <= 1e-12


def test_prior_validation_and_broadcast():
    with pytest.raises(ValueError):
        DirichletPrior(np.array([1.0, 0.0]))
    assert DirichletPrior(np.array([2.0])).resolve(3).alpha.tolist() == [2.0, 2.0, 2.0]
    with pytest.raises(ValueError):
        DirichletPrior(np.array([1.0, 1.0])).resolve(3)


def test_log_catalan_against_binomial():
    for k in range(1, 51):
        exact = math.log(math.comb(2 * k, k) // (k + 1))
        got = log_catalan(k)
        assert abs(got - exact) <= 1e-9 * abs(exact) if k > 1 else got == 0.0


def test_log_catalan_values_and_errors():
    assert log_catalan(1) == 0.0
    assert log_catalan(3) == pytest.approx(math.log(5))
    assert math.exp(log_catalan(25)) == pytest.approx(4861946401452, rel=1e-9)
    np.testing.assert_allclose(log_catalan(np.array([2, 3])), np.log([2, 5]))
    assert log_catalan(200) == pytest.approx(float(log_catalan(np.array([200]))[0]), rel=1e-12)
    with pytest.raises(ValueError):
        log_catalan(0)


def test_log_catalan_recurrence():
    k = np.arange(1, 1001)
    lhs = log_catalan(k + 1)
    rhs = log_catalan(k) + np.log(2 * (2 * k + 1) / (k + 2))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)


def test_tree_prior_single_terminal(tiny):
    t = DecisionTree.from_dataset(tiny)
    assert log_tree_prior(t, tiny) == pytest.approx(-math.log(tiny.n - 1))


def test_tree_prior_split_ratio(tiny):
    t = DecisionTree.from_dataset(tiny)
    s = split_terminal(t, 0, 0, 2.0)
    N, m = tiny.meta[0].n_rules, tiny.m
    expect = -math.log(N * m) + log_catalan(1) - log_catalan(2)
    assert log_tree_prior(s, tiny) - log_tree_prior(t, tiny) == pytest.approx(expect)


def test_tree_prior_depends_on_split_multiset(rng):
    ds = random_dataset(rng, n=30, m=2, distinct=4)
    a = split_terminal(split_terminal(DecisionTree.from_dataset(ds), 0, 0, 1.0), 1, 1, 2.0)
    b = split_terminal(split_terminal(DecisionTree.from_dataset(ds), 0, 1, 2.0), 2, 0, 1.0)
    assert log_tree_prior(a, ds) == pytest.approx(log_tree_prior(b, ds))
    assert log_tree_prior(FrozenTree.from_tree(a), ds.meta, ds.n - 1) == pytest.approx(log_tree_prior(a, ds))


def test_random_trees_finite(rng):
    ds = random_dataset(rng, n=50, m=3, C=3)
    for _ in range(20):
        t = random_tree(ds, rng, int(rng.integers(0, 8)))
        assert np.isfinite(log_marginal_likelihood(t, DirichletPrior.uniform(3)))
        assert np.isfinite(log_tree_prior(t, ds))
