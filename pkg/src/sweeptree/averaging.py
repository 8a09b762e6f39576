"""Bayesian model averaging over retained trees, and k-fold evaluation."""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import entr

from .dataset import DataError, Dataset, FoldSplit, make_folds
from .likelihood import DirichletPrior, terminal_class_posterior
from .sampler import SamplerConfig, run_chain

__all__ = [
    "PredictionResult",
    "predict",
    "entropy",
    "FoldResult",
    "CVResult",
    "fold_seed",
    "cross_validate",
    "write_cv_csv",
]


@dataclass(frozen=True)
class PredictionResult:
    posterior: np.ndarray  # (t, C)
    predicted: np.ndarray  # 1-based class ids
    accuracy: float
    entropy_sum: float


def entropy(posterior) -> float:
    """Summed natural-log entropy ``-sum_ij P_ij log P_ij`` with 0 log 0 = 0."""
    P = np.asarray(posterior, dtype=float)
    if np.any(P < 0):
        raise ValueError("posterior has negative entries")
    return float(entr(P).sum())


def predict(samples, prior: DirichletPrior, test: Dataset) -> PredictionResult:
    """Average the terminal class posteriors of ``samples`` over the rows of ``test``.

    Consecutive retained samples often share one frozen tree (the chain did
    not move), so each distinct tree object is evaluated once and weighted by
    its multiplicity.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("cannot predict from an empty chain")
    X = test.features
    C = test.n_classes
    prior = prior.resolve(C)
    groups: dict[int, list] = {}
    for s in samples:
        g = groups.setdefault(id(s.tree), [s.tree, 0])
        g[1] += 1
    P = np.zeros((X.shape[0], C))
    for tree, w in groups.values():
        if tree.counts.shape[1] != C:
            raise ValueError(f"tree has {tree.counts.shape[1]} classes, test set {C}")
        if np.any(tree.var >= X.shape[1]):
            raise ValueError("tree splits on a feature the test set does not have")
        leaf_post = terminal_class_posterior(tree.counts, prior)
        P += w * leaf_post[tree.apply(X)]
    P /= len(samples)
    predicted = np.argmax(P, axis=1) + 1  # argmax returns the first maximum
    acc = float(np.mean(predicted == test.labels)) if test.n else float("nan")
    return PredictionResult(P, predicted, acc, entropy(P))


# -- cross-validation ---------------------------------------------------------


@dataclass(frozen=True)
class FoldResult:
    fold: int
    seed: int
    n_train: int
    n_test: int
    accuracy: float
    entropy: float
    mean_nodes: float
    mean_splits: float
    acceptance_burn_in: float
    acceptance_post: float


@dataclass(frozen=True)
class CVResult:
    dataset: str
    strategy: str
    folds: tuple[FoldResult, ...]

    def _col(self, name) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.folds], dtype=float)

    def mean(self, name: str) -> float:
        return float(self._col(name).mean())

    def two_sigma(self, name: str) -> float:
        """Twice the sample standard deviation across folds."""
        v = self._col(name)
        return float(2 * v.std(ddof=1)) if v.size > 1 else 0.0

    @property
    def entropy_total(self) -> float:
        """Entropy summed over every held-out row of every fold."""
        return float(self._col("entropy").sum())

    def summary(self) -> dict[str, float]:
        out = {}
        for name in ("accuracy", "entropy", "mean_nodes", "mean_splits"):
            out[name] = self.mean(name)
            out[name + "_2sd"] = self.two_sigma(name)
        out["entropy_total"] = self.entropy_total
        return out


def fold_seed(seed: int | None, fold: int) -> int:
    """Seed for the chain of ``fold``, derived from the master seed."""
    ss = np.random.SeedSequence(None if seed is None else [seed, fold])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_fold(args) -> FoldResult:
    ds, train, test, cfg, fold = args
    tr, te = ds.subset(train), ds.subset(test)
    res = run_chain(tr, cfg)
    pred = predict(res.samples, cfg.dirichlet, te)
    return FoldResult(
        fold, cfg.seed, tr.n, te.n, pred.accuracy, pred.entropy_sum,
        float(res.node_counts().mean()), float(res.split_counts().mean()),
        res.acceptance_rate["burn-in"], res.acceptance_rate["post"],
    )


def _missing_class(ds: Dataset, folds: FoldSplit) -> bool:
    present = ds.class_counts() > 0
    for f in range(folds.fold_count):
        train, _ = folds.train_test(f)
        if np.any(present & (np.bincount(ds.labels[train] - 1, minlength=ds.n_classes) == 0)):
            return True
    return False


def cross_validate(ds: Dataset, folds: FoldSplit, cfg: SamplerConfig, jobs: int = 1) -> CVResult:
    """One chain per training split, evaluated on the held-out fold.

    If some training split lacks a class present in ``ds``, the folds are
    rebuilt stratified by class (same seed) and a warning is issued. Fold
    seeds depend only on ``cfg.seed`` and the fold id, so results do not
    depend on ``jobs``.
    """
    if folds.assignment.shape != (ds.n,):
        raise DataError("fold assignment does not match the dataset size")
    if _missing_class(ds, folds):
        warnings.warn("a training split is missing a class; re-stratifying folds", stacklevel=2)
        folds = make_folds(ds, folds.fold_count, seed=folds.seed, stratify=True)
        if _missing_class(ds, folds):
            raise DataError("cannot build folds in which every training split has every class")
    tasks = []
    for f in range(folds.fold_count):
        train, test = folds.train_test(f)
        tasks.append((ds, train, test, replace(cfg, seed=fold_seed(cfg.seed, f)), f))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
            results = list(ex.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]
    return CVResult(ds.name, cfg.strategy, tuple(results))


CV_COLUMNS = (
    "dataset", "strategy", "fold", "accuracy", "accuracy_2sd", "entropy", "entropy_2sd",
    "nodes", "nodes_2sd", "splits", "splits_2sd", "entropy_total",
)


def write_cv_csv(results, path) -> None:
    """Per-fold rows followed by one aggregate row (``fold = all``) per result."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CV_COLUMNS)
        for r in results:
            for f in r.folds:
                w.writerow([r.dataset, r.strategy, f.fold, repr(f.accuracy), "", repr(f.entropy), "",
                            repr(f.mean_nodes), "", repr(f.mean_splits), "", ""])
            s = r.summary()
            w.writerow([r.dataset, r.strategy, "all",
                        repr(s["accuracy"]), repr(s["accuracy_2sd"]),
                        repr(s["entropy"]), repr(s["entropy_2sd"]),
                        repr(s["mean_nodes"]), repr(s["mean_nodes_2sd"]),
                        repr(s["mean_splits"]), repr(s["mean_splits_2sd"]),
                        repr(s["entropy_total"])])
