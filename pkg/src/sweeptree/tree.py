"""Binary decision trees over a fixed training set.

A :class:`DecisionTree` is bound to the training matrix it was grown on and
keeps, for every node, the indices of the training rows that reach it. Split
predicates are ``x[var] <= rule`` (left) versus ``x[var] > rule`` (right).

Mutating operations come in two flavours: the module-level functions
(:func:`split_terminal`, :func:`prune_split`, ...) return a modified copy and
leave their argument untouched, while the underscore methods on the class
mutate in place and are meant to be applied to a scratch copy.

Retained MCMC states are converted to :class:`FrozenTree`, a compact
array form that no longer references the training data and is what gets
serialized and used for prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "TreeError",
    "Node",
    "DecisionTree",
    "FrozenTree",
    "TreeStats",
    "PartitionBounds",
    "route",
    "split_terminal",
    "prune_split",
    "change_split",
    "remove_terminal",
    "tree_stats",
    "min_partition_count",
    "partition_bounds",
    "check_tree",
    "write_trees",
    "read_trees",
]


class TreeError(ValueError):
    """Structural invariant violated or operation not applicable."""


class Node:
    __slots__ = ("parent", "idx", "counts", "var", "rule", "left", "right")

    def __init__(self, parent, idx, counts, var=-1, rule=np.nan, left=-1, right=-1):
        self.parent = parent
        self.idx = idx
        self.counts = counts
        self.var = var
        self.rule = rule
        self.left = left
        self.right = right

    @property
    def is_terminal(self) -> bool:
        return self.left < 0

    @property
    def size(self) -> int:
        return int(self.idx.size)

    def copy(self) -> "Node":
        return Node(self.parent, self.idx, self.counts, self.var, self.rule, self.left, self.right)

    def __repr__(self):
        if self.is_terminal:
            return f"Node(terminal, n={self.size}, counts={self.counts.tolist()})"
        return f"Node(split x{self.var} <= {self.rule:.4g}, n={self.size})"


@dataclass(frozen=True)
class TreeStats:
    k: int
    n_prunable: int  # splitting nodes whose children are both terminal
    depth: dict

    @property
    def n_splits(self) -> int:
        return self.k - 1

    @property
    def n_nodes(self) -> int:
        return 2 * self.k - 1


class DecisionTree:
    """Decision tree bound to a training set.

    Parameters
    ----------
    X : (n, m) array
        Training features.
    y : (n,) int array
        Class indices, **0-based**.
    n_classes : int
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, n_classes: int):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        idx = np.arange(X.shape[0])
        self.nodes = {0: Node(-1, idx, self._count(idx))}
        self.root = 0
        self._next_id = 1
        self.assignment = np.zeros(X.shape[0], dtype=np.int64)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_dataset(cls, ds) -> "DecisionTree":
        return cls(ds.features, ds.labels - 1, ds.n_classes)

    def _count(self, idx) -> np.ndarray:
        return np.bincount(self.y[idx], minlength=self.n_classes)

    def copy(self) -> "DecisionTree":
        new = DecisionTree.__new__(DecisionTree)
        new.X, new.y, new.n_classes = self.X, self.y, self.n_classes
        new.nodes = {i: nd.copy() for i, nd in self.nodes.items()}
        new.root = self.root
        new._next_id = self._next_id
        new.assignment = self.assignment.copy()
        return new

    # -- queries --------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    def terminals(self) -> list[int]:
        return [i for i, nd in self.nodes.items() if nd.left < 0]

    def splits(self) -> list[int]:
        return [i for i, nd in self.nodes.items() if nd.left >= 0]

    def prunable(self) -> list[int]:
        nodes = self.nodes
        return [
            i for i, nd in nodes.items()
            if nd.left >= 0 and nodes[nd.left].left < 0 and nodes[nd.right].left < 0
        ]

    @property
    def k(self) -> int:
        return sum(1 for nd in self.nodes.values() if nd.left < 0)

    def depth(self, nid: int) -> int:
        d = 0
        while self.nodes[nid].parent >= 0:
            nid = self.nodes[nid].parent
            d += 1
        return d

    def terminal_counts(self) -> np.ndarray:
        """(k, C) class-count matrix of the terminal nodes."""
        return np.array([nd.counts for nd in self.nodes.values() if nd.left < 0])

    def split_vars(self) -> list[int]:
        return [nd.var for nd in self.nodes.values() if nd.left >= 0]

    def min_partition(self) -> int:
        return min(nd.idx.size for nd in self.nodes.values() if nd.left < 0)

    def preorder(self, start: int | None = None) -> list[int]:
        out, stack = [], [self.root if start is None else start]
        while stack:
            i = stack.pop()
            out.append(i)
            nd = self.nodes[i]
            if nd.left >= 0:
                stack.append(nd.right)
                stack.append(nd.left)
        return out

    def structure_key(self) -> tuple:
        """Hashable description of topology, variables and rules (preorder)."""
        key = []
        for i in self.preorder():
            nd = self.nodes[i]
            key.append(None if nd.left < 0 else (nd.var, float(nd.rule)))
        return tuple(key)

    # -- in-place mutations ---------------------------------------------------

    def _reroute(self, nid: int, idx: np.ndarray) -> None:
        """Send rows ``idx`` into the subtree at ``nid`` and refresh counts."""
        X = self.X
        stack = [(nid, idx)]
        while stack:
            i, rows = stack.pop()
            nd = self.nodes[i]
            nd.idx = rows
            nd.counts = self._count(rows)
            if nd.left < 0:
                self.assignment[rows] = i
            else:
                go_left = X[rows, nd.var] <= nd.rule
                stack.append((nd.right, rows[~go_left]))
                stack.append((nd.left, rows[go_left]))

    def _split(self, nid: int, var: int, rule: float) -> tuple[int, int]:
        nd = self.nodes.get(nid)
        if nd is None or nd.left >= 0:
            raise TreeError(f"node {nid} is not a terminal node")
        left, right = self._next_id, self._next_id + 1
        self._next_id += 2
        go_left = self.X[nd.idx, var] <= rule
        li, ri = nd.idx[go_left], nd.idx[~go_left]
        self.nodes[left] = Node(nid, li, self._count(li))
        self.nodes[right] = Node(nid, ri, self._count(ri))
        nd.var, nd.rule, nd.left, nd.right = int(var), float(rule), left, right
        self.assignment[li] = left
        self.assignment[ri] = right
        return left, right

    def _prune(self, nid: int) -> None:
        nd = self.nodes.get(nid)
        if nd is None or nd.left < 0:
            raise TreeError(f"node {nid} is not a splitting node")
        if self.nodes[nd.left].left >= 0 or self.nodes[nd.right].left >= 0:
            raise TreeError(f"node {nid} has a non-terminal child and cannot be pruned")
        del self.nodes[nd.left], self.nodes[nd.right]
        nd.var, nd.rule, nd.left, nd.right = -1, np.nan, -1, -1
        self.assignment[nd.idx] = nid

    def _change(self, nid: int, var: int, rule: float) -> None:
        nd = self.nodes.get(nid)
        if nd is None or nd.left < 0:
            raise TreeError(f"node {nid} is not a splitting node")
        nd.var, nd.rule = int(var), float(rule)
        self._reroute(nid, nd.idx)

    def _remove_terminal(self, leaf: int) -> None:
        """Delete terminal ``leaf`` and its parent split; the sibling subtree
        takes the parent's place and absorbs the parent's rows."""
        nd = self.nodes.get(leaf)
        if nd is None or nd.left >= 0:
            raise TreeError(f"node {leaf} is not a terminal node")
        pid = nd.parent
        if pid < 0:
            raise TreeError("cannot remove the root")
        parent = self.nodes[pid]
        sib = parent.right if parent.left == leaf else parent.left
        gp = parent.parent
        sib_node = self.nodes[sib]
        sib_node.parent = gp
        if gp < 0:
            self.root = sib
        else:
            g = self.nodes[gp]
            if g.left == pid:
                g.left = sib
            else:
                g.right = sib
        rows = parent.idx
        del self.nodes[leaf], self.nodes[pid]
        self._reroute(sib, rows)

    def __repr__(self):
        return f"DecisionTree(k={self.k}, n={self.n})"

    def pretty(self, names=None) -> str:
        lines = []

        def walk(i, indent):
            nd = self.nodes[i]
            pad = "  " * indent
            if nd.left < 0:
                lines.append(f"{pad}leaf[{i}] counts={nd.counts.tolist()}")
            else:
                nm = names[nd.var] if names else f"x{nd.var + 1}"
                lines.append(f"{pad}[{i}] {nm} <= {nd.rule:.6g}  (n={nd.size})")
                walk(nd.left, indent + 1)
                walk(nd.right, indent + 1)

        walk(self.root, 0)
        return "\n".join(lines)


# -- functional API -----------------------------------------------------------


def split_terminal(tree: DecisionTree, nid: int, var: int, rule: float) -> DecisionTree:
    """Copy of ``tree`` with terminal ``nid`` split on ``x[var] <= rule``."""
    new = tree.copy()
    new._split(nid, var, rule)
    return new


def prune_split(tree: DecisionTree, nid: int) -> DecisionTree:
    """Copy of ``tree`` with splitting node ``nid`` (both children terminal)
    merged back into one terminal."""
    new = tree.copy()
    new._prune(nid)
    return new


def change_split(tree: DecisionTree, nid: int, var: int, rule: float) -> DecisionTree:
    """Copy of ``tree`` with the question at splitting node ``nid`` replaced;
    all rows below ``nid`` are re-routed."""
    new = tree.copy()
    new._change(nid, var, rule)
    return new


def remove_terminal(tree: DecisionTree, leaf: int) -> DecisionTree:
    new = tree.copy()
    new._remove_terminal(leaf)
    return new


def route(tree, x) -> int:
    """Id of the terminal node reached by feature vector ``x``."""
    x = np.asarray(x, dtype=float)
    if isinstance(tree, FrozenTree):
        return int(tree.apply(x[None, :])[0])
    nodes = tree.nodes
    if x.shape[0] != tree.m:
        raise TreeError(f"expected {tree.m} features, got {x.shape[0]}")
    i, seen = tree.root, 0
    while True:
        nd = nodes.get(i)
        if nd is None:
            raise TreeError(f"dangling child reference {i}")
        if nd.left < 0:
            return i
        i = nd.left if x[nd.var] <= nd.rule else nd.right
        seen += 1
        if seen > len(nodes):
            raise TreeError("cycle detected while routing")


def tree_stats(tree) -> TreeStats:
    if isinstance(tree, FrozenTree):
        return tree.stats()
    depth = {}
    for i in tree.preorder():
        p = tree.nodes[i].parent
        depth[i] = 0 if p < 0 else depth[p] + 1
    return TreeStats(tree.k, len(tree.prunable()), depth)


def min_partition_count(tree: DecisionTree) -> int:
    """Smallest number of training rows in any terminal node."""
    return tree.min_partition()


@dataclass(frozen=True)
class PartitionBounds:
    """Observed per-feature minima / maxima of the rows reaching each node.

    Rows are NaN for nodes that receive no data.
    """

    node_ids: tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray

    def of(self, nid: int) -> tuple[np.ndarray, np.ndarray]:
        r = self.node_ids.index(nid)
        return self.lo[r], self.hi[r]


def partition_bounds(tree: DecisionTree) -> PartitionBounds:
    ids = tuple(tree.preorder())
    lo = np.full((len(ids), tree.m), np.nan)
    hi = np.full((len(ids), tree.m), np.nan)
    for r, i in enumerate(ids):
        rows = tree.nodes[i].idx
        if rows.size:
            sub = tree.X[rows]
            lo[r] = sub.min(axis=0)
            hi[r] = sub.max(axis=0)
    return PartitionBounds(ids, lo, hi)


def check_tree(tree: DecisionTree) -> None:
    """Full from-scratch consistency check; raises :class:`TreeError`."""
    nodes = tree.nodes
    order = tree.preorder()
    if sorted(order) != sorted(nodes):
        raise TreeError("unreachable or duplicated nodes")
    for i in order:
        nd = nodes[i]
        if (nd.left < 0) != (nd.right < 0):
            raise TreeError(f"node {i} has exactly one child")
        if nd.left >= 0:
            for c in (nd.left, nd.right):
                if nodes[c].parent != i:
                    raise TreeError(f"child {c} does not point back to {i}")
    if tree.k != len(tree.splits()) + 1:
        raise TreeError("k != splits + 1")
    fresh = np.asarray(order, dtype=np.int64)[FrozenTree.from_tree(tree).apply(tree.X)]
    if not np.array_equal(fresh, tree.assignment):
        raise TreeError("incremental assignment disagrees with routing")
    for i in tree.terminals():
        rows = np.flatnonzero(fresh == i)
        if not np.array_equal(np.sort(nodes[i].idx), rows):
            raise TreeError(f"rows stored at terminal {i} are stale")
        if not np.array_equal(nodes[i].counts, tree._count(rows)):
            raise TreeError(f"counts at terminal {i} are stale")
    total = tree.terminal_counts().sum(axis=0)
    if not np.array_equal(total, np.bincount(tree.y, minlength=tree.n_classes)):
        raise TreeError("terminal counts do not sum to the class totals")


# -- frozen form --------------------------------------------------------------


class FrozenTree:
    """Immutable array form of a tree: preorder node arrays plus class counts.

    ``var[i] < 0`` marks a terminal node.
    """

    __slots__ = ("var", "rule", "left", "right", "parent", "counts")

    def __init__(self, var, rule, left, right, parent, counts):
        self.var = np.asarray(var, dtype=np.int64)
        self.rule = np.asarray(rule, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        for a in (self.var, self.rule, self.left, self.right, self.parent, self.counts):
            a.setflags(write=False)

    @classmethod
    def from_tree(cls, tree: DecisionTree) -> "FrozenTree":
        order = tree.preorder()
        pos = {nid: p for p, nid in enumerate(order)}
        nodes = [tree.nodes[i] for i in order]
        return cls(
            [nd.var for nd in nodes],
            [nd.rule for nd in nodes],
            [pos[nd.left] if nd.left >= 0 else -1 for nd in nodes],
            [pos[nd.right] if nd.right >= 0 else -1 for nd in nodes],
            [pos[nd.parent] if nd.parent >= 0 else -1 for nd in nodes],
            np.array([nd.counts for nd in nodes]),
        )

    @property
    def n_nodes(self) -> int:
        return int(self.var.size)

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.var < 0))

    def terminal_ids(self) -> np.ndarray:
        return np.flatnonzero(self.var < 0)

    def terminal_counts(self) -> np.ndarray:
        return self.counts[self.var < 0]

    def apply(self, X) -> np.ndarray:
        """Terminal (preorder) index reached by each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cur = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            v = self.var[cur]
            rows = np.flatnonzero(v >= 0)
            if rows.size == 0:
                return cur
            at = cur[rows]
            go_left = X[rows, v[rows]] <= self.rule[at]
            cur[rows] = np.where(go_left, self.left[at], self.right[at])

    def stats(self) -> TreeStats:
        depth = {}
        for i in range(self.n_nodes):
            p = int(self.parent[i])
            depth[i] = 0 if p < 0 else depth[p] + 1
        split = self.var >= 0
        both = split.copy()
        both[split] = (self.var[self.left[split]] < 0) & (self.var[self.right[split]] < 0)
        return TreeStats(self.k, int(np.count_nonzero(both)), depth)

    def structure_key(self) -> tuple:
        return tuple(None if v < 0 else (int(v), float(r)) for v, r in zip(self.var, self.rule))

    def to_records(self) -> list[dict]:
        recs = []
        for i in range(self.n_nodes):
            parent = int(self.parent[i]) if self.parent[i] >= 0 else None
            if self.var[i] < 0:
                recs.append({"id": i, "kind": "terminal", "parent": parent,
                             "counts": self.counts[i].tolist()})
            else:
                recs.append({"id": i, "kind": "split", "parent": parent,
                             "var": int(self.var[i]), "rule": float(self.rule[i])})
        return recs

    @classmethod
    def from_records(cls, recs) -> "FrozenTree":
        recs = sorted(recs, key=lambda r: r["id"])
        n = len(recs)
        if [r["id"] for r in recs] != list(range(n)):
            raise TreeError("node ids must be 0..n-1 in preorder")
        var = np.full(n, -1)
        rule = np.full(n, np.nan)
        parent = np.array([-1 if r["parent"] is None else r["parent"] for r in recs])
        left = np.full(n, -1)
        right = np.full(n, -1)
        C = next(len(r["counts"]) for r in recs if r["kind"] == "terminal")
        counts = np.zeros((n, C), dtype=np.int64)
        for r in recs:
            i = r["id"]
            if r["kind"] == "split":
                var[i], rule[i] = r["var"], r["rule"]
            elif r["kind"] == "terminal":
                counts[i] = r["counts"]
            else:
                raise TreeError(f"unknown node kind {r['kind']!r}")
        for i in range(1, n):
            p = parent[i]
            if p < 0 or var[p] < 0:
                raise TreeError(f"node {i} has an invalid parent")
            if left[p] < 0:
                left[p] = i
            elif right[p] < 0:
                right[p] = i
            else:
                raise TreeError(f"node {p} has more than two children")
        if np.any((var >= 0) & (right < 0)):
            raise TreeError("splitting node with a missing child")
        # splits hold the merged counts of their subtree
        for i in range(n - 1, -1, -1):
            if var[i] >= 0:
                counts[i] = counts[left[i]] + counts[right[i]]
        return cls(var, rule, left, right, parent, counts)

    def __eq__(self, other):
        if not isinstance(other, FrozenTree):
            return NotImplemented
        return (
            np.array_equal(self.var, other.var)
            and np.array_equal(self.rule, other.rule, equal_nan=True)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None

    def __repr__(self):
        return f"FrozenTree(k={self.k})"


def write_trees(path, samples) -> None:
    """Write frozen trees as JSON lines.

    ``samples`` is an iterable of ``(FrozenTree, extra_dict)``; each tree is
    preceded by a ``{"record": "sample", ...}`` line carrying ``extra_dict``
    and followed by its node records in preorder.
    """
    with Path(path).open("w", encoding="utf-8") as fh:
        for s, (tree, extra) in enumerate(samples):
            fh.write(json.dumps({"record": "sample", "sample": s, **extra}) + "\n")
            for rec in tree.to_records():
                fh.write(json.dumps({"record": "node", "sample": s, **rec}) + "\n")


def read_trees(path) -> list[tuple[FrozenTree, dict]]:
    out: list[tuple[FrozenTree, dict]] = []
    header, recs = None, []

    def flush():
        if header is not None:
            out.append((FrozenTree.from_records(recs), header))

    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("record")
            if kind == "sample":
                flush()
                rec.pop("sample")
                header, recs = rec, []
            else:
                rec.pop("sample")
                recs.append(rec)
    flush()
    return out
