"""Reversible-jump MCMC over decision trees.

Two strategies are available for proposals that leave a terminal node with
fewer than ``p_min`` training rows:

``standard``
    the move is unavailable and a completely fresh move is drawn.
``sweeping``
    count the starving terminals of the proposed tree. None: carry on.
    Exactly one: if the move was a birth, redraw; otherwise delete the
    starving terminal together with its parent split (the sibling subtree
    moves up) and evaluate the result as a death. Two or more: redraw.

Redraws do not advance the iteration counter. After ``max_redraws``
consecutive redraws the iteration is recorded as a forced rejection.

Redrawing makes the chain sample the posterior reweighted by the
probability that a fresh draw is usable from each state. With
``on_unavailable="reject"`` every would-be redraw is a rejection instead,
which leaves the posterior restricted to usable trees exactly invariant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .likelihood import DirichletPrior, log_marginal_likelihood
from .proposals import (
    BIRTH,
    DEATH,
    KINDS,
    ChipmanPrior,
    MoveConfig,
    MoveProposal,
    MoveUnavailable,
    _chipman_delta,
    draw_move_kind,
    kind_probabilities,
    log_death_ratio,
    propose,
)
from .tree import DecisionTree, FrozenTree, check_tree, remove_terminal

__all__ = [
    "STRATEGIES",
    "SamplerConfig",
    "ChainSample",
    "ChainTrace",
    "ChainResult",
    "initial_tree",
    "handle_standard",
    "handle_sweeping",
    "run_chain",
]

STRATEGIES = ("standard", "sweeping")
PHASES = ("burn-in", "post")


@dataclass(frozen=True)
class SamplerConfig:
    """Everything that determines a chain.

    The default rule mode follows the strategy: discrete observed values for
    ``standard``, continuous range draws plus Gaussian change-rule steps for
    ``sweeping``. Set ``move.rule_mode`` to override.
    """

    move: MoveConfig = field(default_factory=MoveConfig)
    strategy: str = "sweeping"
    burn_in: int = 50_000
    post_burn_in: int = 10_000
    thin: int = 7
    seed: int | None = 0
    dirichlet: DirichletPrior = field(default_factory=lambda: DirichletPrior(np.ones(1)))
    chipman: ChipmanPrior = field(default_factory=ChipmanPrior)
    max_terminals: int | None = None
    max_redraws: int = 1000
    check_every: int = 0
    on_unavailable: str = "resample"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.burn_in < 0 or self.post_burn_in < 1 or self.thin < 1:
            raise ValueError("need burn_in >= 0, post_burn_in >= 1, thin >= 1")
        if self.max_terminals is not None and self.max_terminals < 1:
            raise ValueError("max_terminals must be >= 1")
        if self.on_unavailable not in ("resample", "reject"):
            raise ValueError("on_unavailable must be 'resample' or 'reject'")
        if self.max_redraws < 1:
            raise ValueError("max_redraws must be >= 1")

    @property
    def rule_mode(self) -> str:
        if self.move.rule_mode is not None:
            return self.move.rule_mode
        return "continuous" if self.strategy == "sweeping" else "discrete"

    @property
    def n_retained(self) -> int:
        return self.post_burn_in // self.thin


@dataclass(frozen=True)
class ChainSample:
    tree: FrozenTree
    log_lik: float
    iteration: int

    @property
    def k(self) -> int:
        return self.tree.k

    @property
    def n_nodes(self) -> int:
        return 2 * self.tree.k - 1


class ChainTrace:
    """Column store with one record per completed iteration."""

    columns = ("iteration", "phase", "log_lik", "k", "move", "accepted", "special")

    def __init__(self):
        self.iteration: list[int] = []
        self.phase: list[str] = []
        self.log_lik: list[float] = []
        self.k: list[int] = []
        self.move: list[str] = []
        self.accepted: list[bool] = []
        self.special: list[str] = []
        self.redraws: list[int] = []

    def append(self, iteration, phase, log_lik, k, move, accepted, special, redraws):
        self.iteration.append(iteration)
        self.phase.append(phase)
        self.log_lik.append(log_lik)
        self.k.append(k)
        self.move.append(move)
        self.accepted.append(accepted)
        self.special.append(special)
        self.redraws.append(redraws)

    def __len__(self):
        return len(self.iteration)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "iteration": np.array(self.iteration, dtype=np.int64),
            "phase": np.array(self.phase),
            "log_lik": np.array(self.log_lik, dtype=float),
            "k": np.array(self.k, dtype=np.int64),
            "move": np.array(self.move),
            "accepted": np.array(self.accepted, dtype=bool),
            "special": np.array(self.special),
            "redraws": np.array(self.redraws, dtype=np.int64),
        }

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for row in zip(self.iteration, self.phase, self.log_lik, self.k, self.move,
                           self.accepted, self.special):
                it, ph, ll, k, mv, acc, sp = row
                w.writerow([it, ph, repr(float(ll)), k, mv, int(acc), sp])

    @classmethod
    def from_csv(cls, path) -> "ChainTrace":
        tr = cls()
        with Path(path).open(newline="", encoding="utf-8") as fh:
            for r in csv.DictReader(fh):
                sp = r["special"]
                redraws = 0
                for tag in sp.split(";"):
                    if "=" in tag:
                        redraws = int(tag.split("=")[1])
                tr.append(int(r["iteration"]), r["phase"], float(r["log_lik"]), int(r["k"]),
                          r["move"], r["accepted"] == "1", sp, redraws)
        return tr


@dataclass
class ChainResult:
    samples: list[ChainSample]
    trace: ChainTrace
    acceptance_rate: dict[str, float]
    config: SamplerConfig
    final_tree: DecisionTree = field(repr=False)

    def node_counts(self) -> np.ndarray:
        """Total node count (splits + terminals) of each retained tree."""
        return np.array([s.n_nodes for s in self.samples])

    def split_counts(self) -> np.ndarray:
        return np.array([s.k - 1 for s in self.samples])

    def move_frequencies(self, phase: str | None = None) -> dict[str, float]:
        """Realised frequency of each completed move kind."""
        a = self.trace.arrays()
        sel = np.ones(len(self.trace), bool) if phase is None else a["phase"] == phase
        mv = a["move"][sel]
        done = mv[mv != "none"]
        return {kd: float(np.mean(done == kd)) if done.size else 0.0 for kd in KINDS}


def initial_tree(ds: Dataset) -> DecisionTree:
    """Single terminal holding every training row."""
    return DecisionTree.from_dataset(ds)


def handle_standard(tree: DecisionTree, proposal: MoveProposal, p_min: int) -> MoveProposal | None:
    """Pass ``proposal`` on, or ``None`` when it is unavailable (a terminal
    would hold fewer than ``p_min`` rows)."""
    if proposal.kind == DEATH:
        return proposal
    if proposal.tree.min_partition() < p_min:
        return None
    return proposal


def handle_sweeping(tree: DecisionTree, proposal: MoveProposal, p_min: int, cfg: MoveConfig,
                    max_terminals: int, m: int, chipman: ChipmanPrior | None = None) -> MoveProposal | None:
    """Apply the sweeping cases; ``None`` means redraw."""
    if proposal.kind == DEATH:
        return proposal
    new = proposal.tree
    starving = [i for i, nd in new.nodes.items() if nd.left < 0 and nd.idx.size < p_min]
    if not starving:
        return proposal
    if len(starving) > 1 or proposal.kind == BIRTH:
        return None
    swept = remove_terminal(new, starving[0])
    k = tree.k
    b_km1 = kind_probabilities(cfg, k - 1, max_terminals, m)[0]
    d_k = kind_probabilities(cfg, k, max_terminals, m)[1]
    log_R = log_death_ratio(k, len(new.prunable()), b_km1, d_k) + _chipman_delta(tree, swept, chipman)
    return MoveProposal(proposal.kind, proposal.node, proposal.var, proposal.rule, log_R, swept, swept=True)


def run_chain(ds: Dataset, cfg: SamplerConfig, callback=None) -> ChainResult:
    """Run one chain from the single-terminal tree.

    Every ``thin``-th post-burn-in state is kept as a :class:`ChainSample`.
    ``callback(iteration, tree, log_lik)`` is called after each iteration
    when given.
    """
    p_min = cfg.move.p_min
    if p_min >= ds.n:
        raise ValueError(f"p_min={p_min} must be smaller than n={ds.n}")
    meta, m = ds.meta, ds.m
    K = cfg.max_terminals if cfg.max_terminals is not None else max(ds.n - 1, 1)
    move_cfg = replace(cfg.move, rule_mode=cfg.rule_mode)
    sigma = move_cfg.sigmas(meta)
    prior = cfg.dirichlet.resolve(ds.n_classes)
    chipman = cfg.chipman if cfg.chipman.enabled else None
    sweeping = cfg.strategy == "sweeping"
    redraw_tag = "resampled" if sweeping else "unavailable"
    max_redraws = 1 if cfg.on_unavailable == "reject" else cfg.max_redraws
    rng = np.random.default_rng(cfg.seed)

    tree = initial_tree(ds)
    loglik = log_marginal_likelihood(tree, prior)
    frozen: FrozenTree | None = None
    samples: list[ChainSample] = []
    trace = ChainTrace()
    n_acc = {ph: 0 for ph in PHASES}
    n_it = {ph: 0 for ph in PHASES}

    total = cfg.burn_in + cfg.post_burn_in
    for it in range(total):
        phase = PHASES[0] if it < cfg.burn_in else PHASES[1]
        redraws = 0
        prop = None
        k = tree.k
        while True:
            kind = draw_move_kind(move_cfg, rng, k, K, m)
            try:
                prop = propose(kind, tree, meta, move_cfg, rng, max_terminals=K, chipman=chipman, sigma=sigma)
            except MoveUnavailable:
                prop = None
            if prop is not None:
                if sweeping:
                    prop = handle_sweeping(tree, prop, p_min, move_cfg, K, m, chipman)
                else:
                    prop = handle_standard(tree, prop, p_min)
            if prop is not None:
                break
            redraws += 1
            if redraws >= max_redraws:
                break

        tags = [f"{redraw_tag}={redraws}"] if redraws else []
        if prop is None:
            accepted = False
            move = "none"
            tags.append("forced")
        else:
            move = prop.kind
            if prop.swept:
                tags.append("swept")
            new_ll = log_marginal_likelihood(prop.tree, prior)
            log_a = new_ll - loglik + prop.log_R
            accepted = log_a >= 0 or math.log(rng.random()) < log_a
            if accepted:
                tree, loglik, frozen = prop.tree, new_ll, None

        n_it[phase] += 1
        n_acc[phase] += accepted
        trace.append(it, phase, loglik, tree.k, move, accepted, ";".join(tags), redraws)

        if cfg.check_every and it % cfg.check_every == 0:
            check_tree(tree)
            fresh = log_marginal_likelihood(tree.terminal_counts(), prior)
            if not math.isclose(fresh, loglik, rel_tol=0, abs_tol=1e-9):
                raise AssertionError(f"iteration {it}: cached log-likelihood {loglik} != {fresh}")

        if phase == PHASES[1] and (it - cfg.burn_in + 1) % cfg.thin == 0:
            if frozen is None:
                frozen = FrozenTree.from_tree(tree)
            samples.append(ChainSample(frozen, loglik, it))
        if callback is not None:
            callback(it, tree, loglik)

    rates = {ph: (n_acc[ph] / n_it[ph] if n_it[ph] else float("nan")) for ph in PHASES}
    return ChainResult(samples, trace, rates, cfg, tree)
