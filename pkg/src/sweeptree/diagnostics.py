"""Move-frequency emulator and chain-trace summaries.

The emulator is state-free: every drawn birth or change is marked
unavailable with a fixed probability, independently of any tree. It shows
how redrawing unavailable moves shifts the realised move frequencies away
from the nominal ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sampler import PHASES, ChainTrace

__all__ = [
    "EmulatorConfig",
    "EmulatorResult",
    "emulate_moves",
    "emulator_oracle",
    "TraceSummary",
    "summarize_trace",
]

EMULATED = ("birth", "death", "change")


@dataclass(frozen=True)
class EmulatorConfig:
    """Nominal move probabilities and unavailable-move rates.

    ``p_bu`` and ``p_cu`` are absolute per-draw probabilities: a draw is an
    available birth with probability ``p_b - p_bu``. In sweeping mode a
    fraction ``case3_fraction`` of the unavailable changes is redrawn and
    the rest turn into deaths.
    """

    p_b: float = 0.2
    p_d: float = 0.2
    p_c: float = 0.6
    p_bu: float = 0.0
    p_cu: float = 0.0
    case3_fraction: float = 0.1
    mode: str = "standard"
    trials: int = 1_000_000
    seed: int | None = 0

    def __post_init__(self):
        p = np.array([self.p_b, self.p_d, self.p_c])
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"p_b + p_d + p_c must be 1 with non-negative terms, got {p.tolist()}")
        if not 0 <= self.p_bu <= self.p_b:
            raise ValueError("need 0 <= p_bu <= p_b")
        if not 0 <= self.p_cu <= self.p_c:
            raise ValueError("need 0 <= p_cu <= p_c")
        if not 0 <= self.case3_fraction <= 1:
            raise ValueError("case3_fraction must lie in [0, 1]")
        if self.mode not in ("standard", "sweeping"):
            raise ValueError("mode must be 'standard' or 'sweeping'")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.redraw_probability >= 1:
            raise ValueError("every draw would be redrawn")

    @property
    def redraw_probability(self) -> float:
        if self.mode == "standard":
            return self.p_bu + self.p_cu
        return self.p_bu + self.p_cu * self.case3_fraction


@dataclass(frozen=True)
class EmulatorResult:
    config: EmulatorConfig
    counts: dict[str, int]
    draws: int

    @property
    def frequencies(self) -> dict[str, float]:
        t = self.config.trials
        return {kd: self.counts[kd] / t for kd in EMULATED}

    @property
    def nominal(self) -> dict[str, float]:
        c = self.config
        return dict(zip(EMULATED, (c.p_b, c.p_d, c.p_c)))

    def to_csv(self, path) -> None:
        oracle = emulator_oracle(self.config)
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["move", "nominal", "realized", "expected"])
            for kd in EMULATED:
                w.writerow([kd, repr(self.nominal[kd]), repr(self.frequencies[kd]), repr(oracle[kd])])


def emulator_oracle(cfg: EmulatorConfig) -> dict[str, float]:
    """Closed-form limit of the realised frequencies."""
    z = 1.0 - cfg.redraw_probability
    birth = (cfg.p_b - cfg.p_bu) / z
    if cfg.mode == "standard":
        death = cfg.p_d / z
    else:
        death = (cfg.p_d + cfg.p_cu * (1 - cfg.case3_fraction)) / z
    return {"birth": birth, "death": death, "change": 1.0 - birth - death}


def emulate_moves(cfg: EmulatorConfig) -> EmulatorResult:
    """Monte Carlo over ``cfg.trials`` completed moves.

    All pending trials draw together each round; trials whose draw was
    redrawn stay pending for the next round.
    """
    rng = np.random.default_rng(cfg.seed)
    # outcome cut points on [0, 1): available birth, unavailable birth, death,
    # available change, unavailable change
    edges = np.cumsum([cfg.p_b - cfg.p_bu, cfg.p_bu, cfg.p_d, cfg.p_c - cfg.p_cu])
    counts = dict.fromkeys(EMULATED, 0)
    pending = cfg.trials
    draws = 0
    while pending:
        u = rng.random(pending)
        draws += pending
        cat = np.searchsorted(edges, u, side="right")
        n_cat = np.bincount(cat, minlength=5)
        counts["birth"] += int(n_cat[0])
        counts["death"] += int(n_cat[2])
        counts["change"] += int(n_cat[3])
        redo = int(n_cat[1])
        if cfg.mode == "standard":
            redo += int(n_cat[4])
        else:
            resample = int(rng.binomial(n_cat[4], cfg.case3_fraction)) if n_cat[4] else 0
            counts["death"] += int(n_cat[4]) - resample
            redo += resample
        pending = redo
    return EmulatorResult(cfg, counts, draws)


# -- trace summaries ----------------------------------------------------------


@dataclass
class TraceSummary:
    iteration: np.ndarray
    phase: np.ndarray
    log_lik: np.ndarray
    k: np.ndarray
    k_histogram: dict[str, dict[int, float]]
    acceptance: dict[str, float]

    def series_csv(self, path) -> None:
        """Columns ``iteration, phase, log_lik, k``."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "phase", "log_lik", "k"])
            for row in zip(self.iteration, self.phase, self.log_lik, self.k):
                w.writerow([int(row[0]), row[1], repr(float(row[2])), int(row[3])])

    def histogram_csv(self, path) -> None:
        """Columns ``phase, k, n_nodes, mass``."""
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phase", "k", "n_nodes", "mass"])
            for ph, hist in self.k_histogram.items():
                for k, mass in hist.items():
                    w.writerow([ph, k, 2 * k - 1, repr(mass)])


def summarize_trace(trace: ChainTrace) -> TraceSummary:
    """Series, normalised tree-size histograms and acceptance per phase."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    a = trace.arrays()
    hist, acc = {}, {}
    for ph in PHASES:
        sel = a["phase"] == ph
        if not sel.any():
            continue
        ks, n = np.unique(a["k"][sel], return_counts=True)
        hist[ph] = {int(k): float(c / sel.sum()) for k, c in zip(ks, n)}
        acc[ph] = float(a["accepted"][sel].mean())
    return TraceSummary(a["iteration"], a["phase"], a["log_lik"], a["k"], hist, acc)
