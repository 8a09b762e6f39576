"""Command line: ``python -m sweeptree {gen-xor3,run,cv,emulate}``.

Exit codes: 0 success, 2 usage error, 3 data error. Every command writes a
flat ``key = value`` manifest next to its outputs with the resolved
configuration, input digests and output paths.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import cross_validate, write_cv_csv
from .dataset import DataError, generate_xor3, load_csv, make_folds, write_csv
from .diagnostics import EmulatorConfig, emulate_moves, emulator_oracle
from .likelihood import DirichletPrior
from .proposals import ChipmanPrior, MoveConfig
from .sampler import SamplerConfig, run_chain
from .tree import write_trees

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3


class UsageError(Exception):
    pass


# -- argument types -----------------------------------------------------------


def _int_at_least(lo):
    def conv(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return conv


def _prob(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _positive(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _moves(s):
    try:
        p = [float(t) for t in s.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected four comma-separated numbers, got {s!r}") from None
    if len(p) != 4:
        raise argparse.ArgumentTypeError(f"expected four probabilities (birth,death,change-split,change-rule), got {len(p)}")
    if any(v < 0 for v in p) or abs(sum(p) - 1) > 1e-9:
        raise argparse.ArgumentTypeError(f"probabilities must be >= 0 and sum to 1, got sum {sum(p):g}")
    return tuple(p)


def _chipman(s):
    try:
        g, d = (float(t) for t in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected gamma,delta, got {s!r}") from None
    if not (0 < g <= 1 and d >= 0):
        raise argparse.ArgumentTypeError("need 0 < gamma <= 1 and delta >= 0")
    return g, d


# -- manifest -----------------------------------------------------------------


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _flatten(prefix, obj, out):
    if dataclasses.is_dataclass(obj):
        for f in dataclasses.fields(obj):
            _flatten(f"{prefix}.{f.name}" if prefix else f.name, getattr(obj, f.name), out)
    elif isinstance(obj, np.ndarray):
        out[prefix] = ",".join(repr(float(v)) for v in obj)
    elif isinstance(obj, (tuple, list)):
        out[prefix] = ",".join(repr(v) for v in obj)
    else:
        out[prefix] = repr(obj) if isinstance(obj, float) else str(obj)


def write_manifest(path, command: str, config=None, inputs=(), outputs=(), extra=None) -> None:
    rows = {"tool": "sweeptree", "version": __version__, "command": command}
    if config is not None:
        _flatten("config", config, rows)
    for p in inputs:
        rows[f"input.{Path(p).name}.sha256"] = _sha256(p)
    for p in outputs:
        rows[f"output.{Path(p).name}"] = str(p)
    for k, v in (extra or {}).items():
        rows[k] = v if isinstance(v, str) else repr(v)
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in rows.items()), encoding="utf-8")


# -- commands -----------------------------------------------------------------


def cmd_gen_xor3(args) -> int:
    ds = generate_xor3(args.n, seed=args.seed, noise_sd=args.noise_sd)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out, label_name="y")
    write_manifest(out.with_name(out.name + ".manifest"), "gen-xor3", outputs=[out],
                   extra={"n": args.n, "seed": args.seed, "noise_sd": args.noise_sd,
                          "output.sha256": _sha256(out)})
    print(f"wrote {ds.n} rows to {out}")
    return EXIT_OK


def _sampler_config(args, strategy) -> SamplerConfig:
    pb, pd, pcs, pcr = args.moves
    move = MoveConfig(pb, pd, pcs, pcr, p_min=args.pmin, rule_mode=args.rule_mode, sigma_frac=args.sigma_frac)
    chip = ChipmanPrior(*args.chipman, enabled=True) if args.chipman else ChipmanPrior()
    return SamplerConfig(
        move=move, strategy=strategy, burn_in=args.burnin, post_burn_in=args.post, thin=args.thin,
        seed=args.seed, dirichlet=DirichletPrior(np.array([args.alpha])), chipman=chip,
        max_terminals=args.max_terminals,
    )


def _load(args):
    label = args.label
    if label is not None and label.lstrip("-").isdigit():
        label = int(label)
    return load_csv(args.data, label_column=label)


def cmd_run(args) -> int:
    ds = _load(args)
    cfg = _sampler_config(args, args.strategy)
    if cfg.move.p_min >= ds.n:
        raise UsageError(f"--pmin {cfg.move.p_min} must be smaller than the number of rows ({ds.n})")
    res = run_chain(ds, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trees, trace, summary = out / "trees.jsonl", out / "trace.csv", out / "summary.txt"
    write_trees(trees, [(s.tree, {"iteration": s.iteration, "log_lik": s.log_lik}) for s in res.samples])
    res.trace.to_csv(trace)
    nodes = res.node_counts()
    stats = {
        "retained": len(res.samples),
        "acceptance.burn-in": res.acceptance_rate["burn-in"],
        "acceptance.post": res.acceptance_rate["post"],
        "mean_nodes": float(nodes.mean()),
        "mean_splits": float(res.split_counts().mean()),
    }
    summary.write_text("".join(f"{k} = {v!r}\n" for k, v in stats.items()), encoding="utf-8")
    write_manifest(out / "manifest.txt", "run", cfg, inputs=[args.data], outputs=[trees, trace, summary])
    for k, v in stats.items():
        print(f"{k}: {v:.4g}" if isinstance(v, float) else f"{k}: {v}")
    return EXIT_OK


def cmd_cv(args) -> int:
    ds = _load(args)
    if args.pmin >= ds.n:
        raise UsageError(f"--pmin {args.pmin} must be smaller than the number of rows ({ds.n})")
    folds = make_folds(ds, args.folds, seed=args.seed, stratify=args.stratify)
    strategies = ("standard", "sweeping") if args.strategy == "both" else (args.strategy,)
    results = []
    for st in strategies:
        cfg = _sampler_config(args, st)
        r = cross_validate(ds, folds, cfg, jobs=args.jobs)
        results.append(r)
        s = r.summary()
        print(f"{st:9s} accuracy {100 * s['accuracy']:.1f} +/- {100 * s['accuracy_2sd']:.1f}  "
              f"entropy {s['entropy']:.3g} +/- {s['entropy_2sd']:.2g}  "
              f"nodes {s['mean_nodes']:.2f} +/- {s['mean_nodes_2sd']:.2f}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "cv.csv"
    write_cv_csv(results, table)
    write_manifest(out / "manifest.txt", "cv", _sampler_config(args, strategies[-1]), inputs=[args.data],
                   outputs=[table], extra={"folds": args.folds, "strategies": ",".join(strategies),
                                           "stratify": str(args.stratify)})
    return EXIT_OK


def cmd_emulate(args) -> int:
    try:
        cfg = EmulatorConfig(args.pb, args.pd, args.pc, args.pbu, args.pcu, args.case3, args.mode,
                             args.trials, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = emulate_moves(cfg)
    oracle = emulator_oracle(cfg)
    print("move     nominal  realized  expected")
    for kd, f in res.frequencies.items():
        print(f"{kd:8s} {res.nominal[kd]:7.4f}  {f:8.4f}  {oracle[kd]:8.4f}")
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table = out / "emulate.csv"
        res.to_csv(table)
        write_manifest(out / "manifest.txt", "emulate", cfg, outputs=[table])
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--label", default=None, help="class column name or 0-based index (default: last)")


def _add_chain_flags(p):
    p.add_argument("--strategy", choices=("standard", "sweeping"), default="sweeping")
    p.add_argument("--pmin", type=_int_at_least(1), default=5, help="minimum rows per terminal")
    p.add_argument("--moves", type=_moves, default=(0.1, 0.1, 0.1, 0.7),
                   help="birth,death,change-split,change-rule probabilities")
    p.add_argument("--burnin", type=_int_at_least(0), default=50_000)
    p.add_argument("--post", type=_int_at_least(1), default=10_000)
    p.add_argument("--thin", type=_int_at_least(1), default=7)
    p.add_argument("--alpha", type=_positive, default=1.0, help="symmetric Dirichlet concentration")
    p.add_argument("--sigma-frac", type=_positive, default=0.1,
                   help="change-rule step as a fraction of each feature's range")
    p.add_argument("--rule-mode", choices=("discrete", "continuous"), default=None,
                   help="rule proposal (default: discrete for standard, continuous for sweeping)")
    p.add_argument("--chipman", type=_chipman, default=None, metavar="GAMMA,DELTA",
                   help="enable the depth prior gamma*(1+depth)^-delta")
    p.add_argument("--max-terminals", type=_int_at_least(1), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sweeptree", description="Bayesian decision trees by RJ-MCMC")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-xor3", help="write a synthetic XOR3 dataset")
    p.add_argument("--n", type=_int_at_least(2), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=_positive, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_xor3)

    p = sub.add_parser("run", help="run one chain and save trees, trace and summary")
    _add_data_flags(p)
    _add_chain_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    _add_data_flags(p)
    _add_chain_flags(p)
    p.set_defaults(strategy="both")
    for a in p._actions:
        if a.dest == "strategy":
            a.choices = ("standard", "sweeping", "both")
    p.add_argument("--folds", type=_int_at_least(2), default=5)
    p.add_argument("--stratify", action="store_true", help="stratify folds by class")
    p.add_argument("--jobs", type=_int_at_least(1), default=1, help="folds run in parallel")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("emulate", help="state-free move-frequency emulator")
    p.add_argument("--pb", type=_prob, default=0.2)
    p.add_argument("--pd", type=_prob, default=0.2)
    p.add_argument("--pc", type=_prob, default=0.6)
    p.add_argument("--pbu", type=_prob, default=0.0)
    p.add_argument("--pcu", type=_prob, default=0.0)
    p.add_argument("--case3", type=_prob, default=0.1)
    p.add_argument("--mode", choices=("standard", "sweeping"), default="standard")
    p.add_argument("--trials", type=_int_at_least(1), default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_emulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        return args.func(args)
    except DataError as exc:
        print(f"sweeptree: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"sweeptree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
