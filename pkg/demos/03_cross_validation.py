"""
Five-fold comparison on the bundled UCI data
============================================

Accuracy, summed entropy and tree size for both strategies. Short chains
keep this to a couple of minutes.
"""

from pathlib import Path

from sweeptree import MoveConfig, SamplerConfig, cross_validate, load_csv, make_folds

DATA = Path(__file__).resolve().parents[1] / "data"
move = MoveConfig(0.1, 0.1, 0.1, 0.7, p_min=3)

for name, label in (("wisconsin", "y"), ("votes", "party"), ("ionosphere", "y")):
    ds = load_csv(DATA / f"{name}.csv", label_column=label)
    folds = make_folds(ds, 5, seed=0)
    print(f"{name}: n={ds.n}, m={ds.m}, classes {ds.class_names}")
    for strategy in ("standard", "sweeping"):
        cfg = SamplerConfig(move=move, strategy=strategy, burn_in=5_000, post_burn_in=1_000, thin=5, seed=0)
        s = cross_validate(ds, folds, cfg).summary()
        print(f"  {strategy:9s} accuracy {100 * s['accuracy']:5.1f} +/- {100 * s['accuracy_2sd']:4.1f}   "
              f"entropy {s['entropy']:6.2f} +/- {s['entropy_2sd']:5.2f}   "
              f"nodes {s['mean_nodes']:5.2f} +/- {s['mean_nodes_2sd']:4.2f}")
