"""
Why redrawing unavailable moves distorts the move mix
=====================================================

Nominal move probabilities are birth 0.2, death 0.2, change 0.6. When trees
get large, some drawn births and changes are unusable. Redrawing them shifts
the realised mix toward deaths.
"""

from sweeptree.diagnostics import EmulatorConfig, emulate_moves, emulator_oracle

# standard handling: unusable births (0.1) and changes (0.3) are redrawn
std = EmulatorConfig(p_bu=0.1, p_cu=0.3, mode="standard", trials=1_000_000, seed=0)
res = emulate_moves(std)
print("standard handling")
for kd, f in res.frequencies.items():
    print(f"  {kd:6s} nominal {res.nominal[kd]:.2f}  realised {f:.4f}  closed form {emulator_oracle(std)[kd]:.4f}")
print(f"  {res.draws / std.trials:.2f} draws per completed move")

# sweeping: most unusable changes turn into deaths, a tenth are redrawn
swp = EmulatorConfig(p_bu=0.07, p_cu=0.2, case3_fraction=0.1, mode="sweeping", trials=1_000_000, seed=0)
res = emulate_moves(swp)
print("sweeping")
for kd, f in res.frequencies.items():
    print(f"  {kd:6s} nominal {res.nominal[kd]:.2f}  realised {f:.4f}  closed form {emulator_oracle(swp)[kd]:.4f}")

# with nothing unusable the mix is untouched
res = emulate_moves(EmulatorConfig(trials=200_000, seed=1))
print("no unusable moves:", {k: round(v, 3) for k, v in res.frequencies.items()})
