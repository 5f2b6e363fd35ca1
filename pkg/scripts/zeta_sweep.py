"""Accuracy against wake-up lead time for the reference scenario.

Writes results/zeta_sweep.csv (analytical, upper bound, simulated with 95% CI,
round-robin) and prints the best lead time.
"""
from _common import parse, run

from cowu import tableio

args = parse(__doc__.splitlines()[0])
out = args.out_dir / "zeta_sweep.csv"
run("zeta-sweep", "--rounds", str(args.rounds), "--seed", str(args.seed), "--out", str(out))

_, rows = tableio.from_csv(out.read_text())
best = max(rows, key=lambda r: r["gamma_analytical"])
print(f"wrote {out} ({len(rows)} rows)")
print(f"best zeta = {best['zeta']}: analytical {best['gamma_analytical']:.4f}, "
      f"round-robin {best['gamma_round_robin']:.4f}")
