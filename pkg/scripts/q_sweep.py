"""Accuracy against process speed when the sink tunes zeta with a wrong q.

Writes results/q_sweep.csv: a perfect-knowledge block followed by one block per
assumed q_hat (default 0.0002 and 0.0042), each with the round-robin baseline.
"""
from _common import parse, run

from cowu import tableio

args = parse(__doc__.splitlines()[0])
out = args.out_dir / "q_sweep.csv"
run("q-sweep", "--out", str(out))

_, rows = tableio.from_csv(out.read_text())
print(f"wrote {out}")
print(f"{'q':>8} {'q_hat':>8} {'zeta':>5} {'cowu':>8} {'rr':>8}")
for r in rows:
    print(f"{r['q']:8.4f} {r['q_hat']:8.4f} {r['zeta_opt']:5d} {r['gamma_cowu']:8.4f} {r['gamma_round_robin']:8.4f}")
