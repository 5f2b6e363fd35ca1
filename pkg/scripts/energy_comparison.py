"""Energy per round: CoWu at the calibrated persistence probability vs round-robin.

Calibrates p so the expected CoWu energy hits the 4.50 mJ target, then
simulates both schemes. Writes results/calibrate_p.csv and results/energy.csv.
"""
from _common import parse, run

from cowu import tableio

args = parse(__doc__.splitlines()[0])
cal = args.out_dir / "calibrate_p.csv"
run("calibrate-p", "--rounds", str(args.rounds), "--seed", str(args.seed), "--out", str(cal))
_, rows = tableio.from_csv(cal.read_text())
p = next(r["p"] for r in rows if r["selected"])

out = args.out_dir / "energy.csv"
run("energy", "--p", repr(p), "--rounds", str(args.rounds), "--seed", str(args.seed), "--out", str(out))
_, rows = tableio.from_csv(out.read_text())
rr, cowu = rows
print(f"calibrated p = {p:.6f}")
print(f"round-robin {rr['mean_energy_mJ']:.3f} mJ, CoWu {cowu['mean_energy_mJ']:.3f} +- {cowu['ci_mJ']:.3f} mJ "
      f"(expected {cowu['expected_energy_mJ']:.3f}), saving {1 - cowu['mean_energy_mJ'] / rr['mean_energy_mJ']:.1%}")
