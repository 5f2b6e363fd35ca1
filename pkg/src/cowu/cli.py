"""Command-line front end: ``cowu {zeta-sweep,q-sweep,energy,validate,calibrate-p}``.

Exit codes: 0 success, 1 validation failure, 2 invalid config/arguments, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import tableio
from .accuracy import ConfigError, ScenarioConfig, gamma_cowu_curve, mismatch_curves, round_robin_gamma
from .energy import TARGET_COWU_MJ, EnergyModel, calibrate_p, expected_cowu_energy, round_robin_energy
from .process import RangeQuery, TransitionMatrix
from .simulator import run_campaign, run_cowu_sweep

log = logging.getLogger("cowu")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

DEFAULT_Q_GRID = tuple(round(0.0002 + 0.0004 * k, 6) for k in range(11))
DEFAULT_Q_HATS = (0.0002, 0.0042)

SCENARIO_KEYS = {"N", "M", "q", "q_hat", "range", "L", "p", "zeta_max", "matrix"}
ENERGY_KEYS = {f.name for f in fields(EnergyModel)}


@dataclass
class ExperimentSpec:
    kind: str
    scenario: ScenarioConfig
    energy: EnergyModel = field(default_factory=EnergyModel)
    rounds: int = 10_000
    seed: int = 0
    out: Path | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.kind != "validate" and self.rounds < 0:
            raise ConfigError("rounds", f"must be >= 0, got {self.rounds}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be a non-negative integer, got {self.seed}")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format", f"must be csv or json, got {self.fmt!r}")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {err}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON scenario file; flags override it")
    common.add_argument("--seed", type=int, help="base RNG seed (default 0)")
    common.add_argument("--rounds", type=int, help="Monte Carlo rounds (default 10000; 0 skips simulation)")
    common.add_argument("--out", type=Path, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    common.add_argument("--N", type=int)
    common.add_argument("--M", type=int)
    common.add_argument("--q", type=float)
    common.add_argument("--q-hat", type=float, dest="q_hat")
    common.add_argument("--p", type=float)
    common.add_argument("--L", type=int)
    common.add_argument("--range", type=str, help="queried interval LO:HI (1-indexed)")
    common.add_argument("--zeta-max", type=int, dest="zeta_max")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cowu", description="Content-based wake-up experiments: accuracy sweeps, energy, validation.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("zeta-sweep", parents=[common], help="accuracy against wake-up lead time")
    q = sub.add_parser("q-sweep", parents=[common], help="accuracy against process speed, with mis-estimated q")
    q.add_argument("--q-values", type=_float_list, default=list(DEFAULT_Q_GRID))
    q.add_argument("--q-hat-values", type=_float_list, default=list(DEFAULT_Q_HATS))
    e = sub.add_parser("energy", parents=[common], help="mean energy per round, CoWu vs round-robin")
    e.add_argument("--trace", type=Path, help="per-round CoWu trace CSV")
    e.add_argument("--scheme", choices=("both", "cowu", "round-robin"), default="both", help="which rows to produce")
    sub.add_parser("validate", parents=[common], help="oracle and invariant checks")
    c = sub.add_parser("calibrate-p", parents=[common], help="find p matching a CoWu energy target")
    c.add_argument("--target-mJ", type=float, default=TARGET_COWU_MJ, dest="target_mJ")
    return parser


def load_config_file(path: Path) -> dict:
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as err:
        raise CliError(EXIT_IO, f"cannot read config {path}: {err}") from None
    except yaml.YAMLError as err:
        raise CliError(EXIT_CONFIG, f"config {path} is not valid YAML/JSON: {err}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise CliError(EXIT_CONFIG, f"config {path} must be a mapping")
    unknown = set(doc) - SCENARIO_KEYS - {"energy", "rounds", "seed", "format"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown config key")
    return doc


def _range(value) -> RangeQuery:
    if isinstance(value, RangeQuery):
        return value
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return RangeQuery(int(value[0]), int(value[1]))
    return RangeQuery.parse(str(value))


def _matrix(value, base: Path | None) -> TransitionMatrix:
    if isinstance(value, str):
        path = Path(value) if base is None else base / value
        try:
            return TransitionMatrix.from_json(path.read_text())
        except OSError as err:
            raise CliError(EXIT_IO, f"cannot read matrix {path}: {err}") from None
    return TransitionMatrix(np.array(value, dtype=float))


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    for path in (args.out, getattr(args, "trace", None)):
        if path is not None and not path.resolve().parent.is_dir():
            raise CliError(EXIT_IO, f"output directory {path.resolve().parent} does not exist")
    doc = load_config_file(args.config) if args.config else {}
    scenario = {k: v for k, v in doc.items() if k in SCENARIO_KEYS}
    for key in ("N", "M", "q", "q_hat", "p", "L", "zeta_max", "range"):
        value = getattr(args, key, None)
        if value is not None:
            scenario[key] = value
    try:
        if "range" in scenario:
            scenario["range"] = _range(scenario["range"])
        if "matrix" in scenario:
            scenario["matrix"] = _matrix(scenario["matrix"], args.config.parent if args.config else None)
    except (ValueError, TypeError) as err:
        raise ConfigError("range" if "matrix" not in scenario else "matrix", str(err)) from None
    energy_doc = doc.get("energy") or {}
    if not isinstance(energy_doc, dict) or set(energy_doc) - ENERGY_KEYS:
        raise ConfigError("energy", f"expected a mapping with keys from {sorted(ENERGY_KEYS)}")
    energy = EnergyModel(**{k: float(v) for k, v in energy_doc.items()})
    return ExperimentSpec(
        kind=args.command,
        scenario=ScenarioConfig(**scenario),
        energy=energy,
        rounds=args.rounds if args.rounds is not None else int(doc.get("rounds", 10_000)),
        seed=args.seed if args.seed is not None else int(doc.get("seed", 0)),
        out=args.out,
        fmt=args.format or doc.get("format", "csv"),
    )


# --- commands -------------------------------------------------------------

ZETA_COLUMNS = ("zeta", "gamma_analytical", "gamma_upper", "gamma_simulated", "ci", "gamma_round_robin")


def cmd_zeta_sweep(spec: ExperimentSpec) -> list[dict]:
    cfg = spec.scenario
    zetas = np.arange(1, cfg.zeta_max + 1)
    analytical = gamma_cowu_curve(cfg)
    upper = gamma_cowu_curve(cfg, upper=True)
    rr = round_robin_gamma(cfg)
    log.info("simulating %d rounds over zeta = 1..%d", spec.rounds, cfg.zeta_max)
    sim = run_cowu_sweep(cfg, spec.energy, zetas, spec.rounds, spec.seed) if spec.rounds > 0 else None
    rows = []
    for k, zeta in enumerate(zetas):
        rows.append({
            "zeta": int(zeta),
            "gamma_analytical": float(analytical[zeta]),
            "gamma_upper": float(upper[zeta]),
            "gamma_simulated": float(sim.gamma_hat[k]) if sim else None,
            "ci": float(sim.gamma_ci[k]) if sim else None,
            "gamma_round_robin": rr,
        })
    return rows


Q_COLUMNS = ("q", "q_hat", "zeta_opt", "gamma_cowu", "gamma_round_robin")


def cmd_q_sweep(spec: ExperimentSpec, q_values, q_hat_values) -> list[dict]:
    if not q_values:
        raise ConfigError("q_values", "must not be empty")
    for name, values in (("q_values", q_values), ("q_hat_values", q_hat_values)):
        if any(not 0 <= v <= 0.5 for v in values):
            raise ConfigError(name, "entries must lie in [0, 0.5]")
    curves = mismatch_curves(spec.scenario, q_values, q_hat_values or [q_values[0]])
    any_curve = next(iter(curves.values()))
    rows = [
        {"q": pt.q, "q_hat": pt.q, "zeta_opt": pt.zeta_opt_perfect, "gamma_cowu": pt.gamma_perfect,
         "gamma_round_robin": pt.gamma_round_robin}
        for pt in any_curve
    ]
    for q_hat in q_hat_values:
        rows.extend(
            {"q": pt.q, "q_hat": pt.q_hat, "zeta_opt": pt.zeta_opt, "gamma_cowu": pt.gamma,
             "gamma_round_robin": pt.gamma_round_robin}
            for pt in curves[float(q_hat)]
        )
    return rows


ENERGY_COLUMNS = ("scheme", "p", "mean_energy_mJ", "ci_mJ", "expected_energy_mJ", "rounds")


def cmd_energy(spec: ExperimentSpec, trace: Path | None = None, scheme: str = "both") -> list[dict]:
    cfg = spec.scenario
    if spec.rounds < 1:
        raise ConfigError("rounds", "energy needs at least one round")
    rows = []
    if scheme in ("both", "round-robin"):
        # every node sends exactly one L-slot frame per round whatever the process does,
        # so the per-round cost is fixed and the campaign mean needs no sampling
        per_round = round_robin_energy(cfg, spec.energy)
        rows.append({"scheme": "round-robin", "p": None, "mean_energy_mJ": per_round * 1e3, "ci_mJ": 0.0,
                     "expected_energy_mJ": per_round * 1e3, "rounds": spec.rounds})
    if scheme in ("both", "cowu"):
        log.info("simulating %d CoWu rounds", spec.rounds)
        # CoWu energy does not depend on the deadline; any zeta gives the same MAC run
        cowu = run_campaign(cfg, spec.energy, "cowu", zeta=1, rounds=spec.rounds, base_seed=spec.seed, trace_path=trace)
        rows.append({"scheme": "cowu", "p": cfg.p, "mean_energy_mJ": cowu.mean_energy_J * 1e3,
                     "ci_mJ": cowu.energy_ci * 1e3, "expected_energy_mJ": expected_cowu_energy(cfg, spec.energy) * 1e3,
                     "rounds": cowu.rounds})
    return rows


CALIBRATE_COLUMNS = ("p", "expected_energy_mJ", "simulated_energy_mJ", "ci_mJ", "selected")


def cmd_calibrate_p(spec: ExperimentSpec, target_mJ: float) -> list[dict]:
    cal = calibrate_p(spec.scenario, spec.energy, target_mJ * 1e-3)
    rows = [
        {"p": float(p), "expected_energy_mJ": float(e) * 1e3, "simulated_energy_mJ": None, "ci_mJ": None, "selected": 0}
        for p, e in zip(cal["grid"], cal["expected_J"])
    ]
    for root in cal["roots"] or [cal["p"]]:
        row = {"p": root, "expected_energy_mJ": expected_cowu_energy(spec.scenario, spec.energy, root) * 1e3,
               "simulated_energy_mJ": None, "ci_mJ": None, "selected": int(root == cal["p"])}
        if spec.rounds > 0:
            sim = run_campaign(spec.scenario.with_(p=root), spec.energy, "cowu", zeta=1,
                               rounds=spec.rounds, base_seed=spec.seed)
            row["simulated_energy_mJ"] = sim.mean_energy_J * 1e3
            row["ci_mJ"] = sim.energy_ci * 1e3
        rows.append(row)
    rows.sort(key=lambda r: r["p"])
    return rows


def cmd_validate(spec: ExperimentSpec) -> int:
    from .validate import run_all

    checks = run_all(spec.scenario, spec.seed)
    text = "\n".join(c.line() for c in checks)
    failed = sum(not c.passed for c in checks)
    text += f"\n{len(checks) - failed}/{len(checks)} checks passed\n"
    _emit(text, spec.out)
    return EXIT_VALIDATION if failed else EXIT_OK


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        out.write_text(text)
    except OSError as err:
        raise CliError(EXIT_IO, f"cannot write {out}: {err}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = resolve_spec(args)
        meta = {"command": spec.kind, "seed": spec.seed, "rounds": spec.rounds, **spec.scenario.to_record()}
        if spec.kind == "validate":
            return cmd_validate(spec)
        if spec.kind == "zeta-sweep":
            rows, cols = cmd_zeta_sweep(spec), ZETA_COLUMNS
        elif spec.kind == "q-sweep":
            rows, cols = cmd_q_sweep(spec, args.q_values, args.q_hat_values), Q_COLUMNS
        elif spec.kind == "energy":
            rows, cols = cmd_energy(spec, args.trace, args.scheme), ENERGY_COLUMNS
        else:
            rows, cols = cmd_calibrate_p(spec, args.target_mJ), CALIBRATE_COLUMNS
            meta["target_mJ"] = args.target_mJ
        _emit(tableio.render(rows, cols, spec.fmt, meta), spec.out)
        return EXIT_OK
    except CliError as err:
        print(f"cowu: {err}", file=sys.stderr)
        return err.code
    except (ConfigError, ValueError) as err:
        print(f"cowu: invalid configuration: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"cowu: I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
