import argparse
from pathlib import Path

from cowu import cli

RESULTS = Path(__file__).resolve().parent.parent / "results"


def parse(description: str) -> argparse.Namespace:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--rounds", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=RESULTS)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    return args


def run(*argv: str) -> None:
    code = cli.main(list(argv))
    if code:
        raise SystemExit(code)
