"""Regenerate every figure preset (CSV plus SVG per panel) into one directory.

    python3 scripts/reproduce_all.py [--out figures] [--quick] [--parallel 4]
"""

import argparse
import sys
import time

from ladder_otoc.cli import main as cli_main
from ladder_otoc.presets import FIGURES


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="figures")
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--parallel", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    status = 0
    for fig in FIGURES:
        start = time.perf_counter()
        argv = ["reproduce", fig, "--out", args.out, "--parallel", str(args.parallel), "--seed", str(args.seed)]
        code = cli_main(argv + (["--quick"] if args.quick else []))
        print(f"{fig}: exit {code} in {time.perf_counter() - start:.1f} s")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
