#!/usr/bin/env python3
"""Full desk-scale reproduction: dataset, analytical rates, all three
penalty sweeps, and the summary tables.  Takes half an hour or so."""

import argparse
import os
import pathlib
import subprocess
import sys


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--total", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("tables"))
    args = ap.parse_args()

    src = pathlib.Path(__file__).resolve().parents[1] / "src"
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(
        [str(src)] + env.get("PYTHONPATH", "").split(os.pathsep)).strip(
            os.pathsep)
    cmd = [sys.executable, "-m", "collwit.cli", "--seed", str(args.seed),
           "reproduce-tables", "--total", str(args.total),
           "--out", str(args.out)]
    raise SystemExit(subprocess.call(cmd, env=env))


if __name__ == "__main__":
    main()
