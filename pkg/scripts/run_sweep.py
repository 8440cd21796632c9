#!/usr/bin/env python3
"""Train the penalty sweep for one witness and print the results table."""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from collwit import cli, dataset, evaluate  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", type=pathlib.Path, required=True)
    ap.add_argument("--witness", default="collectibility",
                    choices=["collectibility", "chsh", "entropic"])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args()

    seeds = cli.pipeline_seeds(args.seed)
    ds = dataset.read_csv(args.dataset)
    train, test = dataset.split_train_test(ds, 0.5, seed=seeds["split"])
    t0 = time.time()
    log = (lambda s: print(s, file=sys.stderr)) if args.verbose else None
    result, _ = evaluate.run_sweep(train, test, args.witness,
                                   seed=seeds["shard"], log=log)
    print(evaluate.results_table_text([result]), end="")
    print(evaluate.summary_text([result]), end="")
    print(f"# wall clock {time.time() - t0:.0f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
