#!/usr/bin/env python3
"""Build the purity-uniform labeled dataset and write CSV + manifest."""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from collwit import dataset  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--total", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=pathlib.Path,
                    default=pathlib.Path("dataset.csv"))
    ap.add_argument("--raw-states", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    spec = dataset.DatasetSpec(total_states=args.total, seed=args.seed)
    t0 = time.time()
    ds = dataset.build_uniform_purity_dataset(
        spec, keep_states=args.raw_states, workers=args.workers,
        log=lambda s: print(s, file=sys.stderr))
    dataset.write_csv(args.out, ds)
    dataset.write_manifest(args.out.with_suffix(".manifest.json"), spec)
    if args.raw_states:
        dataset.write_w2qd(args.out.with_suffix(".w2qd"), ds.states)
    print(f"{len(ds)} rows -> {args.out} in {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
