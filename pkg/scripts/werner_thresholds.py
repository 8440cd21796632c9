#!/usr/bin/env python3
"""Bisect the Werner-state zero crossing of each witness and compare to
the closed forms."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from collwit import states, witnesses  # noqa: E402


def main():
    fns = {
        "collectibility": witnesses.collectibility,
        "chsh": witnesses.chsh_witness,
        "entropic": witnesses.entropic_witness,
    }
    for name, fn in fns.items():
        root = witnesses.bisect_zero(
            lambda p: fn(states.werner(p)), 0.0, 1.0, tol=1e-12)
        expect = witnesses.WERNER_THRESHOLDS[name]
        print(f"{name:15s} zero at p = {root:.12f} "
              f"(closed form {expect:.12f}, |err| = {abs(root-expect):.2e})")


if __name__ == "__main__":
    main()
