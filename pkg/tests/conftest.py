"""Shared fixtures.

The expensive artifacts (the 200k-state dataset and the three trained
penalty sweeps) are session-scoped and lazy: only the acceptance tests
request them, so the unit-test portion of the suite stays fast.  The
acceptance tests report through the `acceptance` fixture, which prints
one pass/fail line per criterion in the terminal summary.
"""

import time

import numpy as np
import pytest

from collwit import cli, dataset, evaluate, witnesses


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")

        def criterion_number(line):
            try:
                return int(line.split(":")[0].split()[-1])
            except ValueError:
                return 99

        for line in sorted(lines, key=criterion_number):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance(request):
    def record(criterion, ok, detail=""):
        line = (f"criterion {criterion}: {'PASS' if ok else 'FAIL'}"
                + (f"  [{detail}]" if detail else ""))
        request.config._acceptance_lines.append(line)
        assert ok, line
    return record


@pytest.fixture(scope="session")
def rng_factory():
    def make(label, root=7):
        from collwit import sampling
        return np.random.Generator(np.random.Philox(
            key=np.uint64(sampling.derive_seed(root, label))))
    return make


@pytest.fixture(scope="session")
def ds200k():
    """The desk-scale dataset at the pinned seed; ~2 minutes to build."""
    spec = dataset.DatasetSpec()
    t0 = time.time()
    ds = dataset.build_uniform_purity_dataset(spec)
    ds.build_seconds = time.time() - t0
    return ds


@pytest.fixture(scope="session")
def split200k(ds200k):
    seeds = cli.pipeline_seeds(7)
    return dataset.split_train_test(ds200k, 0.5, seed=seeds["split"])


@pytest.fixture(scope="session")
def sweeps(split200k):
    """witness -> (SweepResult, trained models, wall seconds); ~25 min."""
    train, test = split200k
    seeds = cli.pipeline_seeds(7)
    out = {}
    for wit in witnesses.WITNESS_NAMES:
        t0 = time.time()
        result, models = evaluate.run_sweep(train, test, wit,
                                            seed=seeds["shard"])
        out[wit] = (result, models, time.time() - t0)
    return out


@pytest.fixture(scope="session")
def tiny_dataset():
    """A 1500-row build for fast pipeline plumbing tests."""
    spec = dataset.DatasetSpec(total_states=1500, seed=11)
    return dataset.build_uniform_purity_dataset(spec)
