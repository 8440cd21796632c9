"""Command-line front end.

One root `--seed` pins every run: commands that need several independent
streams derive them from the root by labeled hashing (see
`sampling.derive_seed`), so rerunning any command with the same flags
reproduces its output files byte for byte.  Each file-writing command
drops a run manifest next to its outputs with everything needed for that
replay: command, flags, dataset spec, penalties, derived seeds, tool
version, wall clock.

Environment overrides: COLLWIT_WORKERS (default worker-pool size),
COLLWIT_SCRATCH (directory for large intermediate artifacts).
"""

import dataclasses
import importlib.metadata
import json
import os
import pathlib
import sys
import tempfile
import time

import click
import numpy as np

from . import dataset, evaluate, sampling, states, svm, witnesses

try:
    VERSION = importlib.metadata.version("collwit")
except importlib.metadata.PackageNotFoundError:  # running from a checkout
    VERSION = "0.0.0+uninstalled"

WITNESS_CHOICES = list(witnesses.WITNESS_NAMES)


def default_workers():
    return int(os.environ.get("COLLWIT_WORKERS", os.cpu_count() or 1))


def scratch_dir():
    return pathlib.Path(os.environ.get("COLLWIT_SCRATCH",
                                       tempfile.gettempdir()))


def pipeline_seeds(root):
    """Derived seeds for the train/eval pipeline stages."""
    return {
        "root": int(root),
        "dataset": int(root),
        "split": sampling.derive_seed(root, "split"),
        "shard": sampling.derive_seed(root, "shard"),
    }


@dataclasses.dataclass
class RunManifest:
    command: str
    flags: dict
    spec: dict | None
    penalties: list
    seeds: dict
    version: str
    wall_clock_s: float

    def write(self, path):
        payload = dataclasses.asdict(self)
        pathlib.Path(path).write_text(
            json.dumps(payload, indent=2, default=str) + "\n")


def _write_manifest(path, command, flags, spec=None, penalties=(), seeds=None,
                    t0=None):
    RunManifest(
        command=command, flags=dict(flags), spec=spec,
        penalties=list(penalties), seeds=seeds or {}, version=VERSION,
        wall_clock_s=round(time.time() - t0, 3) if t0 else 0.0,
    ).write(path)


@click.group()
@click.option("--seed", default=7, show_default=True,
              help="Root seed; every derived stream hangs off this.")
@click.pass_context
def main(ctx, seed):
    """Collective entanglement-witness pipeline."""
    ctx.obj = {"seed": seed}


@main.command()
@click.option("--total", default=200_000, show_default=True)
@click.option("--seed", type=int, default=None,
              help="Dataset seed (defaults to the root seed).")
@click.option("--out", type=click.Path(), default="dataset.csv",
              show_default=True)
@click.option("--raw-states", is_flag=True,
              help="Also write the density matrices as a .w2qd file.")
@click.option("--workers", default=None, type=int,
              help="Cell-collection threads (default: COLLWIT_WORKERS).")
@click.pass_context
def generate(ctx, total, seed, out, raw_states, workers):
    """Build a purity-uniform, class-balanced labeled dataset."""
    t0 = time.time()
    spec = dataset.DatasetSpec(
        total_states=total,
        seed=ctx.obj["seed"] if seed is None else seed)
    try:
        ds = dataset.build_uniform_purity_dataset(
            spec, keep_states=raw_states,
            workers=workers or default_workers())
    except dataset.QuotaStarvationError as e:
        raise click.ClickException(str(e))
    out = pathlib.Path(out)
    dataset.write_csv(out, ds)
    dataset.write_manifest(out.with_suffix(".manifest.json"), spec)
    if raw_states:
        dataset.write_w2qd(out.with_suffix(".w2qd"), ds.states)
    _write_manifest(out.with_suffix(".run.json"), "generate",
                    {"total": total, "out": str(out),
                     "raw_states": raw_states},
                    spec=dataclasses.asdict(spec),
                    seeds={"dataset": spec.seed}, t0=t0)
    counts = np.bincount(dataset.bin_of(ds.columns["purity"]),
                         minlength=dataset.N_BINS)
    click.echo(f"wrote {len(ds)} rows to {out} "
               f"(per-bin counts {counts.min()}..{counts.max()}, "
               f"{time.time() - t0:.1f}s)")


@main.command()
@click.option("--werner", "werner_p", type=float, default=None,
              help="Evaluate the Werner state at this mixing parameter.")
@click.option("--states", "states_file", type=click.Path(exists=True),
              default=None, help="Evaluate states from a .w2qd file.")
@click.option("--random", "n_random", type=int, default=None,
              help="Evaluate N random states from the natural ensemble.")
@click.option("--out", type=click.Path(), default=None,
              help="Write CSV here instead of stdout.")
@click.pass_context
def witness(ctx, werner_p, states_file, n_random, out):
    """Compute purity, the three witnesses, and negativity for states."""
    chosen = [x is not None for x in (werner_p, states_file, n_random)]
    if sum(chosen) != 1:
        raise click.UsageError(
            "choose exactly one of --werner / --states / --random")
    if werner_p is not None:
        rho = states.werner(werner_p)[None]
    elif states_file is not None:
        rho = dataset.read_w2qd(states_file)
    else:
        lam, u = sampling.natural_attempts(ctx.obj["seed"], 0, n_random)
        rho = sampling.states_from_spectra(lam, u)
    arrays = witnesses.witness_arrays(rho)
    names = ("purity", "collectibility", "chsh", "entropic", "negativity",
             "label")
    lines = [",".join(names)]
    for i in range(rho.shape[0]):
        lines.append(",".join(
            f"{arrays[n][i]:.17g}" if n != "label" else str(arrays[n][i])
            for n in names))
    text = "\n".join(lines) + "\n"
    if out:
        pathlib.Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command("werner-scan")
@click.option("--witness", "which", default="all", show_default=True,
              type=click.Choice(WITNESS_CHOICES + ["all"]))
@click.option("--p-grid", default="0:1:101", show_default=True,
              help="start:stop:num for the mixing-parameter grid.")
@click.option("--bisect", "do_bisect", is_flag=True,
              help="Bisect each witness zero crossing to 1e-9.")
def werner_scan(which, p_grid, do_bisect):
    """Scan the witnesses along the Werner family; check closed forms."""
    try:
        lo, hi, num = p_grid.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise click.UsageError("--p-grid must look like 0:1:101")
    names = WITNESS_CHOICES if which == "all" else [which]
    fns = {
        "collectibility": witnesses.collectibility,
        "chsh": witnesses.chsh_witness,
        "entropic": witnesses.entropic_witness,
    }
    click.echo("p," + ",".join(names))
    for p in grid:
        rho = states.werner(p)
        click.echo(f"{p:.6f}," + ",".join(f"{fns[n](rho):.12f}"
                                          for n in names))
    failures = 0
    if do_bisect:
        for n in names:
            root = witnesses.bisect_zero(
                lambda p: fns[n](states.werner(p)), 0.0, 1.0, tol=1e-12)
            expect = witnesses.WERNER_THRESHOLDS[n]
            err = abs(root - expect)
            ok = err < 1e-9
            failures += not ok
            click.echo(f"# {n} zero at p = {root:.12f} "
                       f"(closed form {expect:.12f}, |err| = {err:.2e}) "
                       f"{'ok' if ok else 'FAIL'}")
    if failures:
        sys.exit(1)


@main.command("equivalence-check")
@click.option("--trials", default=1000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.pass_context
def equivalence_check(ctx, trials, seed):
    """Randomized check that noisy-measurement and noisy-POVM agree."""
    root = ctx.obj["seed"] if seed is None else seed
    rng = np.random.Generator(np.random.Philox(
        key=np.uint64(sampling.derive_seed(root, "equivalence"))))
    worst = states.equivalence_deviations(trials, rng)
    p = 0.3
    built = states.apply_channel_to_projector(
        states.BELL_PHI_PLUS, states.depolarizing_channel(p),
        states.depolarizing_channel(p))
    omega_err = np.abs(built - states.noisy_projector_omega(p)).max()
    ok = (worst["max_dc"] < 1e-11 and worst["max_dcbar"] < 1e-11
          and omega_err < 1e-12)
    click.echo(f"{trials} tuples: max |C_a - C_b| = {worst['max_dc']:.3e}, "
               f"max |dCbar| = {worst['max_dcbar']:.3e}, "
               f"depolarizing Omega closed form err = {omega_err:.3e} "
               f"{'ok' if ok else 'FAIL'}")
    if not ok:
        t, l1, l2 = worst["worst_tuple"]
        click.echo(f"worst tuple: trial {t} channels ({l1}, {l2})")
        sys.exit(1)


def _load_dataset(path):
    return dataset.read_csv(path)


@main.command("train-eval")
@click.option("--dataset", "dataset_file", type=click.Path(exists=True),
              required=True, help="Dataset CSV from `generate`.")
@click.option("--witness", "which", default="all", show_default=True,
              type=click.Choice(WITNESS_CHOICES + ["all"]))
@click.option("--sweep/--single", default=True, show_default=True,
              help="Full 12-point penalty sweep vs a single w_e = 1 run.")
@click.option("--out", type=click.Path(), default="results",
              show_default=True)
@click.option("--save-models", is_flag=True)
@click.option("--verbose", is_flag=True)
@click.pass_context
def train_eval(ctx, dataset_file, which, sweep, out, save_models, verbose):
    """Train the voting ensembles and evaluate them on the held-out half."""
    t0 = time.time()
    seeds = pipeline_seeds(ctx.obj["seed"])
    ds = _load_dataset(dataset_file)
    train, test = dataset.split_train_test(ds, 0.5, seed=seeds["split"])
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    weights = svm.penalty_sweep() if sweep else [svm.ClassWeights(1.0, 1.0)]
    names = WITNESS_CHOICES if which == "all" else [which]
    log = (lambda s: click.echo(s, err=True)) if verbose else None
    results, n_bad = [], 0
    for wit in names:
        result, models = evaluate.run_sweep(
            train, test, wit, seed=seeds["shard"], weights_list=weights,
            log=log)
        res, bad = _finish_sweep(result, models, wit, out, save_models)
        results.append(res)
        n_bad += bad
    (out / "results.csv").write_text(evaluate.results_table_text(results))
    (out / "summary.csv").write_text(evaluate.summary_text(results))
    _write_manifest(out / "run.json", "train-eval",
                    {"dataset": str(dataset_file), "witness": which,
                     "sweep": sweep, "out": str(out)},
                    penalties=[w.w_e for w in weights], seeds=seeds, t0=t0)
    for res in results:
        click.echo(f"{res.witness}: AUC = {res.curve.auc:.4f}, "
                   f"APR = {100 * res.apr:.2f}%")
    click.echo(f"done in {time.time() - t0:.0f}s -> {out}/")
    if n_bad:
        sys.exit(1)


def _finish_sweep(result, models, wit, out, save_models):
    bad = [(m.training_meta["shard"], m.training_meta["final_violation"])
           for _, ens in models for m in ens.members
           if not m.training_meta["converged"]]
    for shard_id, viol in bad:
        click.echo(f"WARNING: {wit} member on shard {shard_id} "
                   f"stopped at violation {viol:.2e}", err=True)
    if save_models:
        svm.save_models(out / f"models_{wit}.npz", models)
    roc_lines = ["fpr,tpr,tpr_std"]
    for r in result.results:
        roc_lines.append(f"{r.fpr:.6f},{r.tpr:.6f},{r.std_tpr:.6f}")
    (out / f"roc_{wit}.csv").write_text("\n".join(roc_lines) + "\n")
    return result, len(bad)


@main.command()
@click.option("--dataset", "dataset_file", type=click.Path(exists=True),
              default=None, help="Dataset CSV (not needed for hs-distance).")
@click.option("--feature", required=True,
              type=click.Choice(["purity", "negativity", "hs-distance"]
                                + WITNESS_CHOICES))
@click.option("--bins", default=75, show_default=True)
@click.option("--entangled-only", is_flag=True,
              help="Restrict to rows labeled entangled.")
@click.option("--pairs", default=10_000, show_default=True,
              help="Random state pairs for the hs-distance histogram.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def histograms(ctx, dataset_file, feature, bins, entangled_only, pairs, out):
    """Emit bin edges and counts for a dataset feature."""
    if feature == "hs-distance":
        lam, u = sampling.natural_attempts(
            sampling.derive_seed(ctx.obj["seed"], "pairs"), 0, 2 * pairs)
        rho = sampling.states_from_spectra(lam, u)
        from . import linalg
        values = linalg.hs_distance_batched(rho[0::2], rho[1::2])
    else:
        if dataset_file is None:
            raise click.UsageError(f"--dataset is required for {feature}")
        ds = _load_dataset(dataset_file)
        if entangled_only:
            ds = ds.subset(np.nonzero(ds.labels == 1)[0])
        values = ds.columns[feature]
    counts, edges = np.histogram(values, bins=bins)
    lines = ["lo,hi,count"]
    for i, c in enumerate(counts):
        lines.append(f"{edges[i]:.12g},{edges[i + 1]:.12g},{c}")
    text = "\n".join(lines) + "\n"
    if out:
        pathlib.Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command("reproduce-tables")
@click.option("--total", default=200_000, show_default=True)
@click.option("--dataset", "dataset_file", type=click.Path(exists=True),
              default=None, help="Reuse an existing dataset CSV.")
@click.option("--out", type=click.Path(), default="tables",
              show_default=True)
@click.option("--workers", default=None, type=int)
@click.option("--save-models", is_flag=True)
@click.pass_context
def reproduce_tables(ctx, total, dataset_file, out, workers, save_models):
    """End-to-end run: dataset, analytical rates, sweeps, summary tables."""
    t0 = time.time()
    seeds = pipeline_seeds(ctx.obj["seed"])
    out = pathlib.Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if dataset_file is None:
        spec = dataset.DatasetSpec(total_states=total, seed=seeds["dataset"])
        click.echo(f"building {total}-state dataset (seed {spec.seed})...",
                   err=True)
        ds = dataset.build_uniform_purity_dataset(
            spec, workers=workers or default_workers())
        ds_path = scratch_dir() / f"collwit_dataset_{spec.seed}_{total}.csv"
        dataset.write_csv(ds_path, ds)
        dataset.write_manifest(ds_path.with_suffix(".manifest.json"), spec)
        spec_dict = dataclasses.asdict(spec)
    else:
        ds = _load_dataset(dataset_file)
        ds_path = pathlib.Path(dataset_file)
        spec_dict = None
    train, test = dataset.split_train_test(ds, 0.5, seed=seeds["split"])
    results, n_bad = [], 0
    for wit in WITNESS_CHOICES:
        click.echo(f"sweeping {wit}...", err=True)
        result, models = evaluate.run_sweep(
            train, test, wit, seed=seeds["shard"])
        res, bad = _finish_sweep(result, models, wit, out, save_models)
        results.append(res)
        n_bad += bad
    # Table I analog: analytical rates and the sweep AUC per witness.
    lines = ["witness,apr,analytical_fpr,auc"]
    for res in results:
        sep = ds.labels == 0
        flags = (witnesses.ORIENTATIONS[res.witness]
                 * ds.columns[res.witness]) > 0
        fpr_analytical = float(np.mean(flags[sep]))
        lines.append(f"{res.witness},{res.apr:.6f},{fpr_analytical:.6f},"
                     f"{res.curve.auc:.6f}")
    (out / "table1.csv").write_text("\n".join(lines) + "\n")
    for res, tag in zip(results, ("table2_collectibility", "table3_chsh",
                                  "table4_entropic")):
        (out / f"{tag}.csv").write_text(
            evaluate.results_table_text([res]))
    (out / "summary.csv").write_text(evaluate.summary_text(results))
    _write_manifest(out / "run.json", "reproduce-tables",
                    {"total": total, "dataset": str(ds_path),
                     "out": str(out)},
                    spec=spec_dict,
                    penalties=[w.w_e for w in svm.penalty_sweep()],
                    seeds=seeds, t0=t0)
    for res in results:
        click.echo(f"{res.witness}: APR = {100 * res.apr:.2f}%, "
                   f"AUC = {res.curve.auc:.4f}")
    click.echo(f"done in {time.time() - t0:.0f}s -> {out}/")
    if n_bad:
        sys.exit(1)


if __name__ == "__main__":
    main()
