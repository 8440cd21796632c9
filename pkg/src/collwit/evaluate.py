"""Classifier and witness evaluation: confusion counts, ROC, batch spreads.

Positive class is "entangled" throughout.  The improvement factor compares
the classifier's detection rate against the bare witness on the same
split: IF = TPR / APR, where APR is the fraction of entangled samples the
analytical witness flags on its own.  Spread estimates come from slicing
the (already shuffled, hence stratified in expectation) test set into
contiguous batches and taking the sample standard deviation across them.
"""

import dataclasses

import numpy as np

from . import svm, witnesses


@dataclasses.dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fn + self.fp + self.tn


def confusion(predictions, labels):
    p = np.asarray(predictions).astype(bool)
    t = np.asarray(labels).astype(bool)
    return ConfusionMatrix(
        tp=int(np.sum(p & t)), fn=int(np.sum(~p & t)),
        fp=int(np.sum(p & ~t)), tn=int(np.sum(~p & ~t)))


def rates(cm):
    """(TPR, FPR); undefined on an empty class."""
    pos = cm.tp + cm.fn
    neg = cm.fp + cm.tn
    if pos == 0 or neg == 0:
        raise ValueError("rates undefined: a class has no samples")
    return cm.tp / pos, cm.fp / neg


def apr(values, labels, orientation):
    """Analytically positive rate: oriented witness flags among entangled."""
    labels = np.asarray(labels).astype(bool)
    if not labels.any():
        raise ValueError("APR undefined without entangled samples")
    flags = orientation * np.asarray(values) > 0
    return float(np.mean(flags[labels]))


def improvement_factor(tpr, apr_value):
    if apr_value == 0:
        raise ValueError("improvement factor undefined for zero APR")
    return tpr / apr_value


@dataclasses.dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    w_e: float = float("nan")


@dataclasses.dataclass(frozen=True)
class RocCurve:
    witness: str
    points: tuple
    auc: float


def roc_and_auc(points, witness=""):
    """Anchor at (0,0) and (1,1), sort by FPR, integrate by trapezoids."""
    pts = sorted(points, key=lambda p: (p.fpr, p.tpr))
    pts = [RocPoint(0.0, 0.0)] + pts + [RocPoint(1.0, 1.0)]
    xs = np.array([p.fpr for p in pts])
    ys = np.array([p.tpr for p in pts])
    return RocCurve(witness, tuple(pts), float(np.trapezoid(ys, xs)))


def _batch_slices(n, batches):
    sizes = np.full(batches, n // batches)
    sizes[: n % batches] += 1
    ends = np.cumsum(sizes)
    return [slice(e - s, e) for s, e in zip(sizes, ends)]


def _metric_stds(labels, flags, predictions, batches):
    """Sample std of TPR / FPR / IF over contiguous test-set batches.

    A batch where a metric is undefined (an empty class, or no flagged
    entangled states for the IF denominator) is skipped for that metric;
    the std is NaN if fewer than two batches remain.  At full scale each
    batch holds a few thousand samples and nothing is ever skipped.
    """
    labels = np.asarray(labels).astype(bool)
    tprs, fprs, ifs = [], [], []
    for sl in _batch_slices(labels.size, batches):
        lb, fb, pb = labels[sl], flags[sl], predictions[sl]
        n_pos = int(lb.sum())
        if n_pos == 0 or n_pos == lb.size:
            continue
        cm = confusion(pb, lb)
        tpr_b, fpr_b = rates(cm)
        tprs.append(tpr_b)
        fprs.append(fpr_b)
        apr_b = float(np.mean(fb[lb]))
        if apr_b > 0:
            ifs.append(tpr_b / apr_b)

    def _std(vals):
        if len(vals) < 2:
            return float("nan")
        return float(np.std(vals, ddof=1))

    return _std(tprs), _std(fprs), _std(ifs)


def batch_std(test, ensemble, batches=50, witness="collectibility",
              predictions=None):
    """Spec-level entry: spread of TPR/FPR/IF for one ensemble."""
    if predictions is None:
        predictions = svm.predict(ensemble, test.feature_pairs(witness))
    flags = (witnesses.ORIENTATIONS[witness] * test.columns[witness]) > 0
    tpr_s, fpr_s, if_s = _metric_stds(test.labels, flags, predictions,
                                      batches)
    return {"tpr": tpr_s, "fpr": fpr_s, "improvement_factor": if_s}


@dataclasses.dataclass(frozen=True)
class PenaltyResult:
    weights: svm.ClassWeights
    confusion: ConfusionMatrix
    tpr: float
    fpr: float
    improvement: float
    std_tpr: float
    std_fpr: float
    std_if: float


@dataclasses.dataclass(frozen=True)
class SweepResult:
    witness: str
    apr: float
    results: tuple   # PenaltyResult, ascending w_e
    curve: RocCurve


def evaluate_sweep(test, witness, sweep_models, batches=50):
    """Metrics for a trained sweep on the held-out half."""
    feats = test.feature_pairs(witness)
    labels = test.labels
    flags = (witnesses.ORIENTATIONS[witness] * test.columns[witness]) > 0
    apr_value = apr(test.columns[witness], labels,
                    witnesses.ORIENTATIONS[witness])
    votes = svm.sweep_votes(sweep_models, feats)
    rows = []
    for wi, (w, _) in enumerate(sweep_models):
        cm = confusion(votes[:, wi], labels)
        tpr, fpr = rates(cm)
        stds = _metric_stds(labels, flags, votes[:, wi], batches)
        rows.append(PenaltyResult(
            weights=w, confusion=cm, tpr=tpr, fpr=fpr,
            improvement=improvement_factor(tpr, apr_value),
            std_tpr=stds[0], std_fpr=stds[1], std_if=stds[2]))
    rows.sort(key=lambda r: r.weights.w_e)
    curve = roc_and_auc(
        [RocPoint(r.fpr, r.tpr, r.weights.w_e) for r in rows], witness)
    return SweepResult(witness=witness, apr=apr_value, results=tuple(rows),
                       curve=curve)


def run_sweep(train, test, witness, kernel=None, seed=0, weights_list=None,
              batches=50, log=None):
    """Train the full penalty sweep and evaluate it; one-stop pipeline."""
    kernel = kernel or svm.RbfKernel(1.0)
    models = svm.train_sweep(train, witness, kernel, seed=seed,
                             weights_list=weights_list, log=log)
    return evaluate_sweep(test, witness, models, batches=batches), models


# --- plain-text reports --------------------------------------------------

RESULTS_HEADER = ("witness,w_e,tp,fn,fp,tn,tpr,tpr_std,fpr,fpr_std,"
                  "improvement_factor,if_std")


def results_table_text(sweep_results):
    """Per-operating-point table, one block per witness, ascending w_e."""
    lines = [RESULTS_HEADER]
    for res in sweep_results:
        for r in res.results:
            cm = r.confusion
            lines.append(
                f"{res.witness},{r.weights.w_e:.6g},{cm.tp},{cm.fn},"
                f"{cm.fp},{cm.tn},{r.tpr:.6f},{r.std_tpr:.6f},"
                f"{r.fpr:.6f},{r.std_fpr:.6f},{r.improvement:.6f},"
                f"{r.std_if:.6f}")
    return "\n".join(lines) + "\n"


def summary_text(sweep_results):
    lines = ["witness,auc,apr"]
    for res in sweep_results:
        lines.append(f"{res.witness},{res.curve.auc:.6f},{res.apr:.6f}")
    return "\n".join(lines) + "\n"
