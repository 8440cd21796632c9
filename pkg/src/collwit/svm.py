"""Class-weighted soft-margin SVM with an RBF kernel, trained by SMO.

Training solves the usual dual in the signed-coefficient parametrization
beta_i = y_i alpha_i:

    maximize  sum_i y_i beta_i - 1/2 beta^T K beta
    s.t.      sum_i beta_i = 0,   lo_i <= beta_i <= hi_i,

where the box is [0, C_i] for positive samples and [-C_i, 0] for negative
ones, and C_i is the class weight (the global penalty is folded into the
weights, which satisfy w_e * w_s = 1).  The optimizer is SMO with
maximal-violating-pair selection: at optimum every coordinate free to
move up has gradient <= b and every coordinate free to move down has
gradient >= b, so the selection gap m - M is the KKT violation and the
stopping rule.  Lowest index wins ties, making training deterministic for
a fixed sample order.  Coordinates pinned at a bound and far from
violating are periodically shrunk out of the working set; convergence is
always re-verified on the full set before the solver reports success.

Features are standardized per training set (zero mean, unit variance)
before the kernel is applied, so gamma = 1 acts on z-scores rather than
on raw witness/purity units; the affine transform is stored with the
model and applied to query points automatically.

The per-member work is quadratic in the shard size, which is why the
ensemble layer trains 11 members on 1/11 shards instead of one model on
the full training half.  Within a shard, the penalty sweep reuses the
kernel matrix and warm-starts each solve from the previous penalty's
dual point (clipped to the new box and rebalanced onto the equality
constraint).
"""

import dataclasses
import json

import numba
import numpy as np

from . import dataset

SUPPORT_ATOL = 1e-12
MODEL_FORMAT_VERSION = 1


@dataclasses.dataclass(frozen=True)
class RbfKernel:
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def rbf(x, y, gamma=1.0):
    """exp(-gamma ||x - y||^2) for a single pair of feature vectors."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(x, z, gamma=1.0):
    """Pairwise kernel block, (n, m) for inputs (n, d) and (m, d)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    sq = ((x * x).sum(axis=1)[:, None] + (z * z).sum(axis=1)[None, :]
          - 2.0 * (x @ z.T))
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclasses.dataclass(frozen=True)
class ClassWeights:
    """Per-class penalty caps; the product is pinned to 1."""

    w_e: float
    w_s: float

    def __post_init__(self):
        if self.w_e <= 0 or self.w_s <= 0:
            raise ValueError("class weights must be positive")
        if abs(self.w_e * self.w_s - 1.0) > 1e-12:
            raise ValueError("class weights must satisfy w_e * w_s = 1")

    @classmethod
    def from_w_e(cls, w_e):
        return cls(w_e=float(w_e), w_s=1.0 / float(w_e))


def penalty_sweep():
    """The 12 operating points: w_e = 10^t, t from 0.75 down to -1.15."""
    ts = 0.75 + np.arange(12) * (-1.9 / 11.0)
    return [ClassWeights.from_w_e(10.0 ** t) for t in ts]


@numba.njit(cache=True)
def _smo_loop(k_mat, y, lo, hi, tol, max_iter, beta):
    n = k_mat.shape[0]
    grad = y - np.dot(k_mat, beta)
    active = np.ones(n, dtype=np.bool_)
    it = 0
    since_shrink = 0
    shrink_period = 1000
    while True:
        i = -1
        j = -1
        m = -1e300
        big_m = 1e300
        for t in range(n):
            if not active[t]:
                continue
            g = grad[t]
            if beta[t] < hi[t] and g > m:
                m = g
                i = t
            if beta[t] > lo[t] and g < big_m:
                big_m = g
                j = t
        if i < 0 or j < 0 or m - big_m <= tol:
            # Converged on the working set; re-verify on the full set
            # before trusting it (shrinking is only a heuristic).
            n_active = 0
            for t in range(n):
                if active[t]:
                    n_active += 1
            if n_active == n:
                break
            grad = y - np.dot(k_mat, beta)
            for t in range(n):
                active[t] = True
            since_shrink = 0
            continue
        if it >= max_iter:
            break
        eta = k_mat[i, i] + k_mat[j, j] - 2.0 * k_mat[i, j]
        lam = min(hi[i] - beta[i], beta[j] - lo[j])
        if eta > 1e-12:
            lam = min(lam, (m - big_m) / eta)
        beta[i] += lam
        beta[j] -= lam
        row_i = k_mat[i]
        row_j = k_mat[j]
        for t in range(n):
            if active[t]:
                grad[t] -= lam * (row_i[t] - row_j[t])
        it += 1
        since_shrink += 1
        if since_shrink >= shrink_period:
            since_shrink = 0
            # A coordinate pinned at a bound whose gradient lies outside
            # the current violating range cannot be selected soon.
            for t in range(n):
                if not active[t]:
                    continue
                if beta[t] >= hi[t] and grad[t] > m:
                    active[t] = False
                elif beta[t] <= lo[t] and grad[t] < big_m:
                    active[t] = False
    # Report bias and violation from the full gradient, independent of the
    # final working set.
    grad = y - np.dot(k_mat, beta)
    m = -1e300
    big_m = 1e300
    for t in range(n):
        g = grad[t]
        if beta[t] < hi[t] and g > m:
            m = g
        if beta[t] > lo[t] and g < big_m:
            big_m = g
    return beta, 0.5 * (m + big_m), it, m - big_m


def _feasible_start(beta_prev, lo, hi):
    """Clip a previous dual point into a new box and restore sum-to-zero.

    The boxes always contain 0, so there is guaranteed room to absorb the
    clipping imbalance; mass is removed from the coordinates with the most
    slack first.
    """
    beta = np.clip(beta_prev, lo, hi)
    imbalance = beta.sum()
    if abs(imbalance) < 1e-15:
        return beta
    if imbalance > 0:
        slack = beta - lo
    else:
        slack = hi - beta
    order = np.argsort(slack)[::-1]
    remaining = abs(imbalance)
    sign = 1.0 if imbalance > 0 else -1.0
    for idx in order:
        take = min(remaining, slack[idx])
        beta[idx] -= sign * take
        remaining -= take
        if remaining <= 1e-15:
            break
    return beta


@dataclasses.dataclass
class TrainedSvc:
    """Support vectors, signed dual coefficients, bias, and feature scaling.

    Support vectors are stored in the standardized feature space; query
    points are mapped through (x - feature_offset) / feature_scale before
    the kernel is evaluated.  Identity offset/scale recovers a raw-unit
    model.
    """

    support_vectors: np.ndarray   # (n_sv, 2), standardized units
    dual_coefficients: np.ndarray  # (n_sv,), beta = y * alpha, nonzero
    bias: float
    kernel: RbfKernel
    training_meta: dict
    feature_offset: np.ndarray = None
    feature_scale: np.ndarray = None

    def __post_init__(self):
        n_feat = self.support_vectors.shape[1] if self.support_vectors.ndim == 2 else 1
        if self.feature_offset is None:
            self.feature_offset = np.zeros(n_feat)
        if self.feature_scale is None:
            self.feature_scale = np.ones(n_feat)

    def decision_values(self, x):
        z = (np.atleast_2d(np.asarray(x, dtype=float)) - self.feature_offset) \
            / self.feature_scale
        k = rbf_matrix(z, self.support_vectors, self.kernel.gamma)
        return k @ self.dual_coefficients + self.bias


def dual_objective(k_mat, y, beta):
    return float(y @ beta - 0.5 * beta @ k_mat @ beta)


def standardization_stats(features):
    """Per-feature (offset, scale); scale is floored to avoid division by
    zero on constant columns."""
    features = np.asarray(features, dtype=float)
    offset = features.mean(axis=0)
    scale = np.maximum(features.std(axis=0), 1e-12)
    return offset, scale


def train_smo(features, labels, kernel=RbfKernel(), weights=None, tol=1e-3,
              max_passes=500_000, precomputed_kernel=None, meta=None,
              standardize=True, feature_stats=None, beta0=None):
    """Train one SVC; labels are {0, 1} with 1 = entangled = positive.

    `max_passes` caps the number of accepted pair updates; running into the
    cap is reported through training_meta (converged flag plus the final
    KKT violation), not silently swallowed.  When `precomputed_kernel` is
    given it must have been built from features standardized with
    `feature_stats` (or raw features when standardization is off).
    `beta0` warm-starts the dual solve; it is clipped to the feasible box
    and rebalanced first.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if labels.min() == labels.max():
        raise ValueError("training set must contain both classes")
    if weights is None:
        weights = ClassWeights(1.0, 1.0)
    if feature_stats is not None:
        offset, scale = feature_stats
    elif standardize:
        offset, scale = standardization_stats(features)
    else:
        offset = np.zeros(features.shape[1])
        scale = np.ones(features.shape[1])
    feats_std = (features - offset) / scale
    y = np.where(labels > 0, 1.0, -1.0)
    cap = np.where(labels > 0, weights.w_e, weights.w_s)
    lo = np.where(y > 0, 0.0, -cap)
    hi = np.where(y > 0, cap, 0.0)
    k_mat = precomputed_kernel
    if k_mat is None:
        k_mat = rbf_matrix(feats_std, feats_std, kernel.gamma)
    if beta0 is None:
        start = np.zeros(y.size)
    else:
        start = _feasible_start(np.asarray(beta0, dtype=float), lo, hi)
    beta, bias, iters, violation = _smo_loop(
        k_mat, y, lo, hi, float(tol), int(max_passes), start)
    sv = np.abs(beta) > SUPPORT_ATOL
    info = dict(meta or {})
    info.update({
        "iterations": int(iters),
        "final_violation": float(violation),
        "converged": bool(violation <= tol),
        "weights": (weights.w_e, weights.w_s),
        "n_train": int(labels.size),
        "sv_indices": np.nonzero(sv)[0],
        "beta_full": beta,
    })
    return TrainedSvc(
        support_vectors=feats_std[sv],
        dual_coefficients=beta[sv],
        bias=float(bias),
        kernel=kernel,
        training_meta=info,
        feature_offset=np.asarray(offset, dtype=float),
        feature_scale=np.asarray(scale, dtype=float),
    )


def decision_value(svc, x):
    """Signed distance surrogate for one feature pair; sign gives class."""
    return float(svc.decision_values(np.asarray(x, dtype=float))[0])


@dataclasses.dataclass
class VotingEnsemble:
    members: list
    penalty_setting: ClassWeights

    def __post_init__(self):
        if len(self.members) % 2 == 0:
            raise ValueError("ensemble needs an odd member count")


def train_ensemble(train, weights, kernel=RbfKernel(), seed=0,
                   witness="collectibility", tol=1e-3, max_passes=500_000,
                   standardize=True):
    """11 members on disjoint stratified shards of the training set."""
    members = []
    for sid, sh in enumerate(dataset.shard(train, 11, seed)):
        members.append(train_smo(
            sh.feature_pairs(witness), sh.labels, kernel, weights,
            tol=tol, max_passes=max_passes, meta={"shard": sid},
            standardize=standardize))
    return VotingEnsemble(members, weights)


def predict(ensemble, x):
    """Hard majority vote over the members; 1 = entangled."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    votes = np.zeros(x.shape[0], dtype=np.int64)
    for m in ensemble.members:
        votes += np.where(m.decision_values(x) > 0, 1, -1)
    return (votes > 0).astype(np.int64)


def train_sweep(train, witness, kernel=RbfKernel(), seed=0,
                weights_list=None, tol=1e-3, max_passes=500_000, log=None,
                standardize=True):
    """Train all penalty settings, reusing each shard's kernel matrix.

    Returns a list of (ClassWeights, VotingEnsemble) in sweep order.  The
    shard kernel matrix is the dominant memory object (n_shard^2 floats)
    and is shared by the 12 penalty settings, so members are trained
    shard-major; each penalty warm-starts from the previous one's dual
    point.
    """
    if weights_list is None:
        weights_list = penalty_sweep()
    shards = dataset.shard(train, 11, seed)
    members = [[None] * 11 for _ in weights_list]
    for sid, sh in enumerate(shards):
        feats = sh.feature_pairs(witness)
        if standardize:
            stats = standardization_stats(feats)
            feats_std = (feats - stats[0]) / stats[1]
        else:
            stats = (np.zeros(feats.shape[1]), np.ones(feats.shape[1]))
            feats_std = feats
        k_mat = rbf_matrix(feats_std, feats_std, kernel.gamma)
        beta_prev = None
        for wi, w in enumerate(weights_list):
            members[wi][sid] = train_smo(
                feats, sh.labels, kernel, w, tol=tol, max_passes=max_passes,
                precomputed_kernel=k_mat, meta={"shard": sid},
                feature_stats=stats, beta0=beta_prev)
            beta_prev = members[wi][sid].training_meta["beta_full"]
            if log is not None:
                log(f"shard {sid} w_e={w.w_e:.4f} "
                    f"iters={members[wi][sid].training_meta['iterations']}")
        del k_mat
    return [(w, VotingEnsemble(members[wi], w))
            for wi, w in enumerate(weights_list)]


def sweep_votes(sweep_models, x, block=2048):
    """Hard-vote predictions for every penalty at once: (n, n_penalties).

    Kernel blocks against each shard's support vectors are shared across
    the penalties, which is where the factor-12 saving over per-ensemble
    prediction comes from.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    n_pen = len(sweep_models)
    gamma = sweep_models[0][1].members[0].kernel.gamma
    votes = np.zeros((n, n_pen), dtype=np.int64)
    for sid in range(11):
        svs = [ens.members[sid] for _, ens in sweep_models]
        # One merged SV matrix per shard; each member scatters into it.
        merged = np.unique(np.concatenate(
            [m.training_meta["sv_indices"] for m in svs]))
        pos = {int(v): i for i, v in enumerate(merged)}
        coef = np.zeros((merged.size, n_pen))
        bias = np.zeros(n_pen)
        for wi, m in enumerate(svs):
            idx = [pos[int(v)] for v in m.training_meta["sv_indices"]]
            coef[idx, wi] = m.dual_coefficients
            bias[wi] = m.bias
        # Reconstruct the merged SV coordinates from any member that kept
        # them (members share the shard, so indices and standardization
        # stats agree).
        shard_feats = np.zeros((merged.size, svs[0].support_vectors.shape[1]))
        for wi, m in enumerate(svs):
            idx = [pos[int(v)] for v in m.training_meta["sv_indices"]]
            shard_feats[idx] = m.support_vectors
        offset = svs[0].feature_offset
        scale = svs[0].feature_scale
        for start in range(0, n, block):
            zb = (x[start:start + block] - offset) / scale
            kb = rbf_matrix(zb, shard_feats, gamma)
            votes[start:start + block] += np.where(kb @ coef + bias > 0, 1, -1)
    return (votes > 0).astype(np.int64)


# --- model persistence ---------------------------------------------------

def save_models(path, sweep_models):
    """Self-describing container for a trained sweep (or a single pair)."""
    payload = {"format_version": np.int64(MODEL_FORMAT_VERSION)}
    metas = []
    for wi, (w, ens) in enumerate(sweep_models):
        for mi, m in enumerate(ens.members):
            tag = f"p{wi}_m{mi}"
            payload[tag + "_sv"] = m.support_vectors
            payload[tag + "_coef"] = m.dual_coefficients
            payload[tag + "_bias"] = np.float64(m.bias)
            payload[tag + "_svidx"] = np.asarray(
                m.training_meta["sv_indices"], dtype=np.int64)
            payload[tag + "_offset"] = m.feature_offset
            payload[tag + "_scale"] = m.feature_scale
            meta = {k: v for k, v in m.training_meta.items()
                    if k not in ("sv_indices", "beta_full")}
            metas.append({"penalty": wi, "member": mi, "gamma": m.kernel.gamma,
                          "meta": meta})
    payload["meta_json"] = np.frombuffer(
        json.dumps({
            "penalties": [w.w_e for w, _ in sweep_models],
            "members": metas,
        }).encode(), dtype=np.uint8)
    np.savez_compressed(path, **payload)


def load_models(path):
    with np.load(path) as z:
        version = int(z["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        info = json.loads(bytes(z["meta_json"]).decode())
        out = []
        for wi, w_e in enumerate(info["penalties"]):
            members = [None] * 11
            for rec in info["members"]:
                if rec["penalty"] != wi:
                    continue
                mi = rec["member"]
                tag = f"p{wi}_m{mi}"
                meta = dict(rec["meta"])
                meta["sv_indices"] = z[tag + "_svidx"]
                members[mi] = TrainedSvc(
                    support_vectors=z[tag + "_sv"],
                    dual_coefficients=z[tag + "_coef"],
                    bias=float(z[tag + "_bias"]),
                    kernel=RbfKernel(rec["gamma"]),
                    training_meta=meta,
                    feature_offset=z[tag + "_offset"],
                    feature_scale=z[tag + "_scale"],
                )
            out.append((ClassWeights.from_w_e(w_e),
                        VotingEnsemble(members, ClassWeights.from_w_e(w_e))))
    return out


# --- reference solver (test oracle) --------------------------------------

def qp_reference_solve(k_mat, labels, weights, iters=20_000, step=None):
    """High-precision dual solve by projected gradient ascent.

    Projection onto {sum beta = 0, lo <= beta <= hi} is exact: clip(beta -
    shift) hits the hyperplane for a unique shift found by bisection.
    Slower but independent of the SMO machinery; used to cross-check signs
    of the decision function.
    """
    y = np.where(np.asarray(labels) > 0, 1.0, -1.0)
    cap = np.where(y > 0, weights.w_e, weights.w_s)
    lo = np.where(y > 0, 0.0, -cap)
    hi = np.where(y > 0, cap, 0.0)

    def project(v):
        s_lo, s_hi = v.min() - hi.max() - 1.0, v.max() - lo.min() + 1.0
        for _ in range(200):
            mid = 0.5 * (s_lo + s_hi)
            if np.clip(v - mid, lo, hi).sum() > 0.0:
                s_lo = mid
            else:
                s_hi = mid
        return np.clip(v - 0.5 * (s_lo + s_hi), lo, hi)

    if step is None:
        step = 1.0 / np.linalg.eigvalsh(k_mat)[-1]
    beta = project(np.zeros(len(y)))
    for _ in range(iters):
        beta = project(beta + step * (y - k_mat @ beta))
    grad = y - k_mat @ beta
    free = (beta > lo + 1e-9) & (beta < hi - 1e-9)
    bias = grad[free].mean() if free.any() else 0.5 * (
        grad[beta >= hi - 1e-9].max() + grad[beta <= lo + 1e-9].min())
    return beta, float(bias)
