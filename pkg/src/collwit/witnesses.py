"""Collective entanglement witnesses from two-copy measurement statistics.

All three witnesses are functions of collective probabilities C and their
marginal references Cbar (see `states`), with the singlet projector as the
collective measurement throughout:

* collectibility W: built from the ratios X_ij = C/Cbar over the logical
  and Hadamard projector pairs; W < 0 flags entanglement.
* entropic witness: (Tr R - 1)/2 where R is the Pauli correlation matrix
  R_mn = Cbar(sigma_m, sigma_n) - 4 C(sigma_m, sigma_n); > 0 flags.
* CHSH witness: Tr R - min eig R - 1; > 0 flags.

R coincides with T T^t for the ordinary correlation tensor
T_mn = Tr[rho sigma_m x sigma_n]; that identity is the oracle route used in
tests and is exposed here as pauli_T.

Batched *_batched functions carry the dataset pipeline; the scalar wrappers
delegate to them.
"""

import dataclasses

import numpy as np

from . import states
from .states import NEGATIVITY_ATOL, SINGLET, _SINGLET4

# Below this, a Cbar denominator counts as zero and the ratio X = C/Cbar is
# set to 0 (C <= Cbar forces C -> 0 with it; the |00> boundary value W = 0
# is preserved by this convention).
CBAR_ZERO_ATOL = 1e-14

# Multiply a raw witness value by its orientation to get "positive means
# entangled"; collectibility detects below zero, the other two above.
ORIENTATIONS = {"collectibility": -1.0, "chsh": 1.0, "entropic": 1.0}

WITNESS_NAMES = ("collectibility", "chsh", "entropic")


def _ratio(c, cbar):
    out = np.zeros_like(c)
    ok = cbar > CBAR_ZERO_ATOL
    out[ok] = c[ok] / cbar[ok]
    return out


def _pair_c(p, i, j):
    return np.einsum("nik,njl,klij->n", p[:, i], p[:, j], _SINGLET4).real


@dataclasses.dataclass(frozen=True)
class XQuantities:
    """The probability ratios entering the collectibility formula."""

    x0: float
    x1: float
    x00: float
    x11: float
    x01: float
    xpp: float
    xmm: float
    eta: float


def x_arrays(rho):
    """Batched X quantities: (n,4,4) states -> dict of length-n arrays."""
    p = states.probes(rho, states.BASIS_PROJECTORS)
    t = np.einsum("nmii->nm", p).real
    x0, x1 = t[:, 0], t[:, 1]
    x00 = _ratio(_pair_c(p, 0, 0), t[:, 0] * t[:, 0])
    x11 = _ratio(_pair_c(p, 1, 1), t[:, 1] * t[:, 1])
    x01 = _ratio(_pair_c(p, 0, 1), t[:, 0] * t[:, 1])
    xpp = _ratio(_pair_c(p, 2, 2), t[:, 2] * t[:, 2])
    xmm = _ratio(_pair_c(p, 3, 3), t[:, 3] * t[:, 3])
    eta = (16.0 * x0 * x1 * np.sqrt(np.maximum(x00 * x11, 0.0))
           + 4.0 * np.maximum(xpp, xmm))
    return {"x0": x0, "x1": x1, "x00": x00, "x11": x11, "x01": x01,
            "xpp": xpp, "xmm": xmm, "eta": eta}


def x_quantities(rho):
    xs = x_arrays(np.asarray(rho)[None])
    return XQuantities(**{k: float(v[0]) for k, v in xs.items()})


def collectibility_batched(rho):
    xs = x_arrays(rho)
    x0, x1 = xs["x0"], xs["x1"]
    return 0.5 * (xs["eta"]
                  + x0 * x0 * (1.0 - 2.0 * xs["x00"])
                  + x1 * x1 * (1.0 - 2.0 * xs["x11"])
                  + 2.0 * x0 * x1 * (1.0 - 2.0 * xs["x01"])
                  - 1.0)


def collectibility(rho):
    return float(collectibility_batched(np.asarray(rho)[None])[0])


def correlation_matrix_batched(rho):
    """R_mn = Cbar(sigma_m, sigma_n) - 4 C(sigma_m, sigma_n), (n,3,3)."""
    p = states.probes(rho, states.PAULIS)
    t = np.einsum("nmii->nm", p).real
    c = np.einsum("nmik,nojl,klij->nmo", p, p, _SINGLET4).real
    return t[:, :, None] * t[:, None, :] - 4.0 * c


def correlation_matrix(rho):
    return correlation_matrix_batched(np.asarray(rho)[None])[0]


def pauli_T(rho):
    """Oracle: the plain correlation tensor T_mn = Tr[rho sigma_m x sigma_n].

    R equals T T^t; computing T needs joint measurements on a single copy,
    which is exactly what the collective scheme avoids, hence "oracle".
    """
    ops = np.stack([np.kron(a, b) for a in states.PAULIS for b in states.PAULIS])
    t = np.einsum("nij,mji->nm", np.asarray(rho).reshape(-1, 4, 4), ops).real
    return t.reshape(-1, 3, 3)


def _witnesses_from_r(r):
    tr = np.trace(r, axis1=1, axis2=2)
    entropic = 0.5 * (tr - 1.0)
    chsh = tr - np.linalg.eigvalsh(r)[:, 0] - 1.0
    return chsh, entropic


def chsh_witness(rho):
    return float(_witnesses_from_r(correlation_matrix_batched(np.asarray(rho)[None]))[0][0])


def entropic_witness(rho):
    return float(_witnesses_from_r(correlation_matrix_batched(np.asarray(rho)[None]))[1][0])


@dataclasses.dataclass(frozen=True)
class WitnessRecord:
    """Purity, the three raw witness values, negativity, and the PPT label."""

    purity: float
    collectibility: float
    chsh: float
    entropic: float
    negativity: float
    label: str

    @property
    def entangled(self):
        return self.label == "entangled"


def witness_arrays(rho):
    """All per-state record fields for a batch: dict of length-n arrays."""
    rho = np.asarray(rho)
    chsh, entropic = _witnesses_from_r(correlation_matrix_batched(rho))
    neg = states.negativity_batched(rho)
    return {
        "purity": states.purity_batched(rho),
        "collectibility": collectibility_batched(rho),
        "chsh": chsh,
        "entropic": entropic,
        "negativity": neg,
        "label": states.is_entangled(neg).astype(np.int64),
    }


def witness_record(rho):
    arr = witness_arrays(np.asarray(rho)[None])
    return WitnessRecord(
        purity=float(arr["purity"][0]),
        collectibility=float(arr["collectibility"][0]),
        chsh=float(arr["chsh"][0]),
        entropic=float(arr["entropic"][0]),
        negativity=float(arr["negativity"][0]),
        label="entangled" if arr["label"][0] else "separable",
    )


# --- Werner family closed forms (visibility v = 1 - p) ------------------

def werner_collectibility(p):
    return (-1.0 + 8.0 * np.asarray(p, dtype=float) - 4.0 * np.asarray(p, dtype=float) ** 2) / 4.0


def werner_chsh(p):
    return 2.0 * (1.0 - np.asarray(p, dtype=float)) ** 2 - 1.0


def werner_entropic(p):
    return (3.0 * (1.0 - np.asarray(p, dtype=float)) ** 2 - 1.0) / 2.0


WERNER_CLOSED_FORMS = {
    "collectibility": werner_collectibility,
    "chsh": werner_chsh,
    "entropic": werner_entropic,
}

# Mixing probabilities where each witness stops flagging werner(p).
WERNER_THRESHOLDS = {
    "collectibility": 1.0 - np.sqrt(3.0) / 2.0,
    "chsh": 1.0 - 1.0 / np.sqrt(2.0),
    "entropic": 1.0 - 1.0 / np.sqrt(3.0),
}


def bisect_zero(f, lo, hi, tol=1e-12, max_iter=200):
    """Root of a scalar function by bisection; f(lo) and f(hi) must differ
    in sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
