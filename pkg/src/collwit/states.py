"""Two-qubit states, single-qubit noise channels, and collective probabilities.

Tensor convention: qubit A is the first factor, qubit B the second, so the
computational basis is ordered |00>, |01>, |10>, |11> and kron(opA, opB)
builds a joint operator.  Throughout, "probe" means the unnormalized 2x2
operator Tr_A[rho (M x 1)] left on qubit B after measuring M on qubit A;
its trace is the outcome probability of M.

The collective probability of projecting two probes onto a two-qubit
operator S is C = Tr[(probe1 x probe2) S], and the reference product
probability is Cbar = Tr[probe1] * Tr[probe2].  Everything downstream
(witnesses, noise equivalence) is built from these two numbers.
"""

import dataclasses

import numpy as np

from .linalg import kron, partial_trace

ID2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

PROJ_0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ_1 = np.array([[0, 0], [0, 1]], dtype=complex)
PROJ_PLUS = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
PROJ_MINUS = 0.5 * np.array([[1, -1], [-1, 1]], dtype=complex)
# Order {0, 1, +, -} is relied on by the witness layer.
BASIS_PROJECTORS = np.stack([PROJ_0, PROJ_1, PROJ_PLUS, PROJ_MINUS])

# Entanglement labelling deadband: partial-transpose eigenvalues carry
# O(1e-14) numerical noise, so "entangled" means negativity above this.
NEGATIVITY_ATOL = 1e-10

STATE_ATOL = 1e-10


def check_density_matrix(rho, atol=STATE_ATOL):
    """Validate the density-matrix invariants; returns rho unchanged.

    Hermitian, unit trace, and positive semidefinite, each within `atol`.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 state, got shape {rho.shape}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > atol:
        raise ValueError(f"state is not Hermitian: asymmetry {herm:.3e}")
    tr = rho.trace()
    if abs(tr - 1.0) > atol:
        raise ValueError(f"state trace {tr} is not 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -atol:
        raise ValueError(f"state has negative eigenvalue {lam_min:.3e}")
    return rho


def bell_phi_plus():
    """Projector onto (|00> + |11>)/sqrt(2)."""
    ket = np.zeros(4, dtype=complex)
    ket[0] = ket[3] = 1.0 / np.sqrt(2.0)
    return np.outer(ket, ket.conj())


def singlet_projector():
    """Projector onto (|01> - |10>)/sqrt(2); equals (I - SWAP)/2."""
    ket = np.zeros(4, dtype=complex)
    ket[1] = 1.0 / np.sqrt(2.0)
    ket[2] = -1.0 / np.sqrt(2.0)
    return np.outer(ket, ket.conj())


BELL_PHI_PLUS = bell_phi_plus()
SINGLET = singlet_projector()
_SINGLET4 = SINGLET.reshape(2, 2, 2, 2)


def werner(p):
    """(1-p) |phi+><phi+| + p I/4."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing probability {p} outside [0, 1]")
    return (1.0 - p) * BELL_PHI_PLUS + p * np.eye(4, dtype=complex) / 4.0


def depolarize(rho, p, qubit="B"):
    """Depolarize one qubit: (1-p) rho + p * (marginal x I/2)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    if qubit == "B":
        mixed = kron(partial_trace(rho, keep="A"), ID2 / 2.0)
    elif qubit == "A":
        mixed = kron(ID2 / 2.0, partial_trace(rho, keep="B"))
    else:
        raise ValueError(f"qubit must be 'A' or 'B', got {qubit!r}")
    return (1.0 - p) * rho + p * mixed


@dataclasses.dataclass(frozen=True)
class KrausChannel:
    """A single-qubit CPTP map given by its Kraus operators."""

    kraus_ops: tuple
    label: str = ""

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        object.__setattr__(self, "kraus_ops", ops)
        total = sum(k.conj().T @ k for k in ops)
        if np.abs(total - ID2).max() > STATE_ATOL:
            raise ValueError(f"channel {self.label!r} is not trace-preserving")

    def apply(self, rho2):
        """Schroedinger action on a 2x2 operator."""
        return sum(k @ rho2 @ k.conj().T for k in self.kraus_ops)

    def apply_to_qubit(self, rho4, qubit="B"):
        """Act on one qubit of a two-qubit operator."""
        if qubit == "B":
            ops = [kron(ID2, k) for k in self.kraus_ops]
        elif qubit == "A":
            ops = [kron(k, ID2) for k in self.kraus_ops]
        else:
            raise ValueError(f"qubit must be 'A' or 'B', got {qubit!r}")
        return sum(k @ rho4 @ k.conj().T for k in ops)


def identity_channel():
    return KrausChannel((ID2,), label="identity")


def depolarizing_channel(p):
    """Kraus form of the single-qubit depolarizing map with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    ops = (np.sqrt(1.0 - 0.75 * p) * ID2,
           np.sqrt(0.25 * p) * SIGMA_X,
           np.sqrt(0.25 * p) * SIGMA_Y,
           np.sqrt(0.25 * p) * SIGMA_Z)
    return KrausChannel(ops, label=f"depolarizing({p})")


def phase_damping_channel(gamma):
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping strength {gamma} outside [0, 1]")
    ops = (np.array([[1, 0], [0, np.sqrt(1.0 - gamma)]], dtype=complex),
           np.array([[0, 0], [0, np.sqrt(gamma)]], dtype=complex))
    return KrausChannel(ops, label=f"phase-damping({gamma})")


def amplitude_damping_channel(gamma):
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping strength {gamma} outside [0, 1]")
    ops = (np.array([[1, 0], [0, np.sqrt(1.0 - gamma)]], dtype=complex),
           np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex))
    return KrausChannel(ops, label=f"amplitude-damping({gamma})")


def apply_channel_to_projector(s, ch1, ch2):
    """Heisenberg-picture image of a two-qubit operator under a channel pair.

    Omega = sum_{k,l} (K1_k x K2_l)^dag s (K1_k x K2_l); measuring Omega on
    clean probes equals measuring s on channel-degraded probes.
    """
    out = np.zeros((4, 4), dtype=complex)
    for k1 in ch1.kraus_ops:
        for k2 in ch2.kraus_ops:
            g = kron(k1, k2)
            out += g.conj().T @ s @ g
    return out


def noisy_projector_omega(p):
    """POVM element for measuring |phi+> through depolarizing arms.

    Closed form of apply_channel_to_projector(bell_phi_plus, dep(p), dep(p)):
    (1-p)^2 P+ + (2-p) p I/4, a Werner-type operator with visibility (1-p)^2.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    return (1.0 - p) ** 2 * BELL_PHI_PLUS + (2.0 - p) * p * np.eye(4, dtype=complex) / 4.0


def collective_probe(rho, m):
    """Tr_A[rho (M x 1)]: the 2x2 operator probing qubit B after measuring
    M on qubit A.  Its trace is the outcome probability of M."""
    r = np.asarray(rho).reshape(2, 2, 2, 2)
    return np.einsum("abcd,ca->bd", r, np.asarray(m, dtype=complex))


def probes(rho, ops):
    """Batched probes: rho (n,4,4), ops (m,2,2) -> (n,m,2,2)."""
    r = np.asarray(rho).reshape(-1, 2, 2, 2, 2)
    return np.einsum("nabcd,mca->nmbd", r, ops)


def collective_prob_C(chi1, chi2, m1, m2, s):
    """C = Tr[(probe(chi1,m1) x probe(chi2,m2)) s].

    Equals the full two-copy trace Tr[(chi1 x chi2)(M1 x 1 x M2 x 1)(s on
    the B pair)]; see collective_prob_C_direct for that oracle wiring.  The
    imaginary residue is <= 1e-12 for Hermitian inputs and is dropped.
    """
    p1 = collective_probe(chi1, m1)
    p2 = collective_probe(chi2, m2)
    c = np.einsum("ik,jl,klij->", p1, p2, np.asarray(s).reshape(2, 2, 2, 2))
    return float(c.real)


def marginal_prob_Cbar(chi1, chi2, m1, m2):
    """Cbar = Tr[chi1 (M1 x 1)] * Tr[chi2 (M2 x 1)].

    Invariant under any trace-preserving channel on the B qubits.
    """
    t1 = np.einsum("abcb,ca->", np.asarray(chi1).reshape(2, 2, 2, 2),
                   np.asarray(m1, dtype=complex))
    t2 = np.einsum("abcb,ca->", np.asarray(chi2).reshape(2, 2, 2, 2),
                   np.asarray(m2, dtype=complex))
    return float((t1 * t2).real)


def collective_prob_C_direct(chi1, chi2, m1, m2, s):
    """Oracle route for C: literal 16x16 two-copy trace.

    Builds the operator M1_{A1} x M2_{A2} x s_{B1B2} on the full
    (A1,B1,A2,B2) space and traces it against kron(chi1, chi2).
    """
    s4 = np.asarray(s).reshape(2, 2, 2, 2)
    op = np.einsum("ca,ge,dhbf->cdghabef",
                   np.asarray(m1, dtype=complex),
                   np.asarray(m2, dtype=complex), s4).reshape(16, 16)
    return float(np.trace(kron(np.asarray(chi1), np.asarray(chi2)) @ op).real)


def collective_purity(rho):
    """Oracle route for purity: Tr[(rho x rho)((1-2S) x (1-2S))].

    1 - 2S is the SWAP operator; acting pairwise on the A and B copies it
    swaps the two state copies, so the trace collapses to Tr rho^2.
    """
    m = np.eye(4) - 2.0 * SINGLET
    m4 = m.reshape(2, 2, 2, 2)
    op = np.einsum("aecg,bfdh->abefcdgh", m4, m4).reshape(16, 16)
    return float(np.trace(kron(rho, rho) @ op).real)


def purity(rho):
    """Tr rho^2."""
    rho = np.asarray(rho)
    return float(np.einsum("ij,ji->", rho, rho).real)


def purity_batched(rho):
    return np.einsum("nij,nji->n", rho, rho).real


def negativity(rho):
    """Sum of negative partial-transpose eigenvalues, sign-flipped."""
    return float(negativity_batched(np.asarray(rho)[None])[0])


def negativity_batched(rho):
    n = rho.shape[0]
    pt = rho.reshape(n, 2, 2, 2, 2).transpose(0, 1, 4, 3, 2).reshape(n, 4, 4)
    ev = np.linalg.eigvalsh(pt)
    return np.where(ev < 0.0, -ev, 0.0).sum(axis=1)


def is_entangled(neg):
    """PPT label from negativity, with the numerical deadband applied."""
    return np.asarray(neg) > NEGATIVITY_ATOL


# --- strategy-equivalence harness ----------------------------------------

def _random_hs_state(rng):
    """A generic 4x4 state: normalized Ginibre square (Hilbert-Schmidt)."""
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = g @ g.conj().T
    return m / np.trace(m).real


def _random_rank1_projector(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def _random_channel(rng):
    kind = int(rng.integers(4))
    p = float(rng.uniform(0.05, 0.95))
    return (identity_channel(), depolarizing_channel(p),
            phase_damping_channel(p), amplitude_damping_channel(p))[kind]


def equivalence_deviation(rng, s=None):
    """One randomized strategy-equivalence trial.

    Compares measuring `s` on channel-degraded probes (strategy a) with
    measuring the channel-conjugated POVM on clean probes (strategy b),
    and checks that the normalization Cbar ignores the channels entirely.
    Returns (|C_a - C_b|, |dCbar|, channel labels).
    """
    if s is None:
        s = SINGLET
    chi1, chi2 = _random_hs_state(rng), _random_hs_state(rng)
    m1, m2 = _random_rank1_projector(rng), _random_rank1_projector(rng)
    ch1, ch2 = _random_channel(rng), _random_channel(rng)
    noisy1 = ch1.apply_to_qubit(chi1, qubit="B")
    noisy2 = ch2.apply_to_qubit(chi2, qubit="B")
    c_a = collective_prob_C(noisy1, noisy2, m1, m2, s)
    omega = apply_channel_to_projector(s, ch1, ch2)
    c_b = collective_prob_C(chi1, chi2, m1, m2, omega)
    dbar = abs(marginal_prob_Cbar(noisy1, noisy2, m1, m2)
               - marginal_prob_Cbar(chi1, chi2, m1, m2))
    return abs(c_a - c_b), dbar, (ch1.label, ch2.label)


def equivalence_deviations(trials, rng):
    """Worst deviations over many randomized trials.

    Returns a dict with the max |C_a - C_b|, max |dCbar|, and the channel
    labels of the worst tuple (for failure reports).
    """
    worst_c = worst_cbar = 0.0
    worst_tuple = None
    for t in range(trials):
        dc, dbar, labels = equivalence_deviation(rng)
        if max(dc, dbar) >= max(worst_c, worst_cbar):
            worst_tuple = (t, *labels)
        worst_c = max(worst_c, dc)
        worst_cbar = max(worst_cbar, dbar)
    return {"max_dc": worst_c, "max_dcbar": worst_cbar,
            "worst_tuple": worst_tuple}
