"""States, channels, and collective probabilities.

Closed-form anchors (Bell/Werner values, the depolarizing POVM) plus the
oracle routes: the 16x16 direct trace for C and the two-copy swap formula
for purity.  The randomized strategy-equivalence harness gets a smoke test
here; the full 1000-tuple run lives in the acceptance suite.
"""

import numpy as np
import pytest

from collwit import linalg, sampling, states


@pytest.fixture(scope="module")
def rng():
    return np.random.Generator(np.random.Philox(key=np.uint64(1234)))


def random_states(n, rng):
    return sampling.random_density_matrices(n, rng)


# --- density-matrix validation -------------------------------------------

def test_check_density_matrix_accepts_valid(rng):
    for rho in random_states(20, rng):
        assert states.check_density_matrix(rho) is not None


def test_check_density_matrix_rejects_shape():
    with pytest.raises(ValueError, match="shape"):
        states.check_density_matrix(np.eye(3) / 3.0)


def test_check_density_matrix_rejects_non_hermitian():
    rho = np.eye(4, dtype=complex) / 4.0
    rho[0, 1] = 0.1
    with pytest.raises(ValueError, match="Hermitian"):
        states.check_density_matrix(rho)


def test_check_density_matrix_rejects_trace():
    with pytest.raises(ValueError, match="trace"):
        states.check_density_matrix(np.eye(4, dtype=complex) / 2.0)


def test_check_density_matrix_rejects_negative_eigenvalue():
    rho = np.diag([1.2, -0.2, 0.0, 0.0]).astype(complex)
    with pytest.raises(ValueError, match="negative eigenvalue"):
        states.check_density_matrix(rho)


# --- fixed states ---------------------------------------------------------

def test_bell_phi_plus_form():
    p = states.bell_phi_plus()
    expect = np.zeros((4, 4), dtype=complex)
    expect[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.abs(p - expect).max() < 1e-15
    assert np.abs(p @ p - p).max() < 1e-15      # projector
    assert abs(np.trace(p) - 1.0) < 1e-15


def test_singlet_projector_identities():
    s = states.singlet_projector()
    assert np.abs(s @ s - s).max() < 1e-15
    assert abs(np.trace(s) - 1.0) < 1e-15
    swap = np.zeros((4, 4))
    swap[0, 0] = swap[3, 3] = swap[1, 2] = swap[2, 1] = 1.0
    assert np.abs(s - 0.5 * (np.eye(4) - swap)).max() < 1e-15
    pauli_sum = sum(linalg.kron(p, p) for p in states.PAULIS)
    assert np.abs(s - 0.25 * (np.eye(4) - pauli_sum)).max() < 1e-14


def test_werner_endpoints_and_range():
    assert np.abs(states.werner(0.0) - states.BELL_PHI_PLUS).max() < 1e-15
    assert np.abs(states.werner(1.0) - np.eye(4) / 4.0).max() < 1e-15
    with pytest.raises(ValueError):
        states.werner(-0.01)
    with pytest.raises(ValueError):
        states.werner(1.01)


def test_werner_purity_closed_form():
    for p in np.linspace(0.0, 1.0, 11):
        expect = (1.0 - p) ** 2 * 0.75 + 0.25
        assert states.purity(states.werner(p)) == pytest.approx(expect,
                                                               abs=1e-12)


def test_werner_negativity_closed_form():
    for p in np.linspace(0.0, 1.0, 21):
        expect = max(0.0, (3.0 * (1.0 - p) - 1.0) / 4.0)
        assert states.negativity(states.werner(p)) == pytest.approx(
            expect, abs=1e-12)


def test_negativity_bell_and_product():
    assert states.negativity(states.BELL_PHI_PLUS) == pytest.approx(0.5)
    prod = np.zeros((4, 4), dtype=complex)
    prod[0, 0] = 1.0
    assert states.negativity(prod) == pytest.approx(0.0, abs=1e-14)


def test_is_entangled_deadband():
    assert not states.is_entangled(0.0)
    assert not states.is_entangled(0.5e-10)
    assert states.is_entangled(1e-9)


# --- channels -------------------------------------------------------------

def test_depolarize_endpoints(rng):
    rho = random_states(1, rng)[0]
    assert np.abs(states.depolarize(rho, 0.0) - rho).max() < 1e-15
    full = states.depolarize(rho, 1.0, qubit="B")
    expect = linalg.kron(linalg.partial_trace(rho, keep="A"),
                         np.eye(2) / 2.0)
    assert np.abs(full - expect).max() < 1e-14
    mixed = np.eye(4, dtype=complex) / 4.0
    assert np.abs(states.depolarize(mixed, 0.37) - mixed).max() < 1e-15
    with pytest.raises(ValueError):
        states.depolarize(rho, 0.5, qubit="C")


def test_depolarize_matches_kraus_channel(rng):
    rho = random_states(1, rng)[0]
    for p in (0.0, 0.3, 1.0):
        ch = states.depolarizing_channel(p)
        for qubit in ("A", "B"):
            assert np.abs(states.depolarize(rho, p, qubit=qubit)
                          - ch.apply_to_qubit(rho, qubit=qubit)).max() < 1e-12


@pytest.mark.parametrize("factory,arg", [
    (states.identity_channel, None),
    (states.depolarizing_channel, 0.41),
    (states.phase_damping_channel, 0.27),
    (states.amplitude_damping_channel, 0.63),
])
def test_channels_trace_preserving(factory, arg, rng):
    ch = factory() if arg is None else factory(arg)
    total = sum(k.conj().T @ k for k in ch.kraus_ops)
    assert np.abs(total - np.eye(2)).max() < 1e-12
    rho = random_states(1, rng)[0]
    out = ch.apply_to_qubit(rho, qubit="B")
    assert abs(np.trace(out) - 1.0) < 1e-12
    assert np.linalg.eigvalsh(out)[0] > -1e-12


def test_kraus_channel_rejects_non_trace_preserving():
    with pytest.raises(ValueError, match="trace-preserving"):
        states.KrausChannel((0.9 * np.eye(2),), label="lossy")


def test_channel_apply_consistency(rng):
    ch = states.amplitude_damping_channel(0.4)
    rho = random_states(1, rng)[0]
    onb = ch.apply_to_qubit(rho, qubit="B")
    # acting on B commutes with tracing out B's complement
    probe = linalg.partial_trace(rho, keep="B")
    assert np.abs(linalg.partial_trace(onb, keep="B")
                  - ch.apply(probe)).max() < 1e-12


# --- the noisy POVM -------------------------------------------------------

def test_noisy_projector_omega_endpoints():
    assert np.abs(states.noisy_projector_omega(0.0)
                  - states.BELL_PHI_PLUS).max() < 1e-15
    assert np.abs(states.noisy_projector_omega(1.0)
                  - np.eye(4) / 4.0).max() < 1e-15
    with pytest.raises(ValueError):
        states.noisy_projector_omega(1.5)


def test_noisy_projector_omega_closed_form():
    for p in (0.0, 0.123, 0.3, 0.77, 1.0):
        built = states.apply_channel_to_projector(
            states.BELL_PHI_PLUS, states.depolarizing_channel(p),
            states.depolarizing_channel(p))
        assert np.abs(built - states.noisy_projector_omega(p)).max() < 1e-13


def test_apply_channel_identity_and_unitality(rng):
    ident = states.identity_channel()
    s = states.SINGLET
    assert np.abs(states.apply_channel_to_projector(s, ident, ident)
                  - s).max() < 1e-15
    ch1 = states.phase_damping_channel(0.5)
    ch2 = states.amplitude_damping_channel(0.2)
    out = states.apply_channel_to_projector(np.eye(4, dtype=complex),
                                            ch1, ch2)
    assert np.abs(out - np.eye(4)).max() < 1e-12


# --- collective probabilities ---------------------------------------------

def test_collective_probe_trace_is_probability(rng):
    rho = random_states(1, rng)[0]
    m = states.PROJ_PLUS
    probe = states.collective_probe(rho, m)
    direct = np.trace(rho @ linalg.kron(m, np.eye(2))).real
    assert np.trace(probe).real == pytest.approx(direct, abs=1e-12)


def test_probes_batched_matches_scalar(rng):
    rho = random_states(5, rng)
    batch = states.probes(rho, states.BASIS_PROJECTORS)
    for i in range(5):
        for j, m in enumerate(states.BASIS_PROJECTORS):
            assert np.abs(batch[i, j]
                          - states.collective_probe(rho[i], m)).max() < 1e-13


def test_collective_prob_c_bell_values():
    p = states.BELL_PHI_PLUS
    pi0, pi1 = states.PROJ_0, states.PROJ_1
    s = states.SINGLET
    assert states.collective_prob_C(p, p, pi0, pi0, s) == pytest.approx(
        0.0, abs=1e-14)
    assert states.collective_prob_C(p, p, pi0, pi1, s) == pytest.approx(
        0.125, abs=1e-14)


def test_collective_prob_c_identity_reduces_to_cbar(rng):
    chi1, chi2 = random_states(2, rng)
    m1, m2 = states.PROJ_PLUS, states.PROJ_0
    c = states.collective_prob_C(chi1, chi2, m1, m2, np.eye(4))
    cbar = states.marginal_prob_Cbar(chi1, chi2, m1, m2)
    assert c == pytest.approx(cbar, abs=1e-12)


def test_marginal_prob_cbar_values():
    p = states.BELL_PHI_PLUS
    assert states.marginal_prob_Cbar(p, p, states.PROJ_0,
                                     states.PROJ_0) == pytest.approx(0.25)
    assert states.marginal_prob_Cbar(p, p, np.eye(2),
                                     np.eye(2)) == pytest.approx(1.0)


def test_marginal_prob_cbar_channel_invariance(rng):
    chi1, chi2 = random_states(2, rng)
    m1, m2 = states.PROJ_0, states.PROJ_MINUS
    base = states.marginal_prob_Cbar(chi1, chi2, m1, m2)
    for p in (0.2, 0.9):
        noisy1 = states.depolarize(chi1, p, qubit="B")
        noisy2 = states.depolarize(chi2, p, qubit="B")
        assert states.marginal_prob_Cbar(noisy1, noisy2, m1,
                                         m2) == pytest.approx(base,
                                                              abs=1e-12)


def test_collective_prob_c_matches_direct_oracle(rng):
    chi = random_states(40, rng)
    for i in range(20):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        m1 = np.outer(v, v.conj())
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        w /= np.linalg.norm(w)
        m2 = np.outer(w, w.conj())
        fast = states.collective_prob_C(chi[2 * i], chi[2 * i + 1],
                                        m1, m2, states.SINGLET)
        slow = states.collective_prob_C_direct(chi[2 * i], chi[2 * i + 1],
                                               m1, m2, states.SINGLET)
        assert fast == pytest.approx(slow, abs=1e-12)


def test_c_bounded_by_cbar_for_projectors(rng):
    chi = random_states(60, rng)
    for i in range(30):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        m = np.outer(v, v.conj())
        c = states.collective_prob_C(chi[2 * i], chi[2 * i + 1], m, m,
                                     states.SINGLET)
        cbar = states.marginal_prob_Cbar(chi[2 * i], chi[2 * i + 1], m, m)
        assert -1e-12 <= c <= cbar + 1e-12 <= 1.0 + 1e-12


def test_collective_purity_oracle(rng):
    for rho in random_states(50, rng):
        assert states.collective_purity(rho) == pytest.approx(
            states.purity(rho), abs=1e-12)


def test_purity_batched_matches_scalar(rng):
    rho = random_states(10, rng)
    batch = states.purity_batched(rho)
    for i in range(10):
        assert batch[i] == pytest.approx(states.purity(rho[i]), abs=1e-13)
    assert states.purity(np.eye(4) / 4.0) == pytest.approx(0.25)
    assert states.purity(states.BELL_PHI_PLUS) == pytest.approx(1.0)


def test_negativity_batched_matches_scalar(rng):
    rho = random_states(10, rng)
    batch = states.negativity_batched(rho)
    for i in range(10):
        assert batch[i] == pytest.approx(states.negativity(rho[i]),
                                         abs=1e-13)


# --- strategy equivalence (smoke; full run in acceptance) -----------------

def test_equivalence_deviation_small(rng):
    for _ in range(50):
        dc, dbar, labels = states.equivalence_deviation(rng)
        assert dc < 1e-11
        assert dbar < 1e-11
        assert len(labels) == 2


def test_equivalence_deviations_summary(rng):
    worst = states.equivalence_deviations(25, rng)
    assert worst["max_dc"] < 1e-11
    assert worst["max_dcbar"] < 1e-11
    assert worst["worst_tuple"] is not None
