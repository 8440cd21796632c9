import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collwit import linalg


def random_complex(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_hermitian(rng, n=4):
    m = random_complex(rng, n, n)
    return 0.5 * (m + m.conj().T)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_kron_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    a, b = random_complex(rng, 2, 2), random_complex(rng, 2, 2)
    assert np.allclose(linalg.kron(a, b), np.kron(a, b), atol=1e-14)


def test_dagger_and_frobenius():
    rng = np.random.default_rng(0)
    m = random_complex(rng, 4, 4)
    assert np.array_equal(linalg.dagger(m), m.conj().T)
    assert np.isclose(linalg.frobenius(m), np.linalg.norm(m))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_hermitian_eigs_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng)
    w = linalg.hermitian_eigs(h)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-10)


def test_hermitian_eigs_vectors_reconstruct():
    rng = np.random.default_rng(1)
    h = random_hermitian(rng)
    w, v = linalg.hermitian_eigs(h, want_vectors=True)
    assert np.allclose((v * w) @ v.conj().T, h, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-12)


def test_hermitian_eigs_rejects_non_hermitian():
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError, match="[Hh]ermitian|asymmetry"):
        linalg.hermitian_eigs(m)


def test_hermitian_eigs_batched_agrees():
    rng = np.random.default_rng(2)
    hs = np.stack([random_hermitian(rng) for _ in range(8)])
    w = linalg.hermitian_eigs_batched(hs)
    for i in range(8):
        assert np.allclose(w[i], np.linalg.eigvalsh(hs[i]), atol=1e-10)


def test_partial_transpose_on_kron_factors():
    rng = np.random.default_rng(3)
    a, b = random_complex(rng, 2, 2), random_complex(rng, 2, 2)
    m = np.kron(a, b)
    assert np.allclose(linalg.partial_transpose(m, "B"), np.kron(a, b.T),
                       atol=1e-14)
    assert np.allclose(linalg.partial_transpose(m, "A"), np.kron(a.T, b),
                       atol=1e-14)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_partial_transpose_involution_and_composition(seed):
    rng = np.random.default_rng(seed)
    m = random_complex(rng, 4, 4)
    for sub in ("A", "B"):
        assert np.array_equal(
            linalg.partial_transpose(linalg.partial_transpose(m, sub), sub),
            m)
    both = linalg.partial_transpose(linalg.partial_transpose(m, "A"), "B")
    assert np.allclose(both, m.T, atol=1e-14)


def test_partial_trace_on_kron_factors():
    rng = np.random.default_rng(4)
    a, b = random_complex(rng, 2, 2), random_complex(rng, 2, 2)
    m = np.kron(a, b)
    assert np.allclose(linalg.partial_trace(m, keep="A"), a * np.trace(b),
                       atol=1e-13)
    assert np.allclose(linalg.partial_trace(m, keep="B"), b * np.trace(a),
                       atol=1e-13)


def test_partial_trace_preserves_trace():
    rng = np.random.default_rng(5)
    m = random_complex(rng, 4, 4)
    for keep in ("A", "B"):
        assert np.isclose(np.trace(linalg.partial_trace(m, keep)),
                          np.trace(m), atol=1e-13)


def test_hs_distance_properties():
    rng = np.random.default_rng(6)
    a, b = random_hermitian(rng), random_hermitian(rng)
    assert linalg.hs_distance(a, a) == 0.0
    assert np.isclose(linalg.hs_distance(a, b), linalg.hs_distance(b, a))
    assert np.isclose(linalg.hs_distance(a, b),
                      np.linalg.norm(a - b))
    batched = linalg.hs_distance_batched(np.stack([a, a]), np.stack([b, a]))
    assert np.allclose(batched, [linalg.hs_distance(a, b), 0.0])


def test_check_finite_rejects_nan():
    m = np.full((2, 2), np.nan)
    with pytest.raises(ValueError):
        linalg.check_finite(m)
