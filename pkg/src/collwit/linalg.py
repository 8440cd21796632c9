"""Dense complex linear algebra for small (2-, 3-, 4-, 16-dim) operators.

Everything downstream works on plain complex ndarrays.  Two-qubit operators
are 4x4 with the A (measured) qubit as the first tensor factor and the B
(projected) qubit as the second, so an index pair (i, j) of a 4x4 matrix
decomposes as i = 2*a + b with a on A and b on B.

Batched variants accept arrays of shape (n, d, d) and are used by the
dataset pipeline; the scalar entry points validate their inputs and are the
ones exposed to user code.
"""

import numpy as np

HERM_ATOL = 1e-10
_ZERO_FLOOR = 1e-14


def kron(a, b):
    """Kronecker product of two matrices (standard block layout)."""
    return np.kron(np.asarray(a), np.asarray(b))


def dagger(m):
    return np.conjugate(np.swapaxes(np.asarray(m), -1, -2))


def frobenius(m):
    return float(np.linalg.norm(np.asarray(m)))


def check_finite(m, name="matrix"):
    m = np.asarray(m)
    if not np.all(np.isfinite(m.view(float) if np.iscomplexobj(m) else m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def asymmetry(h):
    """Frobenius norm of the anti-Hermitian part, ||H - H^dag||_F."""
    h = np.asarray(h)
    return float(np.linalg.norm(h - dagger(h)))


def hermitian_eigs(h, want_vectors=False, atol=HERM_ATOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns eigenvalues sorted ascending (and the orthonormal eigenvector
    columns when requested).  Non-Hermitian input is rejected with the
    measured asymmetry so callers see how far off they were.  The tolerance
    scales with the matrix norm, with an absolute floor for near-zero input.
    """
    h = check_finite(h, "hermitian_eigs input")
    scale = max(frobenius(h), _ZERO_FLOOR)
    asym = asymmetry(h)
    if asym > atol * max(scale, 1.0):
        raise ValueError(
            f"matrix is not Hermitian: ||H - H^dag||_F = {asym:.3e}"
        )
    hs = 0.5 * (h + dagger(h))
    if want_vectors:
        w, v = np.linalg.eigh(hs)
        return w, v
    return np.linalg.eigvalsh(hs)


def hermitian_eigs_batched(h):
    """Ascending eigenvalues for a (n, d, d) batch of Hermitian matrices."""
    return np.linalg.eigvalsh(h)


def partial_transpose(m, subsystem="B"):
    """Partial transpose of a 4x4 two-qubit operator on qubit A or B.

    Involutive; for a product operator a (x) b it transposes only the chosen
    factor.
    """
    m = np.asarray(m)
    if m.shape[-2:] != (4, 4):
        raise ValueError(f"partial_transpose expects 4x4, got {m.shape}")
    t = m.reshape(m.shape[:-2] + (2, 2, 2, 2))
    if subsystem == "B":
        t = t.transpose(tuple(range(t.ndim - 4)) + (t.ndim - 4, t.ndim - 1, t.ndim - 2, t.ndim - 3))
    elif subsystem == "A":
        t = t.transpose(tuple(range(t.ndim - 4)) + (t.ndim - 2, t.ndim - 3, t.ndim - 4, t.ndim - 1))
    else:
        raise ValueError("subsystem must be 'A' or 'B'")
    return t.reshape(m.shape)


def partial_trace(m, keep="A"):
    """Trace out one qubit of a 4x4 operator, returning the kept 2x2 factor."""
    m = np.asarray(m)
    if m.shape[-2:] != (4, 4):
        raise ValueError(f"partial_trace expects 4x4, got {m.shape}")
    t = m.reshape(m.shape[:-2] + (2, 2, 2, 2))
    if keep == "A":
        return np.einsum("...ibjb->...ij", t)
    if keep == "B":
        return np.einsum("...aiaj->...ij", t)
    raise ValueError("keep must be 'A' or 'B'")


def hs_distance(a, b):
    """Hilbert-Schmidt distance sqrt(Tr[(a-b)^dag (a-b)])."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def hs_distance_batched(a, b):
    d = a - b
    return np.sqrt(np.einsum("nij,nij->n", d, d.conj()).real)
