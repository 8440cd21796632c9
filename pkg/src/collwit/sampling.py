"""Random-state generation with a counter-based reproducibility contract.

Two samplers live here:

* the "natural" generator: eigenvalues uniform on the probability simplex,
  eigenbasis Haar-random via QR of a complex Ginibre matrix (phase-fixed).
  Its purity distribution is far from uniform, which is why the dataset
  builder needs the second sampler.

* the stratified generator: states drawn at a *prescribed* purity.  On the
  simplex, the level set {sum lam = 1, sum lam^2 = s} is a sphere centred on
  (1/4,..,1/4) in the zero-sum hyperplane, and the gradient of the purity
  constraint has constant norm on it.  The co-area factor is therefore
  constant, so "uniform on the sphere, rejected to the positive orthant" is
  *exactly* the conditional law of the uniform simplex at fixed purity.
  This makes high-purity bins O(1) per draw where plain rejection from the
  natural generator would need ~1e6-1e12 candidates per accepted state.

Reproducibility: every dataset attempt consumes a fixed block of 36 uniform
doubles from a Philox stream whose 256-bit counter encodes (attempt, cell).
Philox emits 4 doubles per counter tick, so attempt k starts exactly at tick
9k and any (seed, source_index) pair can be replayed without generating its
predecessors.  Normal variates are produced by Box-Muller (fixed
consumption), never by the ziggurat (variable consumption).
"""

import hashlib

import numpy as np

# Fixed per-attempt draw layout (uniform doubles):
#   [0]     purity position within the bin (stratified) / unused (natural)
#   [1:4]   direction draws (stratified) / part of eigenvalue block (natural)
#   [4:36]  32 draws -> 16+16 Box-Muller normals -> complex Ginibre 4x4
# Natural layout uses [0:4] for the four exponential eigenvalue draws.
ATTEMPT_UNIFORMS = 36
_TICKS_PER_ATTEMPT = ATTEMPT_UNIFORMS // 4  # Philox4x64: 4 doubles per tick

# source_index = stream_key * CELL_STRIDE + attempt_number
CELL_STRIDE = 1 << 40

# Stream keys 0..149 are dataset cells (2 per purity bin); the natural
# sampler gets its own key out of that range.
NATURAL_STREAM_KEY = 1000

# Orthonormal basis of the zero-sum hyperplane in R^4 (rows).
PLANE_BASIS = np.array([
    [1.0, -1.0, 0.0, 0.0],
    [1.0, 1.0, -2.0, 0.0],
    [1.0, 1.0, 1.0, -3.0],
]) / np.sqrt([2.0, 6.0, 12.0])[:, None]

# Unit directions (in plane coordinates) towards the four simplex corners.
_CORNER_DIRS = (PLANE_BASIS / np.linalg.norm(PLANE_BASIS, axis=0)).T  # (4, 3)

# Householder reflections taking e_z onto each corner direction; a reflection
# maps spherical caps to spherical caps uniformly, which is all we need.
_EZ = np.array([0.0, 0.0, 1.0])


def _reflection_to(c):
    w = _EZ - c
    n = np.linalg.norm(w)
    if n < 1e-12:
        return np.eye(3)
    w = w / n
    return np.eye(3) - 2.0 * np.outer(w, w)


_CORNER_FRAMES = np.stack([_reflection_to(c) for c in _CORNER_DIRS])  # (4,3,3)

# Above purity 1/2 the maximal eigenvalue exceeds 1/2, so every valid
# direction lies in one of four disjoint spherical caps around the simplex
# corners (tangent to each other at exactly 1/2).  Sampling the caps instead
# of the whole sphere strictly improves acceptance, so the cap mode is used
# from this purity upward; below it the caps no longer cover the valid set
# and the whole sphere is sampled.
CAP_MODE_PURITY = 0.50


def derive_seed(root_seed, label):
    """A 64-bit sub-seed pinned to (root seed, purpose label).

    Labeled hashing (not sequential draws) so adding a new consumer never
    shifts the streams of existing ones.
    """
    h = hashlib.blake2b(f"{label}:{int(root_seed)}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def uniform_block(seed, stream_key, attempt0, n_attempts):
    """The raw (n_attempts, 36) uniform block for a contiguous attempt range."""
    counter = [
        np.uint64(_TICKS_PER_ATTEMPT * attempt0),
        np.uint64(0),
        np.uint64(0),
        np.uint64(stream_key),
    ]
    bg = np.random.Philox(key=np.uint64(seed), counter=counter)
    u = np.random.Generator(bg).random(n_attempts * ATTEMPT_UNIFORMS)
    return u.reshape(n_attempts, ATTEMPT_UNIFORMS)


def _box_muller(u):
    """(..., 2k) uniforms -> (..., 2k) standard normals, fixed consumption."""
    ua = 1.0 - u[..., 0::2]          # (0, 1]: keeps the log finite
    ub = u[..., 1::2]
    r = np.sqrt(-2.0 * np.log(ua))
    ang = 2.0 * np.pi * ub
    z = np.empty_like(u)
    z[..., 0::2] = r * np.cos(ang)
    z[..., 1::2] = r * np.sin(ang)
    return z


def _ginibre_from_uniforms(u32):
    z = _box_muller(u32)
    n = u32.shape[0]
    return z[:, :16].reshape(n, 4, 4) + 1j * z[:, 16:].reshape(n, 4, 4)


def haar_from_ginibre(g):
    """QR of a Ginibre batch with the R-diagonal phase correction.

    The correction d/|d| makes the factorization unique and the Q factor
    exactly Haar distributed.
    """
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def random_haar_unitary(dim, rng):
    """One Haar-random unitary of dimension 2 or 4."""
    if dim not in (2, 4):
        raise ValueError("dim must be 2 or 4")
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return haar_from_ginibre(g[None])[0]


def random_haar_unitaries(dim, n, rng):
    g = rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))
    return haar_from_ginibre(g)


def random_simplex_eigs(dim, rng, n=None):
    """Eigenvalue vectors uniform on the probability simplex.

    Normalized standard exponentials; marginally each component has mean
    1/dim.
    """
    e = rng.standard_exponential((n or 1, dim))
    lam = e / e.sum(axis=1, keepdims=True)
    return lam if n is not None else lam[0]


def states_from_spectra(lam, u):
    """Assemble U diag(lam) U^dag for batched eigenvalues and unitaries."""
    return np.einsum("nij,nj,nkj->nik", u, lam, u.conj())


def random_density_matrix(rng):
    """One random state: simplex eigenvalues + Haar eigenbasis."""
    lam = random_simplex_eigs(4, rng)
    u = random_haar_unitary(4, rng)
    return (u * lam) @ u.conj().T


def random_density_matrices(n, rng):
    lam = random_simplex_eigs(4, rng, n)
    u = random_haar_unitaries(4, n, rng)
    return states_from_spectra(lam, u)


def natural_attempts(seed, attempt0, n_attempts):
    """Counter-based natural draws carrying the (seed, index) contract.

    Returns (lam, U) for n_attempts consecutive attempts of the natural
    stream; used when dataset-grade reproducibility is wanted outside the
    stratified cells.
    """
    u = uniform_block(seed, NATURAL_STREAM_KEY, attempt0, n_attempts)
    lam = -np.log(1.0 - u[:, :4])
    lam /= lam.sum(axis=1, keepdims=True)
    g = _ginibre_from_uniforms(u[:, 4:])
    return lam, haar_from_ginibre(g)


def cap_cos_theta(s):
    """Angular radius of the corner caps at purity s (valid for s > 1/2).

    The extreme valid points on the purity sphere are the edge states with
    two vanishing eigenvalues, lam = (x+, 1-x+, 0, 0), x+ = (1+sqrt(2s-1))/2;
    every valid direction lies within this angle of exactly one corner once
    s > 1/2 (the caps touch at s = 1/2 and shrink monotonically).
    """
    s = np.asarray(s, dtype=float)
    xp = 0.5 * (1.0 + np.sqrt(2.0 * s - 1.0))
    return (xp - 0.25) / ((np.sqrt(3.0) / 4.0) * np.sqrt(4.0 * s - 1.0))


def eigs_at_purity_from_uniforms(u4, lo, hi):
    """Simplex points at purity ~ U[lo, hi) from a (n, 4) uniform block.

    Returns (lam, valid): lam rows for invalid attempts are unspecified and
    masked out by `valid`.  The conditional law at each purity is exactly
    that of the uniform simplex (see module docstring).
    """
    s = lo + (hi - lo) * u4[:, 0]
    r = np.sqrt(s - 0.25)
    if lo >= CAP_MODE_PURITY:
        cmax = cap_cos_theta(s)
        cost = 1.0 - u4[:, 1] * (1.0 - cmax)
        phi = 2.0 * np.pi * u4[:, 2]
        corner = np.minimum((u4[:, 3] * 4).astype(np.int64), 3)
        sint = np.sqrt(np.maximum(1.0 - cost * cost, 0.0))
        v = np.stack([sint * np.cos(phi), sint * np.sin(phi), cost], axis=1)
        f = _CORNER_FRAMES[corner]
        v = (f[:, :, 0] * v[:, 0, None]
             + f[:, :, 1] * v[:, 1, None]
             + f[:, :, 2] * v[:, 2, None])
    else:
        cost = 2.0 * u4[:, 1] - 1.0
        phi = 2.0 * np.pi * u4[:, 2]
        sint = np.sqrt(np.maximum(1.0 - cost * cost, 0.0))
        v = np.stack([sint * np.cos(phi), sint * np.sin(phi), cost], axis=1)
    # Fixed-order arithmetic (no BLAS) so replaying a single attempt is
    # bit-identical to its position in any batch.
    lam = 0.25 + r[:, None] * (v[:, 0, None] * PLANE_BASIS[0]
                               + v[:, 1, None] * PLANE_BASIS[1]
                               + v[:, 2, None] * PLANE_BASIS[2])
    valid = ~(lam < 0.0).any(axis=1)
    return lam, valid


def cell_attempts(seed, cell_key, lo, hi, attempt0, n_attempts):
    """Stratified attempts for one dataset cell.

    Returns (attempt_numbers, lam, U) for the attempts whose simplex point
    landed inside the positive orthant; the caller applies the class filter.
    """
    u = uniform_block(seed, cell_key, attempt0, n_attempts)
    lam, valid = eigs_at_purity_from_uniforms(u[:, :4], lo, hi)
    idx = np.nonzero(valid)[0]
    if idx.size == 0:
        return idx + attempt0, lam[:0], np.empty((0, 4, 4), complex)
    g = _ginibre_from_uniforms(u[idx, 4:])
    return idx + attempt0, lam[idx], haar_from_ginibre(g)
