"""Small dense linear-algebra kernels and real-representation maps.

Every matrix handled by the package is tiny (16 x 16 at most), so these
helpers defer to ``numpy.linalg`` for the factorizations and spend their
effort on input checking.  Most functions accept stacked inputs with
arbitrary leading dimensions.
"""

import numpy as np

#: Relative tolerance separating true zeros from roundoff in rank/eigen work.
DEFAULT_TOL = 1e-8


class NotPositiveDefiniteError(ValueError):
    """Raised when a covariance matrix cannot be Cholesky factorized."""


def real_decomposition(A):
    """Split a complex matrix into its real and imaginary parts.

    Returns
    -------
    A_I, A_Q : ndarray
        Real matrices with ``A_I + 1j * A_Q == A``.
    """
    A = np.asarray(A, dtype=complex)
    return A.real.copy(), A.imag.copy()


def to_real(z):
    """Stack a complex vector (last axis) as ``[Re z; Im z]``."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def from_real(x):
    """Inverse of :func:`to_real`."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def xi_matrix(A, B):
    """Real matrix of the map ``v -> A v + B conj(v)``.

    The result acts on the stacked coordinates ``(v_I; v_Q)`` and returns
    ``(z_I; z_Q)``, i.e. it is the block matrix
    ``[[A_I + B_I, -A_Q + B_Q], [A_Q + B_Q, A_I - B_I]]``.

    Parameters
    ----------
    A, B : array_like, shape (..., m, n)
        Complex matrices of identical shape.

    Returns
    -------
    ndarray, shape (..., 2m, 2n)
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: A is {A.shape}, B is {B.shape}")
    AI, AQ = A.real, A.imag
    BI, BQ = B.real, B.imag
    top = np.concatenate([AI + BI, -AQ + BQ], axis=-1)
    bottom = np.concatenate([AQ + BQ, AI - BI], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def is_diagonal(M, tol=1e-12):
    """True iff every off-diagonal entry is small relative to the diagonal.

    The threshold is ``tol * max(1, max |diag(M)|)``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    diag = np.abs(np.diag(M))
    scale = max(1.0, float(diag.max(initial=0.0)))
    off = np.abs(M - np.diag(np.diag(M)))
    return bool(off.max(initial=0.0) <= tol * scale)


def numerical_rank(M, tol=DEFAULT_TOL):
    """Number of singular values above ``tol`` times the largest one.

    Stacked input returns an integer array of ranks.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.asarray(M)
    if M.size == 0:
        return np.zeros(M.shape[:-2], dtype=int) if M.ndim > 2 else 0
    sv = np.linalg.svd(M, compute_uv=False)
    top = sv[..., :1]
    rank = np.sum((sv > tol * top) & (top > 0), axis=-1)
    return int(rank) if np.ndim(rank) == 0 else rank


def check_hermitian(M, tol=1e-10):
    M = np.asarray(M)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {M.shape}")
    err = np.abs(M - np.conj(np.swapaxes(M, -1, -2))).max(initial=0.0)
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if err > tol * scale:
        raise ValueError(f"matrix is not Hermitian (asymmetry {err:.3g})")


def hermitian_eigs(M, tol=1e-10):
    """Ascending real eigenvalues of a Hermitian matrix."""
    check_hermitian(M, tol)
    M = np.asarray(M)
    return np.linalg.eigvalsh(0.5 * (M + np.conj(np.swapaxes(M, -1, -2))))


def min_nonzero_eig(eigs, tol=DEFAULT_TOL):
    """Smallest eigenvalue exceeding ``tol`` times the largest magnitude.

    Returns 0.0 when all eigenvalues are (numerically) zero.
    """
    eigs = np.asarray(eigs, dtype=float)
    top = np.abs(eigs).max(initial=0.0)
    nz = eigs[eigs > tol * top] if top > 0 else eigs[:0]
    return float(nz.min()) if nz.size else 0.0


def hermitian_det(M):
    """Determinant of a Hermitian matrix as the product of its eigenvalues."""
    return float(np.prod(hermitian_eigs(M)))


def cholesky_factor(C):
    """Lower-triangular ``L`` with ``L @ L.T == C``.

    Indefinite input raises :class:`NotPositiveDefiniteError`; no jitter is
    ever added here.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim < 2 or C.shape[-1] != C.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {C.shape}")
    asym = np.abs(C - np.swapaxes(C, -1, -2)).max(initial=0.0)
    if asym > 1e-10 * max(1.0, float(np.abs(C).max(initial=0.0))):
        raise NotPositiveDefiniteError("covariance is not symmetric")
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"covariance is not positive definite: {exc}") from None


def lower_inverse(L):
    """Inverse of a (stack of) lower-triangular matrices."""
    L = np.asarray(L, dtype=float)
    eye = np.broadcast_to(np.eye(L.shape[-1]), L.shape)
    return np.linalg.solve(L, eye)
