"""Coherent ML decoding of the broadcast vector at the destination.

Conditioned on the fades, the real-stacked observation is Gaussian::

    y_r = mean_scale * G s_r + noise,   Cov(noise) = C / 2

where ``s_r = (Re s; Im s)`` and ``C`` is expressed in units of the complex
noise variance (``C = I`` for white CN(0, 1) noise).  With ``L L^T = C`` the
ML metric is ``|| L^{-1} (y_r - mean_scale G s_r) ||^2``, which is exactly the
negative log-likelihood up to a constant.

Two decoders share that metric: exhaustive search over the codebook and a
depth-first sphere decoder over the per-symbol alphabets.  Both break exact
ties toward the lowest codebook index.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import cholesky_factor, lower_inverse, numerical_rank, to_real, xi_matrix
from .protocol import codeword_matrix, equivalent_noise, source_pair, stacked_channel
from .channel import NoiseDraws


@dataclass(frozen=True)
class RealEquivalentSystem:
    G: np.ndarray
    mean_scale: float
    C: np.ndarray
    L_inv: np.ndarray

    @classmethod
    def from_parts(cls, G, mean_scale, C):
        return cls(np.asarray(G, float), float(mean_scale), np.asarray(C, float), lower_inverse(cholesky_factor(C)))

    @property
    def whitened_generator(self):
        return self.mean_scale * (self.L_inv @ self.G)

    def whiten(self, y_real):
        return self.L_inv @ y_real

    def permuted(self, perm):
        """Same system with the real observation coordinates reordered."""
        perm = np.asarray(perm)
        return RealEquivalentSystem.from_parts(self.G[perm], self.mean_scale, self.C[np.ix_(perm, perm)])


@dataclass(frozen=True)
class DecodeResult:
    index: int
    metric: float
    nodes_visited: int
    fallback: bool = False


def build_equivalent_system(config, code, channel):
    """Real equivalent system of one frame.

    ``G`` is probed column by column: the noiseless map ``s -> S(s) H`` is
    real-linear in ``(Re s; Im s)``, so its image of each real basis vector
    is a column.  ``C`` is assembled the same way from every real noise
    coordinate (relay noise and destination noise, each of variance 1/2).
    """
    T1 = config.T1
    H = stacked_channel(channel)
    basis = np.eye(2 * T1)
    probes = basis[:, :T1] + 1j * basis[:, T1:]
    G = to_real(codeword_matrix(config, code, probes) @ H).T

    n_v = config.R * config.T1
    n_noise = n_v + config.T1 + config.T2
    cols = []
    for k in range(2 * n_noise):
        e = np.zeros(2 * n_noise)
        e[k] = 1.0
        z = e[:n_noise] + 1j * e[n_noise:]
        noise = NoiseDraws(z[:n_v].reshape(config.R, config.T1), z[n_v : n_v + T1], z[n_v + T1 :])
        cols.append(to_real(equivalent_noise(config, code, channel, noise)))
    N = np.array(cols).T
    return RealEquivalentSystem.from_parts(G, config.mean_scale, N @ N.T)


def build_systems_batch(config, code, g0, f, g):
    """Whitened generators and whiteners for ``n`` frames at once.

    Uses the closed form ``S(s) H = K1 s + K2 s*`` with
    ``K1 = [a g0 I; c0 g0 A0 + sum_i g_i f_i A_i]`` and
    ``K2 = [0; c0 g0 B0 + sum_i g_i f_i^* B_i]``, and the relay noise map
    ``xi(c g_i A_i, c g_i B_i)``.

    Returns
    -------
    Hw : ndarray, shape (n, 2 obs_len, 2 T1)
        ``mean_scale * L^{-1} G`` per frame.
    L_inv : ndarray, shape (n, 2 obs_len, 2 obs_len)
    G, C : ndarray
        Unwhitened generator and covariance.
    """
    n = len(g0)
    T1, T2 = config.T1, config.T2
    A0, B0 = source_pair(config, code)
    c0 = config.source_column_scale
    R = config.R
    K1 = c0 * g0[:, None, None] * A0 + ((g * f) @ code.A.reshape(R, -1)).reshape(n, T2, T1)
    K2 = c0 * g0[:, None, None] * B0 + ((g * np.conj(f)) @ code.B.reshape(R, -1)).reshape(n, T2, T1)
    gA = config.relay_gain * g[:, :, None, None] * code.A
    gB = config.relay_gain * g[:, :, None, None] * code.B
    if config.observes_broadcast:
        top = config.broadcast_column_scale * g0[:, None, None] * np.eye(T1)
        K1 = np.concatenate([top, K1], axis=1)
        K2 = np.concatenate([np.zeros((n, T1, T1), complex), K2], axis=1)
        pad = np.zeros((n, config.R, T1, T1), complex)
        gA = np.concatenate([pad, gA], axis=2)
        gB = np.concatenate([pad, gB], axis=2)
    G = xi_matrix(K1, K2)
    X = np.moveaxis(xi_matrix(gA, gB), 1, 2).reshape(n, 2 * config.obs_len, -1)
    C = np.eye(2 * config.obs_len) + X @ np.swapaxes(X, 1, 2)
    L_inv = lower_inverse(cholesky_factor(C))
    return config.mean_scale * (L_inv @ G), L_inv, G, C


def _metrics(z, Hw, Sr):
    diff = z[..., :, None] - Hw @ Sr.T
    return np.sum(diff * diff, axis=-2)


def ml_decode_exhaustive(y, sys, codebook):
    """Codebook entry minimizing the whitened distance; lowest index on ties."""
    return ml_decode_real(to_real(y), sys, codebook)


def ml_decode_real(y_real, sys, codebook):
    """:func:`ml_decode_exhaustive` for an already real-stacked (possibly permuted) observation."""
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    z = sys.whiten(y_real)
    m = _metrics(z, sys.whitened_generator, to_real(codebook.vectors))
    k = int(np.argmin(m))
    return DecodeResult(k, float(m[k]), len(codebook))


def decode_exhaustive_batch(z, Hw, codebook, chunk=256):
    """Exhaustive ML for whitened observations ``z`` (n, 2 obs_len)."""
    Sr = to_real(codebook.vectors)
    idx = np.empty(len(z), dtype=np.intp)
    met = np.empty(len(z))
    for start in range(0, len(z), chunk):
        m = _metrics(z[start : start + chunk], Hw[start : start + chunk], Sr)
        k = np.argmin(m, axis=1)
        idx[start : start + chunk] = k
        met[start : start + chunk] = m[np.arange(len(k)), k]
    return idx, met


def sphere_decode(y, sys, codebook, tie_tol=1e-9):
    """Exact ML by depth-first enumeration of the per-symbol alphabets.

    The whitened generator of the symbol coordinates is triangularized by
    QR; levels are symbols, enumerated from the last to the first.  Children
    are visited in increasing partial metric and a branch is cut once its
    partial metric exceeds the best complete metric, with the radius
    starting at infinity.  Leaves within ``tie_tol`` (relative) of the best
    are re-scored with the exhaustive metric so near ties resolve exactly
    as :func:`ml_decode_exhaustive` resolves them.
    """
    Hw = sys.whitened_generator
    z = sys.whiten(to_real(y))
    K = codebook.n_symbols
    Phi = xi_matrix(codebook.mapping, np.zeros_like(codebook.mapping))
    perm = np.ravel(np.column_stack([np.arange(K), K + np.arange(K)]))
    Hx = (Hw @ Phi)[:, perm]
    if numerical_rank(Hx) < 2 * K:
        res = ml_decode_exhaustive(y, sys, codebook)
        return DecodeResult(res.index, res.metric, res.nodes_visited, fallback=True)

    Q, Rm = np.linalg.qr(Hx)
    zt = Q.T @ z
    pts = np.column_stack([codebook.alphabet.real, codebook.alphabet.imag])
    M = len(pts)
    chosen = np.zeros(2 * K)
    sym = np.zeros(K, dtype=np.intp)
    best = [np.inf]
    leaves = []
    nodes = [0]

    def bound():
        return best[0] * (1 + tie_tol) + tie_tol

    def search(k, partial):
        rows = slice(2 * k, 2 * k + 2)
        target = zt[rows] - Rm[rows, 2 * k + 2 :] @ chosen[2 * k + 2 :]
        resid = target[None, :] - pts @ Rm[rows, rows].T
        costs = partial + np.einsum("mi,mi->m", resid, resid)
        nodes[0] += M
        for m in np.argsort(costs, kind="stable"):
            c = costs[m]
            if c > bound():
                break
            chosen[rows] = pts[m]
            sym[k] = m
            if k == 0:
                leaves.append((c, int(np.ravel_multi_index(sym, (M,) * K))))
                best[0] = min(best[0], c)
            else:
                search(k - 1, c)

    search(K - 1, 0.0)
    cand = np.array(sorted(i for c, i in leaves if c <= bound()))
    m = _metrics(z, Hw, to_real(codebook.vectors[cand]))
    k = int(np.argmin(m))
    return DecodeResult(int(cand[k]), float(m[k]), nodes[0])
