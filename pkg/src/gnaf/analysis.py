"""Design-criteria metrics: pairwise matrices, PEP bounds, coding gain, slopes.

For a pair of codewords with difference ``dS`` the analysis matrix is
``M = dS^H D^{-1} dS`` with ``D = diag(I_T1, d I_T2)`` and
``d = 1 + mu pi3 P R / (pi1 P + 1)``, where ``mu`` is the largest variance
of a complex entry of the forwarded relay noise ``A_i v_i + B_i v_i^*``.
Logarithms are natural throughout.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .channel import complex_normal
from .codes import extended_relay_matrix
from .numerics import DEFAULT_TOL, hermitian_det, hermitian_eigs, min_nonzero_eig, numerical_rank
from .protocol import source_pair

__all__ = [
    "PairwiseMetrics",
    "CodingGainBreakdown",
    "RestrictionError",
    "mu_of_code",
    "noise_weights",
    "pairwise_matrix",
    "extended_relay_matrix",
    "pep_bound",
    "pep_exponent_gnaf",
    "pep_exponent_jh",
    "pep_integral_bound",
    "coding_gain",
    "diversity_slope",
    "analysis_record",
]


def mu_of_code(code):
    """Largest diagonal entry of ``A_i A_i^H + B_i B_i^H`` over all relays."""
    cov = code.A @ np.conj(np.swapaxes(code.A, 1, 2)) + code.B @ np.conj(np.swapaxes(code.B, 1, 2))
    return float(np.max(np.real(np.diagonal(cov, axis1=1, axis2=2))))


def noise_weights(config, mu):
    """Diagonal of ``D`` for the rows of the codeword matrix under ``config``."""
    d = 1 + mu * config.pi3 * config.P * config.R / (config.pi1 * config.P + 1)
    coop = np.full(config.T2, d)
    if not config.observes_broadcast:
        return coop
    return np.concatenate([np.ones(config.T1), coop])


@dataclass
class PairwiseMetrics:
    deltaS: np.ndarray
    D: np.ndarray
    M: np.ndarray
    rank_M: int
    sigma2_min: float
    mu: float
    det_M: float
    trace_Mprime: float


def pairwise_matrix(S_i, S_j, config, mu, tol=DEFAULT_TOL):
    dS = np.asarray(S_i, complex) - np.asarray(S_j, complex)
    w = noise_weights(config, mu)
    if len(w) != dS.shape[0]:
        raise ValueError(f"codeword has {dS.shape[0]} rows, config expects {len(w)}")
    M = np.conj(dS.T) @ (dS / w[:, None])
    eigs = hermitian_eigs(M)
    return PairwiseMetrics(
        deltaS=dS,
        D=np.diag(w),
        M=M,
        rank_M=numerical_rank(M, tol),
        sigma2_min=min_nonzero_eig(eigs, tol),
        mu=float(mu),
        det_M=float(np.prod(eigs)),
        trace_Mprime=float(np.sum(np.abs(dS) ** 2)),
    )


def _loglog_ratio(P):
    if not P > np.e:
        raise ValueError("P must exceed e so that log(log P) is positive")
    return np.log(np.log(P)) / np.log(P)


def pep_exponent_gnaf(rank, P):
    """Exponent of ``P`` in the GNAF bound: ``-(1 + (rank - 1)(1 - loglog P / log P))``."""
    return -(1 + (rank - 1) * (1 - _loglog_ratio(P)))


def pep_exponent_jh(R, P):
    """Exponent ``-(R + 1)(1 - loglog P / log P)`` of the Jing-Hassibi bound with ``R + 1`` relays."""
    return -(R + 1) * (1 - _loglog_ratio(P))


def pep_bound(metrics, config):
    """``(pi3 sigma2_min / 4)^(-rank) * P^exponent`` for a pair with ``rank_M >= 1``."""
    if metrics.rank_M < 1:
        raise ValueError("the bound needs rank(M) >= 1")
    r = metrics.rank_M
    return (config.pi3 * metrics.sigma2_min / 4) ** (-r) * config.P ** pep_exponent_gnaf(r, config.P)


def _fade_matrix(f):
    """Stacked-fade matrix ``F`` with ``H = F (g0, g1, .., gR)^T``; ``f`` has shape (n, R)."""
    n, R = f.shape
    F = np.zeros((n, 2 * (R + 1), R + 1), complex)
    F[:, 0, 0] = 1
    F[:, R + 1, 0] = 1
    idx = np.arange(1, R + 1)
    F[:, idx, idx] = f
    F[:, R + 1 + idx, idx] = np.conj(f)
    return F


def pep_integral_bound(metrics, config, n_samples, rng):
    """Monte Carlo mean over relay fades of ``det(I + (pi3/4) P M F F^H)^{-1}``."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    f = complex_normal(rng, (n_samples, config.R))
    F = _fade_matrix(f)
    # Sylvester: det(I + c M F F^H) = det(I + c F^H M F)
    core = np.eye(config.R + 1) + (config.pi3 / 4) * config.P * (np.conj(np.swapaxes(F, 1, 2)) @ metrics.M @ F)
    _, logdet = np.linalg.slogdet(core)
    return float(np.mean(np.exp(-np.real(logdet))))


class RestrictionError(ValueError):
    """The code mixes A and B on one relay or uses B0, so the coding-gain split does not apply."""


@dataclass
class CodingGainBreakdown:
    """Determinants and traces of one codeword pair.

    ``trace_relation_exact`` is ``Tr(M_hat) + ((pi1 P + 1)/(pi3 P)) ||ds||^2``,
    which equals ``trace_Mprime``; ``trace_relation_reduced`` keeps only the
    ``||ds||^2 / (pi3 P)`` part of the broadcast term, for comparison.
    """

    det_M: float
    det_Mhat: float
    det_Mer: float
    trace_Mprime: float
    trace_Mhat: float
    rhs_large_p: float
    N_split: int
    trace_relation_exact: float
    trace_relation_reduced: float

    @property
    def relative_gap(self):
        return abs(self.det_M - self.rhs_large_p) / abs(self.det_M)


def _split_relays(code, config):
    a_only, b_only = [], []
    for i in range(code.R):
        has_a = np.any(code.A[i] != 0)
        has_b = np.any(code.B[i] != 0)
        if has_a and has_b:
            raise RestrictionError(f"relay {i + 1} uses both A and B; coding gain needs A_i = 0 or B_i = 0")
        (b_only if has_b else a_only).append(i)
    _, B0 = source_pair(config, code)
    if np.any(B0 != 0):
        raise RestrictionError("coding gain needs B0 = 0")
    return a_only, b_only


def coding_gain(code, s_i, s_j, config, mu=None):
    """Coding-gain determinants and traces for relays split into A-only and B-only groups.

    The reduced codeword difference has columns
    ``[source, A_i ds (A-only relays), B_i ds* (B-only relays)]``.  Its
    cooperation block is ``dS_hat``; dropping the source column gives
    ``dS_ER``.  ``rhs_large_p`` is the large-``P`` closed form
    ``(1 / (1 + mu pi3 R / pi1))^(R+1) (|M_hat| + (pi1/pi3 + mu R) ||ds||^2 |M_ER|)``.
    """
    if mu is None:
        mu = mu_of_code(code)
    a_only, b_only = _split_relays(code, config)
    ds = np.asarray(s_i, complex) - np.asarray(s_j, complex)
    A0, _ = source_pair(config, code)
    er = extended_relay_matrix(code, ds)
    R = code.R
    dS_er = np.concatenate([er[:, a_only], er[:, [R + i for i in b_only]]], axis=1)
    dS_hat = np.concatenate([(config.source_column_scale * (A0 @ ds))[:, None], dS_er], axis=1)
    if config.observes_broadcast:
        top = np.zeros((config.T1, R + 1), complex)
        top[:, 0] = config.broadcast_column_scale * ds
        dS = np.concatenate([top, dS_hat])
    else:
        dS = dS_hat
    w = noise_weights(config, mu)
    M = np.conj(dS.T) @ (dS / w[:, None])
    gram = lambda X: np.conj(X.T) @ X  # noqa: E731
    energy = float(np.sum(np.abs(ds) ** 2))
    det_Mhat = hermitian_det(gram(dS_hat))
    det_Mer = hermitian_det(gram(dS_er))
    trace_Mhat = float(np.sum(np.abs(dS_hat) ** 2))
    pi1, pi3, P = config.pi1, config.pi3, config.P
    rhs = (1 / (1 + mu * pi3 * R / pi1)) ** (R + 1) * (det_Mhat + (pi1 / pi3 + mu * R) * energy * det_Mer)
    return CodingGainBreakdown(
        det_M=hermitian_det(M),
        det_Mhat=det_Mhat,
        det_Mer=det_Mer,
        trace_Mprime=float(np.sum(np.abs(dS) ** 2)),
        trace_Mhat=trace_Mhat,
        rhs_large_p=float(rhs),
        N_split=len(a_only),
        trace_relation_exact=trace_Mhat + (pi1 * P + 1) / (pi3 * P) * energy,
        trace_relation_reduced=trace_Mhat + energy / (pi3 * P),
    )


def diversity_slope(curve, window=3):
    """Negative log-log slope of error rate against ``P`` over the ``window`` largest ``P``.

    Points with zero error rate are skipped; at least two must remain.
    """
    pts = sorted((float(P), float(e)) for P, e in curve)[-window:]
    pts = [(P, e) for P, e in pts if e > 0]
    if len(pts) < 2:
        raise ValueError("need at least two nonzero error rates in the window")
    x = np.log10([p for p, _ in pts])
    y = np.log10([e for _, e in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return {"real": obj.real.tolist(), "imag": obj.imag.tolist()} if np.iscomplexobj(obj) else obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def inputs_hash(inputs):
    blob = json.dumps(inputs, sort_keys=True, default=_jsonable, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def analysis_record(name, value, inputs, seed=None):
    """JSON-ready record ``{metric, value, inputs_hash, seed}``."""
    value = json.loads(json.dumps(value, default=_jsonable))
    return {"metric": name, "value": value, "inputs_hash": inputs_hash(inputs), "seed": seed}
