"""Distributed space-time code constructions for GNAF relays.

A :class:`LinearDesign` is a matrix whose entries are linear in symbols
``x_k`` and their conjugates.  Column ``j`` of a design is what relay ``j``
transmits during the cooperation phase; :func:`extract_relay_pairs` turns
it into the relay matrix pair ``(A_j, B_j)`` acting on the broadcast vector.

Design text format
------------------
One design row per line; blank lines and lines starting with ``#`` are
ignored.  Entries are separated by commas::

    row    := entry ("," entry)*
    entry  := "0" | term (("+" | "-") term)*      leading sign optional
    term   := [coef "*"] atom
    coef   := real | "(" complex ")"              complex uses i or j, e.g. (0.5-2i)
    atom   := "x" INT | "conj(x" INT ")"

Whitespace is insignificant.  Repeated atoms within an entry add up.
:func:`format_design` writes floats with ``repr`` so parsing its output
reproduces the coefficients bit for bit.
"""

import itertools
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import DEFAULT_TOL, is_diagonal, numerical_rank, xi_matrix
from .protocol import codeword_matrix

# ---------------------------------------------------------------------------
# Linear designs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearDesign:
    """Entry ``(r, c)`` equals ``lin[r, c] @ x + conj[r, c] @ conj(x)``."""

    lin: np.ndarray
    conj: np.ndarray

    def __post_init__(self):
        lin = np.asarray(self.lin, dtype=complex)
        conj = np.asarray(self.conj, dtype=complex)
        if lin.ndim != 3 or lin.shape != conj.shape:
            raise ValueError("lin and conj must be equal-shape (rows, cols, symbols) arrays")
        if not (np.all(np.isfinite(lin)) and np.all(np.isfinite(conj))):
            raise ValueError("design coefficients must be finite")
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "conj", conj)

    @property
    def shape(self):
        return self.lin.shape[:2]

    @property
    def n_symbols(self):
        return self.lin.shape[2]

    def __add__(self, other):
        return LinearDesign(self.lin + other.lin, self.conj + other.conj)

    def hstack(self, other):
        return LinearDesign(np.concatenate([self.lin, other.lin], 1), np.concatenate([self.conj, other.conj], 1))


def evaluate_design(d, x):
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != d.n_symbols:
        raise ValueError(f"design has {d.n_symbols} symbols, got vector of length {x.shape[-1]}")
    return np.einsum("rck,...k->...rc", d.lin, x) + np.einsum("rck,...k->...rc", d.conj, np.conj(x))


def split_conjugate(d):
    """``(C, D)`` holding the unconjugated and conjugated terms; ``C + D == d``."""
    zero = np.zeros_like(d.lin)
    return LinearDesign(d.lin, zero), LinearDesign(zero, d.conj)


def _symbol(k, K, coef=1.0, conj=False):
    """Row vector pair (lin, conj) for ``coef * x_k`` (or its conjugate)."""
    lin = np.zeros(K, complex)
    cj = np.zeros(K, complex)
    (cj if conj else lin)[k] = coef
    return lin, cj


def _conj_term(term):
    lin, cj = term
    return np.conj(cj), np.conj(lin)


def _neg(term):
    return -term[0], -term[1]


def _design_from_terms(rows, K):
    n_rows, n_cols = len(rows), len(rows[0])
    lin = np.zeros((n_rows, n_cols, K), complex)
    cj = np.zeros((n_rows, n_cols, K), complex)
    for r, row in enumerate(rows):
        for c, term in enumerate(row):
            if term is not None:
                lin[r, c], cj[r, c] = term
    return LinearDesign(lin, cj)


def theta4_design():
    """The 4x4 complex orthogonal design in three symbols.

    ::

        [ x0    x1    x2    0  ]
        [-x1*   x0*   0     x2 ]
        [-x2*   0     x0*  -x1 ]
        [ 0    -x2*   x1*   x0 ]
    """
    x = lambda k, conj=False, c=1.0: _symbol(k, 3, c, conj)  # noqa: E731
    rows = [
        [x(0), x(1), x(2), None],
        [x(1, True, -1), x(0, True), None, x(2)],
        [x(2, True, -1), None, x(0, True), x(1, c=-1)],
        [None, x(2, True, -1), x(1, True), x(0)],
    ]
    return _design_from_terms(rows, 3)


def ciod4_design():
    """Rate-one 4x4 coordinate-interleaved orthogonal design in four symbols.

    With ``u0 = Re x0 + i Im x2``, ``u1 = Re x1 + i Im x3``,
    ``u2 = Re x2 + i Im x0`` and ``u3 = Re x3 + i Im x1`` the design is
    ``diag(Alamouti(u0, u1), Alamouti(u2, u3))`` where
    ``Alamouti(a, b) = [[a, b], [-b*, a*]]``.
    """
    K = 4

    def interleaved(re_k, im_k):
        # Re x_a + i Im x_b = (x_a + x_a*)/2 + (x_b - x_b*)/2
        lin = np.zeros(K, complex)
        cj = np.zeros(K, complex)
        lin[re_k] += 0.5
        cj[re_k] += 0.5
        lin[im_k] += 0.5
        cj[im_k] -= 0.5
        return lin, cj

    u = [interleaved(0, 2), interleaved(1, 3), interleaved(2, 0), interleaved(3, 1)]
    rows = [
        [u[0], u[1], None, None],
        [_neg(_conj_term(u[1])), _conj_term(u[0]), None, None],
        [None, None, u[2], u[3]],
        [None, None, _neg(_conj_term(u[3])), _conj_term(u[2])],
    ]
    return _design_from_terms(rows, K)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(
    rf"(?P<sign>[+-]?)(?:(?P<coef>\([^()]*\)|{_NUM})\*)?(?:conj\(x(?P<cidx>\d+)\)|x(?P<idx>\d+))"
)


class DesignFormatError(ValueError):
    pass


def _parse_coef(text):
    if text is None:
        return 1.0
    if text.startswith("("):
        try:
            return complex(text[1:-1].replace("i", "j"))
        except ValueError:
            raise DesignFormatError(f"bad complex coefficient {text!r}") from None
    return float(text)


def _parse_entry(text):
    terms = []
    if text in ("0", "+0", "-0"):
        return terms
    if not text:
        raise DesignFormatError("empty entry")
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if m is None or (pos > 0 and not m.group("sign")):
            raise DesignFormatError(f"cannot parse entry {text!r} at offset {pos} (entries must be linear in x, conj(x))")
        coef = _parse_coef(m.group("coef"))
        if m.group("sign") == "-":
            coef = -coef
        conj = m.group("cidx") is not None
        k = int(m.group("cidx") if conj else m.group("idx"))
        terms.append((coef, k, conj))
        pos = m.end()
    return terms


def parse_design(text, n_symbols=None):
    rows = []
    for line in text.splitlines():
        line = "".join(line.split())
        if not line or line.startswith("#"):
            continue
        rows.append([_parse_entry(e) for e in line.split(",")])
    if not rows:
        raise DesignFormatError("design has no rows")
    if len({len(r) for r in rows}) != 1:
        raise DesignFormatError("rows have different numbers of entries")
    max_k = max((k for row in rows for entry in row for _, k, _ in entry), default=-1)
    K = max_k + 1 if n_symbols is None else n_symbols
    if max_k >= K:
        raise DesignFormatError(f"symbol x{max_k} exceeds declared symbol count {K}")
    lin = np.zeros((len(rows), len(rows[0]), K), complex)
    cj = np.zeros_like(lin)
    for r, row in enumerate(rows):
        for c, entry in enumerate(row):
            for coef, k, conj in entry:
                (cj if conj else lin)[r, c, k] += coef
    return LinearDesign(lin, cj)


def _format_coef(c):
    if c.imag == 0:
        if c.real == 1:
            return "+", ""
        if c.real == -1:
            return "-", ""
        return ("-" if c.real < 0 else "+"), f"{abs(c.real)!r}*"
    im_sign = "-" if c.imag < 0 else "+"
    return "+", f"({c.real!r}{im_sign}{abs(c.imag)!r}i)*"


def format_design(d):
    lines = []
    for r in range(d.shape[0]):
        entries = []
        for c in range(d.shape[1]):
            parts = []
            for k in range(d.n_symbols):
                for arr, atom in ((d.lin, f"x{k}"), (d.conj, f"conj(x{k})")):
                    coef = complex(arr[r, c, k])
                    if coef != 0:
                        sign, body = _format_coef(coef)
                        parts.append(f"{sign}{body}{atom}")
            entries.append("".join(parts) if parts else "0")
        lines.append(", ".join(entries))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Relay codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelayCode:
    """Relay matrix pairs ``A[i], B[i]`` (each T2 x T1) and optional source pair.

    ``scale`` records the uniform power normalization applied on extraction.
    """

    A: np.ndarray
    B: np.ndarray
    A0: Optional[np.ndarray] = None
    B0: Optional[np.ndarray] = None
    scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        if A.ndim != 3 or A.shape != B.shape:
            raise ValueError("A and B must be (R, T2, T1) arrays of equal shape")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if (self.A0 is None) != (self.B0 is None):
            raise ValueError("give both A0 and B0 or neither")
        if self.A0 is not None:
            A0 = np.asarray(self.A0, dtype=complex)
            B0 = np.asarray(self.B0, dtype=complex)
            if A0.shape != A.shape[1:] or B0.shape != A.shape[1:]:
                raise ValueError("source pair must match the relay matrix shape")
            if np.sum(np.abs(A0) ** 2) + np.sum(np.abs(B0) ** 2) > 1 + 1e-12:
                raise ValueError("source pair violates ||A0||^2 + ||B0||^2 <= 1")
            object.__setattr__(self, "A0", A0)
            object.__setattr__(self, "B0", B0)
        norms = self.power_norms()
        bad = np.flatnonzero(norms > 1 + 1e-12)
        if bad.size:
            raise ValueError(f"relay {bad[0] + 1} violates ||A||^2 + ||B||^2 <= 1 (norm {norms[bad[0]]:.6g})")

    @property
    def R(self):
        return self.A.shape[0]

    @property
    def T2(self):
        return self.A.shape[1]

    @property
    def T1(self):
        return self.A.shape[2]

    def power_norms(self):
        return np.sum(np.abs(self.A) ** 2, axis=(1, 2)) + np.sum(np.abs(self.B) ** 2, axis=(1, 2))

    def xi(self, i):
        return xi_matrix(self.A[i], self.B[i])

    def with_source_pair(self, A0, B0):
        return RelayCode(self.A, self.B, A0, B0, self.scale, self.name)


def extract_relay_pairs(d, s_map, T1, name=""):
    """Relay pairs realizing each design column as ``A_j s + B_j s*``.

    ``s_map[k]`` is the broadcast slot carrying symbol ``x_k``.  The pairs
    are scaled by one common factor so that the largest
    ``||A_j||^2 + ||B_j||^2`` is at most one.
    """
    s_map = [int(k) for k in s_map]
    if len(s_map) != d.n_symbols:
        raise ValueError(f"s_map has {len(s_map)} slots for {d.n_symbols} symbols")
    if len(set(s_map)) != len(s_map) or min(s_map) < 0 or max(s_map) >= T1:
        raise ValueError("s_map must assign distinct slots in [0, T1)")
    T2, R = d.shape
    A = np.zeros((R, T2, T1), complex)
    B = np.zeros((R, T2, T1), complex)
    for k, slot in enumerate(s_map):
        A[:, :, slot] = d.lin[:, :, k].T
        B[:, :, slot] = d.conj[:, :, k].T
    norms = np.sum(np.abs(A) ** 2, axis=(1, 2)) + np.sum(np.abs(B) ** 2, axis=(1, 2))
    scale = 1.0 if norms.max() <= 1 else 1.0 / np.sqrt(norms.max())
    return RelayCode(A * scale, B * scale, scale=scale, name=name)


def theta4_relay_code():
    """Relay pairs of the 4x4 orthogonal design with ``s = (x0, x1, x2, 0)``."""
    return extract_relay_pairs(theta4_design(), (0, 1, 2), 4, name="theta4")


def ciod4_relay_code():
    """Relay pairs of the 4x4 CIOD with ``s = (x0, x1, x2, x3)``."""
    return extract_relay_pairs(ciod4_design(), (0, 1, 2, 3), 4, name="ciod4")


def naf_relay_code(b1, b2, A0=None, B0=None):
    """Two-relay NAF frame as a GNAF-I code: ``A1 = diag(b1, 0)``, ``A2 = diag(0, b2)``."""
    if b1**2 > 1 or b2**2 > 1:
        raise ValueError("NAF scaling factors must satisfy b^2 <= 1")
    A = np.zeros((2, 2, 2), complex)
    A[0, 0, 0] = b1
    A[1, 1, 1] = b2
    return RelayCode(A, np.zeros_like(A), A0, B0, name="naf")


def extended_relay_matrix(code, s):
    """``[A_1 s .. A_R s  B_1 s* .. B_R s*]`` (T2 x 2R); ``s`` may be stacked."""
    s = np.asarray(s, dtype=complex)
    a = np.einsum("ikl,...l->...ki", code.A, s)
    b = np.einsum("ikl,...l->...ki", code.B, np.conj(s))
    return np.concatenate([a, b], axis=-1)


# ---------------------------------------------------------------------------
# Codebooks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Codebook:
    """Broadcast vectors ``s = mapping @ x`` for every ``x`` in ``alphabet^K``.

    Index order is lexicographic in the per-symbol alphabet indices with
    symbol 0 most significant, matching ``itertools.product``.
    """

    vectors: np.ndarray
    alphabet: np.ndarray
    mapping: np.ndarray
    symbols: np.ndarray = field(repr=False)

    @classmethod
    def from_product(cls, alphabet, mapping):
        alphabet = np.asarray(alphabet, dtype=complex)
        mapping = np.asarray(mapping, dtype=complex)
        K = mapping.shape[1]
        symbols = np.array(list(itertools.product(range(len(alphabet)), repeat=K)), dtype=np.intp)
        vectors = alphabet[symbols] @ mapping.T
        return cls(vectors, alphabet, mapping, symbols)

    def __post_init__(self):
        if len(self.vectors) < 2:
            raise ValueError("a codebook needs at least two vectors")

    def __len__(self):
        return len(self.vectors)

    @property
    def T1(self):
        return self.vectors.shape[1]

    @property
    def n_symbols(self):
        return self.mapping.shape[1]

    def mean_energy(self):
        return float(np.mean(np.sum(np.abs(self.vectors) ** 2, axis=1)))


def qpsk_alphabet(rotation_deg=0.0):
    """Unit-energy QPSK ``{(+-1 +- i)/sqrt 2}`` rotated by ``rotation_deg``."""
    base = np.exp(1j * np.pi / 4 * np.array([1, 3, 5, 7]))
    return base * np.exp(1j * np.deg2rad(rotation_deg))


def rotated_qpsk_codebook(rotation_deg, n_symbols, T1, s_map=None):
    """All ``4**n_symbols`` symbol tuples placed into slots, normalized to mean energy one."""
    if n_symbols < 1:
        raise ValueError("need at least one symbol")
    s_map = list(range(n_symbols)) if s_map is None else [int(k) for k in s_map]
    if len(s_map) != n_symbols or len(set(s_map)) != n_symbols or max(s_map) >= T1:
        raise ValueError("s_map must give one distinct slot < T1 per symbol")
    mapping = np.zeros((T1, n_symbols), complex)
    mapping[s_map, range(n_symbols)] = 1.0
    alphabet = qpsk_alphabet(rotation_deg)
    raw = Codebook.from_product(alphabet, mapping)
    return Codebook.from_product(alphabet, mapping / np.sqrt(raw.mean_energy()))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

FULL_SCAN_LIMIT = 4096
SAMPLED_PAIRS = 100_000


@dataclass
class CodeValidationReport:
    power_norms: list
    power_ok: bool
    xi_diagonal: list
    min_rank_deltaS: int
    min_rank_deltaS_er: int
    worst_pair: tuple
    pairs_scanned: int
    sampled: bool
    diversity_claim: int
    max_diversity: int

    @property
    def meets_criteria(self):
        return self.power_ok and all(self.xi_diagonal) and self.diversity_claim == self.max_diversity

    def to_dict(self):
        return {
            "power_norms": [float(x) for x in self.power_norms],
            "power_ok": self.power_ok,
            "xi_diagonal": list(self.xi_diagonal),
            "min_rank_deltaS": self.min_rank_deltaS,
            "min_rank_deltaS_er": self.min_rank_deltaS_er,
            "worst_pair": list(self.worst_pair),
            "pairs_scanned": self.pairs_scanned,
            "sampled": self.sampled,
            "diversity_claim": self.diversity_claim,
            "max_diversity": self.max_diversity,
            "meets_criteria": self.meets_criteria,
        }


def _pair_indices(L, rng, force_sample):
    if L <= FULL_SCAN_LIMIT and not force_sample:
        i, j = np.triu_indices(L, k=1)
        return i, j, False
    i = rng.integers(L, size=SAMPLED_PAIRS)
    j = (i + rng.integers(1, L, size=SAMPLED_PAIRS)) % L
    return i, j, True


def validate_code(code, codebook, config, tol=DEFAULT_TOL, sample=False, seed=0, chunk=20_000):
    """Check the power constraint, the diagonal-noise condition and the rank criterion.

    Codeword matrices are real-linear in ``s``, so ``dS = S(s_i - s_j)``.
    Every unordered pair is scanned for codebooks up to ``FULL_SCAN_LIMIT``
    vectors; larger ones (or ``sample=True``) use ``SAMPLED_PAIRS`` random
    pairs and set ``sampled`` in the report.
    """
    norms = code.power_norms()
    xi_diag = []
    for i in range(code.R):
        X = code.xi(i)
        xi_diag.append(is_diagonal(X @ X.T, tol=1e-10))

    L = len(codebook)
    ii, jj, sampled = _pair_indices(L, np.random.default_rng(seed), sample)
    min_rank = min_rank_er = None
    worst = (0, 0)
    for start in range(0, len(ii), chunk):
        a, b = ii[start : start + chunk], jj[start : start + chunk]
        ds = codebook.vectors[a] - codebook.vectors[b]
        ranks = numerical_rank(codeword_matrix(config, code, ds), tol)
        ranks_er = numerical_rank(extended_relay_matrix(code, ds), tol)
        k = int(np.argmin(ranks))
        if min_rank is None or ranks[k] < min_rank:
            min_rank, worst = int(ranks[k]), (int(a[k]), int(b[k]))
        low_er = int(ranks_er.min())
        min_rank_er = low_er if min_rank_er is None else min(min_rank_er, low_er)

    return CodeValidationReport(
        power_norms=[float(x) for x in norms],
        power_ok=bool(np.all(norms <= 1 + 1e-12)),
        xi_diagonal=xi_diag,
        min_rank_deltaS=min_rank,
        min_rank_deltaS_er=min_rank_er,
        worst_pair=worst,
        pairs_scanned=len(ii),
        sampled=sampled,
        diversity_claim=min(min_rank, config.max_diversity),
        max_diversity=config.max_diversity,
    )
