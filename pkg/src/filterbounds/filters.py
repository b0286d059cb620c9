"""Abstract filters: exact transfer matrices plus a rounding-error envelope.

An :class:`AbstractFilter` ``F`` with ``n_i`` inputs, ``n_r`` reset slots and
``n_o`` outputs stands for every implementation ``F~`` with

    |F(I, R) - F~(I, R)|  <=  eps_rel_T . N(I) + eps_rel_D . N(R) + eps_abs

componentwise, where ``F(I, R) = T.I + D.R + Tc`` is the ideal linear filter
and ``N`` takes the sup norm of each stream.  ``Tc`` is the exact response to
the constant sources inside the filter (a column of rational functions).

Error matrices are numpy float arrays holding upward-rounded bounds; ``inf``
marks an unbounded entry and ``0 * inf`` is taken to be ``0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import (
    ONE, ZERO, Z, Poly, RatFun, RatFunMatrix, block_diag, hstack,
    invert_id_minus_zA, vstack,
)
from .bounds import l1_bound, linf_bound
from .numeric import (
    NotContractingError, add_up, fixpoint_upper_bound, matadd_up, matmul_up,
    mul_up, rat_up,
)

log = logging.getLogger(__name__)

INF = math.inf


# --------------------------------------------------------------------------
# number formats

def round_to_binary(q, precision: int, emin: int) -> Fraction:
    """Round a rational to nearest (ties to even) on a binary float grid."""
    q = Fraction(q)
    if q == 0:
        return q
    a = abs(q)
    # floor(log2 a) from bit lengths, then correct by one if needed
    e = a.numerator.bit_length() - a.denominator.bit_length()
    if Fraction(2) ** e > a:
        e -= 1
    e = max(e, emin)
    quantum = Fraction(2) ** (e - precision + 1)
    m = a / quantum
    fl = m.numerator // m.denominator
    rem = m - fl
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and fl % 2 == 1):
        fl += 1
    r = fl * quantum
    return r if q > 0 else -r


@dataclass(frozen=True)
class FloatFormat:
    """Rounding-error parameters of an arithmetic.

    ``kind`` is ``"ieee64"``, ``"ieee32"``, ``"fixed"`` or ``"exact"``.
    For fixed point ``delta`` is the grid step.
    """

    eps_rel: float
    eps_abs: float
    kind: str
    delta: Fraction | None = None
    rne: bool = False

    @property
    def name(self) -> str:
        if self.kind == "fixed":
            s = f"fixed:{self.delta}"
            return s + ":rne" if self.rne else s
        return self.kind

    def round_constant(self, k) -> Fraction:
        """Value a constant takes once stored in this format."""
        k = Fraction(k)
        if self.kind == "ieee64":
            return round_to_binary(k, 53, -1022)
        if self.kind == "ieee32":
            return round_to_binary(k, 24, -126)
        return k

    @classmethod
    def fixed(cls, delta, rne: bool = False) -> FloatFormat:
        delta = Fraction(delta)
        if delta <= 0:
            raise ValueError("fixed-point step must be positive")
        eps = delta / 2 if rne else delta
        return cls(0.0, rat_up(eps), "fixed", delta, rne)


IEEE64 = FloatFormat(2.0 ** -53, 2.0 ** -1074, "ieee64")
IEEE32 = FloatFormat(2.0 ** -24, 2.0 ** -149, "ieee32")
EXACT = FloatFormat(0.0, 0.0, "exact")


def parse_format(text: str) -> FloatFormat:
    """``ieee64``, ``ieee32``, ``exact`` or ``fixed:<delta>[:rne]``."""
    t = text.strip().lower()
    if t in ("ieee64", "double", "binary64"):
        return IEEE64
    if t in ("ieee32", "float", "binary32"):
        return IEEE32
    if t == "exact":
        return EXACT
    if t.startswith("fixed:"):
        parts = t.split(":")
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] != "rne"):
            raise ValueError(f"bad fixed-point format {text!r}")
        return FloatFormat.fixed(Fraction(parts[1]), rne=len(parts) == 3)
    raise ValueError(f"unknown number format {text!r}")


# --------------------------------------------------------------------------
# norms of matrices of rational functions

def n1(M: RatFunMatrix) -> np.ndarray:
    """Entrywise certified L1 bounds."""
    out = np.zeros((M.rows, M.cols))
    for i in range(M.rows):
        for j in range(M.cols):
            e = M[i, j]
            if not e.is_zero():
                kb = l1_bound(e)
                out[i, j] = kb.l1_upper if kb.finite else INF
    return out


def ninf(M: RatFunMatrix) -> np.ndarray:
    """Entrywise certified sup-of-coefficients bounds."""
    out = np.zeros((M.rows, M.cols))
    for i in range(M.rows):
        for j in range(M.cols):
            e = M[i, j]
            if not e.is_zero():
                out[i, j] = linf_bound(e)
    return out


def _mm(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] == 0 or A.shape[0] == 0 or B.shape[1] == 0:
        return np.zeros((A.shape[0], B.shape[1]))
    return matmul_up(A, B)


def _add(*Ms) -> np.ndarray:
    acc = np.asarray(Ms[0], dtype=float)
    for M in Ms[1:]:
        acc = matadd_up(acc, M)
    return acc


def _block(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


# --------------------------------------------------------------------------
# abstract filters

@dataclass(frozen=True, eq=False)
class AbstractFilter:
    T: RatFunMatrix
    D: RatFunMatrix
    Tc: RatFunMatrix
    eps_rel_T: np.ndarray
    eps_rel_D: np.ndarray
    eps_abs: np.ndarray
    reset_labels: tuple = ()
    fmt: FloatFormat = field(default=EXACT)

    def __post_init__(self):
        n_o = self.T.rows
        if self.D.rows != n_o or self.Tc.rows != n_o or self.Tc.cols != 1:
            raise ValueError("T, D and Tc must share the output dimension")
        if self.eps_rel_T.shape != (n_o, self.T.cols):
            raise ValueError(f"eps_rel_T has shape {self.eps_rel_T.shape}, expected {(n_o, self.T.cols)}")
        if self.eps_rel_D.shape != (n_o, self.D.cols):
            raise ValueError("eps_rel_D shape mismatch")
        if self.eps_abs.shape != (n_o,):
            raise ValueError("eps_abs shape mismatch")
        if len(self.reset_labels) != self.D.cols:
            object.__setattr__(self, "reset_labels",
                               tuple(f"r{k}" for k in range(self.D.cols)))
        for arr in (self.eps_rel_T, self.eps_rel_D, self.eps_abs):
            if np.any(np.isnan(arr)) or np.any(arr < 0):
                raise ValueError("error bounds must be nonnegative")

    @property
    def n_i(self) -> int:
        return self.T.cols

    @property
    def n_r(self) -> int:
        return self.D.cols

    @property
    def n_o(self) -> int:
        return self.T.rows

    def with_labels(self, labels: Sequence[str]) -> AbstractFilter:
        return AbstractFilter(self.T, self.D, self.Tc, self.eps_rel_T, self.eps_rel_D,
                              self.eps_abs, tuple(labels), self.fmt)

    def __repr__(self):
        return (f"AbstractFilter(n_i={self.n_i}, n_r={self.n_r}, n_o={self.n_o}, "
                f"T={[str(e) for e in self.T.entries]})")


def _zero_col(n: int) -> RatFunMatrix:
    return RatFunMatrix.zeros(n, 1)


def _filter(T, D=None, Tc=None, eT=None, eD=None, ea=None, labels=(), fmt=EXACT):
    n_o = T.rows
    D = D if D is not None else RatFunMatrix.zeros(n_o, 0)
    Tc = Tc if Tc is not None else _zero_col(n_o)
    eT = eT if eT is not None else np.zeros((n_o, T.cols))
    eD = eD if eD is not None else np.zeros((n_o, D.cols))
    ea = ea if ea is not None else np.zeros(n_o)
    return AbstractFilter(T, D, Tc, np.asarray(eT, float), np.asarray(eD, float),
                          np.asarray(ea, float), tuple(labels), fmt)


def make_basic(kind: str, fmt: FloatFormat = EXACT, k=None, n: int = 1,
               label: str | None = None) -> AbstractFilter:
    """Basic blocks.

    ``plus``: two inputs summed in ``fmt``.  ``scale``: multiply by ``k``.
    ``delay``: ``z**n`` with zero initial contents.  ``unit_delay_init``: one
    unit delay whose initial content is a reset slot.  The wiring blocks
    ``identity`` (n wires), ``fanout`` (1 to n) and ``negate`` are exact.
    """
    if kind == "plus":
        T = RatFunMatrix.from_rows([[ONE, ONE]])
        return _filter(T, eT=[[fmt.eps_rel, fmt.eps_rel]], ea=[fmt.eps_abs], fmt=fmt)
    if kind == "scale":
        if k is None:
            raise ValueError("scale needs a constant k")
        k = Fraction(k)
        T = RatFunMatrix.from_rows([[RatFun.const(k)]])
        if k == 0:
            return _filter(T, fmt=fmt)
        # rounding of the product plus the representation error of k itself
        kf = fmt.round_constant(k)
        rep = abs(kf - k)
        er = rat_up(abs(k) * Fraction(fmt.eps_rel) + rep * (1 + Fraction(fmt.eps_rel)))
        ea = fmt.eps_abs
        if fmt.kind == "fixed" and k.denominator == 1:
            ea = 0.0  # integer multiples of grid values stay on the grid
        return _filter(T, eT=[[er]], ea=[ea], fmt=fmt)
    if kind == "delay":
        T = RatFunMatrix.from_rows([[RatFun.zpow(n)]])
        return _filter(T, fmt=fmt)
    if kind == "unit_delay_init":
        T = RatFunMatrix.from_rows([[Z]])
        D = RatFunMatrix.from_rows([[ONE]])
        return _filter(T, D, labels=(label or "r0",), fmt=fmt)
    if kind == "identity":
        return _filter(RatFunMatrix.identity(n), fmt=fmt)
    if kind == "fanout":
        return _filter(RatFunMatrix(n, 1, [ONE] * n), fmt=fmt)
    if kind == "negate":
        return _filter(RatFunMatrix.from_rows([[RatFun.const(-1)]]), fmt=fmt)
    raise ValueError(f"unknown basic block {kind!r}")


def make_constant_source(c, fmt: FloatFormat = EXACT) -> AbstractFilter:
    """Zero-input filter emitting the constant ``c`` at every step."""
    c = Fraction(c)
    Tc = RatFunMatrix(1, 1, [RatFun(Poly.const(c), Poly((1, -1)))])
    ea = [0.0]
    if c != fmt.round_constant(c):
        ea = [rat_up(abs(c - fmt.round_constant(c)))]
    return _filter(RatFunMatrix(1, 0, []), Tc=Tc, ea=ea, fmt=fmt)


def _linf_col(Tc: RatFunMatrix) -> np.ndarray:
    return np.array([linf_bound(Tc[i, 0]) for i in range(Tc.rows)], dtype=float)


def constant_contribution(f: AbstractFilter) -> np.ndarray:
    """Per-output bound on the stream produced by the constant sources."""
    return _linf_col(f.Tc)


def compose_parallel(f: AbstractFilter, g: AbstractFilter) -> AbstractFilter:
    return AbstractFilter(
        block_diag(f.T, g.T), block_diag(f.D, g.D), vstack(f.Tc, g.Tc),
        _block(f.eps_rel_T, g.eps_rel_T), _block(f.eps_rel_D, g.eps_rel_D),
        np.concatenate([f.eps_abs, g.eps_abs]),
        f.reset_labels + g.reset_labels, _join_fmt(f, g))


def _join_fmt(f, g) -> FloatFormat:
    return f.fmt if f.fmt.kind != "exact" else g.fmt


def compose_serial(f: AbstractFilter, g: AbstractFilter) -> AbstractFilter:
    """``f`` first, then ``g`` fed with the outputs of ``f``."""
    if f.n_o != g.n_i:
        raise ValueError(f"serial composition: {f.n_o} outputs feed {g.n_i} inputs")
    T = g.T @ f.T
    D = hstack(g.T @ f.D, g.D) if (f.n_r or g.n_r) else RatFunMatrix.zeros(g.n_o, 0)
    Tc = g.T @ f.Tc + g.Tc
    NG = n1(g.T)
    G = _add(NG, g.eps_rel_T)
    eT = _add(_mm(G, f.eps_rel_T), _mm(g.eps_rel_T, n1(f.T)))
    eDf = _add(_mm(G, f.eps_rel_D), _mm(g.eps_rel_T, ninf(f.D)))
    eD = np.hstack([eDf, g.eps_rel_D])
    ea = _add(_mm(G, f.eps_abs.reshape(-1, 1)),
              _mm(g.eps_rel_T, constant_contribution(f).reshape(-1, 1)),
              g.eps_abs.reshape(-1, 1)).reshape(-1)
    return AbstractFilter(T, D, Tc, eT, eD, ea, f.reset_labels + g.reset_labels,
                          _join_fmt(f, g))


def _fixpoint_columns(K1: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(Y)
    for j in range(Y.shape[1]):
        y = Y[:, j]
        if np.any(np.isinf(y)):
            out[:, j] = INF
        else:
            out[:, j] = fixpoint_upper_bound(K1, y)
    return out


def compose_feedback(f: AbstractFilter) -> AbstractFilter:
    """Close the loop: the last ``n_o`` inputs of ``f`` receive its own
    outputs through a unit delay with zero initial contents.
    """
    n = f.n_o
    m = f.n_i - n
    if m < 0:
        raise ValueError("feedback needs at least as many inputs as outputs")
    TI = f.T.select_cols(range(m))
    TO = f.T.select_cols(range(m, m + n))
    W = invert_id_minus_zA(TO)
    T = W @ TI
    D = W @ f.D
    Tc = W @ f.Tc
    eI = f.eps_rel_T[:, :m]
    eO = f.eps_rel_T[:, m:]
    A = n1(W)
    K1 = _mm(A, eO)
    Y_T = _mm(A, _add(eI, _mm(eO, n1(T))))
    Y_D = _mm(A, _add(f.eps_rel_D, _mm(eO, ninf(D))))
    Y_a = _mm(A, _add(f.eps_abs.reshape(-1, 1),
                      _mm(eO, _linf_col(Tc).reshape(-1, 1))))
    if not np.all(np.isfinite(K1)):
        # unstable loop with rounding on the feedback path: nothing is bounded
        return AbstractFilter(T, D, Tc, np.full((n, m), INF), np.full((n, f.n_r), INF),
                              np.full(n, INF), f.reset_labels, f.fmt)
    eT = _fixpoint_columns(K1, Y_T) if m else np.zeros((n, 0))
    eD = _fixpoint_columns(K1, Y_D) if f.n_r else np.zeros((n, 0))
    ea = _fixpoint_columns(K1, Y_a).reshape(-1)
    return AbstractFilter(T, D, Tc, eT, eD, ea, f.reset_labels, f.fmt)


def feedback_gain(f: AbstractFilter) -> np.ndarray:
    """``K1 = N1((Id - z T_O)^-1) . eps_rel_O`` for the loop ``f`` would close."""
    n = f.n_o
    m = f.n_i - n
    W = invert_id_minus_zA(f.T.select_cols(range(m, m + n)))
    return _mm(n1(W), f.eps_rel_T[:, m:])


# --------------------------------------------------------------------------
# coefficient quantization

def _round_dyadic(c: Fraction, bits: int) -> Fraction:
    if c == 0:
        return c
    return round_to_binary(c, bits, -10 ** 6)


def _quantize_ratfun(r: RatFun, bits: int) -> RatFun:
    num = Poly(_round_dyadic(c, bits) for c in r.num.coeffs)
    den = Poly([1] + [_round_dyadic(c, bits) for c in r.den.coeffs[1:]])
    return RatFun(num, den)


def quantization_increment(r: RatFun, rq: RatFun) -> float:
    """Bound on ``l1(r - rq)`` without forming the exact difference.

    ``r = P/Q`` is seen as the loop ``O = P I + (1-Q) O`` and ``rq`` as the same
    loop built from the rounded polynomials, so the discrepancies are a
    perturbation of size ``l1(P - P#)`` on the input path and ``l1(Q - Q#)``
    on the feedback path.
    """
    dP = rat_up((r.num - rq.num).l1())
    dQ = rat_up((r.den - rq.den).l1())
    if dP == 0 and dQ == 0:
        return 0.0
    kb_inv = l1_bound(RatFun(1, rq.den))
    kb_q = l1_bound(rq)
    if not (kb_inv.finite and kb_q.finite):
        return INF
    A = kb_inv.l1_upper
    K1 = mul_up(A, dQ)
    y = add_up(mul_up(A, dP), mul_up(mul_up(A, dQ), kb_q.l1_upper))
    return float(fixpoint_upper_bound(np.array([[K1]]), np.array([y]))[0])


def quantize(f: AbstractFilter, budget: int | None = 512) -> AbstractFilter:
    """Replace oversized coefficients by short dyadic ones, folding the
    change into the error bounds.  Entries of ``Tc`` are left alone.

    Returns ``f`` unchanged (with a warning) when a quantized loop fails the
    contraction test.
    """
    if budget is None or budget == math.inf:
        return f
    budget = int(budget)

    def shrink(M: RatFunMatrix, eps: np.ndarray):
        entries = list(M.entries)
        eps = eps.copy()
        changed = False
        for idx, r in enumerate(entries):
            if r.bit_size() <= budget:
                continue
            bits = max(8, budget // 4)
            while True:
                rq = _quantize_ratfun(r, bits)
                if rq.bit_size() <= budget or bits <= 8:
                    break
                bits //= 2
            inc = quantization_increment(r, rq)
            i, j = divmod(idx, M.cols)
            eps[i, j] = add_up(eps[i, j], inc)
            entries[idx] = rq
            changed = True
        return RatFunMatrix(M.rows, M.cols, entries), eps, changed

    try:
        T, eT, c1 = shrink(f.T, f.eps_rel_T)
        D, eD, c2 = shrink(f.D, f.eps_rel_D)
    except NotContractingError as exc:
        log.warning("quantization skipped: %s", exc)
        return f
    if not (c1 or c2):
        return f
    return AbstractFilter(T, D, f.Tc, eT, eD, f.eps_abs.copy(), f.reset_labels, f.fmt)


# --------------------------------------------------------------------------
# output bounds

@dataclass(frozen=True)
class ResetGroup:
    """Reset slots that all hold ``weight_j * v`` for one value ``|v| <= bound``."""

    name: str
    slots: tuple
    weights: tuple
    bound: float


@dataclass
class OutputBound:
    gain_T: np.ndarray
    reset_terms: np.ndarray
    const_terms: np.ndarray
    eps_terms: np.ndarray
    bounds: np.ndarray
    unbounded: list = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.bounds)))


def output_bound(f: AbstractFilter, m_in, m_reset, shared_resets: Sequence[ResetGroup] | None = None
                 ) -> OutputBound:
    """Per-output sup bound for inputs bounded by ``m_in`` and reset slots
    bounded by ``m_reset``.

    With ``shared_resets`` the D columns of each group are summed as rational
    functions (weighted) before taking the sup bound, which is tighter when
    the slots are known to carry the same value.
    """
    m_in = np.asarray(m_in, dtype=float).reshape(-1)
    m_reset = np.asarray(m_reset, dtype=float).reshape(-1)
    if m_in.shape[0] != f.n_i or m_reset.shape[0] != f.n_r:
        raise ValueError("bound vectors do not match filter dimensions")
    gT = n1(f.T)
    lin = _mm(gT, m_in.reshape(-1, 1)).reshape(-1)
    unb = [(i, j, "T") for i in range(f.n_o) for j in range(f.n_i)
           if math.isinf(gT[i, j])]
    reset = np.zeros(f.n_o)
    grouped = set()
    for grp in shared_resets or ():
        grouped.update(grp.slots)
        for i in range(f.n_o):
            s = ZERO
            for slot, w in zip(grp.slots, grp.weights):
                s = s + f.D[i, slot] * Fraction(w)
            v = linf_bound(s)
            if math.isinf(v):
                unb.append((i, grp.name, "D"))
            reset[i] = add_up(reset[i], mul_up(v, grp.bound) if v else 0.0)
    rest = [j for j in range(f.n_r) if j not in grouped]
    if rest:
        gD = ninf(f.D.select_cols(rest))
        unb += [(i, rest[j], "D") for i in range(f.n_o) for j in range(len(rest))
                if math.isinf(gD[i, j])]
        reset = _add(reset, _mm(gD, m_reset[rest].reshape(-1, 1)).reshape(-1))
    const = constant_contribution(f)
    eps = _add(_mm(f.eps_rel_T, m_in.reshape(-1, 1)).reshape(-1),
               _mm(f.eps_rel_D, m_reset.reshape(-1, 1)).reshape(-1),
               f.eps_abs)
    total = _add(lin, reset, const, eps)
    return OutputBound(gT, reset, const, eps, total, unb)
