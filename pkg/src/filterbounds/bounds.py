"""Certified upper bounds on kernel norms of rational transfer functions.

For ``f = P/Q`` with power series ``sum c_k z^k`` we bound

* ``l1(f)   = sum_k |c_k|``   (the gain on bounded input streams)
* ``linf(f) = sup_k |c_k|``   (used for reset contributions)

The series is split after ``N`` terms.  The head is summed exactly and the
tail ``sum_{k>=N} |c_k|`` equals ``l1(R/Q)`` where ``P = D*Q + z^N R``.  The
tail is bounded from certified pole enclosures of ``Q``.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .algebra import Poly, RatFun, scaled_development
from .numeric import (
    Interval, IntervalPoly, RootEnclosure, add_up, div_up, enclose_roots,
    mul_up, rat_down, rat_up, sqrt_down, sqrt_up, add_down, pow_up,
)

N_MAX_DEFAULT = 4096
INF = math.inf

_n_max_var: contextvars.ContextVar[int] = contextvars.ContextVar("n_max", default=N_MAX_DEFAULT)


@contextlib.contextmanager
def development_limit(n_max: int):
    """Temporarily change the default development cap for this context."""
    tok = _n_max_var.set(int(n_max))
    try:
        yield
    finally:
        _n_max_var.reset(tok)


def current_n_max() -> int:
    return _n_max_var.get()


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNKNOWN = "unknown"


class TailMethod(str, enum.Enum):
    POLYNOMIAL_EXACT = "polynomial-exact"
    SECOND_ORDER_COMPLEX = "second-order-complex"
    ROUGH_PRODUCT = "rough-product"
    FIRST_ORDER_EXACT = "first-order-exact"
    NONE = "none"


@dataclass(frozen=True)
class KernelBound:
    l1_upper: float
    linf_upper: float
    dev_length: int
    head_l1: float
    tail_l1: float
    tail_method: TailMethod
    stability: Stability = Stability.STABLE
    roots: tuple = field(default=(), compare=False)
    roots_certified: bool = True

    @property
    def finite(self) -> bool:
        return self.stability is Stability.STABLE

    def as_dict(self) -> dict:
        return {
            "l1_upper": self.l1_upper,
            "linf_upper": self.linf_upper,
            "dev_length": self.dev_length,
            "head_l1": self.head_l1,
            "tail_l1": self.tail_l1,
            "tail_method": self.tail_method.value,
            "stability": self.stability.value,
            "roots_certified": self.roots_certified,
            "roots": [{"center": [r.center.real, r.center.imag], "radius": r.radius,
                       "modulus_lower": r.modulus_lower} for r in self.roots],
        }


def _unbounded(stab: Stability, roots=(), certified=True) -> KernelBound:
    return KernelBound(INF, INF, 0, INF, INF, TailMethod.NONE, stab, tuple(roots), certified)


# --------------------------------------------------------------------------
# head development

def _interval_coeffs(p: Poly) -> tuple[list[float], list[float]]:
    lo = [rat_down(c) for c in p.coeffs]
    hi = [rat_up(c) for c in p.coeffs]
    return lo, hi


def _develop_intervals(num: Poly, den: Poly, n_max: int):
    """Outward-rounded development; stops at the first coefficient whose
    sign is unknown.  Returns ``(lo, hi, N)`` with ``N`` the number of
    coefficients of known sign.
    """
    nextafter = math.nextafter
    plo, phi = _interval_coeffs(num)
    # den(0) == 1 exactly, so the recurrence is c_k = p_k + sum_j (-q_j) c_{k-j}
    qlo, qhi = _interval_coeffs(den)
    negq = [(j, -qhi[j], -qlo[j]) for j in range(1, len(qlo)) if den[j] != 0]
    lo: list[float] = []
    hi: list[float] = []
    np_ = len(plo)
    for k in range(n_max):
        if k < np_:
            a, b = plo[k], phi[k]
        else:
            a = b = 0.0
        for j, ml, mh in negq:
            if j > k:
                break
            cl, ch = lo[k - j], hi[k - j]
            if cl == 0.0 and ch == 0.0:
                continue
            if ml == mh:
                if ml >= 0:
                    x, y = ml * cl, ml * ch
                else:
                    x, y = ml * ch, ml * cl
                if x != 0.0 or cl != 0.0:
                    x = nextafter(x, -INF)
                if y != 0.0 or ch != 0.0:
                    y = nextafter(y, INF)
            else:
                ps = (ml * cl, ml * ch, mh * cl, mh * ch)
                x = nextafter(min(ps), -INF)
                y = nextafter(max(ps), INF)
            a = nextafter(a + x, -INF)
            b = nextafter(b + y, INF)
        if a != a or b != b:  # NaN from inf - inf
            break
        lo.append(a)
        hi.append(b)
        if a < 0.0 < b:
            return lo, hi, k
    return lo, hi, n_max


def develop_until_sign_loss(f: RatFun, n_max: int | None = None):
    """Interval development up to the first coefficient of unknown sign.

    Returns ``(head, N, head_l1)`` where ``head`` holds the ``N`` enclosing
    intervals and ``head_l1`` is an upward-rounded bound on their absolute sum.
    Coefficients that are exactly zero do not count as a loss of sign.
    """
    if n_max is None:
        n_max = _n_max_var.get()
    lo, hi, N = _develop_intervals(f.num, f.den, n_max)
    head = [Interval(a, b) for a, b in zip(lo[:N], hi[:N])]
    acc = 0.0
    for iv in head:
        acc = add_up(acc, iv.mag())
    return head, N, acc


# --------------------------------------------------------------------------
# tails

def tail_bound_rough(Q: Poly, enclosures, R_l1: float) -> float:
    """Bound on ``l1(R/Q)`` from ``l1(R) * l1(1/Q)``.

    ``l1(1/Q) <= 1 / (|lead(Q)| * prod(|xi| - 1))`` over the roots ``xi``.
    """
    lead = abs(Q.leading)
    acc = div_up(1.0, rat_down(lead))
    for e in enclosures:
        m = e.modulus_lower
        if not m > 1.0:
            raise ValueError("root modulus not certified above 1; kernel is not known stable")
        acc = mul_up(acc, div_up(1.0, add_down(m, -1.0)))
    return mul_up(acc, R_l1) if R_l1 else 0.0


def _second_order_lambda_sq(R: Poly, Q: Poly) -> Fraction:
    """``|A|^2`` for ``R/Q = A/(z - xi) + conj``, as an exact rational.

    With ``Q = 1 - b1 z - b2 z^2`` the roots satisfy ``xi + conj = -b1/b2`` and
    ``|xi|^2 = -1/b2``, which makes ``|R(xi)|^2 / |b2 (xi - conj)|^2`` rational.
    """
    b1, b2 = -Q[1], -Q[2]
    s = -b1 / b2
    p = -1 / b2
    r0, r1 = R[0], R[1]
    num = r0 * r0 + r0 * r1 * s + r1 * r1 * p
    return num / (b2 * b2 * (4 * p - s * s))


def _second_order_modulus_sq(Q: Poly) -> Fraction:
    return -1 / (-Q[2])


def tail_bound_second_order(P: Poly, Q: Poly, N: int) -> float:
    """Bound on ``sum_{k>=N} |c_k|`` for ``P/Q`` with ``Q`` of degree 2 and
    complex conjugate poles.

    Uses ``|c_k| <= 2|A| |xi|^-(k+1)`` and sums the geometric tail.
    """
    if Q.degree != 2 or Q[0] != 1:
        raise ValueError("need a degree-2 denominator with constant term 1")
    if Q[1] ** 2 - 4 * Q[0] * Q[2] >= 0:
        raise ValueError("discriminant is not negative; use the rough bound")
    if P.degree > 2:
        raise ValueError("numerator degree must be at most 2")
    extra = 0.0
    if P.degree == 2:
        c = P[2] / Q[2]
        P = P - Q * c
        if N == 0:
            extra = rat_up(abs(c))
    m2 = _second_order_modulus_sq(Q)
    if m2 <= 1:
        raise ValueError("poles inside or on the unit circle")
    lam = sqrt_up(rat_up(_second_order_lambda_sq(P, Q)))
    mod = sqrt_down(rat_down(m2))
    inv = div_up(1.0, mod)
    # 2|A| |xi|^-(N+1) / (1 - 1/|xi|)
    t = mul_up(2.0, lam)
    t = mul_up(t, pow_up(inv, N + 1))
    t = div_up(t, add_down(1.0, -inv))
    return add_up(t, extra)


# --------------------------------------------------------------------------
# exact head and remainder

def _exact_head_and_remainder(f: RatFun, N: int):
    """Exact ``head_l1``, ``head_linf`` and remainder ``R`` for split ``N``."""
    P, Q = f.num, f.den
    dq = Q.degree
    C, q0, L = scaled_development(P, Q, N)
    # head_l1 = sum |C_k| / q0^(k+1), accumulated over the common denominator q0^N
    S = 0
    best = Fraction(0)
    qa = abs(q0)
    for k, c in enumerate(C):
        S = S * qa + abs(c)
    head_l1 = Fraction(S, qa ** N) if N else Fraction(0)
    # largest |c_k| = |C_k| / q0^(k+1), compared without building fractions
    kb, cb = -1, 0
    for k, c in enumerate(C):
        c = abs(c)
        if c and (kb < 0 or c > cb * qa ** (k - kb)):
            kb, cb = k, c
    if kb >= 0:
        best = Fraction(cb, qa ** (kb + 1))
    # remainder coefficients R_i = p_{N+i} - sum_{j>i} q_j c_{N+i-j}, over q0^N
    Pi = [int(x * L) for x in P.coeffs]
    Qi = [int(x * L) for x in Q.coeffs]
    top = max(P.degree - N, dq - 1)
    R = []
    scale = q0 ** N
    for i in range(top + 1):
        m = N + i
        acc = (Pi[m] if m < len(Pi) else 0) * scale
        for j in range(i + 1, dq + 1):
            k = m - j
            if 0 <= k < N and Qi[j] and C[k]:
                acc -= Qi[j] * C[k] * q0 ** (N - k - 1)
        R.append(Fraction(acc, L * scale))
    return head_l1, best, Poly(R)


# --------------------------------------------------------------------------
# public bounds

@lru_cache(maxsize=4096)
def _l1_cached(f: RatFun, n_max: int) -> KernelBound:
    P, Q = f.num, f.den
    if P.is_zero():
        return KernelBound(0.0, 0.0, 0, 0.0, 0.0, TailMethod.POLYNOMIAL_EXACT)
    if Q.degree == 0:
        s = rat_up(P.l1())
        m = rat_up(max(abs(c) for c in P.coeffs))
        return KernelBound(s, m, P.degree + 1, s, 0.0, TailMethod.POLYNOMIAL_EXACT)

    enc, certified = enclose_roots(IntervalPoly.from_poly(Q))
    roots = tuple(enc)
    # low degrees are decided exactly; their enclosures are diagnostics only
    if Q.degree == 1:
        if abs(Q[1]) >= 1:
            return _unbounded(Stability.UNSTABLE, roots, certified)
    elif Q.degree == 2 and Q[1] ** 2 - 4 * Q[2] < 0:
        if _second_order_modulus_sq(Q) <= 1:
            return _unbounded(Stability.UNSTABLE, roots, certified)
    else:
        if any(e.modulus_lower <= 1.0 for e in enc):
            if certified and any(_disc_mod_upper(e) <= 1.0 for e in enc):
                return _unbounded(Stability.UNSTABLE, roots, certified)
            return _unbounded(Stability.UNKNOWN, roots, certified)

    _, N, _ = develop_until_sign_loss(f, n_max)
    N = max(N, P.degree - Q.degree + 1, 1)
    best = _split_at(f, N, roots)
    # any N gives a sound bound; the estimated tails are worth pushing
    # further out when interval development lost its sign early
    cur = best
    while (cur[5] in _LOOSE_TAILS and N * 2 <= n_max
           and cur[4] > _TAIL_RATIO * cur[3]):
        N *= 2
        cur = _split_at(f, N, roots)
        if cur[0] < best[0]:
            best = cur
    total, linf, N, h, tail, method = best
    return KernelBound(total, linf, N, h, tail, method, Stability.STABLE, roots, certified)


_TAIL_RATIO = 2.0 ** -20
_LOOSE_TAILS = (TailMethod.ROUGH_PRODUCT, TailMethod.SECOND_ORDER_COMPLEX)


def _split_at(f: RatFun, N: int, roots) -> tuple:
    """(total, linf, N, head, tail, method) with the head developed to N."""
    Q = f.den
    head_l1, head_max, R = _exact_head_and_remainder(f, N)
    h = rat_up(head_l1)
    if R.is_zero():
        tail, method = 0.0, TailMethod.POLYNOMIAL_EXACT
    elif Q.degree == 1:
        # l1(R/Q) = |r0| / (1 - |q1|) exactly
        tail, method = rat_up(abs(R[0]) / (1 - abs(Q[1]))), TailMethod.FIRST_ORDER_EXACT
    elif Q.degree == 2 and Q[1] ** 2 - 4 * Q[2] < 0:
        tail, method = tail_bound_second_order(R, Q, 0), TailMethod.SECOND_ORDER_COMPLEX
    else:
        tail = tail_bound_rough(Q, roots, rat_up(R.l1()))
        method = TailMethod.ROUGH_PRODUCT
    total = add_up(h, tail)
    linf = min(max(rat_up(head_max), tail), total)
    return total, linf, N, h, tail, method


def _disc_mod_upper(e: RootEnclosure) -> float:
    """Upper bound on the modulus of any point in the enclosure's disc."""
    c = abs(e.center)
    return add_up(math.nextafter(c, INF), e.radius)


def l1_bound(f: RatFun, n_max: int | None = None) -> KernelBound:
    """Certified bound on the L1 norm of the series of ``f``."""
    if not isinstance(f, RatFun):
        f = RatFun(f)
    return _l1_cached(f, n_max if n_max is not None else _n_max_var.get())


_ONE_MINUS_Z = Poly((1, -1))


def linf_bound(f: RatFun, n_max: int | None = None) -> float:
    """Certified bound on the largest series coefficient of ``f`` in modulus.

    A single pole at ``z = 1`` (a constant or step response) is split off:
    with ``g = f (1-z)`` and ``c = g(1)``, ``f = c/(1-z) + h`` where ``h`` is
    stable whenever ``g`` is, so ``linf(f) <= |c| + linf(h)``.  The partial
    sum bound ``l1(g)`` is kept when it happens to be smaller.
    """
    if not isinstance(f, RatFun):
        f = RatFun(f)
    if f.is_zero():
        return 0.0
    if f.den(1) == 0:
        g = f * RatFun(_ONE_MINUS_Z)
        kb = l1_bound(g, n_max)
        if not kb.finite:
            return INF
        c = g.num(1) / g.den(1)
        h = (g - RatFun(c)) * RatFun(Poly.const(1), _ONE_MINUS_Z)
        kh = l1_bound(h, n_max)
        split = add_up(rat_up(abs(c)), kh.linf_upper) if kh.finite else INF
        return min(kb.l1_upper, split)
    kb = l1_bound(f, n_max)
    return kb.linf_upper if kb.finite else INF


def stability(f: RatFun) -> Stability:
    return l1_bound(f).stability
