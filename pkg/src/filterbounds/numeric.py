"""Sound floating-point helpers: outward-rounded intervals, certified root
discs and the contracting fixpoint bound.

Rounding strategy
-----------------
The hardware rounding mode is never changed.  Every operation is evaluated in
round-to-nearest and the result is then pushed outward with ``math.nextafter``
unless an error-free transformation (TwoSum, Veltkamp TwoProduct) proves the
rounded value exact or tells which side the exact value lies on.  Since no
global state is touched, all functions here are safe to call from any number
of threads at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

INF = math.inf

__all__ = [
    "Interval", "IntervalPoly", "ComplexInterval", "RootEnclosure",
    "ClusteredRootsError", "NotContractingError", "RootFindingError",
    "FixpointCheckError", "contains_zero", "approx_roots", "certify_roots",
    "cauchy_lower_bound", "enclose_roots", "subordinate_inf_norm",
    "matvec_up", "matmul_up", "fixpoint_upper_bound", "rat_up", "rat_down",
    "add_up", "add_down", "mul_up", "mul_down", "div_up", "div_down",
    "sqrt_up", "sqrt_down",
]


class ClusteredRootsError(ArithmeticError):
    """Root certification failed because approximations are too close."""


class RootFindingError(ArithmeticError):
    pass


class NotContractingError(ArithmeticError):
    """Raised when the error feedback gain has norm >= 1."""


class FixpointCheckError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# scalar directed rounding

def _next_up(x: float) -> float:
    return math.nextafter(x, INF)


def _next_down(x: float) -> float:
    return math.nextafter(x, -INF)


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    if not math.isfinite(s):
        return s, 0.0
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


_SPLITTER = 134217729.0  # 2**27 + 1


def _split(a: float) -> tuple[float, float]:
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a: float, b: float):
    """Exact ``a*b = p + e`` when safe, else ``None``.

    Safe means no overflow in the splitting and no underflow in the error
    term; outside that range the caller falls back to plain widening.
    """
    p = a * b
    if p == 0.0 or not math.isfinite(p):
        return None
    ap = abs(p)
    if ap < 2.0 ** -968 or ap > 2.0 ** 995 or abs(a) > 2.0 ** 995 or abs(b) > 2.0 ** 995:
        return None
    ah, al = _split(a)
    bh, bl = _split(b)
    e = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    return p, e


def add_up(a: float, b: float) -> float:
    s, e = _two_sum(a, b)
    if not math.isfinite(s):
        return s if not math.isnan(s) else INF
    return _next_up(s) if e > 0 else s


def add_down(a: float, b: float) -> float:
    s, e = _two_sum(a, b)
    if not math.isfinite(s):
        return s if not math.isnan(s) else -INF
    return _next_down(s) if e < 0 else s


def mul_up(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    r = _two_prod(a, b)
    if r is None:
        p = a * b
        return p if math.isinf(p) and p > 0 else _next_up(p)
    p, e = r
    return _next_up(p) if e > 0 else p


def mul_down(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    r = _two_prod(a, b)
    if r is None:
        p = a * b
        return p if math.isinf(p) and p < 0 else _next_down(p)
    p, e = r
    return _next_down(p) if e < 0 else p


def _div_residual_sign(a: float, b: float, q: float):
    """Sign of ``a/b - q`` or ``None`` when it cannot be decided cheaply."""
    r = _two_prod(q, b)
    if r is None:
        return None
    p, e = r
    # a - q*b is exactly representable for a correctly rounded q
    rem = (a - p) - e
    if rem == 0.0:
        return 0
    return 1 if (rem > 0) == (b > 0) else -1


def div_up(a: float, b: float) -> float:
    if b == 0.0:
        raise ZeroDivisionError("division by zero in directed rounding")
    q = a / b
    if q == 0.0 and a == 0.0:
        return 0.0
    if math.isinf(q):
        return q if q > 0 else _next_up(q)
    s = _div_residual_sign(a, b, q)
    if s is None:
        return _next_up(q)
    return _next_up(q) if s > 0 else q


def div_down(a: float, b: float) -> float:
    if b == 0.0:
        raise ZeroDivisionError("division by zero in directed rounding")
    q = a / b
    if q == 0.0 and a == 0.0:
        return 0.0
    if math.isinf(q):
        return q if q < 0 else _next_down(q)
    s = _div_residual_sign(a, b, q)
    if s is None:
        return _next_down(q)
    return _next_down(q) if s < 0 else q


def _sqrt_residual_sign(x: float, s: float):
    r = _two_prod(s, s)
    if r is None:
        return None
    p, e = r
    rem = (x - p) - e
    return 0 if rem == 0.0 else (1 if rem > 0 else -1)


def sqrt_up(x: float) -> float:
    if x < 0:
        raise ValueError("sqrt of a negative number")
    if x == 0.0 or math.isinf(x):
        return x
    s = math.sqrt(x)
    sg = _sqrt_residual_sign(x, s)
    return _next_up(s) if sg is None or sg > 0 else s


def sqrt_down(x: float) -> float:
    if x < 0:
        raise ValueError("sqrt of a negative number")
    if x == 0.0 or math.isinf(x):
        return x
    s = math.sqrt(x)
    sg = _sqrt_residual_sign(x, s)
    return max(_next_down(s), 0.0) if sg is None or sg < 0 else s


def rat_up(q) -> float:
    """Smallest float >= the rational ``q``."""
    q = Fraction(q)
    try:
        f = float(q)
    except OverflowError:
        return INF if q > 0 else -math.ldexp(1.0, 1023) * (2 - 2 ** -52)
    if math.isinf(f):
        return f if f > 0 else -(2 - 2 ** -52) * 2.0 ** 1023
    return f if Fraction(f) >= q else _next_up(f)


def rat_down(q) -> float:
    """Largest float <= the rational ``q``."""
    q = Fraction(q)
    try:
        f = float(q)
    except OverflowError:
        return -INF if q < 0 else (2 - 2 ** -52) * 2.0 ** 1023
    if math.isinf(f):
        return f if f < 0 else (2 - 2 ** -52) * 2.0 ** 1023
    return f if Fraction(f) <= q else _next_down(f)


def sum_up(values) -> float:
    acc = 0.0
    for v in values:
        acc = add_up(acc, v)
    return acc


def pow_up(x: float, n: int) -> float:
    """Upper bound on x**n for x >= 0."""
    r = 1.0
    for _ in range(n):
        r = mul_up(r, x)
    return r


def pow_down(x: float, n: int) -> float:
    r = 1.0
    for _ in range(n):
        r = mul_down(r, x)
    return r


# --------------------------------------------------------------------------
# intervals

@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` of reals with float endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoint is NaN")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> Interval:
        x = float(x)
        return cls(x, x)

    @classmethod
    def from_rat(cls, q) -> Interval:
        """Tightest float interval around an exact rational."""
        q = Fraction(q)
        return cls(rat_down(q), rat_up(q))

    @classmethod
    def coerce(cls, x) -> Interval:
        if isinstance(x, Interval):
            return x
        if isinstance(x, float):
            return cls(x, x)
        return cls.from_rat(x)

    def __add__(self, other) -> Interval:
        o = Interval.coerce(other)
        return Interval(add_down(self.lo, o.lo), add_up(self.hi, o.hi))

    __radd__ = __add__

    def __neg__(self) -> Interval:
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other) -> Interval:
        return self + (-Interval.coerce(other))

    def __rsub__(self, other) -> Interval:
        return Interval.coerce(other) - self

    def __mul__(self, other) -> Interval:
        o = Interval.coerce(other)
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        return Interval(min(mul_down(a, b) for a, b in pairs),
                        max(mul_up(a, b) for a, b in pairs))

    __rmul__ = __mul__

    def __truediv__(self, other) -> Interval:
        o = Interval.coerce(other)
        if o.lo <= 0.0 <= o.hi:
            raise ZeroDivisionError(f"division by interval {o} containing zero")
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        return Interval(min(div_down(a, b) for a, b in pairs),
                        max(div_up(a, b) for a, b in pairs))

    def __rtruediv__(self, other) -> Interval:
        return Interval.coerce(other) / self

    def sqr(self) -> Interval:
        m = self.mag()
        g = self.mig()
        return Interval(mul_down(g, g), mul_up(m, m))

    def sqrt(self) -> Interval:
        if self.lo < 0:
            raise ValueError(f"sqrt of interval {self} with negative part")
        return Interval(sqrt_down(self.lo), sqrt_up(self.hi))

    def __abs__(self) -> Interval:
        return Interval(self.mig(), self.mag())

    def mag(self) -> float:
        """Upper bound on |x|."""
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        """Lower bound on |x|."""
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        if isinstance(x, Fraction):
            return Fraction(self.lo) <= x <= Fraction(self.hi)
        return self.lo <= x <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    @property
    def mid(self) -> float:
        if math.isinf(self.lo) or math.isinf(self.hi):
            return 0.0 if self.lo == -self.hi else (self.lo if math.isinf(self.hi) else self.hi)
        return self.lo / 2 + self.hi / 2

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


@dataclass(frozen=True)
class ComplexInterval:
    """Rectangle ``re + i*im`` in the complex plane."""

    re: Interval
    im: Interval

    @classmethod
    def point(cls, z: complex) -> ComplexInterval:
        return cls(Interval.point(z.real), Interval.point(z.imag))

    @classmethod
    def coerce(cls, x) -> ComplexInterval:
        if isinstance(x, ComplexInterval):
            return x
        if isinstance(x, complex):
            return cls.point(x)
        return cls(Interval.coerce(x), Interval.point(0.0))

    def __add__(self, other):
        o = ComplexInterval.coerce(other)
        return ComplexInterval(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return ComplexInterval(-self.re, -self.im)

    def __sub__(self, other):
        o = ComplexInterval.coerce(other)
        return ComplexInterval(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return ComplexInterval.coerce(other) - self

    def __mul__(self, other):
        o = ComplexInterval.coerce(other)
        return ComplexInterval(self.re * o.re - self.im * o.im,
                               self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def abs2(self) -> Interval:
        return self.re.sqr() + self.im.sqr()

    def __truediv__(self, other):
        o = ComplexInterval.coerce(other)
        d = o.abs2()
        if d.lo <= 0.0:
            raise ZeroDivisionError("complex division by a rectangle that may contain zero")
        num = self * ComplexInterval(o.re, -o.im)
        return ComplexInterval(num.re / d, num.im / d)

    def mag(self) -> float:
        """Upper bound on the modulus."""
        return sqrt_up(add_up(mul_up(self.re.mag(), self.re.mag()),
                              mul_up(self.im.mag(), self.im.mag())))

    def mig(self) -> float:
        """Lower bound on the modulus."""
        r, i = self.re.mig(), self.im.mig()
        return sqrt_down(add_down(mul_down(r, r), mul_down(i, i)))

    @property
    def mid(self) -> complex:
        return complex(self.re.mid, self.im.mid)


class IntervalPoly:
    """Polynomial with interval coefficients, lowest degree first."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence = ()):
        c = [Interval.coerce(x) for x in coeffs]
        # trailing exact zeros carry no information about the degree
        while c and c[-1].lo == 0.0 and c[-1].hi == 0.0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def from_poly(cls, p) -> IntervalPoly:
        return cls(Interval.from_rat(c) for c in p.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def leading_excludes_zero(self) -> bool:
        return bool(self.coeffs) and not self.coeffs[-1].contains_zero()

    def midpoint(self) -> np.ndarray:
        return np.array([c.mid for c in self.coeffs], dtype=float)

    def __call__(self, x):
        if isinstance(x, (complex, ComplexInterval)):
            acc = ComplexInterval.point(0j)
            for c in reversed(self.coeffs):
                acc = acc * x + ComplexInterval(c, Interval.point(0.0))
            return acc
        acc = Interval.point(0.0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __repr__(self):
        return f"IntervalPoly({list(self.coeffs)})"


def contains_zero(p) -> bool:
    """True when every coefficient interval contains 0."""
    if isinstance(p, Interval):
        return p.contains_zero()
    return all(c.contains_zero() for c in p.coeffs)


# --------------------------------------------------------------------------
# roots

@dataclass(frozen=True)
class RootEnclosure:
    """Disc ``|z - center| <= radius`` holding one root, plus a lower bound
    on the modulus of that root.

    For the Cauchy fallback the disc is centred at 0 and only
    ``modulus_lower`` carries information.
    """

    center: complex
    radius: float
    modulus_lower: float

    def contains(self, z) -> bool:
        """Exact test (rationals or floats) used by tests and diagnostics."""
        zr = Fraction(z.real) if not isinstance(z, Fraction) else z
        zi = Fraction(z.imag) if not isinstance(z, Fraction) else Fraction(0)
        dr = zr - Fraction(self.center.real)
        di = zi - Fraction(self.center.imag)
        return dr * dr + di * di <= Fraction(self.radius) ** 2


def approx_roots(p: IntervalPoly, polish: int = 3) -> list[complex]:
    """Approximate roots of the midpoint polynomial (no soundness claim)."""
    if p.degree < 1:
        raise ValueError("approx_roots needs degree >= 1")
    if not p.leading_excludes_zero():
        raise ValueError("leading coefficient interval contains zero; degree is uncertain")
    mid = p.midpoint()
    hi_first = mid[::-1]
    roots = np.roots(hi_first).astype(complex)
    if len(roots) != p.degree or not np.all(np.isfinite(roots)):
        raise RootFindingError(
            f"companion eigen-solver failed for degree {p.degree}; "
            "check conditioning of the denominator")
    dp = np.polyder(hi_first)
    for _ in range(polish):
        f = np.polyval(hi_first, roots)
        d = np.polyval(dp, roots)
        ok = d != 0
        step = np.zeros_like(roots)
        step[ok] = f[ok] / d[ok]
        cand = roots - step
        better = np.abs(np.polyval(hi_first, cand)) <= np.abs(f)
        roots = np.where(better & np.isfinite(cand), cand, roots)
    # keep the ordering deterministic
    return sorted((complex(r) for r in roots), key=lambda z: (round(abs(z), 12), z.real, z.imag))


def _mod_lower(center: complex, radius: float) -> float:
    c = ComplexInterval.point(center).mig()
    return max(0.0, add_down(c, -radius))


def certify_roots(p: IntervalPoly, approx: Sequence[complex]) -> list[RootEnclosure]:
    """Discs certified to contain the roots of every polynomial in ``p``.

    Uses the Gerschgorin discs of the matrix ``diag(x) - w 1^T`` whose
    characteristic polynomial is ``p / p_n``; a connected group of k discs
    holds exactly k roots.  Members of an overlapping group each receive a
    disc covering the whole group.
    """
    n = p.degree
    if n < 1:
        return []
    if len(approx) != n:
        raise ValueError(f"need {n} approximations, got {len(approx)}")
    if not p.leading_excludes_zero():
        raise ClusteredRootsError("leading coefficient may vanish; degree uncertain")
    xs = [complex(x) for x in approx]
    lead = ComplexInterval(p.coeffs[-1], Interval.point(0.0))
    centers, radii = [], []
    for j, x in enumerate(xs):
        den = lead
        for k, y in enumerate(xs):
            if k != j:
                if x == y:
                    raise ClusteredRootsError("approximate roots coincide")
                den = den * (ComplexInterval.point(x) - ComplexInterval.point(y))
        try:
            W = p(x) / den
        except ZeroDivisionError:
            raise ClusteredRootsError("root correction denominator may vanish") from None
        c = x - W.mid
        off = ComplexInterval.point(x) - W - ComplexInterval.point(c)
        r = add_up(mul_up(float(n - 1), W.mag()), off.mag())
        if not math.isfinite(r):
            raise ClusteredRootsError("unbounded root correction")
        centers.append(c)
        radii.append(r)

    # group overlapping discs
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for k in range(i + 1, n):
            dist = ComplexInterval.point(centers[i]) - ComplexInterval.point(centers[k])
            if dist.mig() <= add_up(radii[i], radii[k]):
                parent[find(i)] = find(k)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    out = [None] * n
    for members in groups.values():
        for j in members:
            if len(members) == 1:
                rad = radii[j]
            else:
                rad = 0.0
                for k in members:
                    d = (ComplexInterval.point(centers[j]) - ComplexInterval.point(centers[k])).mag()
                    rad = max(rad, add_up(d, radii[k]))
            out[j] = RootEnclosure(centers[j], rad, _mod_lower(centers[j], rad))
    return out


def cauchy_lower_bound(p: IntervalPoly) -> float:
    """Largest r (found by bisection, then verified) with no root in |z| <= r.

    Uses ``|q0| - sum_k |q_k| r^k > 0`` evaluated in outward rounding.
    """
    q0 = p.coeffs[0].mig() if p.coeffs else 0.0
    if q0 == 0.0:
        return 0.0
    mags = [c.mag() for c in p.coeffs[1:]]

    def ok(r: float) -> bool:
        acc = 0.0
        rk = 1.0
        for m in mags:
            rk = mul_up(rk, r)
            acc = add_up(acc, mul_up(m, rk))
        return acc < q0

    lo, hi = 0.0, 1.0
    while ok(hi) and hi < 2.0 ** 500:
        lo, hi = hi, hi * 2
    for _ in range(80):
        mid = lo / 2 + hi / 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def cauchy_upper_bound(p: IntervalPoly) -> float:
    """Upper bound ``1 + max_k |q_k / q_n|`` on all root moduli."""
    lead = p.coeffs[-1].mig()
    if lead == 0.0:
        return INF
    m = max((div_up(c.mag(), lead) for c in p.coeffs[:-1]), default=0.0)
    return add_up(1.0, m)


def enclose_roots(p: IntervalPoly) -> tuple[list[RootEnclosure], bool]:
    """Certified enclosures, falling back to a common Cauchy bound.

    Returns ``(enclosures, certified)``; ``certified`` is False when the
    fallback was used.
    """
    try:
        approx = approx_roots(p)
    except RootFindingError:
        approx = None
    if approx is not None:
        for attempt in range(3):
            try:
                return certify_roots(p, approx), True
            except ClusteredRootsError:
                # nudge coincident approximations apart and try again
                eps = 2.0 ** (-40 + 10 * attempt)
                approx = [z * (1 + eps * (k + 1) * (1 + 1j)) for k, z in enumerate(approx)]
    lower = cauchy_lower_bound(p)
    upper = cauchy_upper_bound(p)
    return [RootEnclosure(0j, upper, lower) for _ in range(p.degree)], False


# --------------------------------------------------------------------------
# nonnegative matrices and the fixpoint bound

def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if np.any(np.isnan(M)) or np.any(M < 0):
        raise ValueError("expected a nonnegative matrix")
    return M


def subordinate_inf_norm(M) -> float:
    """Upward-rounded maximum row sum."""
    M = _as_matrix(M)
    best = 0.0
    for row in M:
        best = max(best, sum_up(float(v) for v in row))
    return best


def _mul_up0(a: float, b: float) -> float:
    # 0 * inf is 0 for bounds: a zero gain kills an unbounded quantity
    if a == 0.0 or b == 0.0:
        return 0.0
    return mul_up(a, b)


def matvec_up(M, v) -> np.ndarray:
    M = _as_matrix(M)
    v = np.asarray(v, dtype=float).reshape(-1)
    if M.shape[1] != v.shape[0]:
        raise ValueError(f"shape mismatch {M.shape} @ {v.shape}")
    out = np.zeros(M.shape[0])
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc = add_up(acc, _mul_up0(float(M[i, j]), float(v[j])))
        out[i] = acc
    return out


def matmul_up(A, B) -> np.ndarray:
    A = _as_matrix(A)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    B = _as_matrix(B) if B.size else B
    out = np.zeros((A.shape[0], B.shape[1]))
    for j in range(B.shape[1]):
        out[:, j] = matvec_up(A, B[:, j]) if A.shape[1] else 0.0
    return out


def matadd_up(A, B) -> np.ndarray:
    """Elementwise upward-rounded sum (TwoSum decides when to widen)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    with np.errstate(invalid="ignore"):
        s = A + B
        bb = s - A
        e = (A - (s - bb)) + (B - bb)
        widen = np.isfinite(s) & (e > 0)
    return np.where(widen, np.nextafter(s, INF), s)


def fixpoint_upper_bound(K1, y, max_iter: int = 64, max_retries: int = 8) -> np.ndarray:
    """Upper bound ``B`` on the least solution of ``d = K1 d + y``.

    Iterates up to ``max_iter`` times and adds the geometric tail
    ``|K1|^(n+1) / (1 - |K1|) * |y|``.  The result is post-checked against
    ``K1 B + y <= B``; on failure it is widened by ``1 + 2**-20`` and checked
    again.
    """
    K1 = _as_matrix(K1)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.shape[0]
    if K1.shape != (n, n):
        raise ValueError(f"K1 must be {n}x{n}, got {K1.shape}")
    if np.any(np.isnan(y)) or np.any(y < 0):
        raise ValueError("y must be a nonnegative vector")
    norm = subordinate_inf_norm(K1) if n else 0.0
    if norm >= 1.0:
        raise NotContractingError(
            f"error feedback not contracting: |K1| = {norm!r} >= 1")
    if n == 0:
        return y.copy()
    d = y.copy()
    steps = 0
    for steps in range(1, max_iter + 1):
        nd = matadd_up(matvec_up(K1, d), y)
        if np.array_equal(nd, d):
            break
        d = nd
    ymax = float(np.max(y))
    if norm > 0.0 and ymax > 0.0:
        tail = div_up(mul_up(pow_up(norm, steps + 1), ymax), add_down(1.0, -norm))
        B = np.array([add_up(float(v), tail) for v in d])
    else:
        B = d
    for _ in range(max_retries + 1):
        lhs = matadd_up(matvec_up(K1, B), y)
        if np.all(lhs <= B):
            return B
        B = np.array([mul_up(float(v), 1.0 + 2.0 ** -20) for v in B])
    raise FixpointCheckError("fixpoint post-check K1*B + y <= B failed after retries")


def check_postfixpoint(K1, y, B) -> bool:
    """Independent upward-rounded check of ``K1 B + y <= B``."""
    lhs = matadd_up(matvec_up(K1, B), y)
    return bool(np.all(lhs <= np.asarray(B, dtype=float)))
