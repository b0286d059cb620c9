"""Exact arithmetic over the ring of causal rational functions.

Coefficients are :class:`fractions.Fraction` values.  A :class:`RatFun` always
has a denominator whose constant coefficient is 1, so it is the Z-transform of
a causal filter (the variable ``z`` is the unit delay).  Everything here is
immutable and exact; nothing touches floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

Rat = Fraction

#: Polynomials of higher degree are rejected.
MAX_DEGREE = 64


class DegreeError(ValueError):
    pass


class NonCausalError(ArithmeticError):
    """The result would have a zero constant denominator term."""


class SingularMatrixError(ArithmeticError):
    pass


def as_rat(x) -> Fraction:
    """Exact conversion of ints, Fractions, decimal strings and floats."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to a rational")


def _strip(coeffs: Iterable) -> tuple:
    c = [as_rat(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


class Poly:
    """Dense polynomial in z; ``coeffs[k]`` is the coefficient of z**k."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        c = _strip(coeffs)
        if len(c) - 1 > MAX_DEGREE:
            raise DegreeError(f"degree {len(c) - 1} exceeds cap {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @classmethod
    def const(cls, c) -> Poly:
        return cls((c,))

    @classmethod
    def monomial(cls, n: int, c=1) -> Poly:
        return cls([0] * n + [c])

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, k: int) -> Fraction:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return Fraction(0)

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.coeffs == _strip((other,))
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other) -> Poly:
        other = _as_poly(other)
        if other is None:
            return NotImplemented
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self[k] + other[k] for k in range(n))

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(-c for c in self.coeffs)

    def __sub__(self, other) -> Poly:
        other = _as_poly(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> Poly:
        return (-self) + other

    def __mul__(self, other) -> Poly:
        if isinstance(other, (int, Fraction)):
            return Poly(c * other for c in self.coeffs)
        if not isinstance(other, Poly):
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def shift(self, n: int) -> Poly:
        """Multiply by z**n."""
        return Poly([0] * n + list(self.coeffs)) if self.coeffs else self

    def divmod(self, other: Poly) -> tuple[Poly, Poly]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        lead = other.leading
        quot = [Fraction(0)] * max(len(rem) - dq, 0)
        for k in range(len(rem) - 1, dq - 1, -1):
            q = rem[k] / lead
            if q:
                quot[k - dq] = q
                for j, b in enumerate(other.coeffs):
                    rem[k - dq + j] -= q * b
        return Poly(quot), Poly(rem[:dq] if dq > 0 else ())

    def __floordiv__(self, other: Poly) -> Poly:
        return self.divmod(other)[0]

    def __mod__(self, other: Poly) -> Poly:
        return self.divmod(other)[1]

    def monic(self) -> Poly:
        if self.is_zero():
            return self
        return self * (1 / self.leading)

    def l1(self) -> Fraction:
        return sum((abs(c) for c in self.coeffs), Fraction(0))

    def bit_size(self) -> int:
        """Largest numerator+denominator bit length among the coefficients."""
        return max((c.numerator.bit_length() + c.denominator.bit_length()
                    for c in self.coeffs), default=0)

    def __repr__(self):
        return f"Poly({format_poly(self)})"

    def __str__(self):
        return format_poly(self)


def _as_poly(x):
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly((x,))
    return None


def format_poly(p: Poly, var: str = "z") -> str:
    if p.is_zero():
        return "0"
    parts = []
    for k, c in enumerate(p.coeffs):
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        a = abs(c)
        mono = "" if k == 0 else (var if k == 1 else f"{var}^{k}")
        if k == 0:
            body = str(a)
        elif a == 1:
            body = mono
        else:
            body = f"{a}*{mono}"
        parts.append((sign, body))
    first_sign, first = parts[0]
    s = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic greatest common divisor (zero only if both inputs are zero)."""
    while not b.is_zero():
        a, b = b, a % b
        b = b.monic()
    return a.monic()


def poly_lcm(a: Poly, b: Poly) -> Poly:
    if a.is_zero() or b.is_zero():
        return Poly()
    return (a * b // poly_gcd(a, b)).monic()


def _reduce(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Cancel the gcd; denominator returned with leading coefficient 1."""
    if den.is_zero():
        raise ZeroDivisionError("rational function with zero denominator")
    if num.is_zero():
        return Poly(), Poly((1,))
    g = poly_gcd(num, den)
    if g.degree > 0:
        num, den = num // g, den // g
    lead = den.leading
    return num * (1 / lead), den * (1 / lead)


class RatFun:
    """Element of the localized ring: ``num/den`` with ``den(0) == 1``."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num, den=1):
        num = _as_poly(num) if not isinstance(num, Poly) else num
        den = _as_poly(den) if not isinstance(den, Poly) else den
        if num is None or den is None:
            raise TypeError("RatFun expects polynomials or rationals")
        num, den = _reduce(num, den)
        d0 = den[0]
        if d0 == 0:
            raise NonCausalError(
                f"denominator {den} vanishes at z=0; not a causal transfer function")
        object.__setattr__(self, "num", num * (1 / d0))
        object.__setattr__(self, "den", den * (1 / d0))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("RatFun is immutable")

    @classmethod
    def const(cls, c) -> RatFun:
        return cls(Poly.const(c))

    @classmethod
    def zpow(cls, n: int, c=1) -> RatFun:
        return cls(Poly.monomial(n, c))

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __eq__(self, other) -> bool:
        if isinstance(other, RatFun):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (int, Fraction)):
            return self.is_polynomial() and self.num == other
        return NotImplemented

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.num, self.den))
            object.__setattr__(self, "_hash", h)
        return h

    def __add__(self, other) -> RatFun:
        other = _as_ratfun(other)
        if other is None:
            return NotImplemented
        if self.den == other.den:
            return RatFun(self.num + other.num, self.den)
        return RatFun(self.num * other.den + other.num * self.den,
                      self.den * other.den)

    __radd__ = __add__

    def __neg__(self) -> RatFun:
        return RatFun(-self.num, self.den)

    def __sub__(self, other) -> RatFun:
        other = _as_ratfun(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> RatFun:
        return (-self) + other

    def __mul__(self, other) -> RatFun:
        if isinstance(other, (int, Fraction)):
            return RatFun(self.num * as_rat(other), self.den)
        other = _as_ratfun(other)
        if other is None:
            return NotImplemented
        return RatFun(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other) -> RatFun:
        other = _as_ratfun(other)
        if other is None:
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RatFun(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other) -> RatFun:
        return _as_ratfun(other) / self

    def __call__(self, x):
        return self.num(x) / self.den(x)

    def develop(self, n: int) -> list[Fraction]:
        return develop(self, n)

    def bit_size(self) -> int:
        return max(self.num.bit_size(), self.den.bit_size())

    def __repr__(self):
        return f"RatFun({self})"

    def __str__(self):
        if self.is_polynomial():
            return format_poly(self.num)
        return f"({format_poly(self.num)})/({format_poly(self.den)})"


def _as_ratfun(x):
    if isinstance(x, RatFun):
        return x
    if isinstance(x, (int, Fraction)):
        return RatFun.const(x)
    if isinstance(x, Poly):
        return RatFun(x)
    return None


ZERO = RatFun(Poly())
ONE = RatFun.const(1)
Z = RatFun.zpow(1)


def scaled_development(num: Poly, den: Poly, n: int) -> tuple[list[int], int, int]:
    """Integer form of the first ``n`` series coefficients of ``num/den``.

    Returns ``(C, q0, L)`` with coefficient k equal to ``C[k] / q0**(k+1)``;
    ``L`` is the common denominator used to clear the input fractions.
    The recurrence only multiplies integers, which keeps long developments
    cheap compared to reducing a Fraction at every step.
    """
    if den[0] == 0:
        raise NonCausalError("development needs a nonzero constant denominator term")
    L = 1
    for c in num.coeffs + den.coeffs:
        L = L * c.denominator // math.gcd(L, c.denominator)
    P = [int(c * L) for c in num.coeffs]
    Q = [int(c * L) for c in den.coeffs]
    q0 = Q[0]
    dq = len(Q) - 1
    pows = [1]
    for _ in range(max(dq, len(P))):
        pows.append(pows[-1] * q0)
    C: list[int] = []
    for k in range(n):
        acc = P[k] * pows[k] if k < len(P) else 0
        for j in range(1, min(dq, k) + 1):
            if Q[j]:
                acc -= Q[j] * C[k - j] * pows[j - 1]
        C.append(acc)
    return C, q0, L


def develop(f: RatFun, n: int) -> list[Fraction]:
    """Power-series coefficients 0..n of ``f`` (n+1 values).

    This is series long division: the k-th quotient coefficient is the k-th
    coefficient of what remains of the numerator, divided by ``den(0)``.
    """
    if n < 0:
        return []
    C, q0, L = scaled_development(f.num, f.den, n + 1)
    out = []
    scale = q0
    for c in C:
        out.append(Fraction(c, scale))
        scale *= q0
    return out


# --------------------------------------------------------------------------
# general field of fractions, used internally by elimination

def _frac_reduce(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    return _reduce(num, den)


def _frac_mul(a, b):
    return _frac_reduce(a[0] * b[0], a[1] * b[1])


def _frac_sub(a, b):
    if a[1] == b[1]:
        return _frac_reduce(a[0] - b[0], a[1])
    return _frac_reduce(a[0] * b[1] - b[0] * a[1], a[1] * b[1])


def _frac_div(a, b):
    if b[0].is_zero():
        raise ZeroDivisionError
    return _frac_reduce(a[0] * b[1], a[1] * b[0])


def _frac_to_ratfun(f) -> RatFun:
    return RatFun(f[0], f[1])


class RatFunMatrix:
    """Dense row-major matrix of :class:`RatFun`."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: int, cols: int, entries: Sequence):
        entries = tuple(e if isinstance(e, RatFun) else _as_ratfun(e)
                        for e in entries)
        if len(entries) != rows * cols:
            raise ValueError(f"{rows}x{cols} matrix needs {rows * cols} entries, "
                             f"got {len(entries)}")
        if any(e is None for e in entries):
            raise TypeError("matrix entries must be rational functions")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", entries)

    def __setattr__(self, name, value):
        raise AttributeError("RatFunMatrix is immutable")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> RatFunMatrix:
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), ncols, [e for r in rows for e in r])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> RatFunMatrix:
        return cls(rows, cols, [ZERO] * (rows * cols))

    @classmethod
    def identity(cls, n: int) -> RatFunMatrix:
        return cls(n, n, [ONE if i == j else ZERO for i in range(n) for j in range(n)])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij) -> RatFun:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(ij)
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> list[RatFun]:
        return list(self.entries[i * self.cols:(i + 1) * self.cols])

    def col(self, j: int) -> list[RatFun]:
        return [self.entries[i * self.cols + j] for i in range(self.rows)]

    def tolist(self) -> list[list[RatFun]]:
        return [self.row(i) for i in range(self.rows)]

    def __eq__(self, other):
        if not isinstance(other, RatFunMatrix):
            return NotImplemented
        return self.shape == other.shape and self.entries == other.entries

    def __hash__(self):
        return hash((self.rows, self.cols, self.entries))

    def _check_same(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: RatFunMatrix) -> RatFunMatrix:
        self._check_same(other)
        return RatFunMatrix(self.rows, self.cols,
                            [a + b for a, b in zip(self.entries, other.entries)])

    def __sub__(self, other: RatFunMatrix) -> RatFunMatrix:
        self._check_same(other)
        return RatFunMatrix(self.rows, self.cols,
                            [a - b for a, b in zip(self.entries, other.entries)])

    def __neg__(self):
        return RatFunMatrix(self.rows, self.cols, [-a for a in self.entries])

    def scale(self, k) -> RatFunMatrix:
        k = k if isinstance(k, RatFun) else _as_ratfun(k)
        return RatFunMatrix(self.rows, self.cols, [k * a for a in self.entries])

    def __matmul__(self, other: RatFunMatrix) -> RatFunMatrix:
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for i in range(self.rows):
            r = self.row(i)
            for j in range(other.cols):
                acc = ZERO
                for k in range(self.cols):
                    a = r[k]
                    if a.is_zero():
                        continue
                    b = other.entries[k * other.cols + j]
                    if not b.is_zero():
                        acc = acc + a * b
                out.append(acc)
        return RatFunMatrix(self.rows, other.cols, out)

    def select_cols(self, cols: Sequence[int]) -> RatFunMatrix:
        return RatFunMatrix(self.rows, len(cols),
                            [self[i, j] for i in range(self.rows) for j in cols])

    def select_rows(self, rows: Sequence[int]) -> RatFunMatrix:
        return RatFunMatrix(len(rows), self.cols, [e for i in rows for e in self.row(i)])

    def map(self, fn) -> RatFunMatrix:
        return RatFunMatrix(self.rows, self.cols, [fn(e) for e in self.entries])

    def __repr__(self):
        return f"RatFunMatrix({self.rows}x{self.cols}, {[str(e) for e in self.entries]})"


def hstack(*ms: RatFunMatrix) -> RatFunMatrix:
    rows = ms[0].rows
    if any(m.rows != rows for m in ms):
        raise ValueError("hstack needs equal row counts")
    return RatFunMatrix(rows, sum(m.cols for m in ms),
                        [e for i in range(rows) for m in ms for e in m.row(i)])


def vstack(*ms: RatFunMatrix) -> RatFunMatrix:
    cols = ms[0].cols
    if any(m.cols != cols for m in ms):
        raise ValueError("vstack needs equal column counts")
    return RatFunMatrix(sum(m.rows for m in ms), cols, [e for m in ms for e in m.entries])


def block_diag(a: RatFunMatrix, b: RatFunMatrix) -> RatFunMatrix:
    top = hstack(a, RatFunMatrix.zeros(a.rows, b.cols)) if a.rows else None
    bot = hstack(RatFunMatrix.zeros(b.rows, a.cols), b) if b.rows else None
    if top is None:
        return bot if bot is not None else RatFunMatrix(0, a.cols + b.cols, [])
    if bot is None:
        return top
    return vstack(top, bot)


def _pivot_cost(f) -> int:
    return f[0].degree + f[1].degree


def _eliminate(M: RatFunMatrix, B: RatFunMatrix | None):
    """Gauss-Jordan over Q(z).  Returns (solution-or-None, determinant)."""
    n = M.rows
    if M.cols != n:
        raise ValueError("elimination needs a square matrix")
    one = (Poly((1,)), Poly((1,)))
    A = [[(e.num, e.den) for e in M.row(i)] for i in range(n)]
    X = [[(e.num, e.den) for e in B.row(i)] for i in range(n)] if B is not None else None
    det = one
    for c in range(n):
        # structurally nonzero pivot, cheapest first
        cand = [r for r in range(c, n) if not A[r][c][0].is_zero()]
        if not cand:
            return None, (Poly(), Poly((1,)))
        p = min(cand, key=lambda r: (_pivot_cost(A[r][c]), r))
        if p != c:
            A[c], A[p] = A[p], A[c]
            if X is not None:
                X[c], X[p] = X[p], X[c]
            det = (-det[0], det[1])
        piv = A[c][c]
        det = _frac_mul(det, piv)
        inv = (piv[1], piv[0])
        A[c] = [_frac_mul(e, inv) for e in A[c]]
        if X is not None:
            X[c] = [_frac_mul(e, inv) for e in X[c]]
        for r in range(n):
            if r == c or A[r][c][0].is_zero():
                continue
            f = A[r][c]
            A[r] = [a if b[0].is_zero() else _frac_sub(a, _frac_mul(f, b))
                    for a, b in zip(A[r], A[c])]
            if X is not None:
                X[r] = [a if b[0].is_zero() else _frac_sub(a, _frac_mul(f, b))
                        for a, b in zip(X[r], X[c])]
    return X, det


def solve_linear_system(M: RatFunMatrix, B: RatFunMatrix) -> RatFunMatrix:
    """Exact solution X of ``M @ X == B``; entries must be causal."""
    if M.rows != B.rows:
        raise ValueError(f"right-hand side has {B.rows} rows, expected {M.rows}")
    X, _ = _eliminate(M, B)
    if X is None:
        raise SingularMatrixError("no unique solution: matrix is singular")
    out = []
    for row in X:
        for f in row:
            try:
                out.append(_frac_to_ratfun(f))
            except NonCausalError as exc:
                raise NonCausalError(f"non-causal system: {exc}") from None
    return RatFunMatrix(B.rows, B.cols, out)


def determinant(M: RatFunMatrix) -> RatFun:
    _, det = _eliminate(M, None)
    return _frac_to_ratfun(det)


def invert_id_minus_zA(A: RatFunMatrix) -> RatFunMatrix:
    """Inverse of ``Id - z*A``, which always exists for causal ``A``."""
    n = A.rows
    if A.cols != n:
        raise ValueError("feedback matrix must be square")
    if n == 0:
        return A
    I = RatFunMatrix.identity(n)
    M = I - A.scale(Z)
    try:
        W = solve_linear_system(M, I)
    except (SingularMatrixError, NonCausalError) as exc:  # pragma: no cover
        raise RuntimeError(f"internal error inverting Id - zA: {exc}") from exc
    if W @ M != I:  # pragma: no cover
        raise RuntimeError("internal error: (Id - zA) inverse check failed")
    return W
