"""Test-side oracles that share no code with the library."""

from fractions import Fraction as F

import random

import numpy as np

from filterbounds.algebra import Poly, RatFun


def dyadic_partial_l1(num, den, bits, K):
    """Exact ``sum_{k<K} |c_k|`` for ``num/den`` with coefficients on 2**-bits.

    Integers only: with ``s = 2**bits`` and den(0) = 1, ``c_k = C_k / s**(k+1)``
    and ``C_k = (p_k s) s^k - sum_j (q_j s) C_{k-j} s^(j-1)``, where ``p_k s``
    and ``q_j s`` are integers.  Returns a Fraction.
    """
    s = 1 << bits
    P = [int(c * s) for c in num]     # P_k * s
    Q = [int(c * s) for c in den]     # Q_j * s, Q[0] = s
    assert Q[0] == s
    C = []
    total = 0                          # sum |C_k| s^(K-1-k), built incrementally
    for k in range(K):
        acc = P[k] << (bits * k) if k < len(P) else 0
        for j in range(1, min(len(Q) - 1, k) + 1):
            if Q[j]:
                acc -= (Q[j] * C[k - j]) << (bits * (j - 1))
        C.append(acc)
        total = (total << bits) + abs(acc)
    return F(total, s ** K)


def random_stable_dyadic(rng, bits=8, max_deg=4):
    """Random stable rational function with dyadic coefficients.

    Poles are drawn outside the unit disc, the denominator is rounded to the
    dyadic grid and kept only if numpy still places every root at modulus
    above 1.001.
    """
    s = 1 << bits
    while True:
        deg = int(rng.integers(1, max_deg + 1))
        roots = []
        while len(roots) < deg:
            r = rng.uniform(1.02, 4.0)
            if deg - len(roots) >= 2 and rng.random() < 0.5:
                th = rng.uniform(0.1, np.pi - 0.1)
                roots += [r * np.exp(1j * th), r * np.exp(-1j * th)]
            else:
                roots.append(r * rng.choice([-1.0, 1.0]))
        den = np.real(np.poly(1 / np.array(roots)))
        den = den / den[0]
        q = [F(1)] + [F(int(round(c * s)), s) for c in den[1:]]
        if q[-1] == 0:
            continue
        back = np.roots([float(c) for c in q[::-1]])
        if np.min(np.abs(back)) <= 1.001:
            continue
        nd = int(rng.integers(0, 4))
        p = [F(int(rng.integers(-s, s + 1)), s) for _ in range(nd + 1)]
        if all(c == 0 for c in p):
            continue
        return p, q


def as_ratfun(p, q) -> RatFun:
    return RatFun(Poly(p), Poly(q))


def exact_impulse(f: RatFun, n: int):
    """First ``n`` series coefficients by plain exact long division."""
    num = list(f.num.coeffs) + [F(0)] * n
    den = list(f.den.coeffs)
    out = []
    for k in range(n):
        c = num[k] / den[0]
        out.append(c)
        for j in range(1, len(den)):
            if k + j < len(num):
                num[k + j] -= c * den[j]
    return out


def _poly_from_roots(real, pairs):
    p = Poly([1])
    for r in real:
        p = p * Poly([-r, 1])
    for a, b in pairs:
        # (z - (a+bi))(z - (a-bi)) = z^2 - 2a z + a^2 + b^2
        p = p * Poly([a * a + b * b, -2 * a, 1])
    return p


def constructed_polynomials(count=50, seed=7):
    """Polynomials with known rational roots, pairwise farther apart than 1e-3."""
    rng = random.Random(seed)
    made = 0
    while made < count:
        real = [F(rng.randint(-3000, 3000), rng.randint(1, 700)) for _ in range(rng.randint(0, 4))]
        pairs = [(F(rng.randint(-2000, 2000), rng.randint(1, 700)),
                  F(rng.randint(1, 2000), rng.randint(1, 700))) for _ in range(rng.randint(0, 3))]
        roots = [(r, F(0)) for r in real]
        for a, b in pairs:
            roots += [(a, b), (a, -b)]
        if len(roots) < 1:
            continue
        ok = all((r1 - r2) ** 2 + (i1 - i2) ** 2 > F(1, 10 ** 6)
                 for k, (r1, i1) in enumerate(roots) for (r2, i2) in roots[k + 1:])
        if not ok:
            continue
        made += 1
        yield _poly_from_roots(real, pairs), roots


def disc_contains(e, re, im):
    """Exact test that ``re + i im`` lies in the enclosure disc."""
    dr = re - F(e.center.real)
    di = im - F(e.center.imag)
    return dr * dr + di * di <= F(e.radius) ** 2
