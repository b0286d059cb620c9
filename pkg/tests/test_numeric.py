import math
import random
from fractions import Fraction as F

import numpy as np
import pytest

from filterbounds.algebra import Poly
from filterbounds.numeric import (
    Interval, IntervalPoly, NotContractingError, add_down, add_up, cauchy_lower_bound,
    check_postfixpoint, div_down, div_up, enclose_roots, fixpoint_upper_bound,
    mul_down, mul_up, rat_down, rat_up, sqrt_down, sqrt_up, subordinate_inf_norm,
)
from oracle import constructed_polynomials, disc_contains


def _pairs(n=2000, seed=1):
    rng = random.Random(seed)
    for _ in range(n):
        e1, e2 = rng.randint(-60, 60), rng.randint(-60, 60)
        yield rng.uniform(-1, 1) * 2.0 ** e1, rng.uniform(-1, 1) * 2.0 ** e2


@pytest.mark.parametrize("up,down,exact", [
    (add_up, add_down, lambda a, b: F(a) + F(b)),
    (mul_up, mul_down, lambda a, b: F(a) * F(b)),
    (div_up, div_down, lambda a, b: F(a) / F(b)),
])
def test_directed_ops_enclose_exact(up, down, exact):
    for a, b in _pairs():
        q = exact(a, b)
        assert F(down(a, b)) <= q <= F(up(a, b))


def test_directed_ops_are_tight():
    # exact results must come back unchanged
    assert add_up(0.5, 0.25) == 0.75
    assert mul_down(3.0, 0.5) == 1.5
    assert add_up(1.0, 2.0 ** -60) == math.nextafter(1.0, 2.0)


def test_sqrt_bounds():
    for x in [2.0, 3.0, 1e-300, 7.5e200]:
        lo, hi = sqrt_down(x), sqrt_up(x)
        assert F(lo) ** 2 <= F(x) <= F(hi) ** 2


def test_rational_conversion():
    for q in [F(1, 3), F(-2, 7), F(10 ** 40 + 1, 3), F(1, 10 ** 320)]:
        assert F(rat_down(q)) <= q <= F(rat_up(q))
    assert rat_up(F(1, 2)) == 0.5


def test_interval_arithmetic_contains_exact():
    a = Interval.from_rat(F(1, 3))
    b = Interval.from_rat(F(-2, 5))
    assert (a + b).contains(F(1, 3) - F(2, 5))
    assert (a * b).contains(F(-2, 15))
    assert (a / b).contains(F(-5, 6))
    assert (b.sqr()).contains(F(4, 25))
    assert Interval(-1.0, 2.0).contains_zero()
    assert Interval(-3.0, 2.0).mag() == 3.0


def test_root_certification_constructed():
    for p, roots in constructed_polynomials():
        enc, certified = enclose_roots(IntervalPoly.from_poly(p))
        assert len(enc) == p.degree
        for re, im in roots:
            hits = [e for e in enc if disc_contains(e, re, im)]
            assert hits, (p, re, im)
            mod2 = re * re + im * im
            assert any(F(e.modulus_lower) ** 2 <= mod2 for e in hits)


def test_known_quadratic_roots():
    # 10 - 15z + 7z^2 has |z|^2 = 10/7
    enc, certified = enclose_roots(IntervalPoly.from_poly(Poly([10, -15, 7])))
    assert certified
    for e in enc:
        assert F(e.modulus_lower) ** 2 <= F(10, 7)
        assert e.modulus_lower > 1.195
        assert e.radius < 1e-12


def test_cauchy_lower_bound_is_sound():
    p = IntervalPoly.from_poly(Poly([6, -5, 1]))     # roots 2 and 3
    lb = cauchy_lower_bound(p)
    assert 0 < lb <= 2


def test_fixpoint_scalar():
    B = fixpoint_upper_bound(np.array([[0.5]]), np.array([1.0]))
    assert 2.0 <= B[0] < 2.0 + 1e-12
    assert check_postfixpoint(np.array([[0.5]]), np.array([1.0]), B)


def test_fixpoint_matrix_postcheck():
    rng = np.random.default_rng(3)
    for _ in range(50):
        K = rng.uniform(0, 1, (4, 4))
        K *= rng.uniform(0.05, 0.95) / subordinate_inf_norm(K)
        y = rng.uniform(0, 10, 4)
        B = fixpoint_upper_bound(K, y)
        assert check_postfixpoint(K, y, B)
        exact = np.linalg.solve(np.eye(4) - K, y)
        assert np.all(B >= exact * (1 - 1e-12))


def test_fixpoint_rejects_noncontracting():
    with pytest.raises(NotContractingError):
        fixpoint_upper_bound(np.array([[1.0]]), np.array([1.0]))
    with pytest.raises(NotContractingError):
        fixpoint_upper_bound(np.array([[0.6, 0.5], [0.0, 0.1]]), np.array([1.0, 1.0]))


def test_fixpoint_zero_gain():
    B = fixpoint_upper_bound(np.zeros((2, 2)), np.array([1.5, 0.0]))
    assert B.tolist() == [1.5, 0.0]
