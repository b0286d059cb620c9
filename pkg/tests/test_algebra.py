from fractions import Fraction as F

import pytest

from filterbounds.algebra import (
    NonCausalError, Poly, RatFun, RatFunMatrix, SingularMatrixError, Z, determinant,
    develop, invert_id_minus_zA, poly_gcd, poly_lcm, scaled_development,
    solve_linear_system,
)
from conftest import rf


def test_poly_strips_trailing_zeros():
    p = Poly([1, 2, 0, 0])
    assert p.coeffs == (1, 2)
    assert p.degree == 1
    assert Poly([]).is_zero()


def test_poly_arithmetic():
    a = Poly([1, 1])
    b = Poly([1, -1])
    assert a * b == Poly([1, 0, -1])
    assert a + b == Poly([2])
    assert (a - a).is_zero()
    assert a.shift(2) == Poly([0, 0, 1, 1])


def test_divmod_by_linear():
    q, r = Poly([0, 0, 0, 1]).divmod(Poly([-1, 1]))
    assert q == Poly([1, 1, 1])
    assert r == Poly([1])


def test_gcd_and_lcm():
    a = Poly([1, 0, -1])
    b = Poly([1, -1])
    assert poly_gcd(a, b) == Poly([-1, 1])
    assert poly_lcm(a, b).degree == 2


def test_ratfun_normal_form():
    f = RatFun(Poly([2, 2]), Poly([2, 0, -2]))
    # (2+2z)/(2-2z^2) = 1/(1-z)
    assert f.num == Poly([1])
    assert f.den == Poly([1, -1])


def test_noncausal_denominator_rejected():
    with pytest.raises(NonCausalError):
        RatFun(Poly([1]), Poly([0, 1]))


def test_cancelled_pole_at_zero_is_causal():
    f = RatFun(Poly([0, 1]), Poly([0, 1, 1]))
    assert f.den(0) == 1


def test_develop_geometric():
    assert develop(rf([1], [1, F(-1, 2)]), 3) == [1, F(1, 2), F(1, 4), F(1, 8)]


def test_scaled_development_matches_develop():
    f = rf([F(1, 3), 2], [1, F(-5, 7), F(2, 9)])
    C, q0, _ = scaled_development(f.num, f.den, 21)
    assert len(C) == 21
    c = [F(C[k], q0 ** (k + 1)) for k in range(21)]
    assert c == develop(f, 20)


def test_develop_against_hand_recurrence():
    # c_k = p_k + c_{k-1}/2 - c_{k-2}/4 for (1+z)/(1 - z/2 + z^2/4)
    c = [F(1), F(1) + F(1, 2)]
    for k in range(2, 12):
        c.append(c[-1] / 2 - c[-2] / 4)
    assert develop(rf([1, 1], [1, F(-1, 2), F(1, 4)]), 11) == c


def test_ratfun_field_ops():
    f = rf([1], [1, F(-1, 2)])
    g = rf([0, 1])
    assert (f * g) / g == f
    assert f - f == RatFun(0)
    assert (f + Z).develop(2) == [1, F(3, 2), F(1, 4)]


def test_matrix_solve_and_inverse():
    A = RatFunMatrix.from_rows([[RatFun(F(1, 2)), RatFun(0)],
                                [RatFun(1), RatFun(F(1, 3))]])
    W = invert_id_minus_zA(A)
    M = RatFunMatrix.identity(2) - A.map(lambda e: e * Z)
    assert M @ W == RatFunMatrix.identity(2)
    X = solve_linear_system(M, RatFunMatrix.identity(2))
    assert X == W


def test_determinant_companion():
    M = RatFunMatrix.from_rows([[RatFun(1), RatFun(Poly([0, -1]))],
                                [RatFun(Poly([0, F(1, 2)])), RatFun(1)]])
    assert determinant(M) == RatFun(Poly([1, 0, F(1, 2)]))


def test_singular_system_raises():
    M = RatFunMatrix.from_rows([[RatFun(1), RatFun(1)], [RatFun(2), RatFun(2)]])
    with pytest.raises(SingularMatrixError):
        solve_linear_system(M, RatFunMatrix.identity(2))
