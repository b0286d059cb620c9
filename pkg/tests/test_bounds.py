from fractions import Fraction as F

import numpy as np
import pytest

from filterbounds.algebra import Poly, RatFun
from filterbounds.bounds import (
    Stability, TailMethod, development_limit, l1_bound, linf_bound, stability,
)
from conftest import rf
from oracle import as_ratfun, dyadic_partial_l1, random_stable_dyadic


def test_geometric_kernel():
    kb = l1_bound(rf([1], [1, F(-1, 2)]))
    assert 2 <= kb.l1_upper <= 2 + 1e-12
    assert kb.tail_method is TailMethod.FIRST_ORDER_EXACT
    assert kb.stability is Stability.STABLE


def test_fir_is_exact():
    kb = l1_bound(rf([1, 2, -3]))
    assert kb.l1_upper == 6.0
    assert kb.linf_upper == 3.0
    assert kb.tail_method is TailMethod.POLYNOMIAL_EXACT


def test_zero_kernel():
    assert l1_bound(RatFun(0)).l1_upper == 0.0


@pytest.mark.parametrize("den", [[1, -1], [1, -2], [1, 0, 1], [1, F(-5, 2), 1]])
def test_unstable_kernels_are_infinite(den):
    kb = l1_bound(rf([1], den))
    assert not kb.finite
    assert kb.stability is not Stability.STABLE


def test_stability_query():
    assert stability(rf([1], [1, -1])) is Stability.UNSTABLE
    assert stability(rf([1], [1, F(1, 3)])) is Stability.STABLE


def test_second_order_complex_tail():
    # poles of 1 - z + z^2/2 are 1 +- i, modulus sqrt 2
    f = rf([1], [1, -1, F(1, 2)])
    kb = l1_bound(f)
    assert kb.tail_method is TailMethod.SECOND_ORDER_COMPLEX
    exact = dyadic_partial_l1([F(1)], [F(1), F(-1), F(1, 2)], 1, 3000)
    assert F(kb.l1_upper) >= exact
    assert kb.l1_upper <= float(exact) * (1 + 2.0 ** -19)


def test_higher_order_rough_tail_tight_enough():
    # (1 - z/2)^2 (1 + z/3): head long enough that the tail is negligible
    q = Poly([1, F(-1, 2)]) * Poly([1, F(-1, 2)]) * Poly([1, F(1, 3)])
    f = RatFun(Poly([1]), q)
    kb = l1_bound(f)
    assert kb.finite
    partial = sum(abs(c) for c in f.develop(400))
    assert partial <= F(kb.l1_upper) <= partial * (1 + F(1, 10 ** 6))


def test_linf_of_steps_and_constants():
    assert linf_bound(rf([10], [1, -1])) == 10.0
    assert linf_bound(rf([1, 1], [1, F(-1, 2)])) == 1.5
    # step response 1, 1.5, 1.75, ... never exceeds 2
    assert 2 <= linf_bound(rf([1], [1, F(-3, 2), F(1, 2)])) <= 2 + 1e-12


def test_development_limit_context():
    f = rf([1], [1, F(-1, 2)])
    with development_limit(8):
        kb = l1_bound(f)
    assert kb.dev_length <= 8
    assert kb.l1_upper >= 2


def test_dominates_exact_partial_sums_small():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p, q = random_stable_dyadic(rng)
        kb = l1_bound(as_ratfun(p, q))
        assert F(kb.l1_upper) >= dyadic_partial_l1(p, q, 8, 2000)
