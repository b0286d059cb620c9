"""
Bounding a single transfer function
===================================

A causal filter is a rational function of the delay ``z``.  Its worst-case
gain for inputs bounded by 1 is the L1 norm of its power series, which we
bound from above: an exact head of the series plus a certified tail.
"""

from fractions import Fraction as F

from filterbounds import Poly, RatFun, l1_bound, linf_bound

# 1 / (1 - z/2): the series is 1, 1/2, 1/4, ... so the L1 norm is 2
geom = RatFun(Poly([1]), Poly([1, F(-1, 2)]))
kb = l1_bound(geom)
print("geometric:", kb.l1_upper, kb.tail_method.value)

# a second-order section with a complex pole pair
sec = RatFun(Poly([F(1, 2), F(1, 4)]), Poly([1, F(-6, 5), F(1, 2)]))
print("first terms:", [str(c) for c in sec.develop(5)])
kb = l1_bound(sec)
print(f"second order: l1 <= {kb.l1_upper!r} (head {kb.head_l1!r} from {kb.dev_length} terms, "
      f"tail {kb.tail_l1!r})")
for r in kb.roots:
    print(f"  pole near {r.center:.6f}, |pole| >= {r.modulus_lower!r}")

# higher orders fall back to a product over certified root discs
hi = RatFun(Poly([1]), Poly([1, -1, F(1, 2)]) * Poly([1, F(1, 3)]) * Poly([1, F(-1, 4)]))
kb = l1_bound(hi)
print(f"fourth order: l1 <= {kb.l1_upper!r} via {kb.tail_method.value}, N = {kb.dev_length}")

# a pole on the unit circle is reported, not bounded
print("integrator:", l1_bound(RatFun(Poly([1]), Poly([1, -1]))).stability.value)

# the largest coefficient of a step response stays finite
print("step response peak:", linf_bound(RatFun(Poly([1]), Poly([1, F(-3, 2), F(1, 2)]))))
