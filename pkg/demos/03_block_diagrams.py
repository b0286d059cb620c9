"""
Composing blocks and reading the error terms
============================================

Blocks are combined serially, in parallel and in feedback loops.  Each block
carries its exact transfer matrix together with relative and absolute
rounding-error coefficients for a chosen number format.
"""

from fractions import Fraction as F

import numpy as np

from filterbounds import (
    IEEE32, IEEE64, Delay, Feedback, Identity, Parallel, Plus, Scale, Serial,
    output_bound, parse_format, tf2,
)

lp = tf2([F(675, 10000), F(1349, 10000), F(675, 10000)], [F(1143, 1000), F(-4128, 10000)])
hp = tf2([F(8, 10), F(-16, 10), F(8, 10)], [F(1561, 1000), F(-6414, 10000)])

# negative feedback with an extra delay around the cascade
loop = Feedback(Serial(Serial(Parallel(Identity(1), Serial(Delay(1), Scale(F(-1, 4)))), Plus()),
                       Serial(lp, hp)))

for fmt in (IEEE64, IEEE32, parse_format("fixed:1/65536:rne")):
    f = loop.abstract(fmt)
    ob = output_bound(f, [1.0], [])
    print(f"{fmt.name:>18}: gain {ob.gain_T[0, 0]:.6f}  eps_rel {f.eps_rel_T[0, 0]:.3e}  "
          f"eps_abs {f.eps_abs[0]:.3e}  bound {ob.bounds[0]:.9f}")

print("transfer function:", loop.abstract(IEEE64).T[0, 0])

# compare the exact and binary32 runs on a square wave
x = np.sign(np.sin(np.arange(2000) / 7.0)).reshape(-1, 1)
exact = loop.simulate(x, mode="exact").astype(float)
single = loop.simulate(x, mode="binary32")
f32 = loop.abstract(IEEE32)
print("largest binary32 deviation:", float(np.max(np.abs(exact - single))),
      " predicted at most:", f32.eps_rel_T[0, 0] * 1.0 + f32.eps_abs[0])
