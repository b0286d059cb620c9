"""
Fuzzing the bounds with random networks
=======================================

Random stable second-order sections are combined into networks; each one is
simulated in binary64 with adversarial inputs and compared to its bound.
"""

import numpy as np

from filterbounds import IEEE64, ResetGroup, output_bound, random_network
from filterbounds.oracles import impulse_response, sign_following

rng = np.random.default_rng(0)
steps = 5000
ratios = []
for k in range(20):
    net = random_network(rng, depth=3)
    f = net.abstract(IEEE64)
    labels = sorted(set(f.reset_labels))
    groups = [ResetGroup(l, tuple(j for j, m in enumerate(f.reset_labels) if m == l),
                         tuple(1 for m in f.reset_labels if m == l), 1.0) for l in labels]
    bound = output_bound(f, [1.0], [1.0] * f.n_r, groups).bounds[0]
    # inputs that line up with the kernel so the output peaks at the last step
    x = sign_following(impulse_response(f.T[0, 0], steps), steps, 1.0)
    y = net.simulate(x.reshape(-1, 1), {l: 0.0 for l in labels}, "binary64")
    ratios.append(float(np.max(np.abs(y))) / bound)
    print(f"network {k:2d}: depth {net.depth()}, bound {bound:10.5f}, observed/bound {ratios[-1]:.6f}")

print("largest ratio:", max(ratios))
