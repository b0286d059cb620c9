"""Concrete test oracles: impulse responses and worst-case input patterns."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .algebra import RatFun


def impulse_response(f: RatFun, n: int) -> np.ndarray:
    """First ``n`` series coefficients of ``f`` in binary64 (approximate)."""
    b = np.array([float(c) for c in f.num.coeffs] or [0.0])
    a = np.array([float(c) for c in f.den.coeffs])
    x = np.zeros(n)
    if n:
        x[0] = 1.0
    return lfilter(b, a, x)


def sign_following(kernel: np.ndarray, steps: int, bound: float, target: int | None = None,
                   fill=None) -> np.ndarray:
    """Input of magnitude ``bound`` that maximizes the output at ``target``.

    Sample ``t`` gets the sign of ``kernel[target - t]``, so every term of the
    convolution at time ``target`` adds up with the same sign.  Samples after
    ``target`` (or outside the kernel) come from ``fill`` (zeros by default).
    """
    if target is None:
        target = steps - 1
    x = np.zeros(steps) if fill is None else np.array(fill, dtype=float)
    for t in range(max(0, target - len(kernel) + 1), target + 1):
        k = kernel[target - t]
        x[t] = bound if k >= 0 else -bound
    return x


def reset_signs(columns, at: int) -> list[float]:
    """Signs for reset values so that their contributions at ``at`` align."""
    out = []
    for col in columns:
        v = col[at] if at < len(col) else 0.0
        out.append(1.0 if v >= 0 else -1.0)
    return out
