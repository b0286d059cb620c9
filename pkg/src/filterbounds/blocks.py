"""Block diagrams built from basic blocks and the three combinators.

Every block knows its abstract value (:meth:`Block.abstract`) and can be
simulated concretely.  Simulation compiles the diagram into straight-line
Python for one time step, so binary64 runs cost a few tens of nanoseconds
per operation and reproduce exactly the operation order that the error
analysis assumes.

Modes: ``"exact"`` (Fractions), ``"binary64"``, ``"binary32"`` (every result
rounded to single precision) and any fixed-point :class:`FloatFormat`.
"""

from __future__ import annotations

import math
import struct
from functools import lru_cache
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .algebra import Poly, RatFun
from .bounds import l1_bound
from .filters import (
    EXACT, IEEE32, IEEE64, AbstractFilter, FloatFormat, compose_feedback,
    compose_parallel, compose_serial, make_basic, make_constant_source,
)


# --------------------------------------------------------------------------
# code generation

_pack_f = struct.Struct("f")


def _r32(x: float) -> float:
    try:
        return _pack_f.unpack(_pack_f.pack(x))[0]
    except OverflowError:
        return math.copysign(math.inf, x)


def _mode_format(mode) -> FloatFormat:
    if isinstance(mode, FloatFormat):
        return mode
    return {"exact": EXACT, "binary64": IEEE64, "ieee64": IEEE64,
            "binary32": IEEE32, "ieee32": IEEE32}[mode]


class _Compiler:
    def __init__(self, fmt: FloatFormat):
        self.fmt = fmt
        self.body: list[str] = []
        self.post: list[str] = []
        self.init: list[str] = []
        self.consts: dict[str, object] = {}
        self.n = 0
        if fmt.kind == "ieee32":
            self.consts["R"] = _r32
            self.wrap = "R({})"
        elif fmt.kind == "fixed":
            self.consts["R"] = _fixed_rounder(fmt)
            self.wrap = "R({})"
        else:
            self.wrap = "{}"

    def var(self, prefix="v") -> str:
        self.n += 1
        return f"{prefix}{self.n}"

    def const(self, value) -> str:
        name = f"K{len(self.consts)}"
        self.consts[name] = value
        return name

    def value(self, q) -> object:
        """A constant as it is stored in the simulated arithmetic."""
        q = self.fmt.round_constant(Fraction(q))
        if self.fmt.kind in ("exact", "fixed"):
            return q
        return float(q)

    def emit(self, line: str):
        self.body.append(line)


def _fixed_rounder(fmt: FloatFormat):
    delta = fmt.delta

    def rnd(v):
        v = Fraction(v)
        m = v / delta
        if fmt.rne:
            fl = math.floor(m)
            rem = m - fl
            if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and fl % 2 == 1):
                fl += 1
            return fl * delta
        return math.floor(m) * delta

    return rnd


class Block:
    """Base class; subclasses set ``n_in`` and ``n_out``."""

    n_in: int = 0
    n_out: int = 0

    def abstract(self, fmt: FloatFormat = EXACT) -> AbstractFilter:
        """Abstract value under number format ``fmt`` (memoized)."""
        return _abstract_cached(self, fmt)

    def _abstract(self, fmt: FloatFormat) -> AbstractFilter:
        raise NotImplementedError

    def _compile(self, cc: _Compiler, ins: list[str]) -> list[str]:
        raise NotImplementedError

    def reset_labels(self) -> list[str]:
        return []

    def depth(self) -> int:
        return 0

    def compile(self, mode="binary64"):
        fmt = _mode_format(mode)
        cc = _Compiler(fmt)
        ins = [f"x[{k}]" for k in range(self.n_in)]
        inv = []
        for k, e in enumerate(ins):
            v = cc.var("i")
            cc.emit(f"{v} = {e}")
            inv.append(v)
        outs = self._compile(cc, inv)
        lines = ["def run(inputs, resets):"]
        lines += ["    " + l for l in cc.init]
        lines.append("    out = []")
        lines.append("    append = out.append")
        lines.append("    for x in inputs:")
        lines += ["        " + l for l in cc.body]
        tup = ", ".join(outs) + ("," if len(outs) == 1 else "")
        lines.append(f"        append(({tup}))")
        lines += ["        " + l for l in cc.post]
        lines.append("    return out")
        src = "\n".join(lines)
        ns = dict(cc.consts)
        exec(compile(src, "<filter-sim>", "exec"), ns)
        return ns["run"], fmt, src

    def simulate(self, inputs, resets: Mapping[str, object] | None = None,
                 mode="binary64") -> np.ndarray:
        """Run the block on ``inputs`` (steps x n_in); returns steps x n_out.

        ``resets`` maps reset labels to initial delay contents (default 0).
        """
        run, fmt, _ = self.compile(mode)
        conv = _converter(fmt)
        rs = {k: conv(v) for k, v in (resets or {}).items()}
        for lab in self.reset_labels():
            rs.setdefault(lab, conv(0))
        rows = [tuple(conv(v) for v in row) for row in _rows(inputs, self.n_in)]
        out = run(rows, rs)
        dtype = object if fmt.kind in ("exact", "fixed") else float
        return np.array(out, dtype=dtype).reshape(len(rows), self.n_out)


@lru_cache(maxsize=2048)
def _abstract_cached(block: Block, fmt: FloatFormat) -> AbstractFilter:
    return block._abstract(fmt)


def _rows(inputs, n_in):
    if n_in == 0:
        if isinstance(inputs, int):
            return [()] * inputs
        return [()] * len(inputs)
    arr = inputs
    out = []
    for row in arr:
        if n_in == 1 and not isinstance(row, (list, tuple, np.ndarray)):
            out.append((row,))
        else:
            out.append(tuple(row))
    return out


def _converter(fmt: FloatFormat):
    if fmt.kind in ("exact", "fixed"):
        return lambda v: Fraction(v) if not isinstance(v, float) else Fraction(v)
    if fmt.kind == "ieee32":
        return lambda v: _r32(float(v))
    return float


# --------------------------------------------------------------------------
# basic blocks

@dataclass(frozen=True)
class Plus(Block):
    n_in = 2
    n_out = 1

    def _abstract(self, fmt=EXACT):
        return make_basic("plus", fmt)

    def _compile(self, cc, ins):
        v = cc.var()
        cc.emit(f"{v} = " + cc.wrap.format(f"{ins[0]} + {ins[1]}"))
        return [v]


@dataclass(frozen=True)
class Scale(Block):
    k: Fraction
    n_in = 1
    n_out = 1

    def __post_init__(self):
        object.__setattr__(self, "k", Fraction(self.k))

    def _abstract(self, fmt=EXACT):
        return make_basic("scale", fmt, k=self.k)

    def _compile(self, cc, ins):
        v = cc.var()
        if self.k == 0:
            cc.emit(f"{v} = {cc.const(cc.value(0))}")
        else:
            K = cc.const(cc.value(self.k))
            cc.emit(f"{v} = " + cc.wrap.format(f"{K} * {ins[0]}"))
        return [v]


@dataclass(frozen=True)
class Delay(Block):
    n: int = 1
    n_in = 1
    n_out = 1

    def _abstract(self, fmt=EXACT):
        return make_basic("delay", fmt, n=self.n)

    def _compile(self, cc, ins):
        if self.n == 0:
            return list(ins)
        zero = cc.const(cc.value(0))
        states = [cc.var("s") for _ in range(self.n)]
        for s in states:
            cc.init.append(f"{s} = {zero}")
        v = cc.var()
        cc.emit(f"{v} = {states[-1]}")
        for a, b in zip(reversed(states[1:]), reversed(states[:-1])):
            cc.post.append(f"{a} = {b}")
        cc.post.append(f"{states[0]} = {ins[0]}")
        return [v]


@dataclass(frozen=True)
class UnitDelayInit(Block):
    label: str = "r0"
    n_in = 1
    n_out = 1

    def _abstract(self, fmt=EXACT):
        return make_basic("unit_delay_init", fmt, label=self.label)

    def reset_labels(self):
        return [self.label]

    def _compile(self, cc, ins):
        s = cc.var("s")
        cc.init.append(f"{s} = resets[{self.label!r}]")
        v = cc.var()
        cc.emit(f"{v} = {s}")
        cc.post.append(f"{s} = {ins[0]}")
        return [v]


@dataclass(frozen=True)
class ConstSource(Block):
    c: Fraction
    n_in = 0
    n_out = 1

    def __post_init__(self):
        object.__setattr__(self, "c", Fraction(self.c))

    def _abstract(self, fmt=EXACT):
        return make_constant_source(self.c, fmt)

    def _compile(self, cc, ins):
        v = cc.var()
        cc.emit(f"{v} = {cc.const(cc.value(self.c))}")
        return [v]


@dataclass(frozen=True)
class Identity(Block):
    n: int = 1

    @property
    def n_in(self):
        return self.n

    @property
    def n_out(self):
        return self.n

    def _abstract(self, fmt=EXACT):
        return make_basic("identity", fmt, n=self.n)

    def _compile(self, cc, ins):
        return list(ins)


@dataclass(frozen=True)
class Fanout(Block):
    n: int = 2
    n_in = 1

    @property
    def n_out(self):
        return self.n

    def _abstract(self, fmt=EXACT):
        return make_basic("fanout", fmt, n=self.n)

    def _compile(self, cc, ins):
        return [ins[0]] * self.n


# --------------------------------------------------------------------------
# combinators

@dataclass(frozen=True)
class Serial(Block):
    first: Block
    second: Block

    def __post_init__(self):
        if self.first.n_out != self.second.n_in:
            raise ValueError(f"cannot chain {self.first.n_out} outputs into "
                             f"{self.second.n_in} inputs")

    @property
    def n_in(self):
        return self.first.n_in

    @property
    def n_out(self):
        return self.second.n_out

    def _abstract(self, fmt=EXACT):
        return compose_serial(self.first.abstract(fmt), self.second.abstract(fmt))

    def reset_labels(self):
        return self.first.reset_labels() + self.second.reset_labels()

    def depth(self):
        return 1 + max(self.first.depth(), self.second.depth())

    def _compile(self, cc, ins):
        return self.second._compile(cc, self.first._compile(cc, ins))


@dataclass(frozen=True)
class Parallel(Block):
    left: Block
    right: Block

    @property
    def n_in(self):
        return self.left.n_in + self.right.n_in

    @property
    def n_out(self):
        return self.left.n_out + self.right.n_out

    def _abstract(self, fmt=EXACT):
        return compose_parallel(self.left.abstract(fmt), self.right.abstract(fmt))

    def reset_labels(self):
        return self.left.reset_labels() + self.right.reset_labels()

    def depth(self):
        return 1 + max(self.left.depth(), self.right.depth())

    def _compile(self, cc, ins):
        a = self.left._compile(cc, ins[:self.left.n_in])
        b = self.right._compile(cc, ins[self.left.n_in:])
        return a + b


@dataclass(frozen=True)
class Feedback(Block):
    """Last ``n_out`` inputs of ``body`` receive its outputs one step late."""

    body: Block

    def __post_init__(self):
        if self.body.n_in < self.body.n_out:
            raise ValueError("feedback body needs at least as many inputs as outputs")

    @property
    def n_in(self):
        return self.body.n_in - self.body.n_out

    @property
    def n_out(self):
        return self.body.n_out

    def _abstract(self, fmt=EXACT):
        return compose_feedback(self.body.abstract(fmt))

    def reset_labels(self):
        return self.body.reset_labels()

    def depth(self):
        return 1 + self.body.depth()

    def _compile(self, cc, ins):
        zero = cc.const(cc.value(0))
        fb = [cc.var("f") for _ in range(self.body.n_out)]
        for s in fb:
            cc.init.append(f"{s} = {zero}")
        outs = self.body._compile(cc, list(ins) + fb)
        # keep the output values before the feedback registers move
        kept = []
        for o in outs:
            v = cc.var()
            cc.emit(f"{v} = {o}")
            kept.append(v)
        for s, o in zip(fb, kept):
            cc.post.append(f"{s} = {o}")
        return kept


# --------------------------------------------------------------------------
# common constructions

def sum_chain(n: int) -> Block:
    """Left-to-right sum of ``n`` inputs with binary adders."""
    if n < 1:
        raise ValueError("need at least one term")
    if n == 1:
        return Identity(1)
    blk: Block = Plus()
    for _ in range(n - 2):
        blk = Serial(Parallel(blk, Identity(1)), Plus())
    # inputs of the nested form are already in left-to-right order
    return blk


def fir(coeffs: Sequence, reset_prefix: str | None = None) -> Block:
    """``sum_k a_k z^k`` built from taps; delays optionally carry resets."""
    coeffs = [Fraction(c) for c in coeffs]
    n = len(coeffs)
    taps = []
    for k, a in enumerate(coeffs):
        if k == 0:
            taps.append(Scale(a))
            continue
        if reset_prefix is None:
            d: Block = Delay(k)
        else:
            d = UnitDelayInit(f"{reset_prefix}{1}")
            for j in range(2, k + 1):
                d = Serial(d, UnitDelayInit(f"{reset_prefix}{j}"))
        taps.append(Serial(d, Scale(a)))
    blk = taps[0]
    for t in taps[1:]:
        blk = Parallel(blk, t)
    return Serial(Serial(Fanout(n), blk), sum_chain(n)) if n > 1 else blk


def tf2(alpha: Sequence, beta: Sequence, reset_prefix: str | None = None) -> Block:
    """Direct-form second order section

        y_t = a0 e_t + a1 e_{t-1} + a2 e_{t-2}
        s_t = y_t + b1 s_{t-1} + b2 s_{t-2}

    with transfer function ``(a0 + a1 z + a2 z^2) / (1 - b1 z - b2 z^2)``.
    """
    a0, a1, a2 = (Fraction(a) for a in alpha)
    b1, b2 = (Fraction(b) for b in beta)
    ff = fir([a0, a1, a2], reset_prefix)
    # loop body: inputs (y, s_{t-1}) -> y + b1 s_{t-1} + b2 s_{t-2}
    back = Serial(Fanout(2), Parallel(Scale(b1), Serial(Delay(1), Scale(b2))))
    body = Serial(Parallel(Identity(1), back), sum_chain(3))
    return Serial(ff, Feedback(body))


# --------------------------------------------------------------------------
# random stable networks

def _dyadic(rng, lo: float, hi: float, bits: int = 10) -> Fraction:
    x = rng.uniform(lo, hi)
    return Fraction(round(x * 2 ** bits), 2 ** bits)


def random_stable_tf2(rng, reset_prefix: str | None = None):
    """Random TF2 with dyadic coefficients and pole moduli in (1.05, 3)."""
    while True:
        if rng.random() < 0.6:
            r = rng.uniform(1.05, 3.0)
            th = rng.uniform(0.05, math.pi - 0.05)
            # (1 - z/xi)(1 - z/conj) = 1 - 2 cos(th)/r z + z^2/r^2
            b1 = 2 * math.cos(th) / r
            b2 = -1 / r ** 2
        else:
            x1 = int(rng.choice([-1, 1])) * rng.uniform(1.05, 3.0)
            x2 = int(rng.choice([-1, 1])) * rng.uniform(1.05, 3.0)
            b1 = 1 / x1 + 1 / x2
            b2 = -1 / (x1 * x2)
        beta = (Fraction(round(b1 * 1024), 1024), Fraction(round(b2 * 1024), 1024))
        alpha = tuple(_dyadic(rng, -1, 1, 8) for _ in range(3))
        if all(a == 0 for a in alpha):
            continue
        den = Poly((1, -beta[0], -beta[1]))
        if not l1_bound(RatFun(1, den)).finite:
            continue
        return tf2(alpha, beta, reset_prefix), alpha, beta


def random_network(rng, depth: int = 4, resets: bool = True, _counter=None) -> Block:
    """Random single-input single-output network of TF2 sections.

    Internal nodes are serial chains, parallel sums and feedback loops whose
    gain is chosen small enough for the loop to stay stable.
    """
    counter = _counter if _counter is not None else [0]

    def leaf():
        counter[0] += 1
        prefix = f"n{counter[0]}_" if resets and rng.random() < 0.5 else None
        return random_stable_tf2(rng, prefix)[0]

    if depth <= 1:
        return leaf()
    kind = rng.choice(["leaf", "serial", "parallel", "feedback"], p=[0.2, 0.3, 0.25, 0.25])
    if kind == "leaf":
        return leaf()
    if kind == "serial":
        return Serial(random_network(rng, depth - 1, resets, counter),
                      random_network(rng, depth - 1, resets, counter))
    if kind == "parallel":
        return Serial(Serial(Fanout(2), Parallel(random_network(rng, depth - 1, resets, counter),
                                                 random_network(rng, depth - 1, resets, counter))),
                      Plus())
    g = random_network(rng, depth - 1, resets, counter)
    a = g.abstract(EXACT)
    kb = l1_bound(a.T[0, 0])
    if not kb.finite or kb.l1_upper == 0:
        return g
    k = Fraction(0.5 / kb.l1_upper).limit_denominator(1 << 12)
    k = Fraction(math.floor(k * 4096), 4096) * int(rng.choice([-1, 1]))
    if k == 0:
        return g
    body = Serial(Serial(Parallel(Identity(1), Scale(k)), Plus()), g)
    fb = Feedback(body)
    if not l1_bound(fb.abstract(EXACT).T[0, 0]).finite:
        return g
    return fb
