"""Text formats for filter networks, the analysis driver and reports.

Two surface forms are accepted.

Equation form (one assignment per node, evaluated once per time step)::

    format ieee32;
    input e <= 400;
    reset iota <= 400;
    p = 0.5*e - 0.7*delay(e0, 1, iota) + 1.5*delay(s0, 1, iota);
    e0 = e;
    s0 = p;
    x = 1/6*p;
    output x;

``delay(x, n)`` reads register ``x@n`` which holds ``x`` from ``n`` steps
ago.  An optional third argument (``name``, ``w*name`` or a rational) gives
the initial contents of that register; all references to the same register
must agree.  ``const(c)`` (or a bare rational term) is the constant stream
``c``.

Block form (a ``system`` statement over the combinators)::

    input e <= 1;
    output y;
    let s = tf2(1/2, 1/4, -1/8; 1/2, -1/4);
    system serial(s, s);
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import (
    ONE, ZERO, Poly, RatFun, RatFunMatrix, hstack, solve_linear_system,
)
from .blocks import (
    Block, ConstSource, Delay, Fanout, Feedback, Identity, Parallel, Plus,
    Scale, Serial, UnitDelayInit, tf2,
)
from .bounds import development_limit, l1_bound, linf_bound
from .filters import (
    IEEE64, AbstractFilter, FloatFormat, ResetGroup, n1, ninf,
    output_bound, parse_format, quantize, _fixpoint_columns, _linf_col, _mm,
    _add,
)
from .numeric import NotContractingError, add_up, pow_up, rat_up
from .oracles import impulse_response, sign_following

INF = math.inf
log = logging.getLogger(__name__)


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg = msg
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


# --------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*|//[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|[=;(),+\-*/])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Tok]:
    toks = []
    pos, line, lstart = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - lstart + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            toks.append(Tok(kind, text, line, pos - lstart + 1))
        nl = text.count("\n")
        if nl:
            line += nl
            lstart = pos + text.rfind("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - lstart + 1))
    return toks


# --------------------------------------------------------------------------
# syntax tree

@dataclass(frozen=True)
class Init:
    """Initial register contents ``weight * name`` (or ``weight`` alone)."""

    weight: Fraction
    name: str | None = None

    def text(self) -> str:
        if self.name is None:
            return fmt_rat(self.weight)
        if self.weight == 1:
            return self.name
        return f"{fmt_rat(self.weight)}*{self.name}"


@dataclass(frozen=True)
class Ref:
    """``kind`` is ``name``, ``delay`` or ``const``."""

    kind: str
    name: str | None = None
    n: int = 0
    init: Init | None = None
    value: Fraction | None = None

    def text(self) -> str:
        if self.kind == "name":
            return self.name
        if self.kind == "const":
            return f"const({fmt_rat(self.value)})"
        args = [self.name, str(self.n)] + ([self.init.text()] if self.init else [])
        return f"delay({', '.join(args)})"


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    ref: Ref


def fmt_rat(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


@dataclass
class FilterNetwork:
    inputs: dict = field(default_factory=dict)        # name -> bound or None
    resets: dict = field(default_factory=dict)        # name -> bound or None
    outputs: list = field(default_factory=list)
    equations: dict = field(default_factory=dict)     # name -> tuple[Term]
    fmt: FloatFormat | None = None
    system: Block | None = None

    @property
    def is_block_form(self) -> bool:
        return self.system is not None

    def __eq__(self, other):
        if not isinstance(other, FilterNetwork):
            return NotImplemented
        return (list(self.inputs.items()) == list(other.inputs.items())
                and list(self.resets.items()) == list(other.resets.items())
                and self.outputs == other.outputs
                and list(self.equations.items()) == list(other.equations.items())
                and self.fmt == other.fmt and self.system == other.system)


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0
        self.lets: dict[str, Block] = {}

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def err(self, msg, tok=None):
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if self.tok.text != text:
            raise self.err(f"expected {text!r}, found {self.tok.text or 'end of file'!r}")
        return self.next()

    def name(self) -> str:
        if self.tok.kind != "name":
            raise self.err(f"expected a name, found {self.tok.text or 'end of file'!r}")
        return self.next().text

    def number(self) -> Fraction:
        if self.tok.kind != "num":
            raise self.err(f"expected a number, found {self.tok.text or 'end of file'!r}")
        return Fraction(self.next().text)

    def rational(self) -> Fraction:
        """``num`` or ``num/num``, without sign."""
        q = self.number()
        if self.tok.text == "/" and self.toks[self.i + 1].kind == "num":
            self.next()
            d = self.number()
            if d == 0:
                raise self.err("division by zero in constant")
            q = q / d
        return q

    def signed_rational(self) -> Fraction:
        neg = False
        while self.tok.text in ("+", "-"):
            neg ^= self.next().text == "-"
        q = self.rational()
        return -q if neg else q

    def nat(self) -> int:
        t = self.tok
        q = self.number()
        if q.denominator != 1 or q < 0:
            raise self.err("expected a natural number", t)
        return int(q)

    def bound(self):
        if self.accept("<="):
            t = self.tok
            b = self.signed_rational()
            if b < 0:
                raise self.err("bounds must be nonnegative", t)
            return b
        return None

    # ---- equation form

    def init(self) -> Init:
        if self.tok.kind == "name":
            return Init(Fraction(1), self.name())
        w = self.signed_rational()
        if self.accept("*"):
            return Init(w, self.name())
        return Init(w, None)

    def ref(self) -> Ref:
        t = self.tok
        nm = self.name()
        if nm == "delay" and self.tok.text == "(":
            self.next()
            src = self.name()
            self.expect(",")
            n = self.nat()
            if n < 1:
                raise self.err("delay length must be at least 1", t)
            ini = None
            if self.accept(","):
                ini = self.init()
            self.expect(")")
            return Ref("delay", src, n, ini)
        if nm == "const" and self.tok.text == "(":
            self.next()
            v = self.signed_rational()
            self.expect(")")
            return Ref("const", value=v)
        return Ref("name", nm)

    def term(self, sign: int) -> Term:
        if self.tok.kind == "num":
            c = self.rational()
            if self.accept("*"):
                return Term(sign * c, self.ref())
            return Term(Fraction(sign), Ref("const", value=c))
        return Term(Fraction(sign), self.ref())

    def linear_expr(self) -> tuple:
        terms = []
        sign = 1
        while self.tok.text in ("+", "-"):
            sign *= -1 if self.next().text == "-" else 1
        terms.append(self.term(sign))
        while self.tok.text in ("+", "-"):
            sign = 1
            while self.tok.text in ("+", "-"):
                sign *= -1 if self.next().text == "-" else 1
            terms.append(self.term(sign))
        return tuple(terms)

    # ---- block form

    def block(self) -> Block:
        t = self.tok
        nm = self.name()
        if nm in self.lets and self.tok.text != "(":
            return self.lets[nm]
        if nm == "plus":
            return Plus()
        if nm == "id":
            return Identity(self._opt_nat(1))
        if nm == "fanout":
            return Fanout(self._opt_nat(2))
        if nm == "delay":
            return Delay(self._opt_nat(1))
        if nm == "scale":
            self.expect("(")
            k = self.signed_rational()
            self.expect(")")
            return Scale(k)
        if nm == "const":
            self.expect("(")
            c = self.signed_rational()
            self.expect(")")
            return ConstSource(c)
        if nm == "delayinit":
            self.expect("(")
            lab = self.name()
            self.expect(")")
            return UnitDelayInit(lab)
        if nm == "tf2":
            self.expect("(")
            a = [self.signed_rational()]
            for _ in range(2):
                self.expect(",")
                a.append(self.signed_rational())
            self.expect(";")
            b = [self.signed_rational()]
            self.expect(",")
            b.append(self.signed_rational())
            prefix = None
            if self.accept(";"):
                prefix = self.name()
            self.expect(")")
            return tf2(a, b, prefix)
        if nm in ("serial", "parallel"):
            self.expect("(")
            parts = [self.block()]
            while self.accept(","):
                parts.append(self.block())
            self.expect(")")
            acc = parts[0]
            for p in parts[1:]:
                try:
                    acc = Serial(acc, p) if nm == "serial" else Parallel(acc, p)
                except ValueError as exc:
                    raise self.err(str(exc), t) from None
            return acc
        if nm == "feedback":
            self.expect("(")
            b = self.block()
            self.expect(")")
            try:
                return Feedback(b)
            except ValueError as exc:
                raise self.err(str(exc), t) from None
        raise self.err(f"unknown block {nm!r}", t)

    def _opt_nat(self, default: int) -> int:
        if self.accept("("):
            n = self.nat()
            self.expect(")")
            return n
        return default

    # ---- statements

    def network(self) -> FilterNetwork:
        net = FilterNetwork()
        eq_tok = {}
        out_tok = {}
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind != "name":
                raise self.err(f"expected a statement, found {t.text!r}")
            kw = t.text
            nxt = self.toks[self.i + 1].text
            if kw == "format" and nxt != "=":
                self.next()
                ft = self.tok
                spec = self.name()
                if spec == "fixed":
                    delta = self.rational()
                    net.fmt = FloatFormat.fixed(delta, self.accept("rne"))
                else:
                    try:
                        net.fmt = parse_format(spec)
                    except ValueError as exc:
                        raise self.err(str(exc), ft) from None
                self.expect(";")
            elif kw == "input" and nxt != "=":
                self.next()
                nm = self.name()
                if nm in net.inputs:
                    raise self.err(f"input {nm!r} declared twice", t)
                net.inputs[nm] = self.bound()
                self.expect(";")
            elif kw == "reset" and nxt != "=":
                self.next()
                nm = self.name()
                if nm in net.resets:
                    raise self.err(f"reset {nm!r} declared twice", t)
                net.resets[nm] = self.bound()
                self.expect(";")
            elif kw == "output" and nxt != "=":
                self.next()
                nm = self.name()
                if nm in net.outputs:
                    raise self.err(f"output {nm!r} declared twice", t)
                net.outputs.append(nm)
                out_tok[nm] = t
                self.expect(";")
            elif kw == "let" and nxt != "=":
                self.next()
                nm = self.name()
                self.expect("=")
                self.lets[nm] = self.block()
                self.expect(";")
            elif kw == "system" and nxt != "=":
                self.next()
                if net.system is not None:
                    raise self.err("only one system statement is allowed", t)
                net.system = self.block()
                self.expect(";")
            else:
                nm = self.name()
                self.expect("=")
                if nm in net.equations or nm in net.inputs:
                    raise self.err(f"{nm!r} is assigned more than once", t)
                net.equations[nm] = self.linear_expr()
                eq_tok[nm] = t
                self.expect(";")
        _validate(net, eq_tok, out_tok)
        return net


def _validate(net: FilterNetwork, eq_tok: dict, out_tok: dict):
    if not net.outputs:
        raise ParseError("no outputs declared")
    if net.system is not None:
        if net.equations:
            raise ParseError("a file cannot mix equations with a system statement")
        s = net.system
        if len(net.inputs) != s.n_in:
            raise ParseError(f"system has {s.n_in} inputs but {len(net.inputs)} are declared")
        if len(net.outputs) != s.n_out:
            raise ParseError(f"system has {s.n_out} outputs but {len(net.outputs)} are declared")
        for lab in s.reset_labels():
            net.resets.setdefault(lab, None)
        return
    for nm in net.inputs:
        if nm in net.equations:
            t = eq_tok[nm]
            raise ParseError(f"{nm!r} is an input and cannot be assigned", t.line, t.col)
    known = set(net.inputs) | set(net.equations)
    inits: dict[tuple, Init] = {}
    for nm, terms in net.equations.items():
        t = eq_tok[nm]
        for term in terms:
            r = term.ref
            if r.kind in ("name", "delay") and r.name not in known:
                raise ParseError(f"undeclared name {r.name!r} in equation for {nm!r}",
                                 t.line, t.col)
            if r.kind == "delay" and r.init is not None:
                key = (r.name, r.n)
                if key in inits and inits[key] != r.init:
                    raise ParseError(f"conflicting initial values for register "
                                     f"{r.name}@{r.n}", t.line, t.col)
                inits[key] = r.init
                if r.init.name is not None:
                    if r.init.name in known:
                        raise ParseError(f"{r.init.name!r} is a signal, not a reset value",
                                         t.line, t.col)
                    net.resets.setdefault(r.init.name, None)
    for nm in net.outputs:
        if nm not in known:
            t = out_tok[nm]
            raise ParseError(f"output {nm!r} is never defined", t.line, t.col)
    cyc = _delay_free_cycle(net)
    if cyc:
        t = eq_tok[cyc[0]]
        raise ParseError("non-causal: delay-free cycle " + " -> ".join(cyc + [cyc[0]]),
                         t.line, t.col)


def _delay_free_cycle(net: FilterNetwork):
    deps = {nm: [t.ref.name for t in terms if t.ref.kind == "name" and t.ref.name in net.equations]
            for nm, terms in net.equations.items()}
    color = {nm: 0 for nm in deps}
    stack: list[str] = []

    def visit(u):
        color[u] = 1
        stack.append(u)
        for v in deps[u]:
            if color[v] == 1:
                return stack[stack.index(v):]
            if color[v] == 0:
                r = visit(v)
                if r:
                    return r
        stack.pop()
        color[u] = 2
        return None

    for nm in deps:
        if color[nm] == 0:
            r = visit(nm)
            if r:
                return r
    return None


def parse(src: str) -> FilterNetwork:
    """Parse either surface form; raises :class:`ParseError` with a position."""
    return _Parser(src).network()


# --------------------------------------------------------------------------
# printer

def _fmt_stmt(f: FloatFormat) -> str:
    if f.kind == "fixed":
        return f"format fixed {fmt_rat(f.delta)}{' rne' if f.rne else ''};"
    return f"format {f.kind};"


def print_block(b: Block) -> str:
    if isinstance(b, Plus):
        return "plus"
    if isinstance(b, Identity):
        return f"id({b.n})"
    if isinstance(b, Fanout):
        return f"fanout({b.n})"
    if isinstance(b, Delay):
        return f"delay({b.n})"
    if isinstance(b, Scale):
        return f"scale({fmt_rat(b.k)})"
    if isinstance(b, ConstSource):
        return f"const({fmt_rat(b.c)})"
    if isinstance(b, UnitDelayInit):
        return f"delayinit({b.label})"
    if isinstance(b, Serial):
        return f"serial({print_block(b.first)}, {print_block(b.second)})"
    if isinstance(b, Parallel):
        return f"parallel({print_block(b.left)}, {print_block(b.right)})"
    if isinstance(b, Feedback):
        return f"feedback({print_block(b.body)})"
    raise TypeError(f"cannot print block {b!r}")


def print_network(net: FilterNetwork) -> str:
    """Canonical text; ``parse(print_network(n)) == n``."""
    lines = []
    if net.fmt is not None:
        lines.append(_fmt_stmt(net.fmt))
    for nm, b in net.inputs.items():
        lines.append(f"input {nm}" + (f" <= {fmt_rat(b)}" if b is not None else "") + ";")
    for nm, b in net.resets.items():
        lines.append(f"reset {nm}" + (f" <= {fmt_rat(b)}" if b is not None else "") + ";")
    if net.system is not None:
        lines.append(f"system {print_block(net.system)};")
    for nm, terms in net.equations.items():
        parts = []
        for k, t in enumerate(terms):
            c = t.coeff
            sign = "-" if c < 0 else "+"
            a = abs(c)
            body = t.ref.text() if a == 1 else f"{fmt_rat(a)}*{t.ref.text()}"
            if k == 0:
                parts.append(("-" if sign == "-" else "") + body)
            else:
                parts.append(f" {sign} {body}")
        lines.append(f"{nm} = {''.join(parts)};")
    for nm in net.outputs:
        lines.append(f"output {nm};")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# equation systems

@dataclass(frozen=True)
class Slot:
    """Register with a named initial value ``weight * reset``."""

    register: tuple       # (signal, depth)
    reset: str
    weight: Fraction

    @property
    def label(self) -> str:
        return f"{self.reset}@{self.register[0]}[{self.register[1]}]"


@dataclass
class EquationSystem:
    """``X = A X + B I + Dm R + C`` over the nodes of a network."""

    nodes: list
    inputs: list
    slots: list
    A: RatFunMatrix
    B: RatFunMatrix
    Dm: RatFunMatrix
    C: RatFunMatrix
    registers: dict       # (signal, depth) -> Init | None


def _registers(net: FilterNetwork) -> dict:
    regs: dict[tuple, Init | None] = {}
    for terms in net.equations.values():
        for t in terms:
            r = t.ref
            if r.kind == "delay":
                for k in range(1, r.n + 1):
                    regs.setdefault((r.name, k), None)
                if r.init is not None:
                    regs[(r.name, r.n)] = r.init
    return dict(sorted(regs.items(), key=lambda kv: (kv[0][0], kv[0][1])))


def _output_nodes(net: FilterNetwork) -> dict:
    """Node names for the outputs; outputs that are inputs get a copy node."""
    eqs = dict(net.equations)
    names = {}
    for o in net.outputs:
        if o in net.inputs:
            nm = f"{o}'out"
            eqs[nm] = (Term(Fraction(1), Ref("name", o)),)
            names[o] = nm
        else:
            names[o] = o
    return eqs, names


def build_system(net: FilterNetwork) -> EquationSystem:
    eqs, _ = _output_nodes(net)
    nodes = list(eqs)
    idx = {nm: k for k, nm in enumerate(nodes)}
    inputs = list(net.inputs)
    iidx = {nm: k for k, nm in enumerate(inputs)}
    regs = _registers(net)
    slots = [Slot(reg, ini.name, ini.weight) for reg, ini in regs.items()
             if ini is not None and ini.name is not None]
    sidx = {s.register: k for k, s in enumerate(slots)}
    n, m, r = len(nodes), len(inputs), len(slots)
    A = [[ZERO] * n for _ in range(n)]
    B = [[ZERO] * m for _ in range(n)]
    D = [[ZERO] * r for _ in range(n)]
    C = [[ZERO] for _ in range(n)]
    step = RatFun(ONE.num, Poly((1, -1)))
    for v, nm in enumerate(nodes):
        for t in eqs[nm]:
            a, ref = t.coeff, t.ref
            if ref.kind == "const":
                C[v][0] = C[v][0] + step * (a * ref.value)
                continue
            k = ref.n if ref.kind == "delay" else 0
            term = RatFun.zpow(k, a)
            if ref.name in idx:
                A[v][idx[ref.name]] = A[v][idx[ref.name]] + term
            else:
                B[v][iidx[ref.name]] = B[v][iidx[ref.name]] + term
            # initial register contents seen during the first k steps
            for s in range(k):
                reg = (ref.name, k - s)
                ini = regs.get(reg)
                if ini is None:
                    continue
                if ini.name is None:
                    C[v][0] = C[v][0] + RatFun.zpow(s, a * ini.weight)
                else:
                    j = sidx[reg]
                    D[v][j] = D[v][j] + RatFun.zpow(s, a)
    flat = lambda rows, cols: RatFunMatrix(len(rows), cols, [e for row in rows for e in row])
    return EquationSystem(nodes, inputs, slots, flat(A, n), flat(B, m), flat(D, r),
                          flat(C, 1), regs)


@dataclass
class NodeErrors:
    """Per-node rounding-error coefficients of one time step."""

    GX: np.ndarray     # n x n, multiplies sup|node value|
    GI: np.ndarray     # n x m
    GR: np.ndarray     # n x r
    G0: np.ndarray     # n, absolute


def _gamma_up(eps: float, k: int) -> float:
    """Upper bound on ``(1 + eps)^k - 1``."""
    if eps == 0.0 or k == 0:
        return 0.0
    return add_up(pow_up(add_up(1.0, eps), k), -1.0)


def node_errors(net: FilterNetwork, sysm: EquationSystem, fmt: FloatFormat) -> NodeErrors:
    """Error created while evaluating each node in ``fmt``.

    A node ``sum_k a_k t_k`` evaluated left to right with ``p`` genuine
    products undergoes at most ``p + m - 1`` roundings, each term at most
    that many, so its relative error is ``gamma`` of that count.  Stored
    coefficients contribute their representation error.
    """
    eqs, _ = _output_nodes(net)
    n, m, r = len(sysm.nodes), len(sysm.inputs), len(sysm.slots)
    GX = np.zeros((n, n))
    GI = np.zeros((n, m))
    GR = np.zeros((n, r))
    G0 = np.zeros(n)
    if fmt.kind == "exact":
        return NodeErrors(GX, GI, GR, G0)
    idx = {nm: k for k, nm in enumerate(sysm.nodes)}
    iidx = {nm: k for k, nm in enumerate(sysm.inputs)}
    sidx = {s.register: k for k, s in enumerate(sysm.slots)}
    eps = Fraction(fmt.eps_rel)
    eta = fmt.eps_abs
    fixed = fmt.kind == "fixed"

    def is_product(a: Fraction) -> bool:
        if abs(a) == 1:
            return False
        return not (fixed and a.denominator == 1)

    for v, nm in enumerate(sysm.nodes):
        terms = eqs[nm]
        nprod = sum(1 for t in terms if t.ref.kind != "const" and is_product(t.coeff))
        nops = nprod + len(terms) - 1
        gam = Fraction(_gamma_up(fmt.eps_rel, nops))
        abs_ops = nprod if fixed else nops
        g0 = Fraction(0)
        if abs_ops and eta:
            g0 += Fraction(eta) * abs_ops * (1 + gam)
        for t in terms:
            a, ref = t.coeff, t.ref
            if ref.kind == "const":
                c = a * ref.value
                rep = abs(fmt.round_constant(c) - c)
                g0 += abs(c) * gam + rep * (1 + gam)
                continue
            rep = abs(fmt.round_constant(a) - a)
            e = abs(a) * gam + rep * (1 + gam)
            ev = rat_up(e)
            if ref.name in idx:
                GX[v, idx[ref.name]] = add_up(GX[v, idx[ref.name]], ev)
            else:
                GI[v, iidx[ref.name]] = add_up(GI[v, iidx[ref.name]], ev)
            if ref.kind != "delay":
                continue
            # the delayed value may be an initial register content instead
            for s in range(ref.n):
                reg = (ref.name, ref.n - s)
                ini = sysm.registers.get(reg)
                if ini is None:
                    continue
                w = ini.weight
                wf = fmt.round_constant(w)
                if ini.name is None:
                    g0 += e * abs(wf) + abs(a) * abs(wf - w)
                    continue
                j = sidx[reg]
                if w == 1:
                    GR[v, j] = add_up(GR[v, j], ev)
                    continue
                # register starts at fl(w * reset)
                init_err = (abs(w) * eps + abs(wf - w) * (1 + eps))
                mag = abs(w) + init_err
                GR[v, j] = add_up(GR[v, j], rat_up(e * mag + abs(a) * init_err))
                if eta:
                    g0 += (e + abs(a)) * Fraction(eta)
        G0[v] = rat_up(g0)
    return NodeErrors(GX, GI, GR, G0)


def network_filter(net: FilterNetwork, fmt: FloatFormat | None = None) -> tuple[AbstractFilter, EquationSystem | None]:
    """Abstract value of the network restricted to its outputs."""
    fmt = fmt or net.fmt or IEEE64
    if net.system is not None:
        return net.system.abstract(fmt), None
    sysm = build_system(net)
    n = len(sysm.nodes)
    _, onames = _output_nodes(net)
    rows = [sysm.nodes.index(onames[o]) for o in net.outputs]
    errs = node_errors(net, sysm, fmt)
    need_w = bool(np.any(errs.GX) or np.any(errs.GI) or np.any(errs.GR) or np.any(errs.G0))
    M = RatFunMatrix.identity(n) - sysm.A
    rhs = [sysm.B, sysm.Dm, sysm.C]
    if need_w:
        rhs.insert(0, RatFunMatrix.identity(n))
    X = solve_linear_system(M, hstack(*rhs))
    m, r = sysm.B.cols, sysm.Dm.cols
    off = n if need_w else 0
    TX = X.select_cols(range(off, off + m))
    DX = X.select_cols(range(off + m, off + m + r))
    CX = X.select_cols([off + m + r])
    if need_w:
        W = X.select_cols(range(n))
        # propagate node errors only through rows that reach an output
        Aw = n1(W)
        K1 = _mm(Aw, errs.GX)
        Y_T = _mm(Aw, _add(errs.GI, _mm(errs.GX, n1(TX))))
        Y_D = _mm(Aw, _add(errs.GR, _mm(errs.GX, ninf(DX))))
        Y_a = _mm(Aw, _add(errs.G0.reshape(-1, 1),
                           _mm(errs.GX, _linf_col(CX).reshape(-1, 1))))
        try:
            if not np.all(np.isfinite(K1)):
                raise NotContractingError("unstable loop carries rounding errors")
            eT = _fixpoint_columns(K1, Y_T) if m else np.zeros((n, 0))
            eD = _fixpoint_columns(K1, Y_D) if r else np.zeros((n, 0))
            ea = _fixpoint_columns(K1, Y_a).reshape(-1)
        except NotContractingError as exc:
            log.warning("rounding errors not bounded: %s", exc)
            eT = np.full((n, m), INF)
            eD = np.full((n, r), INF)
            ea = np.full(n, INF)
    else:
        eT, eD, ea = np.zeros((n, m)), np.zeros((n, r)), np.zeros(n)
    f = AbstractFilter(TX.select_rows(rows), DX.select_rows(rows), CX.select_rows(rows),
                       eT[rows], eD[rows], ea[rows],
                       tuple(s.label for s in sysm.slots), fmt)
    return f, sysm


# --------------------------------------------------------------------------
# reports

def num(x: float) -> dict:
    """Bound as both decimal and exact hexadecimal text."""
    x = float(x)
    if math.isinf(x):
        return {"dec": "inf", "hex": "inf"}
    return {"dec": repr(x), "hex": x.hex()}


def unnum(d: dict) -> float:
    return float.fromhex(d["hex"]) if d["hex"] != "inf" else INF


@dataclass
class AnalysisOptions:
    fmt: FloatFormat | None = None
    n_max: int = 4096
    quantize_bits: int | None = 512
    share_resets: bool = True
    jobs: int = 1
    timing: bool = False


@dataclass
class Report:
    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Report:
        return cls(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, Report) and self.to_json() == other.to_json()

    @property
    def bounded(self) -> bool:
        return all(o["stable"] for o in self.data["outputs"])

    def bound(self, output: str) -> float:
        for o in self.data["outputs"]:
            if o["name"] == output:
                return unnum(o["bound"])
        raise KeyError(output)

    def to_text(self) -> str:
        return render_text(self.data)


def render_text(d: dict) -> str:
    lines = [f"format {d['format']}  (eps_rel {d['eps_rel']['dec']}, eps_abs {d['eps_abs']['dec']})"]
    for o in d["outputs"]:
        state = "bounded" if o["stable"] else "UNBOUNDED"
        lines.append(f"output {o['name']}: |{o['name']}| <= {o['bound']['dec']}  [{state}]")
        for nm, g in o["gain"].items():
            lines.append(f"  gain from {nm}: {g['dec']}")
        if o["reset_term"]["dec"] != "0.0":
            lines.append(f"  reset contribution: {o['reset_term']['dec']}")
        if o["const_term"]["dec"] != "0.0":
            lines.append(f"  constant contribution: {o['const_term']['dec']}")
        lines.append(f"  rounding error: {o['eps_term']['dec']}"
                     f" (eps_abs {o['eps_abs']['dec']})")
        for k in o["kernels"]:
            lines.append(f"  kernel {k['entry']}: l1 <= {k['l1']['dec']}, N = {k['dev_length']}, "
                         f"tail {k['tail_method']}, {k['stability']}")
        for u in o.get("unbounded", []):
            lines.append(f"  unbounded: {u}")
    if "timing" in d:
        lines.append(f"analysis time: {d['timing']['seconds']:.3f} s")
    return "\n".join(lines) + "\n"


def _kernel_entry(name: str, f: RatFun) -> dict:
    kb = l1_bound(f)
    return {
        "entry": name,
        "transfer": str(f),
        "l1": num(kb.l1_upper),
        "dev_length": kb.dev_length,
        "tail_method": kb.tail_method.value,
        "stability": kb.stability.value,
        "roots": [{"center": [num(e.center.real), num(e.center.imag)],
                   "radius": num(e.radius), "modulus_lower": num(e.modulus_lower)}
                  for e in kb.roots],
    }


def reset_groups(net: FilterNetwork, f: AbstractFilter, sysm: EquationSystem | None,
                 share: bool) -> tuple[list, np.ndarray]:
    """Sharing groups and per-slot bounds for the filter's reset slots."""
    if sysm is None:
        labels = list(f.reset_labels)
        bounds = np.array([_bound_or_inf(net.resets.get(l)) for l in labels])
        groups = []
        if share:
            by = {}
            for j, l in enumerate(labels):
                by.setdefault(l, []).append(j)
            for l, js in by.items():
                if len(js) > 1:
                    groups.append(ResetGroup(l, tuple(js), tuple([1] * len(js)),
                                             _bound_or_inf(net.resets.get(l))))
        return groups, bounds
    slots = sysm.slots
    bounds = np.array([rat_up(abs(s.weight) * Fraction(net.resets[s.reset]))
                       if net.resets.get(s.reset) is not None else INF for s in slots])
    groups = []
    if share:
        by = {}
        for j, s in enumerate(slots):
            by.setdefault(s.reset, []).append(j)
        for nm, js in by.items():
            groups.append(ResetGroup(nm, tuple(js), tuple(slots[j].weight for j in js),
                                     _bound_or_inf(net.resets.get(nm))))
    return groups, bounds


def _bound_or_inf(b) -> float:
    return INF if b is None else rat_up(Fraction(b))


def analyze(net: FilterNetwork, options: AnalysisOptions | None = None) -> Report:
    """Certified output bounds for a parsed network."""
    opts = options or AnalysisOptions()
    t0 = time.perf_counter()
    fmt = opts.fmt or net.fmt or IEEE64
    with development_limit(opts.n_max):
        f, sysm = network_filter(net, fmt)
        if opts.quantize_bits is not None:
            f = quantize(f, opts.quantize_bits)
        if opts.jobs and opts.jobs > 1:
            entries = [e for e in f.T.entries + f.D.entries if not e.is_zero()]
            with ThreadPoolExecutor(max_workers=opts.jobs) as ex:
                list(ex.map(l1_bound, entries))
        m_in = np.array([_bound_or_inf(net.inputs[nm]) for nm in net.inputs])
        groups, m_reset = reset_groups(net, f, sysm, opts.share_resets)
        ob = output_bound(f, m_in, m_reset, groups)
        outputs = []
        for i, o in enumerate(net.outputs):
            kernels = [_kernel_entry(f"T[{o},{nm}]", f.T[i, j])
                       for j, nm in enumerate(net.inputs) if not f.T[i, j].is_zero()]
            for g in groups:
                s = ZERO
                for slot, w in zip(g.slots, g.weights):
                    s = s + f.D[i, slot] * Fraction(w)
                if not s.is_zero():
                    kernels.append(_kernel_entry(f"D[{o},{g.name}]", s))
            unb = [f"{kind}[{o},{_col_name(net, f, kind, j)}]" for (ii, j, kind) in ob.unbounded if ii == i]
            bound = ob.bounds[i]
            outputs.append({
                "name": o,
                "bound": num(bound),
                "stable": bool(math.isfinite(bound)),
                "gain": {nm: num(ob.gain_T[i, j]) for j, nm in enumerate(net.inputs)},
                "reset_gain": {lab: num(linf_bound(f.D[i, j])) for j, lab in enumerate(f.reset_labels)},
                "reset_term": num(ob.reset_terms[i]),
                "const_term": num(ob.const_terms[i]),
                "eps_rel_T": {nm: num(f.eps_rel_T[i, j]) for j, nm in enumerate(net.inputs)},
                "eps_rel_D": {lab: num(f.eps_rel_D[i, j]) for j, lab in enumerate(f.reset_labels)},
                "eps_abs": num(f.eps_abs[i]),
                "eps_term": num(ob.eps_terms[i]),
                "kernels": kernels,
                "unbounded": unb,
            })
    data = {
        "format": fmt.name,
        "eps_rel": num(fmt.eps_rel),
        "eps_abs": num(fmt.eps_abs),
        "inputs": {nm: (num(_bound_or_inf(b))) for nm, b in net.inputs.items()},
        "resets": {nm: (num(_bound_or_inf(b))) for nm, b in net.resets.items()},
        "options": {"n_max": opts.n_max, "quantize_bits": opts.quantize_bits,
                    "share_resets": opts.share_resets},
        "outputs": outputs,
    }
    if opts.timing:
        data["timing"] = {"seconds": time.perf_counter() - t0}
    return Report(data)


def _col_name(net, f, kind, j):
    if kind == "T":
        return list(net.inputs)[j]
    return j if isinstance(j, str) else f.reset_labels[j]


# --------------------------------------------------------------------------
# concrete simulation of equation networks

def _topo_order(net: FilterNetwork, eqs: dict) -> list:
    deps = {nm: [t.ref.name for t in terms if t.ref.kind == "name" and t.ref.name in eqs]
            for nm, terms in eqs.items()}
    order, seen = [], set()

    def visit(u):
        if u in seen:
            return
        seen.add(u)
        for v in deps[u]:
            visit(v)
        order.append(u)

    for nm in eqs:
        visit(nm)
    return order


def compile_network(net: FilterNetwork, fmt: FloatFormat):
    """Straight-line step function mirroring the evaluation the analysis
    assumes: terms summed left to right, one rounding per operation."""
    from .blocks import _Compiler  # shared code generator helpers
    cc = _Compiler(fmt)
    eqs, onames = _output_nodes(net)
    regs = _registers(net)
    var = {}
    for k, nm in enumerate(net.inputs):
        v = cc.var("i")
        cc.emit(f"{v} = x[{k}]")
        var[nm] = v
    regvar = {reg: cc.var("s") for reg in regs}
    for reg, ini in regs.items():
        s = regvar[reg]
        if ini is None:
            cc.init.append(f"{s} = {cc.const(cc.value(0))}")
        elif ini.name is None:
            cc.init.append(f"{s} = {cc.const(cc.value(ini.weight))}")
        elif ini.weight == 1:
            cc.init.append(f"{s} = resets[{ini.name!r}]")
        else:
            K = cc.const(cc.value(ini.weight))
            cc.init.append(f"{s} = " + cc.wrap.format(f"{K} * resets[{ini.name!r}]"))

    fixed = fmt.kind == "fixed"
    for nm in _topo_order(net, eqs):
        v = cc.var()
        acc = None
        for t in eqs[nm]:
            a, ref = t.coeff, t.ref
            if ref.kind == "const":
                expr = cc.const(cc.value(a * ref.value))
            else:
                src = var[ref.name] if ref.kind == "name" else regvar[(ref.name, ref.n)]
                if a == 1:
                    expr = src
                elif a == -1:
                    expr = f"(-{src})"
                elif fixed and a.denominator == 1:
                    expr = f"({cc.const(cc.value(a))} * {src})"
                else:
                    expr = cc.wrap.format(f"{cc.const(cc.value(a))} * {src}")
            if acc is None:
                cc.emit(f"{v} = {expr}")
                acc = v
            else:
                cc.emit(f"{v} = " + cc.wrap.format(f"{v} + {expr}"))
        var[nm] = v
    # shift registers at the end of the step, deepest first
    by_sig: dict[str, int] = {}
    for (sig, k) in regs:
        by_sig[sig] = max(by_sig.get(sig, 0), k)
    for sig, depth in by_sig.items():
        for k in range(depth, 1, -1):
            cc.post.append(f"{regvar[(sig, k)]} = {regvar[(sig, k - 1)]}")
        cc.post.append(f"{regvar[(sig, 1)]} = {var[sig]}")
    outs = [var[onames[o]] for o in net.outputs]
    lines = ["def run(inputs, resets):"]
    lines += ["    " + l for l in cc.init]
    lines += ["    out = []", "    append = out.append", "    for x in inputs:"]
    lines += ["        " + l for l in cc.body]
    lines.append(f"        append(({', '.join(outs)},))")
    lines += ["        " + l for l in cc.post]
    lines.append("    return out")
    src = "\n".join(lines)
    ns = dict(cc.consts)
    exec(compile(src, "<network-sim>", "exec"), ns)
    return ns["run"]


def simulate(net: FilterNetwork, inputs, resets=None, mode="binary64") -> np.ndarray:
    """Outputs (steps x n_outputs) for input rows (steps x n_inputs).

    ``mode`` is ``exact``, ``binary64``, ``binary32`` or a FloatFormat.
    """
    from .blocks import _converter, _mode_format, _rows
    fmt = _mode_format(mode)
    conv = _converter(fmt)
    rs = {k: conv(v) for k, v in (resets or {}).items()}
    for nm in net.resets:
        rs.setdefault(nm, conv(0))
    if net.system is not None:
        return net.system.simulate(inputs, rs, fmt)
    run = compile_network(net, fmt)
    rows = [tuple(conv(v) for v in row) for row in _rows(inputs, len(net.inputs))]
    out = run(rows, rs)
    dtype = object if fmt.kind in ("exact", "fixed") else float
    return np.array(out, dtype=dtype).reshape(len(rows), len(net.outputs))


# --------------------------------------------------------------------------
# empirical check

@dataclass
class Violation:
    output: str
    step: int
    value: float
    bound: float
    trace: list


@dataclass
class CheckResult:
    passed: bool
    observed: dict
    bounds: dict
    violations: list

    def slack(self) -> dict:
        return {o: (self.observed[o] / self.bounds[o] if self.bounds[o] not in (0.0, INF) else 0.0)
                for o in self.observed}


def _dyadic_grid(x: np.ndarray, fmt: FloatFormat) -> np.ndarray:
    if fmt.kind == "fixed":
        d = float(fmt.delta)
        return np.trunc(x / d) * d
    if fmt.kind == "ieee32":
        return x.astype(np.float32).astype(float)
    return x


def check(net: FilterNetwork, report: Report, steps: int = 10000, seed: int = 0,
          trials: int = 4, modes=None) -> CheckResult:
    """Simulate the network and compare every output against its bound.

    Inputs are drawn uniformly within their declared bounds, at random
    extremes, and as sign-following patterns that line up each kernel so the
    output peaks at a chosen step.  ``modes`` defaults to binary64 plus the
    report's own number format.
    """
    rng = np.random.default_rng(seed)
    fmt = parse_format(report.data["format"])
    if modes is None:
        modes = [IEEE64] if fmt == IEEE64 else [IEEE64, fmt]
    else:
        modes = [parse_format(m) if isinstance(m, str) else m for m in modes]
    names = list(net.inputs)
    m_in = np.array([float(net.inputs[nm]) if net.inputs[nm] is not None else 1.0 for nm in names])
    m_rs = {nm: (float(b) if b is not None else 0.0) for nm, b in net.resets.items()}
    bounds = {o["name"]: unnum(o["bound"]) for o in report.data["outputs"]}
    f, _ = network_filter(net, fmt)
    patterns = []
    for _ in range(trials):
        x = rng.uniform(-1, 1, size=(steps, len(names))) * m_in
        rs = {nm: float(rng.uniform(-1, 1)) * b for nm, b in m_rs.items()}
        patterns.append((x, rs))
        x = rng.choice([-1.0, 1.0], size=(steps, len(names))) * m_in
        rs = {nm: float(rng.choice([-1.0, 1.0])) * b for nm, b in m_rs.items()}
        patterns.append((x, rs))
    for i in range(len(net.outputs)):
        for target in sorted({steps - 1, min(steps - 1, 40), min(steps - 1, 200)}):
            cols = []
            for j in range(len(names)):
                h = impulse_response(f.T[i, j], target + 1)
                cols.append(sign_following(h, steps, m_in[j], target))
            x = np.stack(cols, axis=1) if cols else np.zeros((steps, 0))
            # resets aligned with the sign of their contribution at the target
            rs = {}
            for nm, b in m_rs.items():
                acc = ZERO
                for j, lab in enumerate(f.reset_labels):
                    if lab.split("@")[0] == nm:
                        acc = acc + f.D[i, j] * _slot_weight(lab, net)
                v = impulse_response(acc, target + 1)[target] if not acc.is_zero() else 0.0
                rs[nm] = b if v >= 0 else -b
            patterns.append((x, rs))
            patterns.append((-x, {k: -v for k, v in rs.items()}))
    observed = {o: 0.0 for o in net.outputs}
    violations = []
    for mode in modes:
        for x, rs in patterns:
            x = _dyadic_grid(np.asarray(x, dtype=float), mode)
            y = simulate(net, x, rs, mode)
            ya = np.abs(np.asarray(y, dtype=float))
            for i, o in enumerate(net.outputs):
                peak = float(np.max(ya[:, i])) if len(ya) else 0.0
                observed[o] = max(observed[o], peak)
                if peak > bounds[o]:
                    t = int(np.argmax(ya[:, i] > bounds[o]))
                    violations.append(Violation(o, t, float(ya[t, i]), bounds[o],
                                                x[: min(t + 1, 16)].tolist()))
    return CheckResult(not violations, observed, bounds, violations)


def _slot_weight(label: str, net: FilterNetwork) -> Fraction:
    if "@" not in label:
        return Fraction(1)
    reg = label.split("@", 1)[1]
    sig, depth = reg[:-1].split("[")
    ini = _registers(net).get((sig, int(depth)))
    return ini.weight if ini is not None else Fraction(1)
