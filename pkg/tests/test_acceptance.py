"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line through ``acceptance_log.record``; the
lines are repeated in the terminal summary so they show up without ``-s``.
"""

import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

import filterbounds.filters as filters_mod
from filterbounds import example_network
from filterbounds.algebra import Poly, RatFun, RatFunMatrix, format_poly
from filterbounds.blocks import _abstract_cached, random_network
from filterbounds.bounds import _l1_cached, l1_bound, linf_bound
from filterbounds.filters import (
    EXACT, IEEE32, IEEE64, AbstractFilter, ResetGroup, compose_feedback, output_bound,
)
from filterbounds.frontend import (
    AnalysisOptions, analyze, check, network_filter, parse,
)
from filterbounds.numeric import (
    IntervalPoly, NotContractingError, enclose_roots, fixpoint_upper_bound,
)
from filterbounds.oracles import impulse_response, sign_following
from acceptance_log import record
from oracle import (
    as_ratfun, constructed_polynomials, disc_contains, dyadic_partial_l1,
    random_stable_dyadic,
)

N_NETWORKS = 100
STEPS = 10_000


def _fresh_caches():
    _l1_cached.cache_clear()
    _abstract_cached.cache_clear()


def _timed_analysis(name, **opts):
    _fresh_caches()
    t0 = time.perf_counter()
    net = parse(example_network(name))
    report = analyze(net, AnalysisOptions(**opts))
    return net, report, time.perf_counter() - t0


def _moduli(report, output):
    """Certified (lower, upper) modulus range over every kernel's roots."""
    lo, hi = math.inf, 0.0
    for k in report.data["outputs"][0]["kernels"]:
        for r in k["roots"]:
            c = complex(float(r["center"][0]["dec"]), float(r["center"][1]["dec"]))
            lo = min(lo, float(r["modulus_lower"]["dec"]))
            hi = max(hi, abs(c) + float(r["radius"]["dec"]))
    return lo, hi


# --------------------------------------------------------------------------

def test_filter1_reproduction():
    net, report, secs = _timed_analysis("filter1")
    f, _ = network_filter(net)
    dens = {e.den for e in f.T.entries + f.D.entries if not e.is_zero()}
    den_ok = dens == {Poly([10, -15, 7]) * F(1, 10)}
    lo, hi = _moduli(report, "x")
    roots_ok = 1.18 <= lo and hi <= 1.21
    bound = report.bound("x")
    sim = check(net, report, steps=STEPS, seed=0, modes=["binary64"])
    ok = den_ok and roots_ok and bound <= 345 and sim.passed and secs < 1.0
    record("filter1 reproduction", ok,
           f"denominator 10-15z+7z^2 {'derived' if den_ok else 'NOT derived'}; "
           f"root moduli in [{lo:.5f}, {hi:.5f}]; bound {bound:.4f} <= 345; "
           f"binary64 simulation max {sim.observed['x']:.4f}; {secs:.3f} s")
    assert den_ok and roots_ok
    assert bound <= 345
    assert sim.passed and sim.observed["x"] <= bound
    assert secs < 1.0


def test_filter1_coarse_bound():
    _, report, _ = _timed_analysis("filter1", share_resets=False)
    bound = report.bound("x")
    ok = bound <= 535 and bound < 531 * 1.05
    record("filter1 coarse bound", ok,
           f"bound without reset sharing {bound:.4f} <= 535 and < {531 * 1.05:.2f}")
    assert ok


def test_filter2_reproduction():
    net, report, _ = _timed_analysis("filter2")
    f, sysm = network_filter(net)
    derived = f.T[0, 0].den * 60
    expected = Poly([60, 35, 51])
    den_ok = derived == expected
    lo, hi = _moduli(report, "x")
    roots_ok = 1.06 <= lo and hi <= 1.10
    bound = report.bound("x")
    # the constant source injects exactly 10 into s1 at every step
    s1 = sysm.nodes.index("s1")
    src = sysm.C[s1, 0]
    const_ok = src == RatFun(Poly([10]), Poly([1, -1])) and linf_bound(src) == 10.0
    sim = check(net, report, steps=STEPS, seed=0)
    ok = den_ok and roots_ok and bound <= 1120 and const_ok and sim.passed
    coeffs = format_poly(derived).replace(" ", "").replace("*", "")
    record("filter2 reproduction", ok,
           f"denominator derived {coeffs} vs expected 60+35z+51z^2 "
           f"({'match' if den_ok else 'MISMATCH'}); root moduli in [{lo:.5f}, {hi:.5f}]; "
           f"bound {bound:.4f} <= 1120; constant source 10 per step: {const_ok}; "
           f"simulation max {max(sim.observed.values()):.3f}")
    assert roots_ok
    assert bound <= 1120
    assert const_ok and sim.passed
    assert den_ok, f"derived denominator {derived} differs from 60+35z+51z^2"


def test_error_model_constants():
    ok = (F(IEEE64.eps_rel) == F(1, 2 ** 53) and F(IEEE64.eps_abs) == F(1, 2 ** 1074)
          and IEEE64.eps_rel.hex() == "0x1.0000000000000p-53"
          and IEEE64.eps_abs.hex() == "0x0.0000000000001p-1022")
    record("error-model constants", ok,
           f"eps_rel {IEEE64.eps_rel.hex()}, eps_abs {IEEE64.eps_abs.hex()}")
    assert ok


def test_composed_tf2_performance():
    net, report, secs = _timed_analysis("composite")
    out = report.data["outputs"][0]
    gain = float(out["gain"]["e"]["dec"])
    ea = float.fromhex(out["eps_abs"]["hex"])
    smallest_normal = 2.0 ** -1022
    ok = secs < 1.0 and math.isfinite(gain) and 0 < ea < smallest_normal
    record("composed TF2 performance", ok,
           f"{secs:.3f} s; gain {gain:.6f}; eps_abs {ea:.3e} (denormal: {0 < ea < smallest_normal})")
    assert ok


# --------------------------------------------------------------------------
# random networks shared by the soundness and oracle criteria

@pytest.fixture(scope="module")
def networks():
    rng = np.random.default_rng(2024)
    out = []
    while len(out) < N_NETWORKS:
        depth = int(rng.integers(1, 5))
        net = random_network(rng, depth=depth)
        if not l1_bound(net.abstract(EXACT).T[0, 0]).finite:
            continue
        out.append(net)
    return out


def _groups(f: AbstractFilter):
    by = {}
    for j, lab in enumerate(f.reset_labels):
        by.setdefault(lab, []).append(j)
    return [ResetGroup(lab, tuple(js), (1,) * len(js), 1.0) for lab, js in by.items()]


def _patterns(f, rng, labels):
    T = f.T[0, 0]
    yield rng.uniform(-1, 1, STEPS), {l: float(rng.uniform(-1, 1)) for l in labels}
    yield rng.choice([-1.0, 1.0], STEPS), {l: float(rng.choice([-1.0, 1.0])) for l in labels}
    for target in (STEPS - 1, 60):
        h = impulse_response(T, target + 1)
        x = sign_following(h, STEPS, 1.0, target)
        rs = {}
        for lab in labels:
            d = RatFun(0)
            for j, l in enumerate(f.reset_labels):
                if l == lab:
                    d = d + f.D[0, j]
            v = impulse_response(d, target + 1)[target] if not d.is_zero() else 0.0
            rs[lab] = 1.0 if v >= 0 else -1.0
        yield x, rs
        yield -x, {k: -v for k, v in rs.items()}


def test_soundness_suite(networks):
    rng = np.random.default_rng(7)
    violations, worst, sims = [], 0.0, 0
    for k, net in enumerate(networks):
        f = net.abstract(IEEE64)
        labels = sorted(set(f.reset_labels))
        ob = output_bound(f, [1.0], [1.0] * f.n_r, _groups(f))
        bound = float(ob.bounds[0])
        assert math.isfinite(bound)
        run, _, _ = net.compile("binary64")
        for x, rs in _patterns(f, rng, labels):
            y = run([(float(v),) for v in x], rs)
            peak = max(abs(v[0]) for v in y)
            sims += 1
            worst = max(worst, peak / bound if bound else 0.0)
            if peak > bound:
                violations.append((k, peak, bound))
    ok = not violations and len(networks) >= 100
    record("soundness property suite", ok,
           f"{len(networks)} networks, {sims} simulations of {STEPS} steps, "
           f"{len(violations)} violations, worst observed/bound {worst!r}")
    assert not violations, violations[:5]


def test_oracle_equivalence(networks):
    bad = 0
    for net in networks:
        f = net.abstract(EXACT)
        x = [(F(1),)] + [(F(0),)] * 63
        y = net.simulate(x, mode="exact")
        for j in range(f.n_o):
            if f.T[j, 0].develop(63) != list(y[:, j]):
                bad += 1
    ok = bad == 0
    record("oracle equivalence", ok,
           f"{len(networks)} networks, first 64 coefficients, {bad} mismatches")
    assert ok


def test_l1_lower_bound_dominance():
    rng = np.random.default_rng(99)
    failures, checked = [], 0
    for _ in range(200):
        p, q = random_stable_dyadic(rng)
        kb = l1_bound(as_ratfun(p, q))
        partial = dyadic_partial_l1(p, q, 8, STEPS)
        checked += 1
        if not F(kb.l1_upper) >= partial:
            failures.append((p, q, kb.l1_upper, float(partial)))
    half = l1_bound(RatFun(Poly([1]), Poly([1, F(-1, 2)]))).l1_upper
    ok = not failures and 2 <= half <= 2 + 1e-6
    record("L1 lower-bound dominance", ok,
           f"{checked} functions, {len(failures)} below exact partial sums; "
           f"l1(1/(1-z/2)) = {half!r}")
    assert not failures, failures[:3]
    assert 2 <= half <= 2 + 1e-6


def test_fixpoint_certificate(monkeypatch):
    seen = []
    real = filters_mod.fixpoint_upper_bound

    def recording(K1, y, *a, **kw):
        B = real(K1, y, *a, **kw)
        seen.append((np.array(K1, dtype=float), np.array(y, dtype=float), B.copy()))
        return B

    monkeypatch.setattr(filters_mod, "fixpoint_upper_bound", recording)
    _fresh_caches()
    for name in ("filter1", "filter2", "tf2", "composite"):
        analyze(parse(example_network(name)))
    rng = np.random.default_rng(5)
    for _ in range(25):
        net = random_network(rng, depth=4)
        net.abstract(IEEE64)
        net.abstract(IEEE32)
    _fresh_caches()

    def exact_check(K1, y, B):
        K1 = np.atleast_2d(K1)
        for i in range(len(y)):
            lhs = sum(F(K1[i, j]) * F(B[j]) for j in range(len(B))) + F(y[i])
            if lhs > F(B[i]):
                return False
        return True

    bad = sum(1 for K1, y, B in seen if not exact_check(K1, y, B))
    rejected = 0
    for K in ([[1.0]], [[0.5, 0.5], [0.25, 0.25]], [[2.0, 0.0], [0.0, 0.1]]):
        try:
            fixpoint_upper_bound(np.array(K), np.ones(len(K)))
        except NotContractingError:
            rejected += 1
    # feedback path gain l1(1/(1 - z/2)) * 0.75 = 1.5
    loop = AbstractFilter(RatFunMatrix.from_rows([[RatFun(1), RatFun(F(1, 2))]]),
                          RatFunMatrix.zeros(1, 0), RatFunMatrix.zeros(1, 1),
                          np.array([[0.0, 0.75]]), np.zeros((1, 0)), np.zeros(1), (), IEEE64)
    try:
        compose_feedback(loop)
    except NotContractingError:
        rejected += 1
    ok = bad == 0 and len(seen) > 0 and rejected == 4
    record("fixpoint certificate", ok,
           f"{len(seen)} emitted bounds re-checked exactly, {bad} failures; "
           f"{rejected}/4 non-contracting fixtures rejected")
    assert bad == 0 and seen
    assert rejected == 4


def test_root_certification():
    polys, missed = 0, 0
    for p, roots in constructed_polynomials(50):
        polys += 1
        enc, _ = enclose_roots(IntervalPoly.from_poly(p))
        for re, im in roots:
            hits = [e for e in enc if disc_contains(e, re, im)]
            mod2 = re * re + im * im
            if not hits or not any(F(e.modulus_lower) ** 2 <= mod2 for e in hits):
                missed += 1
    ok = polys == 50 and missed == 0
    record("root certification", ok, f"{polys} polynomials, {missed} roots not certified")
    assert ok
