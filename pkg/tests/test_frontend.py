import json
from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest

from filterbounds import example_network
from filterbounds.algebra import Poly, RatFun
from filterbounds.filters import IEEE64
from filterbounds.frontend import (
    AnalysisOptions, ParseError, Report, analyze, build_system, check, network_filter,
    parse, print_network, simulate,
)
from oracle import exact_impulse

TF2 = """
input i <= 1;
output o;
y = 0.0675*i + 0.1349*delay(i, 1, ib1) + 0.0675*delay(i, 2, ib2);
o = y + 1.143*delay(o, 1, ob1) - 0.4128*delay(o, 2, ob2);
"""


def test_tf2_recurrence_shape():
    net = parse(TF2)
    sysm = build_system(net)
    assert list(net.inputs) == ["i"]
    assert len(sysm.slots) == 4
    assert net.outputs == ["o"]
    assert set(net.resets) == {"ib1", "ib2", "ob1", "ob2"}


def test_rationals_parsed_exactly():
    net = parse("input a; x = 0.1*a + 1/3*delay(x, 1); output x;")
    terms = net.equations["x"]
    assert terms[0].coeff == F(1, 10)
    assert terms[1].coeff == F(1, 3)


@pytest.mark.parametrize("src,needle,line", [
    ("", "no outputs declared", 0),
    ("input e;\nx = x + e;\noutput x;", "non-causal", 2),
    ("input e;\nx = e;\nx = 2*e;\noutput x;", "assigned more than once", 3),
    ("input e;\nx = e + q;\noutput x;", "undeclared name 'q'", 2),
    ("input e;\nx = e +;\noutput x;", "expected a name", 2),
    ("input e;\noutput y;", "never defined", 2),
    ("input e;\nx = delay(e, 1, a) + delay(e, 1, b);\noutput x;", "conflicting", 2),
])
def test_parse_errors(src, needle, line):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert needle in str(info.value)
    assert info.value.line == line


def test_error_column():
    with pytest.raises(ParseError) as info:
        parse("input e;\nx = e $ 1;\noutput x;")
    assert (info.value.line, info.value.col) == (2, 7)


@pytest.mark.parametrize("name", ["filter1", "filter2", "tf2", "composite"])
def test_round_trip(name):
    net = parse(example_network(name))
    text = print_network(net)
    assert parse(text) == net
    assert print_network(parse(text)) == text


def test_filter1_denominator():
    f, _ = network_filter(parse(example_network("filter1")))
    den = f.T[0, 0].den
    # 10 - 15z + 7z^2 scaled to constant term 1
    assert den == Poly([1, F(-3, 2), F(7, 10)])


def test_equation_network_simulation_matches_series():
    net = parse(example_network("filter2"))
    f, _ = network_filter(net, IEEE64)
    x = np.zeros((50, 1))
    x[0, 0] = 1
    # zero resets and no constant: subtract the constant response
    y = simulate(net, x, {"iota": 0}, "exact")[:, 0]
    y0 = simulate(net, np.zeros((50, 1)), {"iota": 0}, "exact")[:, 0]
    assert list(y - y0) == exact_impulse(f.T[0, 0], 50)
    assert list(y0) == exact_impulse(f.Tc[0, 0], 50)


def test_reset_columns_match_simulation():
    net = parse(example_network("filter1"))
    f, sysm = network_filter(net)
    y = simulate(net, np.zeros((30, 1)), {"iota": 1}, "exact")[:, 0]
    total = RatFun(0)
    for j, s in enumerate(sysm.slots):
        total = total + f.D[0, j] * s.weight
    assert list(y) == exact_impulse(total, 30)


def test_analyze_is_deterministic():
    net = parse(example_network("filter2"))
    a = analyze(net).to_json()
    b = analyze(parse(example_network("filter2"))).to_json()
    assert a == b


def test_report_round_trip():
    r = analyze(parse(example_network("tf2")))
    back = Report.from_json(r.to_json())
    assert back == r
    assert back.bound("o") == r.bound("o")
    assert float.fromhex(r.data["outputs"][0]["bound"]["hex"]) == r.bound("o")


def test_timing_only_on_request():
    net = parse(example_network("tf2"))
    assert "timing" not in analyze(net).data
    assert analyze(net, AnalysisOptions(timing=True)).data["timing"]["seconds"] >= 0


def test_bounds_monotone_in_input_bounds():
    net = parse(example_network("filter1"))
    r1 = analyze(net).data["outputs"][0]
    doubled = replace(net, inputs={k: 2 * v for k, v in net.inputs.items()})
    r2 = analyze(doubled).data["outputs"][0]
    g = float(r1["gain"]["e"]["dec"])
    b1, b2 = float(r1["bound"]["dec"]), float(r2["bound"]["dec"])
    assert r1["reset_term"] == r2["reset_term"]
    assert b2 <= 2 * b1
    assert b2 - b1 == pytest.approx(g * 400 + (float(r2["eps_term"]["dec"]) - float(r1["eps_term"]["dec"])))


def test_unstable_network_reported():
    r = analyze(parse("input e <= 1; x = e + 2*delay(x, 1); output x;"))
    assert not r.bounded
    assert r.data["outputs"][0]["unbounded"] == ["T[x,e]"]


def test_exact_format_has_no_rounding_terms():
    r = analyze(parse(example_network("filter1")), AnalysisOptions(fmt=parse_fmt("exact")))
    assert r.data["outputs"][0]["eps_term"]["dec"] == "0.0"


def parse_fmt(name):
    from filterbounds.filters import parse_format
    return parse_format(name)


def test_check_passes_on_sound_report():
    net = parse(example_network("filter1"))
    r = analyze(net)
    res = check(net, r, steps=2000, seed=3)
    assert res.passed
    assert 0 < res.slack()["x"] < 1
    assert res.observed["x"] < 339


def test_check_detects_lowered_bound():
    net = parse(example_network("filter1"))
    r = analyze(net)
    data = json.loads(r.to_json())
    low = data["outputs"][0]["bound"]
    low["hex"] = (r.bound("x") / 4).hex()
    res = check(net, Report(data), steps=500, seed=1)
    assert not res.passed
    v = res.violations[0]
    assert v.value > v.bound and v.trace


def test_block_form_network():
    net = parse(example_network("composite"))
    assert net.is_block_form
    r = analyze(net)
    assert r.bounded
    assert check(net, r, steps=1000).passed


def test_jobs_option_same_result():
    net = parse(example_network("tf2"))
    assert analyze(net, AnalysisOptions(jobs=4)) == analyze(net)
