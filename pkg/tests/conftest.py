from fractions import Fraction
from pathlib import Path

import pytest

from filterbounds.algebra import Poly, RatFun


def rf(num, den=(1,)):
    """Rational function from coefficient lists (lowest degree first)."""
    return RatFun(Poly([Fraction(c) for c in num]), Poly([Fraction(c) for c in den]))


@pytest.fixture
def networks_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "src" / "filterbounds" / "networks"


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
