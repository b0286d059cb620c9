"""Certified worst-case bounds for linear digital filters under rounding.

The main entry points are :func:`parse` and :func:`analyze` for text
networks, the block classes for building diagrams in Python, and
:func:`l1_bound` for single transfer functions.
"""

from importlib import resources

from .algebra import Poly, RatFun, RatFunMatrix, develop
from .blocks import (
    Block, ConstSource, Delay, Fanout, Feedback, Identity, Parallel, Plus,
    Scale, Serial, UnitDelayInit, fir, random_network, sum_chain, tf2,
)
from .bounds import KernelBound, Stability, development_limit, l1_bound, linf_bound
from .filters import (
    EXACT, IEEE32, IEEE64, AbstractFilter, FloatFormat, ResetGroup,
    compose_feedback, compose_parallel, compose_serial, output_bound, parse_format,
    quantize,
)
from .frontend import (
    AnalysisOptions, CheckResult, FilterNetwork, ParseError, Report, analyze,
    check, parse, print_network, simulate,
)


def example_network(name: str) -> str:
    """Source text of a bundled network (``filter1``, ``filter2``, ``tf2``, ``composite``)."""
    return resources.files(__package__).joinpath("networks", f"{name}.flt").read_text()


__all__ = [
    "AbstractFilter", "AnalysisOptions", "Block", "CheckResult", "ConstSource",
    "Delay", "EXACT", "Fanout", "Feedback", "FilterNetwork", "FloatFormat",
    "IEEE32", "IEEE64", "Identity", "KernelBound", "Parallel", "ParseError",
    "Plus", "Poly", "RatFun", "RatFunMatrix", "Report", "ResetGroup", "Scale",
    "Serial", "Stability", "UnitDelayInit", "analyze", "check",
    "compose_feedback", "compose_parallel", "compose_serial", "develop",
    "development_limit", "example_network", "fir", "l1_bound", "linf_bound",
    "output_bound", "parse", "parse_format", "print_network", "quantize",
    "random_network", "simulate", "sum_chain", "tf2",
]
