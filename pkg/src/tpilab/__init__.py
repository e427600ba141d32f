"""tpilab: test point insertion lab for LBIST-style random-pattern coverage."""

__version__ = "0.1.0"

from .aig import AigGraph, TpType, from_netlist
from .bench import Netlist, parse_bench, random_circuit, write_bench
from .simulate import CoverageReport, FaultSet, PatternSet, enumerate_faults, fault_simulate

__all__ = [
    "AigGraph",
    "CoverageReport",
    "FaultSet",
    "Netlist",
    "PatternSet",
    "TpType",
    "enumerate_faults",
    "fault_simulate",
    "from_netlist",
    "parse_bench",
    "random_circuit",
    "write_bench",
    "__version__",
]
