"""Static analysis, simulation and function evaluation for quantum while-loops."""

from .config import Tolerances, get_tolerances
from .function import PartialDensity, compute_function, f_normal, f_series, f_solve
from .loop import ProjectiveMeasurement, QuantumLoop, StateInput, run_trace, validate_loop
from .termination import analyze_input, classify_loop, p_nt, terminates_on

__version__ = "0.1.0"

__all__ = [
    "Tolerances",
    "get_tolerances",
    "PartialDensity",
    "compute_function",
    "f_normal",
    "f_series",
    "f_solve",
    "ProjectiveMeasurement",
    "QuantumLoop",
    "StateInput",
    "run_trace",
    "validate_loop",
    "analyze_input",
    "classify_loop",
    "p_nt",
    "terminates_on",
]
