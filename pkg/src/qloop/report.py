"""Machine-readable reports.  Complex numbers are serialized as ``[re, im]``."""

from __future__ import annotations

import json
import time
from importlib import resources
from typing import Any

import numpy as np

from .config import Tolerances, resolve
from .function import PartialDensity, compute_function
from .loop import Diagnostic, LoopTrace, QuantumLoop, StateInput, as_state, run_trace, validate_loop
from .perturbation import PerturbationResult
from .termination import LoopVerdict, analyze_input, classify_loop

SCHEMA = "qloop/1"
TRACE_EXCERPT = 10

__all__ = [
    "SCHEMA",
    "complex_pair",
    "matrix_json",
    "analysis_report",
    "simulation_report",
    "function_report",
    "perturbation_report",
    "validation_report",
    "diagnostic_json",
    "load_schema",
    "dumps",
]


def complex_pair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def matrix_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return [complex_pair(x) for x in a]
    return [[complex_pair(x) for x in row] for row in a]


def _loop_json(loop: QuantumLoop) -> dict[str, Any]:
    return {
        "name": loop.name,
        "dims": list(loop.subsystem_dims),
        "outcomes": list(loop.measurement.labels),
        "guard": sorted(loop.guard),
        "guard_dim": loop.guard_projectors.k,
    }


def _verdict_json(v: LoopVerdict) -> dict[str, Any]:
    return {
        "kind": v.kind,
        "spectral_radius": v.spectral_radius,
        "stable_radius": v.stable_radius,
        "unit_eigenvalues": [complex_pair(z) for z in v.unit_eigenvalues],
        "pi1_rank": v.pi1_rank,
        "nilpotent_power_norm": v.nilpotent_power_norm,
    }


def diagnostic_json(d: Diagnostic) -> dict[str, Any]:
    return {"severity": d.severity, "code": d.code, "message": d.message, "residual": d.residual}


def _function_json(F: PartialDensity) -> dict[str, Any]:
    return {
        "method": F.method,
        "matrix": matrix_json(F.matrix),
        "trace": F.trace_value,
        "terms": F.terms,
        "truncation": F.truncation,
        "residual": F.residual,
    }


def _steps_json(trace: LoopTrace, limit: int | None = None) -> list[dict[str, Any]]:
    steps = trace.steps if limit is None else trace.steps[:limit]
    return [
        {
            "n": s.n,
            "p_T": s.p_T,
            "p_NT": s.p_NT,
            "p_NT_cumulative": s.p_NT_cumulative,
            "p_NT_formula": s.p_NT_formula,
        }
        for s in steps
    ]


def analysis_report(
    loop: QuantumLoop,
    state: StateInput | None,
    tol: Tolerances | None = None,
    method: str = "auto",
) -> dict[str, Any]:
    """Loop verdict, and for a given input its verdict, ``p_nt``, ``F`` and a trace excerpt."""
    tol = resolve(tol)
    start = time.perf_counter()
    verdict = classify_loop(loop, tol)
    report: dict[str, Any] = {
        "schema": SCHEMA,
        "kind": "analysis",
        "loop": _loop_json(loop),
        "diagnostics": [diagnostic_json(d) for d in validate_loop(loop, tol)],
        "verdict": _verdict_json(verdict),
        "input": None,
    }
    if state is not None:
        state = as_state(state)
        iv = analyze_input(loop, state, tol)
        F = compute_function(loop, state, method, tol)
        trace = run_trace(loop, state, TRACE_EXCERPT, keep_states=False, tol=tol)
        report["input"] = {
            "kind": state.kind,
            "verdict": iv.kind,
            "p_nt": iv.p_nt,
            "at_step": iv.at_step,
            "marginal": iv.marginal,
            "F": _function_json(F),
            "consistency": abs(F.trace_value + iv.p_nt - 1),
            "trace_excerpt": _steps_json(trace),
        }
    report["timing"] = {"seconds": time.perf_counter() - start}
    return report


def simulation_report(loop: QuantumLoop, trace: LoopTrace) -> dict[str, Any]:
    return {
        "schema": SCHEMA,
        "kind": "simulation",
        "loop": _loop_json(loop),
        "steps": _steps_json(trace),
        "truncated_at": trace.truncated_at,
        "termination_step": trace.termination_step,
        "formula_residual": trace.formula_residual,
    }


def function_report(loop: QuantumLoop, F: PartialDensity) -> dict[str, Any]:
    return {"schema": SCHEMA, "kind": "function", "loop": _loop_json(loop), "F": _function_json(F)}


def perturbation_report(
    loop: QuantumLoop, result: PerturbationResult, target: str, eps: float, output: str | None
) -> dict[str, Any]:
    return {
        "schema": SCHEMA,
        "kind": "perturbation",
        "loop": _loop_json(loop),
        "target": target,
        "eps": eps,
        "distance": result.distance,
        "verdict": _verdict_json(result.verified_verdict),
        "steps_taken": result.steps_taken,
        "deltas_used": list(result.deltas_used),
        "attempts": result.attempts,
        "output": output,
    }


def validation_report(loop: QuantumLoop | None, diagnostics: list[dict[str, Any]]) -> dict[str, Any]:
    return {
        "schema": SCHEMA,
        "kind": "validation",
        "loop": None if loop is None else _loop_json(loop),
        "valid": not any(d["severity"] == "error" for d in diagnostics),
        "diagnostics": diagnostics,
    }


def load_schema() -> dict[str, Any]:
    text = resources.files("qloop").joinpath("schemas/report-v1.json").read_text(encoding="utf-8")
    return json.loads(text)


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(report: dict[str, Any], indent: int | None = 2) -> str:
    return json.dumps(report, indent=indent, default=_default)
