"""Numerical tolerances shared by every analysis.

Defaults can be overridden process-wide through the ``QLOOP_TOL``
environment variable, e.g. ``QLOOP_TOL="unit=1e-7,zero=1e-13"``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

ENV_VAR = "QLOOP_TOL"


@dataclass(frozen=True)
class Tolerances:
    struct: float = 1e-9  # unitarity, hermiticity, projector identities
    residual: float = 1e-10  # decomposition reconstruction target
    zero: float = 1e-12  # branch probabilities treated as exactly zero
    unit: float = 1e-8  # |lambda| >= 1 - unit counts as unit modulus
    unit_zero: float = 1e-8  # nilpotency threshold on ||U_X^k||
    spec: float = 1e-8  # eigenvalue grouping for observables
    conv: float = 1e-12  # series truncation on the added trace
    inside: float = 1e-8  # ||P_Xbar psi|| below this means psi lies in H_X
    pnt: float = 1e-10  # nonterminating probability treated as zero
    solve_residual: float = 1e-6  # f_solve failure threshold

    def replace(self, **changes: float) -> "Tolerances":
        return dataclasses.replace(self, **changes)


def parse_overrides(text: str) -> dict[str, float]:
    """Parse ``key=value`` pairs separated by commas."""
    names = {f.name for f in dataclasses.fields(Tolerances)}
    out: dict[str, float] = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        key, sep, value = chunk.partition("=")
        key = key.strip()
        if not sep or key not in names:
            raise ValueError(f"bad {ENV_VAR} entry {chunk!r}; known keys: {sorted(names)}")
        out[key] = float(value)
    return out


def get_tolerances() -> Tolerances:
    """Defaults with any ``QLOOP_TOL`` overrides applied."""
    text = os.environ.get(ENV_VAR, "")
    return Tolerances(**parse_overrides(text)) if text else Tolerances()


DEFAULT = Tolerances()


def resolve(tol: Tolerances | None) -> Tolerances:
    return get_tolerances() if tol is None else tol
