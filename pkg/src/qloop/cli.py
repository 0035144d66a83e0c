"""Command-line interface: ``qloop {analyze,simulate,fn,perturb,walk,validate}``.

Exit codes: 0 success, 1 diagnostics or usage errors, 2 numerical or
internal failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import report
from .config import Tolerances, get_tolerances
from .dsl import (
    DSLError,
    LoopSource,
    Projectors,
    elaborate,
    format_source,
    matrix_expr,
    number_expr,
    parse_file,
    parse_state,
)
from .function import NumericalFailure, compute_function
from .loop import QuantumLoop, StateInput, run_trace, validate_loop
from .perturbation import DegenerateSpectrumError, UnsupportedGuardError, perturb_measurement, perturb_unitary
from .termination import ContractionError
from .walk import gen_walk

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qloop", description="Analyze quantum while-loops written in the .ql language.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="loop and input verdicts, p_nt and F")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("file", nargs="?", type=Path)
    src.add_argument("--batch", type=Path, metavar="DIR", help="analyze every .ql file in DIR")
    a.add_argument("--json", action="store_true")
    a.add_argument("--input", help="override the input, e.g. '|0>' or '(|0> + |1>) / sqrt(2)'")
    a.add_argument("--method", choices=["auto", "series", "solve", "normal"], default="auto")
    a.add_argument("--jobs", type=int, default=None, help="worker threads for --batch")

    s = sub.add_parser("simulate", help="unwind the loop step by step")
    s.add_argument("file", type=Path)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--input")
    s.add_argument("--json", action="store_true")

    f = sub.add_parser("fn", help="the function F computed by the loop")
    f.add_argument("file", type=Path)
    f.add_argument("--method", choices=["auto", "series", "solve", "normal"], default="auto")
    f.add_argument("--input")
    f.add_argument("--json", action="store_true")

    q = sub.add_parser("perturb", help="nearby loop that almost terminates")
    q.add_argument("file", type=Path)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--target", choices=["unitary", "measurement"], required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("-o", "--output", type=Path, help="where to write the perturbed loop")
    q.add_argument("--json", action="store_true")

    w = sub.add_parser("walk", help="write the coined-walk loop on an n-cycle")
    w.add_argument("--n", type=int, required=True)
    w.add_argument("-o", "--output", type=Path, required=True)

    v = sub.add_parser("validate", help="structural diagnostics only")
    v.add_argument("file", type=Path)
    v.add_argument("--json", action="store_true")
    return p


def _fmt(z: complex) -> str:
    z = complex(z)
    re_, im = round(z.real, 6) + 0.0, round(z.imag, 6) + 0.0
    if im == 0:
        return f"{re_:g}"
    if re_ == 0:
        return f"{im:g}i"
    return f"{re_:g}{im:+g}i"


def _matrix_lines(a: np.ndarray, indent: str = "  ") -> list[str]:
    cells = [[_fmt(x) for x in row] for row in a]
    width = max((len(c) for row in cells for c in row), default=0)
    return [indent + "  ".join(c.rjust(width) for c in row) for row in cells]


def _load(path: Path, tol: Tolerances, input_text: str | None) -> tuple[LoopSource, QuantumLoop, StateInput | None]:
    src = parse_file(path)
    loop, state = elaborate(src, tol)
    if input_text is not None:
        state = parse_state(input_text, loop.subsystem_dims, tol)
    return src, loop, state


def _require_input(state: StateInput | None, command: str) -> StateInput:
    if state is None:
        raise UsageError(f"{command} needs an input: add 'input: ...;' to the file or pass --input")
    return state


def _print_analysis(rep: dict) -> None:
    lp, v = rep["loop"], rep["verdict"]
    print(f"loop {lp['name']}  dims {lp['dims']}  guard {{{', '.join(lp['guard'])}}}  dim H_X = {lp['guard_dim']}")
    for d in rep["diagnostics"]:
        print(f"{d['severity']}: {d['message']}")
    units = ", ".join(_fmt(complex(*z)) for z in v["unit_eigenvalues"]) or "none"
    print(f"verdict: {v['kind']}")
    print(f"  spectral radius {v['spectral_radius']:.6g}, stable radius {v['stable_radius']:.6g}")
    print(f"  unit-modulus eigenvalues: {units}")
    inp = rep["input"]
    if inp is None:
        return
    line = f"input: {inp['verdict']}  p_nt = {inp['p_nt']:.6g}"
    if inp["at_step"] is not None:
        line += f"  (terminates by step {inp['at_step']})"
    if inp["marginal"]:
        line += "  [marginal]"
    print(line)
    F = inp["F"]
    print(f"F(rho) via {F['method']}, trace {F['trace']:.6g}:")
    mat = np.array([[complex(*c) for c in row] for row in F["matrix"]])
    print("\n".join(_matrix_lines(mat)))


def _analyze_one(path: Path, args, tol: Tolerances) -> tuple[int, dict | None, str | None]:
    try:
        _, loop, state = _load(path, tol, args.input)
        return EXIT_OK, report.analysis_report(loop, state, tol, args.method), None
    except DSLError as exc:
        return EXIT_DIAGNOSTICS, None, f"{path}: {exc}"
    except (NumericalFailure, ContractionError, np.linalg.LinAlgError) as exc:
        return EXIT_NUMERICAL, None, f"{path}: numerical failure: {exc}"


def _cmd_analyze(args, tol: Tolerances) -> int:
    if args.batch is None:
        code, rep, err = _analyze_one(args.file, args, tol)
        if err:
            print(err, file=sys.stderr)
            return code
        if args.json:
            print(report.dumps(rep))
        else:
            _print_analysis(rep)
        return code
    files = sorted(args.batch.glob("*.ql"))
    if not files:
        raise UsageError(f"no .ql files in {args.batch}")
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(lambda f: _analyze_one(f, args, tol), files))
    worst = EXIT_OK
    for f, (code, rep, err) in zip(files, results):
        worst = max(worst, code)
        if err:
            print(err, file=sys.stderr)
            continue
        if args.json:
            print(report.dumps({**rep, "source": str(f)}, indent=None))
        else:
            print(f"== {f.name}")
            _print_analysis(rep)
    return worst


def _cmd_simulate(args, tol: Tolerances) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    _, loop, state = _load(args.file, tol, args.input)
    state = _require_input(state, "simulate")
    trace = run_trace(loop, state, args.steps, keep_states=False, tol=tol)
    if args.json:
        print(report.dumps(report.simulation_report(loop, trace)))
        return EXIT_OK
    print(f"{'n':>5} {'p_T':>12} {'p_NT':>12} {'p_NT^(n+)':>12} {'formula':>12}")
    for s in trace.steps:
        print(f"{s.n:>5} {s.p_T:>12.6g} {s.p_NT:>12.6g} {s.p_NT_cumulative:>12.6g} {s.p_NT_formula:>12.6g}")
    if trace.truncated_at < args.steps:
        print(f"continuing branch vanished after step {trace.truncated_at}")
    return EXIT_OK


def _cmd_fn(args, tol: Tolerances) -> int:
    _, loop, state = _load(args.file, tol, args.input)
    state = _require_input(state, "fn")
    F = compute_function(loop, state, args.method, tol)
    if args.json:
        print(report.dumps(report.function_report(loop, F)))
        return EXIT_OK
    print(f"F(rho) via {F.method}, trace {F.trace_value:.6g}:")
    print("\n".join(_matrix_lines(F.matrix)))
    return EXIT_OK


def _perturbed_source(src: LoopSource, loop: QuantumLoop, target: str) -> LoopSource:
    if target == "unitary":
        return replace(src, gate=matrix_expr(loop.U), name=f"{src.name}_perturbed")
    meas = loop.measurement
    outcomes = tuple(
        (label, matrix_expr(P), number_expr(value))
        for label, P, value in zip(meas.labels, meas.projectors, meas.values)
    )
    return replace(src, measure=Projectors(outcomes), name=f"{src.name}_perturbed")


def _cmd_perturb(args, tol: Tolerances) -> int:
    if not args.eps > 0:
        raise UsageError("--eps must be positive")
    src, loop, _ = _load(args.file, tol, None)
    fn = perturb_unitary if args.target == "unitary" else perturb_measurement
    try:
        result = fn(loop, args.eps, args.seed, tol)
    except (UnsupportedGuardError, DegenerateSpectrumError) as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    out = args.output or args.file.with_name(f"{args.file.stem}_perturbed.ql")
    out.write_text(format_source(_perturbed_source(src, result.loop, args.target)), encoding="utf-8")
    if args.json:
        print(report.dumps(report.perturbation_report(loop, result, args.target, args.eps, str(out))))
    else:
        print(f"perturbed {args.target}: distance {result.distance:.12g} (eps {args.eps:g})")
        print(f"verdict: {result.verified_verdict.kind} (spectral radius {result.verified_verdict.spectral_radius:.10g})")
        print(f"rounds: {result.steps_taken}, attempts: {result.attempts}")
        print(f"wrote {out}")
    return EXIT_OK


def _cmd_walk(args, tol: Tolerances) -> int:
    if args.n < 3:
        raise UsageError("--n must be at least 3")
    args.output.write_text(format_source(gen_walk(args.n)), encoding="utf-8")
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_validate(args, tol: Tolerances) -> int:
    loop, diags = None, []
    try:
        src = parse_file(args.file)
        loop, _ = elaborate(src, tol)
        diags = [report.diagnostic_json(d) for d in validate_loop(loop, tol)]
    except DSLError as exc:
        diags = [{"severity": "error", "code": type(exc).__name__, "message": exc.message,
                  "residual": None, "line": exc.pos.line, "column": exc.pos.col}]
    rep = report.validation_report(loop, diags)
    if args.json:
        print(report.dumps(rep))
    else:
        for d in diags:
            where = f"{args.file}:{d['line']}:{d['column']}: " if "line" in d else f"{args.file}: "
            print(f"{where}{d['severity']}: {d['message']}")
        if rep["valid"]:
            print(f"{args.file}: ok")
    return EXIT_OK if rep["valid"] else EXIT_DIAGNOSTICS


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "fn": _cmd_fn,
    "perturb": _cmd_perturb,
    "walk": _cmd_walk,
    "validate": _cmd_validate,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        try:
            tol = get_tolerances()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return _COMMANDS[args.command](args, tol)
    except UsageError as exc:
        print(f"qloop: error: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except DSLError as exc:
        print(f"qloop: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except OSError as exc:
        print(f"qloop: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTICS
    except Exception as exc:  # numerical or internal failure
        print(f"qloop: failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
