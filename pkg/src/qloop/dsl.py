"""The ``.ql`` loop language: lexer, parser, pretty-printer and elaboration.

A file holds one loop::

    # Hadamard loop
    loop h_loop {
        dims: [2];
        gate U = H;
        measure M = computational;
        guard X = {0};
        input: |0>;
    }

Grammar::

    loop     := "loop" NAME "{" decl* "}"
    decl     := "dims" ":" "[" INT ("," INT)* "]"
              | "gate" NAME "=" expr
              | "measure" NAME "=" ("computational" ["(" INT ("," INT)* ")"]
                                    | "projectors" "{" label "=" expr "@" expr ("," ...)* "}"
                                    | expr)
              | "guard" NAME "=" "{" [label ("," label)*] "}"
              | "input" ":" expr
              each optionally followed by ";"
    expr     := term (("+" | "-") term)*
    term     := unary (("*" | "/") unary)*
    unary    := "-" unary | primary
    primary  := NUMBER | KET | NAME | NAME "(" [expr ("," expr)*] ")"
              | "(" expr ")" | "[" expr ("," expr)* "]"

Numbers take an optional ``i`` suffix for imaginary literals.  ``*`` is the
matrix product when both sides are matrices or vectors and scaling otherwise.
Comments start with ``#`` or ``//``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from . import gates
from .config import Tolerances, resolve
from .linalg import dagger
from .loop import InvalidStateError, ProjectiveMeasurement, QuantumLoop, StateInput, validate_loop

__all__ = [
    "Pos",
    "DSLError",
    "ParseError",
    "ElaborationError",
    "Num",
    "Name",
    "Ket",
    "Call",
    "ListExpr",
    "BinOp",
    "Neg",
    "Computational",
    "Observable",
    "Projectors",
    "LoopSource",
    "tokenize",
    "parse",
    "parse_file",
    "format_source",
    "format_expr",
    "number_expr",
    "matrix_expr",
    "elaborate",
    "load",
    "parse_state",
]


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


_NOWHERE = Pos(0, 0)


class DSLError(ValueError):
    """An error tied to a position in the source."""

    def __init__(self, message: str, pos: Pos | None = None):
        self.message = message
        self.pos = pos or _NOWHERE
        where = f"line {self.pos.line}, column {self.pos.col}: " if pos else ""
        super().__init__(where + message)


class ParseError(DSLError):
    pass


class ElaborationError(DSLError):
    pass


# lexer

_TOKEN_SPEC = [
    ("SKIP", r"[ \t\r]+|\#[^\n]*|//[^\n]*"),
    ("NEWLINE", r"\n"),
    ("KET", r"\|[^|>\s]+>"),
    ("NUMBER", r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?:i(?![A-Za-z0-9_]))?"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("STRING", r'"[^"\n]*"'),
    ("PUNCT", r"[{}\[\]();:,=*/+\-@]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{rx})" for name, rx in _TOKEN_SPEC))
_KEYWORDS = {"loop", "dims", "gate", "measure", "guard", "input", "computational", "projectors"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: Pos


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", Pos(line, i - line_start + 1))
        kind = m.lastgroup
        if kind == "NEWLINE":
            line, line_start = line + 1, m.end()
        elif kind != "SKIP":
            tokens.append(Token(kind, m.group(), Pos(line, m.start() - line_start + 1)))
        i = m.end()
    tokens.append(Token("EOF", "", Pos(line, i - line_start + 1)))
    return tokens


# AST


@dataclass(frozen=True)
class Num:
    text: str
    pos: Pos = field(default=_NOWHERE, compare=False)

    @property
    def value(self) -> complex:
        if self.text.endswith("i"):
            return complex(0, float(self.text[:-1]))
        return complex(float(self.text))


@dataclass(frozen=True)
class Name:
    id: str
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Ket:
    label: str
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class ListExpr:
    items: tuple["Expr", ...]
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: Pos = field(default=_NOWHERE, compare=False)


Expr = Union[Num, Name, Ket, Call, ListExpr, BinOp, Neg]


@dataclass(frozen=True)
class Computational:
    registers: tuple[int, ...] | None = None
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Observable:
    expr: Expr
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class Projectors:
    """Explicit outcome list: ``(label, projector expr, value expr)`` triples."""

    outcomes: tuple[tuple[str, Expr, Expr], ...]
    pos: Pos = field(default=_NOWHERE, compare=False)


@dataclass(frozen=True)
class LoopSource:
    """Parsed loop declaration."""

    name: str
    gate: Expr
    measure: Computational | Observable | Projectors
    guard: tuple[str, ...]
    dims: tuple[int, ...] | None = None
    input: Expr | None = None
    gate_name: str = "U"
    measure_name: str = "M"
    guard_name: str = "X"
    pos: Pos = field(default=_NOWHERE, compare=False)
    decl_pos: dict = field(default_factory=dict, compare=False, hash=False)


# parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("PUNCT", "NAME") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {what}, found {found!r}", self.tok.pos)
        return self.advance()

    def integer(self) -> int:
        t = self.expect_kind("NUMBER", "an integer")
        if not t.text.isdigit():
            raise ParseError(f"expected an integer, found {t.text!r}", t.pos)
        return int(t.text)

    def int_list(self, close: str) -> tuple[int, ...]:
        out = [self.integer()]
        while self.at(","):
            self.advance()
            out.append(self.integer())
        self.expect(close)
        return tuple(out)

    def loop(self) -> LoopSource:
        start = self.expect("loop").pos
        name = self.expect_kind("NAME", "a loop name").text
        self.expect("{")
        found: dict[str, object] = {}
        names: dict[str, str] = {}
        where: dict[str, Pos] = {}
        while not self.at("}"):
            t = self.tok
            if t.kind != "NAME" or t.text not in ("dims", "gate", "measure", "guard", "input"):
                raise ParseError(
                    f"expected a declaration (dims, gate, measure, guard, input), found {t.text or 'end of input'!r}",
                    t.pos,
                )
            if t.text in found:
                raise ParseError(f"duplicate {t.text} declaration", t.pos)
            self.advance()
            where[t.text] = t.pos
            if t.text == "dims":
                self.expect(":")
                self.expect("[")
                found["dims"] = self.int_list("]")
            elif t.text == "input":
                self.expect(":")
                found["input"] = self.expr()
            else:
                names[t.text] = self.expect_kind("NAME", f"a {t.text} name").text
                self.expect("=")
                if t.text == "gate":
                    found["gate"] = self.expr()
                elif t.text == "measure":
                    found["measure"] = self.measure()
                else:
                    found["guard"] = self.guard()
            while self.at(";"):
                self.advance()
        end = self.expect("}")
        if self.tok.kind != "EOF":
            raise ParseError("unexpected text after the loop", self.tok.pos)
        for required in ("gate", "measure", "guard"):
            if required not in found:
                raise ParseError(f"loop {name!r} has no {required} declaration", end.pos)
        return LoopSource(
            name=name,
            gate=found["gate"],
            measure=found["measure"],
            guard=found["guard"],
            dims=found.get("dims"),
            input=found.get("input"),
            gate_name=names["gate"],
            measure_name=names["measure"],
            guard_name=names["guard"],
            pos=start,
            decl_pos=where,
        )

    def measure(self) -> Computational | Observable | Projectors:
        t = self.tok
        if t.kind == "NAME" and t.text == "projectors":
            self.advance()
            self.expect("{")
            outcomes = []
            while not self.at("}"):
                label = self.label()
                self.expect("=")
                proj = self.expr()
                self.expect("@")
                outcomes.append((label, proj, self.expr()))
                if not self.at("}"):
                    self.expect(",")
            self.expect("}")
            return Projectors(tuple(outcomes), t.pos)
        if t.kind == "NAME" and t.text == "computational":
            self.advance()
            regs = None
            if self.at("("):
                self.advance()
                regs = self.int_list(")")
            return Computational(regs, t.pos)
        return Observable(self.expr(), t.pos)

    def guard(self) -> tuple[str, ...]:
        self.expect("{")
        labels: list[str] = []
        while not self.at("}"):
            labels.append(self.label())
            if not self.at("}"):
                self.expect(",")
        self.expect("}")
        return tuple(labels)

    def label(self) -> str:
        t = self.advance()
        if t.kind in ("NUMBER", "NAME"):
            return t.text
        if t.kind == "STRING":
            return t.text[1:-1]
        raise ParseError(f"expected an outcome label, found {t.text or 'end of input'!r}", t.pos)

    def expr(self) -> Expr:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance()
            node = BinOp(op.text, node, self.term(), op.pos)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance()
            node = BinOp(op.text, node, self.unary(), op.pos)
        return node

    def unary(self) -> Expr:
        if self.at("-"):
            t = self.advance()
            return Neg(self.unary(), t.pos)
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return Num(t.text, t.pos)
        if t.kind == "KET":
            self.advance()
            return Ket(t.text[1:-1], t.pos)
        if t.kind == "NAME":
            if t.text in _KEYWORDS:
                raise ParseError(f"{t.text!r} is a keyword", t.pos)
            self.advance()
            if self.at("("):
                self.advance()
                args: list[Expr] = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args), t.pos)
            return Name(t.text, t.pos)
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if self.at("["):
            self.advance()
            items = [self.expr()]
            while self.at(","):
                self.advance()
                items.append(self.expr())
            self.expect("]")
            return ListExpr(tuple(items), t.pos)
        raise ParseError(f"expected an expression, found {t.text or 'end of input'!r}", t.pos)


def parse(text: str) -> LoopSource:
    """Parse ``.ql`` source text.

    Raises
    ------
    ParseError
        With the line and column of the offending token.
    """
    return _Parser(text).loop()


def parse_file(path) -> LoopSource:
    return parse(Path(path).read_text(encoding="utf-8"))


# pretty-printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Num):
        return e.text
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Ket):
        return f"|{e.label}>"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, ListExpr):
        return "[" + ", ".join(format_expr(a) for a in e.items) + "]"
    if isinstance(e, Neg):
        return "-" + format_expr(e.operand, 3)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        # left-associative: the right operand needs parentheses at equal precedence
        text = f"{format_expr(e.left, p)} {e.op} {format_expr(e.right, p + 1)}"
        return f"({text})" if p < prec else text
    raise TypeError(f"not an expression: {e!r}")


def _format_label(label: str) -> str:
    if re.fullmatch(r"\d+|[A-Za-z_][A-Za-z0-9_]*", label) and label not in _KEYWORDS:
        return label
    return f'"{label}"'


def format_source(src: LoopSource) -> str:
    """Canonical source text; parsing it gives back an equal ``LoopSource``."""
    lines = [f"loop {src.name} {{"]
    if src.dims is not None:
        lines.append(f"    dims: [{', '.join(str(d) for d in src.dims)}];")
    lines.append(f"    gate {src.gate_name} = {format_expr(src.gate)};")
    if isinstance(src.measure, Computational):
        regs = src.measure.registers
        m = "computational" + (f"({', '.join(str(r) for r in regs)})" if regs is not None else "")
    elif isinstance(src.measure, Projectors):
        items = [
            f"        {_format_label(l)} = {format_expr(p)} @ {format_expr(v)}"
            for l, p, v in src.measure.outcomes
        ]
        m = "projectors {\n" + ",\n".join(items) + "\n    }"
    else:
        m = format_expr(src.measure.expr)
    lines.append(f"    measure {src.measure_name} = {m};")
    lines.append(f"    guard {src.guard_name} = {{{', '.join(_format_label(l) for l in src.guard)}}};")
    if src.input is not None:
        lines.append(f"    input: {format_expr(src.input)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def number_expr(z: complex) -> Expr:
    """Exact source expression for a complex number."""
    z = complex(z)

    def real(x: float) -> Expr:
        return Neg(Num(repr(-x))) if x < 0 or (x == 0 and math.copysign(1, x) < 0) else Num(repr(x))

    if z.imag == 0:
        return real(z.real)
    im = Num(repr(abs(z.imag)) + "i")
    if z.real == 0:
        return Neg(im) if z.imag < 0 else im
    return BinOp("-" if z.imag < 0 else "+", real(z.real), im)


def matrix_expr(a) -> ListExpr:
    """Matrix literal reproducing ``a`` exactly."""
    a = np.asarray(a, dtype=complex)
    return ListExpr(tuple(ListExpr(tuple(number_expr(x) for x in row)) for row in a))


# elaboration


def _scalar(v, node) -> complex:
    if isinstance(v, np.ndarray):
        raise ElaborationError("expected a number, got an array", node.pos)
    return complex(v)


def _real(v, node) -> float:
    z = _scalar(v, node)
    if abs(z.imag) > 1e-12:
        raise ElaborationError("expected a real number", node.pos)
    return z.real


def _positive_int(v, node) -> int:
    x = _real(v, node)
    if x != int(x) or x < 1:
        raise ElaborationError("expected a positive integer", node.pos)
    return int(x)


def _matrix(v, node) -> np.ndarray:
    if not isinstance(v, np.ndarray) or v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ElaborationError("expected a square matrix", node.pos)
    return v


_SCALAR_FUNCS: dict[str, Callable[[complex], complex]] = {
    "sqrt": lambda z: complex(np.sqrt(z)),
    "exp": lambda z: complex(np.exp(z)),
    "cos": lambda z: complex(np.cos(z)),
    "sin": lambda z: complex(np.sin(z)),
}


class _Evaluator:
    def __init__(self, dims: tuple[int, ...] | None):
        self.dims = dims

    def ket(self, node: Ket) -> np.ndarray:
        if self.dims is None:
            raise ElaborationError("kets need a dims declaration", node.pos)
        dims, label = self.dims, node.label
        if "_" in label:
            parts = label.split("_")
        elif len(dims) == 1:
            parts = [label]
        elif len(label) == len(dims):
            parts = list(label)
        else:
            raise ElaborationError(
                f"ket |{label}> does not match registers {list(dims)}; separate digits with '_'",
                node.pos,
            )
        if len(parts) != len(dims):
            raise ElaborationError(f"ket |{label}> names {len(parts)} registers, dims has {len(dims)}", node.pos)
        vecs = []
        for part, d in zip(parts, dims):
            if part in ("+", "-") and d == 2:
                vecs.append(np.array([1, 1 if part == "+" else -1], dtype=complex) / np.sqrt(2))
            elif part.isdigit() and part == str(int(part)) and int(part) < d:
                v = np.zeros(d, dtype=complex)
                v[int(part)] = 1
                vecs.append(v)
            else:
                raise ElaborationError(f"ket component {part!r} is not a basis state of a {d}-level register", node.pos)
        return gates.kron(*vecs)

    def eval(self, e: Expr):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Ket):
            return self.ket(e)
        if isinstance(e, Name):
            if e.id == "pi":
                return math.pi
            if e.id == "i":
                return 1j
            if e.id in gates.GATES:
                return gates.GATES[e.id].copy()
            if e.id == "I":
                if self.dims is None:
                    raise ElaborationError("'I' needs a dims declaration; use I(n)", e.pos)
                return gates.identity(math.prod(self.dims))
            raise ElaborationError(f"unknown gate or constant {e.id!r}", e.pos)
        if isinstance(e, Neg):
            return -self.eval(e.operand)
        if isinstance(e, ListExpr):
            items = [self.eval(x) for x in e.items]
            shapes = {np.shape(x) for x in items}
            if len(shapes) != 1 or len(next(iter(shapes))) > 1:
                raise ElaborationError("rows of a matrix literal must be numbers or equal-length lists", e.pos)
            return np.array(items, dtype=complex)
        if isinstance(e, BinOp):
            return self.binop(e)
        if isinstance(e, Call):
            return self.call(e)
        raise TypeError(f"not an expression: {e!r}")

    def binop(self, e: BinOp):
        a, b = self.eval(e.left), self.eval(e.right)
        a_arr, b_arr = isinstance(a, np.ndarray), isinstance(b, np.ndarray)
        try:
            if e.op in "+-":
                if a_arr != b_arr or (a_arr and a.shape != b.shape):
                    raise ElaborationError(f"operands of {e.op!r} have different shapes", e.pos)
                return a + b if e.op == "+" else a - b
            if e.op == "/":
                return a / _scalar(b, e.right)
            if a_arr and b_arr:
                if a.ndim == 1:
                    raise ElaborationError("a vector can only be multiplied by a number", e.pos)
                return a @ b
            return a * b
        except ValueError as exc:
            if isinstance(exc, ElaborationError):
                raise
            raise ElaborationError(f"shape mismatch in {e.op!r}: {exc}", e.pos) from None

    def call(self, e: Call):
        f, args = e.func, [self.eval(a) for a in e.args]

        def arity(n: int) -> None:
            if len(args) != n:
                raise ElaborationError(f"{f} takes {n} argument(s), got {len(args)}", e.pos)

        if f in ("Rx", "Ry", "Rz", "phase"):
            arity(1)
            theta = _real(args[0], e.args[0])
            return {"Rx": gates.rx, "Ry": gates.ry, "Rz": gates.rz, "phase": gates.phase}[f](theta)
        if f in _SCALAR_FUNCS:
            arity(1)
            return _SCALAR_FUNCS[f](_scalar(args[0], e.args[0]))
        if f == "kron":
            if len(args) < 2:
                raise ElaborationError("kron takes at least two arguments", e.pos)
            for a, node in zip(args, e.args):
                if not isinstance(a, np.ndarray):
                    raise ElaborationError("kron arguments must be matrices or vectors", node.pos)
            return gates.kron(*args)
        if f == "controlled":
            arity(1)
            return gates.controlled(_matrix(args[0], e.args[0]))
        if f == "dagger":
            arity(1)
            return dagger(_matrix(args[0], e.args[0]))
        if f == "I":
            arity(1)
            return gates.identity(_positive_int(args[0], e.args[0]))
        if f == "shift":
            arity(1)
            return gates.cycle_shift(_positive_int(args[0], e.args[0]))
        raise ElaborationError(f"unknown function {f!r}", e.pos)


def _loop_dims(src: LoopSource, U: np.ndarray) -> tuple[int, ...]:
    K = U.shape[0]
    if src.dims is None:
        return (K,)
    if math.prod(src.dims) != K:
        raise ElaborationError(
            f"gate is {K}x{K} but dims {list(src.dims)} give dimension {math.prod(src.dims)}",
            src.decl_pos.get("gate", src.pos),
        )
    return src.dims


_DIAGNOSTIC_DECL = {
    "non-unitary": "gate",
    "shape": "gate",
    "dims": "measure",
    "projector": "measure",
    "completeness": "measure",
    "orthogonality": "measure",
    "measurement": "measure",
    "guard": "guard",
}


def elaborate(src: LoopSource, tol: Tolerances | None = None) -> tuple[QuantumLoop, StateInput | None]:
    """Turn a parsed loop into matrices.

    Raises
    ------
    ElaborationError
        For unknown names, shape mismatches, and any error-level
        diagnostic from :func:`~qloop.loop.validate_loop`, positioned at
        the responsible declaration.
    """
    tol = resolve(tol)
    ev = _Evaluator(src.dims)
    U = _matrix(ev.eval(src.gate), src.gate)
    dims = _loop_dims(src, U)
    ev.dims = dims

    def where(key: str) -> Pos:
        return src.decl_pos.get(key, src.pos)

    if isinstance(src.measure, Computational):
        try:
            meas = ProjectiveMeasurement.computational(dims, src.measure.registers)
        except ValueError as exc:
            raise ElaborationError(str(exc), src.measure.pos) from None
    elif isinstance(src.measure, Projectors):
        labels, projs, values = [], [], []
        for label, p, v in src.measure.outcomes:
            P = _matrix(ev.eval(p), p)
            if P.shape != U.shape:
                raise ElaborationError(f"projector {label!r} has shape {P.shape}, the gate {U.shape}", p.pos)
            labels.append(label)
            projs.append(P)
            values.append(_real(ev.eval(v), v))
        try:
            meas = ProjectiveMeasurement(tuple(labels), tuple(projs), tuple(values))
        except ValueError as exc:
            raise ElaborationError(str(exc), src.measure.pos) from None
    else:
        M = _matrix(ev.eval(src.measure.expr), src.measure.expr)
        if M.shape[0] != U.shape[0]:
            raise ElaborationError(
                f"observable is {M.shape[0]}x{M.shape[0]} but the gate is {U.shape[0]}x{U.shape[0]}",
                where("measure"),
            )
        try:
            meas = ProjectiveMeasurement.from_observable(M, tol.spec)
        except ValueError as exc:
            raise ElaborationError(str(exc), where("measure")) from None

    loop = QuantumLoop(U, meas, frozenset(src.guard), dims, src.name)
    for d in validate_loop(loop, tol):
        if d.severity == "error":
            message = d.message
            if d.code == "guard":
                message += f" (outcomes are {list(meas.labels)})"
            raise ElaborationError(message, where(_DIAGNOSTIC_DECL.get(d.code, "gate")))

    state = None
    if src.input is not None:
        state = _state(ev, src.input, loop.dim, tol)
    return loop, state


def parse_state(text: str, dims, tol: Tolerances | None = None) -> StateInput:
    """Evaluate a standalone ket or density-matrix expression for registers ``dims``."""
    tol = resolve(tol)
    parser = _Parser(text)
    node = parser.expr()
    if parser.tok.kind != "EOF":
        raise ParseError("unexpected text after the input expression", parser.tok.pos)
    return _state(_Evaluator(tuple(dims)), node, math.prod(dims), tol)


def _state(ev: _Evaluator, node: Expr, K: int, tol: Tolerances) -> StateInput:
    value = ev.eval(node)
    if not isinstance(value, np.ndarray) or value.ndim not in (1, 2):
        raise ElaborationError("input must be a ket or a density matrix", node.pos)
    state = StateInput.pure(value) if value.ndim == 1 else StateInput.mixed(value)
    if state.dim != K:
        raise ElaborationError(f"input has dimension {state.dim}, the loop {K}", node.pos)
    try:
        return state.validate(max(tol.struct, 1e-9))
    except InvalidStateError as exc:
        raise ElaborationError(str(exc), node.pos) from None


def load(path, tol: Tolerances | None = None) -> tuple[QuantumLoop, StateInput | None]:
    """Parse and elaborate a ``.ql`` file."""
    return elaborate(parse_file(path), tol)
