"""Coined quantum walk on an n-cycle with an absorbing boundary at position 1."""

from __future__ import annotations

from .dsl import Call, Computational, Ket, LoopSource, Name, Num, BinOp

__all__ = ["gen_walk"]


def gen_walk(n: int) -> LoopSource:
    """Walk loop on positions ``0..n-1`` with a qubit coin.

    The body is ``shift(n) * kron(I(n), H)``: toss the coin, then move left
    on ``|0>`` and right on ``|1>``.  Only the position register is measured
    and the walk continues while the walker is away from position 1.
    """
    if int(n) != n or n < 3:
        raise ValueError(f"the walk needs n >= 3 positions, got {n}")
    n = int(n)
    gate = BinOp(
        "*",
        Call("shift", (Num(str(n)),)),
        Call("kron", (Call("I", (Num(str(n)),)), Name("H"))),
    )
    return LoopSource(
        name=f"walk_{n}",
        gate=gate,
        measure=Computational((0,)),
        guard=tuple(str(i) for i in range(n) if i != 1),
        dims=(n, 2),
        input=Ket("00"),
    )
