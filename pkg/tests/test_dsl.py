import numpy as np
import pytest

from qloop import dsl
from qloop.gates import GATES, rx, ry, rz
from qloop.linalg import is_unitary
from qloop.termination import classify_loop
from qloop.walk import gen_walk

H_LOOP = "loop l { dims:[2]; gate U = H; measure M = computational; guard X = {0}; input: |0>; }"


def gate_of(expr: str, dims="[2]") -> np.ndarray:
    src = dsl.parse(f"loop g {{ dims: {dims}; gate U = {expr}; measure M = computational; guard X = {{}}; }}")
    return dsl.elaborate(src)[0].U


def test_parse_minimal_loop():
    src = dsl.parse(H_LOOP)
    assert src.name == "l"
    assert src.dims == (2,)
    assert set(src.guard) == {"0"}
    loop, state = dsl.elaborate(src)
    assert np.allclose(loop.U, GATES["H"])
    assert np.allclose(state.data, [1, 0])


def test_semicolons_and_comments_are_optional():
    text = """
    // header comment
    loop l {
        dims: [2]        # register layout
        gate U = H
        measure M = computational
        guard X = {0}
    }"""
    assert dsl.parse(text) == dsl.parse(H_LOOP.replace("input: |0>; ", ""))


def test_controlled_x_is_cnot():
    assert np.allclose(gate_of("controlled(X)", "[2, 2]"), GATES["CNOT"])
    assert np.allclose(gate_of("controlled([[0, 1], [1, 0]])", "[2, 2]"), GATES["CNOT"])


def test_rotation_gates():
    assert np.allclose(gate_of("Ry(pi)"), [[0, -1], [1, 0]])
    assert np.allclose(gate_of("Rz(pi/2)"), rz(np.pi / 2))
    assert np.allclose(gate_of("Rx(0.3)"), rx(0.3))
    assert np.allclose(gate_of("phase(pi) * Ry(2*pi/3)"), -ry(2 * np.pi / 3))


def test_kron_and_products():
    U = gate_of("kron(H, I2)", "[2, 2]")
    assert U.shape == (4, 4) and is_unitary(U)
    assert np.allclose(gate_of("H * H"), np.eye(2))
    assert np.allclose(gate_of("S * S"), GATES["Z"])


def test_inline_matrix_with_imaginary_literals():
    assert np.allclose(gate_of("[[0, -1i], [1i, 0]]"), GATES["Y"])
    assert np.allclose(gate_of("[[1, 0], [0, exp(1i*pi/4)]]"), GATES["T"])


def test_kets_per_register():
    src = dsl.parse("loop k { dims: [3, 2]; gate U = I; measure M = computational(0); guard X = {0}; input: |21>; }")
    loop, state = dsl.elaborate(src)
    assert loop.measurement.labels == ("0", "1", "2")
    assert np.argmax(np.abs(state.data)) == 2 * 2 + 1


def test_superposition_and_density_inputs():
    st = dsl.parse_state("(|0> + |1>) / sqrt(2)", (2,))
    assert np.allclose(st.data, [2**-0.5, 2**-0.5])
    rho = dsl.parse_state("[[0.5, 0], [0, 0.5]]", (2,))
    assert rho.kind == "mixed"


def test_observable_measurement_labels():
    text = "loop o { dims: [2]; gate U = X; measure M = [[1, 0], [0, -1]]; guard X = {e0}; }"
    loop, _ = dsl.elaborate(dsl.parse(text))
    assert loop.measurement.labels == ("e0", "e1")
    assert loop.measurement.values == (1.0, -1.0)
    assert classify_loop(loop).kind == "Terminating"


def test_projectors_measurement():
    text = """loop p { dims: [2]; gate U = H;
        measure M = projectors { up = [[1, 0], [0, 0]] @ 1, down = [[0, 0], [0, 1]] @ -1 };
        guard X = {up}; }"""
    loop, _ = dsl.elaborate(dsl.parse(text))
    assert loop.measurement.labels == ("up", "down")
    assert classify_loop(loop).kind == "AlmostTerminating"


def test_guard_label_out_of_range_is_positioned():
    text = "loop l {\n  dims: [2];\n  gate U = H;\n  measure M = computational;\n  guard X = {2};\n}"
    with pytest.raises(dsl.ElaborationError) as info:
        dsl.elaborate(dsl.parse(text))
    assert info.value.pos.line == 5
    assert "outcomes are" in str(info.value)


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("loop l { dims: [2]; gate U = ; }", 1, 30),
        ("loop l {\n  dims: [2]\n  gate U = H +* X\n}", 3, 15),
        ("loop { }", 1, 6),
        ("loop l { dims: [2]; gate U = H; measure M = computational; guard X = {0} ", 1, 74),
    ],
)
def test_syntax_errors_carry_positions(text, line, col):
    with pytest.raises(dsl.ParseError) as info:
        dsl.parse(text)
    assert (info.value.pos.line, info.value.pos.col) == (line, col)


def test_lexical_error():
    with pytest.raises(dsl.ParseError) as info:
        dsl.parse("loop l { gate U = H $ }")
    assert info.value.pos.col == 21


def test_unknown_gate():
    with pytest.raises(dsl.ElaborationError, match="FOO"):
        gate_of("FOO")


def test_dimension_mismatch():
    with pytest.raises(dsl.ElaborationError):
        gate_of("CNOT", "[2]")
    with pytest.raises(dsl.ElaborationError):
        gate_of("kron(H, H)", "[3]")


def test_non_unitary_gate_is_positioned():
    text = "loop l {\n  dims: [2];\n  gate U = [[1, 0], [0, 2]];\n  measure M = computational;\n  guard X = {0};\n}"
    with pytest.raises(dsl.ElaborationError) as info:
        dsl.elaborate(dsl.parse(text))
    assert info.value.pos.line == 3


def test_missing_declarations():
    with pytest.raises(dsl.DSLError):
        dsl.elaborate(dsl.parse("loop l { dims: [2]; measure M = computational; guard X = {0}; }"))


def test_bad_input_state():
    with pytest.raises(dsl.ElaborationError):
        dsl.parse_state("|0> + |1>", (2,))
    with pytest.raises(dsl.ElaborationError):
        dsl.parse_state("|00>", (2,))


def test_fixtures_round_trip(fixtures_dir):
    files = sorted(fixtures_dir.glob("*.ql"))
    assert len(files) >= 20
    for path in files:
        src = dsl.parse_file(path)
        again = dsl.parse(dsl.format_source(src))
        assert again == src, path.name
        a, _ = dsl.elaborate(src)
        b, _ = dsl.elaborate(again)
        assert np.array_equal(a.U, b.U)


def test_number_and_matrix_expressions_round_trip(rng):
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    text = dsl.format_expr(dsl.matrix_expr(A))
    src = dsl.parse(f"loop m {{ gate U = {text}; measure M = computational; guard X = {{}}; }}")
    # the gate is not unitary, so evaluate the expression without elaborating the loop
    assert src.gate == dsl.matrix_expr(A)
    state = dsl.parse_state(dsl.format_expr(dsl.matrix_expr(np.diag([0.25, 0.75]))), (2,))
    assert np.array_equal(state.data, np.diag([0.25, 0.75]))


def test_walk_generator():
    src = gen_walk(4)
    loop, state = dsl.elaborate(src)
    assert loop.U.shape == (8, 8) and is_unitary(loop.U)
    assert classify_loop(loop).kind == "AlmostTerminating"
    assert np.allclose(state.data, np.eye(8)[0])
    assert set(gen_walk(3).guard) == {"0", "2"}


def test_walk_rejects_small_cycles():
    with pytest.raises(ValueError):
        gen_walk(2)


def test_walk_fixture_matches_generator(fixtures_dir):
    assert dsl.parse_file(fixtures_dir / "walk_4.ql") == gen_walk(4)
