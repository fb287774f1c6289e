import random

import pytest
from hypothesis import given, strategies as st

from wiremach.generators import finite_types, random_box, random_wd
from wiremach.wiring import (EMPTY_BOX, Box, EuclideanSpace, FiniteSet, GraphType, InnerOut, OuterIn,
                             TimedAlphabet, WiringDiagram, WiringError, compose_wd, flatten_operadic,
                             identity, input_gather, output_gather, route_inputs, route_outputs,
                             substitute, tensor_box, tensor_boxes, tensor_wd, validate_wiring, wire)
from wiremach import graphs as g

bit = FiniteSet("bit", (0, 1))
tri = FiniteSet("tri", ("a", "b", "c"))

seeds = st.integers(0, 2**32 - 1)


def chain(rng, n=3):
    types = finite_types(rng, rng.randint(1, 3), 3)
    X = random_box(rng, types, "X", 3, 3)
    out, cur = [], X
    for i in range(n):
        wd = random_wd(rng, cur, types, label=f"Y{i}")
        out.append(wd)
        cur = wd.outer
    return out


# -- port types ------------------------------------------------------------

def test_port_types_structural_equality():
    assert FiniteSet("bit", (0, 1)) == bit
    assert FiniteSet("bit", (1, 0)) != bit
    assert EuclideanSpace(2) == EuclideanSpace(2)
    assert GraphType(g.complete((0, 1))) == GraphType(g.complete((0, 1)))
    assert TimedAlphabet(("x",)) != TimedAlphabet(("y",))


def test_port_type_invariants():
    with pytest.raises(ValueError):
        FiniteSet("dup", (1, 1))
    with pytest.raises(ValueError):
        EuclideanSpace(-1)
    with pytest.raises(ValueError):
        Box([("a", bit), ("a", bit)], [], "B")


# -- validation ------------------------------------------------------------

def test_identity_validates():
    X = Box([("a", bit), ("b", tri)], [("c", bit)], "X")
    assert validate_wiring(identity(X)).ok


def test_feedback_type_mismatch_names_port():
    X = Box([("a", bit)], [("c", tri)], "X")
    wd = WiringDiagram(X, Box((), (), "Z"), {"a": InnerOut("c")}, {})
    rep = validate_wiring(wd)
    assert not rep.ok
    assert rep.problems[0][:3] == ("type mismatch", "inner input", "a")


def test_missing_inner_input_reported():
    X = Box([("a", bit), ("b", bit)], [], "X")
    Y = Box([("y", bit)], [], "Y")
    rep = validate_wiring(WiringDiagram(X, Y, {"a": OuterIn("y")}, {}))
    assert ("missing", "inner input", "b") in rep.problems


def test_dangling_outer_output_reported():
    X = Box([], [("c", bit)], "X")
    Y = Box([], [("z", bit)], "Y")
    rep = validate_wiring(WiringDiagram(X, Y, {}, {"z": "nope"}))
    assert rep.problems[0][:3] == ("dangling", "outer output", "z")


# -- category laws ---------------------------------------------------------

@given(seeds)
def test_unit_laws(seed):
    (phi,) = chain(random.Random(seed), 1)
    assert compose_wd(identity(phi.outer), phi) == phi
    assert compose_wd(phi, identity(phi.inner)) == phi


@given(seeds)
def test_associativity(seed):
    phi, psi, omega = chain(random.Random(seed), 3)
    left = compose_wd(compose_wd(omega, psi), phi)
    right = compose_wd(omega, compose_wd(psi, phi))
    assert left == right
    assert validate_wiring(left).ok


def test_composite_box_mismatch():
    phi, psi = chain(random.Random(3), 2)
    with pytest.raises(WiringError):
        compose_wd(phi, psi) if phi.outer != psi.outer else compose_wd(phi, phi)


# -- tensor ----------------------------------------------------------------

def test_tensor_with_empty_box():
    X = Box([("a", bit)], [("c", tri)], "X")
    T = tensor_box(X, EMPTY_BOX)
    assert [(p.name, p.type) for p in T.inputs] == [("X.a", bit)]
    assert [(p.name, p.type) for p in T.outputs] == [("X.c", tri)]


def test_tensor_of_identities_is_identity():
    X = Box([("a", bit)], [("c", tri)], "X")
    Y = Box([("b", tri)], [("d", bit)], "Y")
    assert tensor_wd(identity(X), identity(Y)) == identity(tensor_box(X, Y))


@given(seeds)
def test_interchange(seed):
    rng = random.Random(seed)
    types = finite_types(rng, 2, 3)
    X1, X2 = random_box(rng, types, "X1"), random_box(rng, types, "X2")
    phi1 = random_wd(rng, X1, types, label="Y1")
    phi2 = random_wd(rng, X2, types, label="Y2")
    psi1 = random_wd(rng, phi1.outer, types, label="Z1")
    psi2 = random_wd(rng, phi2.outer, types, label="Z2")
    lhs = compose_wd(tensor_wd(psi1, psi2), tensor_wd(phi1, phi2))
    rhs = tensor_wd(compose_wd(psi1, phi1), compose_wd(psi2, phi2))
    assert lhs == rhs


def test_tensor_labels_must_differ():
    X = Box([("a", bit)], [], "X")
    with pytest.raises(WiringError):
        tensor_boxes([X, X])


# -- operadic flattening ---------------------------------------------------

def test_flatten_single_box_unchanged():
    X = Box([("a", bit)], [("c", bit)], "X")
    flat = flatten_operadic([X], identity(X))
    assert flat.diagram == identity(X)


def test_flatten_nullary_closed():
    Z = Box((), (), "Z")
    flat = flatten_operadic([], WiringDiagram(tensor_boxes([]), Z, {}, {}))
    assert flat.boxes == () and flat.diagram.phi_in == () and flat.diagram.phi_out == ()


def five_box():
    def B(label, n, m):
        return Box([(f"in{i}", bit) for i in range(1, n + 1)], [(f"out{i}", bit) for i in range(1, m + 1)], label)
    boxes = [B("X1", 2, 2), B("X2", 3, 3), B("X3", 2, 1), B("X4", 2, 2), B("X5", 1, 2)]
    Y = B("Y", 2, 2)
    feeds = {"X1.in1": "X5.out2", "X1.in2": "Y.in1", "X2.in1": "X1.out2", "X2.in2": "Y.in2",
             "X2.in3": "X2.out3", "X3.in1": "X1.out1", "X3.in2": "X2.out1", "X4.in1": "X5.out1",
             "X4.in2": "X2.out2", "X5.in1": "X4.out1"}
    return wire(boxes, Y, feeds, {"out1": "X3.out1", "out2": "X4.out2"})


def test_five_box_picture():
    flat = five_box()
    wd = flat.diagram
    assert validate_wiring(wd).ok
    pin = wd.phi_in_map
    assert pin["X2.in3"] == InnerOut("X2.out3")
    assert pin["X1.in2"] == OuterIn("in1")
    assert wd.phi_out_map == {"out1": "X3.out1", "out2": "X4.out2"}
    assert flat.provenance_map["X4.in1"] == (3, "in1")
    assert len(wd.inner.inputs) == 10 and len(wd.inner.outputs) == 10


def test_substitute_nested_equals_flat():
    # Inner group {A, B} wired into G, then G and C wired into Y
    A = Box([("a", bit)], [("b", bit)], "A")
    B = Box([("b", bit)], [("c", bit)], "B")
    C = Box([("c", bit)], [("d", bit)], "C")
    G = Box([("a", bit)], [("c", bit)], "G")
    Y = Box([("y", bit)], [("z", bit)], "Y")
    inner = wire([A, B], G, {"A.a": "G.a", "B.b": "A.b"}, {"c": "B.c"})
    outer = wire([G, C], Y, {"G.a": "Y.y", "C.c": "G.c"}, {"z": "C.d"})
    nested = substitute(outer, 0, inner)
    flat = wire([A, B, C], Y, {"A.a": "Y.y", "B.b": "A.b", "C.c": "B.c"}, {"z": "C.d"})
    assert nested.diagram == flat.diagram
    assert [b.label for b in nested.boxes] == ["A", "B", "C"]


# -- routing ---------------------------------------------------------------

def test_route_identity():
    X = Box([("a", bit), ("b", tri)], [("c", bit)], "X")
    assert route_inputs(identity(X), {"a": 1, "b": "c"}, {"c": 0}) == {"a": 1, "b": "c"}


def test_route_full_feedback():
    X = Box([("a", bit)], [("c", bit)], "X")
    wd = WiringDiagram(X, Box((), (), "Z"), {"a": InnerOut("c")}, {})
    assert route_inputs(wd, {}, {"c": 1}) == {"a": 1}


def test_route_series():
    flat = wire([Box([("a", bit)], [("s", bit)], "D"), Box([("b", bit)], [("t", bit)], "N")],
                Box([("a", bit)], [("o", bit)], "Y"), {"D.a": "Y.a", "N.b": "D.s"}, {"o": "N.t"})
    wd = flat.diagram
    r = route_inputs(wd, {"a": 0}, {"D.s": 1, "N.t": 0})
    assert r == {"D.a": 0, "N.b": 1}
    assert route_outputs(wd, {"D.s": 1, "N.t": 0}) == {"o": 0}


def test_route_rejects_foreign_value():
    X = Box([("a", bit)], [("c", bit)], "X")
    with pytest.raises(WiringError):
        route_inputs(identity(X), {"a": 7}, {"c": 0})


@given(seeds)
def test_routing_through_composite_is_two_stage(seed):
    rng = random.Random(seed)
    phi, psi = chain(rng, 2)
    omega = compose_wd(psi, phi)
    for _ in range(10):
        z = {p.name: rng.choice(p.type.elements) for p in psi.outer.inputs}
        x_out = {p.name: rng.choice(p.type.elements) for p in phi.inner.outputs}
        y_out = route_outputs(phi, x_out)
        y_in = route_inputs(psi, z, y_out)
        assert route_inputs(omega, z, x_out) == route_inputs(phi, y_in, x_out)
        assert route_outputs(omega, x_out) == route_outputs(psi, y_out)


@given(seeds)
def test_gathers_agree_with_named_routing(seed):
    rng = random.Random(seed)
    (wd,) = chain(rng, 1)
    y = tuple(rng.choice(p.type.elements) for p in wd.outer.inputs)
    x = tuple(rng.choice(p.type.elements) for p in wd.inner.outputs)
    named = route_inputs(wd, dict(zip(wd.outer.input_names, y)), dict(zip(wd.inner.output_names, x)))
    full = y + x
    assert tuple(full[i] for i in input_gather(wd)) == tuple(named[n] for n in wd.inner.input_names)
    assert tuple(x[i] for i in output_gather(wd)) == \
        tuple(route_outputs(wd, dict(zip(wd.inner.output_names, x)))[n] for n in wd.outer.output_names)
