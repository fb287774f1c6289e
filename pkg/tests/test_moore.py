import random

import pytest
from hypothesis import given, strategies as st

from wiremach.generators import finite_types, random_box, random_moore, random_network, random_wd
from wiremach.moore import (MachineError, MooreMachine, dds_apply, dds_compose, dds_run, dds_tensor,
                            network_oracle, trivial_machine)
from wiremach.wiring import (Box, FiniteSet, InnerOut, WiringDiagram, compose_wd, identity, tensor_wd,
                             wire)

bit = FiniteSet("bit", (0, 1))
seeds = st.integers(0, 2**32 - 1)

D = Box([("a", bit)], [("s", bit)], "D")
N = Box([("b", bit)], [("t", bit)], "N")
Y = Box([("a", bit)], [("o", bit)], "Y")


def unit_delay():
    return MooreMachine.from_functions(D, (0, 1), lambda x, s: x[0], lambda s: (s,))


def not_delay():
    return MooreMachine.from_functions(N, (0, 1), lambda x, s: 1 - x[0], lambda s: (s,))


def series():
    return wire([D, N], Y, {"D.a": "Y.a", "N.b": "D.s"}, {"o": "N.t"})


def outputs(trace):
    return [o for _, o in trace]


def test_tables_must_be_total():
    with pytest.raises(MachineError):
        MooreMachine(D, (0, 1), {((0,), 0): 0}, {0: (0,), 1: (1,)})
    with pytest.raises(MachineError):
        MooreMachine(D, (0,), {((0,), 0): 0, ((1,), 0): 5}, {0: (0,)})


def test_identity_keeps_tables():
    m = unit_delay()
    assert dds_apply(identity(D), m) == m


def test_series_composite_tables():
    flat = series()
    c = dds_apply(flat.diagram, dds_tensor(unit_delay(), not_delay()))
    for s1 in (0, 1):
        for s2 in (0, 1):
            assert c.rdt[(s1, s2)] == (s2,)
            for a in (0, 1):
                assert c.upd[((a,), (s1, s2))] == (a, 1 - s1)


def test_full_feedback_freezes_unit_delay():
    Z = Box((), (), "Z")
    wd = WiringDiagram(D, Z, {"a": InnerOut("s")}, {})
    c = dds_apply(wd, unit_delay())
    for s in (0, 1):
        assert c.upd[((), s)] == s


def test_tensor_with_trivial_machine():
    m = unit_delay()
    t = dds_tensor(m, trivial_machine())
    assert len(t.states) == len(m.states)
    for s in m.states:
        assert t.rdt[(s, ())] == m.rdt[s]
        for x in ((0,), (1,)):
            assert t.upd[(x, (s, ()))] == (m.upd[(x, s)], ())


def test_tensor_state_count(rng):
    types = finite_types(rng)
    m1 = random_moore(rng, random_box(rng, types, "A"))
    m2 = random_moore(rng, random_box(rng, types, "B"))
    assert len(dds_tensor(m1, m2).states) == len(m1.states) * len(m2.states)


def test_run_conventions():
    m = unit_delay()
    assert dds_run(m, [], 0) == [(0, (0,))]
    assert outputs(dds_run(m, [(1,), (0,)], 0)) == [(0,), (1,), (0,)]
    with pytest.raises(MachineError):
        dds_run(m, [(2,)], 0)
    with pytest.raises(MachineError):
        dds_run(m, [], 7)


def test_series_run():
    c = dds_compose(series().diagram, [unit_delay(), not_delay()])
    assert outputs(dds_run(c, [(1,), (1,), (0,)], (0, 0))) == [(0,), (1,), (0,), (0,)]


def test_compose_matches_apply_of_tensor():
    flat = series()
    ms = [unit_delay(), not_delay()]
    assert dds_compose(flat.diagram, ms) == dds_apply(flat.diagram, dds_tensor(*ms))


def test_oracle_single_box():
    m = unit_delay()
    ins = [(1,), (0,), (1,), (1,)]
    assert network_oracle([D], [m], identity(D), ins, [0]) == \
        [((s,), o) for s, o in dds_run(m, ins, 0)]


def test_oracle_series():
    flat = series()
    ms = [unit_delay(), not_delay()]
    ins = [(1,), (1,), (0,)]
    assert network_oracle([D, N], ms, flat.diagram, ins, (0, 0)) == \
        dds_run(dds_compose(flat.diagram, ms), ins, (0, 0))


def test_oracle_three_boxes_with_feedback():
    rng = random.Random(7)
    t3 = FiniteSet("t3", (0, 1, 2))
    A = Box([("u", t3), ("v", bit)], [("w", t3)], "A")
    B = Box([("w", t3)], [("x", bit), ("y", t3)], "B")
    C = Box([("y", t3)], [("z", bit)], "C")
    O = Box([("u", t3)], [("out", bit)], "O")
    flat = wire([A, B, C], O, {"A.u": "O.u", "A.v": "C.z", "B.w": "A.w", "C.y": "B.y"}, {"out": "B.x"})
    ms = [random_moore(rng, b) for b in (A, B, C)]
    ins = [(rng.randrange(3),) for _ in range(20)]
    s0 = tuple(m.states[0] for m in ms)
    assert network_oracle([A, B, C], ms, flat.diagram, ins, s0) == \
        dds_run(dds_compose(flat.diagram, ms), ins, s0)


@given(seeds)
def test_oracle_equivalence_random(seed):
    rng = random.Random(seed)
    boxes, ms, wd = random_network(rng)
    ins = [tuple(rng.choice(p.type.elements) for p in wd.outer.inputs) for _ in range(20)]
    s0 = tuple(rng.choice(m.states) for m in ms)
    assert network_oracle(boxes, ms, wd, ins, s0) == dds_run(dds_compose(wd, ms), ins, s0)


@given(seeds)
def test_functoriality(seed):
    rng = random.Random(seed)
    types = finite_types(rng, 2, 3)
    X = random_box(rng, types, "X")
    m = random_moore(rng, X)
    phi = random_wd(rng, X, types, label="Y")
    psi = random_wd(rng, phi.outer, types, label="Z")
    assert dds_apply(compose_wd(psi, phi), m) == dds_apply(psi, dds_apply(phi, m))


@given(seeds)
def test_tensor_naturality(seed):
    rng = random.Random(seed)
    types = finite_types(rng, 2, 3)
    X1, X2 = random_box(rng, types, "X1"), random_box(rng, types, "X2")
    m1, m2 = random_moore(rng, X1, 3), random_moore(rng, X2, 3)
    phi1 = random_wd(rng, X1, types, label="Y1")
    phi2 = random_wd(rng, X2, types, label="Y2")
    assert dds_apply(tensor_wd(phi1, phi2), dds_tensor(m1, m2)) == \
        dds_tensor(dds_apply(phi1, m1), dds_apply(phi2, m2))
