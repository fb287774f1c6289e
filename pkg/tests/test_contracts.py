import itertools
import random
import zlib

import pytest
from hypothesis import given, settings, strategies as st

from wiremach import graphs as g
from wiremach.contracts import (Contract, ContractViolation, compose_contract,
                                compose_contract_bruteforce, compose_contracted, contained_in,
                                contract_from_sets, contracted_pair, full_contract, image_contract,
                                is_restriction_closed, machine_pair, make_contract,
                                response_predicate, tensor_contract, two_trues_contract, validates)
from wiremach.generators import graph_type_pool, random_box, random_graph_machine, random_wd
from wiremach.graphs import paths
from wiremach.spans import FINSET, make_span, map_machine
from wiremach.wiring import Box, FiniteSet, GraphType, WiringError, identity

seeds = st.integers(0, 2**32 - 1)

Bool = FiniteSet("Bool", ("T", "F"))
E = Box([("i", Bool)], [("o", Bool)], "E")
KBool = GraphType(g.complete(("T", "F")))
EK = Box([("i", KBool)], [("o", KBool)], "E")


def relation_machine(pairs):
    """K of the finite-set machine whose states are the allowed (in, out) pairs."""
    S = tuple(pairs)
    return map_machine("K", make_span(FINSET, E, S, lambda s: (s[0],), lambda s: (s[1],)))


emitter = relation_machine(itertools.product("TF", "TF"))
quiet = relation_machine([("T", "F"), ("F", "F")])


def salted(salt, keep=4):
    """Deterministic pseudo-random predicate on pairs."""
    return lambda a, b: zlib.crc32(repr((a, b)).encode()) % (keep + 1) != salt % (keep + 1)


def small_box(rng, label="A"):
    pool = graph_type_pool(rng, 2, 2, 2)
    return random_box(rng, pool, label, 1, 1, 1, 1), pool


def test_full_contract_counts():
    c = full_contract(EK, 4)
    assert c.sizes() == [4 ** (n + 1) for n in range(5)]
    assert is_restriction_closed(c)


def test_two_trues_contract_shape():
    c = two_trues_contract(EK, 6)
    assert c.sizes()[:6] == [4 ** (n + 1) for n in range(6)]
    assert c.sizes()[6] < 4 ** 7
    assert is_restriction_closed(c)


def test_window_shortcut_matches_full_check():
    fast = response_predicate("T", "F", 2, 5)
    slow = lambda a, b: fast(a, b)
    assert make_contract(EK, fast, 6).allowed == make_contract(EK, slow, 6).allowed


def test_response_predicate_by_hand():
    K = KBool.graph
    pred = response_predicate("T", "F", 2, 5)
    pth = lambda s: next(x for x in paths(K, len(s) - 1) if "".join(x.vertices) == s)
    assert pred((pth("TTTTTTT"),), (pth("TTTTTTF"),))
    assert not pred((pth("TTTTTTT"),), (pth("TTTTTTT"),))
    assert pred((pth("TFTFTFT"),), (pth("TTTTTTT"),))
    # the response must come after the trigger, not during it
    assert not pred((pth("TTTTTTT"),), (pth("FTTTTTT"),))


def test_false_at_length_zero_empties_everything():
    c = make_contract(EK, lambda a, b: a[0].length > 0, 3)
    assert c.sizes() == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        make_contract(EK, lambda a, b: True, -1)


def test_validation_of_emitter_and_quiet():
    c = two_trues_contract(EK, 8)
    v = validates(emitter, c)
    assert not v
    x, pair = v.witness
    assert x.length == 6
    assert "".join(pair[0][0].vertices[:2]) == "TT"
    assert "F" not in pair[1][0].vertices[2:]
    assert validates(quiet, c)
    # the emitter can also print T forever under T input, a length-8 violation
    K = KBool.graph
    allT = next(x for x in paths(K, 8) if set(x.vertices) == {"T"})
    assert ((allT,), (allT,)) not in c.allowed[8]
    run = next(x for x in paths(emitter.state, 8) if set(x.vertices) == {("T", "T")})
    assert machine_pair(emitter, run) == ((allT,), (allT,))
    assert validates(emitter, c, horizon=5)


def test_empty_machine_validates_anything():
    m = relation_machine([])
    c = make_contract(EK, lambda a, b: False, 4)
    assert validates(m, c)
    assert not validates(quiet, c)


def test_identity_wiring_keeps_contract(rng):
    for _ in range(10):
        box, _ = small_box(rng)
        c = make_contract(box, salted(rng.randrange(5)), 4)
        assert compose_contract(identity(box), c).allowed == c.allowed


@given(seeds)
@settings(max_examples=40)
def test_composed_contract_matches_bruteforce(seed):
    rng = random.Random(seed)
    box, pool = small_box(rng)
    phi = random_wd(rng, box, pool, "P", max_extra_in=1, max_out=2, p_feedback=0.7)
    c = make_contract(box, salted(rng.randrange(5)), 3)
    assert compose_contract(phi, c).allowed == compose_contract_bruteforce(phi, c).allowed


@given(seeds)
@settings(max_examples=30)
def test_composition_is_monotone_and_keeps_closure(seed):
    rng = random.Random(seed)
    box, pool = small_box(rng)
    phi = random_wd(rng, box, pool, "P", max_extra_in=1, max_out=2, p_feedback=0.7)
    p1, p2 = salted(rng.randrange(5)), salted(rng.randrange(5))
    c_small = make_contract(box, lambda a, b: p1(a, b) and p2(a, b), 4)
    c_big = make_contract(box, p1, 4)
    assert contained_in(c_small, c_big)
    k_small, k_big = compose_contract(phi, c_small), compose_contract(phi, c_big)
    assert contained_in(k_small, k_big)
    assert is_restriction_closed(k_big)


@given(seeds)
@settings(max_examples=30)
def test_validation_is_monotone_in_horizon(seed):
    rng = random.Random(seed)
    box, _ = small_box(rng)
    m = random_graph_machine(rng, box)
    c = make_contract(box, salted(rng.randrange(5)), 4)
    results = [validates(m, c, h).ok for h in range(5)]
    assert results == sorted(results, reverse=True)


@given(seeds)
@settings(max_examples=30)
def test_contracted_composition(seed):
    rng = random.Random(seed)
    box, pool = small_box(rng)
    m = random_graph_machine(rng, box)
    img = image_contract(m, 4)
    extra = salted(rng.randrange(5))
    c = make_contract(box, lambda a, b: (a, b) in img.allowed[_len(a)] or extra(a, b), 4)
    cm = contracted_pair(m, c)
    phi = random_wd(rng, box, pool, "P", max_extra_in=1, max_out=2, p_feedback=0.7)
    out = compose_contracted(phi, cm)
    assert validates(out.machine, out.contract)
    assert out.machine.box == phi.outer == out.contract.box


def _len(side):
    return side[0].length


def test_violating_pair_is_rejected():
    with pytest.raises(ContractViolation) as err:
        contracted_pair(emitter, two_trues_contract(EK, 6))
    assert err.value.witness[0].length == 6


def test_image_contract_is_closed(rng):
    for _ in range(10):
        box, _ = small_box(rng)
        m = random_graph_machine(rng, box)
        img = image_contract(m, 4)
        assert is_restriction_closed(img)
        assert validates(m, img)


def test_contract_from_sets_closes_downward():
    K = KBool.graph
    germs = {((g.germ(a),), (g.germ(b),)) for a in "TF" for b in "TF" if (a, b) != ("T", "T")}
    steps = {((x,), (y,)) for x in paths(K, 1) for y in paths(K, 1)}
    c = contract_from_sets(EK, [germs, steps])
    assert is_restriction_closed(c)
    assert len(c.allowed[1]) == 16 - 7


def test_tensor_contract_sizes():
    c1, c2 = full_contract(EK, 2), two_trues_contract(EK, 2)
    EK2 = Box(EK.inputs, EK.outputs, "E2")
    t = tensor_contract(c1, Contract(EK2, c2.horizon, c2.allowed))
    assert t.sizes() == [a * b for a, b in zip(c1.sizes(), c2.sizes())]


def test_contracts_need_graph_ports():
    with pytest.raises(WiringError):
        full_contract(E, 2)


def test_machine_pair_splits_ports():
    x = paths(emitter.state, 2)[0]
    a, b = machine_pair(emitter, x)
    assert a[0].vertices == tuple(v[0] for v in x.vertices)
    assert b[0].vertices == tuple(v[1] for v in x.vertices)


@given(seeds)
@settings(max_examples=30)
def test_image_matches_enumeration(seed):
    rng = random.Random(seed)
    box, _ = small_box(rng)
    m = random_graph_machine(rng, box)
    img = image_contract(m, 4)
    for n in range(5):
        assert img.allowed[n] == {machine_pair(m, x) for x in paths(m.state, n)}
