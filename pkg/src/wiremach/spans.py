"""Machines as spans ``A <- S -> B`` in finite sets or finite graphs.

A machine in a box has a state object ``S`` with maps to the product
``A`` of its input port objects and the product ``B`` of its output
port objects.  Wiring composes machines by pullback; in graphs this is
done separately on nodes and on edges.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

from . import graphs as g
from .graphs import Graph, GraphHom, Path
from .moore import MooreMachine, input_space
from .wiring import (Box, FiniteSet, GraphType, WiringDiagram, gather,
                     input_gather, map_box_types, output_gather, require_valid, tensor_box)


class SpanError(ValueError):
    pass


# -- finite sets -----------------------------------------------------------

@dataclass(frozen=True)
class FinFunction:
    dom: tuple
    cod: tuple
    mapping: tuple

    def __post_init__(self):
        m = self.mapping
        if isinstance(m, dict):
            m = tuple(m[x] for x in self.dom)
        object.__setattr__(self, "mapping", tuple(m))
        if len(self.mapping) != len(self.dom):
            raise SpanError("function must be total")

    @cached_property
    def table(self) -> dict:
        return dict(zip(self.dom, self.mapping))

    def __call__(self, x):
        return self.table[x]

    def is_valid(self) -> bool:
        cod = set(self.cod)
        return all(y in cod for y in self.mapping)


class FinSetUniverse:
    name = "finset"

    def port_object(self, t):
        if not isinstance(t, FiniteSet):
            raise SpanError(f"finite-set universe needs FiniteSet ports, got {t!r}")
        return t.elements

    def product(self, objs):
        return tuple(itertools.product(*objs))

    def terminal(self):
        return ((),)

    def identity(self, X):
        return FinFunction(X, X, X)

    def compose(self, g_, f):
        """``g_ . f``."""
        return FinFunction(f.dom, g_.cod, tuple(g_(y) for y in f.mapping))

    def pullback(self, f, h):
        idx = {}
        for b, c in zip(h.dom, h.mapping):
            idx.setdefault(c, []).append(b)
        P = tuple((a, b) for a, c in zip(f.dom, f.mapping) for b in idx.get(c, ()))
        return P, FinFunction(P, f.dom, tuple(a for a, _ in P)), FinFunction(P, h.dom, tuple(b for _, b in P))

    def image(self, f):
        hit = set(f.mapping)
        return tuple(y for y in f.cod if y in hit)

    def equal(self, X, Y):
        return X == Y

    def morphism(self, dom, cod, fn):
        return FinFunction(dom, cod, tuple(fn(x) for x in dom))

    def is_iso(self, f):
        return f.is_valid() and len(set(f.mapping)) == len(f.dom) == len(f.cod)


class GraphUniverse:
    name = "graph"

    def port_object(self, t):
        if not isinstance(t, GraphType):
            raise SpanError(f"graph universe needs GraphType ports, got {t!r}")
        return t.graph

    def product(self, objs):
        return g.product(objs)

    def terminal(self):
        return g.terminal()

    def identity(self, X):
        return g.identity_hom(X)

    def compose(self, g_, f):
        return f.then(g_)

    def pullback(self, f, h):
        return g.pullback(f, h)

    def image(self, f):
        return g.image(f)

    def equal(self, X, Y):
        return X == Y

    def morphism(self, dom, cod, node_fn, edge_fn):
        return GraphHom(dom, cod, tuple(node_fn(v) for v in dom.nodes), tuple(edge_fn(e) for e in dom.edges))

    def is_iso(self, f):
        return g.is_isomorphism(f)


FINSET = FinSetUniverse()
GRAPH = GraphUniverse()


# -- machines --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MachineSpan:
    """A span ``in_map: S -> A``, ``out_map: S -> B`` inhabiting ``box``."""
    universe: Any
    box: Box
    in_map: Any
    out_map: Any

    @property
    def state(self):
        return self.in_map.dom

    @property
    def A(self):
        return self.in_map.cod

    @property
    def B(self):
        return self.out_map.cod

    def problems(self) -> list:
        U = self.universe
        out = []
        if self.in_map.dom != self.out_map.dom:
            out.append("legs have different domains")
        if self.A != port_product(U, self.box.inputs):
            out.append("input leg does not land in the input ports' product")
        if self.B != port_product(U, self.box.outputs):
            out.append("output leg does not land in the output ports' product")
        if not self.in_map.is_valid():
            out.append("input leg is not a morphism")
        if not self.out_map.is_valid():
            out.append("output leg is not a morphism")
        return out

    def __repr__(self):
        return f"MachineSpan({self.universe.name}, {self.box.label}, {self.state!r})"


def port_product(U, ports):
    return U.product([U.port_object(p.type) for p in ports])


def make_span(U, box: Box, S, in_fn, out_fn, in_edge_fn=None, out_edge_fn=None) -> MachineSpan:
    """Build a machine from element-level functions.

    For graphs ``in_fn``/``out_fn`` act on nodes and the ``*_edge_fn``
    act on edges.
    """
    A, B = port_product(U, box.inputs), port_product(U, box.outputs)
    if U is FINSET:
        return MachineSpan(U, box, U.morphism(S, A, in_fn), U.morphism(S, B, out_fn))
    return MachineSpan(U, box, U.morphism(S, A, in_fn, in_edge_fn), U.morphism(S, B, out_fn, out_edge_fn))


def _types(ports):
    return [p.type for p in ports]


def _solve(states, pin, pout, gi, ny, y_domains):
    """Elements (s, y) of the pullback, found by propagating wire constraints."""
    out = []
    for s in states:
        a, b = pin(s), pout(s)
        y = [None] * ny
        ok = True
        for i, j in enumerate(gi):
            if j < ny:
                if y[j] is None:
                    y[j] = a[i]
                elif y[j] != a[i]:
                    ok = False
                    break
            elif a[i] != b[j - ny]:
                ok = False
                break
        if not ok:
            continue
        free = [j for j in range(ny) if y[j] is None]
        for choice in itertools.product(*(y_domains[j] for j in free)):
            for j, c in zip(free, choice):
                y[j] = c
            out.append((s, tuple(y)))
    return out


def compose_machine(phi: WiringDiagram, m: MachineSpan) -> MachineSpan:
    """Pull ``m`` back along the input routing and push outputs forward.

    The new state object has elements ``(s, y)`` with
    ``p_in(s) = route(y, p_out(s))``; its input leg is ``y`` and its
    output leg is the routed ``p_out(s)``.
    """
    require_valid(phi)
    if _types(m.box.inputs) != _types(phi.inner.inputs) or _types(m.box.outputs) != _types(phi.inner.outputs):
        raise SpanError("machine ports do not match the diagram's inner box")
    U = m.universe
    gi, go = input_gather(phi), output_gather(phi)
    ny = len(phi.outer.inputs)
    Yobjs = [U.port_object(p.type) for p in phi.outer.inputs]
    A2, B2 = port_product(U, phi.outer.inputs), port_product(U, phi.outer.outputs)
    S = m.state
    if U is FINSET:
        T = tuple(_solve(S, m.in_map, m.out_map, gi, ny, Yobjs))
        qin = FinFunction(T, A2, tuple(y for _, y in T))
        qout = FinFunction(T, B2, tuple(gather(m.out_map(s), go) for s, _ in T))
        return MachineSpan(U, phi.outer, qin, qout)
    pin_n, pout_n = m.in_map.nodes, m.out_map.nodes
    pin_e, pout_e = m.in_map.edges, m.out_map.edges
    nodes = _solve(S.nodes, pin_n.__getitem__, pout_n.__getitem__, gi, ny, [G.nodes for G in Yobjs])
    edges = _solve(S.edges, pin_e.__getitem__, pout_e.__getitem__, gi, ny, [G.edges for G in Yobjs])
    src = tuple((S.source(e), tuple(G.source(c) for G, c in zip(Yobjs, y))) for e, y in edges)
    tgt = tuple((S.target(e), tuple(G.target(c) for G, c in zip(Yobjs, y))) for e, y in edges)
    T = Graph(tuple(nodes), tuple(edges), src, tgt)
    qin = GraphHom(T, A2, tuple(y for _, y in nodes), tuple(y for _, y in edges))
    qout = GraphHom(T, B2, tuple(gather(pout_n[s], go) for s, _ in nodes),
                    tuple(gather(pout_e[e], go) for e, _ in edges))
    return MachineSpan(U, phi.outer, qin, qout)


def compose_machine_by_pullback(phi: WiringDiagram, m: MachineSpan) -> MachineSpan:
    """Same as :func:`compose_machine`, via the universe's generic pullback.

    Exhaustive over ``prod Y_in x B``; intended as an oracle on small cases.
    """
    require_valid(phi)
    U = m.universe
    gi, go = input_gather(phi), output_gather(phi)
    Ys = [U.port_object(p.type) for p in phi.outer.inputs]
    Bs = [U.port_object(p.type) for p in m.box.outputs]
    ny = len(Ys)
    A2, B2 = port_product(U, phi.outer.inputs), port_product(U, phi.outer.outputs)
    # both sides map into A x B, encoded as one flat tuple a + b
    AB = U.product([U.port_object(p.type) for p in m.box.inputs] + Bs)
    YB = U.product(Ys + Bs)
    if U is FINSET:
        f = U.morphism(m.state, AB, lambda s: m.in_map(s) + m.out_map(s))
        h = U.morphism(YB, AB, lambda z: gather(z, gi) + z[ny:])
        P, p1, p2 = U.pullback(f, h)
        T = tuple((s, z[:ny]) for s, z in P)
        return MachineSpan(U, phi.outer, FinFunction(T, A2, tuple(y for _, y in T)),
                           FinFunction(T, B2, tuple(gather(m.out_map(s), go) for s, _ in T)))
    f = U.morphism(m.state, AB, lambda v: m.in_map.nodes[v] + m.out_map.nodes[v],
                   lambda e: m.in_map.edges[e] + m.out_map.edges[e])
    h = U.morphism(YB, AB, lambda z: gather(z, gi) + z[ny:], lambda z: gather(z, gi) + z[ny:])
    P, _, _ = U.pullback(f, h)
    re = lambda pair: (pair[0], pair[1][:ny])
    T = Graph(tuple(re(x) for x in P.nodes), tuple(re(x) for x in P.edges),
              tuple(re(x) for x in P.src), tuple(re(x) for x in P.tgt))
    qin = GraphHom(T, A2, tuple(y for _, y in T.nodes), tuple(y for _, y in T.edges))
    qout = GraphHom(T, B2, tuple(gather(m.out_map.nodes[s], go) for s, _ in T.nodes),
                    tuple(gather(m.out_map.edges[e], go) for e, _ in T.edges))
    return MachineSpan(U, phi.outer, qin, qout)


def tensor_machine(m1: MachineSpan, m2: MachineSpan) -> MachineSpan:
    if m1.universe is not m2.universe:
        raise SpanError("universe mismatch")
    U = m1.universe
    box = tensor_box(m1.box, m2.box)
    if U is FINSET:
        S = U.product([m1.state, m2.state])
        return make_span(U, box, S, lambda s: m1.in_map(s[0]) + m2.in_map(s[1]),
                         lambda s: m1.out_map(s[0]) + m2.out_map(s[1]))
    S = g.product([m1.state, m2.state])
    return make_span(U, box, S,
                     lambda v: m1.in_map.nodes[v[0]] + m2.in_map.nodes[v[1]],
                     lambda v: m1.out_map.nodes[v[0]] + m2.out_map.nodes[v[1]],
                     lambda e: m1.in_map.edges[e[0]] + m2.in_map.edges[e[1]],
                     lambda e: m1.out_map.edges[e[0]] + m2.out_map.edges[e[1]])


def trivial_span(U=None) -> MachineSpan:
    """Terminal state, no ports: the unit for tensor."""
    U = GRAPH if U is None else U
    box = Box((), (), "I")
    if U is FINSET:
        return make_span(U, box, U.terminal(), lambda s: (), lambda s: ())
    return make_span(U, box, U.terminal(), lambda s: (), lambda s: (), lambda e: (), lambda e: ())


# -- totality and determinism ---------------------------------------------

@dataclass
class TdVerdict:
    h_surjective: bool
    h_injective: bool
    germ_surjective: bool
    germ_injective: bool
    witnesses: dict = field(default_factory=dict)

    @property
    def total(self) -> bool:
        return self.h_surjective

    @property
    def deterministic(self) -> bool:
        return self.h_injective

    def as_dict(self) -> dict:
        return {"h_surjective": self.h_surjective, "h_injective": self.h_injective,
                "germ_surjective": self.germ_surjective, "germ_injective": self.germ_injective,
                "witnesses": {k: repr(v) for k, v in self.witnesses.items()}}


def check_total_det(m: MachineSpan) -> TdVerdict:
    """The h-test ``h(e) = (p_in(e), src(e))`` into ``A_1 x_{A_0} S_0``."""
    p = m.in_map
    S, A = p.dom, p.cod
    target = [(a, s) for s in S.nodes for a in A.out_edges[p.nodes[s]]]
    seen = {}
    wit = {}
    for e in S.edges:
        key = (p.edges[e], S.source(e))
        if key in seen and "h_injective" not in wit:
            wit["h_injective"] = (seen[key], e)
        seen.setdefault(key, e)
    missing = [k for k in target if k not in seen]
    if missing:
        wit["h_surjective"] = missing[0]
    hit = set(p.node_map)
    unhit = [v for v in A.nodes if v not in hit]
    if unhit:
        wit["germ_surjective"] = unhit[0]
    first = {}
    for s in S.nodes:
        a = p.nodes[s]
        if a in first and "germ_injective" not in wit:
            wit["germ_injective"] = (first[a], s)
        first.setdefault(a, s)
    return TdVerdict("h_surjective" not in wit, "h_injective" not in wit,
                     "germ_surjective" not in wit, "germ_injective" not in wit, wit)


def h_test_k(m: MachineSpan, k: int) -> tuple[bool, bool]:
    """The h-test with length-k paths in place of edges."""
    p = m.in_map
    S, A = p.dom, p.cod
    by_start = {}
    for a in g.paths(A, k):
        by_start.setdefault(a.start, []).append(a)
    target = {(a, s) for s in S.nodes for a in by_start.get(p.nodes[s], ())}
    images = [(p.on_path(x), x.start) for x in g.paths(S, k)]
    return target <= set(images), len(set(images)) == len(images)


def is_discrete_opfibration(p: GraphHom) -> bool:
    """Every A-edge out of p(s) lifts to exactly one S-edge out of s."""
    S, A = p.dom, p.cod
    for s in S.nodes:
        c = Counter(p.edges[e] for e in S.out_edges[s])
        wanted = A.out_edges[p.nodes[s]]
        if any(c[a] != 1 for a in wanted) or sum(c.values()) != len(wanted):
            return False
    return True


# -- inertia ---------------------------------------------------------------

@dataclass
class InertiaResult:
    ok: bool
    node_lift: dict = field(default_factory=dict)
    edge_lift: dict = field(default_factory=dict)
    witness: Any = None

    def __bool__(self):
        return self.ok

    def as_hom(self, m: MachineSpan) -> GraphHom:
        """The lift as a hom into Ext_1 B (materializes Ext_1 B)."""
        ext = g.ext_graph(m.B, 1).graph
        return GraphHom(m.state, ext, self.node_lift, self.edge_lift)


def check_inertial(m: MachineSpan) -> InertiaResult:
    """Look for a lift of the output leg through one step of extension.

    A node with out-edges must see the same output edge on all of them,
    and that edge is its lift; any other node is lifted to the first
    B-edge leaving its output germ.
    """
    q = m.out_map
    S, B = q.dom, q.cod
    node_lift = {}
    for s in S.nodes:
        outs = {q.edges[e] for e in S.out_edges[s]}
        if len(outs) > 1:
            es = sorted(S.out_edges[s], key=S.edge_index.__getitem__)
            return InertiaResult(False, witness=("outputs differ on edges leaving node", s, es))
        if outs:
            node_lift[s] = outs.pop()
        else:
            cands = B.out_edges[q.nodes[s]]
            if not cands:
                return InertiaResult(False, witness=("no output edge leaves the germ of node", s))
            node_lift[s] = cands[0]
    edge_lift = {}
    for e in S.edges:
        b1, b2 = q.edges[e], node_lift[S.target(e)]
        edge_lift[e] = Path((B.source(b1), B.target(b1), B.target(b2)), (b1, b2))
    return InertiaResult(True, {s: Path((B.source(b), B.target(b)), (b,)) for s, b in node_lift.items()},
                         edge_lift)


# -- realizations and standard machines ------------------------------------

def k_type(t):
    return GraphType(g.complete(t.elements))


def loop_type(t):
    return GraphType(g.loop(t.elements))


def beta_from_dds(m: MooreMachine) -> MachineSpan:
    """Graph machine whose sections are the runs of a Moore machine.

    Nodes ``(x, s)``; edges ``(x0, s0, x1)`` from ``(x0, s0)`` to
    ``(x1, upd(x0, s0))``.
    """
    box = map_box_types(m.box, k_type)
    X = input_space(m.box)
    nodes = tuple((x, s) for x in X for s in m.states)
    edges = tuple((x0, s0, x1) for x0 in X for s0 in m.states for x1 in X)
    S = Graph(nodes, edges, tuple((x0, s0) for x0, s0, _ in edges),
              tuple((x1, m.upd[(x0, s0)]) for x0, s0, x1 in edges))
    return make_span(GRAPH, box, S,
                     lambda v: v[0],
                     lambda v: m.rdt[v[1]],
                     lambda e: tuple(zip(e[0], e[2])),
                     lambda e: tuple(zip(m.rdt[e[1]], m.rdt[m.upd[(e[0], e[1])]])))


def beta_naturality_witness(phi: WiringDiagram, m: MooreMachine) -> GraphHom:
    """Canonical map from ``compose(K phi, beta m)`` to ``beta(dds_apply(phi, m))``."""
    from .moore import dds_apply
    from .wiring import map_types
    left = compose_machine(map_types(phi, k_type), beta_from_dds(m))
    right = beta_from_dds(dds_apply(phi, m))
    return GraphHom(left.state, right.state,
                    tuple((y, xs[1]) for xs, y in left.state.nodes),
                    tuple((tuple(p[0] for p in y), e[1], tuple(p[1] for p in y))
                          for e, y in left.state.edges))


def delay_discrete(B: Graph, k: int = 1) -> MachineSpan:
    """``B <- Ext_k B -> B`` with input leg rho and output leg lambda."""
    ext = g.ext_graph(B, k)
    box = Box([("in", GraphType(B))], [("out", GraphType(B))], "Delay")
    rho, lam = ext.rho_map, ext.lambda_map
    return make_span(GRAPH, box, ext.graph,
                     lambda v: (rho.nodes[v],), lambda v: (lam.nodes[v],),
                     lambda e: (rho.edges[e],), lambda e: (lam.edges[e],))


def identity_span(box: Box, G: Graph) -> MachineSpan:
    """State G mapping identically to every port (all ports typed G)."""
    return make_span(GRAPH, box, G,
                     lambda v: (v,) * len(box.inputs), lambda v: (v,) * len(box.outputs),
                     lambda e: (e,) * len(box.inputs), lambda e: (e,) * len(box.outputs))


def map_machine(tag: str, m: MachineSpan) -> MachineSpan:
    """Apply the K or Loop functor from finite sets to graphs."""
    if m.universe is not FINSET:
        raise SpanError("map_machine takes a finite-set machine")
    S = m.state
    if tag == "K":
        box = map_box_types(m.box, k_type)
        return make_span(GRAPH, box, g.complete(S), m.in_map, m.out_map,
                         lambda e: tuple(zip(m.in_map(e[0]), m.in_map(e[1]))),
                         lambda e: tuple(zip(m.out_map(e[0]), m.out_map(e[1]))))
    if tag == "Loop":
        box = map_box_types(m.box, loop_type)
        return make_span(GRAPH, box, g.loop(S),
                         lambda v: ((),) * len(box.inputs), lambda v: ((),) * len(box.outputs),
                         m.in_map, m.out_map)
    raise SpanError(f"unknown functor {tag!r}")


def steady_type(t):
    return FiniteSet("steady", t.graph.loops())


def steady_states(m: MachineSpan) -> MachineSpan:
    """Constant sections: loops of the state graph and their images."""
    if m.universe is not GRAPH:
        raise SpanError("steady_states takes a graph machine")
    box = map_box_types(m.box, steady_type)
    L = m.state.loops()
    return make_span(FINSET, box, L, m.in_map.edges.__getitem__, m.out_map.edges.__getitem__)


# -- isomorphism -----------------------------------------------------------

MAX_BLIND_NODES = 8


def _as_hom(m1, m2, witness):
    if isinstance(witness, (GraphHom, FinFunction)):
        return witness
    if m1.universe is FINSET:
        return FinFunction(m1.state, m2.state, tuple(witness(x) for x in m1.state))
    nf, ef = witness
    return GraphHom(m1.state, m2.state, tuple(nf(v) for v in m1.state.nodes),
                    tuple(ef(e) for e in m1.state.edges))


def span_iso_check(m1: MachineSpan, m2: MachineSpan, witness=None) -> bool:
    """Are the two machines isomorphic over their ports?

    With ``witness`` (a hom, a function, or a pair of node/edge
    functions) only that map is checked; otherwise a search is run,
    limited to state graphs of at most 8 nodes.
    """
    if m1.universe is not m2.universe:
        return False
    if m1.A != m2.A or m1.B != m2.B:
        return False
    U = m1.universe
    if witness is not None:
        try:
            w = _as_hom(m1, m2, witness)
        except (KeyError, ValueError):
            return False
        if not U.is_iso(w):
            return False
        if U is FINSET:
            return all(m2.in_map(w(x)) == m1.in_map(x) and m2.out_map(w(x)) == m1.out_map(x)
                       for x in m1.state)
        return (all(m2.in_map.nodes[w.nodes[v]] == m1.in_map.nodes[v]
                    and m2.out_map.nodes[w.nodes[v]] == m1.out_map.nodes[v] for v in m1.state.nodes)
                and all(m2.in_map.edges[w.edges[e]] == m1.in_map.edges[e]
                        and m2.out_map.edges[w.edges[e]] == m1.out_map.edges[e] for e in m1.state.edges))
    if U is FINSET:
        lab = lambda m: Counter((m.in_map(x), m.out_map(x)) for x in m.state)
        return lab(m1) == lab(m2)
    S1, S2 = m1.state, m2.state
    if len(S1.nodes) != len(S2.nodes) or len(S1.edges) != len(S2.edges):
        return False
    if len(S1.nodes) > MAX_BLIND_NODES:
        raise SpanError(f"blind isomorphism search is limited to {MAX_BLIND_NODES} nodes")
    return _search_iso(m1, m2)


def _search_iso(m1, m2) -> bool:
    S1, S2 = m1.state, m2.state

    def node_label(m, v):
        return (m.in_map.nodes[v], m.out_map.nodes[v])

    def edge_bag(m, S):
        bag = {}
        for e in S.edges:
            bag.setdefault((S.source(e), S.target(e)), Counter())[(m.in_map.edges[e], m.out_map.edges[e])] += 1
        return bag

    bag1, bag2 = edge_bag(m1, S1), edge_bag(m2, S2)
    n1 = list(S1.nodes)
    cands = {v: [w for w in S2.nodes if node_label(m2, w) == node_label(m1, v)] for v in n1}
    assign, used = {}, set()

    def bag(bags, a, b):
        return bags.get((a, b)) or Counter()

    def consistent(v):
        w = assign[v]
        for u, wu in assign.items():
            if bag(bag1, u, v) != bag(bag2, wu, w) or bag(bag1, v, u) != bag(bag2, w, wu):
                return False
        return True

    def rec(i):
        if i == len(n1):
            return True
        v = n1[i]
        for w in cands[v]:
            if w in used:
                continue
            assign[v] = w
            used.add(w)
            if consistent(v) and rec(i + 1):
                return True
            del assign[v]
            used.discard(w)
        return False

    return rec(0)


# -- composite description -------------------------------------------------

def describe_graph(G: Graph) -> str:
    """Short name for a state graph: empty, cnst(n), or counts."""
    if not G.nodes:
        return "empty"
    if len(G.edges) == len(G.nodes) and all(G.out_edges[v] and len(G.out_edges[v]) == 1
                                              and G.target(G.out_edges[v][0]) == v for v in G.nodes):
        return f"cnst({len(G.nodes)})"
    return f"graph({len(G.nodes)} nodes, {len(G.edges)} edges)"


def sections_of(m: MachineSpan, n: int) -> list:
    """Length-n state sections with their input and output images."""
    return [(x, m.in_map.on_path(x), m.out_map.on_path(x)) for x in g.paths(m.state, n)]

