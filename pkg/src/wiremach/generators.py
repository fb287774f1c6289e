"""Seeded random instances for property tests and batch checks.

Every function takes a ``random.Random`` so runs are reproducible.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

import numpy as np

from . import graphs as g
from .graphs import Graph
from .moore import MooreMachine, input_space
from .ode import OdeMachine, PolyField
from .spans import GRAPH, MachineSpan, make_span
from .timed import Jump, TimedTrace, normalize, stay
from .wiring import (Box, EuclideanSpace, FiniteSet, GraphType, InnerOut, OuterIn, Port,
                     WiringDiagram, tensor_boxes)


def finite_types(rng: random.Random, k: int = 3, max_size: int = 4) -> list[FiniteSet]:
    return [FiniteSet(f"T{i}", tuple(range(rng.randint(1, max_size)))) for i in range(k)]


def random_box(rng, types, label, max_in=2, max_out=2, min_in=0, min_out=0) -> Box:
    ins = [(f"i{j}", rng.choice(types)) for j in range(rng.randint(min_in, max_in))]
    outs = [(f"o{j}", rng.choice(types)) for j in range(rng.randint(min_out, max_out))]
    return Box(ins, outs, label)


def random_wd(rng, inner: Box, types, label="Y", max_extra_in=1, max_out=3,
              p_feedback=0.5) -> WiringDiagram:
    """A valid diagram out of ``inner`` with a freshly made outer box."""
    outer_in = []
    pin = {}
    for p in inner.inputs:
        fb = [q.name for q in inner.outputs if q.type == p.type]
        if fb and rng.random() < p_feedback:
            pin[p.name] = InnerOut(rng.choice(fb))
            continue
        same = [q for q in outer_in if q.type == p.type]
        if same and rng.random() < 0.3:
            pin[p.name] = OuterIn(rng.choice(same).name)
        else:
            q = Port(f"y{len(outer_in)}", p.type)
            outer_in.append(q)
            pin[p.name] = OuterIn(q.name)
    for _ in range(rng.randint(0, max_extra_in)):
        outer_in.append(Port(f"y{len(outer_in)}", rng.choice(types)))
    rng.shuffle(outer_in)
    outer_out, pout = [], {}
    if inner.outputs:
        for j in range(rng.randint(0, max_out)):
            x = rng.choice(inner.outputs)
            outer_out.append(Port(f"z{j}", x.type))
            pout[f"z{j}"] = x.name
    return WiringDiagram(inner, Box(outer_in, outer_out, label), pin, pout)


def random_moore(rng, box: Box, max_states=4) -> MooreMachine:
    states = tuple(range(rng.randint(1, max_states)))
    outs = list(itertools.product(*(p.type.elements for p in box.outputs)))
    upd = {(x, s): rng.choice(states) for x in input_space(box) for s in states}
    rdt = {s: rng.choice(outs) for s in states}
    return MooreMachine(box, states, upd, rdt)


def random_network(rng, max_boxes=4, max_size=4, max_states=4, max_ports=2):
    """Boxes, machines, and a valid diagram from their tensor."""
    types = finite_types(rng, rng.randint(1, 3), max_size)
    n = rng.randint(1, max_boxes)
    boxes = [random_box(rng, types, f"B{i}", max_ports, max_ports) for i in range(n)]
    machines = [random_moore(rng, b, max_states) for b in boxes]
    inner = tensor_boxes(boxes)
    wd = random_wd(rng, inner, types, max_extra_in=0, max_out=2, p_feedback=0.6)
    return boxes, machines, wd


def random_graph(rng, max_nodes=4, max_edges=6, min_nodes=1, outdeg_positive=False) -> Graph:
    n = rng.randint(min_nodes, max_nodes)
    nodes = tuple(range(n))
    edges = []
    if n:
        for k in range(rng.randint(0, max_edges)):
            edges.append((f"e{k}", rng.randrange(n), rng.randrange(n)))
        if outdeg_positive:
            has = {s for _, s, _ in edges}
            for v in nodes:
                if v not in has:
                    edges.append((f"e{len(edges)}", v, rng.randrange(n)))
    return Graph.from_edges(nodes, edges)


def random_poly(rng, nvars, nout, max_deg=3, max_terms=3) -> PolyField:
    rows = []
    for _ in range(nout):
        row = []
        for _ in range(rng.randint(0, max_terms)):
            ex = [0] * nvars
            for _ in range(rng.randint(0, max_deg)):
                if nvars:
                    ex[rng.randrange(nvars)] += 1
            row.append((rng.uniform(-1, 1), tuple(ex)))
        rows.append(tuple(row))
    return PolyField(nvars, tuple(rows))


def random_ode_machine(rng, box: Box, max_state=3) -> OdeMachine:
    k = rng.randint(1, max_state)
    m = sum(p.type.dim for p in box.inputs)
    p = sum(q.type.dim for q in box.outputs)
    field_ = random_poly(rng, m + k, k)
    rdt_poly = random_poly(rng, k, p, max_deg=2)
    rdt = lambda s, f=rdt_poly: f(np.zeros(0), s)
    return OdeMachine(box, k, field_, rdt, field_)


def euclidean_types(rng, k=2, max_dim=2) -> list[EuclideanSpace]:
    dims = sorted({rng.randint(1, max_dim) for _ in range(k)})
    return [EuclideanSpace(d) for d in dims]


# -- graph machines --------------------------------------------------------

def graph_type_pool(rng, k=2, max_nodes=2, max_edges=3) -> list[GraphType]:
    pool = []
    for i in range(k):
        G = random_graph(rng, max_nodes, max_edges, outdeg_positive=True)
        G = Graph(tuple(f"g{i}n{v}" for v in G.nodes), tuple(f"g{i}{e}" for e in G.edges),
                  tuple(f"g{i}n{v}" for v in G.src), tuple(f"g{i}n{v}" for v in G.tgt))
        pool.append(GraphType(G))
    return pool


def random_inertial_machine(rng, box: Box, internal=2, total=True, drop=0.3) -> MachineSpan:
    """h-injective, inertial graph machine; h-surjective when ``total``.

    Each state ``(a, b, c)`` picks one output edge leaving ``b`` and
    lifts every input edge leaving ``a`` exactly once.  With
    ``total=False`` some states are dropped, which removes lifts.
    """
    A = g.product([p.type.graph for p in box.inputs])
    B = g.product([p.type.graph for p in box.outputs])
    C = range(rng.randint(1, internal))
    nodes = [(a, b, c) for a in A.nodes for b in B.nodes for c in C]
    if not total:
        nodes = [v for v in nodes if rng.random() > drop] or nodes[:1]
    alive = set(nodes)
    choice = {v: rng.choice(B.out_edges[v[1]]) for v in nodes}
    edges, src, tgt = [], [], []
    for v in nodes:
        beta = choice[v]
        for alpha in A.out_edges[v[0]]:
            cands = [(A.target(alpha), B.target(beta), c) for c in C]
            cands = [w for w in cands if w in alive]
            if not cands:
                continue
            w = rng.choice(cands)
            edges.append((v, alpha))
            src.append(v)
            tgt.append(w)
    S = Graph(tuple(nodes), tuple(edges), tuple(src), tuple(tgt))
    return make_span(GRAPH, box, S, lambda v: v[0], lambda v: v[1],
                     lambda e: e[1], lambda e: choice[e[0]])


def random_graph_machine(rng, box: Box, max_nodes=4, max_edges=8) -> MachineSpan:
    """An arbitrary span of graphs (no totality or inertia built in)."""
    A = g.product([p.type.graph for p in box.inputs])
    B = g.product([p.type.graph for p in box.outputs])
    n = rng.randint(1, max_nodes)
    nin = [rng.choice(A.nodes) for _ in range(n)]
    nout = [rng.choice(B.nodes) for _ in range(n)]
    edges, src, tgt, ein, eout = [], [], [], [], []
    for k in range(rng.randint(0, max_edges)):
        s = rng.randrange(n)
        a_opts = A.out_edges[nin[s]]
        b_opts = B.out_edges[nout[s]]
        if not a_opts or not b_opts:
            continue
        a, b = rng.choice(a_opts), rng.choice(b_opts)
        ts = [t for t in range(n) if nin[t] == A.target(a) and nout[t] == B.target(b)]
        if not ts:
            continue
        edges.append(f"s{k}")
        src.append(s)
        tgt.append(rng.choice(ts))
        ein.append(a)
        eout.append(b)
    S = Graph(tuple(range(n)), tuple(edges), tuple(src), tuple(tgt))
    ei, eo = dict(zip(edges, ein)), dict(zip(edges, eout))
    return make_span(GRAPH, box, S, nin.__getitem__, nout.__getitem__, ei.__getitem__, eo.__getitem__)


# -- timed traces ----------------------------------------------------------

def random_fraction(rng, lo=1, hi=4, den=4) -> Fraction:
    return Fraction(rng.randint(lo * den, hi * den), den) if hi > 0 else Fraction(0)


def random_trace(rng, alphabet, max_segments=3, den=4, endpoints=True) -> TimedTrace:
    """Trace over K(alphabet): jump labels are ``(from, to)`` pairs."""
    n = rng.randint(1, max_segments)
    values = [rng.choice(alphabet)]
    for _ in range(n - 1):
        values.append(rng.choice(alphabet))
    durs = [Fraction(rng.randint(1, 3 * den), den) for _ in range(n)]
    jumps = []
    for i in range(n + 1):
        if i == 0:
            w = values[0]
            v = rng.choice(alphabet) if endpoints and rng.random() < 0.5 else w
        elif i == n:
            v = values[-1]
            w = rng.choice(alphabet) if endpoints and rng.random() < 0.5 else v
        else:
            v, w = values[i - 1], values[i]
        jumps.append(stay(v) if v == w else Jump((v, w), v, w))
    return normalize(TimedTrace(tuple(jumps), tuple(values), tuple(durs)))
