"""Graphs as discrete interval sheaves.

Nodes are the germs (length-0 sections), edges the length-1 sections,
and a length-n section is a path of n composable edges.  Everything
here is finite and materialized.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import ceil, floor
from typing import Iterable, Mapping, Sequence


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Finite directed multigraph, optionally reflexive.

    ``edges`` are opaque hashable ids; ``src`` and ``tgt`` are tuples
    aligned with ``edges``.  ``refl``, when given, is aligned with
    ``nodes`` and names a chosen loop at each node.
    """
    nodes: tuple
    edges: tuple = ()
    src: tuple = ()
    tgt: tuple = ()
    refl: tuple | None = None

    def __post_init__(self):
        for name in ("nodes", "edges", "src", "tgt"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.refl is not None:
            object.__setattr__(self, "refl", tuple(self.refl))
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("repeated node")
        if len(set(self.edges)) != len(self.edges):
            raise GraphError("repeated edge")
        if not (len(self.src) == len(self.tgt) == len(self.edges)):
            raise GraphError("src/tgt must be total on edges")
        ns = self.node_set
        for s, t in zip(self.src, self.tgt):
            if s not in ns or t not in ns:
                raise GraphError(f"edge endpoint outside node set: {s!r}->{t!r}")
        if self.refl is not None:
            if len(self.refl) != len(self.nodes):
                raise GraphError("refl must be total on nodes")
            for v, e in zip(self.nodes, self.refl):
                if self.source(e) != v or self.target(e) != v:
                    raise GraphError(f"refl({v!r}) is not a loop at {v!r}")

    @classmethod
    def from_edges(cls, nodes: Iterable, edges: Mapping | Iterable, refl=None) -> "Graph":
        """``edges`` maps id -> (src, tgt), or is a sequence of (id, src, tgt)."""
        if isinstance(edges, Mapping):
            edges = [(e, s, t) for e, (s, t) in edges.items()]
        edges = list(edges)
        nodes = tuple(nodes)
        r = None if refl is None else tuple(refl[v] for v in nodes)
        return cls(nodes, tuple(e for e, _, _ in edges),
                   tuple(s for _, s, _ in edges), tuple(t for _, _, t in edges), r)

    @cached_property
    def node_set(self) -> frozenset:
        return frozenset(self.nodes)

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @cached_property
    def _ends(self) -> dict:
        return {e: (s, t) for e, s, t in zip(self.edges, self.src, self.tgt)}

    @cached_property
    def edge_index(self) -> dict:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def node_index(self) -> dict:
        return {v: i for i, v in enumerate(self.nodes)}

    @cached_property
    def out_edges(self) -> dict:
        out = {v: [] for v in self.nodes}
        for e, s in zip(self.edges, self.src):
            out[s].append(e)
        return {v: tuple(es) for v, es in out.items()}

    @cached_property
    def refl_map(self) -> dict | None:
        if self.refl is None:
            return None
        return dict(zip(self.nodes, self.refl))

    def source(self, e):
        return self._ends[e][0]

    def target(self, e):
        return self._ends[e][1]

    def ends(self, e):
        return self._ends[e]

    def loops(self) -> tuple:
        return tuple(e for e, s, t in zip(self.edges, self.src, self.tgt) if s == t)

    def __repr__(self):
        return f"Graph({len(self.nodes)} nodes, {len(self.edges)} edges)"


@dataclass(frozen=True)
class Path:
    """A section of length ``len(edges)``: v0 e1 v1 ... en vn."""
    vertices: tuple
    edges: tuple = ()

    def __post_init__(self):
        if len(self.vertices) != len(self.edges) + 1:
            raise GraphError("a path has one more vertex than edges")

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    def __repr__(self):
        parts = [repr(self.vertices[0])]
        for e, v in zip(self.edges, self.vertices[1:]):
            parts += [f"-{e!r}->", repr(v)]
        return "Path(" + " ".join(parts) + ")"


def germ(v) -> Path:
    return Path((v,), ())


def is_path(G: Graph, x: Path) -> bool:
    if any(v not in G.node_set for v in x.vertices):
        return False
    for i, e in enumerate(x.edges):
        if e not in G.edge_set or G.ends(e) != (x.vertices[i], x.vertices[i + 1]):
            return False
    return True


def paths(G: Graph, n: int) -> list[Path]:
    """All length-``n`` paths, in lexicographic order of node/edge indices."""
    if n < 0:
        raise GraphError("negative length")
    layer = [((v,), ()) for v in G.nodes]
    for _ in range(n):
        nxt = []
        for vs, es in layer:
            for e in G.out_edges[vs[-1]]:
                nxt.append((vs + (G.target(e),), es + (e,)))
        layer = nxt
    return [Path(vs, es) for vs, es in layer]


def restrict_section(x: Path, p: int, n: int) -> Path:
    if p < 0 or n < 0 or p + n > x.length:
        raise GraphError(f"cannot restrict a length-{x.length} path to [{p},{p + n}]")
    return Path(x.vertices[p:p + n + 1], x.edges[p:p + n])


def glue_sections(x1: Path, x2: Path) -> Path:
    if x1.end != x2.start:
        raise GraphError(f"germs do not match: {x1.end!r} vs {x2.start!r}")
    return Path(x1.vertices + x2.vertices[1:], x1.edges + x2.edges)


# -- homomorphisms ---------------------------------------------------------

@dataclass(frozen=True)
class GraphHom:
    dom: Graph
    cod: Graph
    node_map: tuple
    edge_map: tuple

    def __post_init__(self):
        nm, em = self.node_map, self.edge_map
        if isinstance(nm, Mapping):
            nm = tuple(nm[v] for v in self.dom.nodes)
        if isinstance(em, Mapping):
            em = tuple(em[e] for e in self.dom.edges)
        object.__setattr__(self, "node_map", tuple(nm))
        object.__setattr__(self, "edge_map", tuple(em))
        if len(self.node_map) != len(self.dom.nodes) or len(self.edge_map) != len(self.dom.edges):
            raise GraphError("hom must be total")

    @cached_property
    def nodes(self) -> dict:
        return dict(zip(self.dom.nodes, self.node_map))

    @cached_property
    def edges(self) -> dict:
        return dict(zip(self.dom.edges, self.edge_map))

    def on_path(self, x: Path) -> Path:
        return Path(tuple(self.nodes[v] for v in x.vertices), tuple(self.edges[e] for e in x.edges))

    def problems(self) -> list:
        out = []
        for v, w in self.nodes.items():
            if w not in self.cod.node_set:
                out.append(("node outside codomain", v, w))
        for e, f in self.edges.items():
            if f not in self.cod.edge_set:
                out.append(("edge outside codomain", e, f))
                continue
            s, t = self.dom.ends(e)
            if self.cod.ends(f) != (self.nodes[s], self.nodes[t]):
                out.append(("does not commute with src/tgt", e, f))
        if self.dom.refl is not None and self.cod.refl is not None:
            for v, r in self.dom.refl_map.items():
                if self.edges[r] != self.cod.refl_map[self.nodes[v]]:
                    out.append(("does not preserve refl", v))
        return out

    def is_valid(self) -> bool:
        return not self.problems()

    def then(self, other: "GraphHom") -> "GraphHom":
        if self.cod != other.dom:
            raise GraphError("homs not composable")
        return GraphHom(self.dom, other.cod,
                        tuple(other.nodes[w] for w in self.node_map),
                        tuple(other.edges[f] for f in self.edge_map))


def identity_hom(G: Graph) -> GraphHom:
    return GraphHom(G, G, G.nodes, G.edges)


# -- standard graphs -------------------------------------------------------

def complete(S: Sequence) -> Graph:
    """K(S): one edge (s, s') for every ordered pair; reflexive on the diagonal."""
    S = tuple(S)
    edges = [(a, b) for a in S for b in S]
    return Graph(S, edges, [a for a, _ in edges], [b for _, b in edges], [(s, s) for s in S])


def loop(Q: Sequence, refl=None) -> Graph:
    """Loop(Q): a single node ``()`` with one loop per element of Q."""
    Q = tuple(Q)
    r = None if refl is None else (refl,)
    return Graph(((),), Q, [()] * len(Q), [()] * len(Q), r)


def cnst(S: Sequence) -> Graph:
    """Constant sheaf: node s carries exactly one loop, also called s."""
    S = tuple(S)
    return Graph(S, S, S, S, S)


def terminal() -> Graph:
    return Graph(((),), ((),), ((),), ((),), ((),))


def empty() -> Graph:
    return Graph((), (), (), (), ())


# -- extensions ------------------------------------------------------------

@dataclass(frozen=True)
class Extension:
    graph: Graph
    lambda_map: GraphHom
    rho_map: GraphHom


def ext_graph(G: Graph, k: int) -> Extension:
    """Ext_k(G): nodes are length-k paths, edges length-(k+1) paths.

    ``lambda_map``/``rho_map`` send a path to its first/last vertex
    (on nodes) or first/last edge (on edges).  For k=0 the graph is G
    itself with identity maps.
    """
    if k < 0:
        raise GraphError("negative extension")
    if k == 0:
        return Extension(G, identity_hom(G), identity_hom(G))
    nodes = paths(G, k)
    edges = paths(G, k + 1)
    E = Graph(tuple(nodes), tuple(edges),
              tuple(restrict_section(x, 0, k) for x in edges),
              tuple(restrict_section(x, 1, k) for x in edges))
    lam = GraphHom(E, G, tuple(x.start for x in nodes), tuple(x.edges[0] for x in edges))
    rho = GraphHom(E, G, tuple(x.end for x in nodes), tuple(x.edges[-1] for x in edges))
    return Extension(E, lam, rho)


# -- limits ----------------------------------------------------------------

def product(Gs: Sequence[Graph]) -> Graph:
    """Levelwise product; nodes and edges are tuples, one entry per factor."""
    Gs = tuple(Gs)
    nodes = tuple(itertools.product(*(G.nodes for G in Gs)))
    edges = tuple(itertools.product(*(G.edges for G in Gs)))
    src = tuple(tuple(G.source(e) for G, e in zip(Gs, es)) for es in edges)
    tgt = tuple(tuple(G.target(e) for G, e in zip(Gs, es)) for es in edges)
    refl = None
    if all(G.refl is not None for G in Gs):
        refl = tuple(tuple(G.refl_map[v] for G, v in zip(Gs, vs)) for vs in nodes)
    return Graph(nodes, edges, src, tgt, refl)


def projection(Gs: Sequence[Graph], i: int, P: Graph | None = None) -> GraphHom:
    P = product(Gs) if P is None else P
    return GraphHom(P, Gs[i], tuple(v[i] for v in P.nodes), tuple(e[i] for e in P.edges))


def pullback(f: GraphHom, g: GraphHom) -> tuple[Graph, GraphHom, GraphHom]:
    """Levelwise pullback of ``f: A -> C`` and ``g: B -> C`` (hash join)."""
    if f.cod != g.cod:
        raise GraphError("pullback needs a shared codomain")
    def join(xs, fx, ys, gy):
        idx = {}
        for y, c in zip(ys, gy):
            idx.setdefault(c, []).append(y)
        return tuple((x, y) for x, c in zip(xs, fx) for y in idx.get(c, ()))
    nodes = join(f.dom.nodes, f.node_map, g.dom.nodes, g.node_map)
    edges = join(f.dom.edges, f.edge_map, g.dom.edges, g.edge_map)
    A, B = f.dom, g.dom
    P = Graph(nodes, edges,
              tuple((A.source(a), B.source(b)) for a, b in edges),
              tuple((A.target(a), B.target(b)) for a, b in edges))
    p1 = GraphHom(P, A, tuple(a for a, _ in nodes), tuple(a for a, _ in edges))
    p2 = GraphHom(P, B, tuple(b for _, b in nodes), tuple(b for _, b in edges))
    return P, p1, p2


def image(f: GraphHom) -> Graph:
    """Smallest subgraph of the codomain containing the image."""
    ns = set(f.node_map)
    es = set(f.edge_map)
    C = f.cod
    nodes = tuple(v for v in C.nodes if v in ns)
    edges = tuple(e for e in C.edges if e in es)
    return Graph(nodes, edges, tuple(C.source(e) for e in edges), tuple(C.target(e) for e in edges))


def is_isomorphism(f: GraphHom) -> bool:
    return (f.is_valid()
            and len(set(f.node_map)) == len(f.cod.nodes) == len(f.dom.nodes)
            and len(set(f.edge_map)) == len(f.cod.edges) == len(f.dom.edges))


# -- phase sampler ---------------------------------------------------------

def _q(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class SyncSection:
    """A section over [0, ell] sampled at phase r in [0, 1).

    The underlying path has length ceil(r + ell).
    """
    ell: Fraction
    phase: Fraction
    path: Path


def sigma_length(ell, r) -> int:
    ell, r = _q(ell), _q(r)
    if ell < 0 or not (0 <= r < 1):
        raise GraphError("need ell >= 0 and 0 <= r < 1")
    return ceil(r + ell)


def sigma_sample(G: Graph, ell, r) -> list[SyncSection]:
    ell, r = _q(ell), _q(r)
    n = sigma_length(ell, r)
    return [SyncSection(ell, r, x) for x in paths(G, n)]


def restrict_at(x: SyncSection, p, ell) -> SyncSection:
    """Restrict to [p, p + ell]; returns the section with its new phase."""
    p, ell = _q(p), _q(ell)
    if p < 0 or ell < 0 or p + ell > x.ell:
        raise GraphError(f"[{p}, {p + ell}] is not inside [0, {x.ell}]")
    a = floor(p + x.phase)
    b = ceil(p + x.phase + ell)
    return SyncSection(ell, p + x.phase - a, restrict_section(x.path, a, b - a))


def sheaf_violations(G: Graph, max_len: int) -> list:
    """Compatible pairs whose gluing is missing or not unique.

    For each total length ``N <= max_len`` and split ``n1 + n2 = N``,
    every pair ``(x1, x2)`` with matching germs must be the left/right
    restriction of exactly one length-N path.
    """
    bad = []
    by_len = [paths(G, n) for n in range(max_len + 1)]
    for N in range(max_len + 1):
        for n1 in range(N + 1):
            n2 = N - n1
            count = {}
            for z in by_len[N]:
                key = (restrict_section(z, 0, n1), restrict_section(z, n1, n2))
                count[key] = count.get(key, 0) + 1
            ends = {}
            for x2 in by_len[n2]:
                ends.setdefault(x2.start, []).append(x2)
            for x1 in by_len[n1]:
                for x2 in ends.get(x1.end, ()):
                    c = count.pop((x1, x2), 0)
                    if c != 1:
                        bad.append((x1, x2, c))
            bad.extend((x1, x2, -c) for (x1, x2), c in count.items())
    return bad
