"""Timed traces: piecewise-constant behaviour with labelled jumps.

A trace of length ``l`` alternates jumps and dwell segments::

    j0, (v1, d1), j1, (v2, d2), ..., (vn, dn), jn

``j_i`` happens at time ``d1 + ... + di``.  A jump is an edge of the
governing reflexive graph, written ``Jump(label, src, tgt)``; the
reflexive edge at ``v`` is ``Jump(None, v, v)``.  A length-0 trace is a
single jump.  Interior reflexive jumps carry no information, and
:func:`normalize` erases them.

Time is rational throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

from .graphs import Graph


class TraceError(ValueError):
    pass


class NoEnabledEdge(TraceError):
    """No transition matches an input jump (the machine is not total)."""

    def __init__(self, time, state, label):
        super().__init__(f"no enabled edge at t={time} from {state!r} on input {label!r}")
        self.time, self.state, self.label = time, state, label


class NotDeterministic(TraceError):
    def __init__(self, time, state, label, candidates):
        super().__init__(f"{len(candidates)} enabled edges at t={time} from {state!r} "
                         f"on input {label!r}: {list(candidates)!r}")
        self.time, self.state, self.label, self.candidates = time, state, label, tuple(candidates)


def Q(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TraceError("use exact rationals for time, not floats")
    return Fraction(x)


@dataclass(frozen=True)
class Jump:
    label: Any
    src: Any
    tgt: Any

    def __post_init__(self):
        if self.label is None and self.src != self.tgt:
            raise TraceError(f"reflexive jump must stay put: {self.src!r} -> {self.tgt!r}")

    @property
    def reflexive(self) -> bool:
        return self.label is None


def stay(v) -> Jump:
    return Jump(None, v, v)


@dataclass(frozen=True)
class TimedTrace:
    jumps: tuple
    values: tuple = ()
    durations: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "durations", tuple(Q(d) for d in self.durations))
        n = len(self.values)
        if len(self.durations) != n or len(self.jumps) != n + 1:
            raise TraceError("need one more jump than segments, one duration per segment")
        if any(d <= 0 for d in self.durations):
            raise TraceError("durations must be positive")
        for i, v in enumerate(self.values):
            if self.jumps[i].tgt != v or self.jumps[i + 1].src != v:
                raise TraceError(f"jumps around segment {i} do not meet its value {v!r}")

    @property
    def length(self) -> Fraction:
        return sum(self.durations, Fraction(0))

    @property
    def times(self) -> list[Fraction]:
        """Breakpoint times, one per jump."""
        out, t = [Fraction(0)], Fraction(0)
        for d in self.durations:
            t += d
            out.append(t)
        return out

    @property
    def left(self) -> Jump:
        return self.jumps[0]

    @property
    def right(self) -> Jump:
        return self.jumps[-1]

    def value_at(self, t) -> Any:
        """Value on the open segment containing ``t`` (not a breakpoint)."""
        t = Q(t)
        T = self.times
        for k in range(len(self.values)):
            if T[k] < t < T[k + 1]:
                return self.values[k]
        raise TraceError(f"t={t} is a breakpoint or outside the trace")

    def jump_at(self, t) -> Jump:
        t = Q(t)
        T = self.times
        if t in T:
            return self.jumps[T.index(t)]
        return stay(self.value_at(t))

    def events(self) -> list[tuple[Fraction, Jump]]:
        return list(zip(self.times, self.jumps))


def constant(v, length) -> TimedTrace:
    length = Q(length)
    if length == 0:
        return TimedTrace((stay(v),))
    return TimedTrace((stay(v), stay(v)), (v,), (length,))


def from_events(v0, events: Iterable, length, left: Jump | None = None, right: Jump | None = None) -> TimedTrace:
    """Build a trace from ``(time, label, new_value)`` events in (0, length).

    Events at the same time are not allowed; use tupled labels.
    """
    length = Q(length)
    evs = sorted(((Q(t), lab, v) for t, lab, v in events), key=lambda e: e[0])
    jumps = [left if left is not None else stay(v0)]
    values, durs, t, v = [], [], Fraction(0), v0
    for te, lab, nv in evs:
        if not (0 < te < length):
            raise TraceError(f"event time {te} outside (0, {length})")
        if values and te == t:
            raise TraceError(f"two events at t={te}")
        values.append(v)
        durs.append(te - t)
        jumps.append(Jump(lab, v, nv))
        t, v = te, nv
    if length > 0:
        values.append(v)
        durs.append(length - t)
        jumps.append(right if right is not None else stay(v))
    elif evs:
        raise TraceError("a length-0 trace has no interior events")
    return TimedTrace(tuple(jumps), tuple(values), tuple(durs))


def normalize(t: TimedTrace) -> TimedTrace:
    """Merge neighbouring segments separated by a reflexive jump."""
    if not t.values:
        return t
    jumps, values, durs = [t.jumps[0]], [t.values[0]], [t.durations[0]]
    for j, v, d in zip(t.jumps[1:-1], t.values[1:], t.durations[1:]):
        if j.reflexive:
            durs[-1] += d
        else:
            jumps.append(j)
            values.append(v)
            durs.append(d)
    jumps.append(t.jumps[-1])
    return TimedTrace(tuple(jumps), tuple(values), tuple(durs))


def equivalent(t1: TimedTrace, t2: TimedTrace) -> bool:
    return normalize(t1) == normalize(t2)


def trace_restrict(t: TimedTrace, p, ell) -> TimedTrace:
    """The part of ``t`` on ``[p, p + ell]``, in normal form."""
    p, ell = Q(p), Q(ell)
    if p < 0 or ell < 0 or p + ell > t.length:
        raise TraceError(f"[{p}, {p + ell}] is not inside [0, {t.length}]")
    q = p + ell
    if ell == 0:
        return TimedTrace((t.jump_at(p),))
    T = t.times
    jumps, values, durs = [t.jump_at(p)], [], []
    for k, v in enumerate(t.values):
        lo, hi = max(T[k], p), min(T[k + 1], q)
        if lo < hi:
            if values:
                jumps.append(t.jumps[k])
            values.append(v)
            durs.append(hi - lo)
    jumps.append(t.jump_at(q))
    return normalize(TimedTrace(tuple(jumps), tuple(values), tuple(durs)))


def trace_glue(t1: TimedTrace, t2: TimedTrace) -> TimedTrace:
    if t1.right != t2.left:
        raise TraceError(f"cannot glue: {t1.right!r} != {t2.left!r}")
    return normalize(TimedTrace(t1.jumps[:-1] + t2.jumps, t1.values + t2.values,
                                t1.durations + t2.durations))


def trace_product(traces: Sequence[TimedTrace]) -> TimedTrace:
    """Tuple several equal-length traces; simultaneous jumps are merged.

    A component without a jump at a merged breakpoint contributes its
    reflexive jump; a tuple of reflexive labels becomes ``None``.
    """
    traces = list(traces)
    L = traces[0].length
    if any(x.length != L for x in traces):
        raise TraceError("product of traces of different lengths")
    times = sorted(set().union(*(x.times for x in traces)))

    def jump(ts):
        parts = [x.jump_at(ts) for x in traces]
        labels = tuple(j.label for j in parts)
        lab = None if all(l is None for l in labels) else labels
        return Jump(lab, tuple(j.src for j in parts), tuple(j.tgt for j in parts))

    jumps = [jump(ts) for ts in times]
    values, durs = [], []
    for a, b in zip(times, times[1:]):
        mid = (a + b) / 2
        values.append(tuple(x.value_at(mid) for x in traces))
        durs.append(b - a)
    return normalize(TimedTrace(tuple(jumps), tuple(values), tuple(durs)))


def trace_component(t: TimedTrace, i: int) -> TimedTrace:
    """Project a tupled trace to one coordinate."""
    def proj(j):
        lab = None if j.label is None else j.label[i]
        return Jump(lab, j.src[i], j.tgt[i])
    return normalize(TimedTrace(tuple(proj(j) for j in t.jumps),
                                tuple(v[i] for v in t.values), t.durations))


# -- interchange -----------------------------------------------------------

def fmt_q(x: Fraction) -> str:
    x = Q(x)
    return f"{x.numerator}/{x.denominator}"


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(u) for u in v]
    return v


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(u) for u in v)
    return v


def to_record(t: TimedTrace) -> dict:
    return {
        "length": fmt_q(t.length),
        "segments": [[_plain(v), fmt_q(d)] for v, d in zip(t.values, t.durations)],
        "jumps": [[_plain(j.label), _plain(j.src), _plain(j.tgt)] for j in t.jumps],
    }


def from_record(rec: Mapping) -> TimedTrace:
    jumps = tuple(Jump(_tupled(l), _tupled(s), _tupled(d)) for l, s, d in rec["jumps"])
    segs = rec.get("segments", [])
    t = TimedTrace(jumps, tuple(_tupled(v) for v, _ in segs), tuple(Fraction(d) for _, d in segs))
    if "length" in rec and t.length != Fraction(rec["length"]):
        raise TraceError("length field disagrees with the segments")
    return t


# -- reflexive graphs ------------------------------------------------------

class FiniteRG:
    """A finite graph read as a reflexive graph.

    If the graph has no ``refl`` the reflexive structure is freely
    added; otherwise ``refl(v)`` is identified with the ``None`` label.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        self._refl = graph.refl_map or {}
        self._refl_edges = set(self._refl.values())

    def has_node(self, v) -> bool:
        return v in self.graph.node_set

    def edge_ends(self, e):
        if e in self.graph.edge_set:
            return self.graph.ends(e)
        return None

    def label(self, e):
        return None if e in self._refl_edges else e

    def out_edges(self, v):
        return [e for e in self.graph.out_edges[v] if e not in self._refl_edges]


@dataclass(frozen=True)
class RGHom:
    node: Callable
    edge: Callable   # returns None for edges sent to a reflexive edge

    def on_jump(self, j: Jump) -> Jump:
        lab = None if j.label is None else self.edge(j.label)
        return Jump(lab, self.node(j.src), self.node(j.tgt))

    def on_trace(self, t: TimedTrace) -> TimedTrace:
        return normalize(TimedTrace(tuple(self.on_jump(j) for j in t.jumps),
                                    tuple(self.node(v) for v in t.values), t.durations))


@dataclass(frozen=True)
class TimedMachine:
    """A timed machine run by :func:`execute_timed`.

    ``mode`` is ``"rw"`` (random walk on ``graph``), ``"delay"`` (with
    ``eps``) or ``"custom"`` (``custom`` maps the input trace to the
    output trace, the state being the input).
    """
    graph: Any
    f: RGHom | None
    g: RGHom | None
    mode: str = "rw"
    eps: Fraction | None = None
    enabled: Callable | None = None
    custom: Callable | None = None
    name: str = "M"

    def candidates(self, v, label) -> list:
        if self.enabled is not None:
            return list(self.enabled(v, label))
        return [e for e in self.graph.out_edges(v) if self.f.edge(e) == label]

    def spontaneous(self, v) -> list:
        if self.enabled is not None:
            return []
        return [e for e in self.graph.out_edges(v) if self.f.edge(e) is None]


def rw_machine(graph, f: RGHom, g: RGHom, name: str = "M", enabled=None) -> TimedMachine:
    return TimedMachine(graph, f, g, "rw", enabled=enabled, name=name)


def rw_membership(graph, t: TimedTrace) -> bool:
    """Is ``t`` a section of the random-walk sheaf of ``graph``?"""
    for v in t.values:
        if not graph.has_node(v):
            return False
    for j in t.jumps:
        if j.label is None:
            if not graph.has_node(j.src):
                return False
        elif graph.edge_ends(j.label) != (j.src, j.tgt):
            return False
        elif graph.label(j.label) is None:
            return False
    return True


def execute_timed(m: TimedMachine, inp: TimedTrace, initial):
    """Run ``m`` on ``inp``; returns ``(state_trace, output_trace)``.

    For ``rw`` machines ``initial`` is the state germ just before time
    0.  For a delay it is the length-``eps`` trace played before the
    input; the state then has length ``l + eps``.
    """
    if m.mode == "delay":
        pre = initial
        if pre.length != m.eps:
            raise TraceError(f"initial trace must have length {m.eps}")
        state = trace_glue(pre, inp)
        return state, trace_restrict(state, 0, inp.length)
    if m.mode == "custom":
        return normalize(inp), m.custom(inp)
    v = initial
    if not m.graph.has_node(v):
        raise TraceError(f"initial state {v!r} is not a node")
    if m.f.node(v) != inp.left.src:
        raise TraceError(f"initial state {v!r} does not sit over the input germ {inp.left.src!r}")
    jumps, values = [], []
    for i, (time, j) in enumerate(inp.events()):
        spont = m.spontaneous(v)
        if spont:
            raise NotDeterministic(time, v, None, spont)
        if j.label is None:
            jumps.append(stay(v))
        else:
            cands = m.candidates(v, j.label)
            if not cands:
                raise NoEnabledEdge(time, v, j.label)
            if len(cands) > 1:
                raise NotDeterministic(time, v, j.label, cands)
            e = cands[0]
            s, w = m.graph.edge_ends(e)
            jumps.append(Jump(m.graph.label(e), s, w))
            v = w
        if i < len(inp.values):
            values.append(v)
    state = normalize(TimedTrace(tuple(jumps), tuple(values), inp.durations))
    return state, m.g.on_trace(state)


def delay_machine(eps, name: str = "Delay") -> TimedMachine:
    eps = Q(eps)
    if eps <= 0:
        raise TraceError("delay needs eps > 0")
    return TimedMachine(None, None, None, "delay", eps=eps, name=name)


# -- storage ---------------------------------------------------------------

class NatMonoid:
    """(N, 0, +)."""
    unit = 0

    def contains(self, x) -> bool:
        return isinstance(x, int) and not isinstance(x, bool) and x >= 0

    def add(self, a, b):
        return a + b

    def solve_right(self, v, d):
        """All b with b + d = v."""
        return [v - d] if v - d >= 0 else []

    def below(self, v):
        """Every d that can be taken off ``v``."""
        return range(v + 1)


@dataclass(frozen=True)
class TableMonoid:
    elements: tuple
    table: Mapping
    unit: Any

    def __post_init__(self):
        E = self.elements
        if len(E) > 20:
            raise TraceError("monoid tables are limited to 20 elements")
        for a, b in itertools.product(E, E):
            if self.table.get((a, b)) not in E:
                raise TraceError(f"table is not total/closed at {(a, b)!r}")
        for a in E:
            if self.table[(self.unit, a)] != a or self.table[(a, self.unit)] != a:
                raise TraceError(f"{self.unit!r} is not a unit at {a!r}")
        for a, b, c in itertools.product(E, E, E):
            if self.table[(self.table[(a, b)], c)] != self.table[(a, self.table[(b, c)])]:
                raise TraceError(f"not associative at {(a, b, c)!r}")

    def contains(self, x) -> bool:
        return x in self.elements

    def add(self, a, b):
        return self.table[(a, b)]

    def solve_right(self, v, d):
        return [b for b in self.elements if self.table[(b, d)] == v]

    def below(self, v):
        return [d for d in self.elements if self.solve_right(v, d)]


class StorageGraph:
    """Balances as nodes; edge ``(c, b, d)`` runs from ``b + d`` to ``c + b``."""

    def __init__(self, monoid):
        self.M = monoid

    def has_node(self, v) -> bool:
        return self.M.contains(v)

    def edge_ends(self, e):
        if not (isinstance(e, tuple) and len(e) == 3 and all(self.M.contains(x) for x in e)):
            return None
        c, b, d = e
        return (self.M.add(b, d), self.M.add(c, b))

    def label(self, e):
        c, _, d = e
        return None if c == self.M.unit and d == self.M.unit else e

    def refl(self, v):
        return (self.M.unit, v, self.M.unit)


STAR = ()


def storage_machine(monoid=None, drive: str = "joint") -> TimedMachine:
    """The account machine: credits in, debits out.

    With ``drive="joint"`` the executor reads both the credit and the
    debit from the input trace, whose labels are ``(c, d)`` pairs;
    this is the leg along which the machine is deterministic.  With
    ``drive="credit"`` only credits are inputs (the plain span) and
    execution is generally non-deterministic.
    """
    M = NatMonoid() if monoid is None else monoid
    G = StorageGraph(M)
    u = M.unit
    debit = RGHom(lambda v: STAR, lambda e: None if e[2] == u else e[2])
    if drive == "joint":
        f = RGHom(lambda v: (STAR, STAR), lambda e: None if (e[0], e[2]) == (u, u) else (e[0], e[2]))

        def enabled(v, lab):
            c, d = lab
            return [(c, b, d) for b in M.solve_right(v, d)]
    elif drive == "credit":
        f = RGHom(lambda v: STAR, lambda e: None if e[0] == u else e[0])

        def enabled(v, c):
            return [(c, b, d) for d in M.below(v) for b in M.solve_right(v, d)]
    else:
        raise TraceError(f"unknown drive {drive!r}")
    return TimedMachine(G, f, debit, "rw", enabled=enabled, name="storage")


def storage_input(events: Iterable, length, unit=0) -> TimedTrace:
    """Input trace from ``(time, credit, debit)`` events."""
    evs = [(t, (c, d), (STAR, STAR)) for t, c, d in events if (c, d) != (unit, unit)]
    return from_events((STAR, STAR), evs, length)


# -- labelled transition systems -------------------------------------------

@dataclass(frozen=True)
class LTS:
    labels: tuple
    states: tuple
    transitions: tuple          # pairs (label, state) on which tau is defined
    tau: Mapping
    observe: Mapping

    def __post_init__(self):
        for ls in self.transitions:
            if ls not in self.tau:
                raise TraceError(f"tau undefined on {ls!r}")
            if self.tau[ls] not in self.states:
                raise TraceError(f"tau{ls!r} is not a state")
            if ls[0] not in self.labels or ls[1] not in self.states:
                raise TraceError(f"transition {ls!r} outside labels x states")
        for s in self.states:
            if s not in self.observe:
                raise TraceError(f"no observation for state {s!r}")


def lts_graph(lts: LTS) -> Graph:
    E = lts.transitions
    return Graph(lts.states, E, tuple(s for _, s in E), tuple(lts.tau[e] for e in E))


def lts_machine(lts: LTS) -> TimedMachine:
    G = FiniteRG(lts_graph(lts))
    O, tau = lts.observe, lts.tau
    f = RGHom(lambda v: STAR, lambda e: e[0])
    g = RGHom(lambda v: O[v], lambda e: None if O[e[1]] == O[tau[e]] else (O[e[1]], O[tau[e]]))
    return rw_machine(G, f, g, "lts")


def lts_total_extension(lts: LTS) -> LTS:
    """Add a self-loop for every missing (label, state) pair."""
    E = tuple(itertools.product(lts.labels, lts.states))
    tau = {e: lts.tau.get(e, e[1]) for e in E}
    return LTS(lts.labels, lts.states, E, tau, lts.observe)


def label_trace(labels_at: Iterable, length) -> TimedTrace:
    """Input for an LTS: ``(time, label)`` events on the one-node alphabet graph."""
    return from_events(STAR, [(t, lab, STAR) for t, lab in labels_at], length)


# -- switch ----------------------------------------------------------------

def switch_output(m: int, t: TimedTrace) -> TimedTrace:
    """Route input ``sel`` to the output; every selector jump becomes a jump.

    ``t`` is the product trace of ``(selector, a_1, ..., a_m)`` with the
    selector taking values in ``1..m``.
    """
    def pick(v):
        s = v[0]
        if not (isinstance(s, int) and 1 <= s <= m):
            raise TraceError(f"selector value {s!r} outside 1..{m}")
        return v[s]

    jumps = []
    for j in t.jumps:
        s0, s1 = j.src[0], j.tgt[0]
        lab = j.label if j.label is not None else (None,) * (m + 1)
        a, b = pick(j.src), pick(j.tgt)
        if lab[0] is not None:
            jumps.append(Jump(("switch", s0, s1, lab[s1]), a, b))
        else:
            jumps.append(Jump(lab[s0], a, b))
    return normalize(TimedTrace(tuple(jumps), tuple(pick(v) for v in t.values), t.durations))


def switch_machine(m: int, alphabet: Sequence = ()) -> TimedMachine:
    if m < 1:
        raise TraceError("switch needs at least one input")
    return TimedMachine(tuple(alphabet), None, None, "custom",
                        custom=lambda t: switch_output(m, t), name="switch")


def builtin_machine(kind: str, **params) -> TimedMachine:
    if kind == "storage":
        return storage_machine(params.get("monoid"), params.get("drive", "joint"))
    if kind == "lts":
        return lts_machine(params["lts"])
    if kind == "switch":
        return switch_machine(params["m"], params.get("alphabet", ()))
    raise TraceError(f"unknown builtin {kind!r}")
