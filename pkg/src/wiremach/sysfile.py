"""Declarative system files.

A system file is YAML with these top-level keys (all optional except
``boxes``)::

    types:       name -> {kind: finite|graph|euclidean|timed, ...}
    boxes:       name -> {inputs: [{name, type}], outputs: [{name, type}]}
    wirings:     name -> {outer, inner: [box or wiring], feeds, exposes}
    machines:    name -> {kind, box, ...parameters}
    composites:  name -> {wiring, bind: {box: machine}}
    contracts:   name -> {box, horizon, rule}
    run:         {composite or machine, steps, inputs, initial, ...}

Symbols are strings; rationals are ``"num/den"`` strings.  Lists stand
for tuples wherever a symbol is expected.  The canonical text of a
document is ``yaml.safe_dump`` with sorted keys, and lists keep their
order, so declared port order survives a round trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import yaml

from . import graphs as g
from .contracts import Contract, full_contract, make_contract, response_contract
from .graphs import Graph
from .moore import MooreMachine
from .ode import OdeMachine, PolyField
from .spans import GRAPH, MachineSpan, make_span
from .timed import (LTS, TableMonoid, TimedMachine, delay_machine, lts_machine,
                    storage_machine, switch_machine)
from .wiring import (Box, EuclideanSpace, FiniteSet, Flattened, GraphType, TimedAlphabet,
                     substitute, validate_wiring, wire)


class SpecError(ValueError):
    """Input error with the location of the offending field."""

    def __init__(self, message, path=(), line=None):
        where = ".".join(str(p) for p in path)
        loc = f" (at {where}" + (f", line {line}" if line else "") + ")" if path else ""
        super().__init__(message + loc)
        self.path, self.line = tuple(path), line


def _t(v):
    """Lists become tuples, recursively."""
    if isinstance(v, list):
        return tuple(_t(u) for u in v)
    return v


def _q(s) -> Fraction:
    return Fraction(str(s))


@dataclass
class SystemSpec:
    doc: dict
    types: dict = field(default_factory=dict)
    boxes: dict = field(default_factory=dict)
    wirings: dict = field(default_factory=dict)
    machines: dict = field(default_factory=dict)
    machine_boxes: dict = field(default_factory=dict)
    machine_kinds: dict = field(default_factory=dict)
    composites: dict = field(default_factory=dict)
    contracts: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, SystemSpec) and self.doc == other.doc


# -- location tracking -----------------------------------------------------

class _Locator:
    def __init__(self, text):
        try:
            self.root = yaml.compose(text)
        except yaml.YAMLError:
            self.root = None

    def line(self, path):
        node = self.root
        for key in path:
            if node is None:
                return None
            if isinstance(node, yaml.MappingNode):
                nxt = None
                for k, v in node.value:
                    if k.value == str(key):
                        nxt = v
                        break
                node = nxt
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                node = node.value[key]
            else:
                return node.start_mark.line + 1
        return None if node is None else node.start_mark.line + 1


# -- parsing ---------------------------------------------------------------

def parse_system(text: str) -> SystemSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise SpecError(f"malformed syntax: {getattr(e, 'problem', e)}", ("<file>",),
                        mark.line + 1 if mark else None) from None
    if not isinstance(doc, dict):
        raise SpecError("a system file is a mapping", ("<file>",), 1)
    loc = _Locator(text)
    try:
        return _resolve(doc)
    except SpecError as e:
        if e.line is None and e.path:
            raise SpecError(str(e).split(" (at ")[0], e.path, loc.line(e.path)) from None
        raise


def load_system(path) -> SystemSpec:
    with open(path, encoding="utf-8") as f:
        return parse_system(f.read())


def serialize_system(spec: SystemSpec) -> str:
    return yaml.safe_dump(spec.doc, sort_keys=True, default_flow_style=False, allow_unicode=True, width=100)


def _need(d, key, path):
    if not isinstance(d, dict) or key not in d:
        raise SpecError(f"missing field {key!r}", path)
    return d[key]


def _graph(spec, path) -> Graph:
    if not isinstance(spec, dict):
        raise SpecError("graph must be a mapping", path)
    kind = spec.get("kind", "explicit")
    of = _t(spec.get("of", []))
    if kind == "cnst":
        return g.cnst(of)
    if kind == "complete":
        return g.complete(of)
    if kind == "loop":
        return g.loop(of)
    if kind == "terminal":
        return g.terminal()
    if kind == "empty":
        return g.empty()
    if kind != "explicit":
        raise SpecError(f"unknown graph kind {kind!r}", path + ("kind",))
    nodes = _t(_need(spec, "nodes", path))
    edges = []
    for i, e in enumerate(spec.get("edges", [])):
        if not (isinstance(e, list) and len(e) == 3):
            raise SpecError("an edge is [id, src, tgt]", path + ("edges", i))
        edges.append(_t(e))
    try:
        return Graph.from_edges(nodes, edges)
    except ValueError as e:
        raise SpecError(str(e), path) from None


def _ptype(spec, name, path):
    kind = _need(spec, "kind", path)
    if kind == "finite":
        return FiniteSet(name, _t(_need(spec, "elements", path)))
    if kind == "graph":
        return GraphType(_graph(_need(spec, "graph", path), path + ("graph",)))
    if kind == "euclidean":
        return EuclideanSpace(int(_need(spec, "dim", path)))
    if kind == "timed":
        return TimedAlphabet(_t(spec.get("symbols", [])))
    raise SpecError(f"unknown type kind {kind!r}", path + ("kind",))


def _ports(spec, types, path):
    out = []
    for i, p in enumerate(spec or []):
        tname = _need(p, "type", path + (i,))
        if tname not in types:
            raise SpecError(f"unknown type {tname!r}", path + (i, "type"))
        out.append((_need(p, "name", path + (i,)), types[tname]))
    return out


def _resolve(doc: dict) -> SystemSpec:
    spec = SystemSpec(doc)
    for name, t in (doc.get("types") or {}).items():
        spec.types[name] = _ptype(t, name, ("types", name))
    for name, b in (doc.get("boxes") or {}).items():
        path = ("boxes", name)
        try:
            spec.boxes[name] = Box(_ports(b.get("inputs"), spec.types, path + ("inputs",)),
                                   _ports(b.get("outputs"), spec.types, path + ("outputs",)), name)
        except SpecError:
            raise
        except (ValueError, AttributeError) as e:
            raise SpecError(str(e), path) from None
    wdocs = doc.get("wirings") or {}
    for name in wdocs:
        _wiring(spec, wdocs, name, ())
    for name, m in (doc.get("machines") or {}).items():
        _machine(spec, name, m, ("machines", name))
    for name, c in (doc.get("composites") or {}).items():
        path = ("composites", name)
        w = _need(c, "wiring", path)
        if w not in spec.wirings:
            raise SpecError(f"unknown wiring {w!r}", path + ("wiring",))
        bind = c.get("bind") or {}
        spec.composites[name] = _binding(spec, w, bind, path)
    if not doc.get("composites"):
        for w in spec.wirings:
            try:
                spec.composites[w] = _binding(spec, w, {}, ("wirings", w))
            except SpecError:
                pass
    for name, c in (doc.get("contracts") or {}).items():
        spec.contracts[name] = _contract(spec, c, ("contracts", name))
    spec.run = doc.get("run") or {}
    r = spec.run
    if "composite" in r and r["composite"] not in spec.composites:
        raise SpecError(f"unknown composite {r['composite']!r}", ("run", "composite"))
    if "machine" in r and r["machine"] not in spec.machines:
        raise SpecError(f"unknown machine {r['machine']!r}", ("run", "machine"))
    return spec


def _binding(spec, wname, bind, path):
    flat = spec.wirings[wname]
    out = []
    for b in flat.boxes:
        mname = bind.get(b.label)
        if mname is None:
            cands = [m for m, bx in spec.machine_boxes.items() if bx == b.label]
            if b.label in spec.machines and spec.machine_boxes[b.label] == b.label:
                cands = [b.label]
            if len(cands) != 1:
                raise SpecError(f"no unique machine for box {b.label!r}", path + ("bind",))
            mname = cands[0]
        if mname not in spec.machines:
            raise SpecError(f"unknown machine {mname!r}", path + ("bind", b.label))
        if spec.machine_boxes[mname] != b.label:
            raise SpecError(f"machine {mname!r} inhabits {spec.machine_boxes[mname]!r}, not {b.label!r}",
                            path + ("bind", b.label))
        out.append(mname)
    return (wname, tuple(out))


def _wiring(spec, wdocs, name, stack) -> Flattened:
    if name in spec.wirings:
        return spec.wirings[name]
    path = ("wirings", name)
    if name in stack:
        raise SpecError(f"wiring {name!r} contains itself", path)
    w = wdocs[name]
    outer_name = _need(w, "outer", path)
    if outer_name not in spec.boxes:
        raise SpecError(f"unknown box {outer_name!r}", path + ("outer",))
    outer = spec.boxes[outer_name]
    inner_names = _need(w, "inner", path)
    boxes, nested = [], []
    for i, n in enumerate(inner_names):
        if n in spec.boxes:
            boxes.append(spec.boxes[n])
        elif n in wdocs:
            sub = _wiring(spec, wdocs, n, stack + (name,))
            boxes.append(sub.diagram.outer)
            nested.append((i, sub))
        else:
            raise SpecError(f"unknown box or wiring {n!r}", path + ("inner", i))
    feeds = w.get("feeds") or {}
    exposes = w.get("exposes") or {}
    by_label = {b.label: b for b in boxes}
    for x, src in feeds.items():
        bl, _, port = str(x).partition(".")
        if bl not in by_label or port not in by_label[bl].input_names:
            raise SpecError(f"dangling inner input port {x!r}", path + ("feeds", x))
        bl2, _, port2 = str(src).partition(".")
        if bl2 == outer.label:
            if port2 not in outer.input_names:
                raise SpecError(f"dangling outer input port {src!r}", path + ("feeds", x))
        elif bl2 not in by_label or port2 not in by_label[bl2].output_names:
            raise SpecError(f"dangling source port {src!r}", path + ("feeds", x))
    for y, src in exposes.items():
        if y not in outer.output_names:
            raise SpecError(f"dangling outer output port {y!r}", path + ("exposes", y))
        bl, _, port = str(src).partition(".")
        if bl not in by_label or port not in by_label[bl].output_names:
            raise SpecError(f"dangling inner output port {src!r}", path + ("exposes", y))
    try:
        flat = wire(boxes, outer, feeds, exposes)
    except ValueError as e:
        raise SpecError(str(e), path) from None
    rep = validate_wiring(flat.diagram)
    if not rep.ok:
        kind, side, port = rep.problems[0][:3]
        raise SpecError(f"{kind} at {side} {port!r}", path)
    # substitute from the right so earlier indices stay put
    for i, sub in reversed(nested):
        flat = substitute(flat, i, sub)
    spec.wirings[name] = flat
    return flat


def _need_types(box, cls, kind, path):
    for p in box.inputs + box.outputs:
        if not isinstance(p.type, cls):
            raise SpecError(f"{kind} machines need {cls.__name__} ports; {p.name!r} is {p.type!r}", path)


def _table_lookup(table, key, path):
    if isinstance(table, dict):
        if key in table:
            return table[key]
    else:
        for k, v in table:
            if _t(k) == key:
                return v
    raise SpecError(f"no entry for {key!r}", path)


def _machine(spec, name, m, path):
    kind = _need(m, "kind", path)
    bname = _need(m, "box", path)
    if bname not in spec.boxes:
        raise SpecError(f"unknown box {bname!r}", path + ("box",))
    box = spec.boxes[bname]
    spec.machine_boxes[name] = bname
    spec.machine_kinds[name] = kind
    try:
        spec.machines[name] = _build_machine(kind, box, m, path)
    except SpecError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise SpecError(f"invalid {kind} machine: {e}", path) from None


def _build_machine(kind, box, m, path):
    if kind == "moore":
        _need_types(box, FiniteSet, kind, path)
        states = _t(_need(m, "states", path))
        upd = {}
        for i, row in enumerate(_need(m, "update", path)):
            if not (isinstance(row, list) and len(row) == 3):
                raise SpecError("an update row is [inputs, state, next]", path + ("update", i))
            x, s, nxt = _t(row[0]), _t(row[1]), _t(row[2])
            upd[(x, s)] = nxt
        rd = _need(m, "readout", path)
        rdt = {s: _t(_table_lookup(rd, s, path + ("readout",))) for s in states}
        return MooreMachine(box, states, upd, rdt)
    if kind == "span":
        _need_types(box, GraphType, kind, path)
        S = _graph(_need(m, "state", path), path + ("state",))
        legs = []
        for leg in ("in", "out"):
            lm = m.get(leg) or {}
            if "project" in lm:
                legs.append(_projection(S, lm["project"], path + (leg,)))
                continue
            nodes, edges = lm.get("nodes", {}), lm.get("edges", {})
            legs.append((lambda v, t=nodes, l=leg: _t(_table_lookup(t, v, path + (l, "nodes"))),
                         lambda e, t=edges, l=leg: _t(_table_lookup(t, e, path + (l, "edges")))))
        return make_span(GRAPH, box, S, legs[0][0], legs[1][0], legs[0][1], legs[1][1])
    if kind == "delay":
        _need_types(box, GraphType, kind, path)
        from .spans import delay_discrete
        if len(box.inputs) != 1 or len(box.outputs) != 1 or box.inputs[0].type != box.outputs[0].type:
            raise SpecError("a delay box has one input and one output of the same graph type", path)
        d = delay_discrete(box.inputs[0].type.graph, int(m.get("steps", 1)))
        return MachineSpan(d.universe, box, d.in_map, d.out_map)
    if kind == "ode":
        _need_types(box, EuclideanSpace, kind, path)
        k = int(_need(m, "state_dim", path))
        nin = sum(p.type.dim for p in box.inputs)
        rows = tuple(tuple((float(c), tuple(int(e) for e in ex)) for c, ex in row)
                     for row in _need(m, "dyn", path))
        if len(rows) != k:
            raise SpecError("dyn needs one row per state coordinate", path + ("dyn",))
        field_ = PolyField(nin + k, rows)
        ro = m.get("readout", "identity")
        import numpy as np
        if ro == "identity":
            idx = list(range(k))
        else:
            idx = [int(i) for i in ro]
        if len(idx) != sum(p.type.dim for p in box.outputs):
            raise SpecError("readout width does not match the output ports", path + ("readout",))
        return OdeMachine(box, k, field_, lambda s, idx=np.array(idx, dtype=int): np.asarray(s, float)[idx],
                          field_)
    if kind in ("storage", "lts", "switch", "timed_delay"):
        _need_types(box, TimedAlphabet, kind, path)
        if kind == "storage":
            mon = m.get("monoid", "nat")
            if mon == "nat":
                monoid = None
            else:
                els = _t(_need(mon, "elements", path + ("monoid",)))
                table = {(a, b): _t(_table_lookup(mon["table"], (a, b), path + ("monoid", "table")))
                         for a in els for b in els}
                monoid = TableMonoid(els, table, _t(_need(mon, "unit", path + ("monoid",))))
            return storage_machine(monoid, m.get("drive", "joint"))
        if kind == "lts":
            labels, states = _t(_need(m, "labels", path)), _t(_need(m, "states", path))
            trans = _need(m, "transitions", path)
            E = tuple((_t(l), _t(s)) for l, s, _ in trans)
            tau = {(_t(l), _t(s)): _t(t) for l, s, t in trans}
            obs = {_t(s): _t(o) for s, o in (_need(m, "observe", path)).items()}
            return lts_machine(LTS(labels, states, E, tau, obs))
        if kind == "switch":
            return switch_machine(int(_need(m, "inputs", path)))
        return delay_machine(_q(_need(m, "eps", path)))
    raise SpecError(f"unknown machine kind {kind!r}", path + ("kind",))


def _projection(S, idx, path):
    """Coordinate projection out of a complete graph on tuples."""
    idx = [int(i) for i in idx]
    if any(e != (u, w) for e, u, w in zip(S.edges, S.src, S.tgt)):
        raise SpecError("project legs need a complete state graph", path)
    width = min((len(v) for v in S.nodes if isinstance(v, tuple)), default=0)
    if any(not isinstance(v, tuple) for v in S.nodes) or any(i >= width for i in idx):
        raise SpecError("project index outside the state tuples", path)
    return (lambda v: tuple(v[i] for i in idx),
            lambda e: tuple((e[0][i], e[1][i]) for i in idx))


def _contract(spec, c, path) -> Contract:
    bname = _need(c, "box", path)
    if bname not in spec.boxes:
        raise SpecError(f"unknown box {bname!r}", path + ("box",))
    box = spec.boxes[bname]
    H = int(c.get("horizon", 8))
    rule = c.get("rule") or {"kind": "full"}
    kind = rule.get("kind")
    try:
        if kind == "full":
            return full_contract(box, H)
        if kind == "response":
            return response_contract(box, _t(rule["trigger"]), _t(rule["response"]),
                                     int(rule.get("run", 2)), int(rule.get("within", 5)), H)
        if kind == "equal":
            return make_contract(box, lambda a, b: a == b, H)
    except (ValueError, KeyError) as e:
        raise SpecError(f"invalid contract: {e}", path) from None
    raise SpecError(f"unknown contract rule {kind!r}", path + ("rule", "kind"))


def kind_of(spec: SystemSpec, machine_name: str) -> str:
    return spec.machine_kinds[machine_name]


def is_timed(obj: Any) -> bool:
    return isinstance(obj, TimedMachine)
