"""Finite-horizon safety contracts on graph machines.

A contract lists, for every length ``n <= H``, the allowed pairs
``(inputs, outputs)``.  Each side is a tuple of paths, one per port,
all of length ``n``.  Allowed sets are closed under restriction to
subintervals but not under gluing.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .graphs import Graph, Path, paths, restrict_section
from .spans import MachineSpan, compose_machine
from .wiring import (Box, GraphType, WiringDiagram, WiringError, gather, input_gather,
                     output_gather, require_valid, tensor_box)

DEFAULT_HORIZON = 8


class ContractViolation(ValueError):
    def __init__(self, witness):
        super().__init__(f"machine leaves the contract on {witness!r}")
        self.witness = witness


def port_graphs(ports) -> tuple:
    out = []
    for p in ports:
        if not isinstance(p.type, GraphType):
            raise WiringError(f"contracts need graph-typed ports, {p.name!r} is {p.type!r}")
        out.append(p.type.graph)
    return tuple(out)


def restrict_pair(pair, p: int, n: int):
    a, b = pair
    return (tuple(restrict_section(x, p, n) for x in a), tuple(restrict_section(x, p, n) for x in b))


def _extend(x: Path, G: Graph) -> list[Path]:
    return [Path(x.vertices + (G.target(e),), x.edges + (e,)) for e in G.out_edges[x.end]]


@dataclass(frozen=True)
class Contract:
    box: Box
    horizon: int
    allowed: tuple          # allowed[n] is a frozenset of pairs, n = 0..horizon

    @property
    def in_graphs(self):
        return port_graphs(self.box.inputs)

    @property
    def out_graphs(self):
        return port_graphs(self.box.outputs)

    def allows(self, pair) -> bool:
        n = _pair_length(pair)
        if n < 0:
            # no ports: the empty pair stands for every length
            return any(pair in s for s in self.allowed)
        return n <= self.horizon and pair in self.allowed[n]

    def sizes(self) -> list[int]:
        return [len(s) for s in self.allowed]


def _pair_length(pair) -> int:
    for x in itertools.chain(*pair):
        return x.length
    return -1


def _all_pairs(ins, outs, n):
    sides = [paths(G, n) for G in ins] + [paths(G, n) for G in outs]
    k = len(ins)
    for combo in itertools.product(*sides):
        yield (combo[:k], combo[k:])


def make_contract(box: Box, predicate: Callable, horizon: int = DEFAULT_HORIZON) -> Contract:
    """Largest restriction-closed family inside ``predicate``.

    ``predicate(inputs, outputs)`` receives tuples of per-port paths.
    Length ``n`` candidates are grown one step from the allowed length
    ``n-1`` pairs, so anything whose left part is excluded is never
    built.

    A predicate with a ``window`` attribute promises to hold exactly
    when it holds on every restriction of that length; then only the
    newest window of each candidate is tested.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    ins, outs = port_graphs(box.inputs), port_graphs(box.outputs)
    graphs = ins + outs
    k = len(ins)
    w = getattr(predicate, "window", None)
    allowed = [frozenset(p for p in _all_pairs(ins, outs, 0) if predicate(*p))]
    for n in range(1, horizon + 1):
        prev = allowed[-1]
        keep = set()
        for a, b in prev:
            xs = a + b
            for combo in itertools.product(*(_extend(x, G) for x, G in zip(xs, graphs))):
                pair = (combo[:k], combo[k:])
                if w is not None:
                    ok = predicate(*restrict_pair(pair, n - w, w)) if n >= w else predicate(*pair)
                else:
                    ok = restrict_pair(pair, 1, n - 1) in prev and predicate(*pair)
                if ok:
                    keep.add(pair)
        allowed.append(frozenset(keep))
    return Contract(box, horizon, tuple(allowed))


def full_contract(box: Box, horizon: int = DEFAULT_HORIZON) -> Contract:
    return make_contract(box, lambda a, b: True, horizon)


def contract_from_sets(box: Box, allowed: Sequence, horizon: int | None = None) -> Contract:
    """Close an explicit family downward (keep what all restrictions allow)."""
    sets = [set(s) for s in allowed]
    H = len(sets) - 1 if horizon is None else horizon
    sets += [set()] * (H + 1 - len(sets))
    out = [frozenset(sets[0])]
    for n in range(1, H + 1):
        prev = out[-1]
        out.append(frozenset(p for p in sets[n]
                             if restrict_pair(p, 0, n - 1) in prev and restrict_pair(p, 1, n - 1) in prev))
    return Contract(box, H, tuple(out))


def is_restriction_closed(c: Contract) -> bool:
    for n in range(1, c.horizon + 1):
        for pair in c.allowed[n]:
            for p in range(n + 1):
                for m in range(n - p + 1):
                    if restrict_pair(pair, p, m) not in c.allowed[m]:
                        return False
    return True


def contained_in(c1: Contract, c2: Contract) -> bool:
    H = min(c1.horizon, c2.horizon)
    return all(c1.allowed[n] <= c2.allowed[n] for n in range(H + 1))


def split_path(x: Path, k: int) -> tuple:
    """A path in a k-fold product graph as k paths."""
    return tuple(Path(tuple(v[i] for v in x.vertices), tuple(e[i] for e in x.edges)) for i in range(k))


def machine_pair(m: MachineSpan, x: Path):
    return (split_path(m.in_map.on_path(x), len(m.box.inputs)),
            split_path(m.out_map.on_path(x), len(m.box.outputs)))


@dataclass
class Validation:
    ok: bool
    witness: object = None

    def __bool__(self):
        return self.ok


def _step_pair(pair, ea, eb, ins, outs):
    a, b = pair
    return (tuple(Path(x.vertices + (G.target(c),), x.edges + (c,)) for x, c, G in zip(a, ea, ins)),
            tuple(Path(x.vertices + (G.target(c),), x.edges + (c,)) for x, c, G in zip(b, eb, outs)))


def _frontiers(m: MachineSpan, horizon: int):
    """Per length, a map ``(end state, pair) -> one state section`` realizing it.

    Sections with the same end state and the same image extend alike,
    so keeping one of each keeps the set of images exact.
    """
    S = m.state
    ins, outs = port_graphs(m.box.inputs), port_graphs(m.box.outputs)
    pin, pout = m.in_map.edges, m.out_map.edges
    layer = {}
    for v in S.nodes:
        x = Path((v,), ())
        layer.setdefault((v, machine_pair(m, x)), x)
    for n in range(horizon + 1):
        yield n, layer
        if n == horizon:
            return
        nxt = {}
        for (v, pair), x in layer.items():
            for e in S.out_edges[v]:
                w = S.target(e)
                key = (w, _step_pair(pair, pin[e], pout[e], ins, outs))
                if key not in nxt:
                    nxt[key] = Path(x.vertices + (w,), x.edges + (e,))
        layer = nxt


def validates(m: MachineSpan, c: Contract, horizon: int | None = None) -> Validation:
    """Shortest state section whose image leaves the contract, if any."""
    H = c.horizon if horizon is None else min(horizon, c.horizon)
    for n, layer in _frontiers(m, H):
        ok = c.allowed[n]
        for (_, pair), x in layer.items():
            if pair not in ok:
                return Validation(False, (x, pair))
    return Validation(True)


def image_contract(m: MachineSpan, horizon: int = DEFAULT_HORIZON) -> Contract:
    """Behaviours the machine can show; always restriction-closed."""
    allowed = [frozenset(pair for _, pair in layer) for _, layer in _frontiers(m, horizon)]
    return Contract(m.box, horizon, tuple(allowed))


def _check_box(phi: WiringDiagram, c: Contract):
    inner = phi.inner
    if [p.type for p in inner.inputs] != [p.type for p in c.box.inputs] or \
            [p.type for p in inner.outputs] != [p.type for p in c.box.outputs]:
        raise WiringError("contract ports do not match the diagram's inner box")


def compose_contract(phi: WiringDiagram, c: Contract) -> Contract:
    """Pull back along the input routing, then take the image of the outputs."""
    require_valid(phi)
    _check_box(phi, c)
    gi, go = input_gather(phi), output_gather(phi)
    Ys = port_graphs(phi.outer.inputs)
    ny = len(Ys)
    allowed = []
    for n in range(c.horizon + 1):
        doms = None
        keep = set()
        for a, b in c.allowed[n]:
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
            if free and doms is None:
                doms = [paths(G, n) for G in Ys]
            for choice in itertools.product(*((doms[j] for j in free) if free else ())):
                for j, x in zip(free, choice):
                    y[j] = x
                keep.add((tuple(y), gather(b, go)))
        allowed.append(frozenset(keep))
    return Contract(phi.outer, c.horizon, tuple(allowed))


def compose_contract_bruteforce(phi: WiringDiagram, c: Contract) -> Contract:
    """Oracle for :func:`compose_contract`: enumerate every (y, b)."""
    require_valid(phi)
    gi, go = input_gather(phi), output_gather(phi)
    Ys, Xs = port_graphs(phi.outer.inputs), port_graphs(phi.inner.outputs)
    ny = len(Ys)
    allowed = []
    for n in range(c.horizon + 1):
        keep = set()
        for combo in itertools.product(*[paths(G, n) for G in Ys + Xs]):
            y, b = combo[:ny], combo[ny:]
            if (gather(combo, gi), b) in c.allowed[n]:
                keep.add((y, gather(b, go)))
        allowed.append(frozenset(keep))
    return Contract(phi.outer, c.horizon, tuple(allowed))


def tensor_contract(c1: Contract, c2: Contract) -> Contract:
    H = min(c1.horizon, c2.horizon)
    allowed = tuple(frozenset((a1 + a2, b1 + b2) for a1, b1 in c1.allowed[n] for a2, b2 in c2.allowed[n])
                    for n in range(H + 1))
    return Contract(tensor_box(c1.box, c2.box), H, allowed)


@dataclass(frozen=True)
class ContractedMachine:
    machine: MachineSpan
    contract: Contract


def contracted_pair(m: MachineSpan, c: Contract) -> ContractedMachine:
    v = validates(m, c)
    if not v.ok:
        raise ContractViolation(v.witness)
    return ContractedMachine(m, c)


def compose_contracted(phi: WiringDiagram, cm: ContractedMachine) -> ContractedMachine:
    """Compose both parts; the composite is validated again on the way out."""
    return contracted_pair(compose_machine(phi, cm.machine), compose_contract(phi, cm.contract))


def response_predicate(trigger, response, run: int = 2, within: int = 5) -> Callable:
    """``run`` consecutive ``trigger`` inputs force a ``response`` output soon after.

    On every window of ``run + within - 1`` steps: if the first ``run``
    input values equal ``trigger``, the next ``within`` output values
    (counted from index ``run``) contain ``response``.  Single input and
    output port.
    """
    span = run + within - 1

    def pred(a, b):
        i, j = a[0].vertices, b[0].vertices
        n = len(i) - 1
        for s in range(0, n - span + 1):
            if all(v == trigger for v in i[s:s + run]) and response not in j[s + run:s + span + 1]:
                return False
        return True

    pred.window = span
    return pred


@functools.lru_cache(maxsize=16)
def response_contract(box: Box, trigger, response, run: int = 2, within: int = 5,
                      horizon: int = DEFAULT_HORIZON) -> Contract:
    """Contract of :func:`response_predicate`, cached since long horizons are slow."""
    return make_contract(box, response_predicate(trigger, response, run, within), horizon)


def two_trues_contract(box: Box, horizon: int = DEFAULT_HORIZON, true="T", false="F") -> Contract:
    """Two True inputs in a row must be followed by a False within five steps."""
    return response_contract(box, true, false, 2, 5, horizon)
