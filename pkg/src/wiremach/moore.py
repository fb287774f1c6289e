"""Finite Moore machines and their wiring-diagram algebra.

Tables are explicit dictionaries so two machines can be compared for
equality entry by entry.  Inputs and outputs are tuples ordered by the
box's port declaration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .wiring import (Box, FiniteSet, WiringDiagram, WiringError, gather, input_gather,
                     output_gather, require_valid, route_inputs, route_outputs,
                     tensor_boxes)


class MachineError(ValueError):
    pass


def _elements(t):
    if not isinstance(t, FiniteSet):
        raise WiringError(f"Moore machines need finite-set ports, got {t!r}")
    return t.elements


def input_space(box: Box) -> list[tuple]:
    return list(itertools.product(*(_elements(p.type) for p in box.inputs)))


def output_space(box: Box) -> list[tuple]:
    return list(itertools.product(*(_elements(p.type) for p in box.outputs)))


@dataclass(frozen=True, eq=False)
class MooreMachine:
    """A finite Moore machine inhabiting ``box``.

    ``upd`` maps ``(input tuple, state)`` to a state and ``rdt`` maps a
    state to an output tuple; both must be total.
    """
    box: Box
    states: tuple
    upd: dict
    rdt: dict

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        ss = set(self.states)
        outs = set(output_space(self.box))
        for s in self.states:
            if s not in self.rdt:
                raise MachineError(f"readout undefined at state {s!r}")
            if tuple(self.rdt[s]) not in outs:
                raise MachineError(f"readout {self.rdt[s]!r} outside output type")
        for x in input_space(self.box):
            for s in self.states:
                nxt = self.upd.get((x, s), _MISSING)
                if nxt is _MISSING:
                    raise MachineError(f"update undefined at input {x!r}, state {s!r}")
                if nxt not in ss:
                    raise MachineError(f"update leaves the state set: {nxt!r}")

    @classmethod
    def from_functions(cls, box: Box, states: Sequence, upd: Callable, rdt: Callable) -> "MooreMachine":
        states = tuple(states)
        return cls(box, states,
                   {(x, s): upd(x, s) for x in input_space(box) for s in states},
                   {s: tuple(rdt(s)) for s in states})

    @property
    def input_type(self):
        return tuple(p.type for p in self.box.inputs)

    @property
    def output_type(self):
        return tuple(p.type for p in self.box.outputs)

    def __eq__(self, other):
        if not isinstance(other, MooreMachine):
            return NotImplemented
        return (self.box == other.box and self.states == other.states
                and self.upd == other.upd and self.rdt == other.rdt)

    __hash__ = None


_MISSING = object()


def _types_match(box: Box, inner: Box) -> bool:
    return ([p.type for p in box.inputs] == [p.type for p in inner.inputs]
            and [p.type for p in box.outputs] == [p.type for p in inner.outputs])


def dds_apply(phi: WiringDiagram, m: MooreMachine) -> MooreMachine:
    """Rewire ``m`` along ``phi``; the state set is unchanged."""
    require_valid(phi)
    if not _types_match(m.box, phi.inner):
        raise WiringError("machine ports do not match the diagram's inner box")
    gi, go = input_gather(phi), output_gather(phi)
    upd = {}
    for y in input_space(phi.outer):
        for s in m.states:
            upd[(y, s)] = m.upd[(gather(y + m.rdt[s], gi), s)]
    rdt = {s: gather(m.rdt[s], go) for s in m.states}
    return MooreMachine(phi.outer, m.states, upd, rdt)


def dds_tensor(*ms: MooreMachine) -> MooreMachine:
    """Product machine; states are tuples with one entry per factor."""
    box = tensor_boxes([m.box for m in ms])
    states = tuple(itertools.product(*(m.states for m in ms)))
    cuts = _cuts([len(m.box.inputs) for m in ms])
    upd = {}
    for x in input_space(box):
        parts = [x[a:b] for a, b in cuts]
        for s in states:
            upd[(x, s)] = tuple(m.upd[(xi, si)] for m, xi, si in zip(ms, parts, s))
    rdt = {s: sum((m.rdt[si] for m, si in zip(ms, s)), ()) for s in states}
    return MooreMachine(box, states, upd, rdt)


def _cuts(sizes):
    out, a = [], 0
    for k in sizes:
        out.append((a, a + k))
        a += k
    return out


def dds_compose(phi: WiringDiagram, machines: Sequence[MooreMachine]) -> MooreMachine:
    """``dds_apply(phi, dds_tensor(*machines))`` without building the tensor table.

    ``phi.inner`` must be the tensor of the machines' boxes.
    """
    require_valid(phi)
    ms = tuple(machines)
    box = tensor_boxes([m.box for m in ms], label=phi.inner.label)
    if box != phi.inner:
        raise WiringError("diagram inner box is not the tensor of the machine boxes")
    states = tuple(itertools.product(*(m.states for m in ms)))
    cuts = _cuts([len(m.box.inputs) for m in ms])
    gi, go = input_gather(phi), output_gather(phi)
    rdt_full = {s: sum((m.rdt[si] for m, si in zip(ms, s)), ()) for s in states}
    upd = {}
    for y in input_space(phi.outer):
        for s in states:
            x = gather(y + rdt_full[s], gi)
            upd[(y, s)] = tuple(m.upd[(x[a:b], si)] for m, (a, b), si in zip(ms, cuts, s))
    rdt = {s: gather(o, go) for s, o in rdt_full.items()}
    return MooreMachine(phi.outer, states, upd, rdt)


def trivial_machine() -> MooreMachine:
    return MooreMachine(Box((), (), "I"), ((),), {((), ()): ()}, {(): ()})


def dds_run(m: MooreMachine, inputs: Sequence[tuple], s0) -> list[tuple]:
    """Run from ``s0``; returns ``[(state, output), ...]`` of length len(inputs)+1."""
    if s0 not in m.states:
        raise MachineError(f"undeclared initial state {s0!r}")
    s = s0
    trace = [(s, m.rdt[s])]
    for k, x in enumerate(inputs):
        x = tuple(x)
        try:
            s = m.upd[(x, s)]
        except KeyError:
            raise MachineError(f"step {k}: undeclared input {x!r}") from None
        trace.append((s, m.rdt[s]))
    return trace


def network_oracle(boxes: Sequence[Box], machines: Sequence[MooreMachine], phi: WiringDiagram,
                   inputs: Sequence[tuple], initial_states: Sequence) -> list[tuple]:
    """Step a network of machines directly, one wire at a time.

    Independent of :func:`dds_apply`: readouts are computed, routed by
    name through :func:`route_inputs`, then every machine updates.
    The trace has the same shape as :func:`dds_run` on the composite,
    with the state a tuple of component states.
    """
    require_valid(phi)
    boxes = tuple(boxes)
    states = list(initial_states)
    for m, s in zip(machines, states):
        if s not in m.states:
            raise MachineError(f"undeclared initial state {s!r}")

    # a lone box may sit directly inside the diagram, without a tensor prefix
    bare = len(boxes) == 1 and phi.inner == boxes[0]
    qual = (lambda b, p: p.name) if bare else (lambda b, p: f"{b.label}.{p.name}")

    def readouts():
        vals = {}
        for b, m, s in zip(boxes, machines, states):
            for p, v in zip(b.outputs, m.rdt[s]):
                vals[qual(b, p)] = v
        return vals

    def outer_out(vals):
        r = route_outputs(phi, vals)
        return tuple(r[n] for n in phi.outer.output_names)

    vals = readouts()
    trace = [(tuple(states), outer_out(vals))]
    for k, y in enumerate(inputs):
        yv = dict(zip(phi.outer.input_names, tuple(y)))
        try:
            routed = route_inputs(phi, yv, vals)
        except WiringError as e:
            raise MachineError(f"step {k}: {e}") from None
        for i, (b, m) in enumerate(zip(boxes, machines)):
            x = tuple(routed[qual(b, p)] for p in b.inputs)
            states[i] = m.upd[(x, states[i])]
        vals = readouts()
        trace.append((tuple(states), outer_out(vals)))
    return trace
