"""Typed boxes, wiring diagrams, and their composition.

A wiring diagram ``X -> Y`` says, for every inner input port, which
inner output or outer input feeds it, and for every outer output port,
which inner output it exposes.  Products of port values are always
ordered by port declaration order, so laws that hold "up to
isomorphism" hold here as literal equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence


class WiringError(ValueError):
    """Raised when boxes or diagrams do not fit together."""


# -- port types ------------------------------------------------------------

@dataclass(frozen=True)
class FiniteSet:
    name: str
    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if len(set(self.elements)) != len(self.elements):
            raise WiringError(f"finite set {self.name!r} has repeated elements")

    def contains(self, value) -> bool:
        return value in self.elements


@dataclass(frozen=True)
class EuclideanSpace:
    dim: int

    def __post_init__(self):
        if self.dim < 0:
            raise WiringError("negative dimension")

    def contains(self, value) -> bool:
        try:
            return len(value) == self.dim
        except TypeError:
            return False


@dataclass(frozen=True)
class GraphType:
    """Port whose sections are paths in ``graph``."""
    graph: Any

    def contains(self, value) -> bool:
        return value in self.graph.node_set or value in self.graph.edge_set


@dataclass(frozen=True)
class TimedAlphabet:
    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if len(set(self.symbols)) != len(self.symbols):
            raise WiringError("timed alphabet has repeated symbols")

    def contains(self, value) -> bool:
        return value in self.symbols


PortType = FiniteSet | EuclideanSpace | GraphType | TimedAlphabet


# -- boxes -----------------------------------------------------------------

@dataclass(frozen=True)
class Port:
    name: str
    type: Any


def _ports(spec) -> tuple[Port, ...]:
    if isinstance(spec, Mapping):
        spec = list(spec.items())
    out = tuple(p if isinstance(p, Port) else Port(*p) for p in spec)
    names = [p.name for p in out]
    if len(set(names)) != len(names):
        raise WiringError(f"duplicate port names in {names}")
    return out


@dataclass(frozen=True)
class Box:
    """An interface: ordered typed inputs and outputs, plus a label.

    ``inputs`` and ``outputs`` accept a mapping or a sequence of
    ``(name, type)`` pairs; declaration order is kept.
    """
    inputs: tuple = ()
    outputs: tuple = ()
    label: str = "X"

    def __post_init__(self):
        object.__setattr__(self, "inputs", _ports(self.inputs))
        object.__setattr__(self, "outputs", _ports(self.outputs))

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.outputs)

    def input_type(self, name):
        for p in self.inputs:
            if p.name == name:
                return p.type
        raise KeyError(name)

    def output_type(self, name):
        for p in self.outputs:
            if p.name == name:
                return p.type
        raise KeyError(name)

    def relabel(self, label: str) -> "Box":
        return Box(self.inputs, self.outputs, label)


EMPTY_BOX = Box((), (), "")


# -- wiring diagrams -------------------------------------------------------

@dataclass(frozen=True)
class InnerOut:
    port: str


@dataclass(frozen=True)
class OuterIn:
    port: str


def _freeze_map(m) -> tuple:
    if isinstance(m, Mapping):
        m = m.items()
    return tuple((k, v) for k, v in m)


@dataclass(frozen=True)
class WiringDiagram:
    """A morphism ``inner -> outer`` of boxes.

    ``phi_in`` maps inner input names to ``InnerOut``/``OuterIn``;
    ``phi_out`` maps outer output names to inner output names.  Both are
    stored as pairs ordered by the relevant port declaration, so equal
    diagrams compare equal.  Construction does not validate; see
    :func:`validate_wiring`.
    """
    inner: Box
    outer: Box
    phi_in: tuple = ()
    phi_out: tuple = ()

    def __post_init__(self):
        pin = dict(_freeze_map(self.phi_in))
        pout = dict(_freeze_map(self.phi_out))
        order_in = {n: i for i, n in enumerate(self.inner.input_names)}
        order_out = {n: i for i, n in enumerate(self.outer.output_names)}
        key_in = lambda kv: (order_in.get(kv[0], len(order_in)), str(kv[0]))
        key_out = lambda kv: (order_out.get(kv[0], len(order_out)), str(kv[0]))
        object.__setattr__(self, "phi_in", tuple(sorted(pin.items(), key=key_in)))
        object.__setattr__(self, "phi_out", tuple(sorted(pout.items(), key=key_out)))

    @property
    def phi_in_map(self) -> dict:
        return dict(self.phi_in)

    @property
    def phi_out_map(self) -> dict:
        return dict(self.phi_out)


@dataclass
class ValidationReport:
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self):
        return self.ok


def validate_wiring(wd: WiringDiagram) -> ValidationReport:
    """Check totality and type agreement of both routing maps."""
    rep = ValidationReport()
    pin, pout = wd.phi_in_map, wd.phi_out_map
    in_outer = {p.name: p.type for p in wd.outer.inputs}
    out_inner = {p.name: p.type for p in wd.inner.outputs}
    for p in wd.inner.inputs:
        if p.name not in pin:
            rep.problems.append(("missing", "inner input", p.name))
            continue
        src = pin[p.name]
        if isinstance(src, InnerOut):
            t = out_inner.get(src.port)
        elif isinstance(src, OuterIn):
            t = in_outer.get(src.port)
        else:
            rep.problems.append(("bad source", "inner input", p.name, src))
            continue
        if t is None:
            rep.problems.append(("dangling", "inner input", p.name, src))
        elif t != p.type:
            rep.problems.append(("type mismatch", "inner input", p.name, src))
    for k in pin:
        if k not in wd.inner.input_names:
            rep.problems.append(("unknown port", "inner input", k))
    for p in wd.outer.outputs:
        if p.name not in pout:
            rep.problems.append(("missing", "outer output", p.name))
            continue
        t = out_inner.get(pout[p.name])
        if t is None:
            rep.problems.append(("dangling", "outer output", p.name, pout[p.name]))
        elif t != p.type:
            rep.problems.append(("type mismatch", "outer output", p.name, pout[p.name]))
    for k in pout:
        if k not in wd.outer.output_names:
            rep.problems.append(("unknown port", "outer output", k))
    return rep


def require_valid(wd: WiringDiagram) -> WiringDiagram:
    rep = validate_wiring(wd)
    if not rep.ok:
        raise WiringError(f"invalid wiring diagram: {rep.problems}")
    return wd


def identity(box: Box) -> WiringDiagram:
    return WiringDiagram(
        box, box,
        [(n, OuterIn(n)) for n in box.input_names],
        [(n, n) for n in box.output_names],
    )


def compose_wd(psi: WiringDiagram, phi: WiringDiagram) -> WiringDiagram:
    """Composite ``psi . phi`` of ``phi: X -> Y`` and ``psi: Y -> Z``."""
    if phi.outer != psi.inner:
        raise WiringError("box mismatch: phi.outer != psi.inner")
    pin, pout = phi.phi_in_map, phi.phi_out_map
    qin, qout = psi.phi_in_map, psi.phi_out_map
    new_in = []
    for x in phi.inner.input_names:
        r = pin[x]
        if isinstance(r, OuterIn):
            t = qin[r.port]
            # an inner output of Y is some inner output of X, via phi_out
            r = t if isinstance(t, OuterIn) else InnerOut(pout[t.port])
        new_in.append((x, r))
    new_out = [(z, pout[qout[z]]) for z in psi.outer.output_names]
    return WiringDiagram(phi.inner, psi.outer, new_in, new_out)


# -- tensor ----------------------------------------------------------------

def tensor_boxes(boxes: Sequence[Box], label: str | None = None) -> Box:
    """Parallel juxtaposition; ports are renamed ``<label>.<port>``."""
    labels = [b.label for b in boxes]
    if len(set(labels)) != len(labels):
        raise WiringError(f"tensor needs distinct labels, got {labels}")
    ins = [Port(f"{b.label}.{p.name}", p.type) for b in boxes for p in b.inputs]
    outs = [Port(f"{b.label}.{p.name}", p.type) for b in boxes for p in b.outputs]
    if label is None:
        label = "+".join(labels)
    return Box(ins, outs, label)


def tensor_box(b1: Box, b2: Box) -> Box:
    return tensor_boxes([b1, b2])


def tensor_wds(wds: Sequence[WiringDiagram]) -> WiringDiagram:
    inner = tensor_boxes([w.inner for w in wds])
    outer = tensor_boxes([w.outer for w in wds])
    pin, pout = [], []
    for w in wds:
        a, b = w.inner.label, w.outer.label
        for x, r in w.phi_in:
            if isinstance(r, InnerOut):
                r = InnerOut(f"{a}.{r.port}")
            else:
                r = OuterIn(f"{b}.{r.port}")
            pin.append((f"{a}.{x}", r))
        for y, x in w.phi_out:
            pout.append((f"{b}.{y}", f"{a}.{x}"))
    return WiringDiagram(inner, outer, pin, pout)


def tensor_wd(wd1: WiringDiagram, wd2: WiringDiagram) -> WiringDiagram:
    return tensor_wds([wd1, wd2])


# -- operadic view ---------------------------------------------------------

@dataclass(frozen=True)
class Flattened:
    """A unary diagram out of a tensor, remembering where ports came from.

    ``provenance`` maps each qualified inner port name to
    ``(box index, local port name)``.
    """
    boxes: tuple
    diagram: WiringDiagram
    provenance: tuple

    @property
    def provenance_map(self) -> dict:
        return dict(self.provenance)


def flatten_operadic(inner_boxes: Sequence[Box], wd: WiringDiagram) -> Flattened:
    boxes = tuple(inner_boxes)
    if len(boxes) == 1 and wd.inner == boxes[0]:
        prov = [(p.name, (0, p.name)) for p in boxes[0].inputs + boxes[0].outputs]
        return Flattened(boxes, wd, tuple(prov))
    expect = tensor_boxes(boxes, label=wd.inner.label)
    if wd.inner.inputs != expect.inputs or wd.inner.outputs != expect.outputs:
        raise WiringError("inner box is not the tensor of the given boxes")
    prov = []
    for i, b in enumerate(boxes):
        for p in b.inputs + b.outputs:
            prov.append((f"{b.label}.{p.name}", (i, p.name)))
    return Flattened(boxes, wd, tuple(prov))


def wire(boxes: Sequence[Box], outer: Box, feeds: Mapping, exposes: Mapping) -> Flattened:
    """Build an n-ary diagram from qualified names.

    ``feeds`` maps ``"Box.port"`` (an inner input) to either
    ``"Box.port"`` (an inner output) or ``"<outer label>.port"``.
    ``exposes`` maps outer output names to qualified inner outputs.
    """
    inner = tensor_boxes(boxes)
    outs = set(inner.output_names)
    pin = {}
    for x, src in feeds.items():
        if src in outs:
            pin[x] = InnerOut(src)
        else:
            head, _, port = src.partition(".")
            if head != outer.label:
                raise WiringError(f"unknown source {src!r} for {x!r}")
            pin[x] = OuterIn(port)
    pout = {y: x for y, x in exposes.items()}
    return flatten_operadic(boxes, WiringDiagram(inner, outer, pin, pout))


def rename_inner(wd: WiringDiagram, inner: Box, mapping: Mapping[str, str]) -> WiringDiagram:
    """Same diagram with inner ports renamed through ``mapping``."""
    pin = []
    for x, r in wd.phi_in:
        if isinstance(r, InnerOut):
            r = InnerOut(mapping[r.port])
        pin.append((mapping[x], r))
    pout = [(y, mapping[x]) for y, x in wd.phi_out]
    return WiringDiagram(inner, wd.outer, pin, pout)


def substitute(outer: Flattened, index: int, inner: Flattened) -> Flattened:
    """Plug ``inner`` (whose outer box is ``outer.boxes[index]``) into ``outer``."""
    target = outer.boxes[index]
    if inner.diagram.outer != target:
        raise WiringError(f"substituted diagram does not land on box {target.label!r}")
    parts = []
    for i, b in enumerate(outer.boxes):
        parts.append(inner.diagram if i == index else identity(b))
    big = tensor_wds(parts)
    glued = compose_wd(outer.diagram, _match_inner(big, outer.diagram.inner))
    boxes = outer.boxes[:index] + inner.boxes + outer.boxes[index + 1:]
    flat_inner = tensor_boxes(boxes)
    mapping = {}
    for i, b in enumerate(outer.boxes):
        if i == index:
            for ib in inner.boxes:
                for p in ib.inputs + ib.outputs:
                    mapping[f"{inner.diagram.inner.label}.{ib.label}.{p.name}"] = f"{ib.label}.{p.name}"
        else:
            for p in b.inputs + b.outputs:
                mapping[f"{b.label}.{p.name}"] = f"{b.label}.{p.name}"
    if len(inner.boxes) == 1 and inner.diagram.inner == inner.boxes[0]:
        ib = inner.boxes[0]
        for p in ib.inputs + ib.outputs:
            mapping[f"{ib.label}.{p.name}"] = f"{ib.label}.{p.name}"
    return flatten_operadic(boxes, rename_inner(glued, flat_inner, mapping))


def _match_inner(big: WiringDiagram, want: Box) -> WiringDiagram:
    # the tensor of the identities carries a generated label; align it
    if big.outer.inputs != want.inputs or big.outer.outputs != want.outputs:
        raise WiringError("shape mismatch while substituting")
    return WiringDiagram(big.inner, want, big.phi_in, big.phi_out)


# -- routing ---------------------------------------------------------------

def _check(t, v, where):
    if hasattr(t, "contains") and not t.contains(v):
        raise WiringError(f"value {v!r} does not belong to the type of {where}")


def route_inputs(wd: WiringDiagram, outer_input_values: Mapping, inner_output_values: Mapping) -> dict:
    """Evaluate the input routing on named values."""
    for p in wd.outer.inputs:
        _check(p.type, outer_input_values[p.name], f"outer input {p.name!r}")
    for p in wd.inner.outputs:
        _check(p.type, inner_output_values[p.name], f"inner output {p.name!r}")
    res = {}
    for x, r in wd.phi_in:
        if isinstance(r, InnerOut):
            res[x] = inner_output_values[r.port]
        else:
            res[x] = outer_input_values[r.port]
    return res


def route_outputs(wd: WiringDiagram, inner_output_values: Mapping) -> dict:
    for p in wd.inner.outputs:
        _check(p.type, inner_output_values[p.name], f"inner output {p.name!r}")
    return {y: inner_output_values[x] for y, x in wd.phi_out}


def input_gather(wd: WiringDiagram) -> tuple[int, ...]:
    """Indices realizing the input routing on tuples.

    Applied to ``y + x_out`` (outer inputs then inner outputs, both in
    declaration order) the result is the inner input tuple.
    """
    ny = len(wd.outer.inputs)
    yi = {n: i for i, n in enumerate(wd.outer.input_names)}
    xi = {n: ny + i for i, n in enumerate(wd.inner.output_names)}
    pin = wd.phi_in_map
    idx = []
    for x in wd.inner.input_names:
        r = pin[x]
        idx.append(xi[r.port] if isinstance(r, InnerOut) else yi[r.port])
    return tuple(idx)


def output_gather(wd: WiringDiagram) -> tuple[int, ...]:
    xi = {n: i for i, n in enumerate(wd.inner.output_names)}
    pout = wd.phi_out_map
    return tuple(xi[pout[y]] for y in wd.outer.output_names)


def gather(seq, idx) -> tuple:
    return tuple(seq[i] for i in idx)


def map_types(wd: WiringDiagram, f) -> WiringDiagram:
    """Apply ``f`` to every port type, keeping the wiring."""
    def mb(b):
        return Box([(p.name, f(p.type)) for p in b.inputs],
                   [(p.name, f(p.type)) for p in b.outputs], b.label)
    return WiringDiagram(mb(wd.inner), mb(wd.outer), wd.phi_in, wd.phi_out)


def map_box_types(box: Box, f) -> Box:
    return Box([(p.name, f(p.type)) for p in box.inputs],
               [(p.name, f(p.type)) for p in box.outputs], box.label)
