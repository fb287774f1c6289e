"""``wiremach compose|simulate|check|contract <file>``.

Exit status: 0 on success, 1 when a check or contract fails (the
report is still written), 2 on input errors.
"""

from __future__ import annotations

import argparse
import functools
import json
import random
import sys
from fractions import Fraction

import numpy as np
import yaml

from .contracts import (Contract, compose_contract, make_contract, full_contract, response_contract,
                        tensor_contract, validates)
from .graphs import Graph
from .moore import MooreMachine, dds_compose, input_space
from .ode import OdeMachine, cds_apply, integrate, ode_tensor
from .spans import (MachineSpan, beta_from_dds, check_inertial, check_total_det, compose_machine,
                    describe_graph, tensor_machine)
from .sysfile import SpecError, SystemSpec, load_system
from .timed import (Q, TimedMachine, TraceError, constant, execute_timed, fmt_q, from_events,
                    storage_input)
from .wiring import Flattened, InnerOut, WiringError


class CommandError(ValueError):
    """The spec is well-formed but cannot be run as asked."""


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(u) for u in v]
    if isinstance(v, Fraction):
        return fmt_q(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, tuple):
        return "(" + ",".join(_cell(u) for u in v) + ")"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else fmt_q(v)
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def _tsv(header, rows) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(_cell(c) for c in r) for r in rows]
    return "\n".join(lines) + "\n"


# -- composition -----------------------------------------------------------

def _composite_parts(spec: SystemSpec, name: str):
    wname, mnames = spec.composites[name]
    flat: Flattened = spec.wirings[wname]
    kinds = {spec.machine_kinds[m] for m in mnames}
    return flat, mnames, kinds


def _family(kinds) -> str:
    fams = {"moore": "moore", "span": "span", "delay": "span", "ode": "ode"}
    out = {fams.get(k, "timed") for k in kinds}
    if len(out) != 1:
        raise CommandError(f"cannot compose machines of different kinds {sorted(kinds)}")
    return out.pop()


def _as_span(spec, mname):
    m = spec.machines[mname]
    return beta_from_dds(m) if isinstance(m, MooreMachine) else m


def compose_composite(spec: SystemSpec, name: str):
    """The library object for a composite: Moore, span, or ODE machine."""
    flat, mnames, kinds = _composite_parts(spec, name)
    fam = _family(kinds)
    ms = [spec.machines[m] for m in mnames]
    phi = flat.diagram
    if fam == "moore":
        return dds_compose(phi, ms)
    if fam == "span":
        m = functools.reduce(tensor_machine, ms)
        return compose_machine(phi, m)
    if fam == "ode":
        return cds_apply(phi, ode_tensor(*ms))
    raise CommandError("timed machines are simulated one at a time; they have no composite here")


def _graph_doc(G: Graph) -> dict:
    return {"nodes": len(G.nodes), "edges": len(G.edges), "shape": describe_graph(G)}


def _diagram_doc(flat: Flattened) -> dict:
    d = flat.diagram
    return {"outer": d.outer.label,
            "boxes": [b.label for b in flat.boxes],
            "feeds": {x: (r.port if isinstance(r, InnerOut) else f"{d.outer.label}.{r.port}")
                      for x, r in d.phi_in},
            "exposes": dict(d.phi_out)}


def machine_doc(m) -> dict:
    if isinstance(m, MooreMachine):
        return {"kind": "moore", "box": m.box.label,
                "states": [_plain(s) for s in m.states],
                "readout": [[_plain(s), _plain(m.rdt[s])] for s in m.states],
                "update": [[_plain(x), _plain(s), _plain(m.upd[(x, s)])]
                           for x in input_space(m.box) for s in m.states]}
    if isinstance(m, MachineSpan):
        return {"kind": "span", "box": m.box.label, "state": _graph_doc(m.state),
                "input": _graph_doc(m.A), "output": _graph_doc(m.B)}
    if isinstance(m, OdeMachine):
        return {"kind": "ode", "box": m.box.label, "state_dim": m.state_dim,
                "input_dim": m.input_dim, "output_dim": m.output_dim}
    raise CommandError(f"no description for {type(m).__name__}")


def cmd_compose(spec: SystemSpec, args) -> tuple[str, int]:
    doc = {"wirings": {w: _diagram_doc(f) for w, f in spec.wirings.items()}, "composites": {}}
    for name in _targets(spec):
        m = compose_composite(spec, name)
        doc["composites"][name] = {"wiring": spec.composites[name][0],
                                   "bind": list(spec.composites[name][1]), "machine": machine_doc(m)}
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=None), 0


def _targets(spec):
    r = spec.run
    if "composite" in r:
        return [r["composite"]]
    return list(spec.composites)


# -- simulation ------------------------------------------------------------

def _tt(v):
    return tuple(_tt(u) for u in v) if isinstance(v, list) else v


def cmd_simulate(spec: SystemSpec, args) -> tuple[str, int]:
    r = spec.run
    if "machine" in r:
        m = spec.machines[r["machine"]]
        box = spec.boxes[spec.machine_boxes[r["machine"]]]
        if isinstance(m, TimedMachine):
            return _simulate_timed(m, box, r, args), 0
        if isinstance(m, OdeMachine):
            return _simulate_ode(m, box, r, args), 0
        if isinstance(m, MooreMachine):
            return _simulate_moore(m, [box], [m], box, r, args), 0
        raise CommandError("span machines are checked, not simulated")
    if "composite" not in r:
        raise CommandError("run needs a composite or a machine")
    name = r["composite"]
    flat, mnames, kinds = _composite_parts(spec, name)
    fam = _family(kinds)
    comp = compose_composite(spec, name)
    if fam == "moore":
        ms = [spec.machines[m] for m in mnames]
        return _simulate_moore(comp, list(flat.boxes), ms, flat.diagram.outer, r, args), 0
    if fam == "ode":
        return _simulate_ode(comp, flat.diagram.outer, r, args), 0
    raise CommandError("span machines are checked, not simulated")


def _simulate_moore(comp: MooreMachine, boxes, ms, outer, r, args) -> str:
    inputs = [_tt(x) for x in r.get("inputs", [])]
    if args.steps is not None:
        if args.steps > len(inputs):
            rng = random.Random(args.seed)
            space = input_space(comp.box)
            inputs += [rng.choice(space) for _ in range(args.steps - len(inputs))]
        inputs = inputs[:args.steps]
    init = r.get("initial", {})
    if len(ms) == 1 and comp is ms[0]:
        s0 = _tt(init.get(boxes[0].label, ms[0].states[0])) if isinstance(init, dict) else _tt(init)
    else:
        s0 = tuple(_tt(init.get(b.label, m.states[0])) for b, m in zip(boxes, ms))
    if s0 not in comp.states:
        raise CommandError(f"initial state {s0!r} is not a state of the composite")
    s = s0
    header = ["t"] + [f"{b.label}.{p.name}" for b in boxes for p in b.outputs] + \
             [f"{outer.label}.{p.name}" for p in outer.outputs]
    rows = []
    for k in range(len(inputs) + 1):
        parts = s if len(ms) > 1 or comp is not ms[0] else (s,)
        local = [v for m, si in zip(ms, parts) for v in m.rdt[si]]
        rows.append([k] + local + list(comp.rdt[s]))
        if k < len(inputs):
            x = tuple(inputs[k])
            if (x, s) not in comp.upd:
                raise CommandError(f"step {k}: input {x!r} is not declared on {outer.label!r}")
            s = comp.upd[(x, s)]
    return _tsv(header, rows)


def _simulate_ode(m: OdeMachine, box, r, args) -> str:
    T = float(Q(r.get("T", 1)))
    step = float(Q(r.get("step", "1/100")))
    if args.steps:
        step = T / args.steps
    u = np.asarray(r.get("input", [0.0] * m.input_dim), float)
    if u.shape != (m.input_dim,):
        raise CommandError(f"input needs {m.input_dim} coordinates")
    s0 = np.asarray(r.get("initial", [0.0] * m.state_dim), float)
    traj = integrate(m, lambda t: u, s0, T, step, method=r.get("method", "rk4"))
    every = max(1, int(r.get("every", 1)))
    cols = [f"{box.label}.{p.name}" + (f"[{i}]" if p.type.dim > 1 else "")
            for p in box.outputs for i in range(p.type.dim)]
    rows = []
    for k in range(0, len(traj.times), every):
        rows.append([float(traj.times[k])] + [float(v) for v in np.asarray(m.rdt(traj.states[k]), float)])
    out = _tsv(["t"] + cols, rows)
    if traj.blew_up:
        out += f"# blow-up near t={traj.blowup_time!r}\n"
    return out


def _simulate_timed(m: TimedMachine, box, r, args) -> str:
    length = Q(r.get("length", 1))
    if m.name == "storage":
        evs = [(Q(t), _tt(c), _tt(d)) for t, c, d in r.get("events", [])]
        inp = storage_input(evs, length, m.graph.M.unit)
        st, out = execute_timed(m, inp, _tt(r.get("initial", 0)))
        rows = []
        for t, v in zip(st.times, st.values):
            j = out.jump_at(t)
            rows.append([t, v, j.label if j.label is not None else m.graph.M.unit])
        return _tsv(["t", f"{box.label}.balance", f"{box.label}.{box.outputs[0].name}"], rows)
    evs = [(Q(t), _tt(lab), _tt(v)) for t, lab, v in r.get("events", [])]
    inp = from_events(_tt(r.get("start")), evs, length)
    if m.mode == "delay":
        init = constant(_tt(r.get("initial", r.get("start"))), m.eps)
        _, out = execute_timed(m, inp, init)
    else:
        _, out = execute_timed(m, inp, _tt(r.get("initial")))
    rows = []
    for k, (t, j) in enumerate(out.events()):
        v = out.values[k] if k < len(out.values) else None
        rows.append([t, v, j.label])
    name = box.outputs[0].name if box.outputs else "out"
    return _tsv(["t", f"{box.label}.{name}", f"{box.label}.{name}.jump"], rows)


# -- checks ----------------------------------------------------------------

def _span_report(m: MachineSpan) -> dict:
    v = check_total_det(m)
    ine = check_inertial(m)
    rep = {"state": _graph_doc(m.state), "h_test": {"total": v.total, "deterministic": v.deterministic},
           "germ": {"surjective": v.germ_surjective, "injective": v.germ_injective},
           "inertial": ine.ok, "witnesses": v.as_dict()["witnesses"]}
    if not ine.ok:
        rep["inertia_witness"] = repr(ine.witness)
    rep["passed"] = v.total and v.deterministic and ine.ok
    return rep


def cmd_check(spec: SystemSpec, args) -> tuple[str, int]:
    report = {"machines": {}, "composites": {}}
    for name, m in spec.machines.items():
        if isinstance(m, (MachineSpan, MooreMachine)):
            report["machines"][name] = _span_report(_as_span(spec, name))
        else:
            report["machines"][name] = {"kind": spec.machine_kinds[name], "applicable": False}
    for name in _targets(spec):
        flat, mnames, kinds = _composite_parts(spec, name)
        fam = _family(kinds)
        if fam not in ("span", "moore"):
            report["composites"][name] = {"kind": fam, "applicable": False}
            continue
        comp = compose_composite(spec, name)
        if fam == "moore":
            comp = beta_from_dds(comp)
        report["composites"][name] = _span_report(comp)
    ok = all(r.get("passed", True) for part in report.values() for r in part.values())
    report["passed"] = ok
    return json.dumps(report, indent=2, sort_keys=True) + "\n", 0 if ok else 1


# -- contracts -------------------------------------------------------------

def _contract_for(spec, cname, horizon) -> Contract:
    c = spec.contracts[cname]
    if horizon is None or horizon == c.horizon:
        return c
    rule = (spec.doc["contracts"][cname].get("rule") or {"kind": "full"})
    box = c.box
    if rule["kind"] == "response":
        return response_contract(box, _tt(rule["trigger"]), _tt(rule["response"]),
                                 int(rule.get("run", 2)), int(rule.get("within", 5)), horizon)
    if rule["kind"] == "equal":
        return make_contract(box, lambda a, b: a == b, horizon)
    return full_contract(box, horizon)


def cmd_contract(spec: SystemSpec, args) -> tuple[str, int]:
    cs = {n: _contract_for(spec, n, args.horizon) for n in spec.contracts}
    by_box = {c.box.label: n for n, c in cs.items()}
    report = {"contracts": {}, "validations": {}, "composites": {}}
    for n, c in cs.items():
        report["contracts"][n] = {"box": c.box.label, "horizon": c.horizon, "sizes": c.sizes()}
    for mname, bname in spec.machine_boxes.items():
        if bname not in by_box or spec.machine_kinds[mname] not in ("span", "delay"):
            continue
        v = validates(spec.machines[mname], cs[by_box[bname]])
        entry = {"contract": by_box[bname], "valid": v.ok}
        if not v.ok:
            x, (a, b) = v.witness
            entry["witness_length"] = x.length
            entry["witness_inputs"] = [list(map(_plain, p.vertices)) for p in a]
            entry["witness_outputs"] = [list(map(_plain, p.vertices)) for p in b]
        report["validations"][mname] = entry
    for name in _targets(spec):
        flat, mnames, kinds = _composite_parts(spec, name)
        if any(b.label not in by_box for b in flat.boxes):
            continue
        parts = [cs[by_box[b.label]] for b in flat.boxes]
        c = functools.reduce(tensor_contract, parts)
        cc = compose_contract(flat.diagram, c)
        entry = {"sizes": cc.sizes()}
        if _family(kinds) == "span":
            m = compose_machine(flat.diagram, functools.reduce(tensor_machine, [spec.machines[x] for x in mnames]))
            entry["valid"] = validates(m, cc).ok
        report["composites"][name] = entry
    ok = all(e["valid"] for e in report["validations"].values()) and \
        all(e.get("valid", True) for e in report["composites"].values())
    report["passed"] = ok
    return yaml.safe_dump(report, sort_keys=True), 0 if ok else 1


COMMANDS = {"compose": cmd_compose, "simulate": cmd_simulate, "check": cmd_check, "contract": cmd_contract}


def run_command(spec: SystemSpec, command: str, steps=None, horizon=None, seed=0) -> tuple[str, int]:
    """Run one command; returns ``(text, exit status)``."""
    if command not in COMMANDS:
        raise CommandError(f"unknown command {command!r}")
    args = argparse.Namespace(steps=steps, horizon=horizon, seed=seed)
    return COMMANDS[command](spec, args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wiremach", description="Compose, simulate and check wired systems.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("file")
    p.add_argument("--steps", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_system(args.file)
        text, code = run_command(spec, args.command, args.steps, args.horizon, args.seed)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (SpecError, CommandError, WiringError, TraceError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
