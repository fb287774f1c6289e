import json
import pathlib

import pytest
import yaml

from wiremach.cli import compose_composite, main, run_command
from wiremach.moore import dds_compose, dds_run, network_oracle
from wiremach.spans import compose_machine, describe_graph
from wiremach.sysfile import SpecError, load_system, parse_system, serialize_system
from wiremach.timed import execute_timed, storage_input

SYSTEMS = pathlib.Path(__file__).resolve().parents[1] / "systems"
GOLDEN = sorted(p.name for p in SYSTEMS.glob("*.yaml"))

MINIMAL = """
types:
  bit: {kind: finite, elements: [0, 1]}
boxes:
  B:
    inputs: [{name: i, type: bit}]
    outputs: [{name: o, type: bit}]
machines:
  copy:
    kind: moore
    box: B
    states: [0, 1]
    update: [[[0], 0, 0], [[0], 1, 0], [[1], 0, 1], [[1], 1, 1]]
    readout: {0: [0], 1: [1]}
"""


def series_text():
    return (SYSTEMS / "series_moore.yaml").read_text()


def test_minimal_file():
    spec = parse_system(MINIMAL)
    m = spec.machines["copy"]
    assert m.states == (0, 1)
    assert spec.machine_kinds["copy"] == "moore"
    assert dds_run(m, [(1,), (0,)], 0)[-1] == (0, (0,))


@pytest.mark.parametrize("old,new,where,line", [
    ("N.b: D.s", "N.b: D.nope", ("wirings", "series", "feeds", "N.b"), 18),
    ("{D.a: Y.a, N.b: D.s}", "{D.a: Y.a}", ("wirings", "series"), 16),
    ("exposes: {o: N.t}", "exposes: {o: N.x}", ("wirings", "series", "exposes", "o"), 19),
    ("kind: moore", "kind: bogus", ("machines", "delay", "kind"), 22),
    ("bind: {D: delay, N: notdelay}", "bind: {D: delay, N: ghost}", ("composites", "chain"), None),
])
def test_diagnostics_point_at_the_problem(old, new, where, line):
    text = series_text()
    assert old in text
    with pytest.raises(SpecError) as err:
        parse_system(text.replace(old, new, 1))
    assert err.value.path[:len(where)] == where
    if line is not None:
        assert err.value.line == line
        assert f"line {line}" in str(err.value)


def test_syntax_error_is_a_spec_error():
    with pytest.raises(SpecError) as err:
        parse_system("types: [1")
    assert err.value.line is not None


def test_type_mismatch_is_reported():
    text = series_text().replace("bit: {kind: finite, elements: [0, 1]}",
                                 "bit: {kind: finite, elements: [0, 1]}\n  tri: {kind: finite, elements: [0, 1, 2]}")
    text = text.replace("inputs: [{name: b, type: bit}]", "inputs: [{name: b, type: tri}]")
    with pytest.raises(SpecError) as err:
        parse_system(text)
    assert err.value.path[:2] == ("wirings", "series")


@pytest.mark.parametrize("name", GOLDEN)
def test_round_trip(name):
    spec = load_system(SYSTEMS / name)
    text = serialize_system(spec)
    again = parse_system(text)
    assert again == spec
    assert serialize_system(again) == text


# -- commands --------------------------------------------------------------

def test_simulate_series():
    spec = load_system(SYSTEMS / "series_moore.yaml")
    text, code = run_command(spec, "simulate")
    assert code == 0
    rows = [line.split("\t") for line in text.strip().splitlines()]
    assert rows[0][-1] == "Y.o"
    assert [r[-1] for r in rows[1:]] == ["0", "1", "0", "0"]


def test_simulate_matches_library():
    spec = load_system(SYSTEMS / "series_moore.yaml")
    wname, names = spec.composites["chain"]
    flat = spec.wirings[wname]
    ms = [spec.machines[n] for n in names]
    comp = dds_compose(flat.diagram, ms)
    assert compose_composite(spec, "chain").upd == comp.upd
    inputs = [tuple(x) for x in spec.run["inputs"]]
    lib = [o for _, o in dds_run(comp, inputs, (0, 0))]
    oracle = network_oracle(flat.boxes, ms, flat.diagram, inputs, [0, 0])
    text, _ = run_command(spec, "simulate")
    cli = [line.split("\t")[-1] for line in text.strip().splitlines()[1:]]
    assert cli == [str(o[0]) for o in lib] == [str(o[0]) for _, o in oracle]


def test_simulate_random_steps_are_seeded():
    spec = load_system(SYSTEMS / "series_moore.yaml")
    a, _ = run_command(spec, "simulate", steps=10, seed=3)
    b, _ = run_command(spec, "simulate", steps=10, seed=3)
    assert a == b
    assert len(a.strip().splitlines()) == 12


def test_check_reports_both_readings():
    spec = load_system(SYSTEMS / "feedback_pq.yaml")
    text, code = run_command(spec, "check")
    rep = json.loads(text)
    assert code == 0
    p, q = rep["composites"]["closedP"], rep["composites"]["closedQ"]
    assert p["state"]["shape"] == "cnst(2)" and q["state"]["shape"] == "empty"
    assert p["h_test"] == {"total": True, "deterministic": True}
    assert q["h_test"] == {"total": True, "deterministic": True}
    assert p["germ"]["injective"] is False
    assert q["germ"]["surjective"] is False
    # the library gives the same composite objects
    flat = spec.wirings[spec.composites["closedP"][0]]
    assert describe_graph(compose_machine(flat.diagram, spec.machines["P"]).state) == "cnst(2)"
    assert describe_graph(compose_machine(flat.diagram, spec.machines["Q"]).state) == "empty"


def test_storage_simulation():
    spec = load_system(SYSTEMS / "storage.yaml")
    text, code = run_command(spec, "simulate")
    assert code == 0
    rows = [line.split("\t") for line in text.strip().splitlines()]
    assert rows[0] == ["t", "Bank.balance", "Bank.debit"]
    assert [r[1] for r in rows[1:]] == ["17", "15", "14", "18"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "3/2", "3"]
    state, _ = execute_timed(spec.machines["bank"], storage_input([(1, 3, 5), ("3/2", 0, 1), (3, 4, 0)], 4), 17)
    assert list(state.values) == [int(r[1]) for r in rows[1:]]


def test_compose_output_is_yaml():
    spec = load_system(SYSTEMS / "series_moore.yaml")
    text, code = run_command(spec, "compose")
    doc = yaml.safe_load(text)
    assert code == 0
    m = doc["composites"]["chain"]["machine"]
    assert len(m["states"]) == 4


def test_contract_command(tmp_path):
    out = tmp_path / "report.yaml"
    code = main(["contract", str(SYSTEMS / "two_trues.yaml"), "--out", str(out)])
    assert code == 1
    rep = yaml.safe_load(out.read_text())
    text = json.dumps(rep)
    assert "emitter" in text and "quiet" in text
    assert "257024" in text


def test_exit_codes(tmp_path, capsys):
    assert main(["check", str(SYSTEMS / "feedback_pq.yaml")]) == 0
    capsys.readouterr()
    bad = tmp_path / "bad.yaml"
    bad.write_text(series_text().replace("N.b: D.s", "N.b: D.nope"))
    assert main(["check", str(bad)]) == 2
    assert "line 18" in capsys.readouterr().err
    assert main(["check", str(tmp_path / "missing.yaml")]) == 2
    assert main(["simulate", str(SYSTEMS / "five_box.yaml")]) == 2
    with pytest.raises(SystemExit):
        main(["explode", str(SYSTEMS / "feedback_pq.yaml")])


def test_five_box_shape():
    spec = load_system(SYSTEMS / "five_box.yaml")
    flat = spec.wirings[next(iter(spec.wirings))]
    assert [b.label for b in flat.boxes] == ["X1", "X2", "X3", "X4", "X5"]
    pin = flat.diagram.phi_in_map
    assert pin["X2.in3"].port == "X2.out3"
    assert pin["X1.in2"].port == "in1"
