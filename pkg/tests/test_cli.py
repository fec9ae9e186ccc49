import io
import subprocess
import sys

import pytest

from sumosim import cli, ontology


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def shipped(name):
    return str(ontology.shipped_path(name))


def test_parse_prints_bakery_rule():
    code, out, _ = run("parse", shipped("dining.kif"))
    assert code == 0
    assert "(result ?BAKE ?FOOD)" in out
    assert all(line.startswith("(") for line in out.splitlines())


def test_parse_missing_and_empty(tmp_path):
    assert run("parse", tmp_path / "nope.kif")[0] == 2
    empty = tmp_path / "empty.kif"
    empty.write_text("")
    assert run("parse", empty) == (0, "", "")


def test_parse_error_location(tmp_path):
    bad = tmp_path / "bad.kif"
    bad.write_text('(a b)\n  (c "unfinished')
    code, out, err = run("parse", bad)
    assert code == 2 and out == ""
    assert err.startswith(f"{bad}:2:6: UnterminatedString")


def test_validate_shipped():
    assert run("validate") == (0, "", "")


def test_validate_on_off(tmp_path):
    f = tmp_path / "onoff.kif"
    f.write_text("(instance sw1 Switch) (attribute sw1 DeviceOn) (attribute sw1 DeviceOff)")
    code, out, _ = run("validate", f)
    assert code == 1
    (line,) = out.splitlines()
    assert line.startswith("PartitionExclusivity") and "sw1" in line


def test_validate_domain(tmp_path):
    f = tmp_path / "dom.kif"
    f.write_text("(instance sw1 Switch) (rotationCount sw1 3)")
    code, out, _ = run("validate", f)
    assert code == 1 and "DomainViolation: rotationCount argument 1" in out


def test_validate_load_errors(tmp_path):
    f = tmp_path / "cycle.kif"
    f.write_text("(subclass Entity Bakery)")
    code, _, err = run("validate", f)
    assert code == 2 and f"{f}:1:1:" in err


def test_run_engine_summary_and_trace(tmp_path):
    trace = tmp_path / "trace.txt"
    code, out, _ = run("run", "engine", "--fuel", 3, "--seed", 7, "--trace", trace)
    assert (code, out) == (0, "halt=FuelExhausted cycles=3 fuel_remaining=0\n")
    lines = trace.read_text().splitlines()
    assert lines[0].startswith("step=0 tick=1 activity=ignition transition=TurningOnDevice")
    assert sum("SparkAndCombustion outcome=Committed" in line for line in lines) == 3


def test_run_ignition_zero():
    code, out, _ = run("run", "ignition", "--toggles", 0)
    assert code == 0 and out == "halt=ScheduleComplete transitions=0 state=EngineOff\n"


@pytest.mark.parametrize("argv", [
    ["run", "engine"],
    ["run", "engine", "--fuel", "-2"],
    ["run", "engine", "--fuel", "x"],
    ["run", "engine", "--fuel", "1", "--policy", "never"],
    ["run", "boat"],
    ["frobnicate"],
    [],
])
def test_bad_flags(argv, tmp_path):
    trace = tmp_path / "t.txt"
    code, out, err = run(*argv, "--trace", trace) if argv[:2] == ["run", "engine"] else run(*argv)
    assert code == 2 and out == "" and err
    assert not trace.exists()


def test_run_policies_agree(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("run", "engine", "--fuel", 4, "--seed", 2, "--trace", a, "--policy", "always")
    run("run", "engine", "--fuel", 4, "--seed", 2, "--trace", b, "--policy", "skip")
    assert a.read_bytes() == b.read_bytes()


def test_lex(tmp_path):
    assert run("lex", shipped("lexicon.kif"))[0] == 0
    code, out, _ = run("lex", shipped("lexicon.kif"), "--emit-rules")
    assert code == 0 and "(instance ?TELIC Selling)" in out
    f = tmp_path / "bad.kif"
    f.write_text("(lexentry Bakery (formal Business) (telic Frobbing))")
    code, out, _ = run("lex", f)
    assert code == 1 and "Frobbing" in out
    f.write_text("(lexentry Bakery (formal Business)")
    assert run("lex", f)[0] == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sumosim", "run", "ignition", "--toggles", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-1] == "halt=ScheduleComplete transitions=2 state=EngineOff"
