import io
import json
import subprocess
import sys

import pytest

from saptc.cli import SCHEMA_VERSION, run
from saptc.dsl import pretty
from saptc.protocols import CATALOGUE, builtin, remove_check


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_verify_needham_schroeder():
    code, out, err = cli("verify", "needham-schroeder", "--delta", "1")
    assert code == 0 and not err
    assert out.startswith("needham-schroeder: matches_spec")


def test_verify_json_is_stable():
    first = cli("verify", "wide-mouth-frog", "--json")
    second = cli("verify", "wide-mouth-frog", "--json")
    assert first == second
    data = json.loads(first[1])
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["verdict"] == "matches_spec"
    assert "wall_time" not in data


def test_verify_timing_flag():
    code, out, _ = cli("verify", "private-channel", "--json", "--timing")
    assert code == 0 and "wall_time" in json.loads(out)


def test_kepc_spec_leaks():
    code, out, _ = cli("lts", "kepc-mitm", "--spec", "--json", "-")
    assert code == 0
    labels = {t["label"] for t in json.loads(out)["trans"]}
    assert "s_CM(D1)" in labels
    assert cli("verify", "kepc-mitm", "--delta", "1")[0] == 0


def test_verify_mutant_file(tmp_path):
    path = tmp_path / "ns.saptc"
    path.write_text(pretty(remove_check(builtin("needham-schroeder"), "dra1 == ra")).text)
    code, out, _ = cli("verify", str(path), "--json")
    assert code == 1
    data = json.loads(out)
    assert data["verdict"] == "deviates" and data["counterexample"]


def test_diff_self_and_other(tmp_path):
    assert cli("diff", "abp", "abp")[0] == 0
    export = tmp_path / "abp.json"
    assert cli("lts", "abp", "--json", str(export))[0] == 0
    code, out, _ = cli("diff", str(export), "abp-shadow", "--json")
    assert code == 1
    data = json.loads(out)
    assert data["equivalent"] is False and data["counterexample"]


def test_lts_json_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli("lts", "otway-rees", "--delta", "2", "--json", str(a))
    cli("lts", "otway-rees", "--delta", "2", "--json", str(b))
    assert a.read_bytes() == b.read_bytes()
    data = json.loads(a.read_text())
    assert set(data) >= {"states", "init", "trans", "term"}


def test_lts_dot():
    code, out, _ = cli("lts", "private-channel", "--dot", "-")
    assert code == 0 and out.startswith("digraph lts {")


def test_minimize(tmp_path):
    export = tmp_path / "abp.json"
    cli("lts", "abp", "--json", str(export))
    code, out, _ = cli("minimize", str(export), "--mode", "branching")
    assert code == 0
    small = json.loads(out)
    assert len(small["states"]) < len(json.loads(export.read_text())["states"])
    mini = tmp_path / "mini.json"
    assert cli("minimize", str(export), "--mode", "branching", "-o", str(mini))[0] == 0
    assert cli("diff", str(export), str(mini), "--mode", "branching")[0] == 0


def test_normalize():
    code, out, _ = cli("normalize", "(a + a) . b")
    assert (code, out) == (0, "a . b\n")
    code, out, _ = cli("normalize", "a . tau", "--mode", "rooted_branching")
    assert out == "a\n"


def test_list():
    code, out, _ = cli("list")
    assert code == 0 and len(out.splitlines()) == len(CATALOGUE)
    data = json.loads(cli("list", "--json")[1])
    assert [p["name"] for p in data["protocols"]] == list(CATALOGUE)


@pytest.mark.parametrize("argv, code_name", [
    (["verify", "no-such-protocol"], "unknown-protocol"),
    (["frobnicate"], "usage"),
    ([], "usage"),
    (["verify", "abp", "--freshness", "sometimes"], "usage"),
    (["verify", "abp", "--max-states", "0"], "config"),
    (["verify", "abp", "--max-states", "3"], "state-limit"),
    (["normalize", "(a"], "parse"),
    (["normalize", "sum d in Delta . r(d)"], "not-closed"),
    (["minimize", "missing.json"], "io"),
])
def test_errors(argv, code_name):
    code, out, err = cli(*argv)
    assert code == 2 and not out
    assert err.startswith(f"saptc: error[{code_name}] ")
    assert err.endswith("\n") and err.count("\n") == 1


def test_parse_error_position(tmp_path):
    path = tmp_path / "bad.saptc"
    path.write_text("model m\ncompose {\n  S = (a . b\n}\n")
    code, _, err = cli("verify", str(path))
    assert code == 2
    assert err.startswith("saptc: error[parse] 4:1: ")


def test_unguarded_model(tmp_path):
    path = tmp_path / "loop.saptc"
    path.write_text("model loop\ncompose {\n  S = tau . S\n}\nspec {\n  X = a . X\n}\n")
    code, _, err = cli("verify", str(path))
    assert code == 2 and "error[unguarded]" in err


def test_state_limit_from_environment(monkeypatch):
    monkeypatch.setenv("SAPTC_MAX_STATES", "5")
    code, _, err = cli("verify", "abp")
    assert code == 2 and "error[state-limit]" in err


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "saptc.cli", "verify", "private-channel"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "matches_spec" in proc.stdout
