import json

import pytest

from histlogic.cli import DEFAULT_QUERIES, run_cli


def _run(capsys, *argv):
    code = run_cli(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_ok(capsys, corpus):
    code, out, _ = _run(capsys, "check", str(corpus / "spin_measurement.hl"))
    assert code == 0 and "ok" in out


def test_check_reports_location(capsys, tmp_path):
    bad = tmp_path / "bad.hl"
    bad.write_text("space s dim 2 basis u d\nprojector P = Q\n")
    code, _, err = _run(capsys, "check", str(bad))
    assert code == 2
    assert f"{bad}:2:" in err and "UndeclaredName" in err


def test_run_json(capsys, corpus):
    code, out, _ = _run(capsys, "run", str(corpus / "two_device.hl"), "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == 1 and doc["exit_code"] == 0
    assert all(r["status"] == "ok" for r in doc["results"])


def test_run_failing_model_exits_1(capsys, corpus):
    code, out, _ = _run(capsys, "run", str(corpus / "spin_incompatible.hl"))
    assert code == 1 and "status: FAIL" in out


def test_builtin_query(capsys):
    code, out, _ = _run(capsys, "builtin", "two-device", "--query", "prob X+Z+ @ t3 given psi1 @ t1 in F1")
    assert code == 0
    assert "value: 0.25" in out


@pytest.mark.parametrize("model", sorted(DEFAULT_QUERIES))
def test_builtin_defaults(capsys, model):
    code, out, _ = _run(capsys, "builtin", model)
    assert code == 0
    assert out.count("status: ok") == len(DEFAULT_QUERIES[model])


def test_builtin_params(capsys):
    code, out, _ = _run(capsys, "builtin", "double-slit", "--param", "num_detectors=6",
                        "--param", "phase_B=pi/3", "--query", "prob D2 @ t3 given Psi1 @ t1 in F1")
    assert code == 0 and "value:" in out
    code, _, err = _run(capsys, "builtin", "double-slit", "--param", "num_detectors=1.5")
    assert code == 2 and "integer" in err
    code, _, err = _run(capsys, "builtin", "double-slit", "--param", "bogus=1")
    assert code == 2 and "bad parameter" in err
    code, _, err = _run(capsys, "builtin", "double-slit", "--param", "noequals")
    assert code == 2


def test_eps_environment_and_flag(capsys, corpus, monkeypatch):
    path = str(corpus / "spin_measurement.hl")
    monkeypatch.setenv("HISTLOGIC_EPS", "1e-7")
    _, out, _ = _run(capsys, "run", path)
    assert out.startswith("# eps=1e-07 ")
    _, out, _ = _run(capsys, "run", path, "--eps", "1e-6")
    assert out.startswith("# eps=1e-06 ")
    monkeypatch.setenv("HISTLOGIC_EPS", "abc")
    code, _, err = _run(capsys, "run", path)
    assert code == 2 and "HISTLOGIC_EPS" in err


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["run"],
    ["run", "/nonexistent/model.hl"],
    ["builtin", "no-such-model"],
    ["builtin", "two-device", "--query", "prob @@"],
    ["run", "x.hl", "--format", "xml"],
])
def test_usage_errors(capsys, argv):
    assert _run(capsys, *argv)[0] == 2


def test_help_exits_0(capsys):
    assert _run(capsys, "--help")[0] == 0
