import json
import os

import pytest

from netclear.cli import load_scenario, main
from netclear.errors import (
    ScenarioParseError,
    ScenarioValidationError,
    SchemaVersionMismatch,
)

SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def scenario(name):
    return os.path.join(SCENARIOS, name)


def test_load_network_scenario():
    sc = load_scenario(scenario("star.json"))
    assert sc.kind == "network"
    assert sc.network.n == 4
    assert set(sc.profile.firms) == {"f", "s1", "s2", "x1", "x2"}
    assert sc.analysis.box == (-1, 3)
    assert sc.analysis.step == 0.25


def test_load_matching_scenario():
    sc = load_scenario(scenario("matching-small.json"))
    assert sc.kind == "matching"
    assert {t.id for t in sc.network.trades} == {"h1:d1", "h1:d2"}


def test_load_exchange_scenario():
    sc = load_scenario(scenario("exchange-small.json"))
    assert sc.kind == "exchange"
    assert sc.induced is not None
    assert {t.id for t in sc.network.trades} == {"x:A>B", "y:B>A"}


def test_load_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ScenarioParseError):
        load_scenario(str(bad))
    with pytest.raises(ScenarioParseError):
        load_scenario(str(tmp_path / "missing.json"))

    wrong_version = tmp_path / "v2.json"
    wrong_version.write_text(json.dumps({"version": 2, "kind": "network"}))
    with pytest.raises(SchemaVersionMismatch):
        load_scenario(str(wrong_version))

    unknown_firm = tmp_path / "firm.json"
    unknown_firm.write_text(json.dumps({
        "version": 1, "kind": "network",
        "trades": [{"id": "t", "seller": "a", "buyer": "b"}],
        "utilities": {"ghost": [{"bundle": [], "expr": "0"}]},
    }))
    with pytest.raises(ScenarioValidationError):
        load_scenario(str(unknown_firm))

    missing_cov = tmp_path / "cov.json"
    missing_cov.write_text(json.dumps({
        "version": 1, "kind": "network",
        "trades": [{"id": "t", "seller": "a", "buyer": "b"}],
        "utilities": {"a": [{"bundle": [], "expr": "0"}]},
    }))
    with pytest.raises(ScenarioValidationError):
        load_scenario(str(missing_cov))


def test_solve_star(capsys):
    code = main(["solve", scenario("star.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "2 equilibria" in out
    assert "p=[0.0, 0.0, 2.0, 2.0]" in out
    assert "p=[1.0, 1.0, 1.0, 1.0]" in out


def test_demand_command(capsys):
    code = main(["demand", scenario("star.json"), "--firm", "f",
                 "--prices", "1", "1", "1", "1"])
    out = capsys.readouterr().out
    assert code == 0
    assert "indirect utility: 2" in out
    assert out.count("[") >= 5  # five demanded bundles listed


def test_check_exit_codes(capsys):
    code = main(["check", scenario("kinked-pair.json"), "--firm", "f",
                 "--property", "lad", "--variant", "strong"])
    assert code == 2
    assert "violated" in capsys.readouterr().out
    code = main(["check", scenario("three-supplier.json"), "--firm", "f",
                 "--property", "sss", "--variant", "expansion"])
    assert code == 0
    assert "pass-on-sample" in capsys.readouterr().out


def test_lattice_command_star(capsys):
    code = main(["lattice", scenario("star.json")])
    out = capsys.readouterr().out
    assert code == 2
    assert "1 failing pair" in out


def test_extremal_three_supplier(capsys):
    code = main(["extremal", scenario("three-supplier.json"), "--no-refine"])
    out = capsys.readouterr().out
    assert code == 2
    assert "seller-optimal: None" in out
    assert "no seller-dominant" in out


def test_error_exit_code(capsys):
    code = main(["solve", "/nonexistent/file.json"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_deterministic_output(capsys):
    main(["solve", scenario("kinked-pair.json")])
    first = capsys.readouterr().out
    main(["solve", scenario("kinked-pair.json")])
    second = capsys.readouterr().out
    assert first == second


def test_report_files_written(tmp_path, capsys):
    out_dir = tmp_path / "reports"
    code = main(["solve", scenario("kinked-pair.json"), "--out", str(out_dir)])
    capsys.readouterr()
    assert code == 0
    txt = out_dir / "kinked-pair-solve.txt"
    js = out_dir / "kinked-pair-solve.json"
    assert txt.exists() and js.exists()
    payload = json.loads(js.read_text())
    assert "equilibria" in payload
    # JSON report re-serializes identically
    main(["solve", scenario("kinked-pair.json"), "--out", str(out_dir)])
    capsys.readouterr()
    assert json.loads(js.read_text()) == payload


def test_box_and_step_overrides(capsys):
    code = main(["solve", scenario("star.json"), "--box", "0", "2",
                 "--step", "0.5"])
    out = capsys.readouterr().out
    assert code == 0
    assert "step 0.5" in out


def test_threads_env_honored(capsys, monkeypatch):
    monkeypatch.setenv("NETCLEAR_THREADS", "1")
    monkeypatch.delenv("OMP_NUM_THREADS", raising=False)
    code = main(["solve", scenario("kinked-pair.json")])
    capsys.readouterr()
    assert code == 0
    assert os.environ.get("OMP_NUM_THREADS") == "1"


def test_mechanism_command(capsys):
    code = main(["mechanism", scenario("matching-small.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "buyer-optimal" in out


def test_adapt_command(capsys):
    code = main(["adapt", scenario("exchange-small.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "x:A>B: A -> B" in out
    code = main(["adapt", scenario("star.json")])
    assert code == 1
