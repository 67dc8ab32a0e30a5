"""
Command-line front end: JSON output and exit codes
"""

import json

import pytest

from bafo_cli import EXIT_BUDGET, EXIT_FORMAT, EXIT_OK, main
from modules.valuation_core import Instance, Valuation


def run_cli(capsys, *argv):
    code = main(["--quiet", *argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_run_nyb(capsys, chop, write_instance):
    code, out, _ = run_cli(capsys, "run", "nyb", write_instance(chop), "--order", "1,2,0")
    assert code == EXIT_OK
    transcript = json.loads(out)
    assert [e["bid"] for e in transcript["events"]] == [40, 10, 50]
    assert transcript["outcome"]["winners"] == [1, 2]
    assert transcript["meta"]["ordering"] == "fixed:1,2,0"


def test_run_nyb_bid_driven(capsys, chop, write_instance):
    code, out, _ = run_cli(capsys, "run", "nyb", write_instance(chop), "--order", "bid-driven:50")
    assert code == EXIT_OK
    assert json.loads(out)["outcome"]["winners"] == [1, 2]


def test_run_descending_writes_out_file(capsys, gap4, write_instance, tmp_path):
    out_path = tmp_path / "run.json"
    code, out, _ = run_cli(
        capsys, "run", "descending", write_instance(gap4), "--h", "2", "--out", str(out_path)
    )
    assert code == EXIT_OK
    assert out_path.read_text(encoding="utf-8") == out
    assert json.loads(out)["outcome"]["buyer_cost"] == 2


def test_run_with_strategy_file(capsys, gap4, write_instance, write_json):
    strategy = write_json({"format": "descending", "profile": "always-freeze"}, "freeze.json")
    code, out, _ = run_cli(
        capsys, "run", "descending", write_instance(gap4), "--h", "3", "--strategies", strategy
    )
    assert code == EXIT_OK
    assert json.loads(out)["strategies"] == "always-freeze"


def test_solve_nyb(capsys, chop_dimes, write_instance):
    code, out, _ = run_cli(capsys, "solve", "nyb", write_instance(chop_dimes), "--order", "1,2,0")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["spe_winners"] == [1, 2]
    assert report["spe_prices"] == [None, 4, 1]
    assert report["buyer_cost"] == 5
    assert report["node_count"] > 0


def test_solve_descending(capsys, gap4, write_instance):
    code, out, _ = run_cli(capsys, "solve", "descending", write_instance(gap4), "--h", "2")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["spe_winners"] == [0, 1, 2, 3]
    assert report["path"][0]["action"] in ("accept", "freeze")


def test_verify(capsys, write_instance, write_json):
    inst = Instance((2,), Valuation.explicit([0, 5]))
    path = write_instance(inst)
    truthful = write_json({"format": "nyb", "profile": "truthful"}, "truthful.json")
    code, out, _ = run_cli(capsys, "verify", "nyb", path, truthful)
    assert code == EXIT_OK
    verdict = json.loads(out)
    assert verdict["passed"] is False
    assert verdict["witness"]["deviation"] == 5
    assert verdict["witness"]["utility_gain"] == 3

    canonical = write_json({"format": "descending", "profile": "canonical"}, "canonical.json")
    code, out, _ = run_cli(capsys, "verify", "descending", path, canonical)
    assert code == EXIT_OK
    assert json.loads(out)["passed"] is True


def test_check(capsys, chop, gap4, write_instance):
    code, out, _ = run_cli(capsys, "check", write_instance(chop))
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["submodular"]["passed"] is False
    assert report["anonymous"]["witness"] == {"Q": [0], "R": [1], "value_Q": 100, "value_R": 0}
    assert report["concave"]["passed"] is None
    assert report["gross_substitutes"]["passed"] is False

    code, out, _ = run_cli(capsys, "check", write_instance(gap4, "gap4.json"))
    assert json.loads(out)["concave"]["witness"]["k"] == 4


def test_gen_is_reproducible(capsys):
    args = ("gen", "--seed", "3", "--n", "3", "--kind", "anonymous")
    first = run_cli(capsys, *args)
    second = run_cli(capsys, *args)
    assert first[0] == EXIT_OK
    assert first[1] == second[1]
    assert json.loads(first[1])["valuation"]["kind"] == "anonymous"


def test_experiment_json_only(capsys):
    code, out, err = run_cli(capsys, "experiment", "cost-gap", "--n", "4", "--json-only")
    assert code == EXIT_OK
    assert json.loads(out)["passed"] is True
    assert "RESULT" not in err


@pytest.mark.parametrize(
    "argv",
    [
        ("experiment", "ascending"),
        ("run", "nyb", "missing.json"),
    ],
)
def test_format_errors_exit_2(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == EXIT_FORMAT
    assert err.startswith("Error:")


def test_malformed_instance_exits_2(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{", encoding="utf-8")
    assert run_cli(capsys, "check", str(path))[0] == EXIT_FORMAT


def test_bad_order_exits_2(capsys, chop, write_instance):
    assert run_cli(capsys, "run", "nyb", write_instance(chop), "--order", "0,1")[0] == EXIT_FORMAT


def test_budget_exits_3(capsys, chop, write_instance):
    code, _, err = run_cli(capsys, "solve", "nyb", write_instance(chop), "--budget", "1000")
    assert code == EXIT_BUDGET
    assert "work budget" in err


def test_oversized_instance_exits_3(capsys, write_json):
    path = write_json(
        {"n": 21, "costs": [0] * 21, "valuation": {"kind": "additive", "values": [1] * 21}},
        "big.json",
    )
    assert run_cli(capsys, "check", path)[0] == EXIT_BUDGET


def test_grid_limit_exits_3(capsys, chop, write_instance):
    assert run_cli(capsys, "check", write_instance(chop), "--gs-cap", "100")[0] == EXIT_BUDGET


def test_experiment_pdf(capsys, tmp_path):
    pdf = tmp_path / "chop.pdf"
    code, _, err = run_cli(capsys, "experiment", "chopsticks", "--pdf", str(pdf))
    assert code == EXIT_OK
    assert pdf.exists()
    assert "RESULT" in err
