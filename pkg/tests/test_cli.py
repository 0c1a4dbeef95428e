import json
import subprocess
import sys
from fractions import Fraction

import pytest

from csa_sdmm.cli import EXIT_INFEASIBLE, EXIT_OK, main
from csa_sdmm.costs import feasible_parameters


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_costs_scsa(capsys):
    code, out, _ = run(capsys, "costs", "--scheme", "scsa", "--N", "100", "--l", "8", "--mp-ratio", "200",
                       "--format", "json")
    d = json.loads(out)
    assert code == EXIT_OK
    assert d["inv_kul"] == pytest.approx(0.007, abs=1e-4) and d["inv_kdl"] == pytest.approx(0.84)
    assert d["q_threshold"] == 100


def test_costs_uscsa(capsys):
    code, out, _ = run(capsys, "costs", "--scheme", "uscsa", "--N", "100", "--l", "8", "--f", "42", "--q", "1",
                       "--g", "42", "--mp-ratio", "200", "--format", "json")
    d = json.loads(out)
    assert d["inv_kul"] == pytest.approx(0.35, abs=0.005) and d["inv_kdl"] == pytest.approx(42 / 99)
    assert "gap_bound" in d


def test_costs_infeasible(capsys):
    code, _, err = run(capsys, "costs", "--scheme", "uscsa", "--N", "100", "--l", "8", "--f", "50", "--q", "2",
                       "--g", "2")
    assert code == EXIT_INFEASIBLE
    assert "exceeds N = 100" in err


def test_tradeoff(capsys, tmp_path):
    out = tmp_path / "t.csv"
    assert run(capsys, "tradeoff", "--N", "100", "--l", "8", "--mp-ratio", "200", "--out", str(out))[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config:")
    rows = [l.split(",") for l in lines[2:] if not l.startswith("BOUND")]
    assert len(rows) == 1 + 2 * len(feasible_parameters(100, 8))
    assert all(float(r[5]) <= 0.92 for r in rows)
    assert any(r[0] == "SCSA" and abs(float(r[5]) - 0.00708) < 1e-4 and float(r[6]) == 0.84 for r in rows)
    assert any(r[:4] == ["USCSA", "42", "1", "42"] and abs(float(r[6]) - 42 / 99) < 1e-9 for r in rows)


def test_run_and_consistency(capsys):
    args = ["run", "--scheme", "gscsa", "--N", "9", "--l", "1", "--f", "2", "--q", "2", "--b", "1",
            "--m", "4", "--n", "3", "--p", "8", "--seed", "5"]
    code, out, err = run(capsys, *args, "--json")
    assert code == 0 and "# config:" in err
    first = json.loads(out[: out.rindex("}") + 1])
    assert "decode verified" in out and first["verified"] is True
    code, out2, _ = run(capsys, *args, "--json")
    second = json.loads(out2[: out2.rindex("}") + 1])
    assert (first["bytes_up"], first["bytes_down"]) == (second["bytes_up"], second["bytes_down"])
    # same ratio as the costs command for the pinned orientation
    from csa_sdmm.costs import cost_ul_branch
    from csa_sdmm.schemes import SchemeSpec
    spec = SchemeSpec.gscsa(9, 1, 2, 2, 2, 1)
    assert Fraction(first["ul_ratio"]) == cost_ul_branch(spec, Fraction(4, 8), 1)
    code, out, _ = run(capsys, "costs", "--scheme", "gscsa", "--N", "9", "--l", "1", "--f", "2", "--q", "2",
                       "--mp-ratio", "1/2", "--format", "json")
    assert json.loads(out)["k_dl"] == pytest.approx(float(Fraction(first["dl_ratio"])))


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scheme": "uscsa", "N": 100, "l": 8, "f": 42, "q": 1, "mp-ratio": "200",
                               "format": "json"}))
    code, out, _ = run(capsys, "costs", "--config", str(cfg))
    assert json.loads(out)["q_threshold"] == 99
    code, out, _ = run(capsys, "costs", "--config", str(cfg), "--l", "7")
    assert json.loads(out)["q_threshold"] == 97
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit):
        main(["costs", "--config", str(bad)])


def test_audit(capsys, tmp_path):
    out = tmp_path / "a.csv"
    code, _, err = run(capsys, "audit", "--scheme", "scsa", "--N", "7", "--l", "2", "--modulus", "257",
                       "--out", str(out))
    assert code == 0 and "PASS" in err
    text = out.read_text().splitlines()
    assert text[0].startswith("# scheme=SCSA(1)") and text[1].startswith("# config:")
    assert len(text) == 3 + 21


def test_bench(capsys, tmp_path):
    sc = {"scenario_id": "tiny", "N": 9, "ell": 1, "m0": 4, "n0": 2, "p0": 12, "steps": [0, 1], "iterations": 1,
          "schemes": [{"kind": "SCSA", "N": 9, "ell": 1, "b": 1},
                      {"kind": "USCSA", "N": 9, "ell": 1, "b": 0, "f": 2, "q": 2, "g": 2}]}
    f = tmp_path / "sc.json"
    f.write_text(json.dumps(sc))
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "bench", "--scenario-file", str(f), "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config:") and len(lines) == 2 + 4


def test_calibrate(capsys):
    code, out, _ = run(capsys, "calibrate", "--size", "65536", "--repeats", "3")
    d = json.loads(out)
    assert d["lambda_plus"] + d["lambda_dot"] == pytest.approx(1.0)


def test_module_entry():
    res = subprocess.run([sys.executable, "-m", "csa_sdmm", "costs", "--scheme", "scsa", "--N", "15", "--l", "4"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "K_DL" in res.stdout
