import json

import pytest

from lowrank_itlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_gen_sample_decode(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    locs = tmp_path / "locs.json"
    assert main(["gen", "--m", "3", "--r", "1", "--q", "2", "--seed", "4", "--out", str(inst)]) == 0
    assert main(["sample", "--m", "3", "--n", "9", "--seed", "1", "--out", str(locs)]) == 0
    code, out = run(capsys, "decode", "--instance", str(inst), "--locs", str(locs))
    result = json.loads(out)
    assert code == 0 and result["kind"] == "unique" and result["correct"]
    code, out = run(capsys, "decode", "--instance", str(inst), "--n", "0", "--seed", "3")
    assert json.loads(out)["kind"] == "ambiguous"


def test_decode_budget_exit_code(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    main(["gen", "--m", "3", "--r", "2", "--q", "4", "--seed", "42", "--out", str(inst)])
    code, _ = run(capsys, "decode", "--instance", str(inst), "--n", "3", "--budget", "1000")
    assert code == 3


def test_validation_and_io_exit_codes(tmp_path, capsys):
    assert main(["pe", "--m", "2", "--r", "1", "--q", "4", "--semiring", "modq", "--n", "1"]) == 2
    assert main(["decode", "--instance", str(tmp_path / "missing.json"), "--n", "1"]) == 4


def test_pe_exact_and_mc(capsys):
    code, out = run(capsys, "pe", "--m", "2", "--r", "1", "--q", "2", "--n", "3", "--mode", "exact")
    assert code == 0 and json.loads(out)["pe"] == 0.75
    code, out = run(capsys, "pe", "--m", "2", "--r", "1", "--q", "2", "--n", "4", "--mode", "mc",
                    "--trials", "20", "--seed", "1")
    assert json.loads(out)["pe"] == 0.0


def test_coverage_json(capsys):
    code, out = run(capsys, "coverage", "--m", "20", "--r", "1", "--alpha", "2", "--trials", "50",
                    "--seed", "3", "--json")
    data = json.loads(out)
    assert code == 0
    assert set(data) >= {"m", "r", "alpha", "n_used", "exact_marginal_tail", "chernoff_bound",
                         "paper_bound", "mc_estimate", "mc_ci95", "trials"}


def test_entropy_commands(tmp_path, capsys):
    locs = tmp_path / "locs.json"
    locs.write_text(json.dumps({"m": 2, "locations": [[0, 0]], "values": [0]}))
    code, out = run(capsys, "entropy", "source", "--m", "2", "--r", "1", "--q", "2")
    data = json.loads(out)
    assert data["support_size"] == 10 and data["value_bits"] == 2.771782222
    code, out = run(capsys, "entropy", "lemma32", "--r", "1", "--q", "2")
    assert json.loads(out)["value_bits"] == 0.5
    code, out = run(capsys, "entropy", "agreement", "--m", "2", "--r", "1", "--q", "2",
                    "--locs", str(locs))
    assert json.loads(out)["probability"] == 0.75
    code, out = run(capsys, "entropy", "obs", "--m", "2", "--r", "1", "--q", "2", "--locs", str(locs))
    assert json.loads(out)["value_bits"] == pytest.approx(0.811278, abs=1e-6)
    code, out = run(capsys, "entropy", "fano", "--m", "2", "--r", "1", "--q", "2", "--locs", str(locs))
    assert json.loads(out)["holds"]
    assert main(["entropy", "obs", "--m", "2", "--r", "1", "--q", "2"]) == 2


def test_bounds_commands(tmp_path, capsys):
    code, out = run(capsys, "bounds", "fano", "--m", "100", "--r", "2", "--q", "16", "--pe", "0")
    assert json.loads(out)["ceil"] == 89
    code, out = run(capsys, "bounds", "hamming", "--m", "100", "--r", "2", "--q", "16", "--D", "1",
                    "--beta", "1", "--delta", "0")
    assert json.loads(out)["bound_value"] == pytest.approx(600 / 9)
    code, out = run(capsys, "bounds", "hamming", "--m", "2", "--r", "1", "--q", "2", "--D", "0",
                    "--beta", "1", "--exact-hs")
    assert json.loads(out)["extra"]["source_entropy"] == pytest.approx(2.7717822216)
    code, out = run(capsys, "bounds", "gaussian", "--m", "10", "--r", "2", "--beta", "1", "--D", "0",
                    "--hstar", "1")
    assert json.loads(out)["infinite"] is True
    sweep = tmp_path / "grid.json"
    sweep.write_text(json.dumps({"kind": "fano", "grid": {"m": [10, 100], "pe": [0, 0.5]},
                                 "fixed": {"r": 2, "q": 16}}))
    table = tmp_path / "table.csv"
    assert main(["bounds", "table", "--sweep", str(sweep), "--out", str(table)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "m,pe,q,r,bound_value,clamped,ceil"
    assert len(lines) == 5
    assert lines[3].startswith("100,0,16,2,88.88888889")


def test_bounds_table_exact_hs_and_bad_grid(tmp_path, capsys):
    spec = tmp_path / "h.json"
    spec.write_text(json.dumps({"kind": "hamming", "exact_hs": True,
                                "fixed": {"r": 1, "q": 2, "D": 0.5}, "grid": {"m": [2, 3]}}))
    assert main(["bounds", "table", "--sweep", str(spec)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("2,0.5,2,1,0,True")
    spec.write_text(json.dumps({"kind": "fano", "grid": [{"m": 1}]}))
    assert main(["bounds", "table", "--sweep", str(spec)]) == 2


def test_sweep_and_plot(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"points": [{"m": 2, "r": 1, "q": 2}], "n_grid": "full",
                               "mode": "mc", "trials": 30, "master_seed": 3}))
    out_dir = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out_dir)]) == 0
    assert (out_dir / "results.csv").exists() and (out_dir / "pe_curve.svg").exists()
    svg = tmp_path / "cov.svg"
    assert main(["plot", "--csv", str(out_dir / "results.csv"), "--x", "n",
                 "--y", "coverage_fail_hat", "--out", str(svg)]) == 0
    assert svg.read_text().lstrip().startswith("<?xml")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"points": [], "n_grid": [1], "oops": 1}))
    assert main(["sweep", "--config", str(bad), "--out", str(out_dir)]) == 2
