import csv
import json

import pytest

from diamondlab.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, main, report_summary
from diamondlab.storage import write_csv


def body(path):
    return path.read_text().splitlines()[1:]


def rows(path):
    return list(csv.DictReader(body(path)))


def test_construct_certify_simulate(tmp_path):
    ens = tmp_path / "ens"
    assert main(["construct", "--case", "equal", "--dA", "4", "--dB", "2", "--r", "2", "--eps", "0.1",
                 "--M", "20", "--seed", "1", "--out", str(ens)]) == EXIT_OK
    assert (ens / "manifest.json").exists()
    assert main(["certify", "--in", str(ens), "--threshold", "0.01"]) == EXIT_OK
    cert = rows(ens / "certify.csv")
    assert len(cert) == 190 and {r["verdict"] for r in cert} == {"PASS"}
    assert main(["simulate", "--in", str(ens), "--N", "3", "--auxDim", "2", "--seed", "1"]) == EXIT_OK
    sim = rows(ens / "simulate.csv")
    assert [int(r["step"]) for r in sim] == [1, 2, 3]
    assert all(float(r["gap"]) <= float(r["bound"]) for r in sim)


def test_certify_fails_with_high_threshold(tmp_path):
    ens = tmp_path / "ens"
    main(["construct", "--M", "3", "--out", str(ens)])
    assert main(["certify", "--in", str(ens), "--threshold", "5"]) == EXIT_FAIL


def test_moments_tilted_report(tmp_path):
    out = tmp_path / "m.csv"
    code = main(["moments", "--case", "tilted", "--dA", "4", "--dB", "4", "--r", "2", "--eps", "0.1",
                 "--samples", "400", "--seed", "1", "--out", str(out)])
    got = {r["quantity"]: r for r in rows(out)}
    assert float(got["E Tr|C|^2"]["target"]) == 1.0
    assert all(r["seed"] == "1" and r["samples"] and r["anchor"] and r["sigmas"] for r in got.values())
    assert code == EXIT_OK


def test_moments_equal_case_flags_stated_formula(tmp_path):
    out = tmp_path / "m.csv"
    code = main(["moments", "--case", "equal", "--dA", "4", "--dB", "2", "--r", "2", "--eps", "0.2",
                 "--samples", "2000", "--seed", "1", "--out", str(out)])
    got = {r["quantity"]: r["verdict"] for r in rows(out)}
    assert got["E Tr|D|^2 vs stated formula"] == "FAIL"
    assert got["E Tr|D|^2 vs recomputed exact value"] == "PASS"
    assert code == EXIT_FAIL


def test_rerun_with_saved_config_is_byte_identical(tmp_path):
    a, b, cfg = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "cfg.json"
    main(["weingarten-check", "--d", "3", "--samples", "500", "--seed", "7", "--out", str(a),
          "--save-config", str(cfg)])
    assert main(["weingarten-check", "--config", str(cfg), "--out", str(b)]) == EXIT_OK
    assert body(a) == body(b)
    assert json.loads(cfg.read_text())["seed"] == 7


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DIAMONDLAB_SEED", "99")
    out = tmp_path / "b.json"
    assert main(["bounds", "--dA", "16", "--dB", "4", "--r", "4", "--eps", "0.01", "--logM", "300",
                 "--out", str(out)]) == EXIT_OK
    doc = json.loads("\n".join(body(out)))
    assert doc["seed"] == 99 and doc["N_packing"] == 34 and doc["N_main_equal"] == 373


def test_usage_errors(tmp_path):
    assert main(["moments", "--bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["construct", "--case", "tilted", "--dA", "8", "--dB", "2", "--r", "2",
                 "--out", str(tmp_path / "x")]) == EXIT_USAGE
    assert main(["certify"]) == EXIT_USAGE
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "bounds", "params": {}}))
    assert main(["moments", "--config", str(cfg)]) == EXIT_USAGE


def test_io_errors(tmp_path):
    assert main(["simulate", "--in", str(tmp_path / "missing")]) == EXIT_IO
    assert main(["report", "--dir", str(tmp_path / "missing")]) == EXIT_IO
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "x.csv").write_text("a,b\n1,2\n")
    assert main(["report", "--dir", str(bad)]) == EXIT_IO


def test_report_empty_and_mixed(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", "--dir", str(empty)]) == EXIT_OK
    assert rows(empty / "summary.csv") == []
    mixed = tmp_path / "mixed"
    write_csv(mixed / "a.csv", "t", ["quantity", "verdict", "seed", "anchor"],
              [dict(quantity="q1", verdict="PASS", seed=1, anchor="x")])
    write_csv(mixed / "b.csv", "t", ["quantity", "verdict", "seed", "anchor"],
              [dict(quantity="q2", verdict="FAIL", seed=1, anchor="y")])
    assert main(["report", "--dir", str(mixed)]) == EXIT_FAIL
    summary = rows(mixed / "summary.csv")
    assert len(summary) == 2 and set(summary[0]) >= {"source", "item", "verdict", "anchor"}


def test_report_counts_acceptance_rows(tmp_path):
    acc = [dict(criterion=i, name=f"c{i}", verdict="PASS", detail="", seed=0) for i in range(1, 14)]
    write_csv(tmp_path / "acceptance.csv", "acceptance", ["criterion", "name", "verdict", "detail", "seed"], acc)
    assert len(report_summary(tmp_path)) == 13
