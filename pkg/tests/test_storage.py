import json

import numpy as np
import pytest

from diamondlab.ensembles import Case, EnsembleParams, generate_ensemble
from diamondlab.storage import (
    ArtifactIOError,
    RunConfig,
    atomic_write_text,
    csv_text,
    fmt_value,
    read_csv,
    read_ensemble,
    read_json,
    write_csv,
    write_ensemble,
    write_json,
)


@pytest.mark.parametrize("case,dims", [(Case.EQUAL, (4, 2, 2)), (Case.TILTED, (4, 4, 2))])
def test_ensemble_round_trip(tmp_path, case, dims):
    ens = generate_ensemble(EnsembleParams(*dims, 0.1, M=3, seed=5, case=case))
    write_ensemble(ens, tmp_path)
    back = read_ensemble(tmp_path)
    assert back.manifest["case"] == case.value and back.eps == 0.1
    assert len(back.manifest["members"][0]["files"]) == dims[2]
    for a, b in zip(ens.isometries, back.isometries):
        np.testing.assert_array_equal(a.matrix, b.matrix)
    if case is Case.TILTED:
        assert back.manifest["construction"]["reference_kraus_files"]


def test_missing_and_corrupt_ensemble(tmp_path):
    with pytest.raises(ArtifactIOError):
        read_ensemble(tmp_path)
    ens = generate_ensemble(EnsembleParams(4, 2, 2, 0.1, M=2))
    write_ensemble(ens, tmp_path)
    (tmp_path / "member0001_kraus000.json").write_text("{not json")
    with pytest.raises(ArtifactIOError, match="member0001_kraus000"):
        read_ensemble(tmp_path)


def test_tampered_kraus_is_rejected(tmp_path):
    ens = generate_ensemble(EnsembleParams(4, 2, 2, 0.1, M=1))
    write_ensemble(ens, tmp_path)
    f = tmp_path / "member0000_kraus000.json"
    doc = json.loads(f.read_text())
    doc["data"][0] = [5.0, 0.0]
    f.write_text(json.dumps(doc))
    with pytest.raises(ArtifactIOError, match="not a valid channel"):
        read_ensemble(tmp_path)


def test_csv_header_then_deterministic_body(tmp_path):
    rows = [dict(a=1, b=0.1, c=True), dict(a=2, b=float("inf"), c=False)]
    t1 = csv_text("x", ["a", "b", "c"], rows)
    t2 = csv_text("x", ["a", "b", "c"], rows)
    assert t1.startswith("# diamondlab x generated=")
    assert t1.splitlines()[1:] == t2.splitlines()[1:]
    assert t1.splitlines()[2] == "1,0.10000000000000001,true"
    write_csv(tmp_path / "r.csv", "x", ["a", "b", "c"], rows)
    assert read_csv(tmp_path / "r.csv")[1]["b"] == "inf"


def test_fmt_complex():
    assert fmt_value(1 - 2j) == "1-2j"


def test_json_report_round_trip(tmp_path):
    write_json(tmp_path / "r.json", "bounds", {"N": np.int64(3), "case": Case.EQUAL})
    assert read_json(tmp_path / "r.json") == {"N": 3, "case": "equal"}
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ArtifactIOError):
        read_json(tmp_path / "bad.json")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


def test_run_config_round_trip(tmp_path):
    cfg = RunConfig("moments", {"dA": 4, "eps": 0.1, "case": "tilted"}, seed=2**63, out="m.csv",
                    tolerances={"sigmas": 4})
    cfg.save(tmp_path / "c.json")
    assert RunConfig.load(tmp_path / "c.json") == cfg
    with pytest.raises(ValueError):
        RunConfig.from_json('{"command": "x", "bogus": 1}')
