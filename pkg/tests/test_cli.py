import json
from pathlib import Path

import pytest

from plantstress.cli import argv_from_manifest, main

SMALL = """[synth]
n_plants_per_cell = 2
start_date = 2024-02-20
[learn]
resnet_epochs = 2
[eval]
n_perm = 10
bench_repeats = 2
"""


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.ini"
    cfg.write_text(SMALL)
    d = root / "d"
    assert main(["synth", "--config", str(cfg), "--seed", "7", "--out", str(d)]) == 0
    assert main(["preprocess", "--config", str(cfg), "--soil", str(d / "soil.csv"), "--out", str(d)]) == 0
    assert main(["train", "--config", str(cfg), "--windows", str(d / "windows.csv"),
                 "--labels", str(d / "labels.csv"), "--level1", "resnet", "--level2", "forest",
                 "--features", "f2", "--out", str(d)]) == 0
    return root, cfg, d


def files(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir()) if p.is_file()}


def test_synth_twice_byte_identical(tmp_path):
    argv = ["synth", "--seed", "7", "--plants-per-cell", "1", "--set", "synth.end_date=2023-12-25",
            "--out", str(tmp_path / "d")]
    assert main(argv) == 0
    first = files(tmp_path / "d")
    assert {"soil.csv", "labels.csv", "spectral.csv", "synth.manifest.json"} <= first.keys()
    assert main(argv) == 0
    assert files(tmp_path / "d") == first
    # a different output directory changes only the recorded paths
    assert main(argv[:-1] + [str(tmp_path / "e")]) == 0
    other = files(tmp_path / "e")
    for name in ("soil.csv", "labels.csv", "spectral.csv", "synth_report.json"):
        assert other[name] == first[name]


def test_manifest_contents(data):
    _, _, d = data
    m = json.loads((d / "train.manifest.json").read_text())
    assert m["command"] == "train" and m["seed"] == 0  # train ran without --seed
    assert m["config"]["learn"]["level1"] == "resnet" and m["config"]["learn"]["features"] == "f2"
    assert set(m["inputs"]) == {str(d / "windows.csv"), str(d / "labels.csv")}
    assert "model.json" in m["outputs"] and "train_report.json" in m["outputs"]
    assert m["versions"]["plantstress"]
    model = json.loads((d / "model.json").read_text())
    assert model["model"]["payload"]["level1_kind"] == "resnet"
    assert model["model"]["payload"]["level2_kind"] == "forest"


def test_evaluate_and_rerun_from_manifest(data, tmp_path):
    _, cfg, d = data
    out = tmp_path / "ev"
    argv = ["evaluate", "--config", str(cfg), "--model", str(d / "model.json"),
            "--windows", str(d / "windows.csv"), "--labels", str(d / "labels.csv"), "--out", str(out)]
    assert main(argv) == 0
    first = (out / "evaluate_report.json").read_bytes()
    rep = json.loads(first)
    assert rep["extra"]["pair_violations"] == 0
    assert rep["accuracy"] <= rep["extra"]["level1"]["accuracy"]
    assert (out / "evaluate_report.csv").read_text().startswith("key,value\n")
    cfg.write_text(SMALL.replace("n_perm = 10", "n_perm = 11"))  # later edits must not leak in
    try:
        rerun = argv_from_manifest(out / "evaluate.manifest.json")
        (out / "evaluate_report.json").unlink()
        assert main(rerun) == 0
        assert (out / "evaluate_report.json").read_bytes() == first
        (out / "evaluate_report.json").unlink()
        assert main(["rerun", str(out / "evaluate.manifest.json")]) == 0
        assert (out / "evaluate_report.json").read_bytes() == first
    finally:
        cfg.write_text(SMALL)


def test_evaluate_on_data_without_ec_is_domain_error(data, tmp_path, capsys):
    _, _, d = data
    lines = (d / "windows.csv").read_text().splitlines()
    stripped = "\n".join(",".join(line.split(",")[:4]) for line in lines) + "\n"
    bad = tmp_path / "no_ec.csv"
    bad.write_text(stripped)
    code = main(["evaluate", "--model", str(d / "model.json"), "--windows", str(bad),
                 "--labels", str(d / "labels.csv"), "--out", str(tmp_path / "o")])
    assert code == 4
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: domain:")


def test_exit_codes(tmp_path, capsys):
    assert main(["frobnicate"]) == 2
    assert main(["synth", "--bogus"]) == 2
    assert main(["evaluate", "--model", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 3
    assert main(["synth", "--set", "synth.missing_rate=1.5", "--out", str(tmp_path)]) == 4
    cfg = tmp_path / "bad.ini"
    cfg.write_text("no section header\n")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    for line in capsys.readouterr().err.strip().splitlines():
        assert line.split(":")[0] == "error"
    assert main(["--help"]) == 0


def test_other_commands(data, tmp_path):
    _, cfg, d = data
    out = tmp_path / "o"
    common = ["--config", str(cfg), "--out", str(out)]
    assert main(["ingest", "--soil", str(d / "soil.csv")] + common) == 0
    assert json.loads((out / "ingest_report.json").read_text())["accepted"] > 0
    assert main(["features", "--windows", str(d / "windows.csv"), "--labels", str(d / "labels.csv")] + common) == 0
    assert (out / "features.csv").read_text().splitlines()[0].endswith("rootstock,treatment")
    assert main(["permtest", "--spectral", str(d / "spectral.csv"), "--labels", str(d / "labels.csv"),
                 "--folds", "2", "--threads", "2"] + common) == 0
    p = json.loads((out / "permtest_report.json").read_text())
    assert 0 < p["p_value"] <= 1 and p["n_permutations"] == 10
    assert main(["spectral-index", "--spectral", str(d / "spectral.csv"), "--labels", str(d / "labels.csv"),
                 "--mode", "analytic"] + common) == 0
    si = json.loads((out / "spectral_index_report.json").read_text())
    assert set(si["indices"]) == {"ndsi", "ni", "n1"}
    assert len((out / "sw_scan.csv").read_text().splitlines()) == 289
    assert main(["train", "--windows", str(d / "windows.csv"), "--labels", str(d / "labels.csv"),
                 "--flat", "knn"] + common) == 0
    assert main(["bench", "--windows", str(d / "windows.csv"), "--model", str(d / "model.json"),
                 "--model", str(out / "model.json"), "--name", "hier", "--name", "knn"] + common) == 0
    b = json.loads((out / "bench_report.json").read_text())
    assert all(r["hashes_identical"] for r in b["reports"])
    assert {r["model"] for r in json.loads((out / "bench_compare.json").read_text())} == {"hier", "knn"}
    assert main(["report", str(out / "permtest_report.json"), str(out / "bench_report.json")] + common) == 0
    assert set(json.loads((out / "report_report.json").read_text())) == {"permtest_report.json", "bench_report.json"}


def test_threads_do_not_change_results(data, tmp_path):
    _, cfg, d = data
    outs = []
    for t in ("1", "3"):
        o = tmp_path / t
        assert main(["permtest", "--config", str(cfg), "--spectral", str(d / "spectral.csv"),
                     "--labels", str(d / "labels.csv"), "--folds", "2", "--threads", t, "--out", str(o)]) == 0
        outs.append((o / "permtest_report.json").read_bytes())
    assert outs[0] == outs[1]


def test_rerun_missing_manifest_is_io_error(tmp_path):
    assert main(["rerun", str(tmp_path / "nope.manifest.json")]) == 3
