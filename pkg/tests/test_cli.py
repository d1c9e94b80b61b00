import csv
import json
import math
from pathlib import Path

import jsonschema
import pytest

from kleeminty_bench import __version__
from kleeminty_bench.cli import (AlgorithmSpec, SuiteConfig, emit_reports, main, parse_algo,
                                 run_suite, suite_tasks)
from kleeminty_bench.problem import ConfigError, EvaluationResult, make_instance
from kleeminty_bench.protocol import RunRecord
from kleeminty_bench.records import (CorruptRecordError, config_hash, dumps_record, load_record,
                                     load_schema, record_from_dict, record_to_dict)

SMALL = ["--dims", "2", "3", "--budget-factor", "300"]


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*.json"))
            if p.name != "manifest.json"}


@pytest.fixture(scope="module")
def small_suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    assert main(["run", *SMALL, "--out", str(out)]) == 0
    return out


def test_parse_algo():
    assert parse_algo("rs") == AlgorithmSpec("rs", {})
    spec = parse_algo("de=population_size:40,scale_factor:0.7,scale_range:[0.2,0.9]")
    assert spec.params == {"population_size": 40, "scale_factor": 0.7, "scale_range": (0.2, 0.9)}
    assert parse_algo("es=step_size:self_adaptive").params == {"step_size": "self_adaptive"}
    with pytest.raises(Exception):
        parse_algo("cmaes")


def test_suite_counting():
    cfg = SuiteConfig(algorithms=(AlgorithmSpec("de"), AlgorithmSpec("es")))
    assert len(suite_tasks(cfg)) == 2 * 6 * 15 == 180


def test_suite_validation():
    with pytest.raises(ConfigError):
        SuiteConfig(runs=5).validate()
    assert SuiteConfig(runs=5, override_conventions=True).validate()
    with pytest.raises(ConfigError):
        SuiteConfig(dimensions=()).validate()
    with pytest.raises(ConfigError):
        SuiteConfig(algorithms=(AlgorithmSpec("de"), AlgorithmSpec("de"))).validate()
    with pytest.raises(ConfigError):
        SuiteConfig(algorithms=(AlgorithmSpec("de", {"scale_factor": 9}),)).validate()
    with pytest.raises(ConfigError):
        SuiteConfig(problem={"epsilon": 0.5}).validate()
    with pytest.raises(ConfigError):
        SuiteConfig.from_dict({"colour": "blue"})


def test_run_layout_and_schemas(small_suite):
    manifest = json.loads((small_suite / "manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))
    assert manifest["harness_version"] == __version__
    assert len(manifest["records"]) == 3 * 2 * 15
    schema = load_schema("run_record")
    for rel in manifest["records"]:
        doc = json.loads((small_suite / rel).read_text())
        jsonschema.validate(doc, schema)
        rec = record_from_dict(doc)
        assert rel == f"records/{rec.algorithm}/N{rec.dimension}/run_{doc['header']['run_index']:02d}.json"
        assert rec.seed == doc["header"]["run_index"]
        assert doc["header"]["config_hash"] == config_hash(
            doc["problem"], rec.algorithm, doc["algorithm_config"], doc["termination"])


def test_record_round_trip_is_exact(small_suite):
    for path in (small_suite / "records").rglob("*.json"):
        doc, rec = load_record(path)
        again = record_to_dict(rec, run_index=doc["header"]["run_index"], problem=doc["problem"],
                               algorithm_config=doc["algorithm_config"], rule=doc["termination"])
        assert dumps_record(again) == path.read_text()


def test_reports(small_suite, tmp_path):
    res = emit_reports(small_suite, tmp_path / "rep")
    assert res.problems == []
    with open(tmp_path / "rep" / "indicators_es.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["N", "f_opt", "f_best", "f_med", "nu_med", "abs_err", "FR",
                       "mean_param_dev", "meanFevals"]
    assert [r[0] for r in rows[1:]] == ["2", "3"]
    dat = (tmp_path / "rep" / "ecdf" / "es_N2.dat").read_text().splitlines()
    assert dat[0].startswith("#") and dat[1].startswith("#")
    pts = [tuple(map(float, line.split())) for line in dat[2:]]
    assert pts[0][0] == 1 and pts[-1][0] == 600
    assert all(b[1] >= a[1] for a, b in zip(pts, pts[1:]))
    assert (tmp_path / "rep" / "ecdf" / "rs_all.dat").exists()
    assert (tmp_path / "rep" / "ranking.csv").exists()
    again = emit_reports(small_suite, tmp_path / "rep2")
    for p in (tmp_path / "rep").rglob("*"):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "rep2" / p.relative_to(tmp_path / "rep")).read_bytes()


def test_rank_and_report_commands(small_suite, capsys):
    assert main(["report", str(small_suite)]) == 0
    assert main(["rank", str(small_suite)]) == 0
    out = capsys.readouterr().out
    assert "overall:" in out


def test_workers_do_not_change_records(small_suite, tmp_path):
    out = tmp_path / "par"
    assert main(["run", *SMALL, "--out", str(out), "--workers", "2"]) == 0
    assert _tree(out) == _tree(small_suite)


def _write_synthetic_suite(root: Path, n=2, runs=15, corrupt=False):
    cfg = SuiteConfig(dimensions=(n,), runs=runs, algorithms=(AlgorithmSpec("es"),))
    inst = make_instance(n)
    rels = []
    for i in range(runs):
        rec = RunRecord("es", n, i, list(inst.t), EvaluationResult(float(n**3), 0.0), 50, "success",
                        [(50, float(n**3), 0.0)])
        rel = f"records/es/N{n}/run_{i:02d}.json"
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        doc = record_to_dict(rec, run_index=i, problem=cfg.problem_config(n).to_dict(),
                             algorithm_config={}, rule=cfg.rule(n).to_dict())
        p.write_text(dumps_record(doc))
        rels.append(rel)
    if corrupt:
        (root / rels[3]).write_text("{ not json")
    manifest = {"format": 1, "harness_version": __version__, "backend": "python",
                "created": "2026-01-01T00:00:00+00:00", "suite": cfg.to_dict(),
                "records": rels, "failed_runs": []}
    (root / "manifest.json").write_text(json.dumps(manifest))


def test_report_all_optimal_row(tmp_path):
    _write_synthetic_suite(tmp_path)
    res = emit_reports(tmp_path)
    with open(tmp_path / "reports" / "indicators_es.csv") as fh:
        row = list(csv.reader(fh))[1]
    assert row == ["2", "8.0", "8.0", "8.0", "0.0", "0.0", "1.0", "0.0", "50.0"]
    dat = (tmp_path / "reports" / "ecdf" / "es_N2.dat").read_text().splitlines()
    assert dat[-1].split()[1] == "1.0"
    assert res.ranking is None


def test_report_lists_corrupt_records(tmp_path, capsys):
    _write_synthetic_suite(tmp_path, corrupt=True)
    assert main(["report", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "run_03.json" in err
    with open(tmp_path / "reports" / "indicators_es.csv") as fh:
        assert len(list(csv.reader(fh))) == 2
    with pytest.raises(CorruptRecordError):
        load_record(tmp_path / "records/es/N2/run_03.json")


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--runs", "5", "--out", str(tmp_path / "a")]) == 1
    assert main(["report", str(tmp_path / "missing")]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", *SMALL, "--algo", "rs", "--out", str(blocker / "sub")]) == 2
    assert main(["run", "--runs", "2", "--override-conventions", "--dims", "2", "--algo", "rs",
                 "--budget-factor", "100", "--out", str(tmp_path / "b")]) == 0
    assert main(["validate", "--dims", "2", "--angle", "180"]) == 1
    assert main(["validate", "--dims", "2", "--epsilon", "0.5"]) == 1


def test_validate_command(capsys):
    assert main(["validate", "--dims", "5"]) == 0
    out = capsys.readouterr().out
    assert "vertex_optimum: 125.0" in out
    assert main(["validate", "--dims", "3", "--constraint-rotation", "direct"]) == 1


def test_config_file(tmp_path):
    cfg = {"dimensions": [2], "runs": 15, "seed": 7,
           "algorithms": [{"name": "de", "params": {"population_size": 12}}],
           "problem": {"rotation_angle": math.radians(300)},
           "protocol": {"budget_factor": 100}}
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "records/de/N2/run_00.json").read_text())
    assert doc["header"]["seed"] == 7
    assert doc["algorithm_config"]["population_size"] == 12
    assert doc["problem"]["rotation_angle"] == math.radians(300)
    assert doc["termination"]["budget"] == 200
