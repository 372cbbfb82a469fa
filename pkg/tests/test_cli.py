import json
import os
import subprocess
import sys

import pytest

from lea.cli import main


def run_cli(*args, scratch=None):
    env = dict(os.environ)
    if scratch:
        env["LEA_SCRATCH"] = str(scratch)
    return subprocess.run(
        [sys.executable, "-m", "lea.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    bundle = str(tmp / "bundle.lea")
    r = run_cli(
        "train", "--dtype", "both", "--slices", "20", "--rows", "1024",
        "--mem-slices", "12", "--storage-slices", "4", "--seed", "42",
        "--trees", "10", "--out", bundle, scratch=tmp / "scratch",
    )
    assert r.returncode == 0, r.stderr
    table = str(tmp / "bench.col")
    r = run_cli(
        "bench", "--gen-rows", "4096", "--rows-per-slice", "512", "--model", bundle,
        "--table", table, "--objectives", "size", "--seed", "1", scratch=tmp / "scratch",
    )
    assert r.returncode == 0, r.stderr
    return {"tmp": tmp, "bundle": bundle, "table": table}


def test_train_emits_bundle(workspace):
    assert os.path.exists(workspace["bundle"])
    doc = json.load(open(workspace["bundle"]))
    assert doc["bundle_version"] == 1
    assert len(doc["entries"]) == 10  # 6 int + 4 string


def test_advise_writes_plan(workspace):
    plan_path = str(workspace["tmp"] / "plan.json")
    r = run_cli(
        "advise", "--table", workspace["table"], "--model", workspace["bundle"],
        "--objective", "size", "--granularity", "slice", "--out", plan_path,
    )
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert out["predicted_cost"] > 0
    plan = json.load(open(plan_path))
    assert plan["granularity"] == "slice"
    assert len(plan["assignments"]) == 26


def test_advise_deterministic_output(workspace):
    p1 = str(workspace["tmp"] / "p1.json")
    p2 = str(workspace["tmp"] / "p2.json")
    for p in (p1, p2):
        r = run_cli(
            "advise", "--table", workspace["table"], "--model", workspace["bundle"],
            "--objective", "size", "--granularity", "slice", "--seed", "9", "--out", p,
        )
        assert r.returncode == 0, r.stderr
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_oracle_reports_gap(workspace):
    plan_path = str(workspace["tmp"] / "plan_oracle.json")
    run_cli(
        "advise", "--table", workspace["table"], "--model", workspace["bundle"],
        "--objective", "size", "--granularity", "slice", "--out", plan_path,
    )
    r = run_cli(
        "oracle", "--table", workspace["table"], "--objective", "size",
        "--compare", plan_path,
    )
    assert r.returncode == 0, r.stderr
    report = json.loads(r.stdout)
    assert report["optimal_cost"] <= report["single_optimal_cost"]
    assert report["plan_gap"] >= 0
    assert report["single_optimal_gap"] >= 0


def test_encode_applies_plan(workspace):
    plan_path = str(workspace["tmp"] / "plan_enc.json")
    run_cli(
        "advise", "--table", workspace["table"], "--model", workspace["bundle"],
        "--objective", "size", "--granularity", "column", "--out", plan_path,
    )
    out_path = str(workspace["tmp"] / "encoded.col")
    r = run_cli(
        "encode", "--table", workspace["table"], "--plan", plan_path, "--out", out_path
    )
    assert r.returncode == 0, r.stderr
    assert os.path.getsize(out_path) < os.path.getsize(workspace["table"])


def test_encode_ingests_csv(workspace):
    csv_path = str(workspace["tmp"] / "tiny.csv")
    with open(csv_path, "w") as fh:
        fh.write("k,v\n1,a\n2,\n,b\n")
    out_path = str(workspace["tmp"] / "tiny.col")
    r = run_cli(
        "encode", "--csv", csv_path, "--schema", "k:int,v:string",
        "--rows-per-slice", "2", "--out", out_path,
    )
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert out["rows"] == 3 and out["columns"] == 2


def test_scan_outputs_measurements(workspace):
    r = run_cli(
        "scan", "--table", workspace["table"], "--column", "l_orderkey",
        "--mode", "storage-modeled", "--model", workspace["bundle"],
    )
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    col = doc["columns"]["l_orderkey"]
    assert col["elapsed_ns"] == col["io_ns"] + col["mem_ns"]


def test_scan_unknown_column_is_runtime_error(workspace):
    r = run_cli("scan", "--table", workspace["table"], "--column", "nope")
    assert r.returncode == 2
    assert "nope" in r.stderr


def test_usage_errors_exit_one():
    assert run_cli("advise").returncode == 1
    assert run_cli("train", "--bogus-flag", "x", "--out", "y").returncode == 1
    assert run_cli("nonexistent-command").returncode == 1


def test_main_callable_directly(tmp_path):
    assert main(["train", "--fake"]) == 1
    rc = main(
        [
            "train", "--dtype", "int", "--slices", "12", "--rows", "512",
            "--mem-slices", "4", "--storage-slices", "3", "--trees", "6",
            "--out", str(tmp_path / "b.lea"), "--scratch", str(tmp_path),
        ]
    )
    assert rc == 0


def test_size_phase_byte_identical(tmp_path):
    args = [
        "train", "--phase", "size", "--dtype", "int", "--slices", "10",
        "--rows", "512", "--seed", "7", "--trees", "6",
    ]
    a1 = str(tmp_path / "a1.json")
    a2 = str(tmp_path / "a2.json")
    assert main(args + ["--out", a1]) == 0
    assert main(args + ["--out", a2]) == 0
    assert open(a1, "rb").read() == open(a2, "rb").read()


def test_speed_phase_consumes_size_artifact(tmp_path):
    artifact = str(tmp_path / "size.json")
    assert (
        main(
            [
                "train", "--phase", "size", "--dtype", "int", "--slices", "10",
                "--rows", "512", "--seed", "7", "--trees", "6", "--out", artifact,
            ]
        )
        == 0
    )
    bundle = str(tmp_path / "full.lea")
    rc = main(
        [
            "train", "--phase", "speed", "--size-artifact", artifact,
            "--storage", "modeled", "--out", bundle, "--scratch", str(tmp_path),
        ]
    )
    assert rc == 0
    doc = json.load(open(bundle))
    assert doc["entries"]["int64/plain"]["storage_linear"] is not None


def test_speed_phase_without_artifact_is_error(tmp_path):
    rc = main(["train", "--phase", "speed", "--out", str(tmp_path / "x.lea")])
    assert rc == 2
