import csv
import io
import json
import math

import numpy as np
import pytest

from mirrorinfo import cli
from mirrorinfo.errors import NumericalFailureError
from mirrorinfo.factories import KINDS, InstanceSpec, random_instance
from mirrorinfo.schema import SchemaError, decode_config, decode_matrix, encode_matrix
from mirrorinfo.solvers import SolverConfig
from oracles import bsc_capacity

BSC = {"problem": "cc", "data": {"Q": [[0.9, 0.1], [0.1, 0.9]]}, "solver": {"algorithm": "md"}}
ASYM = {"problem": "cc", "data": {"Q": [[0.9, 0.3, 0.5], [0.1, 0.7, 0.5]]}, "solver": {"algorithm": "md"}}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_solve_bsc(tmp_path, capsys):
    assert cli.main(["solve", write_cfg(tmp_path, BSC)]) == cli.EXIT_OK
    report = cli.RunReport.from_json(capsys.readouterr().out)
    assert report.problem == "cc" and report.units == "nats"
    assert report.value == pytest.approx(bsc_capacity(0.1), abs=1e-7)
    assert report.reason == "converged"


def test_solve_bits(tmp_path, capsys):
    assert cli.main(["solve", write_cfg(tmp_path, BSC), "--bits"]) == cli.EXIT_OK
    report = cli.RunReport.from_json(capsys.readouterr().out)
    assert report.units == "bits"
    assert report.value == pytest.approx(bsc_capacity(0.1) / math.log(2), abs=1e-7)


def test_report_json_round_trip():
    report, _ = cli.run_solve(BSC)
    text = report.to_json()
    back = cli.RunReport.from_json(text)
    assert back == report
    # floats survive at full precision
    assert json.loads(text)["value"] == report.value


def test_trace_output(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert cli.main(["solve", write_cfg(tmp_path, ASYM), "--trace", str(out), "--tol", "1e-10"]) == cli.EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["iter", "objective", "stop_metric", "tau", "gamma", "theta", "backtracks", "violation"]
    iters = [int(r[0]) for r in rows[1:]]
    assert iters == list(range(1, len(iters) + 1))
    report = cli.RunReport.from_json(capsys.readouterr().out)
    assert report.iterations == len(iters)


def test_exit_max_iters(tmp_path, capsys):
    assert cli.main(["solve", write_cfg(tmp_path, ASYM), "--max-iters", "2"]) == cli.EXIT_MAX_ITERS
    report = cli.RunReport.from_json(capsys.readouterr().out)
    assert report.reason == "max_iters" and report.iterations == 2


@pytest.mark.parametrize(
    "cfg",
    [
        {"problem": "cc", "data": {"Q": [[0.9, 0.1], [0.1, 0.9]]}, "cones": ["nonnegative"]},
        {"problem": "cc", "data": {"Q": [[0.9, 0.1], [0.1, 0.9]]}, "cones": ["psd"]},
        {"problem": "nope", "data": {}},
        {"problem": "cc", "data": {"Q": [[0.9, 0.1], [0.1, 0.9]]}, "extra": 1},
        {"problem": "cc", "data": {"Q": [[0.9, 0.1], ["a", 0.9]]}},
        {"problem": "cc", "data": {"Q": [[0.9, 0.1], [0.1, 0.9]]}, "solver": {"alpha": 1.5}},
        {"problem": "crd", "data": {"p": [0.5, 0.5]}},
        {
            "problem": "cc",
            "data": {"Q": [[0.9, 0.1], [0.1, 0.9]], "A": [[1.0, 0.0]], "b": [0.5]},
            "solver": {"algorithm": "md"},
        },
    ],
)
def test_exit_schema(tmp_path, cfg, capsys):
    assert cli.main(["solve", write_cfg(tmp_path, cfg)]) == cli.EXIT_SCHEMA
    assert "error" in capsys.readouterr().err


def test_exit_schema_bad_json_and_args(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert cli.main(["solve", str(path)]) == cli.EXIT_SCHEMA
    assert cli.main(["solve", str(tmp_path / "missing.json")]) == cli.EXIT_SCHEMA
    assert cli.main(["frobnicate"]) == cli.EXIT_SCHEMA


def test_exit_infeasible(tmp_path):
    cfg = {"problem": "crd", "data": {"p": [0.5, 0.5], "D": 0.0, "delta": [[1.0, 1.0], [1.0, 1.0]]}}
    assert cli.main(["solve", write_cfg(tmp_path, cfg)]) == cli.EXIT_INFEASIBLE
    cfg = {"problem": "cc", "data": {"Q": [[1.0, 0.0], [0.0, 1.0]], "A": [[1.0, 1.0]], "b": [0.5]}}
    assert cli.main(["solve", write_cfg(tmp_path, cfg)]) == cli.EXIT_INFEASIBLE


def test_exit_numerical(tmp_path, monkeypatch):
    def broken(problem, config):
        raise NumericalFailureError("non-finite objective")

    monkeypatch.setattr(cli, "solve", broken)
    assert cli.main(["solve", write_cfg(tmp_path, BSC)]) == cli.EXIT_NUMERICAL


def test_matrix_codec_round_trip():
    M = np.array([[1.0, 2 - 1j], [2 + 1j, 0.5]])
    assert np.array_equal(decode_matrix(encode_matrix(M), "M"), M)
    R = np.array([[0.25, 0.75], [0.75, 0.25]])
    assert np.array_equal(decode_matrix(encode_matrix(R), "R"), R)
    with pytest.raises(SchemaError) as exc:
        decode_matrix([[1.0], [1.0, 2.0]], "M")
    assert exc.value.field.startswith("M")


@pytest.mark.parametrize("kind", KINDS)
def test_config_round_trip(kind):
    spec = random_instance(kind, seed=6)
    solver = SolverConfig(algorithm="pdhg", kappa=2.0, tol=1e-9, max_iters=123, seed=4)
    cfg = json.loads(json.dumps(spec.to_config(solver)))
    back, s2, cones = decode_config(cfg)
    assert back.to_config(s2) == spec.to_config(solver)
    assert cones is None


def test_random_config(capsys, tmp_path):
    cfg = {"problem": "ree", "data": {"random": {"dims": [2, 2], "seed": 1}}}
    assert cli.main(["solve", write_cfg(tmp_path, cfg)]) == cli.EXIT_OK
    report = cli.RunReport.from_json(capsys.readouterr().out)
    direct, _ = cli.run_solve({"problem": "ree", "data": random_instance("ree", (2, 2), 1).to_config()["data"]})
    assert report.value == direct.value


def test_bench_output(capsys):
    assert cli.main(["bench", "cc", "--sizes", "3,1", "--seed", "1"]) == cli.EXIT_OK
    text = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == cli.BENCH_HEADER
    assert rows[1][:3] == ["cc", "3", "1"]
    assert float(rows[1][4]) <= 1e-5
    # deterministic apart from the timing column
    again = cli.run_bench("cc", [(3, 1)], seed=1)
    assert [str(v) for v in again[0][:4]] == rows[1][:4] and float(rows[1][5]) == again[0][5]


def test_bench_skipped_row(monkeypatch):
    from mirrorinfo.errors import InstanceBudgetError

    def no_instance(*a, **k):
        raise InstanceBudgetError("budget exhausted")

    monkeypatch.setattr(cli, "random_instance", no_instance)
    rows = cli.run_bench("ea", [(2, 1)])
    assert rows[0][5].startswith("skipped:")
    buf = io.StringIO()
    cli.write_bench(rows, buf)
    assert buf.getvalue().splitlines()[0] == "suite,n,l,iters,tol,value,seconds"


def test_bench_file_output(tmp_path):
    out = tmp_path / "bench.csv"
    assert cli.main(["bench", "crd", "--sizes", "2", "--out", str(out)]) == cli.EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == cli.BENCH_HEADER and len(rows) == 2
    assert cli.main(["bench", "cc", "--sizes", "x"]) == cli.EXIT_SCHEMA
