import json
import math
import os

import numpy as np
import pytest

from inhand.cli import (EXIT_CONFIG, EXIT_OK, EXIT_OUTPUT, EXIT_USAGE, BatchSummary,
                        emit_report, main, run_batch)
from inhand.config import RunConfig
from inhand.errors import InvalidArgument
from inhand.fingertip import InHandState
from inhand.planner import TRACE_HEADER
from inhand.render import render_side_image
from inhand.vision import write_pgm


def test_run_writes_reports_and_summary(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--n", "3", "--seed", "5", "--out", str(out), "--trace"]) == EXIT_OK
    lines = (out / "reports.jsonl").read_text().splitlines()
    assert [json.loads(x)["seed"] for x in lines] == [5, 6, 7]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n"] == 3 and summary["seeds"] == [5, 6, 7]
    assert 0.0 <= summary["success_rate"] <= 1.0
    trace = (out / "traces" / "cycle_5.csv").read_text().splitlines()
    assert trace[0] == TRACE_HEADER
    assert "cycles=3" in capsys.readouterr().out


def test_reports_are_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "--n", "4", "--seed", "2", "--out", str(d)]) == EXIT_OK
    assert (a / "reports.jsonl").read_bytes() == (b / "reports.jsonl").read_bytes()


def test_config_file_is_honoured(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scene": {"count": 0}}))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "reports.jsonl").read_text())
    assert report["failure"] == {"stage": "Detect", "reason": "no-candidate"}


def test_exit_codes(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"nope": 1}')
    assert main(["print-config", "--config", str(bad)]) == EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--out", str(blocker / "sub")]) == EXIT_OUTPUT
    assert main(["run", "--n", "0", "--out", str(tmp_path / "z")]) == EXIT_USAGE
    assert main(["perceive", str(tmp_path / "nope.pgm")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE


def test_empty_batch_summary(tmp_path):
    emit_report(BatchSummary(RunConfig()), tmp_path)
    assert (tmp_path / "reports.jsonl").read_text() == ""
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["n"] == 0 and summary["success_rate"] == 0.0
    with pytest.raises(InvalidArgument):
        run_batch(RunConfig(), 0)


def test_print_config_round_trips(capsys):
    assert main(["print-config"]) == EXIT_OK
    assert RunConfig.from_json(capsys.readouterr().out) == RunConfig()


def test_scene_command(tmp_path, capsys):
    assert main(["scene", "--seed", "3"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["seed"] == 3 and len(doc["screws"]) == 5


def test_perceive_on_a_written_image(tmp_path, capsys, spec):
    path = tmp_path / "side.pgm"
    write_pgm(path, render_side_image(InHandState.from_axial(0.018, math.radians(20)), spec))
    assert main(["perceive", str(path)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["alpha_deg"] == pytest.approx(-20.0, abs=1.0)
    assert out["h"][0] > 135  # the head leans towards image right


def test_calibrate_demo(capsys):
    assert main(["calibrate-demo", "--offset", "37"]) == EXIT_OK
    last = capsys.readouterr().out.splitlines()[-1]
    assert last == "calibrated after 70 steps, residual 2.000 deg"
