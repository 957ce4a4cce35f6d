import hashlib
import json

import numpy as np
import pytest

from qimaging.cli import main
from qimaging.pipeline_io import read_report, read_stack


@pytest.fixture
def scene_file(tmp_path):
    scene = {
        "width": 21, "height": 21,
        "pair_rate": 1.5, "pump_sigma_px": 8.0,
        "object_map": {"generator": "disk", "radius": 6},
        "detector": {"dark_event_prob": 0.0},
        "seed": 17,
    }
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scene))
    return path


@pytest.fixture
def rois_file(tmp_path):
    rois = {
        "center": [20, 20],
        "rois": [
            {"label": "bright", "rect": [7, 7, 7, 7]},
            {"label": "dark", "rect": [0, 0, 4, 4]},
        ],
        "cuts": {"rows": [8, 12], "cols": [8, 12]},
    }
    path = tmp_path / "rois.json"
    path.write_text(json.dumps(rois))
    return path


def _sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSimulateCommand:
    def test_zero_frames_is_usage_error(self, scene_file, tmp_path):
        rc = main(["simulate", "--scene", str(scene_file), "--frames", "0",
                   "--out-prefix", str(tmp_path / "run")])
        assert rc == 2

    def test_missing_scene_file_is_reported(self, tmp_path, capsys):
        rc = main(["simulate", "--scene", str(tmp_path / "nope.json"),
                   "--frames", "10", "--out-prefix", str(tmp_path / "run")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_outputs_and_worker_determinism(self, scene_file, tmp_path,
                                            capsys):
        sums = {}
        for workers in (1, 8):
            prefix = tmp_path / f"w{workers}" / "run"
            rc = main(["simulate", "--scene", str(scene_file),
                       "--frames", "2000", "--out-prefix", str(prefix),
                       "--workers", str(workers)])
            assert rc == 0
            sums[workers] = (_sha256(prefix.parent / "run.probe.qifs"),
                             _sha256(prefix.parent / "run.ref.qifs"))
            meta = json.loads((prefix.parent / "run.meta.json").read_text())
            assert meta["frames"] == 2000
            assert meta["probe_events_per_px_per_frame"] > 0
        assert sums[1] == sums[8]
        assert "ev/px/frame" in capsys.readouterr().out


class TestAnalyzeCommand:
    @pytest.fixture
    def stacks(self, scene_file, tmp_path):
        prefix = tmp_path / "run"
        assert main(["simulate", "--scene", str(scene_file),
                     "--frames", "30000", "--out-prefix", str(prefix)]) == 0
        return prefix.parent / "run.probe.qifs", prefix.parent / "run.ref.qifs"

    def test_noiseless_advantage_near_unity(self, stacks, rois_file,
                                            tmp_path, capsys):
        probe, ref = stacks
        out_dir = tmp_path / "analysis"
        rc = main(["analyze", "--probe", str(probe), "--ref", str(ref),
                   "--rois", str(rois_file), "--out-dir", str(out_dir)])
        assert rc == 0
        report = read_report(out_dir / "report.json")
        # no background: classical and AND images carry the same contrast
        assert report.advantage == pytest.approx(1.0, abs=0.05)
        assert report.v_classical == pytest.approx(1.0, abs=0.02)
        for name in ("classical.pgm", "and.png", "baseline.pgm",
                     "cuts_classical.csv", "cuts_and.csv", "cuts.csv"):
            assert (out_dir / name).exists()
        lines = (out_dir / "cuts.csv").read_text().strip().splitlines()
        assert lines[0] == "index,classical_row,classical_col,and_row,and_col"
        assert len(lines) == 22
        assert "A=1." in capsys.readouterr().out

    def test_tolerance_recorded(self, stacks, rois_file, tmp_path):
        probe, ref = stacks
        out_dir = tmp_path / "tol"
        rc = main(["analyze", "--probe", str(probe), "--ref", str(ref),
                   "--rois", str(rois_file), "--out-dir", str(out_dir),
                   "--tolerance", "1"])
        assert rc == 0
        report = read_report(out_dir / "report.json")
        assert report.totals["tolerance"] == 1

    def test_probe_required_without_sweep(self, rois_file, tmp_path):
        rc = main(["analyze", "--rois", str(rois_file),
                   "--out-dir", str(tmp_path / "x")])
        assert rc == 2

    def test_sweep_writes_summary(self, scene_file, rois_file, tmp_path):
        cond_path = tmp_path / "conditions.json"
        cond_path.write_text(json.dumps([
            {"probe_loss_eta": 1.0}, {"probe_loss_eta": 0.5},
        ]))
        out_dir = tmp_path / "sweep"
        rc = main(["analyze", "--sweep", str(cond_path),
                   "--scene", str(scene_file), "--frames", "5000",
                   "--rois", str(rois_file), "--out-dir", str(out_dir)])
        assert rc == 0
        lines = (out_dir / "summary.csv").read_text().strip().splitlines()
        assert len(lines) == 3
        assert (out_dir / "condition_0" / "report.json").exists()
        assert (out_dir / "condition_1" / "report.json").exists()


class TestCorrelateCommand:
    def test_zero_displacement_single_cell(self, scene_file, tmp_path,
                                           capsys):
        prefix = tmp_path / "run"
        main(["simulate", "--scene", str(scene_file), "--frames", "500",
              "--out-prefix", str(prefix)])
        out = tmp_path / "corr.csv"
        rc = main(["correlate", "--probe", str(prefix.parent / "run.probe.qifs"),
                   "--ref", str(prefix.parent / "run.ref.qifs"),
                   "--max-disp", "0", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "dx,dy,value"
        assert len(lines) == 2
        assert "peak at" in capsys.readouterr().out

    def test_negative_displacement_is_usage_error(self, tmp_path):
        rc = main(["correlate", "--probe", "a", "--ref", "b",
                   "--max-disp", "-1", "--out", str(tmp_path / "c.csv")])
        assert rc == 2


class TestDetectCommand:
    def test_too_few_trials_is_usage_error(self, scene_file, rois_file):
        rc = main(["detect", "--scene", str(scene_file),
                   "--rois", str(rois_file), "--roi", "bright",
                   "--block-frames", "10", "--trials", "99"])
        assert rc == 2

    def test_unknown_roi_is_reported(self, scene_file, rois_file, capsys):
        rc = main(["detect", "--scene", str(scene_file),
                   "--rois", str(rois_file), "--roi", "nope",
                   "--block-frames", "10", "--trials", "100"])
        assert rc == 1
        assert "not found" in capsys.readouterr().err

    def test_writes_ber_payload(self, scene_file, rois_file, tmp_path,
                                capsys):
        out = tmp_path / "ber.json"
        rc = main(["detect", "--scene", str(scene_file),
                   "--rois", str(rois_file), "--roi", "bright",
                   "--block-frames", "40", "--trials", "100",
                   "--strategy", "classical", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["strategies"]["classical"]["trials"] == 100
        assert "BER=" in capsys.readouterr().out


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip()


def test_qifs_from_cli_round_trips(scene_file, tmp_path):
    prefix = tmp_path / "run"
    main(["simulate", "--scene", str(scene_file), "--frames", "100",
          "--out-prefix", str(prefix)])
    stack = read_stack(prefix.parent / "run.probe.qifs")
    assert stack.n_frames == 100
    assert (stack.width, stack.height) == (21, 21)
