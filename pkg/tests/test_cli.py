import csv
import hashlib
import json

import pytest

from fracap.cli import main


def run_fast_pass(out):
    """Cheapest PASS run: exact-branch kernels, no table builds."""
    return main(["run", "--experiment", "kernel-validate", "--s", "1.0",
                 "--out", str(out)])


def write_fail_config(path):
    """Vertical-segment sweep whose 24 -> 25 step drops ~1% < 5%."""
    path.write_text(json.dumps({"experiment": "capacity-sweep",
                                "set": "vertical-segment",
                                "resolutions": [24, 25]}))
    return path


class TestRunArtifacts:
    def test_pass_run_writes_artifacts(self, tmp_path):
        out = tmp_path / "kv"
        assert run_fast_pass(out) == 0
        for name in ("results.csv", "summary.json", "manifest.json"):
            assert (out / name).is_file()

        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "PASS"
        assert summary["experiment"] == "kernel-validate"
        assert all(c["passed"] for c in summary["checks"])
        assert len(summary["checks"]) >= 3

    def test_manifest_echoes_config_and_hashes(self, tmp_path):
        out = tmp_path / "kv"
        run_fast_pass(out)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["s"] == 1.0
        assert manifest["config"]["experiment"] == "kernel-validate"
        assert manifest["status"] == "PASS"
        assert manifest["wall_time_s"] >= 0.0
        for key in ("fracap", "python", "numpy", "scipy"):
            assert key in manifest["versions"]
        for name, digest in manifest["files"].items():
            recomputed = hashlib.sha256((out / name).read_bytes()).hexdigest()
            assert digest == "sha256:" + recomputed

    def test_threshold_failure_exits_one(self, tmp_path):
        cfg = write_fail_config(tmp_path / "fail.json")
        code = main(["run", "--config", str(cfg),
                     "--out", str(tmp_path / "failrun")])
        assert code == 1
        summary = json.loads((tmp_path / "failrun" / "summary.json").read_text())
        assert summary["status"] == "FAIL"
        assert not all(c["passed"] for c in summary["checks"])

    def test_capacity_sweep_column_contract(self, tmp_path):
        cfg = write_fail_config(tmp_path / "fail.json")
        main(["run", "--config", str(cfg), "--out", str(tmp_path / "run")])
        with open(tmp_path / "run" / "results.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["level", "atoms", "value", "utilization",
                          "certificate_gap", "iterations"]

    def test_reruns_are_byte_identical(self, tmp_path):
        run_fast_pass(tmp_path / "a")
        run_fast_pass(tmp_path / "b")
        assert ((tmp_path / "a" / "results.csv").read_bytes()
                == (tmp_path / "b" / "results.csv").read_bytes())


class TestConfigResolution:
    def test_flag_overrides_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "kernel-validate", "s": 0.9}))
        out = tmp_path / "run"
        code = main(["run", "--config", str(cfg), "--s", "1.0",
                     "--out", str(out)])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["s"] == 1.0

    def test_unknown_config_keys_become_options(self, tmp_path):
        cfg = write_fail_config(tmp_path / "cfg.json")
        out = tmp_path / "run"
        main(["run", "--config", str(cfg), "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["options"]["set"] == "vertical-segment"
        assert manifest["config"]["options"]["resolutions"] == [24, 25]


class TestUsageErrors:
    def test_no_command(self, capsys):
        assert main([]) == 2

    def test_unknown_experiment(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "does-not-exist"}))
        assert main(["run", "--config", str(cfg)]) == 2

    def test_missing_experiment(self):
        assert main(["run"]) == 2

    def test_config_file_not_found(self):
        assert main(["run", "--config", "/nonexistent/cfg.json"]) == 2

    def test_config_not_json(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("not json {")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_config_not_object(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2]")
        assert main(["run", "--config", str(cfg)]) == 2

    def test_segment_sweep_requires_s_one(self, tmp_path):
        code = main(["run", "--experiment", "capacity-sweep",
                     "--set", "vertical-segment", "--s", "0.75",
                     "--out", str(tmp_path / "run")])
        assert code == 2

    def test_bad_flag_value(self, tmp_path):
        # argparse rejects non-listed experiment names with its own exit 2
        assert main(["run", "--experiment", "nope",
                     "--out", str(tmp_path / "x")]) == 2


class TestEmitPlotData:
    @pytest.fixture()
    def populated(self, tmp_path):
        base = tmp_path / "runs"
        run_fast_pass(base / "kv")
        cfg = write_fail_config(tmp_path / "cfg.json")
        main(["run", "--config", str(cfg), "--out", str(base / "sweep")])
        return base

    def test_consolidates_runs(self, populated):
        assert main(["emit-plot-data", "--dir", str(populated)]) == 0
        emitted = json.loads((populated / "emit-summary.json").read_text())
        assert emitted["status"] == "PASS"
        assert emitted["runs"] == 2
        assert emitted["experiments"] == ["capacity-sweep", "kernel-validate"]
        # the sweep's value column is monotone, so verification passes
        assert any(v["check"] == "value column monotone" and v["passed"]
                   for v in emitted["verification"])

    def test_long_format_layout(self, populated):
        main(["emit-plot-data", "--dir", str(populated)])
        text = (populated / "capacity-sweep.csv").read_text()
        lines = text.splitlines()
        assert lines[0].startswith("# long format:")
        header = lines[1].split(",")
        assert header == ["experiment", "run", "n", "s", "depth", "seed",
                          "row", "column", "value"]
        # 2 result rows x 6 columns from the sweep run
        assert len(lines) == 2 + 2 * 6
        # spot check: first data row carries the run name and experiment
        first = lines[2].split(",")
        assert first[0] == "capacity-sweep" and first[1] == "sweep"

    def test_separate_out_dir(self, populated, tmp_path):
        dest = tmp_path / "plots"
        assert main(["emit-plot-data", "--dir", str(populated),
                     "--out", str(dest)]) == 0
        assert (dest / "kernel-validate.csv").is_file()
        assert (dest / "emit-summary.json").is_file()

    def test_empty_dir_is_usage_error(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["emit-plot-data", "--dir", str(empty)]) == 2

    def test_missing_dir_flag(self):
        assert main(["emit-plot-data"]) == 2
