import json
import os

import numpy as np
import pytest

from voxinspect import cli
from voxinspect.gtsp import GtspInstance

from conftest import make_scene, random_instance

OUTPUTS = {"report.json", "trace.jsonl", "path.csv", "table.md"}


def write(path, text):
    path.write_text(text)
    return str(path)


class TestRun:
    def test_tiny_scene(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.main(["run", "--scene", "builtin:single_voxel", "--out", str(out)]) == 0
        assert set(os.listdir(out)) == OUTPUTS
        report = json.loads((out / "report.json").read_text())
        assert report["status"] == "finished" and report["inspected"] == 1
        assert (out / "path.csv").read_text().splitlines()[0] == "x,y,z"
        assert "single_voxel" in (out / "table.md").read_text()
        assert all(json.loads(line)["iteration"] for line in (out / "trace.jsonl").read_text().splitlines())

    def test_stuck_scene(self, tmp_path):
        out = tmp_path / "out"
        assert cli.main(["run", "--scene", "builtin:blocked_voxel", "--out", str(out)]) == 2
        report = json.loads((out / "report.json").read_text())
        assert report["uninspectable"] == ["15_13_4"]

    def test_missing_scene_file(self, tmp_path, capsys):
        rc = cli.main(["run", "--scene", str(tmp_path / "nope.txt"), "--start", "1,1,1,0", "--out", str(tmp_path)])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_scene_file_needs_start(self, tmp_path):
        scene = write(tmp_path / "s.txt", "res 1\ndims 20 20 12\n10 10 5 I\n")
        assert cli.main(["run", "--scene", scene, "--out", str(tmp_path / "o")]) == 1

    def test_scene_file_with_start(self, tmp_path):
        scene = write(tmp_path / "s.txt", "res 1\ndims 20 20 12\n10 10 5 I\n")
        out = tmp_path / "o"
        assert cli.main(["run", "--scene", scene, "--start", "4.5,9.5,5.5,0", "--out", str(out)]) == 0
        assert json.loads((out / "report.json").read_text())["scene"] == "s"

    def test_no_infrastructure_visible(self, tmp_path):
        scene = write(tmp_path / "s.txt", "res 1\ndims 20 20 12\n10 10 5 I\n")
        assert cli.main(["run", "--scene", scene, "--start", "4.5,9.5,5.5,180", "--out", str(tmp_path / "o")]) == 1

    def test_bad_config_key(self, tmp_path):
        conf = write(tmp_path / "c.cfg", "view.nonsense = 3\n")
        assert cli.main(["run", "--config", conf, "--scene", "builtin:single_voxel", "--out", str(tmp_path)]) == 1

    def test_usage_error_is_exit_1(self):
        assert cli.main(["run", "--apex-deg", "wide"]) == 1


class TestConfig:
    def test_flags_override_file(self, tmp_path):
        conf = write(tmp_path / "c.cfg", "# comment\nview.apex_deg = 40\nview.dist = 3,6\nplanner.dd_factor = 1.5\nrrt.step = 0.5\nsensor.rays_h = 16\n")
        args = cli.build_parser().parse_args(["run", "--config", conf, "--apex-deg", "30"])
        opts = cli._resolve(args)
        config = cli.planner_config(opts)
        assert config.view.apex_angle == pytest.approx(np.radians(30))
        assert (config.view.min_dist, config.view.max_dist) == (3.0, 6.0)
        assert config.dd_factor == 1.5
        assert config.rrt.step == 0.5
        assert config.sensor.rays_h == 16

    def test_every_flag_has_a_file_key(self):
        parser = cli.build_parser()
        run_parser = parser._subparsers._group_actions[0].choices["run"]
        dests = {a.dest for a in run_parser._actions} - {"help", "config"}
        assert dests <= {dest for dest, _ in cli.KEYS.values()}

    def test_defaults(self):
        opts = cli._resolve(cli.build_parser().parse_args(["run"]))
        config = cli.planner_config(opts)
        assert config.view.apex_angle == pytest.approx(np.radians(20))
        assert (config.view.min_dist, config.view.max_dist) == (2.0, 5.0)
        assert config.dd_factor == 1.25 and config.rpt is None and config.cruise_mps == 1.0

    def test_cameras_and_granularity(self):
        args = cli.build_parser().parse_args(["run", "--cameras", "fwd,down", "--granularity", "per-voxel"])
        view = cli.view_from(cli._resolve(args))
        assert {c.value for c in view.cameras} == {"fwd", "down"}
        assert view.granularity.value == "per-voxel"


class TestGtsp:
    def test_triangle(self, tmp_path, capsys):
        inst = GtspInstance([(0, 0, 0), (3, 0, 0), (0, 4, 0)], [0, 1, 2], [0, 1, 2])
        f = write(tmp_path / "t.gtsp", inst.to_text())
        assert cli.main(["gtsp", f]) == 0
        assert "cost: 12\n" in capsys.readouterr().out

    def test_exact_not_worse(self, tmp_path, capsys):
        inst = random_instance(np.random.default_rng(7), (6, 6), (2, 3))
        f = write(tmp_path / "r.gtsp", inst.to_text())
        cli.main(["gtsp", f, "--seed", "2"])
        heur = float(capsys.readouterr().out.split("cost:")[1])
        cli.main(["gtsp", f, "--exact"])
        exact = float(capsys.readouterr().out.split("cost:")[1])
        assert exact <= heur + 1e-9

    def test_garbage(self, tmp_path):
        assert cli.main(["gtsp", write(tmp_path / "g.gtsp", "hello world\n")]) == 1

    def test_guard(self, tmp_path):
        inst = GtspInstance(np.random.default_rng(0).random((30, 3)), np.repeat(np.arange(10), 3), list(range(10)))
        assert cli.main(["gtsp", write(tmp_path / "big.gtsp", inst.to_text()), "--exact"]) == 3


class TestOracle:
    def counts(self, capsys):
        out = capsys.readouterr().out.split()
        return int(out[1]), int(out[3])

    def test_isolated_voxel(self, tmp_path, capsys):
        scene = write(tmp_path / "s.txt", "res 1\ndims 12 12 12\n6 6 6 I\n")
        assert cli.main(["oracle", "--scene", scene]) == 0
        assert self.counts(capsys) == (1, 0)

    def test_sealed_voxel(self, tmp_path, capsys):
        cells = {(6, 6, 6): "I"}
        for d in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
            cells[tuple(np.add((6, 6, 6), d))] = "O"
        scene = write(tmp_path / "s.txt", make_scene((12, 12, 12), cells).to_text())
        assert cli.main(["oracle", "--scene", scene, "--list"]) == 0
        assert self.counts(capsys)[:2] == (0, 1)

    def test_box_bridge_matches_run(self, tmp_path, capsys):
        assert cli.main(["oracle", "--scene", "builtin:box_bridge"]) == 0
        good, _ = self.counts(capsys)
        assert cli.main(["run", "--scene", "builtin:box_bridge", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["inspected"] == report["inspectable_voxels"] == good


def test_make_scene(tmp_path, capsys):
    f = tmp_path / "tower.txt"
    assert cli.main(["make-scene", "tower", str(f)]) == 0
    start = capsys.readouterr().out.strip()
    assert len(start.split(",")) == 4
    assert f.read_text().startswith("# tower")
