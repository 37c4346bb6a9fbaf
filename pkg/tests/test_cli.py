import csv
import json
import re

import pytest

from voyage.cli import TRAJECTORY_COLUMNS, main
from voyage.scenario import default_config_text

SMALL = ["--mesh-size", "2000"]


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", "--lambda", "0.95", "--fuel", "8", "--out", str(out), *SMALL])
    return code, out


class TestSolve:
    def test_outputs(self, solved):
        code, out = solved
        assert code == 0
        for name in ("trajectory.csv", "plan.csv", "summary.json", "trajectory.svg",
                     "manifest.json"):
            assert (out / name).exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["arrived"] is True
        assert summary["manifest_id"] == json.loads((out / "manifest.json").read_text())["manifest_id"]
        header = next(csv.reader(open(out / "trajectory.csv")))
        assert tuple(header) == TRAJECTORY_COLUMNS

    def test_rerun_is_byte_identical(self, solved, tmp_path):
        _, out = solved
        assert main(["solve", "--lambda", "0.95", "--fuel", "8", "--out", str(tmp_path),
                     *SMALL]) == 0
        for name in ("trajectory.csv", "plan.csv", "trajectory.svg"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    @pytest.mark.parametrize("lam", ["1.5", "-0.1"])
    def test_lambda_out_of_range(self, lam, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["solve", "--lambda", lam, "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_unreachable_exit_code(self, tmp_path, capsys):
        code = main(["solve", "--lambda", "1", "--horizon", "3", "--out", str(tmp_path),
                     "--mesh-size", "300"])
        assert code == 1
        assert "unreachable" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(default_config_text().replace('"x1_min": 0', '"x1_min": 400'))
        assert main(["map", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "bounds" in capsys.readouterr().err


class TestSweep:
    def test_two_fronts(self, tmp_path):
        code = main(["sweep", "--lambda-step", "0.5", "--fuel", "2,8", "--out", str(tmp_path),
                     "--mesh-size", "600"])
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "pareto.csv")))
        assert len(rows) == 6
        assert sorted({r["lambda"] for r in rows}) == ["0", "0.5", "1"]
        svg = (tmp_path / "pareto.svg").read_text()
        assert svg.count('class="front"') == 2

    def test_bad_step(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["sweep", "--lambda-step", "0", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestMap:
    def test_default_counts(self, tmp_path):
        assert main(["map", "--out", str(tmp_path)]) == 0
        svg = (tmp_path / "map.svg").read_text()
        assert len(re.findall(r'class="arrow"', svg)) == 400
        assert len(re.findall(r'class="port"', svg)) == 3
        assert 'class="start"' in svg and 'class="terminal"' in svg
        assert svg.startswith("<?xml") and 'version="1.1"' in svg

    def test_zero_current_gives_dots(self, tmp_path):
        cfg = tmp_path / "still.json"
        cfg.write_text(default_config_text().replace('"speed_scale": 34.96', '"speed_scale": 0'))
        assert main(["map", "--config", str(cfg), "--out", str(tmp_path / "m.svg")]) == 0
        svg = (tmp_path / "m.svg").read_text()
        assert svg.count("<circle class=\"arrow\"") == 400
        assert "<line class=\"arrow\"" not in svg

    def test_deterministic(self, tmp_path):
        main(["map", "--out", str(tmp_path / "a.svg")])
        main(["map", "--out", str(tmp_path / "b.svg")])
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
