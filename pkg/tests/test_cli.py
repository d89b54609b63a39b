import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cejulia.cli import RunConfig, main, read_pbm, read_points, run, write_pbm, write_points
from cejulia.porosity import DyadicOccupancy, synthetic_set


def summary(path, name):
    return json.loads((path / f"{name}.json").read_text())


class TestFormats:
    def test_points_round_trip(self, tmp_path):
        pts = np.array([1 + 2j, -0.5 - 1e-12j, 3.25])
        write_points(str(tmp_path / "p.txt"), pts, {"seed": 1})
        assert np.array_equal(read_points(str(tmp_path / "p.txt")), pts)

    def test_points_stdin_stdout(self, monkeypatch, capsys):
        write_points("-", np.array([0.5j]), {})
        text = capsys.readouterr().out
        monkeypatch.setattr(sys, "stdin", io.StringIO(text))
        assert read_points("-").tolist() == [0.5j]

    def test_points_malformed(self, tmp_path):
        (tmp_path / "bad.txt").write_text("1 2 3\n")
        with pytest.raises(ValueError):
            read_points(str(tmp_path / "bad.txt"))

    def test_pbm_round_trip(self, tmp_path):
        occ = DyadicOccupancy.from_unit_points(synthetic_set("cantor_dust", 6, 4), 6)
        write_pbm(str(tmp_path / "a.pbm"), occ.to_bitmap(), {"depth": 6})
        assert np.array_equal(read_pbm(str(tmp_path / "a.pbm")), occ.to_bitmap())

    def test_pbm_rejects_other_formats(self, tmp_path):
        (tmp_path / "x.pbm").write_text("P4\n2 2\n")
        with pytest.raises(ValueError):
            read_pbm(str(tmp_path / "x.pbm"))


class TestConfig:
    def test_header_fields(self):
        h = RunConfig().header()
        assert {"map", "delta", "D", "N", "P", "depth", "seed", "schedule", "version"} <= set(h)

    @pytest.mark.parametrize("argv", [["ce", "--delta", "0"], ["ce", "--depth", "40"],
                                      ["ce", "--map", "x,y"], ["ce", "--seed", "-1"]])
    def test_invalid_config_exits_2(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path)]) == 2


class TestCommands:
    def test_render_deterministic(self, tmp_path):
        for d in ("a", "b"):
            assert main(["render", "--depth", "8", "--count", "20000", "--out", str(tmp_path / d)]) == 0
        for name in ("julia_points.txt", "occupancy.pbm"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        bitmap = read_pbm(str(tmp_path / "a" / "occupancy.pbm"))
        # the segment occupies one or two rows of the grid
        assert np.count_nonzero(bitmap.any(axis=1)) <= 2

    def test_render_circle(self, tmp_path):
        assert main(["render", "--map", "0,0,1", "--depth", "7", "--count", "20000",
                     "--out", str(tmp_path)]) == 0
        img = read_pbm(str(tmp_path / "occupancy.pbm"))
        ys, xs = np.nonzero(img)
        r = np.hypot(xs + 0.5 - 64, ys + 0.5 - 64)
        assert r.min() > 50 and r.max() < 62

    def test_render_stdout(self, capsys):
        assert main(["render", "--depth", "4", "--count", "100", "--out", "-"]) == 0
        assert "# map: -2,0,1" in capsys.readouterr().out

    def test_ce(self, tmp_path):
        code, rep = run(["ce", "--map=-2,0,1", "--nmax", "40", "--count", "20000", "--out", str(tmp_path)])
        assert code == 0
        (row,) = [r for r in rep.rows if r[2]]
        assert abs(row[3] - 4) < 1e-6 and abs(row[4]) < 1e-6 and row[-1] == "CE"
        assert (tmp_path / "ce.csv").exists() and summary(tmp_path, "ce")["exit_code"] == 0

    def test_ce_not_ce(self, tmp_path):
        code, rep = run(["ce", "--map=-1,0,1", "--nmax", "60", "--count", "20000", "--out", str(tmp_path)])
        finite = [r for r in rep.rows if r[-1] != "COLLISION"]
        assert code == 0 and finite and all(r[-1] == "NOT-CE" and r[3] <= 1 for r in finite)

    def test_goodtimes(self, tmp_path):
        code, rep = run(["goodtimes", "--map", "1j,0,1", "--nmax", "200", "--samples", "4",
                         "--delta", "0.1,0.05", "--count", "50000", "--no-diam", "--out", str(tmp_path)])
        assert code == 0
        assert rep.summary["goodtime_density_min"] >= 0.5 and rep.summary["shadow_density_min"] >= 0.5

    def test_porosity_modes(self, tmp_path):
        for mode in ("box", "mean", "directional"):
            code, rep = run(["porosity", "--mode", mode, "--synthetic", "segment", "--depth", "10",
                             "--samples", "5", "--out", str(tmp_path / mode)])
            assert code == 0, mode
            assert all(r[1] == 1.0 for r in rep.rows), mode

    def test_dimension_inputs(self, tmp_path):
        occ = DyadicOccupancy.from_unit_points(synthetic_set("cantor_dust", 12, 8), 12)
        write_pbm(str(tmp_path / "dust.pbm"), occ.to_bitmap(), {})
        code, rep = run(["dimension", "--input", str(tmp_path / "dust.pbm"), "--samples", "20",
                         "--out", str(tmp_path)])
        assert code == 0 and abs(rep.summary["slope"] - 1.2619) <= 0.06
        code, rep = run(["dimension", "--synthetic", "square", "--depth", "8", "--out", str(tmp_path)])
        assert code == 0 and abs(rep.summary["slope"] - 2) <= 0.05 and not rep.summary["box_porous"]

    def test_dimension_chebyshev(self, tmp_path):
        code, rep = run(["dimension", "--depth", "11", "--samples", "30", "--out", str(tmp_path)])
        assert code == 0
        assert abs(rep.summary["slope"] - 1) <= 0.05 and rep.summary["md_bound"] < 2

    def test_holder(self, tmp_path):
        code, rep = run(["holder", "--depth", "11", "--holder-samples", "500", "--out", str(tmp_path)])
        assert code == 0 and 0 < rep.summary["xi_hat"] < 1
        assert rep.summary["violation_fraction"] <= 0.01

    def test_verify_and_negative_control(self, tmp_path):
        code, rep = run(["verify", "--trials", "300", "--tree-n", "6", "--out", str(tmp_path / "ok")])
        assert code == 0 and rep.summary["blaschke_violations"] == 0
        code, rep = run(["verify", "--trials", "300", "--tree-n", "6", "--corrupt-bound", "0.5",
                         "--out", str(tmp_path / "bad")])
        assert code == 1 and rep.violations
        side = summary(tmp_path / "bad", "verify")
        assert side["witnesses"] and side["exit_code"] == 1

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "cejulia", "ce", "--nmax", "40", "--count", "5000",
                               "--out", "-"], capture_output=True, text=True)
        assert proc.returncode == 0 and "lambda_hat" in proc.stdout
