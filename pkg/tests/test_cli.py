import json

import numpy as np
import pytest

from permlaw import MonotoneFunction, write_grid_csv
from permlaw.cli import main

from conftest import law


def run(*argv):
    return main(list(argv))


def read_report(out_dir):
    with open(out_dir / "report.json") as fh:
        return json.load(fh)


class TestCheck:
    def test_pythagoras_passes(self, tmp_path, capsys):
        code = run("check", "--law", "pythagoras", "--out", str(tmp_path))
        assert code == 0
        report = read_report(tmp_path)
        assert report["pass"] is True
        assert report["permutability"]["pass"] is True
        assert report["axioms"]["pass"] is True
        out = capsys.readouterr().out
        assert "permutability: PASS" in out

    def test_vanderwaals_fails_with_worst_triple(self, tmp_path):
        code = run("check", "--law", "vanderwaals", "--out", str(tmp_path))
        assert code == 1
        report = read_report(tmp_path)
        assert report["pass"] is False
        assert report["permutability"]["worst_point"] == [0.5, 1.0, 3.0]
        assert report["permutability"]["max_residual"] >= 0.1

    def test_byte_identical_reports(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert run("check", "--law", "pythagoras", "--seed", "7", "--out", str(a)) == 0
        assert run("check", "--law", "pythagoras", "--seed", "7", "--out", str(b)) == 0
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_grid_file_input(self, tmp_path):
        base = law("cylinder")
        ys = np.linspace(0.1, 10.0, 41)
        rs = np.linspace(0.1, 3.0, 41)
        V = np.asarray(base(ys[:, None], rs[None, :]), dtype=float)
        grid_path = tmp_path / "grid.csv"
        write_grid_csv(grid_path, ys, rs, V)
        code = run(
            "check", "--grid-file", str(grid_path), "--tol", "1e-4",
            "--out", str(tmp_path),
        )
        assert code == 0


class TestConstruct:
    def test_beer_artifacts(self, tmp_path):
        code = run("construct", "--law", "beer", "--out", str(tmp_path))
        assert code == 0
        report = read_report(tmp_path)
        assert report["pass"] is True
        assert report["reconstruction"]["pass"] is True
        assert report["alignment"]["xi"] > 0
        assert report["alignment"]["max_abs_err"] <= 1e-3
        f = MonotoneFunction.from_csv(tmp_path / "f.csv")
        g = MonotoneFunction.from_csv(tmp_path / "g.csv")
        assert f.domain.lo < f.domain.hi
        assert g.domain.lo < g.domain.hi
        meta = report["construction"]
        assert meta["depth"] == 20
        assert meta["f_knots"] == len(f.xs)

    def test_vanderwaals_fails_cleanly(self, tmp_path):
        code = run("construct", "--law", "vanderwaals", "--out", str(tmp_path))
        assert code == 1
        report = read_report(tmp_path)
        assert report["pass"] is False


class TestFit:
    def test_artifacts_and_loss_curve(self, tmp_path):
        code = run(
            "fit", "--law", "pythagoras", "--grid", "15x15", "--knots", "12",
            "--max-iters", "120", "--out", str(tmp_path),
        )
        assert code == 0
        report = read_report(tmp_path)
        assert report["fit"]["loss"] < 1e-2
        lines = (tmp_path / "loss.csv").read_text().strip().splitlines()
        assert lines[0] == "iter,loss"
        losses = [float(row.split(",")[1]) for row in lines[1:]]
        assert losses == sorted(losses, reverse=True)
        assert (tmp_path / "f.csv").exists()
        assert (tmp_path / "g.csv").exists()

    def test_quasi_writes_m(self, tmp_path):
        code = run(
            "fit", "--law", "cylinder", "--grid", "12x12", "--knots", "10",
            "--quasi", "--max-iters", "40", "--out", str(tmp_path),
        )
        assert code == 0
        assert (tmp_path / "m.csv").exists()

    def test_unmet_target_exits_one(self, tmp_path):
        code = run(
            "fit", "--law", "vanderwaals", "--grid", "12x12", "--tol", "1e-12",
            "--max-iters", "5", "--out", str(tmp_path),
        )
        assert code == 1
        report = read_report(tmp_path)
        assert report["pass"] is False
        assert report["fit"]["converged"] is False


class TestAlign:
    def test_beer_anchor_sweep(self, tmp_path):
        code = run(
            "align", "--law", "beer", "--x0", "0.5,1.0,2.0", "--out", str(tmp_path)
        )
        assert code == 0
        report = read_report(tmp_path)
        assert report["pass"] is True
        assert len(report["gauge_uniqueness"]["pairs"]) == 3
        for pair in report["gauge_uniqueness"]["pairs"]:
            assert pair["xi"] > 0

    def test_single_anchor_is_usage_error(self, tmp_path):
        assert run("align", "--law", "beer", "--x0", "1.0", "--out", str(tmp_path)) == 2


class TestUsageErrors:
    def test_no_input_source(self, tmp_path):
        assert run("check", "--out", str(tmp_path)) == 2

    def test_two_input_sources(self, tmp_path):
        assert (
            run(
                "check", "--law", "beer", "--grid-file", "x.csv",
                "--out", str(tmp_path),
            )
            == 2
        )

    def test_unknown_law(self, tmp_path):
        assert run("check", "--law", "gravity", "--out", str(tmp_path)) == 2

    def test_bad_grid_spec(self, tmp_path):
        assert run("check", "--law", "beer", "--grid", "20xx", "--out", str(tmp_path)) == 2

    def test_missing_grid_file(self, tmp_path):
        assert run("check", "--grid-file", str(tmp_path / "none.csv")) == 2

    def test_bad_params_json(self, tmp_path):
        assert (
            run("check", "--law", "beer", "--params", "{oops", "--out", str(tmp_path))
            == 2
        )


class TestCorpusList:
    def test_lists_all_laws(self, capsys):
        assert run("corpus-list") == 0
        out = capsys.readouterr().out.split()
        assert out == [
            "lorentz", "beer", "cylinder", "pythagoras", "vanderwaals", "synthetic",
        ]
