import json
from pathlib import Path

import pytest

from cusplab.cli import main


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.ini"
    path.write_text(text)
    return path


def read_report(out: Path) -> dict:
    return json.loads((out / "report.json").read_text())


class TestExponentsCommand:
    def test_threshold_report(self, tmp_path):
        cfg = write_config(
            tmp_path, "[exponents]\nn = 2\np = 2\nalpha = 0\ngamma = 3\ns = 5\n"
        )
        out = tmp_path / "out"
        assert main(["exponents", "--config", str(cfg), "--out", str(out)]) == 0
        rep = read_report(out)
        assert rep["schema"] == 1
        assert rep["results"]["thm6"]["s_max"] == 6.0
        assert rep["results"]["witness"] is not None
        assert rep["config"]["parameters"]["gamma"] == 3

    def test_batch_csv(self, tmp_path):
        queries = tmp_path / "queries.csv"
        queries.write_text("n,p,alpha,gamma,m,s\n2,2,0,3,1,5\n2,2,1,3,1,\n")
        cfg = write_config(
            tmp_path,
            f"[exponents]\nn = 2\np = 2\nalpha = 0\nqueries_csv = {queries}\n",
        )
        out = tmp_path / "out"
        assert main(["exponents", "--config", str(cfg), "--out", str(out)]) == 0
        rows = (out / "thresholds.csv").read_text().strip().splitlines()
        assert rows[0].startswith("n,p,alpha,gamma")
        assert len(rows) == 3
        assert "6.0" in rows[1]

    def test_malformed_config_exits_2_without_files(self, tmp_path):
        cfg = write_config(tmp_path, "garbage [[[\n")
        out = tmp_path / "out"
        assert main(["exponents", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()

    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(
            tmp_path, "[exponents]\nn = 2\np = 2\nalpha = 0\ngamma = 3\nbogus = 1\n"
        )
        assert main(["exponents", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_missing_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, "[exponents]\nn = 2\np = 2\n")
        assert main(["exponents", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


class TestVerdictCommands:
    def test_ap_check_violated_is_success(self, tmp_path):
        cfg = write_config(tmp_path, "[ap-check]\nn = 2\np = 2\nalpha = 3\n")
        out = tmp_path / "out"
        assert main(["ap-check", "--config", str(cfg), "--out", str(out)]) == 0
        rep = read_report(out)
        assert rep["results"]["ap"]["verdict"] == "violated"

    def test_distortion_report_and_sweeps(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[distortion]\nn = 2\np = 2\nalpha = 0\ngamma = 3\na = 0.5\nr = 3\n"
            "q = 1.2\ns = 2.0\nq_steps = 4\ns_steps = 4\n",
        )
        out = tmp_path / "out"
        assert main(["distortion", "--config", str(cfg), "--out", str(out)]) == 0
        rep = read_report(out)
        assert rep["results"]["q_threshold"] == pytest.approx(1.6)
        assert rep["results"]["report"]["Ia"]["verdict"] == "finite"
        ia = (out / "ia_sweep.csv").read_text().splitlines()
        assert ia[0] == "q,verdict,value"
        assert len(ia) == 5
        assert (out / "ja_sweep.csv").exists()

    def test_distortion_validity_violation_exit_3(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[distortion]\nn = 2\np = 2\nalpha = 0\ngamma = 3\na = 0.5\nr = 3\n"
            "q = 2.5\ns = 2.0\n",
        )
        out = tmp_path / "out"
        assert main(["distortion", "--config", str(cfg), "--out", str(out)]) == 3
        assert not (out / "report.json").exists()


class TestNumericalCommands:
    def test_mollify_writes_convergence_csv(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[mollify]\nfunction = x0*(1-x0)*x1\np = 2\ndelta = 0.15\n"
            "r_max = 0.1\nn_radii = 3\ncells = 32\n",
        )
        out = tmp_path / "out"
        assert main(["mollify", "--config", str(cfg), "--out", str(out)]) == 0
        lines = (out / "convergence.csv").read_text().splitlines()
        assert lines[0] == "r,norm"
        assert len(lines) == 4

    def test_solve_square(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[solve]\ndomain = square\nh = 0.125\nalpha = 1\n"
            "u_exact = sin(pi*x)*sin(pi*y)\n",
        )
        out = tmp_path / "out"
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        rep = read_report(out)
        assert rep["results"]["residual"] <= 1e-9
        assert rep["results"]["l2_error"] < 0.05
        assert (out / "solution.csv").exists()
        assert (out / "mesh.txt").exists()

    def test_probe_command(self, tmp_path):
        cfg = write_config(
            tmp_path, "[probe]\nn = 2\np = 2\nalpha = 0\ngamma = 3\ns = 7\n"
        )
        out = tmp_path / "out"
        assert main(["probe", "--config", str(cfg), "--out", str(out)]) == 0
        rep = read_report(out)
        assert rep["results"]["probe"]["verdict"] == "blow_up"
        assert (out / "probe.csv").exists()


class TestDeterminism:
    @pytest.mark.parametrize(
        "command,section",
        [
            ("exponents", "[exponents]\nn = 2\np = 2\nalpha = 0\ngamma = 3\ns = 5\n"),
            ("ap-check", "[ap-check]\nn = 2\np = 2\nalpha = 1\n"),
            (
                "distortion",
                "[distortion]\nn = 2\np = 2\nalpha = 0\ngamma = 3\na = 0.5\nr = 3\n"
                "q = 1.2\ns = 2.0\n",
            ),
        ],
    )
    def test_reports_byte_identical(self, tmp_path, command, section):
        cfg = write_config(tmp_path, section)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main([command, "--config", str(cfg), "--out", str(out1), "--seed", "5"]) == 0
        assert main([command, "--config", str(cfg), "--out", str(out2), "--seed", "5"]) == 0
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()

    def test_report_embeds_config(self, tmp_path):
        cfg = write_config(tmp_path, "[ap-check]\nn = 2\np = 2\nalpha = 1\n")
        out = tmp_path / "out"
        main(["ap-check", "--config", str(cfg), "--out", str(out), "--seed", "9"])
        rep = read_report(out)
        assert rep["config"]["seed"] == 9
        assert rep["config"]["parameters"] == {"alpha": 1, "n": 2, "p": 2}


class TestSolveValidation:
    def test_unknown_domain_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, "[solve]\ndomain = sphere\nh = 0.2\nf = 1 + 0*x0\n")
        out = tmp_path / "out"
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()

    def test_missing_rhs_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, "[solve]\ndomain = square\nh = 0.2\n")
        out = tmp_path / "out"
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 2
        assert not out.exists()

    def test_cusp_domain_solve(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[solve]\ndomain = cusp\ngamma = 3\nh = 0.1\nalpha = 1\ngrade = 2\n"
            "f = -1 + 0*x0\n",
        )
        out = tmp_path / "out"
        assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
        rep = read_report(out)
        assert rep["results"]["solvability_condition"]["verdict"] == "finite"
