"""Tests for the command-line entry point and exit codes."""

import pytest

from app.main import build_parser, main


class TestParser:
    """Tests for argument parsing."""

    def test_unknown_command(self):
        """Should exit with status 2 for an unknown subcommand."""
        with pytest.raises(SystemExit) as info:
            main(["integrate"])
        assert info.value.code == 2

    def test_bad_list(self):
        """Should exit with status 2 when a list option is not numeric."""
        with pytest.raises(SystemExit) as info:
            main(["heat", "--t", "soon"])
        assert info.value.code == 2

    def test_every_command_registered(self):
        """Should offer every subcommand."""
        parser = build_parser()
        for command in ("verify-algebra", "curvature", "euler", "heat", "mckean-singer",
                        "weitzenbock", "mc", "orders", "ladder", "all"):
            assert parser.parse_args([command]).command == command


class TestExitCodes:
    """Tests for the outcome-to-exit-code mapping."""

    def test_verify_algebra_passes(self, tmp_path, capsys):
        """Should return 0 and write the check table for a small algebra run."""
        code = main(["verify-algebra", "--d", "2", "--samples", "5", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "gbcheck_verify-algebra_algebra_checks.csv").exists()
        assert "checks passed" in capsys.readouterr().out

    def test_euler_on_flat_torus(self, tmp_path):
        """Should return 0 and write the Euler form map."""
        code = main(["euler", "--preset", "flat-torus", "--points", "4", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "gbcheck_euler_flat-torus_density.csv").exists()

    def test_unknown_tolerance(self, tmp_path):
        """Should return 3 for an unknown tolerance name."""
        assert main(["verify-algebra", "--tol", "bogus=1", "--out", str(tmp_path)]) == 3

    def test_missing_spec_file(self, tmp_path):
        """Should return 3 when the spec file does not exist."""
        missing = str(tmp_path / "missing.gbc")
        assert main(["curvature", "--spec", missing, "--out", str(tmp_path)]) == 3

    def test_unknown_preset_parameter(self, tmp_path):
        """Should return 3 for a parameter the preset does not take."""
        code = main(["euler", "--preset", "flat-torus", "--param", "radius=2", "--out",
                     str(tmp_path)])
        assert code == 3

    def test_failed_tolerance(self, tmp_path):
        """Should return 4 when a convergence order misses its bound."""
        code = main(["weitzenbock", "--preset", "conformal-torus", "--N", "16,32",
                     "--tol", "weitzenbock_order=10", "--out", str(tmp_path)])
        assert code == 4


class TestReproducibility:
    """Tests for bit-identical reruns with the same seed."""

    @staticmethod
    def _run_twice(tmp_path, argv):
        outputs = []
        for name in ("first", "second"):
            out = tmp_path / name
            main([*argv, "--out", str(out)])
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        return outputs

    def test_monte_carlo_csv_identical(self, tmp_path):
        """Should write byte-identical Monte Carlo tables for two runs with one seed."""
        first, second = self._run_twice(
            tmp_path,
            ["mc", "--preset", "flat-torus", "--n", "4096", "--steps", "8", "--t", "0.1",
             "--bandwidth", "0.05", "--seed", "11"],
        )
        assert first
        assert first == second

    def test_seed_changes_monte_carlo_output(self, tmp_path):
        """Should write different estimates for a different seed."""
        argv = ["mc", "--preset", "flat-torus", "--n", "4096", "--steps", "8", "--t", "0.1",
                "--bandwidth", "0.05"]
        main([*argv, "--seed", "1", "--out", str(tmp_path / "a")])
        main([*argv, "--seed", "2", "--out", str(tmp_path / "b")])
        name = "gbcheck_mc_flat-torus_estimates.csv"

        def rows(directory):
            lines = (tmp_path / directory / name).read_text().splitlines()
            return [line for line in lines if not line.startswith("#")]

        assert rows("a") != rows("b")

    def test_algebra_csv_identical(self, tmp_path):
        """Should write byte-identical algebra check tables for two runs with one seed."""
        first, second = self._run_twice(
            tmp_path, ["verify-algebra", "--d", "2", "--samples", "5", "--seed", "4"]
        )
        assert first == second
