"""Tests for run configuration parsing, defaults and validation."""

import argparse

import pytest

from app.core.errors import ValidationError
from app.data.config import (
    MCKEAN_SINGER_TIMES,
    TOLERANCES,
    WEITZENBOCK_GRID_POINTS,
    RunConfig,
    component_seed,
    parse_assignment,
    parse_list,
)
from app.main import build_parser


def config_from(argv):
    return RunConfig.from_args(build_parser().parse_args(argv))


class TestParsers:
    """Tests for the argument type helpers."""

    def test_parse_list(self):
        """Should split comma-separated numbers."""
        assert parse_list("0.4,0.2,0.1") == (0.4, 0.2, 0.1)
        assert parse_list("16,32", int) == (16, 32)

    def test_parse_list_rejects_text(self):
        """Should raise ArgumentTypeError for non-numbers."""
        with pytest.raises(argparse.ArgumentTypeError):
            parse_list("a,b")

    def test_parse_assignment(self):
        """Should split name=value pairs."""
        assert parse_assignment("amplitude=0.3") == ("amplitude", 0.3)

    @pytest.mark.parametrize("text", ["amplitude", "=1", "amplitude=big"])
    def test_parse_assignment_rejects(self, text):
        """Should raise ArgumentTypeError for malformed pairs."""
        with pytest.raises(argparse.ArgumentTypeError):
            parse_assignment(text)


class TestDefaults:
    """Tests for per-command defaults."""

    def test_command_defaults(self):
        """Should fill unset knobs from the command defaults."""
        config = config_from(["heat"])
        assert config.geometry == "conformal-torus"
        assert config.times == (0.4, 0.2, 0.1, 0.05)
        assert config.grid_points == (64,)

    def test_explicit_values_win(self):
        """Should keep values given on the command line."""
        config = config_from(["heat", "--preset", "torsion-torus", "--N", "32", "--t", "0.3,0.2"])
        assert config.geometry == "torsion-torus"
        assert config.grid_points == (32,)
        assert config.times == (0.3, 0.2)

    def test_quick_overrides(self):
        """Should shrink path counts and samples with --quick."""
        config = config_from(["mc", "--quick", "--n", "100000"])
        assert config.paths == 8192

    def test_tolerance_override(self):
        """Should read named tolerance overrides and fall back to the defaults."""
        config = config_from(["verify-algebra", "--tol", "algebra=1e-6"])
        assert config.tolerance("algebra") == 1e-6
        assert config.tolerance("pfaffian") == TOLERANCES["pfaffian"]

    def test_for_command_resets_knobs(self):
        """Should carry shared knobs into acceptance sub-runs and reset the rest."""
        parent = config_from(["all", "--seed", "7", "--N", "16"])
        sub = parent.for_command("heat", geometry="torsion-torus")
        assert sub.seed == 7
        assert sub.grid_points == (64,)
        assert sub.geometry == "torsion-torus"


    def test_weitzenbock_sizes_follow_dimension(self):
        """Should leave Weitzenböck grid sizes to the geometry's dimension unless given."""
        assert config_from(["weitzenbock", "--preset", "conformal-4torus"]).grid_points is None
        assert WEITZENBOCK_GRID_POINTS[4] == (8, 12, 16)
        assert WEITZENBOCK_GRID_POINTS[2] == (16, 32, 64)
        assert config_from(["weitzenbock", "--N", "8,16"]).grid_points == (8, 16)

    def test_mckean_singer_defaults(self):
        """Should default the McKean-Singer command to times spanning a factor 20."""
        config = config_from(["mckean-singer"])
        assert config.times == MCKEAN_SINGER_TIMES
        assert max(config.times) / min(config.times) == pytest.approx(20.0)


class TestSeeds:
    """Tests for component seed derivation."""

    def test_components_differ(self):
        """Should give independent seeds per component."""
        assert component_seed(0, "algebra") != component_seed(0, "ladder")

    def test_stable(self):
        """Should be a pure function of seed and component."""
        assert component_seed(3, "mc") == component_seed(3, "mc")
        assert component_seed(3, "mc") != component_seed(4, "mc")


class TestValidation:
    """Tests for up-front validation."""

    @pytest.mark.parametrize(
        "argv",
        [
            ["verify-algebra", "--d", "3"],
            ["heat", "--N", "4"],
            ["heat", "--N", "32,16"],
            ["heat", "--t", "0.1"],
            ["heat", "--t", "0,0.2"],
            ["orders", "--eps", "0.4,0.2,0.1"],
            ["orders", "--eps", "0.4,0.2,0.3,0.1"],
            ["mc", "--n", "8"],
            ["mc", "--seed", "-1"],
            ["mc", "--bandwidth", "0"],
            ["curvature", "--points", "0"],
            ["mc", "--steps", "0"],
            ["verify-algebra", "--tol", "bogus=1"],
            ["verify-algebra", "--tol", "algebra=0"],
        ],
    )
    def test_rejects(self, argv):
        """Should raise ValidationError for invalid knobs."""
        with pytest.raises(ValidationError):
            config_from(argv).validate()

    def test_accepts_defaults(self):
        """Should accept every command with its defaults."""
        for command in ("verify-algebra", "curvature", "euler", "heat", "mckean-singer",
                        "weitzenbock", "mc", "orders", "ladder", "all"):
            config_from([command]).validate()

    def test_echo(self):
        """Should echo set knobs and the memory caps."""
        echo = config_from(["heat", "--seed", "3"]).echo()
        assert echo["seed"] == 3
        assert echo["times"] == "0.4,0.2,0.1,0.05"
        assert "max_dofs" in echo
        assert "max_section_dofs" in echo

    def test_echo_leaves_out_output_directory(self):
        """Should echo the same header whatever the output directory."""
        first = config_from(["heat", "--out", "run-a"]).echo()
        second = config_from(["heat", "--out", "run-b"]).echo()
        assert "output" not in first
        assert first == second
