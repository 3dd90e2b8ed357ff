"""Config ingestion, presets, CLI exit codes, manifest reproducibility."""

import csv
import os

import numpy as np
import pytest

from lansopt.cli import main
from lansopt.config import build_setup, preset_sections, read_config, sections_to_text
from lansopt.errors import ConfigurationError
from lansopt.fields import taylor_green
from lansopt.snapshots import read_manifest, write_snapshot
from lansopt.spectral import GridSpec, to_physical

MINIMAL = """
[grid]
n = 8
dt = 0.05
n_steps = 6

[physics]
alpha = 0.1
nu = 0.5

[cost]
gamma1 = 1.0
gamma2 = 1.0
gamma3 = 0.5

[fields]
u0 = taylor_green:0.3
"""


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfigParsing:
    def test_minimal_config_builds(self, tmp_path):
        setup = build_setup(read_config(write_config(tmp_path, MINIMAL)))
        assert setup.cfg.grid.n == 8
        assert setup.cfg.alpha == 0.1
        assert setup.cfg.bounds is None

    def test_missing_required_physics(self, tmp_path):
        broken = MINIMAL.replace("alpha = 0.1\n", "")
        with pytest.raises(ConfigurationError, match="alpha"):
            build_setup(read_config(write_config(tmp_path, broken)))

    def test_missing_required_gamma(self, tmp_path):
        broken = MINIMAL.replace("gamma2 = 1.0\n", "")
        with pytest.raises(ConfigurationError, match="gamma2"):
            build_setup(read_config(write_config(tmp_path, broken)))

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="unknown config section"):
            read_config(write_config(tmp_path, MINIMAL + "\n[mystery]\nx = 1\n"))

    def test_malformed_number_rejected(self, tmp_path):
        broken = MINIMAL.replace("nu = 0.5", "nu = half")
        with pytest.raises(ConfigurationError, match="nu"):
            build_setup(read_config(write_config(tmp_path, broken)))

    def test_one_sided_bounds_rejected(self, tmp_path):
        text = MINIMAL + "\n[control]\nlower = -1.0\n"
        with pytest.raises(ConfigurationError, match="bounds"):
            build_setup(read_config(write_config(tmp_path, text)))

    def test_bounds_from_snapshot_file(self, tmp_path):
        cfg_grid = GridSpec(n=8, dt=0.05, n_steps=6)
        envelope = to_physical(taylor_green(cfg_grid, 1.0))
        bound_path = str(tmp_path / "ub.dat")
        write_snapshot(bound_path, envelope)
        text = MINIMAL + f"\n[control]\nlower = -2.0\nupper = file:{bound_path}\n"
        setup = build_setup(read_config(write_config(tmp_path, text)))
        assert setup.cfg.bounds is not None
        assert np.min(setup.cfg.bounds.upper) == pytest.approx(-1.0, abs=1e-12)
        # the envelope dips below a lower bound of 0, which must be rejected
        text = MINIMAL + f"\n[control]\nlower = 0.0\nupper = file:{bound_path}\n"
        with pytest.raises(ConfigurationError):
            build_setup(read_config(write_config(tmp_path, text)))

    def test_field_specifiers(self, tmp_path):
        text = MINIMAL.replace("u0 = taylor_green:0.3",
                               "u0 = random:seed=4,amplitude=0.5,band=2\n"
                               "u_T = single_mode:1,0,0:0,1,0:0.2\n"
                               "u_d = zero")
        setup = build_setup(read_config(write_config(tmp_path, text)))
        from lansopt.spectral import v_norm
        assert v_norm(setup.cfg.u0) == pytest.approx(0.5, rel=1e-12)

    def test_round_trip_through_text(self, tmp_path):
        sections = read_config(write_config(tmp_path, MINIMAL))
        echoed = write_config(tmp_path, sections_to_text(sections), "echo.ini")
        again = read_config(echoed)
        assert again == sections


class TestPresets:
    @pytest.mark.parametrize("name", ["zero", "taylor_green", "manufactured", "constrained_demo"])
    def test_presets_build(self, name):
        setup = build_setup(preset_sections(name, seed=1))
        assert setup.cfg.grid.n == 8

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError):
            preset_sections("warp_drive")

    def test_manufactured_targets_are_reachable(self):
        setup = build_setup(preset_sections("manufactured"))
        assert isinstance(setup.cfg.u_d, list)
        assert len(setup.cfg.u_d) == setup.cfg.grid.n_steps + 1


class TestCLIForward:
    def test_zero_preset_writes_zero_energy(self, tmp_path):
        out = str(tmp_path / "run")
        assert main(["solve-forward", "--preset", "zero", "--out", out]) == 0
        with open(os.path.join(out, "energy.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 17
        assert all(float(r["l2_sq"]) == 0.0 for r in rows)

    def test_taylor_green_energy_monotone(self, tmp_path):
        out = str(tmp_path / "run")
        assert main(["solve-forward", "--preset", "taylor_green", "--out", out]) == 0
        with open(os.path.join(out, "energy.csv")) as fh:
            rows = list(csv.DictReader(fh))
        filtered = [float(r["l2_sq"]) + float(r["alpha_grad_sq"]) for r in rows]
        assert all(b < a for a, b in zip(filtered, filtered[1:]))

    def test_missing_config_file_exits_2(self, tmp_path):
        assert main(["solve-forward", "--config", str(tmp_path / "nope.ini")]) == 2

    def test_config_and_preset_conflict_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        assert main(["solve-forward", "--config", cfg, "--preset", "zero"]) == 2

    def test_manifest_reproduces_run_bit_identically(self, tmp_path):
        out1 = str(tmp_path / "run1")
        assert main(["solve-forward", "--preset", "taylor_green", "--out", out1]) == 0
        echo = os.path.join(out1, "config_echo.ini")
        out2 = str(tmp_path / "run2")
        assert main(["solve-forward", "--config", echo, "--out", out2]) == 0
        bytes1 = open(os.path.join(out1, "energy.csv"), "rb").read()
        bytes2 = open(os.path.join(out2, "energy.csv"), "rb").read()
        assert bytes1 == bytes2
        traj1 = sorted(os.listdir(os.path.join(out1, "trajectory")))
        for name in traj1:
            a = open(os.path.join(out1, "trajectory", name), "rb").read()
            b = open(os.path.join(out2, "trajectory", name), "rb").read()
            assert a == b


class TestCLIOptimize:
    def test_max_iter_zero_exits_4(self, tmp_path):
        text = MINIMAL + "\n[optimizer]\nmax_iter = 0\nresidual_tol = 0.0\n"
        text = text.replace("u0 = taylor_green:0.3", "u0 = taylor_green:0.3\nu_d = single_mode:1,0,0:0,1,0:0.2")
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "run")
        assert main(["optimize", "--config", cfg, "--out", out]) == 4
        manifest = read_manifest(os.path.join(out, "manifest.txt"))
        assert manifest["manifest"]["status"] == "max_iter"

    def test_infeasible_bounds_exit_2(self, tmp_path):
        text = MINIMAL + "\n[control]\nlower = 1.0\nupper = -1.0\n"
        cfg = write_config(tmp_path, text)
        assert main(["optimize", "--config", cfg, "--out", str(tmp_path / "run")]) == 2

    def test_iterations_csv_columns(self, tmp_path):
        text = MINIMAL + "\n[optimizer]\nmax_iter = 3\nresidual_tol = 0.0\n"
        text = text.replace("u0 = taylor_green:0.3", "u0 = taylor_green:0.3\nu_d = single_mode:1,0,0:0,1,0:0.2")
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "run")
        assert main(["optimize", "--config", cfg, "--out", out]) == 4
        with open(os.path.join(out, "iterations.csv")) as fh:
            reader = csv.reader(fh)
            header = next(reader)
        assert header == ["iter", "tracking", "terminal", "control", "total",
                          "residual", "step_size", "wall_ms"]
        assert os.path.isdir(os.path.join(out, "final_control"))


class TestCLIVerify:
    def test_unknown_check_exits_2(self, tmp_path):
        assert main(["verify", "--checks", "bogus", "--out", str(tmp_path / "v")]) == 2

    def test_seeded_battery_is_reproducible(self, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        args = ["verify", "--checks", "skew_symmetry,frechet_remainder", "--seed", "5"]
        assert main(args + ["--out", out1]) == 0
        assert main(args + ["--out", out2]) == 0
        lines1 = open(os.path.join(out1, "checks.jsonl")).read()
        lines2 = open(os.path.join(out2, "checks.jsonl")).read()
        assert lines1 == lines2


class TestCLICheckGradient:
    def test_gamma3_only_config_passes(self, tmp_path):
        text = MINIMAL.replace("gamma1 = 1.0", "gamma1 = 0.0").replace("gamma2 = 1.0", "gamma2 = 0.0")
        cfg = write_config(tmp_path, text)
        out = str(tmp_path / "run")
        assert main(["check-gradient", "--config", cfg, "--out", out]) == 0
        assert os.path.exists(os.path.join(out, "fd_sweep.csv"))

    def test_full_config_passes(self, tmp_path):
        text = MINIMAL.replace("u0 = taylor_green:0.3",
                               "u0 = taylor_green:0.3\nu_d = random:seed=3,amplitude=0.3")
        cfg = write_config(tmp_path, text)
        assert main(["check-gradient", "--config", cfg, "--out", str(tmp_path / "run")]) == 0

    def test_corrupted_adjoint_sign_fails(self, tmp_path):
        cfg = write_config(tmp_path, MINIMAL)
        code = main(["check-gradient", "--config", cfg, "--debug-flip-adjoint",
                     "--out", str(tmp_path / "run")])
        assert code != 0
