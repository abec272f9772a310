import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ccgsim.cli import main, parse_params
from ccgsim.csvio import format_table, read_csv, write_csv
from ccgsim.errors import ConfigError

BASE = """\
params:
  gamma: "4.2e5 1/s"
  sigma0: "5.0e-8 m"
  m0: "1.0e-25 kg"
seed: 42
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "base.yaml"
    path.write_text(BASE)
    return str(path)


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        path = tmp_path / "t.csv"
        rows = np.array([[1.0, math.pi, 3e-300],
                         [-2.5, 1.0 / 3.0, 6.02e23]])
        write_csv(path, {"seed": 42, "note": "x y"}, ["a", "b", "c"],
                  ["1", "sigma0", "gamma"], rows)
        back = read_csv(path)
        assert back.columns == ["a", "b", "c"]
        assert back.units == ["1", "sigma0", "gamma"]
        assert np.array_equal(back.data, rows)
        assert back.meta["seed"] == "42"

    def test_schema_header_agreement_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        text = format_table({"k": 1}, ["a"], ["1"], [[1.0]])
        path.write_text(text.replace("# schema: a[1]", "# schema: z[1]"))
        with pytest.raises(ConfigError):
            read_csv(path)

    def test_missing_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError):
            read_csv(path)

    def test_column_lookup(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, {}, ["a", "b"], ["1", "1"], [[1.0, 2.0]])
        t = read_csv(path)
        assert t.column("b")[0] == 2.0
        with pytest.raises(KeyError):
            t.column("zz")


class TestParamsParsing:
    def test_requires_units(self):
        with pytest.raises(ConfigError):
            parse_params({"gamma": 1e3, "sigma0": "1e-7 m", "m0": "1e-25 kg"})

    def test_wrong_unit_rejected(self):
        with pytest.raises(ConfigError):
            parse_params({"gamma": "1e3 m", "sigma0": "1e-7 m", "m0": "1e-25 kg"})

    def test_missing_required(self):
        with pytest.raises(ConfigError):
            parse_params({"gamma": "1e3 1/s", "sigma0": "1e-7 m"})

    def test_defaults_for_constants(self):
        p = parse_params({"gamma": "1e3 1/s", "sigma0": "1e-7 m",
                          "m0": "1e-25 kg"})
        assert p.G == pytest.approx(6.674e-11)
        assert p.hbar == pytest.approx(1.0546e-34)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_params({"gamma": "1e3 1/s", "sigma0": "1e-7 m",
                          "m0": "1e-25 kg", "mass": "1 kg"})


class TestCli:
    def test_list_text(self, capsys):
        assert main(["--list"]) == 0
        out = capsys.readouterr().out
        for name in ("force-scan", "two-sphere-rate", "verify"):
            assert name in out

    def test_list_json_machine_readable(self, capsys):
        assert main(["--list", "--format", "json"]) == 0
        entries = json.loads(capsys.readouterr().out)
        names = {e["name"] for e in entries}
        assert "sphere-potential" in names
        assert all(e["exercises"] for e in entries)

    def test_unknown_experiment_exit_2(self, cfg, tmp_path):
        assert main(["--config", cfg, "--experiment", "nope",
                     "--out", str(tmp_path)]) == 2

    def test_missing_params_exit_2(self, tmp_path):
        empty = tmp_path / "e.yaml"
        empty.write_text("experiment: force-scan\n")
        assert main(["--config", str(empty), "--out", str(tmp_path)]) == 2

    def test_unknown_top_level_key_exit_2(self, tmp_path):
        bad = tmp_path / "b.yaml"
        bad.write_text(BASE + "bogus_section: {}\n")
        assert main(["--config", str(bad), "--experiment", "force-scan",
                     "--out", str(tmp_path)]) == 2

    def test_force_scan_artifact(self, cfg, tmp_path, capsys):
        out = tmp_path / "art"
        assert main(["--config", cfg, "--experiment", "force-scan",
                     "--out", str(out), "--set", "force-scan.r_points=40"]) == 0
        table = read_csv(out / "force_scan.csv")
        assert table.columns == ["r_over_sigma_nk", "f_reg", "f_newton",
                                 "rel_deviation"]
        # far-field bins recover the bare force at the Gaussian level
        r = table.column("r_over_sigma_nk")
        dev = table.column("rel_deviation")
        assert abs(dev[np.argmin(np.abs(r - 10.0))]) < 1e-9
        assert table.meta["experiment"] == "force-scan"
        assert table.meta["seed"] == "42"

    def test_seeded_rerun_byte_identical(self, cfg, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        args = ["--config", cfg, "--experiment", "two-sphere-rate",
                "--set", "two-sphere-rate.samples=2000",
                "--set", "two-sphere-rate.r_points=2"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b), "--threads", "8"]) == 0
        assert (a / "rate_curve.csv").read_bytes() == (b / "rate_curve.csv").read_bytes()

    def test_override_changes_output(self, cfg, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        main(["--config", cfg, "--experiment", "two-mass-rate", "--out", str(a)])
        main(["--config", cfg, "--experiment", "two-mass-rate", "--out", str(b),
              "--set", "two-mass-rate.branch_offset=2.0"])
        ta = read_csv(a / "rate_curve.csv")
        tb = read_csv(b / "rate_curve.csv")
        assert not np.array_equal(ta.data, tb.data)

    def test_every_emitted_file_roundtrips(self, cfg, tmp_path):
        out = tmp_path / "all"
        quick = [
            ("channel-1p", []),
            ("sphere-potential", ["--set", "sphere-potential.z_points=12"]),
            ("r-surface", ["--set", "r-surface.alpha_points=4",
                           "--set", "r-surface.beta_points=4"]),
            ("two-mass-rate", ["--set", "two-mass-rate.r_points=12"]),
            ("ktm-evolve", ["--set", "ktm-evolve.outputs=5"]),
        ]
        for name, extra in quick:
            sub = out / name
            assert main(["--config", cfg, "--experiment", name,
                         "--out", str(sub)] + extra) == 0
            for f in os.listdir(sub):
                table = read_csv(sub / f)
                assert table.data.shape[0] > 0
                assert len(table.units) == len(table.columns)

    def test_console_entry_point(self, cfg, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "ccgsim.cli", "--config", cfg,
             "--experiment", "force-scan", "--out", str(tmp_path / "cli")],
            capture_output=True, text=True)
        assert result.returncode == 0
        assert "force_scan.csv" in result.stdout
