"""Command-line interface tests using click's CliRunner."""

import json
import textwrap

import pytest
from click.testing import CliRunner

from avlinksim.cli import main

# tiny but structurally complete run: one rate, one relay, one topology
FAST_YAML = """\
    n_samples: 800
    mc_batch_size: 512
    sweep_topologies: 1
    sweep_rates_kbps: [50]
    region_topologies: 1
    region_r_edges_m: [100, 200]
    region_rates_kbps: [100]
    av_count: 4
    a2a_relay_count: 1
"""

SWEEP_LABELS = 6   # DA2G, A2A, HAP, DA2G+1-A2A, DA2G+HAP, DA2G+1-A2A+HAP


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def fast_config(tmp_path):
    path = tmp_path / "fast.yaml"
    path.write_text(textwrap.dedent(FAST_YAML), encoding="utf-8")
    return path


# ============================================================
# Top level
# ============================================================

class TestTopLevel:
    def test_version(self, runner):
        res = runner.invoke(main, ["--version"])
        assert res.exit_code == 0
        assert "avlinksim" in res.stdout

    def test_help_lists_commands(self, runner):
        res = runner.invoke(main, ["--help"])
        assert res.exit_code == 0
        for name in ("sweep", "region", "link-budget", "validate"):
            assert name in res.stdout


# ============================================================
# validate
# ============================================================

class TestValidate:
    def test_all_invariants_pass(self, runner):
        res = runner.invoke(main, ["validate"])
        assert res.exit_code == 0
        ok_lines = [l for l in res.stdout.splitlines() if l.startswith("ok   - ")]
        assert len(ok_lines) == 9
        assert res.stdout.splitlines()[-1] == "9 passed, 0 failed"

    def test_good_config_counts_as_check(self, runner, fast_config):
        res = runner.invoke(main, ["validate", "--config", str(fast_config)])
        assert res.exit_code == 0
        assert "ok   - config file" in res.stdout
        assert res.stdout.splitlines()[-1] == "10 passed, 0 failed"

    def test_bad_config_is_a_finding(self, runner, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("p_interf: 2.0\n", encoding="utf-8")
        res = runner.invoke(main, ["validate", "--config", str(bad)])
        assert res.exit_code == 1
        assert "FAIL - config file" in res.stdout
        assert res.stdout.splitlines()[-1] == "9 passed, 1 failed"


# ============================================================
# sweep
# ============================================================

class TestSweep:
    def test_stdout_csv(self, runner, fast_config):
        res = runner.invoke(main, ["sweep", "--config", str(fast_config)])
        assert res.exit_code == 0
        lines = res.stdout.splitlines()
        assert lines[0] == "# avlinksim sweep v1"
        assert lines[1].startswith("# config_sha256: ")
        assert lines[2] == "# seed: 1"
        assert lines[3] == "# n_samples: 800"
        assert lines[4] == "# topologies: 1"
        assert lines[5] == (
            "rate_bps,label,eps_e2e,eps_std_error,delay_s,delay_std_error,feasible"
        )
        rows = lines[6:]
        assert len(rows) == SWEEP_LABELS
        assert all(r.split(",")[-1] in ("true", "false") for r in rows)
        assert rows[0].startswith("50000.0,DA2G,")

    def test_file_output_and_rerun_identical(self, runner, fast_config, tmp_path):
        out = tmp_path / "sweep.csv"
        res = runner.invoke(
            main, ["sweep", "--config", str(fast_config), "--out", str(out)]
        )
        assert res.exit_code == 0
        assert "sweep:" in res.stderr and str(out) in res.stderr
        first = out.read_bytes()
        res2 = runner.invoke(
            main, ["sweep", "--config", str(fast_config), "--out", str(out)]
        )
        assert res2.exit_code == 0
        assert out.read_bytes() == first
        assert not list(tmp_path.glob("*.tmp"))

    def test_thread_count_does_not_change_bytes(self, runner, fast_config, tmp_path):
        out1, out2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
        for out, threads in ((out1, "1"), (out2, "4")):
            res = runner.invoke(main, [
                "sweep", "--config", str(fast_config),
                "--out", str(out), "--threads", threads, "--quiet",
            ])
            assert res.exit_code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_quiet_suppresses_progress(self, runner, fast_config, tmp_path):
        out = tmp_path / "sweep.csv"
        res = runner.invoke(main, [
            "sweep", "--config", str(fast_config), "--out", str(out), "--quiet",
        ])
        assert res.exit_code == 0
        assert "sweep:" not in res.stderr

    def test_json_output(self, runner, fast_config):
        res = runner.invoke(
            main, ["sweep", "--config", str(fast_config), "--format", "json"]
        )
        assert res.exit_code == 0
        payload = json.loads(res.stdout)
        assert payload["schema"] == "avlinksim.sweep.v1"
        assert len(payload["rows"]) == SWEEP_LABELS
        assert len(payload["config_sha256"]) == 64
        assert payload["rates_bps"] == [50000.0]
        # serialization is canonical: sorted keys, trailing newline
        assert res.stdout.endswith("\n")
        assert res.stdout == json.dumps(
            payload, sort_keys=True, indent=2, allow_nan=False
        ) + "\n"

    def test_seed_override_changes_numbers(self, runner, fast_config):
        base = runner.invoke(main, ["sweep", "--config", str(fast_config)])
        same = runner.invoke(
            main, ["sweep", "--config", str(fast_config), "--seed", "1"]
        )
        other = runner.invoke(
            main, ["sweep", "--config", str(fast_config), "--seed", "2"]
        )
        assert base.stdout == same.stdout
        assert base.stdout != other.stdout

    def test_unknown_config_key_is_usage_error(self, runner, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("no_such_option: 1\n", encoding="utf-8")
        res = runner.invoke(main, ["sweep", "--config", str(bad)])
        assert res.exit_code == 2
        assert "config error" in res.stderr
        assert "no_such_option" in res.stderr

    def test_missing_output_directory_is_io_error(self, runner, fast_config, tmp_path):
        out = tmp_path / "absent" / "sweep.csv"
        res = runner.invoke(
            main, ["sweep", "--config", str(fast_config), "--out", str(out)]
        )
        assert res.exit_code == 3
        assert "i/o error" in res.stderr

    def test_config_dir_env_resolution(self, runner, fast_config):
        res = runner.invoke(
            main,
            ["sweep", "--config", fast_config.name],
            env={"AVLINKSIM_CONFIG_DIR": str(fast_config.parent)},
        )
        assert res.exit_code == 0
        assert res.stdout.startswith("# avlinksim sweep v1")


# ============================================================
# region
# ============================================================

class TestRegion:
    def test_stdout_csv(self, runner, fast_config):
        res = runner.invoke(main, ["region", "--config", str(fast_config)])
        assert res.exit_code == 0
        lines = res.stdout.splitlines()
        assert lines[0] == "# avlinksim region v1"
        assert lines[3].startswith("# labels: DA2G; ")
        assert lines[4] == "r_low_m,r_high_m,r_center_m,rate_bps,label"
        cells = lines[5:]
        assert len(cells) == 1
        assert cells[0].startswith("100.0,200.0,150.0,100000.0,")

    def test_json_output(self, runner, fast_config):
        res = runner.invoke(
            main, ["region", "--config", str(fast_config), "--format", "json"]
        )
        assert res.exit_code == 0
        payload = json.loads(res.stdout)
        assert payload["schema"] == "avlinksim.region.v1"
        assert payload["r_edges_m"] == [100.0, 200.0]
        assert len(payload["cells"]) == 1
        assert payload["cells"][0]["label"]

    def test_file_output_identical_across_reruns(self, runner, fast_config, tmp_path):
        out = tmp_path / "region.csv"
        for _ in range(2):
            res = runner.invoke(main, [
                "region", "--config", str(fast_config),
                "--out", str(out), "--quiet",
            ])
            assert res.exit_code == 0
        first = out.read_bytes()
        res = runner.invoke(main, [
            "region", "--config", str(fast_config),
            "--out", str(out), "--threads", "4", "--quiet",
        ])
        assert res.exit_code == 0
        assert out.read_bytes() == first


# ============================================================
# link-budget
# ============================================================

class TestLinkBudget:
    def test_g2a_defaults(self, runner):
        res = runner.invoke(main, ["link-budget", "g2a"])
        assert res.exit_code == 0
        assert res.stdout.startswith("g2a link budget")
        for key in ("d_2d_m: 150.0", "p_los:", "pl_los_db:", "pl_nlos_db:",
                    "pl_avg_db:", "tx_array_gain_db:", "rice_k_db:",
                    "mean_snr_db:"):
            assert key in res.stdout

    def test_g2a_negative_distance_rejected(self, runner):
        res = runner.invoke(main, ["link-budget", "g2a", "--distance-m", "-5"])
        assert res.exit_code == 2

    def test_a2a_requires_distance(self, runner):
        res = runner.invoke(main, ["link-budget", "a2a"])
        assert res.exit_code == 2
        res = runner.invoke(main, ["link-budget", "a2a", "--distance-m", "0"])
        assert res.exit_code == 2

    def test_a2a_budget(self, runner):
        res = runner.invoke(main, ["link-budget", "a2a", "--distance-m", "400"])
        assert res.exit_code == 0
        assert "fspl_db:" in res.stdout
        assert "rice_k_db: 12.0" in res.stdout

    def test_hap_nadir_delay(self, runner):
        res = runner.invoke(main, ["link-budget", "hap"])
        assert res.exit_code == 0
        assert "nadir_offset_m: 0.0" in res.stdout
        assert "elevation_deg: 90.0" in res.stdout
        # 19.7 km of slant range at the speed of light
        assert "prop_delay_us: 65.7104736" in res.stdout

    def test_unknown_kind_rejected(self, runner):
        res = runner.invoke(main, ["link-budget", "satellite"])
        assert res.exit_code == 2
