"""Tests for configuration loading, topology instantiation, the rate sweep,
and the operating-region search."""

import dataclasses
import textwrap

import pytest

from avlinksim import geometry as geo
from avlinksim.mathfun import RngStream
from avlinksim.scenario import (
    CANONICAL_COMBINATIONS,
    ConfigError,
    ScenarioConfig,
    config_hash,
    instantiate,
    load_config,
    run_operating_region,
    run_rate_sweep,
)

# small but fully structured: 5 vehicles, 2 relays, 2 rates, 2 topologies
FAST = dataclasses.replace(
    ScenarioConfig(),
    n_samples=1500,
    mc_batch_size=512,
    sweep_topologies=2,
    sweep_rates_kbps=(50.0, 100.0),
    region_topologies=2,
    region_r_edges_m=(100.0, 200.0),
    region_rates_kbps=(100.0, 400.0),
    av_count=5,
    a2a_relay_count=2,
)

FAST_LABELS = (
    "DA2G", "A2A", "HAP",
    "DA2G + 1-A2A", "DA2G + 2-A2A",
    "DA2G + HAP", "DA2G + 1-A2A + HAP", "DA2G + 2-A2A + HAP",
)


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(textwrap.dedent(text), encoding="utf-8")
    return path


# ============================================================
# Configuration loading
# ============================================================

class TestLoadConfig:
    def test_none_gives_defaults(self):
        assert load_config(None) == ScenarioConfig()

    def test_empty_file_gives_defaults(self, tmp_path):
        assert load_config(_write(tmp_path, "")) == ScenarioConfig()

    def test_comment_only_file_gives_defaults(self, tmp_path):
        assert load_config(_write(tmp_path, "# nothing here\n")) == ScenarioConfig()

    def test_overrides_applied(self, tmp_path):
        cfg = load_config(_write(tmp_path, """\
            eps_th: 1.0e-4
            delay_threshold_ms: 20.0
            sweep_rates_kbps: [10, 20]
            av_count: 4
            service_rate_gbs_pps: null
        """))
        assert cfg.eps_th == 1e-4
        assert cfg.sweep_rates_kbps == (10.0, 20.0)
        assert cfg.av_count == 4
        assert cfg.service_rate_gbs_pps is None
        assert cfg.qos().d_max_s == pytest.approx(0.02)

    def test_unknown_key_named(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config key 'bandwith_ga_hz'"):
            load_config(_write(tmp_path, "bandwith_ga_hz: 1.0\n"))

    def test_bad_probability_named(self, tmp_path):
        with pytest.raises(ConfigError, match="'p_interf'"):
            load_config(_write(tmp_path, "p_interf: 1.5\n"))

    def test_eps_th_must_be_strictly_inside(self, tmp_path):
        with pytest.raises(ConfigError, match="'eps_th'"):
            load_config(_write(tmp_path, "eps_th: 0.0\n"))

    def test_parse_error_carries_line(self, tmp_path):
        path = _write(tmp_path, "eps_th: 1.0e-5\nq1: [unclosed\n")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_root_must_be_mapping(self, tmp_path):
        with pytest.raises(ConfigError, match="mapping"):
            load_config(_write(tmp_path, "- 1\n- 2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")

    def test_rice_table_requires_all_kinds(self, tmp_path):
        with pytest.raises(ConfigError, match="'rice_k_db'"):
            load_config(_write(tmp_path, "rice_k_db: {g2a: [5, 12]}\n"))

    def test_rice_pair_ordering(self, tmp_path):
        with pytest.raises(ConfigError, match="rice_k_db.g2a"):
            load_config(_write(tmp_path, """\
                rice_k_db:
                  g2a: [12, 5]
                  a2a: [12, 12]
                  g2h: [5, 15]
                  h2a: [12, 15]
            """))

    def test_clutter_table_length(self, tmp_path):
        with pytest.raises(ConfigError, match="'clutter_loss_db'"):
            load_config(_write(tmp_path, "clutter_loss_db: [1, 2, 3]\n"))

    def test_vehicle_must_fly_above_sites(self, tmp_path):
        with pytest.raises(ConfigError, match="'av_altitude_m'"):
            load_config(_write(tmp_path, "av_altitude_m: 10.0\n"))

    def test_platform_must_fly_above_vehicles(self, tmp_path):
        with pytest.raises(ConfigError, match="'hap_altitude_m'"):
            load_config(_write(tmp_path, "hap_altitude_m: 200.0\n"))

    def test_relay_count_needs_candidates(self, tmp_path):
        with pytest.raises(ConfigError, match="'a2a_relay_count'"):
            load_config(_write(tmp_path, "av_count: 2\na2a_relay_count: 3\n"))

    def test_region_edges_must_increase(self, tmp_path):
        with pytest.raises(ConfigError, match="'region_r_edges_m'"):
            load_config(_write(tmp_path, "region_r_edges_m: [100, 100]\n"))

    def test_seed_range(self, tmp_path):
        with pytest.raises(ConfigError, match="'master_seed'"):
            load_config(_write(tmp_path, "master_seed: -1\n"))
        with pytest.raises(ConfigError, match="'master_seed'"):
            load_config(_write(tmp_path, f"master_seed: {2 ** 64}\n"))

    def test_interference_mode_choices(self, tmp_path):
        with pytest.raises(ConfigError, match="'interference_mode'"):
            load_config(_write(tmp_path, "interference_mode: sometimes\n"))

    def test_config_is_frozen(self):
        cfg = ScenarioConfig()
        with pytest.raises(dataclasses.FrozenInstanceError):
            cfg.eps_th = 1e-3


class TestConfigHash:
    def test_stable(self):
        a = config_hash(ScenarioConfig())
        b = config_hash(ScenarioConfig())
        assert a == b
        assert len(a) == 64
        assert all(c in "0123456789abcdef" for c in a)

    def test_sensitive_to_any_field(self):
        base = config_hash(ScenarioConfig())
        assert config_hash(dataclasses.replace(ScenarioConfig(), master_seed=2)) != base
        assert config_hash(dataclasses.replace(ScenarioConfig(), eps_th=2e-5)) != base


# ============================================================
# Topology instantiation
# ============================================================

class TestInstantiate:
    def test_reference_layout(self):
        topo = instantiate(ScenarioConfig(), 7)
        assert len(topo.sites) == 37
        assert topo.serving_site.id == 0
        assert (topo.destination.x, topo.destination.y) == (150.0, 0.0)
        assert topo.destination.altitude == 300.0
        assert topo.destination.id == 0
        assert len(topo.background_avs) == 9
        assert [b.id for b in topo.background_avs] == list(range(1, 10))
        assert len(topo.relays) == 3

    def test_link_catalog_order(self):
        topo = instantiate(ScenarioConfig(), 7)
        assert list(topo.links) == [
            "g2a_dest", "g2a_relay_1", "a2a_1", "g2a_relay_2", "a2a_2",
            "g2a_relay_3", "a2a_3", "g2h", "h2a",
        ]

    def test_interferer_counts(self):
        topo = instantiate(ScenarioConfig(), 7)
        assert len(topo.links["g2a_dest"].interferers.members) == 6
        assert len(topo.links["h2a"].interferers.members) == 36
        assert topo.links["h2a"].meta["beam_count"] == 36
        assert topo.links["g2h"].interferers.members == ()

    def test_relays_sorted_by_distance(self):
        topo = instantiate(ScenarioConfig(), 7)
        dists = [geo.distance_3d(r, topo.destination) for r in topo.relays]
        assert dists == sorted(dists)
        assert all(d >= 1.0 for d in dists)

    def test_relay_excluded_from_own_interferers(self):
        cfg = dataclasses.replace(ScenarioConfig(), av_count=3, a2a_relay_count=2)
        topo = instantiate(cfg, 7)
        # two background vehicles, both are relays; each relay's link sees
        # only the other vehicle as a potential interferer
        assert len(topo.links["a2a_1"].interferers.members) == 1
        assert len(topo.links["a2a_2"].interferers.members) == 1

    def test_radio_parameters(self):
        topo = instantiate(ScenarioConfig(), 7)
        assert topo.links["g2a_dest"].radio.bandwidth_hz == 0.4e6
        assert topo.links["g2h"].radio.bandwidth_hz == 0.5e6
        assert topo.links["g2a_dest"].radio.tx_power_w == pytest.approx(
            10.0 ** 1.6, rel=1e-12
        )
        assert topo.links["a2a_1"].radio.tx_power_w == pytest.approx(
            10.0 ** -0.7, rel=1e-12
        )

    def test_feeder_distances(self):
        topo = instantiate(ScenarioConfig(), 7)
        assert topo.d_g2h_m == pytest.approx(20615.528128088302749, rel=1e-14)
        assert topo.d_h2a_m == geo.distance_3d(topo.hap, topo.destination)

    def test_deterministic_per_stream(self):
        a = instantiate(ScenarioConfig(), RngStream(7))
        b = instantiate(ScenarioConfig(), RngStream(7))
        assert a.background_avs == b.background_avs
        assert a.relays == b.relays

    def test_seed_changes_layout(self):
        a = instantiate(ScenarioConfig(), RngStream(7))
        b = instantiate(ScenarioConfig(), RngStream(8))
        assert a.background_avs != b.background_avs

    def test_distance_override(self):
        topo = instantiate(ScenarioConfig(), 7, r_ga_m=60.0)
        assert (topo.destination.x, topo.destination.y) == (60.0, 0.0)


# ============================================================
# Rate sweep
# ============================================================

class TestRateSweep:
    def test_shape_and_labels(self):
        result = run_rate_sweep(FAST)
        assert result.labels == FAST_LABELS
        assert result.rates_bps == (50e3, 100e3)
        assert len(result.rows) == len(FAST_LABELS) * 2
        assert result.seed == FAST.master_seed
        assert result.config_digest == config_hash(FAST)
        # rows grouped by rate in grid order
        assert [r.rate_bps for r in result.rows[:8]] == [50e3] * 8
        assert [r.label for r in result.rows[:8]] == list(FAST_LABELS)

    def test_diagnostics(self):
        result = run_rate_sweep(FAST)
        diag = result.diagnostics
        assert set(diag["effective_bandwidth_pps"]) == {"gbs", "av", "hap", "gs"}
        assert diag["effective_bandwidth_pps"]["gbs"] == pytest.approx(
            13423.836634389200146, rel=1e-12
        )
        assert diag["queue_gates"] == {"gbs": True, "av": True, "hap": True, "gs": True}
        assert diag["topologies"] == 2
        assert diag["n_samples"] == 1500

    def test_deterministic(self):
        a = run_rate_sweep(FAST)
        b = run_rate_sweep(FAST)
        assert a.rows == b.rows

    def test_thread_count_invariant(self):
        a = run_rate_sweep(FAST, threads=1)
        b = run_rate_sweep(FAST, threads=2)
        assert a.rows == b.rows

    def test_seed_sensitivity(self):
        a = run_rate_sweep(FAST)
        b = run_rate_sweep(dataclasses.replace(FAST, master_seed=99))
        assert any(
            ra.eps_e2e != rb.eps_e2e for ra, rb in zip(a.rows, b.rows)
        )

    def test_more_paths_never_hurt_reliability(self):
        result = run_rate_sweep(FAST)
        by = {(r.rate_bps, r.label): r for r in result.rows}
        for rate in result.rates_bps:
            assert by[(rate, "DA2G + 1-A2A")].eps_e2e <= by[(rate, "DA2G")].eps_e2e
            assert (by[(rate, "DA2G + 2-A2A")].eps_e2e
                    <= by[(rate, "DA2G + 1-A2A")].eps_e2e)
            assert (by[(rate, "DA2G + HAP")].eps_e2e
                    <= by[(rate, "DA2G")].eps_e2e)

    def test_interference_activity_degrades_links(self):
        # expected-interference mode shares the fading draws, so raising the
        # activity factor can only raise every averaged loss
        quiet = run_rate_sweep(dataclasses.replace(FAST, p_interf=0.0))
        busy = run_rate_sweep(dataclasses.replace(FAST, p_interf=0.01))
        for rq, rb in zip(quiet.rows, busy.rows):
            assert (rq.rate_bps, rq.label) == (rb.rate_bps, rb.label)
            assert rq.eps_e2e <= rb.eps_e2e


class TestQueueGates:
    def test_underprovisioned_base_station_blocks_everything(self):
        open_run = run_rate_sweep(FAST)
        gated_run = run_rate_sweep(
            dataclasses.replace(FAST, service_rate_gbs_pps=10_000.0)
        )
        # sanity: the gate actually removes rows that were feasible before
        assert any(r.feasible for r in open_run.rows)
        assert all(not r.feasible for r in gated_run.rows)
        gates = gated_run.diagnostics["queue_gates"]
        assert gates["gbs"] is False and gates["gs"] is False
        assert gates["av"] is True and gates["hap"] is True

    def test_underprovisioned_platform_blocks_only_platform_rows(self):
        open_run = run_rate_sweep(FAST)
        gated_run = run_rate_sweep(
            dataclasses.replace(
                FAST, service_rate_gbs_pps=20_000.0, service_rate_hap_pps=20_000.0
            )
        )
        gates = gated_run.diagnostics["queue_gates"]
        assert gates["gbs"] is True and gates["hap"] is False
        open_by = {(r.rate_bps, r.label): r for r in open_run.rows}
        assert any(
            r.feasible and "HAP" in r.label for r in open_run.rows
        )
        for row in gated_run.rows:
            if "HAP" in row.label:
                assert not row.feasible
            else:
                assert row.feasible == open_by[(row.rate_bps, row.label)].feasible


# ============================================================
# Operating region
# ============================================================

class TestOperatingRegion:
    def test_cells_and_lookup(self):
        result = run_operating_region(FAST)
        assert len(result.cells) == 1 * 2
        cell = result.cells[0]
        assert (cell.r_low_m, cell.r_high_m, cell.r_center_m) == (100.0, 200.0, 150.0)
        assert cell.rate_bps == 100e3
        assert result.label_at(0, 0) == cell.label
        assert result.label_at(0, 1) == result.cells[1].label
        assert result.labels == CANONICAL_COMBINATIONS
        assert result.config_digest == config_hash(FAST)

    def test_labels_are_canonical_or_none(self):
        result = run_operating_region(FAST)
        for cell in result.cells:
            assert cell.label == "none" or cell.label in CANONICAL_COMBINATIONS

    def test_direct_path_suffices_at_low_rate(self):
        result = run_operating_region(FAST)
        assert result.label_at(0, 0) == "DA2G"

    def test_canonical_index(self):
        result = run_operating_region(FAST)
        assert result.canonical_index("DA2G") == 0
        assert result.canonical_index("DA2G + 3-A2A + HAP") == 7
        assert result.canonical_index("none") == len(CANONICAL_COMBINATIONS)
        with pytest.raises(ValueError):
            result.canonical_index("never-heard-of-it")

    def test_deterministic_and_thread_invariant(self):
        cfg = dataclasses.replace(FAST, region_r_edges_m=(100.0, 150.0, 200.0))
        a = run_operating_region(cfg, threads=1)
        b = run_operating_region(cfg, threads=2)
        assert a == b

    def test_demand_only_grows_the_requirement(self):
        # at a fixed distance, the chosen combination index never decreases
        # with rate (a harder rate cannot need fewer paths)
        cfg = dataclasses.replace(
            FAST, region_rates_kbps=(50.0, 100.0, 200.0, 400.0)
        )
        result = run_operating_region(cfg)
        indices = [
            result.canonical_index(result.label_at(0, k))
            for k in range(len(cfg.region_rates_kbps))
        ]
        assert indices == sorted(indices)
