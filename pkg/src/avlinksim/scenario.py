"""Scenario assembly and Monte Carlo drivers.

Provides:
 - ScenarioConfig / load_config / config_hash : validated configuration
 - instantiate                : one seeded topology with all link setups
 - run_rate_sweep             : error/delay vs. data rate for every path
                                combination at a fixed destination distance
 - run_operating_region       : minimum feasible combination over a
                                (distance bin x rate bin) grid

Random streams are assigned by a fixed map (namespace, cell, realization,
link, batch) -> stream, so results are identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import channel as ch
from . import e2e
from . import geometry as geo
from .link import (
    ChannelSpec,
    Interferer,
    InterfererSet,
    LinkStats,
    RadioParams,
    arq_delay,
    decoding_error_stats,
    sinr_sample,
)
from .mathfun import RngStream
from .queueing import QueueSpec, effective_bandwidth, queue_feasible

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "load_config",
    "config_hash",
    "LinkSetup",
    "Topology",
    "instantiate",
    "SweepRow",
    "SweepResult",
    "run_rate_sweep",
    "RegionCell",
    "RegionResult",
    "run_operating_region",
    "CANONICAL_COMBINATIONS",
]


class ConfigError(ValueError):
    """Invalid configuration file or value."""


# ============================================================
# Configuration
# ============================================================

@dataclass(frozen=True)
class ScenarioConfig:
    # QoS targets
    eps_th: float = 1e-5
    delay_threshold_ms: float = 10.0
    # traffic
    packet_bits: int = 256
    # backhaul
    eps_b: float = 1e-6
    backhaul_delay_ms: float = 1.0
    # interference model
    p_interf: float = 0.01
    interference_mode: str = "expected"
    interferer_count: int = 6
    # radio
    fc_ghz: float = 2.0
    noise_density_dbm_hz: float = -174.0
    bandwidth_ga_hz: float = 0.4e6
    bandwidth_aa_hz: float = 0.4e6
    bandwidth_ha_hz: float = 0.4e6
    bandwidth_gh_hz: float = 0.5e6
    tx_power_av_dbm: float = 23.0
    tx_power_gbs_dbm: float = 46.0
    tx_power_hap_dbm: float = 46.0
    tx_power_gs_dbm: float = 46.0
    noise_figure_av_db: float = 9.0
    noise_figure_hap_db: float = 5.0
    av_antenna_gain_dbi: float = 0.0
    gs_antenna_gain_dbi: float = 0.0
    ula_elements: int = 8
    ula_downtilt_deg: float = 102.0
    ula_element_gain_dbi: float = 8.0
    hap_max_gain_dbi: float = 32.0
    hap_aperture_radius_wavelengths: float = 10.0
    # geometry
    isd_m: float = 500.0
    grid_tiers: int = 3
    gbs_height_m: float = 25.0
    av_altitude_m: float = 300.0
    hap_altitude_m: float = 20000.0
    hap_gs_offset_m: float = 5000.0
    av_count: int = 10
    r_ga_m: float = 150.0
    # propagation environment
    q1: float = 0.3
    q2_per_km2: float = 500.0
    q3_m: float = 20.0
    sf_sigma_los_db: float = 4.0
    sf_sigma_nlos_db: float = 6.0
    g2a_shadow_fading: bool = False
    pl_mixture: str = "db"
    clutter_loss_db: tuple = (0.0,) * 9
    rice_k_db: dict = field(
        default_factory=lambda: {
            "g2a": (5.0, 12.0),
            "a2a": (12.0, 12.0),
            "g2h": (5.0, 15.0),
            "h2a": (12.0, 15.0),
        }
    )
    # queueing
    arrival_rate_gbs_pps: float = 1000.0
    arrival_rate_av_pps: float = 100.0
    arrival_rate_hap_pps: float = 10000.0
    queue_delay_bound_ms: float = 0.3
    eps_q: float = 1e-7
    service_rate_gbs_pps: float | None = None
    service_rate_av_pps: float | None = None
    service_rate_hap_pps: float | None = None
    # Monte Carlo and grids
    master_seed: int = 1
    n_samples: int = 100_000
    mc_batch_size: int = 1 << 15
    diversity_branches: int = 1
    a2a_relay_count: int = 3
    sweep_topologies: int = 1
    sweep_rates_kbps: tuple = (
        10.0, 20.0, 30.0, 50.0, 70.0, 100.0, 140.0, 200.0,
        280.0, 400.0, 560.0, 800.0, 1000.0,
    )
    region_topologies: int = 20
    region_r_edges_m: tuple = tuple(float(v) for v in range(0, 261, 20))
    region_rates_kbps: tuple = tuple(float(v) for v in range(100, 1001, 100))

    # -------- derived views --------

    def environment(self) -> ch.Environment:
        return ch.Environment(
            q1=self.q1,
            q2=self.q2_per_km2,
            q3_m=self.q3_m,
            sf_sigma_los_db=self.sf_sigma_los_db,
            sf_sigma_nlos_db=self.sf_sigma_nlos_db,
            clutter_loss_table_db=tuple(self.clutter_loss_db),
        )

    def rice_table(self) -> ch.RiceTable:
        return ch.RiceTable(**{k: tuple(v) for k, v in self.rice_k_db.items()})

    def ula(self) -> ch.UlaSpec:
        return ch.UlaSpec(self.ula_elements, self.ula_downtilt_deg, self.ula_element_gain_dbi)

    def reflector(self) -> ch.ReflectorSpec:
        return ch.ReflectorSpec(self.hap_max_gain_dbi, self.hap_aperture_radius_wavelengths)

    def grid(self) -> geo.GridSpec:
        return geo.GridSpec(self.isd_m, self.grid_tiers, self.gbs_height_m)

    def qos(self) -> e2e.QosTarget:
        return e2e.QosTarget(self.eps_th, self.delay_threshold_ms * 1e-3)

    def backhaul(self) -> e2e.BackhaulSpec:
        return e2e.BackhaulSpec(self.backhaul_delay_ms * 1e-3, self.eps_b)

    def queue(self, node: str) -> QueueSpec:
        rate = {
            "gbs": self.arrival_rate_gbs_pps,
            "gs": self.arrival_rate_gbs_pps,
            "av": self.arrival_rate_av_pps,
            "hap": self.arrival_rate_hap_pps,
        }[node]
        return QueueSpec(rate, self.queue_delay_bound_ms * 1e-3, self.eps_q)

    def noise_density_w_hz(self) -> float:
        return 10.0 ** ((self.noise_density_dbm_hz - 30.0) / 10.0)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check(cond: bool, key: str, want: str, value) -> None:
    if not cond:
        raise ConfigError(f"config key '{key}': expected {want}, got {value!r}")


_POSITIVE = {
    "delay_threshold_ms", "backhaul_delay_ms", "fc_ghz",
    "bandwidth_ga_hz", "bandwidth_aa_hz", "bandwidth_ha_hz", "bandwidth_gh_hz",
    "isd_m", "gbs_height_m", "hap_gs_offset_m", "q1", "q2_per_km2", "q3_m",
    "arrival_rate_gbs_pps", "arrival_rate_av_pps", "arrival_rate_hap_pps",
    "queue_delay_bound_ms", "ula_downtilt_deg",
    "hap_aperture_radius_wavelengths", "r_ga_m",
}
_ANY_FLOAT = {
    "noise_density_dbm_hz", "tx_power_av_dbm", "tx_power_gbs_dbm",
    "tx_power_hap_dbm", "tx_power_gs_dbm", "noise_figure_av_db",
    "noise_figure_hap_db", "av_antenna_gain_dbi", "gs_antenna_gain_dbi",
    "ula_element_gain_dbi", "hap_max_gain_dbi",
}
_NON_NEGATIVE = {"sf_sigma_los_db", "sf_sigma_nlos_db"}
_PROBABILITIES = {"eps_th", "eps_b", "p_interf", "eps_q"}
_POSITIVE_INTS = {
    "packet_bits", "interferer_count", "ula_elements", "av_count",
    "n_samples", "mc_batch_size", "diversity_branches", "a2a_relay_count",
    "sweep_topologies", "region_topologies",
}


def _validate_field(key: str, value):
    """Return the coerced value for one config field; raise ConfigError."""
    if key in _PROBABILITIES:
        _check(_is_num(value), key, "a number", value)
        limit = "(0, 1)" if key == "eps_th" else "[0, 1]"
        lo_ok = value > 0.0 if key == "eps_th" else value >= 0.0
        hi_ok = value < 1.0 if key == "eps_th" else value <= 1.0
        _check(lo_ok and hi_ok, key, f"a probability in {limit}", value)
        return float(value)
    if key in _POSITIVE:
        _check(_is_num(value) and value > 0, key, "a positive number", value)
        return float(value)
    if key in _NON_NEGATIVE:
        _check(_is_num(value) and value >= 0, key, "a non-negative number", value)
        return float(value)
    if key in _ANY_FLOAT:
        _check(_is_num(value), key, "a number", value)
        return float(value)
    if key in _POSITIVE_INTS:
        _check(isinstance(value, int) and not isinstance(value, bool) and value > 0,
               key, "a positive integer", value)
        return int(value)
    if key in ("grid_tiers",):
        _check(isinstance(value, int) and not isinstance(value, bool) and value >= 0,
               key, "a non-negative integer", value)
        return int(value)
    if key == "master_seed":
        _check(isinstance(value, int) and not isinstance(value, bool)
               and 0 <= value < 2 ** 64, key, "a 64-bit unsigned integer", value)
        return int(value)
    if key == "g2a_shadow_fading":
        _check(isinstance(value, bool), key, "a boolean", value)
        return value
    if key == "interference_mode":
        _check(value in ("expected", "bernoulli"), key, "'expected' or 'bernoulli'", value)
        return value
    if key == "pl_mixture":
        _check(value in ("db", "linear"), key, "'db' or 'linear'", value)
        return value
    if key in ("av_altitude_m", "hap_altitude_m"):
        _check(_is_num(value) and value > 0, key, "a positive number", value)
        return float(value)
    if key == "clutter_loss_db":
        _check(isinstance(value, (list, tuple)) and len(value) == 9
               and all(_is_num(v) and v >= 0 for v in value),
               key, "a list of 9 non-negative numbers", value)
        return tuple(float(v) for v in value)
    if key == "rice_k_db":
        _check(isinstance(value, dict) and set(value) == {"g2a", "a2a", "g2h", "h2a"},
               key, "a mapping with keys g2a, a2a, g2h, h2a", value)
        out = {}
        for kind, pair in value.items():
            _check(isinstance(pair, (list, tuple)) and len(pair) == 2
                   and all(_is_num(v) for v in pair) and pair[0] <= pair[1],
                   f"rice_k_db.{kind}", "a [k_min, k_max] pair with k_min <= k_max", pair)
            out[kind] = (float(pair[0]), float(pair[1]))
        return out
    if key in ("service_rate_gbs_pps", "service_rate_av_pps", "service_rate_hap_pps"):
        if value is None:
            return None
        _check(_is_num(value) and value > 0, key, "a positive number or null", value)
        return float(value)
    if key in ("sweep_rates_kbps", "region_rates_kbps"):
        _check(isinstance(value, (list, tuple)) and len(value) >= 1
               and all(_is_num(v) and v > 0 for v in value),
               key, "a non-empty list of positive rates [kbps]", value)
        return tuple(float(v) for v in value)
    if key == "region_r_edges_m":
        ok = (isinstance(value, (list, tuple)) and len(value) >= 2
              and all(_is_num(v) and v >= 0 for v in value)
              and all(value[i] < value[i + 1] for i in range(len(value) - 1)))
        _check(ok, key, "a strictly increasing list of at least 2 bin edges [m]", value)
        return tuple(float(v) for v in value)
    raise ConfigError(f"unknown config key '{key}'")


def _build_config(overrides: dict) -> ScenarioConfig:
    values = {}
    for key, value in overrides.items():
        if not isinstance(key, str) or key not in ScenarioConfig.__dataclass_fields__:
            raise ConfigError(f"unknown config key '{key}'")
        values[key] = _validate_field(key, value)
    cfg = ScenarioConfig(**values)
    if cfg.av_altitude_m <= cfg.gbs_height_m:
        raise ConfigError("config key 'av_altitude_m': must exceed gbs_height_m")
    if cfg.hap_altitude_m <= cfg.av_altitude_m:
        raise ConfigError("config key 'hap_altitude_m': must exceed av_altitude_m")
    if cfg.a2a_relay_count > cfg.av_count - 1:
        raise ConfigError("config key 'a2a_relay_count': needs av_count - 1 candidates")
    return cfg


def load_config(path=None) -> ScenarioConfig:
    """Load a YAML key/value config; None or an empty file yields defaults.

    Every key is validated on load; unknown keys are rejected by name and
    parse errors carry the line number.
    """
    if path is None:
        return ScenarioConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"config parse error{where}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a key/value mapping")
    return _build_config(data)


def config_hash(config: ScenarioConfig) -> str:
    """Stable digest of the fully-resolved configuration."""
    payload = json.dumps(dataclasses.asdict(config), sort_keys=True, default=list)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ============================================================
# Topology instantiation
# ============================================================

@dataclass(frozen=True)
class LinkSetup:
    """Everything needed to draw SINR samples for one link."""

    name: str
    desired: ChannelSpec
    interferers: InterfererSet
    radio: RadioParams
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Topology:
    sites: tuple
    destination: geo.NodePose
    background_avs: tuple
    relays: tuple
    hap: geo.NodePose
    ground_station: geo.NodePose
    serving_site: geo.NodePose
    links: dict            # name -> LinkSetup, insertion order is canonical
    d_g2h_m: float
    d_h2a_m: float


def _dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _dbi_to_lin(dbi: float) -> float:
    return 10.0 ** (dbi / 10.0)


def _g2a_channel(site, victim, config: ScenarioConfig, env, table) -> ChannelSpec:
    zenith = geo.zenith_angle_deg(site, victim)
    elevation = max(geo.elevation_angle_deg(site, victim), 0.0)
    pl = ch.pl_avg_g2a_db(
        geo.distance_2d(site, victim),
        site.altitude,
        victim.altitude,
        config.fc_ghz,
        env,
        mixture=config.pl_mixture,
    )
    sf = env.sf_sigma_los_db if config.g2a_shadow_fading else 0.0
    return ChannelSpec(
        pl_db=pl,
        tx_gain=float(ch.ula_gain(zenith, config.ula())),
        rx_gain=_dbi_to_lin(config.av_antenna_gain_dbi),
        k_db=ch.rice_k_db(ch.LinkKind.G2A, min(elevation, 90.0), table),
        sf_sigma_db=sf,
    )


def _strongest(candidates, tx_power_w: float, count: int) -> tuple:
    """Top interferers by mean received power; ties resolve by node id."""
    ranked = sorted(
        candidates, key=lambda item: (-item[1].mean_gain * tx_power_w, item[0])
    )
    return tuple(Interferer(spec, tx_power_w) for _, spec in ranked[:count])


def _g2a_link(name, site, victim, other_sites, config, env, table) -> LinkSetup:
    desired = _g2a_channel(site, victim, config, env, table)
    p_gbs = _dbm_to_w(config.tx_power_gbs_dbm)
    candidates = [
        (o.id, _g2a_channel(o, victim, config, env, table)) for o in other_sites
    ]
    interferers = InterfererSet(
        members=_strongest(candidates, p_gbs, config.interferer_count),
        p_interf=config.p_interf,
        mode=config.interference_mode,
    )
    radio = RadioParams(
        config.bandwidth_ga_hz, p_gbs, config.noise_density_w_hz(),
        config.noise_figure_av_db,
    )
    return LinkSetup(name, desired, interferers, radio,
                     meta={"tx_id": site.id, "rx_id": victim.id})


def _a2a_channel(tx, victim, config, table) -> ChannelSpec:
    d = geo.distance_3d(tx, victim)
    elevation = min(abs(geo.elevation_angle_deg(victim, tx)), 90.0)
    return ChannelSpec(
        pl_db=float(ch.fspl_db(d, config.fc_ghz)),
        tx_gain=_dbi_to_lin(config.av_antenna_gain_dbi),
        rx_gain=_dbi_to_lin(config.av_antenna_gain_dbi),
        k_db=ch.rice_k_db(ch.LinkKind.A2A, elevation, table),
    )


def _a2a_link(name, relay, victim, background, config, table) -> LinkSetup:
    if geo.distance_3d(relay, victim) <= 0.0:
        raise ValueError("relay and destination poses coincide")
    desired = _a2a_channel(relay, victim, config, table)
    p_av = _dbm_to_w(config.tx_power_av_dbm)
    candidates = [
        (o.id, _a2a_channel(o, victim, config, table))
        for o in background
        if o.id != relay.id
    ]
    interferers = InterfererSet(
        members=_strongest(candidates, p_av, config.interferer_count),
        p_interf=config.p_interf,
        mode=config.interference_mode,
    )
    radio = RadioParams(
        config.bandwidth_aa_hz, p_av, config.noise_density_w_hz(),
        config.noise_figure_av_db,
    )
    return LinkSetup(name, desired, interferers, radio,
                     meta={"tx_id": relay.id, "rx_id": victim.id})


def _h2a_link(hap, victim, sites, serving_site, config, table) -> LinkSetup:
    """Platform beam to the destination; every beam serving another cell
    interferes with the side-lobe gain toward the destination."""
    d = geo.distance_3d(hap, victim)
    elevation = min(geo.elevation_angle_deg(victim, hap), 90.0)
    k_db = ch.rice_k_db(ch.LinkKind.H2A, elevation, table)
    pl = float(ch.fspl_db(d, config.fc_ghz))
    rx_gain = _dbi_to_lin(config.av_antenna_gain_dbi)
    reflector = config.reflector()
    desired = ChannelSpec(
        pl_db=pl,
        tx_gain=float(ch.hap_gain(0.0, reflector)),
        rx_gain=rx_gain,
        k_db=k_db,
    )
    p_hap = _dbm_to_w(config.tx_power_hap_dbm)
    members = []
    for site in sites:
        if site.id == serving_site.id:
            continue
        aim = geo.NodePose(site.id, geo.NodeKind.AERIAL_VEHICLE,
                           site.x, site.y, config.av_altitude_m)
        offset = geo.angle_between_deg(hap, aim, victim)
        members.append(Interferer(
            ChannelSpec(
                pl_db=pl,
                tx_gain=float(ch.hap_gain(offset, reflector)),
                rx_gain=rx_gain,
                k_db=k_db,
            ),
            p_hap,
        ))
    interferers = InterfererSet(
        members=tuple(members), p_interf=config.p_interf,
        mode=config.interference_mode,
    )
    radio = RadioParams(
        config.bandwidth_ha_hz, p_hap, config.noise_density_w_hz(),
        config.noise_figure_av_db,
    )
    return LinkSetup("h2a", desired, interferers, radio,
                     meta={"rx_id": victim.id, "beam_count": len(members)})


def _g2h_link(gs, hap, config, env, table) -> LinkSetup:
    d = geo.distance_3d(gs, hap)
    elevation = min(geo.elevation_angle_deg(gs, hap), 90.0)
    desired = ChannelSpec(
        pl_db=float(ch.pl_g2h_db(d, config.fc_ghz, elevation, env)),
        tx_gain=_dbi_to_lin(config.gs_antenna_gain_dbi),
        rx_gain=_dbi_to_lin(config.hap_max_gain_dbi),
        k_db=ch.rice_k_db(ch.LinkKind.G2H, elevation, table),
        sf_sigma_db=env.sf_sigma_los_db,
    )
    radio = RadioParams(
        config.bandwidth_gh_hz, _dbm_to_w(config.tx_power_gs_dbm),
        config.noise_density_w_hz(), config.noise_figure_hap_db,
    )
    return LinkSetup("g2h", desired, InterfererSet(p_interf=0.0), radio,
                     meta={"distance_m": d, "elevation_deg": elevation})


def instantiate(config: ScenarioConfig, stream, r_ga_m: float | None = None) -> Topology:
    """Build one topology realization.

    The destination vehicle sits at (r_ga, 0) served by the center site (the
    reference layout pins the serving site at the origin); the remaining
    vehicles fall uniformly over the cell union, and the nearest ones act as
    relay candidates.
    """
    if isinstance(stream, int):
        stream = RngStream(stream)
    env = config.environment()
    table = config.rice_table()
    sites = geo.hex_grid(config.grid())
    serving = sites[0]
    r_ga = config.r_ga_m if r_ga_m is None else float(r_ga_m)
    destination = geo.NodePose(0, geo.NodeKind.AERIAL_VEHICLE, r_ga, 0.0, config.av_altitude_m)
    background = geo.place_avs_uniform(
        config.grid(), config.av_count - 1, config.av_altitude_m,
        stream.generator(), id_start=1,
    )
    hap = geo.NodePose(0, geo.NodeKind.HAP, 0.0, 0.0, config.hap_altitude_m)
    gs = geo.NodePose(0, geo.NodeKind.GROUND_STATION, config.hap_gs_offset_m, 0.0, 0.0)

    # relay candidates: nearest background vehicles, at least 1 m away
    candidates = [b for b in background if geo.distance_3d(b, destination) >= 1.0]
    candidates.sort(key=lambda b: (geo.distance_3d(b, destination), b.id))
    relays = tuple(candidates[: config.a2a_relay_count])

    others = [s for s in sites if s.id != serving.id]
    links: dict[str, LinkSetup] = {}
    links["g2a_dest"] = _g2a_link("g2a_dest", serving, destination, others, config, env, table)
    for m, relay in enumerate(relays, start=1):
        relay_site = geo.serving_bs(relay, sites)
        relay_others = [s for s in sites if s.id != relay_site.id]
        links[f"g2a_relay_{m}"] = _g2a_link(
            f"g2a_relay_{m}", relay_site, relay, relay_others, config, env, table
        )
        links[f"a2a_{m}"] = _a2a_link(
            f"a2a_{m}", relay, destination, background, config, table
        )
    links["g2h"] = _g2h_link(gs, hap, config, env, table)
    links["h2a"] = _h2a_link(hap, destination, sites, serving, config, table)

    return Topology(
        sites=tuple(sites),
        destination=destination,
        background_avs=tuple(background),
        relays=relays,
        hap=hap,
        ground_station=gs,
        serving_site=serving,
        links=links,
        d_g2h_m=geo.distance_3d(gs, hap),
        d_h2a_m=geo.distance_3d(hap, destination),
    )


# ============================================================
# Link and path evaluation
# ============================================================

# stream namespaces: sweep topology / sweep samples / region topology / region samples
_NS_SWEEP_TOPO, _NS_SWEEP_SAMP, _NS_REGION_TOPO, _NS_REGION_SAMP = 0, 1, 2, 3


def _draw_gammas(setup: LinkSetup, config: ScenarioConfig, stream: RngStream) -> np.ndarray:
    """All SINR draws for one link, batched in fixed stream order."""
    parts = []
    done, batch_ix = 0, 0
    while done < config.n_samples:
        n = min(config.mc_batch_size, config.n_samples - done)
        rng = stream.child(batch_ix).generator()
        parts.append(sinr_sample(setup.desired, setup.interferers, setup.radio, rng, size=n))
        done += n
        batch_ix += 1
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def _link_stats(gamma: np.ndarray, bandwidth_hz: float, rate_bps: float,
                packet_bits: int) -> LinkStats:
    d_t = packet_bits / rate_bps
    mean, stderr = decoding_error_stats(gamma, bandwidth_hz, d_t, packet_bits)
    delay = arq_delay(d_t, mean) if mean < 1.0 else math.inf
    return LinkStats(mean, delay, gamma.size, stderr)


def _queue_gates(config: ScenarioConfig) -> dict:
    gates = {}
    for node, service in (
        ("gbs", config.service_rate_gbs_pps),
        ("av", config.service_rate_av_pps),
        ("hap", config.service_rate_hap_pps),
        ("gs", config.service_rate_gbs_pps),
    ):
        gates[node] = True if service is None else queue_feasible(service, config.queue(node))
    return gates


def _gate(outcome: e2e.PathOutcome, ok: bool) -> e2e.PathOutcome:
    if ok or not outcome.feasible:
        return outcome
    return dataclasses.replace(outcome, feasible=False)


def _gated_combinations(da2g, a2a_paths, hap, qos, gates) -> list:
    """Combinations with queue gates re-applied; a combo inherits the gate
    of every node type it traverses (all of them cross the base station)."""
    combos = []
    for combo in e2e.enumerate_combinations(da2g, a2a_paths, hap, qos):
        ok = gates["gbs"]
        if "A2A" in combo.label:
            ok = ok and gates["av"]
        if "HAP" in combo.label:
            ok = ok and gates["gs"] and gates["hap"]
        combos.append(_gate(combo, ok))
    return combos


def _paths_for_rate(topology: Topology, gammas: dict, config: ScenarioConfig,
                    rate_bps: float):
    """Per-path outcomes at one rate: (da2g, [a2a...], hap)."""
    qos = config.qos()
    backhaul = config.backhaul()
    stats = {}
    for name, setup in topology.links.items():
        stats[name] = _link_stats(gammas[name], setup.radio.bandwidth_hz,
                                  rate_bps, config.packet_bits)
    gates = _queue_gates(config)

    branches = [stats["g2a_dest"]] * config.diversity_branches
    da2g = _gate(
        e2e.da2g_path(backhaul, config.queue("gbs"), branches, qos),
        gates["gbs"],
    )
    a2a_paths = []
    for m in range(1, len(topology.relays) + 1):
        outcome = e2e.a2a_path(
            backhaul, config.queue("gbs"), stats[f"g2a_relay_{m}"],
            config.queue("av"), stats[f"a2a_{m}"], qos, label=f"A2A-{m}",
        )
        a2a_paths.append(_gate(outcome, gates["gbs"] and gates["av"]))
    hap = _gate(
        e2e.hap_path(
            backhaul, config.queue("gs"), stats["g2h"], topology.d_g2h_m,
            config.queue("hap"), stats["h2a"], topology.d_h2a_m, qos,
        ),
        gates["gs"] and gates["hap"],
    )
    return da2g, a2a_paths, hap


CANONICAL_COMBINATIONS = (
    "DA2G",
    "DA2G + 1-A2A",
    "DA2G + 2-A2A",
    "DA2G + 3-A2A",
    "DA2G + HAP",
    "DA2G + 1-A2A + HAP",
    "DA2G + 2-A2A + HAP",
    "DA2G + 3-A2A + HAP",
)


# ============================================================
# Rate sweep
# ============================================================

@dataclass(frozen=True)
class SweepRow:
    rate_bps: float
    label: str
    eps_e2e: float
    eps_std_error: float
    delay_s: float
    delay_std_error: float
    feasible: bool


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    labels: tuple
    rates_bps: tuple
    seed: int
    config_digest: str
    diagnostics: dict


def _sweep_topology(config: ScenarioConfig, topo_ix: int):
    root = RngStream(config.master_seed)
    topology = instantiate(config, root.child(_NS_SWEEP_TOPO, topo_ix))
    gammas = {
        name: _draw_gammas(setup, config, root.child(_NS_SWEEP_SAMP, topo_ix, link_ix))
        for link_ix, (name, setup) in enumerate(topology.links.items())
    }
    gates = _queue_gates(config)
    out = {}
    for rate_kbps in config.sweep_rates_kbps:
        rate = rate_kbps * 1e3
        da2g, a2a_paths, hap = _paths_for_rate(topology, gammas, config, rate)
        qos = config.qos()
        rows = {
            "DA2G": da2g,
            "A2A": a2a_paths[0] if a2a_paths else None,
            "HAP": hap,
        }
        for combo in _gated_combinations(da2g, a2a_paths, hap, qos, gates):
            if combo.label != "DA2G":
                rows[combo.label] = combo
        out[rate] = {k: v for k, v in rows.items() if v is not None}
    return out


def _mean_outcomes(per_topology: list, qos: e2e.QosTarget):
    """Average eps/delay per label across topologies, then threshold."""
    labels = list(per_topology[0].keys())
    merged = {}
    t = len(per_topology)
    for label in labels:
        outs = [topo[label] for topo in per_topology]
        eps = sum(o.eps_e2e for o in outs) / t
        delay = sum(o.d_e2e for o in outs) / t
        eps_se = math.sqrt(sum(o.eps_std_error ** 2 for o in outs)) / t
        finite = [o.d_std_error for o in outs if math.isfinite(o.d_std_error)]
        delay_se = (math.sqrt(sum(s ** 2 for s in finite)) / t) if finite else math.inf
        gated = all(o.feasible or o.eps_e2e > qos.eps_th or o.d_e2e > qos.d_max_s
                    for o in outs)
        feasible = bool(eps <= qos.eps_th and delay <= qos.d_max_s and gated)
        merged[label] = (eps, eps_se, delay, delay_se, feasible)
    return merged


def run_rate_sweep(config: ScenarioConfig, threads: int = 1) -> SweepResult:
    """Error and delay of every path combination across the rate grid."""
    topo_results = _parallel_map(
        _sweep_topology, [(config, t) for t in range(config.sweep_topologies)], threads
    )
    qos = config.qos()
    rows = []
    labels = None
    for rate_kbps in config.sweep_rates_kbps:
        rate = rate_kbps * 1e3
        merged = _mean_outcomes([res[rate] for res in topo_results], qos)
        if labels is None:
            labels = tuple(merged.keys())
        for label, (eps, eps_se, delay, delay_se, feasible) in merged.items():
            rows.append(SweepRow(rate, label, eps, eps_se, delay, delay_se, feasible))
    diagnostics = {
        "effective_bandwidth_pps": {
            node: effective_bandwidth(config.queue(node))
            for node in ("gbs", "av", "hap", "gs")
        },
        "queue_gates": _queue_gates(config),
        "topologies": config.sweep_topologies,
        "n_samples": config.n_samples,
    }
    return SweepResult(
        rows=tuple(rows),
        labels=labels or (),
        rates_bps=tuple(r * 1e3 for r in config.sweep_rates_kbps),
        seed=config.master_seed,
        config_digest=config_hash(config),
        diagnostics=diagnostics,
    )


# ============================================================
# Operating region
# ============================================================

@dataclass(frozen=True)
class RegionCell:
    r_low_m: float
    r_high_m: float
    r_center_m: float
    rate_bps: float
    label: str


@dataclass(frozen=True)
class RegionResult:
    cells: tuple
    r_edges_m: tuple
    rates_bps: tuple
    labels: tuple          # canonical combination order, "none" excluded
    seed: int
    config_digest: str

    def label_at(self, col_ix: int, rate_ix: int) -> str:
        return self.cells[col_ix * len(self.rates_bps) + rate_ix].label

    def canonical_index(self, label: str) -> int:
        """Position in the preference order; "none" sorts above everything."""
        if label == "none":
            return len(self.labels)
        return self.labels.index(label)


def _region_column(config: ScenarioConfig, col_ix: int):
    """Labels for one distance column, all rates, averaged over topologies."""
    root = RngStream(config.master_seed)
    r_center = 0.5 * (config.region_r_edges_m[col_ix] + config.region_r_edges_m[col_ix + 1])
    qos = config.qos()
    gates = _queue_gates(config)
    per_rate: list[list] = [[] for _ in config.region_rates_kbps]
    for topo_ix in range(config.region_topologies):
        topology = instantiate(
            config, root.child(_NS_REGION_TOPO, col_ix, topo_ix), r_ga_m=r_center
        )
        gammas = {
            name: _draw_gammas(
                setup, config, root.child(_NS_REGION_SAMP, col_ix, topo_ix, link_ix)
            )
            for link_ix, (name, setup) in enumerate(topology.links.items())
        }
        for rate_ix, rate_kbps in enumerate(config.region_rates_kbps):
            da2g, a2a_paths, hap = _paths_for_rate(
                topology, gammas, config, rate_kbps * 1e3
            )
            combos = _gated_combinations(da2g, a2a_paths, hap, qos, gates)
            per_rate[rate_ix].append({c.label: c for c in combos})
    labels = []
    for rate_ix in range(len(config.region_rates_kbps)):
        merged = _mean_outcomes(per_rate[rate_ix], qos)
        chosen = "none"
        for label, (_, _, _, _, feasible) in merged.items():
            if feasible:
                chosen = label
                break
        labels.append(chosen)
    return labels


def run_operating_region(config: ScenarioConfig, threads: int = 1) -> RegionResult:
    """Minimum feasible combination per (distance bin, rate bin) cell."""
    n_cols = len(config.region_r_edges_m) - 1
    columns = _parallel_map(
        _region_column, [(config, c) for c in range(n_cols)], threads
    )
    cells = []
    for col_ix, labels in enumerate(columns):
        lo = config.region_r_edges_m[col_ix]
        hi = config.region_r_edges_m[col_ix + 1]
        for rate_ix, rate_kbps in enumerate(config.region_rates_kbps):
            cells.append(RegionCell(lo, hi, 0.5 * (lo + hi), rate_kbps * 1e3,
                                    labels[rate_ix]))
    return RegionResult(
        cells=tuple(cells),
        r_edges_m=tuple(config.region_r_edges_m),
        rates_bps=tuple(r * 1e3 for r in config.region_rates_kbps),
        labels=CANONICAL_COMBINATIONS,
        seed=config.master_seed,
        config_digest=config_hash(config),
    )


def _parallel_map(fn, arg_tuples, threads: int) -> list:
    """Map with optional process workers; collected in submission order so
    the result never depends on the worker count."""
    if threads <= 1 or len(arg_tuples) <= 1:
        return [fn(*args) for args in arg_tuples]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, *args) for args in arg_tuples]
        return [f.result() for f in futures]
