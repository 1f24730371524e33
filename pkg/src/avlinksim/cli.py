"""Command line interface.

Subcommands:
  sweep        error/delay vs. data rate for every path combination
  region       minimum feasible combination over a distance x rate grid
  link-budget  deterministic single-link budget breakdown
  validate     run the embedded invariant suite, optionally check a config

Exit codes: 0 success, 1 validation findings, 2 usage or config errors,
3 output I/O errors.

Outputs carry no timestamps and floats use shortest round-trip formatting,
so reruns with the same config, seed, and worker count are byte-identical
(and worker count itself never changes the numbers).

If --config names a relative path that does not exist in the working
directory, it is looked up under $AVLINKSIM_CONFIG_DIR as well.
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
import math
import os
import pathlib
import sys
import tempfile

import click
import numpy as np

from . import __version__, channel, e2e, geometry, link, mathfun, queueing, scenario

CONFIG_DIR_ENV = "AVLINKSIM_CONFIG_DIR"

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_IO = 3


# ============================================================
# Shared helpers
# ============================================================

def _resolve_config(path_str: str | None):
    if path_str is None:
        return None
    path = pathlib.Path(path_str)
    if path.is_absolute() or path.exists():
        return path
    base = os.environ.get(CONFIG_DIR_ENV)
    if base:
        candidate = pathlib.Path(base) / path
        if candidate.exists():
            return candidate
    return path


def _load(config_path: str | None, seed: int | None) -> scenario.ScenarioConfig:
    config = scenario.load_config(_resolve_config(config_path))
    if seed is not None:
        config = dataclasses.replace(config, master_seed=seed)
    return config


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_num(value: float):
    return value if math.isfinite(value) else None


def _emit(text: str, out_path: str | None) -> None:
    """Print to stdout, or atomically replace the target file."""
    if out_path is None:
        click.echo(text, nl=False)
        return
    target = pathlib.Path(out_path)
    fd, tmp = tempfile.mkstemp(
        dir=str(target.parent), prefix=target.name + ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode("utf-8"))
        os.replace(tmp, target)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _fail_config(exc: scenario.ConfigError) -> None:
    click.echo(f"config error: {exc}", err=True)
    sys.exit(EXIT_USAGE)


def _fail_io(exc: OSError) -> None:
    click.echo(f"i/o error: {exc}", err=True)
    sys.exit(EXIT_IO)


# ============================================================
# Serializers
# ============================================================

def _sweep_csv(result: scenario.SweepResult) -> str:
    lines = [
        "# avlinksim sweep v1",
        f"# config_sha256: {result.config_digest}",
        f"# seed: {result.seed}",
        f"# n_samples: {result.diagnostics['n_samples']}",
        f"# topologies: {result.diagnostics['topologies']}",
        "rate_bps,label,eps_e2e,eps_std_error,delay_s,delay_std_error,feasible",
    ]
    for row in result.rows:
        lines.append(",".join([
            _fmt(row.rate_bps), row.label, _fmt(row.eps_e2e),
            _fmt(row.eps_std_error), _fmt(row.delay_s),
            _fmt(row.delay_std_error), _fmt(row.feasible),
        ]))
    return "\n".join(lines) + "\n"


def _sweep_json(result: scenario.SweepResult) -> str:
    payload = {
        "schema": "avlinksim.sweep.v1",
        "config_sha256": result.config_digest,
        "seed": result.seed,
        "labels": list(result.labels),
        "rates_bps": list(result.rates_bps),
        "diagnostics": result.diagnostics,
        "rows": [
            {
                "rate_bps": row.rate_bps,
                "label": row.label,
                "eps_e2e": _json_num(row.eps_e2e),
                "eps_std_error": _json_num(row.eps_std_error),
                "delay_s": _json_num(row.delay_s),
                "delay_std_error": _json_num(row.delay_std_error),
                "feasible": row.feasible,
            }
            for row in result.rows
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _region_csv(result: scenario.RegionResult) -> str:
    lines = [
        "# avlinksim region v1",
        f"# config_sha256: {result.config_digest}",
        f"# seed: {result.seed}",
        f"# labels: {'; '.join(result.labels)}",
        "r_low_m,r_high_m,r_center_m,rate_bps,label",
    ]
    for cell in result.cells:
        lines.append(",".join([
            _fmt(cell.r_low_m), _fmt(cell.r_high_m), _fmt(cell.r_center_m),
            _fmt(cell.rate_bps), cell.label,
        ]))
    return "\n".join(lines) + "\n"


def _region_json(result: scenario.RegionResult) -> str:
    payload = {
        "schema": "avlinksim.region.v1",
        "config_sha256": result.config_digest,
        "seed": result.seed,
        "labels": list(result.labels),
        "r_edges_m": list(result.r_edges_m),
        "rates_bps": list(result.rates_bps),
        "cells": [
            {
                "r_low_m": cell.r_low_m,
                "r_high_m": cell.r_high_m,
                "r_center_m": cell.r_center_m,
                "rate_bps": cell.rate_bps,
                "label": cell.label,
            }
            for cell in result.cells
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


# ============================================================
# Commands
# ============================================================

@click.group()
@click.version_option(version=__version__, prog_name="avlinksim")
def main() -> None:
    """Monte Carlo link simulator for remote-piloting connectivity."""


_common = [
    click.option("--config", "config_path", type=str, default=None,
                 help="YAML config file (defaults applied for missing keys)."),
    click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=None,
                 help="Override the master seed from the config."),
    click.option("--out", "out_path", type=str, default=None,
                 help="Output file (atomic replace); stdout when omitted."),
    click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                 default="csv", show_default=True),
    click.option("--threads", type=click.IntRange(1, 256), default=1,
                 show_default=True,
                 help="Worker processes; results are identical for any value."),
    click.option("--quiet", is_flag=True, help="Suppress progress messages."),
]


def _with_common(fn):
    for deco in reversed(_common):
        fn = deco(fn)
    return fn


@main.command()
@_with_common
def sweep(config_path, seed, out_path, fmt, threads, quiet) -> None:
    """Rate sweep at the configured destination distance."""
    try:
        config = _load(config_path, seed)
    except scenario.ConfigError as exc:
        _fail_config(exc)
    result = scenario.run_rate_sweep(config, threads=threads)
    text = _sweep_csv(result) if fmt == "csv" else _sweep_json(result)
    try:
        _emit(text, out_path)
    except OSError as exc:
        _fail_io(exc)
    if not quiet and out_path is not None:
        click.echo(
            f"sweep: {len(result.rows)} rows "
            f"({len(result.rates_bps)} rates x {len(result.labels)} paths) "
            f"-> {out_path}",
            err=True,
        )


@main.command()
@_with_common
def region(config_path, seed, out_path, fmt, threads, quiet) -> None:
    """Operating-region grid of minimum feasible combinations."""
    try:
        config = _load(config_path, seed)
    except scenario.ConfigError as exc:
        _fail_config(exc)
    result = scenario.run_operating_region(config, threads=threads)
    text = _region_csv(result) if fmt == "csv" else _region_json(result)
    try:
        _emit(text, out_path)
    except OSError as exc:
        _fail_io(exc)
    if not quiet and out_path is not None:
        click.echo(
            f"region: {len(result.cells)} cells "
            f"({len(result.r_edges_m) - 1} distance bins x "
            f"{len(result.rates_bps)} rates) -> {out_path}",
            err=True,
        )


def _echo_budget(title: str, entries: list) -> None:
    click.echo(title)
    for key, value in entries:
        click.echo(f"  {key}: {_fmt(value)}")


def _snr_db(tx_power_w, tx_gain, rx_gain, pl_db, radio) -> float:
    signal = tx_power_w * tx_gain * rx_gain * 10.0 ** (-pl_db / 10.0)
    return 10.0 * math.log10(signal / radio.noise_power_w)


def _budget_g2a(config: scenario.ScenarioConfig, distance_m: float) -> None:
    env = config.environment()
    table = config.rice_table()
    h_g, h_a = config.gbs_height_m, config.av_altitude_m
    d3 = math.hypot(distance_m, h_a - h_g)
    elevation = math.degrees(math.atan2(h_a - h_g, distance_m))
    zenith = 90.0 - elevation
    p_los = channel.p_los(distance_m, h_g, h_a, env)
    tx_gain = float(channel.ula_gain(zenith, config.ula()))
    radio = link.RadioParams(
        config.bandwidth_ga_hz, 10.0 ** ((config.tx_power_gbs_dbm - 30.0) / 10.0),
        config.noise_density_w_hz(), config.noise_figure_av_db,
    )
    pl_avg = channel.pl_avg_g2a_db(distance_m, h_g, h_a, config.fc_ghz, env,
                                   mixture=config.pl_mixture)
    _echo_budget("g2a link budget", [
        ("d_2d_m", distance_m),
        ("d_3d_m", d3),
        ("elevation_deg", elevation),
        ("p_los", p_los),
        ("pl_los_db", float(channel.pl_g2a_los_db(d3, config.fc_ghz))),
        ("pl_nlos_db", float(channel.pl_g2a_nlos_db(d3, h_a, config.fc_ghz))),
        ("pl_avg_db", float(pl_avg)),
        ("tx_array_gain_db", 10.0 * math.log10(tx_gain) if tx_gain > 0 else -math.inf),
        ("rice_k_db", channel.rice_k_db(channel.LinkKind.G2A,
                                        min(max(elevation, 0.0), 90.0), table)),
        ("noise_power_w", radio.noise_power_w),
        ("mean_snr_db", _snr_db(radio.tx_power_w, tx_gain,
                                10.0 ** (config.av_antenna_gain_dbi / 10.0),
                                float(pl_avg), radio)),
    ])


def _budget_a2a(config: scenario.ScenarioConfig, distance_m: float) -> None:
    table = config.rice_table()
    pl = float(channel.fspl_db(distance_m, config.fc_ghz))
    radio = link.RadioParams(
        config.bandwidth_aa_hz, 10.0 ** ((config.tx_power_av_dbm - 30.0) / 10.0),
        config.noise_density_w_hz(), config.noise_figure_av_db,
    )
    gain = 10.0 ** (config.av_antenna_gain_dbi / 10.0)
    _echo_budget("a2a link budget", [
        ("d_3d_m", distance_m),
        ("fspl_db", pl),
        ("rice_k_db", channel.rice_k_db(channel.LinkKind.A2A, 0.0, table)),
        ("noise_power_w", radio.noise_power_w),
        ("mean_snr_db", _snr_db(radio.tx_power_w, gain, gain, pl, radio)),
    ])


def _budget_hap(config: scenario.ScenarioConfig, offset_m: float) -> None:
    table = config.rice_table()
    dz = config.hap_altitude_m - config.av_altitude_m
    d3 = math.hypot(offset_m, dz)
    elevation = math.degrees(math.atan2(dz, offset_m)) if offset_m > 0 else 90.0
    pl = float(channel.fspl_db(d3, config.fc_ghz))
    radio = link.RadioParams(
        config.bandwidth_ha_hz, 10.0 ** ((config.tx_power_hap_dbm - 30.0) / 10.0),
        config.noise_density_w_hz(), config.noise_figure_av_db,
    )
    tx_gain = float(channel.hap_gain(0.0, config.reflector()))
    _echo_budget("hap link budget", [
        ("nadir_offset_m", offset_m),
        ("d_3d_m", d3),
        ("elevation_deg", elevation),
        ("fspl_db", pl),
        ("beam_gain_db", 10.0 * math.log10(tx_gain)),
        ("rice_k_db", channel.rice_k_db(channel.LinkKind.H2A,
                                        min(elevation, 90.0), table)),
        ("prop_delay_us", 1e6 * d3 / e2e.SPEED_OF_LIGHT_M_S),
        ("mean_snr_db", _snr_db(radio.tx_power_w, tx_gain,
                                10.0 ** (config.av_antenna_gain_dbi / 10.0),
                                pl, radio)),
    ])


@main.command("link-budget")
@click.argument("kind", type=click.Choice(["g2a", "a2a", "hap"]))
@click.option("--distance-m", type=float, default=None,
              help="g2a: horizontal site-to-vehicle distance; a2a: vehicle "
                   "separation (required); hap: nadir offset (default 0).")
@click.option("--config", "config_path", type=str, default=None)
def link_budget(kind, distance_m, config_path) -> None:
    """Deterministic budget breakdown for a single link type."""
    try:
        config = _load(config_path, None)
    except scenario.ConfigError as exc:
        _fail_config(exc)
    if kind == "g2a":
        distance = config.r_ga_m if distance_m is None else distance_m
        if distance < 0:
            raise click.UsageError("--distance-m must be non-negative for g2a")
        _budget_g2a(config, distance)
    elif kind == "a2a":
        if distance_m is None:
            raise click.UsageError("a2a requires --distance-m")
        if distance_m <= 0:
            raise click.UsageError("--distance-m must be positive for a2a")
        _budget_a2a(config, distance_m)
    else:
        offset = 0.0 if distance_m is None else distance_m
        if offset < 0:
            raise click.UsageError("--distance-m must be non-negative for hap")
        _budget_hap(config, offset)


# ============================================================
# Embedded invariants
# ============================================================

def _inv_gaussian_q_round_trip() -> None:
    for p in (1e-7, 1e-5, 1e-2, 0.4):
        x = mathfun.gaussian_q_inv(p)
        assert abs(mathfun.gaussian_q(x) - p) <= 1e-9 * p, f"round trip off at {p}"


def _inv_fbl_round_trip() -> None:
    gamma, bw, d_t, eps = 10.0, 0.4e6, 6.4e-4, 1e-5
    rate = link.fbl_rate(gamma, bw, d_t, eps)
    back = link.fbl_error(gamma, bw, d_t, rate * d_t)
    assert abs(back - eps) <= 1e-6 * eps, "rate/error inversion mismatch"


def _inv_hex_grid() -> None:
    sites = geometry.hex_grid(geometry.GridSpec())
    assert len(sites) == 37, f"expected 37 sites, got {len(sites)}"
    dmin = min(geometry.distance_2d(sites[0], s) for s in sites[1:])
    assert abs(dmin - 500.0) < 1e-9, "nearest-site spacing is not one ISD"


def _inv_rician_unit_mean() -> None:
    rng = mathfun.RngStream(12345).generator()
    omega2 = mathfun.sample_rician_power(12.0, rng, size=200_000)
    assert abs(float(np.mean(omega2)) - 1.0) < 0.02, "fading power not unit mean"


def _inv_chain_loss() -> None:
    terms = [1e-3, 2e-4, 5e-6]
    direct = 1.0 - (1 - terms[0]) * (1 - terms[1]) * (1 - terms[2])
    assert abs(e2e.chain_loss(terms) - direct) <= 1e-15, "chain loss mismatch"


def _inv_effective_bandwidth() -> None:
    spec = queueing.QueueSpec(1000.0, 0.3e-3, 1e-7)
    e_bw = queueing.effective_bandwidth(spec)
    assert e_bw > spec.arrival_rate_pps, "effective bandwidth below arrival rate"
    assert abs(e_bw - 13423.836634389200146) < 1e-6, "effective bandwidth drifted"


def _inv_stream_map() -> None:
    s = mathfun.RngStream(7)
    assert s.child(2, 3) == s.child(2).child(3), "child folding broken"
    assert s.child(2, 3) != s.child(3, 2), "child order must matter"


def _inv_antenna_peaks() -> None:
    ula = channel.UlaSpec()
    af = channel.ula_array_factor(ula.downtilt_deg, ula)
    assert abs(af - ula.n_elements) < 1e-9, "boresight array factor is not N"
    hap = channel.ReflectorSpec()
    assert abs(channel.hap_gain(0.0, hap) - 10.0 ** 3.2) < 1e-9, "on-axis beam gain"


def _inv_los_probability() -> None:
    env = channel.Environment()
    values = [channel.p_los(r, 25.0, 300.0, env) for r in (10, 150, 600, 2000)]
    assert all(0.0 <= v <= 1.0 for v in values), "LoS probability out of range"
    assert all(a >= b for a, b in zip(values, values[1:])), "LoS must not grow with range"


_INVARIANTS = [
    ("gaussian q round trip", _inv_gaussian_q_round_trip),
    ("finite-blocklength inversion", _inv_fbl_round_trip),
    ("hex grid layout", _inv_hex_grid),
    ("rician unit mean power", _inv_rician_unit_mean),
    ("loss composition", _inv_chain_loss),
    ("effective bandwidth", _inv_effective_bandwidth),
    ("stream map", _inv_stream_map),
    ("antenna peaks", _inv_antenna_peaks),
    ("los probability", _inv_los_probability),
]


@main.command()
@click.option("--config", "config_path", type=str, default=None,
              help="Also validate this config file.")
def validate(config_path) -> None:
    """Run fast self-checks; report findings and exit 1 if any fail."""
    failures = 0
    for name, fn in _INVARIANTS:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - findings, not crashes
            failures += 1
            click.echo(f"FAIL - {name}: {exc}")
        else:
            click.echo(f"ok   - {name}")
    if config_path is not None:
        try:
            scenario.load_config(_resolve_config(config_path))
        except scenario.ConfigError as exc:
            failures += 1
            click.echo(f"FAIL - config file: {exc}")
        else:
            click.echo("ok   - config file")
    total = len(_INVARIANTS) + (1 if config_path is not None else 0)
    click.echo(f"{total - failures} passed, {failures} failed")
    if failures:
        sys.exit(EXIT_FINDINGS)


if __name__ == "__main__":
    main()
