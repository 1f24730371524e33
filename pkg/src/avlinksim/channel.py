"""Radio channel models: LoS statistics, path loss, antennas, Rice factors.

Provides:
 - Environment / LinkKind / RiceTable    : channel parameterization
 - p_los                                 : urban line-of-sight probability
 - pl_g2a_los_db / pl_g2a_nlos_db / pl_avg_g2a_db : ground-to-air path loss
 - fspl_db / clutter_loss_db / pl_g2h_db : free-space and platform links
 - UlaSpec / ula_gain (+ element, array factor)   : downtilted base-station array
 - ReflectorSpec / hap_gain               : platform reflector beam pattern
 - rice_k_db                              : elevation-binned Rice factor
 - channel_power_sample                   : fading channel power |h|^2
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .mathfun import bessel_j1, sample_rician_power

__all__ = [
    "LinkKind",
    "Environment",
    "RiceTable",
    "UlaSpec",
    "ReflectorSpec",
    "p_los",
    "pl_g2a_los_db",
    "pl_g2a_nlos_db",
    "pl_avg_g2a_db",
    "fspl_db",
    "clutter_loss_db",
    "pl_g2h_db",
    "ula_element_gain",
    "ula_array_factor",
    "ula_gain",
    "hap_gain",
    "rice_k_db",
    "channel_power_sample",
]


class LinkKind(str, enum.Enum):
    G2A = "g2a"   # ground station / base station -> aerial vehicle
    A2A = "a2a"   # aerial vehicle -> aerial vehicle
    G2H = "g2h"   # ground station -> high-altitude platform
    H2A = "h2a"   # high-altitude platform -> aerial vehicle


@dataclass(frozen=True)
class Environment:
    """Urban propagation constants and shadow/clutter tables."""

    q1: float = 0.3                 # built-up land fraction
    q2: float = 500.0               # buildings per km^2
    q3_m: float = 20.0              # Rayleigh height-scale [m]
    sf_sigma_los_db: float = 4.0
    sf_sigma_nlos_db: float = 6.0
    # additional loss per 10-degree elevation bin for the ground->platform
    # link; all-zero placeholder until a measured table is configured
    clutter_loss_table_db: tuple = field(default_factory=lambda: (0.0,) * 9)

    def __post_init__(self):
        if self.q1 <= 0.0 or self.q2 <= 0.0 or self.q3_m <= 0.0:
            raise ValueError("q1, q2 and q3_m must be positive")
        if self.sf_sigma_los_db < 0.0 or self.sf_sigma_nlos_db < 0.0:
            raise ValueError("shadow-fading sigmas must be non-negative")
        if len(self.clutter_loss_table_db) != 9:
            raise ValueError("clutter_loss_table_db needs one entry per 10-degree bin (9)")
        if any(v < 0.0 for v in self.clutter_loss_table_db):
            raise ValueError("clutter losses must be non-negative")


@dataclass(frozen=True)
class RiceTable:
    """Rice factor ranges [dB] per link kind, linear in the elevation bin."""

    g2a: tuple = (5.0, 12.0)
    a2a: tuple = (12.0, 12.0)
    g2h: tuple = (5.0, 15.0)
    h2a: tuple = (12.0, 15.0)


# ============================================================
# Line-of-sight probability (urban)
# ============================================================

def p_los(r_2d: float, h_g: float, h_a: float, env: Environment) -> float:
    """Probability of line of sight between a ground node at height h_g and
    an aerial node at altitude h_a, separated by r_2d on the ground.

    Product over the buildings crossed by the ray; an empty product (the
    2D distance spans no building) gives exactly 1.
    """
    if r_2d < 0.0:
        raise ValueError("r_2d must be non-negative")
    if h_a == h_g:
        raise ValueError("p_los is undefined for h_a == h_g")
    k = math.floor(r_2d * math.sqrt(env.q1 * env.q2) / 1000.0 - 1.0)
    prob = 1.0
    for j in range(k + 1):
        ray_h = h_g - (j + 0.5) * (h_g - h_a) / (k + 1)
        prob *= 1.0 - math.exp(-(ray_h ** 2) / (2.0 * env.q3_m ** 2))
    return prob


# ============================================================
# Path loss
# ============================================================

def pl_g2a_los_db(d_3d: float, fc_ghz: float):
    return 28.0 + 22.0 * np.log10(d_3d) + 20.0 * np.log10(fc_ghz)


def pl_g2a_nlos_db(d_3d: float, h_a: float, fc_ghz: float):
    return (
        -17.5
        + (46.0 - 7.0 * np.log10(h_a)) * np.log10(d_3d)
        + 20.0 * np.log10(40.0 * np.pi * fc_ghz / 3.0)
    )


def pl_avg_g2a_db(
    r_2d: float,
    h_g: float,
    h_a: float,
    fc_ghz: float,
    env: Environment,
    mixture: str = "db",
) -> float:
    """LoS-probability-weighted ground-to-air path loss.

    mixture="db" mixes the two losses in the dB domain (the reference
    formulation); mixture="linear" averages the linear channel gains and
    converts back, which is the physically-motivated alternative.
    """
    p = p_los(r_2d, h_g, h_a, env)
    d_3d = math.hypot(r_2d, h_a - h_g)
    los = float(pl_g2a_los_db(d_3d, fc_ghz))
    nlos = float(pl_g2a_nlos_db(d_3d, h_a, fc_ghz))
    if mixture == "db":
        return p * los + (1.0 - p) * nlos
    if mixture == "linear":
        gain = p * 10.0 ** (-los / 10.0) + (1.0 - p) * 10.0 ** (-nlos / 10.0)
        return -10.0 * math.log10(gain)
    raise ValueError("mixture must be 'db' or 'linear'")


def fspl_db(d_m, fc_ghz):
    """Free-space path loss for distance in meters, carrier in GHz."""
    return 32.45 + 20.0 * np.log10(d_m) + 20.0 * np.log10(fc_ghz)


def clutter_loss_db(elevation_deg: float, env: Environment) -> float:
    """Table lookup of ground-clutter loss by elevation decile."""
    if not 0.0 <= elevation_deg <= 90.0:
        raise ValueError("elevation_deg must lie in [0, 90]")
    bin_ix = min(int(elevation_deg // 10.0), 8)
    return env.clutter_loss_table_db[bin_ix]


def pl_g2h_db(
    d_m: float,
    fc_ghz: float,
    elevation_deg: float,
    env: Environment,
    rng: np.random.Generator | None = None,
    size=None,
):
    """Ground-to-platform path loss: free space + clutter + shadow fading.

    With rng=None only the deterministic part (free space + clutter) is
    returned; otherwise lognormal shadow draws with the LoS sigma are added.
    """
    base = float(fspl_db(d_m, fc_ghz)) + clutter_loss_db(elevation_deg, env)
    if rng is None:
        return base
    return base + env.sf_sigma_los_db * rng.standard_normal(size=size)


# ============================================================
# Antennas
# ============================================================

@dataclass(frozen=True)
class UlaSpec:
    """Vertical uniform linear array on a ground site, angles are zenith."""

    n_elements: int = 8
    downtilt_deg: float = 102.0          # boresight zenith angle
    element_gain_max_dbi: float = 8.0

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be at least 1")


@dataclass(frozen=True)
class ReflectorSpec:
    """Platform reflector antenna; angles are offsets from the beam axis."""

    max_gain_dbi: float = 32.0
    aperture_radius_wavelengths: float = 10.0


def ula_element_gain(zenith_deg, spec: UlaSpec):
    """Single element power gain (linear) at zenith angle phi."""
    phi = np.deg2rad(np.asarray(zenith_deg, dtype=float))
    out = 10.0 ** (spec.element_gain_max_dbi / 10.0) * np.sin(phi) ** 2
    return float(out) if np.isscalar(zenith_deg) else out


def ula_array_factor(zenith_deg, spec: UlaSpec):
    """Array power factor (linear); exactly N at boresight and at grating
    angles, where the sin ratio is evaluated as its limit."""
    phi = np.deg2rad(np.asarray(zenith_deg, dtype=float))
    n = spec.n_elements
    w = 0.5 * (np.cos(phi) - math.cos(math.radians(spec.downtilt_deg)))
    den = np.sin(np.pi * w)
    singular = np.abs(den) < 1e-9
    safe_den = np.where(singular, 1.0, den)
    out = np.where(singular, float(n), np.sin(n * np.pi * w) ** 2 / (n * safe_den ** 2))
    return float(out) if np.isscalar(zenith_deg) else out


def ula_gain(zenith_deg, spec: UlaSpec):
    """Total power gain (linear): element pattern times array factor."""
    out = ula_element_gain(zenith_deg, spec) * ula_array_factor(zenith_deg, spec)
    return float(out) if np.isscalar(zenith_deg) else out


def hap_gain(offset_deg, spec: ReflectorSpec):
    """Reflector power gain (linear) at an angle off the beam axis.

    Normalized pattern 4*|J1(x)/x|^2 with x = 2*pi*a*sin(theta); the on-axis
    removable singularity evaluates to 1.
    """
    theta = np.deg2rad(np.asarray(offset_deg, dtype=float))
    x = 2.0 * np.pi * spec.aperture_radius_wavelengths * np.sin(theta)
    on_axis = x == 0.0
    safe_x = np.where(on_axis, 1.0, x)
    pattern = np.where(on_axis, 1.0, 4.0 * np.abs(bessel_j1(safe_x) / safe_x) ** 2)
    out = 10.0 ** (spec.max_gain_dbi / 10.0) * pattern
    return float(out) if np.isscalar(offset_deg) else out


# ============================================================
# Rice factor and fading channel power
# ============================================================

def rice_k_db(kind: LinkKind, elevation_deg: float, table: RiceTable) -> float:
    """Rice factor for a link kind, linear across nine 10-degree bins."""
    if not 0.0 <= elevation_deg <= 90.0:
        raise ValueError("elevation_deg must lie in [0, 90]")
    k_min, k_max = getattr(table, LinkKind(kind).value)
    bin_ix = min(int(elevation_deg // 10.0), 8)
    return k_min + (k_max - k_min) * bin_ix / 8.0


def channel_power_sample(
    pl_db: float,
    tx_gain: float,
    rx_gain: float,
    k_db: float,
    rng: np.random.Generator,
    size=None,
):
    """Fading channel power |h|^2 = antenna gains / path loss * Rician fade."""
    if tx_gain < 0.0 or rx_gain < 0.0:
        raise ValueError("antenna gains must be non-negative")
    mean = tx_gain * rx_gain * 10.0 ** (-pl_db / 10.0)
    return mean * sample_rician_power(k_db, rng, size=size)
