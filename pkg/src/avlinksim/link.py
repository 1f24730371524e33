"""Single-link radio abstractions: SINR sampling and short-packet decoding.

Provides:
 - RadioParams / ChannelSpec / Interferer / InterfererSet : link description
 - sinr_sample          : Monte Carlo SINR draws under Rician fading
 - fbl_rate / fbl_error : finite-blocklength rate and decoding error
 - decoding_error_stats : mean decoding error over given SINR draws
 - avg_decoding_error   : full Monte Carlo link statistic (LinkStats)
 - arq_delay            : mean persistent-retransmission delay
 - freq_diversity       : error/delay combining over diversity branches
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mathfun import RngStream, gaussian_q, gaussian_q_inv, sample_rician_power

__all__ = [
    "RadioParams",
    "ChannelSpec",
    "Interferer",
    "InterfererSet",
    "LinkStats",
    "NO_INTERFERENCE",
    "sinr_sample",
    "fbl_rate",
    "fbl_error",
    "decoding_error_stats",
    "avg_decoding_error",
    "arq_delay",
    "freq_diversity",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class RadioParams:
    bandwidth_hz: float
    tx_power_w: float
    noise_density_w_hz: float     # thermal density before the noise figure
    noise_figure_db: float = 0.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0.0 or self.tx_power_w <= 0.0:
            raise ValueError("bandwidth_hz and tx_power_w must be positive")
        if self.noise_density_w_hz <= 0.0:
            raise ValueError("noise_density_w_hz must be positive")

    @property
    def noise_power_w(self) -> float:
        return (
            self.bandwidth_hz
            * self.noise_density_w_hz
            * 10.0 ** (self.noise_figure_db / 10.0)
        )


@dataclass(frozen=True)
class ChannelSpec:
    """Statistical description of one fading channel."""

    pl_db: float              # deterministic path-loss part
    tx_gain: float            # linear
    rx_gain: float            # linear
    k_db: float               # Rice factor
    sf_sigma_db: float = 0.0  # per-draw lognormal shadow sigma

    @property
    def mean_gain(self) -> float:
        return self.tx_gain * self.rx_gain * 10.0 ** (-self.pl_db / 10.0)


@dataclass(frozen=True)
class Interferer:
    channel: ChannelSpec
    tx_power_w: float


@dataclass(frozen=True)
class InterfererSet:
    """Co-channel interferers plus the activity model.

    mode="expected" scales the summed interferer powers by p_interf each
    draw; mode="bernoulli" switches each interferer fully on with
    probability p_interf instead.
    """

    members: tuple = ()
    p_interf: float = 0.0
    mode: str = "expected"

    def __post_init__(self):
        if not 0.0 <= self.p_interf <= 1.0:
            raise ValueError("p_interf must lie in [0, 1]")
        if self.mode not in ("expected", "bernoulli"):
            raise ValueError("mode must be 'expected' or 'bernoulli'")


NO_INTERFERENCE = InterfererSet()


@dataclass(frozen=True)
class LinkStats:
    """Monte Carlo estimate of one link's decoding error and ARQ delay."""

    eps_t_bar: float    # mean decoding error
    d_t_bar: float      # mean delay with persistent retransmission [s]
    n_samples: int
    std_error: float    # standard error of eps_t_bar


# ============================================================
# SINR sampling
# ============================================================

def _channel_draw(spec: ChannelSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    power = sample_rician_power(spec.k_db, rng, size=n)
    if spec.sf_sigma_db > 0.0:
        shadow_db = spec.sf_sigma_db * rng.standard_normal(size=n)
        return spec.mean_gain * power * 10.0 ** (-shadow_db / 10.0)
    return spec.mean_gain * power


def sinr_sample(
    desired: ChannelSpec,
    interferers: InterfererSet,
    radio: RadioParams,
    rng: np.random.Generator,
    size: int = 1,
) -> np.ndarray:
    """Draw SINR realizations for one link.

    Draw order is fixed (desired channel, then each interferer in member
    order, then activity marks), so results are reproducible for a given
    generator state.
    """
    n = int(size)
    signal = radio.tx_power_w * _channel_draw(desired, rng, n)
    interference = np.zeros(n)
    if interferers.members and interferers.p_interf > 0.0:
        powers = np.empty((len(interferers.members), n))
        for i, member in enumerate(interferers.members):
            powers[i] = member.tx_power_w * _channel_draw(member.channel, rng, n)
        if interferers.mode == "expected":
            interference = interferers.p_interf * powers.sum(axis=0)
        else:
            active = rng.random(size=powers.shape) < interferers.p_interf
            interference = (powers * active).sum(axis=0)
    return signal / (interference + radio.noise_power_w)


# ============================================================
# Finite-blocklength rate and error
# ============================================================

def _dispersion(gamma: np.ndarray) -> np.ndarray:
    # V = 1 - (1 + gamma)^-2, written to stay accurate for tiny gamma
    return -np.expm1(-2.0 * np.log1p(gamma))


def fbl_rate(gamma, bandwidth_hz: float, d_t_s: float, eps: float):
    """Achievable rate [bit/s] at blocklength B*d_t and target error eps."""
    if bandwidth_hz <= 0.0 or d_t_s <= 0.0:
        raise ValueError("bandwidth_hz and d_t_s must be positive")
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0.0):
        raise ValueError("gamma must be non-negative")
    q_inv = gaussian_q_inv(eps)
    capacity = bandwidth_hz * np.log1p(g) / _LN2
    penalty = bandwidth_hz * np.sqrt(_dispersion(g) / (bandwidth_hz * d_t_s)) * q_inv / _LN2
    out = capacity - penalty
    return float(out) if np.isscalar(gamma) else out


def fbl_error(gamma, bandwidth_hz: float, d_t_s: float, packet_bits: float):
    """Decoding error of a packet_bits packet sent over d_t_s seconds."""
    if bandwidth_hz <= 0.0 or d_t_s <= 0.0 or packet_bits <= 0.0:
        raise ValueError("bandwidth_hz, d_t_s and packet_bits must be positive")
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0.0):
        raise ValueError("gamma must be non-negative")
    rate = packet_bits / d_t_s
    capacity = bandwidth_hz * np.log1p(g) / _LN2
    v = _dispersion(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = (capacity - rate) * _LN2 / np.sqrt(bandwidth_hz * v / d_t_s)
    # gamma == 0 has zero dispersion and zero capacity: certain failure
    arg = np.where(v > 0.0, arg, -np.inf)
    out = gaussian_q(arg)
    return float(out) if np.isscalar(gamma) else out


def decoding_error_stats(gamma: np.ndarray, bandwidth_hz, d_t_s, packet_bits):
    """Mean decoding error and its standard error over given SINR draws."""
    errs = fbl_error(gamma, bandwidth_hz, d_t_s, packet_bits)
    n = errs.size
    mean = float(errs.mean())
    var = float(errs.var())
    return mean, math.sqrt(var / n)


def arq_delay(d_t_s: float, eps_bar: float) -> float:
    """Mean delay of persistent retransmissions: d_t / (1 - eps_bar)."""
    if not 0.0 <= eps_bar < 1.0:
        raise ValueError("eps_bar must lie in [0, 1)")
    return d_t_s / (1.0 - eps_bar)


def avg_decoding_error(
    desired: ChannelSpec,
    interferers: InterfererSet,
    radio: RadioParams,
    packet_bits: float,
    d_t_s: float,
    n_samples: int,
    stream: RngStream,
    batch_size: int = 1 << 15,
) -> LinkStats:
    """Monte Carlo link statistic over n_samples fading/interference draws.

    Samples fan out over fixed-size batches, one child stream per batch
    index, and are reduced in batch order: the result depends only on
    (stream, n_samples, batch_size), never on scheduling.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    total = 0.0
    total_sq = 0.0
    done = 0
    batch_ix = 0
    while done < n_samples:
        n = min(batch_size, n_samples - done)
        rng = stream.child(batch_ix).generator()
        gamma = sinr_sample(desired, interferers, radio, rng, size=n)
        errs = fbl_error(gamma, radio.bandwidth_hz, d_t_s, packet_bits)
        total += float(errs.sum())
        total_sq += float((errs * errs).sum())
        done += n
        batch_ix += 1
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    delay = arq_delay(d_t_s, mean) if mean < 1.0 else math.inf
    return LinkStats(mean, delay, n_samples, math.sqrt(var / n_samples))


def freq_diversity(branches) -> LinkStats:
    """Combine diversity branches: errors multiply, delays take the minimum.

    The standard error of the product is propagated to first order.
    """
    branches = list(branches)
    if not branches:
        raise ValueError("at least one branch is required")
    eps = np.array([b.eps_t_bar for b in branches])
    prod = float(np.prod(eps))
    var = 0.0
    for i, b in enumerate(branches):
        partial = float(np.prod(np.delete(eps, i)))
        var += (b.std_error * partial) ** 2
    return LinkStats(
        eps_t_bar=prod,
        d_t_bar=min(b.d_t_bar for b in branches),
        n_samples=min(b.n_samples for b in branches),
        std_error=math.sqrt(var),
    )
