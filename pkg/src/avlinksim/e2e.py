"""End-to-end path composition: reliability, delay, and path combining.

Provides:
 - BackhaulSpec / QosTarget / PathOutcome   : composition inputs and result
 - da2g_path / a2a_path / hap_path          : the three path constructions
 - combine_paths                            : parallel (cloned) paths
 - enumerate_combinations / min_feasible_combination : canonical search order

Loss probabilities compose as 1 - prod(1 - eps_i) over the chain elements;
delays add along a chain and take the minimum across parallel paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .link import LinkStats
from .queueing import QueueSpec

__all__ = [
    "SPEED_OF_LIGHT_M_S",
    "BackhaulSpec",
    "QosTarget",
    "PathOutcome",
    "chain_loss",
    "da2g_path",
    "a2a_path",
    "hap_path",
    "combine_paths",
    "enumerate_combinations",
    "min_feasible_combination",
]

SPEED_OF_LIGHT_M_S = 2.998e8


@dataclass(frozen=True)
class BackhaulSpec:
    delay_s: float = 1e-3
    eps: float = 1e-6

    def __post_init__(self):
        if self.delay_s < 0.0:
            raise ValueError("delay_s must be non-negative")
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")


@dataclass(frozen=True)
class QosTarget:
    eps_th: float       # end-to-end loss target
    d_max_s: float      # end-to-end delay budget

    def __post_init__(self):
        if not 0.0 < self.eps_th < 1.0:
            raise ValueError("eps_th must lie in (0, 1)")
        if self.d_max_s <= 0.0:
            raise ValueError("d_max_s must be positive")


@dataclass(frozen=True)
class PathOutcome:
    label: str
    eps_e2e: float
    d_e2e: float
    feasible: bool
    delay_breakdown: dict = field(default_factory=dict)   # sums exactly to d_e2e
    error_terms: dict = field(default_factory=dict)       # chain loss terms
    eps_std_error: float = 0.0
    d_std_error: float = 0.0


# ============================================================
# Composition helpers
# ============================================================

def chain_loss(terms) -> float:
    """1 - prod(1 - eps_i), accurate for very small terms."""
    acc = 0.0
    for eps in terms:
        if not 0.0 <= eps <= 1.0:
            raise ValueError("loss terms must lie in [0, 1]")
        if eps == 1.0:
            return 1.0
        acc += math.log1p(-eps)
    return -math.expm1(acc)


def _chain_eps_stderr(terms: dict, stderrs: dict) -> float:
    # first order: d eps / d eps_i = prod_{j != i} (1 - eps_j)
    var = 0.0
    for name, sigma in stderrs.items():
        if sigma == 0.0:
            continue
        partial = 1.0
        for other, eps in terms.items():
            if other != name:
                partial *= 1.0 - eps
        var += (sigma * partial) ** 2
    return math.sqrt(var)


def _radio_delay_var(stats: LinkStats) -> float:
    # variance of d_t / (1 - eps) induced by the eps standard error
    if not math.isfinite(stats.d_t_bar) or stats.eps_t_bar >= 1.0:
        return math.inf
    return (stats.d_t_bar * stats.std_error / (1.0 - stats.eps_t_bar)) ** 2


def _finish(label, breakdown, terms, qos, eps_stderr, d_var) -> PathOutcome:
    d_e2e = sum(breakdown.values())
    eps = chain_loss(terms.values())
    return PathOutcome(
        label=label,
        eps_e2e=eps,
        d_e2e=d_e2e,
        feasible=bool(eps <= qos.eps_th and d_e2e <= qos.d_max_s),
        delay_breakdown=breakdown,
        error_terms=terms,
        eps_std_error=eps_stderr,
        d_std_error=math.sqrt(d_var) if math.isfinite(d_var) else math.inf,
    )


# ============================================================
# Path constructions
# ============================================================

def da2g_path(
    backhaul: BackhaulSpec,
    gbs_queue: QueueSpec,
    branches,
    qos: QosTarget,
    label: str = "DA2G",
) -> PathOutcome:
    """Direct path: backhaul -> base-station queue -> K diversity branches.

    All branches carry a clone, so the radio loss is the product of branch
    errors and the radio delay is the fastest branch's mean delay.
    """
    branches = list(branches)
    if not branches:
        raise ValueError("at least one radio branch is required")
    radio_eps = math.prod(b.eps_t_bar for b in branches)
    best = min(branches, key=lambda b: b.d_t_bar)
    breakdown = {
        "backhaul": backhaul.delay_s,
        "queue_gbs": gbs_queue.delay_bound_s,
        "radio_da2g": best.d_t_bar,
    }
    terms = {
        "backhaul": backhaul.eps,
        "queue_gbs": gbs_queue.violation_prob,
        "radio_da2g": radio_eps,
    }
    radio_var = 0.0
    for i, b in enumerate(branches):
        partial = math.prod(x.eps_t_bar for j, x in enumerate(branches) if j != i)
        radio_var += (b.std_error * partial) ** 2
    eps_stderr = _chain_eps_stderr(terms, {"radio_da2g": math.sqrt(radio_var)})
    return _finish(label, breakdown, terms, qos, eps_stderr, _radio_delay_var(best))


def a2a_path(
    backhaul: BackhaulSpec,
    gbs_queue: QueueSpec,
    g2a: LinkStats,
    relay_queue: QueueSpec,
    a2a: LinkStats,
    qos: QosTarget,
    label: str = "A2A",
) -> PathOutcome:
    """Relayed path: backhaul -> base station -> relay vehicle -> destination."""
    breakdown = {
        "backhaul": backhaul.delay_s,
        "queue_gbs": gbs_queue.delay_bound_s,
        "radio_g2a": g2a.d_t_bar,
        "queue_relay": relay_queue.delay_bound_s,
        "radio_a2a": a2a.d_t_bar,
    }
    terms = {
        "backhaul": backhaul.eps,
        "queue_gbs": gbs_queue.violation_prob,
        "radio_g2a": g2a.eps_t_bar,
        "queue_relay": relay_queue.violation_prob,
        "radio_a2a": a2a.eps_t_bar,
    }
    eps_stderr = _chain_eps_stderr(
        terms, {"radio_g2a": g2a.std_error, "radio_a2a": a2a.std_error}
    )
    d_var = _radio_delay_var(g2a) + _radio_delay_var(a2a)
    return _finish(label, breakdown, terms, qos, eps_stderr, d_var)


def hap_path(
    backhaul: BackhaulSpec,
    gs_queue: QueueSpec,
    g2h: LinkStats,
    d_g2h_m: float,
    hap_queue: QueueSpec,
    h2a: LinkStats,
    d_h2a_m: float,
    qos: QosTarget,
    label: str = "HAP",
) -> PathOutcome:
    """Platform path: backhaul -> ground station -> platform -> destination.

    The long feeder and service hops add explicit propagation delays.
    """
    if d_g2h_m <= 0.0 or d_h2a_m <= 0.0:
        raise ValueError("hop distances must be positive")
    breakdown = {
        "backhaul": backhaul.delay_s,
        "queue_gs": gs_queue.delay_bound_s,
        "radio_g2h": g2h.d_t_bar,
        "prop_g2h": d_g2h_m / SPEED_OF_LIGHT_M_S,
        "queue_hap": hap_queue.delay_bound_s,
        "radio_h2a": h2a.d_t_bar,
        "prop_h2a": d_h2a_m / SPEED_OF_LIGHT_M_S,
    }
    terms = {
        "backhaul": backhaul.eps,
        "queue_gs": gs_queue.violation_prob,
        "radio_g2h": g2h.eps_t_bar,
        "queue_hap": hap_queue.violation_prob,
        "radio_h2a": h2a.eps_t_bar,
    }
    eps_stderr = _chain_eps_stderr(
        terms, {"radio_g2h": g2h.std_error, "radio_h2a": h2a.std_error}
    )
    d_var = _radio_delay_var(g2h) + _radio_delay_var(h2a)
    return _finish(label, breakdown, terms, qos, eps_stderr, d_var)


# ============================================================
# Parallel combining and combination search
# ============================================================

def combine_paths(paths, qos: QosTarget, label: str | None = None) -> PathOutcome:
    """Parallel cloned paths: losses multiply, delay is the fastest path's."""
    paths = list(paths)
    if not paths:
        raise ValueError("at least one path is required")
    eps = math.prod(p.eps_e2e for p in paths)
    best = min(paths, key=lambda p: p.d_e2e)
    var = 0.0
    for i, p in enumerate(paths):
        partial = math.prod(x.eps_e2e for j, x in enumerate(paths) if j != i)
        var += (p.eps_std_error * partial) ** 2
    return PathOutcome(
        label=label if label is not None else " + ".join(p.label for p in paths),
        eps_e2e=eps,
        d_e2e=best.d_e2e,
        feasible=bool(eps <= qos.eps_th and best.d_e2e <= qos.d_max_s),
        delay_breakdown=dict(best.delay_breakdown),
        error_terms={p.label: p.eps_e2e for p in paths},
        eps_std_error=math.sqrt(var),
        d_std_error=best.d_std_error,
    )


def enumerate_combinations(
    da2g: PathOutcome,
    a2a_paths,
    hap: PathOutcome | None,
    qos: QosTarget,
) -> list[PathOutcome]:
    """All candidate combinations in canonical preference order.

    Direct first, then with 1..3 relayed paths, then the same ladder with
    the platform path appended: DA2G; DA2G+1-A2A; DA2G+2-A2A; DA2G+3-A2A;
    DA2G+HAP; DA2G+1-A2A+HAP; DA2G+2-A2A+HAP; DA2G+3-A2A+HAP.
    """
    a2a_paths = list(a2a_paths)[:3]
    combos = [combine_paths([da2g], qos, label="DA2G")]
    for m in range(1, len(a2a_paths) + 1):
        combos.append(
            combine_paths([da2g] + a2a_paths[:m], qos, label=f"DA2G + {m}-A2A")
        )
    if hap is not None:
        combos.append(combine_paths([da2g, hap], qos, label="DA2G + HAP"))
        for m in range(1, len(a2a_paths) + 1):
            combos.append(
                combine_paths(
                    [da2g] + a2a_paths[:m] + [hap], qos, label=f"DA2G + {m}-A2A + HAP"
                )
            )
    return combos


def min_feasible_combination(combos) -> str:
    """Label of the first feasible combination in the given order, or "none"."""
    for combo in combos:
        if combo.feasible:
            return combo.label
    return "none"
