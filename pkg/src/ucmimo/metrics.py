"""Result artifacts: coverage maps, throughput distributions, file emission.

The coverage map evaluates a deterministic specular-only channel at every
outdoor grid point, so single-BS and all-BS coherent powers are exact and
reproducible. Throughput distributions come from pooled per-user averages
of a campaign; quantiles use the linear-interpolation order statistic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import SPEED_OF_LIGHT, USER_HEIGHT_M
from .errors import CampaignMismatchError
from .scenario import Scenario, outdoor_grid

NETWORK_CENTRIC = "network_centric"
USER_CENTRIC = "user_centric"

# Quantile shifts reported for the ray-traced reference deployment this
# simulator qualitatively tracks (context for the report, not pass/fail bars).
REFERENCE_TARGETS = {
    "q10_ratio_user_centric_over_network_centric": 3.0,
    "median_ratio_user_centric_over_network_centric": 1.09,
    "q90_ratio_user_centric_over_network_centric": 0.7,
    "spread_q90_minus_q10_network_centric_bps": 9.77e6,
    "spread_q90_minus_q10_user_centric_bps": 4.76e6,
}


@dataclass(frozen=True)
class CoverageGrid:
    """Received power over the outdoor grid, both serving philosophies."""

    spacing_m: float
    positions: np.ndarray          # (P, 2)
    best_single_bs_dbm: np.ndarray # (P,)
    user_centric_dbm: np.ndarray   # (P,)
    best_bs: np.ndarray            # (P,) index of the strongest BS

    def power_dbm(self, mode: str) -> np.ndarray:
        if mode == NETWORK_CENTRIC:
            return self.best_single_bs_dbm
        if mode == USER_CENTRIC:
            return self.user_centric_dbm
        raise ValueError(f"coverage holds no column for mode {mode!r}")


def _segment_hits_box_many(p0: np.ndarray, p1: np.ndarray, rect, height: float) -> np.ndarray:
    """Vectorized slab test: which of the segments p0->p1[i] cross the box."""
    lo = np.array([rect.x_min, rect.y_min, 0.0])
    hi = np.array([rect.x_max, rect.y_max, height])
    d = p1 - p0  # (P, 3)
    t_enter = np.zeros(len(p1))
    t_exit = np.ones(len(p1))
    alive = np.ones(len(p1), dtype=bool)
    for ax in range(3):
        dax = d[:, ax]
        parallel = np.abs(dax) < 1e-12
        inside = (p0[ax] > lo[ax]) & (p0[ax] < hi[ax])
        alive &= ~parallel | inside
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (lo[ax] - p0[ax]) / dax
            t1 = (hi[ax] - p0[ax]) / dax
        swap = t0 > t1
        t0s = np.where(swap, t1, t0)
        t1s = np.where(swap, t0, t1)
        t_enter = np.where(parallel, t_enter, np.maximum(t_enter, t0s))
        t_exit = np.where(parallel, t_exit, np.minimum(t_exit, t1s))
    return alive & (t_exit - t_enter > 1e-12)


def coverage_map(scenario: Scenario, spacing_m: float, seed: int = 0) -> CoverageGrid:
    """Evaluate MRT received power at every outdoor grid point.

    Each BS contributes the full per-RB budget to a lone user, so the
    per-point coherent amplitude from BS l is sqrt(p_l * g_l * M_l) with g_l
    the deterministic link gain. The specular-only channel is flat across
    RBs, hence the per-RB average equals the single evaluation. ``seed`` is
    accepted for interface symmetry; the map itself is deterministic.
    """
    del seed
    points = outdoor_grid(scenario, spacing_m)
    P = len(points)
    L = scenario.num_base_stations
    cfg = scenario.channel
    f = scenario.band.center_frequency_hz
    ref_1m = 20.0 * math.log10(4.0 * math.pi * f / SPEED_OF_LIGHT)
    amps = np.zeros((P, L))
    p1 = np.column_stack([points, np.full(P, USER_HEIGHT_M)])
    for l, bs in enumerate(scenario.base_stations):
        p0 = np.array([bs.x_m, bs.y_m, bs.height_m])
        blocked = np.zeros(P, dtype=bool)
        for b in scenario.buildings:
            blocked |= _segment_hits_box_many(p0, p1, b.footprint, b.height_m)
        d = np.maximum(np.linalg.norm(p1 - p0, axis=1), 1.0)
        pl_db = ref_1m + np.where(
            ~blocked,
            10.0 * cfg.los_exponent * np.log10(d),
            10.0 * cfg.nlos_exponent * np.log10(d) + cfg.nlos_excess_db(bs.kind),
        )
        gain = 10.0 ** (-pl_db / 10.0)
        budget = bs.tx_power_w / scenario.band.num_resource_blocks
        amps[:, l] = np.sqrt(budget * gain * bs.num_elements)
    uc_w = amps.sum(axis=1) ** 2
    nc_w = amps.max(axis=1) ** 2
    best = amps.argmax(axis=1)
    return CoverageGrid(
        spacing_m=spacing_m,
        positions=points,
        best_single_bs_dbm=10.0 * np.log10(nc_w) + 30.0,
        user_centric_dbm=10.0 * np.log10(uc_w) + 30.0,
        best_bs=best,
    )


def coverage_gap_stats(grid: CoverageGrid, scenario: Scenario, distance_ratio: float = 1.2) -> dict:
    """Coverage gain statistics, focused on near-equidistant points.

    A point qualifies as equidistant when its second-closest BS (3D antenna
    distance) lies within ``distance_ratio`` of the closest one, i.e. the
    point sits near a border between two coverage areas.
    """
    p1 = np.column_stack([grid.positions, np.full(len(grid.positions), USER_HEIGHT_M)])
    dists = np.stack(
        [
            np.linalg.norm(p1 - np.array([bs.x_m, bs.y_m, bs.height_m]), axis=1)
            for bs in scenario.base_stations
        ],
        axis=1,
    )
    dists.sort(axis=1)
    gap_db = grid.user_centric_dbm - grid.best_single_bs_dbm
    equidistant = dists[:, 1] <= distance_ratio * dists[:, 0]
    stats = {
        "num_points": int(len(gap_db)),
        "num_equidistant_points": int(equidistant.sum()),
        "dominance_fraction": float(np.mean(gap_db >= -1e-12)),
        "gap_db_max": float(gap_db.max()) if len(gap_db) else 0.0,
        "gap_db_p95_overall": float(np.quantile(gap_db, 0.95)) if len(gap_db) else 0.0,
    }
    if equidistant.any():
        stats["gap_db_p95_equidistant"] = float(np.quantile(gap_db[equidistant], 0.95))
        stats["gap_db_median_equidistant"] = float(np.quantile(gap_db[equidistant], 0.5))
    return stats


def quantile(samples, q: float) -> float:
    """Linear-interpolation order statistic (q=0 minimum, q=1 maximum)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("quantile of an empty sample set")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile fraction {q} outside [0, 1]")
    return float(np.quantile(arr, q, method="linear"))


@dataclass(frozen=True)
class ModeComparison:
    """Quantile report of a paired campaign."""

    quantiles_bps: dict
    ratios_uc_over_nc: dict
    spread_bps: dict
    spread_ratio_uc_over_nc: float
    sample_counts: dict
    mean_bps: dict


def compare_modes(pooled: dict) -> ModeComparison:
    """Per-mode q10/q50/q90, user-centric over network-centric ratios, spreads."""
    for mode in (NETWORK_CENTRIC, USER_CENTRIC):
        if mode not in pooled:
            raise CampaignMismatchError(f"comparison needs mode {mode!r}")
    counts = {m: len(np.asarray(s)) for m, s in pooled.items()}
    if counts[NETWORK_CENTRIC] != counts[USER_CENTRIC]:
        raise CampaignMismatchError(
            f"sample counts differ: {counts[NETWORK_CENTRIC]} vs {counts[USER_CENTRIC]}"
        )
    if counts[NETWORK_CENTRIC] == 0:
        raise CampaignMismatchError("comparison of empty sample sets")
    quantiles = {
        m: {q: quantile(s, q / 100.0) for q in (10, 50, 90)} for m, s in pooled.items()
    }
    nc, uc = quantiles[NETWORK_CENTRIC], quantiles[USER_CENTRIC]
    ratios = {
        q: (math.inf if nc[q] == 0 and uc[q] > 0 else (1.0 if nc[q] == uc[q] == 0 else uc[q] / nc[q]))
        for q in (10, 50, 90)
    }
    spread = {m: quantiles[m][90] - quantiles[m][10] for m in pooled}
    spread_ratio = (
        spread[USER_CENTRIC] / spread[NETWORK_CENTRIC]
        if spread[NETWORK_CENTRIC] > 0
        else (1.0 if spread[USER_CENTRIC] == 0 else math.inf)
    )
    return ModeComparison(
        quantiles_bps=quantiles,
        ratios_uc_over_nc=ratios,
        spread_bps=spread,
        spread_ratio_uc_over_nc=spread_ratio,
        sample_counts=counts,
        mean_bps={m: float(np.mean(s)) for m, s in pooled.items()},
    )


def emit_coverage_csv(grid: CoverageGrid, mode: str, path) -> None:
    """x_m,y_m,power_dbm rows; dBm rounded to 0.01 for stable diffs."""
    power = grid.power_dbm(mode)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("x_m,y_m,power_dbm\n")
        for (x, y), p in zip(grid.positions, power):
            fh.write(f"{x:.3f},{y:.3f},{p:.2f}\n")


def emit_cdf_csv(samples, path) -> None:
    """Sorted samples with empirical probabilities; full float precision."""
    arr = np.sort(np.asarray(samples, dtype=float))
    if arr.size == 0:
        raise ValueError("cannot emit a CDF of zero samples")
    n = arr.size
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("throughput_bps,cdf\n")
        for i, v in enumerate(arr):
            fh.write(f"{float(v)!r},{(i + 1) / n!r}\n")


def comparison_to_dict(cmp: ModeComparison) -> dict:
    return {
        "quantiles_bps": {
            m: {f"q{q}": cmp.quantiles_bps[m][q] for q in (10, 50, 90)}
            for m in cmp.quantiles_bps
        },
        "ratios_user_centric_over_network_centric": {
            f"q{q}": cmp.ratios_uc_over_nc[q] for q in (10, 50, 90)
        },
        "spread_q90_minus_q10_bps": dict(cmp.spread_bps),
        "spread_ratio_user_centric_over_network_centric": cmp.spread_ratio_uc_over_nc,
        "sample_counts": dict(cmp.sample_counts),
        "mean_bps": dict(cmp.mean_bps),
    }


def emit_quantiles_json(cmp: ModeComparison, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(comparison_to_dict(cmp), fh, indent=2)
        fh.write("\n")


def emit_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def run_metrics_to_dict(m) -> dict:
    return {
        "run_index": m.run_index,
        "mode": m.mode,
        "num_users": m.num_users,
        "num_slots": m.num_slots,
        "slot_duration_s": m.slot_duration_s,
        "per_user_throughput_bps": [float(v) for v in m.per_user_throughput_bps],
        "block_errors": m.block_errors,
        "transmissions": m.transmissions,
        "scheduled_user_rbs": m.scheduled_user_rbs,
        "max_power_error_w": m.max_power_error_w,
        "max_scheduled_correlation": m.max_scheduled_correlation,
        "max_unscheduled_gap_slots": m.max_unscheduled_gap_slots,
        "max_conservation_ratio": m.max_conservation_ratio,
    }
