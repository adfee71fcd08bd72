"""Run orchestration: user drops, mobility, the per-slot loop and campaigns.

Seed discipline: one master seed per campaign. Run r derives three
sub-streams through spawn keys (r, 0) drops, (r, 1) mobility and (r, 2)
fading, so the same master seed reproduces identical user placements,
trajectories and fading realizations across serving modes. Fading reseeds
per coherence block through spawn key (r, 2, block).
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import _bs_steering_many, generate_paths, wavelength
from .errors import PlacementError, ScenarioError, SimulationError
from .mcs import McsTable, default_mcs_table
from .phy import link_budgets_grid, noise_power
from .scenario import Scenario, is_outdoor
from .scheduler import (
    DEFAULT_CORRELATION_THRESHOLD,
    PfState,
    greedy_schedule,
    pairwise_correlation_grid,
    update_pf,
)

DROP_STREAM = 0
MOBILITY_STREAM = 1
FADING_STREAM = 2

_MAX_DROP_MISSES = 100_000
_MAX_DIRECTION_TRIES = 100


@dataclass(frozen=True)
class UserState:
    id: int
    x_m: float
    y_m: float
    direction_rad: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m])


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs beyond the scenario itself."""

    run_index: int
    rng_seed: int
    num_slots: int
    mode: str
    cluster_size: int | None = None
    perfect_csi: bool = False
    correlation_threshold: float = DEFAULT_CORRELATION_THRESHOLD
    record_schedule: bool = False
    record_link_gains: bool = False


@dataclass
class RunMetrics:
    """Per-run results plus always-on consistency diagnostics."""

    run_index: int
    mode: str
    num_users: int
    num_slots: int
    slot_duration_s: float
    per_user_bits: np.ndarray
    per_user_throughput_bps: np.ndarray
    block_errors: int
    transmissions: int
    scheduled_user_rbs: int
    max_power_error_w: float
    max_scheduled_correlation: float
    max_unscheduled_gap_slots: int
    max_conservation_ratio: float
    initial_positions: np.ndarray
    final_positions: np.ndarray
    schedule_trace: list = field(default_factory=list)
    link_gain_trace: list = field(default_factory=list)


def drop_users(scenario: Scenario, seed) -> list[UserState]:
    """Uniform user drop over the outdoor ground, random headings.

    ``seed`` may be an int, a SeedSequence or a Generator. Raises
    PlacementError when the outdoor area appears to be empty.
    """
    rng = np.random.default_rng(seed)
    users: list[UserState] = []
    b = scenario.bounds
    misses = 0
    while len(users) < scenario.num_users:
        x = rng.uniform(b.x_min, b.x_max)
        y = rng.uniform(b.y_min, b.y_max)
        if is_outdoor(scenario, x, y):
            direction = rng.uniform(0.0, 2.0 * math.pi)
            users.append(UserState(len(users), float(x), float(y), float(direction)))
            misses = 0
        else:
            misses += 1
            if misses > _MAX_DROP_MISSES:
                raise PlacementError("no outdoor ground found for user placement")
    return users


def step_mobility(user: UserState, dt: float, scenario: Scenario, rng) -> UserState:
    """Advance one user by speed*dt; bounce off buildings and bounds.

    A blocked step redraws the heading uniformly until the move is legal
    (bounded retries); a fully boxed-in user stays put with a fresh heading.
    """
    step = scenario.user_speed_mps * dt
    if step == 0.0:
        return user
    direction = user.direction_rad
    for attempt in range(_MAX_DIRECTION_TRIES):
        if attempt > 0:
            direction = rng.uniform(0.0, 2.0 * math.pi)
        nx = user.x_m + step * math.cos(direction)
        ny = user.y_m + step * math.sin(direction)
        if is_outdoor(scenario, nx, ny):
            return UserState(user.id, nx, ny, direction)
    return UserState(user.id, user.x_m, user.y_m, rng.uniform(0.0, 2.0 * math.pi))


def serving_set(rb_avg_gains, mode: str, cluster_size: int | None = None) -> np.ndarray:
    """Serving BS indices for one user from RB-averaged channel gains.

    network_centric keeps the single strongest BS, user_centric all of
    them, cluster the strongest C. Ties break toward the lower BS id.
    Returns ascending indices.
    """
    g = np.asarray(rb_avg_gains, dtype=float)
    c = _resolve_cluster_size(mode, cluster_size, len(g))
    order = np.argsort(-g, kind="stable")
    return np.sort(order[:c])


def _resolve_cluster_size(mode: str, cluster_size, num_bs: int) -> int:
    if mode == "network_centric":
        return 1
    if mode == "user_centric":
        return num_bs
    if mode == "cluster":
        if cluster_size is None or not 1 <= int(cluster_size) <= num_bs:
            raise ScenarioError(f"cluster_size {cluster_size} outside 1..{num_bs}")
        return int(cluster_size)
    raise ScenarioError(f"unknown serving mode {mode!r}")


def _serving_masks(rb_avg_norms: np.ndarray, cluster: int) -> np.ndarray:
    order = np.argsort(-rb_avg_norms, axis=1, kind="stable")
    mask = np.zeros(rb_avg_norms.shape, dtype=bool)
    rows = np.arange(rb_avg_norms.shape[0])[:, None]
    mask[rows, order[:, :cluster]] = True
    return mask


class _FadingBlock:
    """Per-coherence-block path state, laid out for fast per-slot synthesis."""

    def __init__(self, scenario: Scenario, positions, block_seed: int):
        band = scenario.band
        f_centers = band.rb_center_frequencies()
        fc = band.center_frequency_hz
        stations = scenario.base_stations
        K = len(positions)
        p_max = scenario.channel.num_scatter_paths + 1
        self.gains = []     # per BS: (K, P) complex, Doppler-rotated in place
        self.aoa = []       # per BS: (K, P)
        self.steer = []     # per BS: (K, P, M_l)
        self.delay_phase = []  # per BS: (K, P, N)
        for bs in stations:
            g = np.zeros((K, p_max), dtype=complex)
            aoa = np.zeros((K, p_max))
            steer = np.ones((K, p_max, bs.num_elements), dtype=complex)
            dphase = np.ones((K, p_max, band.num_resource_blocks), dtype=complex)
            for k in range(K):
                ps = generate_paths(scenario, bs, positions[k], block_seed)
                p = len(ps)
                g[k, :p] = ps.gains
                aoa[k, :p] = ps.azimuth_aoa_rad
                steer[k, :p] = _bs_steering_many(bs, ps.azimuth_aod_rad, ps.elevation_aod_rad, fc)
                dphase[k, :p] = np.exp(-2j * math.pi * np.outer(ps.delays_s, f_centers))
            self.gains.append(g)
            self.aoa.append(aoa)
            self.steer.append(steer)
            self.delay_phase.append(dphase)

    def advance(self, displacement: np.ndarray, wavelength_m: float) -> None:
        """Rotate path phases for per-user displacements (K, 2)."""
        k_wave = 2.0 * math.pi / wavelength_m
        for l in range(len(self.gains)):
            step = (
                displacement[:, 0:1] * np.cos(self.aoa[l])
                + displacement[:, 1:2] * np.sin(self.aoa[l])
            )
            self.gains[l] *= np.exp(1j * k_wave * step)

    def synthesize(self) -> list[np.ndarray]:
        """Per-BS channel tensors (K, N, M_l) for the current phases."""
        out = []
        for l in range(len(self.gains)):
            weighted = (self.gains[l][:, :, None] * self.delay_phase[l]).swapaxes(1, 2)
            out.append(weighted @ self.steer[l])
        return out


def _grams(h_per_bs) -> tuple[np.ndarray, np.ndarray]:
    """Pure Gram stack (L, N, K, K) and squared norms (N, K, L)."""
    grams = []
    for h in h_per_bs:
        hn = h.transpose(1, 0, 2)
        grams.append(np.conj(hn) @ hn.swapaxes(1, 2))
    gram = np.stack(grams, axis=0)
    kk = np.arange(gram.shape[2])
    norms = np.real(gram[:, :, kk, kk]).transpose(1, 2, 0)
    return gram, norms


def _mixed_grams(h_true_per_bs, h_csi_per_bs) -> np.ndarray:
    """(L, N, K, K) with entry [l,n,k,j] = h_true_k^H h_csi_j."""
    grams = []
    for ht, hc in zip(h_true_per_bs, h_csi_per_bs):
        htn = ht.transpose(1, 0, 2)
        hcn = hc.transpose(1, 0, 2)
        grams.append(np.conj(htn) @ hcn.swapaxes(1, 2))
    return np.stack(grams, axis=0)


def run_simulation(scenario: Scenario, cfg: RunConfig, mcs_table: McsTable | None = None) -> RunMetrics:
    """Execute one run: mobility, fading, scheduling, transport, accounting."""
    table = mcs_table if mcs_table is not None else default_mcs_table()
    band = scenario.band
    K = scenario.num_users
    L = scenario.num_base_stations
    N = band.num_resource_blocks
    dt = band.slot_duration_s
    cluster = _resolve_cluster_size(cfg.mode, cfg.cluster_size, L)
    noise_w = noise_power(band, scenario.noise_figure_db)
    tx_power_w = np.array([bs.tx_power_w for bs in scenario.base_stations])
    budget = tx_power_w / N
    lam_c = wavelength(band.center_frequency_hz)
    coherence = scenario.channel.coherence_block_slots
    thr = table.thresholds_db
    eff = table.efficiencies

    seed_root = cfg.rng_seed
    drop_rng = np.random.default_rng(np.random.SeedSequence(seed_root, spawn_key=(cfg.run_index, DROP_STREAM)))
    mob_rng = np.random.default_rng(np.random.SeedSequence(seed_root, spawn_key=(cfg.run_index, MOBILITY_STREAM)))

    users = drop_users(scenario, drop_rng)
    initial_positions = np.array([[u.x_m, u.y_m] for u in users]) if users else np.zeros((0, 2))

    pf = PfState.initial(K)
    bits_total = np.zeros(K)
    block_errors = 0
    transmissions = 0
    scheduled_user_rbs = 0
    max_power_err = 0.0
    max_sched_corr = 0.0
    max_conservation = 0.0
    last_scheduled = np.full(K, -1, dtype=np.int64)
    max_gap = 0
    schedule_trace: list = []
    link_gain_trace: list = []

    block: _FadingBlock | None = None
    prev_h = None
    prev_gram = None
    prev_norms = None

    for t in range(cfg.num_slots):
        try:
            displacement = np.zeros((K, 2))
            for k in range(K):
                moved = step_mobility(users[k], dt, scenario, mob_rng)
                displacement[k, 0] = moved.x_m - users[k].x_m
                displacement[k, 1] = moved.y_m - users[k].y_m
                users[k] = moved

            if t % coherence == 0:
                block_index = t // coherence
                block_seed = int(
                    np.random.SeedSequence(
                        seed_root, spawn_key=(cfg.run_index, FADING_STREAM, block_index)
                    ).generate_state(1, np.uint64)[0]
                )
                positions = [(u.x_m, u.y_m) for u in users]
                block = _FadingBlock(scenario, positions, block_seed)
            else:
                block.advance(displacement, lam_c)

            h_now = block.synthesize()
            gram_now, norms_now = _grams(h_now)

            if cfg.record_link_gains and t % coherence == 0:
                avg_db = 10.0 * np.log10(norms_now.mean(axis=0))  # (K, L)
                for k in range(K):
                    for l in range(L):
                        link_gain_trace.append((t, k, l, float(avg_db[k, l])))

            if cfg.perfect_csi or prev_h is None:
                gram_csi, norms_csi = gram_now, norms_now
                gram_mix = gram_now
            else:
                gram_csi, norms_csi = prev_gram, prev_norms
                gram_mix = _mixed_grams(h_now, prev_h)

            serving = _serving_masks(norms_csi.mean(axis=0), cluster)
            corr = pairwise_correlation_grid(gram_csi, norms_csi, serving)
            slot_sched = greedy_schedule(
                gram_csi, norms_csi, corr, serving, tx_power_w, N, noise_w,
                pf.avg_throughput_bps, table, band.rb_bandwidth_hz,
                cfg.correlation_threshold,
            )
            sel = slot_sched.scheduled
            powers = slot_sched.powers_w

            est_w, est_i = link_budgets_grid(gram_csi, norms_csi, powers, sel, noise_w)
            with np.errstate(divide="ignore", invalid="ignore"):
                est_db = np.where(sel, 10.0 * np.log10(est_w / (est_i + noise_w)), -np.inf)
            midx = np.searchsorted(thr, est_db, side="right")
            tx = (midx >= 1) & sel

            real_w, real_i = link_budgets_grid(gram_mix, norms_csi, powers * tx[:, :, None], tx, noise_w)
            with np.errstate(divide="ignore", invalid="ignore"):
                real_db = np.where(tx, 10.0 * np.log10(real_w / (real_i + noise_w)), -np.inf)
            chosen_thr = thr[np.maximum(midx, 1) - 1]
            success = tx & (real_db >= chosen_thr)
            delivered_eff = np.where(success, eff[np.maximum(midx, 1) - 1], 0.0)

            bits = delivered_eff.sum(axis=0) * band.rb_bandwidth_hz * dt
            bits_total += bits
            block_errors += int(np.count_nonzero(tx & ~success))
            transmissions += int(np.count_nonzero(tx))
            scheduled_user_rbs += int(np.count_nonzero(sel))

            colsum = powers.sum(axis=1)  # (N, L)
            active_cols = colsum > 0
            if np.any(active_cols):
                err = np.abs(colsum - budget[None, :])
                max_power_err = max(max_power_err, float(err[active_cols].max()))

            pair = sel[:, :, None] & sel[:, None, :]
            kk = np.arange(K)
            pair[:, kk, kk] = False
            if np.any(pair):
                max_sched_corr = max(max_sched_corr, float(corr[pair].max()))

            bound = sel.sum() * table.max_efficiency * band.rb_bandwidth_hz * dt
            if bound > 0:
                max_conservation = max(max_conservation, float(bits.sum() / bound))

            sched_users = sel.any(axis=0)
            for k in np.flatnonzero(sched_users):
                max_gap = max(max_gap, int(t - last_scheduled[k]))
                last_scheduled[k] = t
            if cfg.record_schedule:
                for n, u in np.argwhere(sel):
                    schedule_trace.append((t, int(n), int(u)))

            pf = update_pf(pf, bits, dt)
            prev_h, prev_gram, prev_norms = h_now, gram_now, norms_now
        except (PlacementError, ScenarioError):
            raise
        except Exception as e:  # noqa: BLE001 - re-raise with slot context
            raise SimulationError(f"run {cfg.run_index} ({cfg.mode}) failed at slot {t}: {e}") from e

    if cfg.num_slots > 0 and K > 0:
        max_gap = max(max_gap, int(cfg.num_slots - 1 - last_scheduled.min()))
    throughput = bits_total / (cfg.num_slots * dt) if cfg.num_slots > 0 else np.zeros(K)
    final_positions = np.array([[u.x_m, u.y_m] for u in users]) if users else np.zeros((0, 2))
    return RunMetrics(
        run_index=cfg.run_index,
        mode=cfg.mode,
        num_users=K,
        num_slots=cfg.num_slots,
        slot_duration_s=dt,
        per_user_bits=bits_total,
        per_user_throughput_bps=throughput,
        block_errors=block_errors,
        transmissions=transmissions,
        scheduled_user_rbs=scheduled_user_rbs,
        max_power_error_w=max_power_err,
        max_scheduled_correlation=max_sched_corr,
        max_unscheduled_gap_slots=max_gap,
        max_conservation_ratio=max_conservation,
        initial_positions=initial_positions,
        final_positions=final_positions,
        schedule_trace=schedule_trace,
        link_gain_trace=link_gain_trace,
    )


@dataclass
class CampaignResult:
    """Pooled per-user average throughput samples per serving mode."""

    samples: dict[str, np.ndarray]
    runs: dict[str, list[RunMetrics]]
    num_runs: int
    master_seed: int


def _run_job(args):
    scenario, cfg, table = args
    return run_simulation(scenario, cfg, table)


def run_campaign(
    scenario: Scenario,
    num_runs: int,
    modes,
    master_seed: int,
    workers: int = 1,
    cluster_size: int | None = None,
    perfect_csi: bool = False,
    correlation_threshold: float = DEFAULT_CORRELATION_THRESHOLD,
    mcs_table: McsTable | None = None,
    record_schedule: bool = False,
    record_link_gains: bool = False,
    progress=None,
) -> CampaignResult:
    """Paired campaign: run r uses identical seeds in every mode.

    Results are pooled in (mode, run) order, so the output is independent
    of the worker count.
    """
    if num_runs < 1:
        raise ScenarioError("num_runs must be >= 1")
    jobs = []
    for mode in modes:
        for r in range(num_runs):
            cfg = RunConfig(
                run_index=r,
                rng_seed=master_seed,
                num_slots=scenario.num_slots,
                mode=mode,
                cluster_size=cluster_size,
                perfect_csi=perfect_csi,
                correlation_threshold=correlation_threshold,
                record_schedule=record_schedule,
                record_link_gains=record_link_gains,
            )
            jobs.append((scenario, cfg, mcs_table))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_job(job))
            if progress:
                print(
                    f"run {job[1].run_index} mode {job[1].mode} done",
                    file=sys.stderr,
                )

    samples: dict[str, np.ndarray] = {}
    runs: dict[str, list[RunMetrics]] = {}
    i = 0
    for mode in modes:
        mode_runs = results[i : i + num_runs]
        i += num_runs
        runs[mode] = mode_runs
        samples[mode] = np.concatenate([m.per_user_throughput_bps for m in mode_runs])
    if progress and workers > 1:
        print(f"{len(jobs)} runs complete", file=sys.stderr)
    return CampaignResult(samples=samples, runs=runs, num_runs=num_runs, master_seed=master_seed)
