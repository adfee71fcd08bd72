"""Centralized per-RB scheduling that maximizes a proportional-fair sum.

Each resource block is filled greedily: starting from the single user with
the best rate/average ratio, users are added while the PF sum keeps rising
and every pair inside the block stays below the channel-correlation
threshold. Transmit powers follow the gain-proportional split and precoders
are conjugate-matched, so the scheduler only needs channel Gram matrices,
never the raw element-domain vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ZeroChannelError
from .mcs import McsTable
from .scenario import BandPlan

PF_DEFAULT_HORIZON_SLOTS = 100
PF_FLOOR_BPS = 1e3
DEFAULT_CORRELATION_THRESHOLD = 0.5


@dataclass(frozen=True)
class PfState:
    """Exponential moving average of per-user throughput, floored away from 0."""

    avg_throughput_bps: np.ndarray
    ema_horizon_slots: int = PF_DEFAULT_HORIZON_SLOTS
    floor_bps: float = PF_FLOOR_BPS

    @classmethod
    def initial(cls, num_users: int, ema_horizon_slots: int = PF_DEFAULT_HORIZON_SLOTS,
                floor_bps: float = PF_FLOOR_BPS) -> "PfState":
        return cls(np.full(num_users, floor_bps, dtype=float), ema_horizon_slots, floor_bps)


def update_pf(pf: PfState, realized_bits, slot_duration_s: float) -> PfState:
    """One EMA step with the rates realized this slot."""
    bits = np.asarray(realized_bits, dtype=float)
    if np.any(bits < 0):
        raise ValueError("realized bits must be nonnegative")
    alpha = 1.0 / pf.ema_horizon_slots
    rate = bits / slot_duration_s
    avg = np.maximum((1.0 - alpha) * pf.avg_throughput_bps + alpha * rate, pf.floor_bps)
    return PfState(avg, pf.ema_horizon_slots, pf.floor_bps)


def channel_correlation(h_a: np.ndarray, h_b: np.ndarray) -> float:
    """Normalized inner product |h_a^H h_b| / (||h_a|| ||h_b||), in [0, 1]."""
    na = np.linalg.norm(h_a)
    nb = np.linalg.norm(h_b)
    if na == 0.0 or nb == 0.0:
        raise ZeroChannelError("correlation of a zero channel vector is undefined")
    return float(abs(np.vdot(h_a, h_b)) / (na * nb))


def aggregate_correlation(h_a_per_bs, h_b_per_bs, bs_mask) -> float:
    """Gain-weighted correlation across a set of base stations.

    Weighting each BS's correlation by the product of the two channel norms
    reduces to sum(|h_a^H h_b|) / sum(||h_a|| ||h_b||) over the masked BSs.
    """
    num = 0.0
    den = 0.0
    for l, (ha, hb) in enumerate(zip(h_a_per_bs, h_b_per_bs)):
        if not bs_mask[l]:
            continue
        num += abs(np.vdot(ha, hb))
        den += np.linalg.norm(ha) * np.linalg.norm(hb)
    if den == 0.0:
        raise ZeroChannelError("correlation of zero channels is undefined")
    return float(num / den)


def pairwise_correlation_grid(gram: np.ndarray, norms_sq: np.ndarray, serving: np.ndarray) -> np.ndarray:
    """(N, K, K) aggregated correlation for every user pair on every RB.

    ``gram[l, n, k, i]`` is h_k^H h_i at BS l; ``norms_sq`` is (N, K, L);
    ``serving`` is (K, L). Each pair aggregates over the union of the two
    serving sets.
    """
    union = serving[:, None, :] | serving[None, :, :]  # (K, K, L)
    num = np.einsum("lnki,kil->nki", np.abs(gram), union.astype(float))
    root = np.sqrt(norms_sq)  # (N, K, L)
    den = np.einsum("nkl,nil,kil->nki", root, root, union.astype(float))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(den > 0, num / den, 0.0)
    return corr


@dataclass(frozen=True)
class SlotSchedule:
    """Allocation of every RB in one slot."""

    scheduled: np.ndarray      # (N, K) bool
    members: np.ndarray        # (N, K) int, selection order per RB, -1 padded
    powers_w: np.ndarray       # (N, K, L)
    objective: np.ndarray      # (N,)

    def member_list(self, rb: int) -> list[int]:
        row = self.members[rb]
        return [int(u) for u in row[row >= 0]]


def greedy_schedule(
    gram: np.ndarray,
    norms_sq: np.ndarray,
    corr: np.ndarray,
    serving: np.ndarray,
    tx_power_w: np.ndarray,
    num_resource_blocks: int,
    noise_w: float,
    pf_avg_bps: np.ndarray,
    table: McsTable,
    rb_bandwidth_hz: float,
    correlation_threshold: float = DEFAULT_CORRELATION_THRESHOLD,
) -> SlotSchedule:
    """Greedy PF allocation of ``gram.shape[1]`` resource blocks at once.

    All RBs advance in lockstep: at step s every still-active RB holds s
    users. The first user of an RB is seeded unconditionally (full-buffer
    traffic assigns every RB), later additions must strictly raise the PF
    sum and pass the correlation gate against every member.
    """
    L, N, K, _ = gram.shape
    budget = np.asarray(tx_power_w, dtype=float) / float(num_resource_blocks)

    sel = np.zeros((N, K), dtype=bool)
    members = np.full((N, K), -1, dtype=np.int64)
    gate = np.ones((N, K), dtype=bool)
    denom = np.zeros((N, L))
    obj = np.zeros(N)
    active = np.ones(N, dtype=bool)
    if K == 0:
        return SlotSchedule(sel, members, np.zeros((N, K, L)), obj)

    # T[l, n, k, j]: source-side amplitude h_k^H w_j * ||h_j|| with the
    # serving mask folded in; scaling by sqrt(budget/denominator) yields the
    # coherent amplitude contribution of BS l.
    T = gram * serving.T[:, None, None, :]
    norm_serv = norms_sq * serving[None, :, :]  # (N, K, L)
    eff0 = np.concatenate(([0.0], table.efficiencies))
    thr = table.thresholds_db

    s = 0
    while np.any(active):
        an = np.flatnonzero(active)
        cand_ok = ~sel[an] & gate[an]  # (A, K)
        has_cand = cand_ok.any(axis=1)
        if not has_cand.any():
            active[an] = False
            break
        an = an[has_cand]
        cand_ok = cand_ok[has_cand]
        A = len(an)

        denom_new = denom[an][:, None, :] + norm_serv[an]  # (A, K, L)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(denom_new > 0, np.sqrt(budget / denom_new), 0.0)

        wanted_c = np.einsum("acl,acl->ac", norm_serv[an], scale)**2  # (A, K)
        if s > 0:
            mi = members[an, :s]  # (A, s)
            TG = np.stack(
                [T[l][an[:, None, None], mi[:, :, None], mi[:, None, :]] for l in range(L)],
                axis=-1,
            )  # (A, s, s, L)
            Tmc = np.stack(
                [T[l][an[:, None, None], mi[:, :, None], np.arange(K)[None, None, :]] for l in range(L)],
                axis=-1,
            )  # (A, s, K, L): victim member v, source candidate c
            Tcm = np.stack(
                [T[l][an[:, None, None], np.arange(K)[None, :, None], mi[:, None, :]] for l in range(L)],
                axis=-1,
            )  # (A, K, s, L): victim candidate c, source member j
            amp_mm = np.einsum("avjl,acl->acvj", TG, scale)   # (A, K, s, s)
            amp_mc = np.einsum("avcl,acl->acv", Tmc, scale)   # (A, K, s)
            amp_cm = np.einsum("acjl,acl->acj", Tcm, scale)   # (A, K, s)

            pow_mm = np.abs(amp_mm) ** 2
            v_ix = np.arange(s)
            wanted_m = pow_mm[:, :, v_ix, v_ix]               # (A, K, s)
            pow_mm[:, :, v_ix, v_ix] = 0.0
            interf_m = pow_mm.sum(axis=3) + np.abs(amp_mc) ** 2
            interf_c = (np.abs(amp_cm) ** 2).sum(axis=2)      # (A, K)

            with np.errstate(divide="ignore"):
                sinr_m_db = 10.0 * np.log10(wanted_m / (interf_m + noise_w))
                sinr_c_db = 10.0 * np.log10(wanted_c / (interf_c + noise_w))
            rate_m = eff0[np.searchsorted(thr, sinr_m_db, side="right")] * rb_bandwidth_hz
            rate_c = eff0[np.searchsorted(thr, sinr_c_db, side="right")] * rb_bandwidth_hz
            obj_new = (rate_m / pf_avg_bps[mi][:, None, :]).sum(axis=2) + rate_c / pf_avg_bps[None, :]
        else:
            with np.errstate(divide="ignore"):
                sinr_c_db = 10.0 * np.log10(wanted_c / noise_w)
            rate_c = eff0[np.searchsorted(thr, sinr_c_db, side="right")] * rb_bandwidth_hz
            obj_new = rate_c / pf_avg_bps[None, :]

        obj_new = np.where(cand_ok, obj_new, -np.inf)
        best = np.argmax(obj_new, axis=1)  # ties resolve to the lowest user id
        best_obj = obj_new[np.arange(A), best]
        accept = best_obj > obj[an] if s > 0 else np.isfinite(best_obj)

        rows = an[accept]
        users = best[accept]
        sel[rows, users] = True
        members[rows, s] = users
        denom[rows] += norm_serv[rows, users, :]
        obj[rows] = best_obj[accept]
        for r, u in zip(rows, users):
            gate[r] &= corr[r, :, u] <= correlation_threshold
        active[an[~accept]] = False
        s += 1
        if s >= K:
            break

    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(denom[:, None, :] > 0, norm_serv / denom[:, None, :], 0.0)
    powers = share * budget * sel[:, :, None]
    return SlotSchedule(sel, members, powers, obj)


@dataclass(frozen=True)
class RbAllocation:
    """Scheduling outcome of a single resource block."""

    rb_index: int
    user_ids: tuple[int, ...]        # in selection order
    powers_w: np.ndarray             # (K_n, L), rows follow user_ids
    precoder_weights: tuple          # per user: tuple of per-BS weight vectors (None off-set)
    estimated_sinr_db: np.ndarray    # (K_n,)
    objective: float


def schedule_rb(
    rb_index: int,
    channels_per_bs,
    serving: np.ndarray,
    pf: PfState,
    band: BandPlan,
    table: McsTable,
    tx_power_w,
    noise_w: float,
    correlation_threshold: float = DEFAULT_CORRELATION_THRESHOLD,
) -> RbAllocation:
    """Schedule one RB from raw per-BS channel matrices.

    ``channels_per_bs[l]`` is (K, M_l) with user rows for this RB. Builds the
    Gram/correlation inputs and runs the same greedy core as the full-slot
    path, then materializes powers and MRT precoders for the selected users.
    """
    from .phy import link_budgets_grid, mrt_precoder

    K = channels_per_bs[0].shape[0]
    L = len(channels_per_bs)
    gram = np.stack(
        [(np.conj(h) @ h.T).reshape(1, K, K) for h in channels_per_bs], axis=0
    )  # (L, 1, K, K) with gram[l,0,k,i] = h_k^H h_i
    norms = np.stack([np.real(np.diagonal(gram[l, 0])) for l in range(L)], axis=-1)[None]  # (1, K, L)
    corr = pairwise_correlation_grid(gram, norms, serving)
    slot = greedy_schedule(
        gram, norms, corr, serving, np.asarray(tx_power_w, dtype=float),
        band.num_resource_blocks, noise_w, pf.avg_throughput_bps, table,
        band.rb_bandwidth_hz, correlation_threshold,
    )
    order = slot.member_list(0)
    wanted, interf = link_budgets_grid(gram, norms, slot.powers_w, slot.scheduled, noise_w)
    est_db = np.array(
        [10.0 * math.log10(wanted[0, u] / (interf[0, u] + noise_w)) for u in order]
    )
    precoders = []
    for u in order:
        per_bs = tuple(
            mrt_precoder(channels_per_bs[l][u]) if serving[u, l] else None for l in range(L)
        )
        precoders.append(per_bs)
    return RbAllocation(
        rb_index=rb_index,
        user_ids=tuple(order),
        powers_w=slot.powers_w[0, order, :],
        precoder_weights=tuple(precoders),
        estimated_sinr_db=est_db,
        objective=float(slot.objective[0]),
    )
