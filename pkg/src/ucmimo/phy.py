"""Link-level math: MRT precoding, power split, coherent sums, SINR.

Everything here works in watts and linear gains; dB/dBm conversions belong to
the I/O layers. Channel vectors and precoder weights are plain complex numpy
arrays; one entry per BS antenna element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeInterferenceError, ZeroChannelError
from .scenario import BandPlan

BOLTZMANN_J_PER_K = 1.380649e-23
REFERENCE_TEMP_K = 290.0

# Relative guard for the interference subtraction in the difference form.
_NEG_INTERFERENCE_GUARD = 1e-9


@dataclass(frozen=True)
class Precoder:
    weights: np.ndarray
    bs_id: int = -1
    rb_index: int = -1
    user_id: int = -1


@dataclass(frozen=True)
class LinkBudget:
    wanted_w: float
    interference_w: float
    noise_w: float

    @property
    def sinr(self) -> float:
        return self.wanted_w / (self.interference_w + self.noise_w)

    @property
    def sinr_db(self) -> float:
        return 10.0 * math.log10(self.sinr)


def mrt_precoder(h: np.ndarray) -> np.ndarray:
    """Conjugate-matched unit-norm weights, w = h / ||h||.

    Raises ZeroChannelError for an all-zero channel; the caller must drop
    that BS from the serving set instead.
    """
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ZeroChannelError("cannot precode a zero channel vector")
    return np.asarray(h, dtype=complex) / norm


def allocate_power(h_norms_sq: np.ndarray, tx_power_w: np.ndarray, num_resource_blocks: int) -> np.ndarray:
    """Split each BS's per-RB budget over the scheduled users by channel gain.

    ``h_norms_sq`` is (K_n, L): squared channel norms of the scheduled users
    toward each BS, with zeros for user/BS pairs outside the serving set.
    Returns (K_n, L) powers in watts. Per BS the column sums to
    tx_power_w / num_resource_blocks; a BS with an all-zero column stays
    silent on this RB.
    """
    norms = np.asarray(h_norms_sq, dtype=float)
    if norms.ndim != 2 or norms.shape[0] == 0:
        raise ValueError("h_norms_sq must be a nonempty (K_n, L) array")
    if np.any(norms < 0):
        raise ValueError("channel norms must be nonnegative")
    budget = np.asarray(tx_power_w, dtype=float) / float(num_resource_blocks)
    denom = norms.sum(axis=0)
    share = np.divide(norms, denom, out=np.zeros_like(norms), where=denom > 0)
    return share * budget


def received_power(h_per_bs, w_per_bs, p_per_bs, serving_mask=None) -> float:
    """Coherent wanted power at one user on one RB.

    Sums sqrt(p_l) * h_l^H w_l over the serving BSs as complex amplitudes,
    then squares the magnitude. ``h_per_bs`` and ``w_per_bs`` are sequences
    of per-BS vectors; ``p_per_bs`` the per-BS transmit powers in watts.
    """
    p = np.asarray(p_per_bs, dtype=float)
    amp = 0.0 + 0.0j
    for l, (h, w) in enumerate(zip(h_per_bs, w_per_bs)):
        if serving_mask is not None and not serving_mask[l]:
            continue
        if p[l] == 0.0:
            continue
        amp += math.sqrt(p[l]) * np.vdot(h, w)
    return float(abs(amp) ** 2)


def interference_power(
    k,
    scheduled,
    h_k_per_bs,
    precoders,
    powers,
    serving_masks,
) -> float:
    """Interference at user k from every co-scheduled transmission.

    Evaluates the same coherent sum as received_power for every scheduled
    user i (using user k's channels against user i's precoders and powers),
    totals them and subtracts user k's own wanted power. Tiny negative
    residues from the subtraction are clamped; anything beyond the guard
    raises NegativeInterferenceError.

    Parameters are mappings keyed by user id: ``precoders[i]`` and
    ``powers[i]`` are the per-BS precoders/powers of user i, and
    ``serving_masks[i]`` the per-BS serving flags.
    """
    if k not in scheduled:
        raise ValueError(f"user {k} is not in the scheduled set")
    total = 0.0
    wanted = 0.0
    for i in scheduled:
        term = received_power(h_k_per_bs, precoders[i], powers[i], serving_masks[i])
        total += term
        if i == k:
            wanted = term
    interference = total - wanted
    if interference < 0.0:
        if interference >= -_NEG_INTERFERENCE_GUARD * max(total, 1e-300):
            return 0.0
        raise NegativeInterferenceError(
            f"interference {interference} at user {k} below the floating-point guard"
        )
    return interference


def link_budgets_grid(gram, norms_sq, powers_w, tx_mask, noise_w: float):
    """Vectorized wanted/interference powers for a whole slot.

    ``gram[l, n, k, j]`` is h_kln^H g_jln where g_j is the CSI vector user
    j's precoder is matched to (so the diagonal holds the wanted-signal
    inner products). ``norms_sq`` is (N, K, L) with the squared norms of
    those CSI vectors, ``powers_w`` is (N, K, L) and ``tx_mask`` (N, K)
    flags who actually transmits. Returns (wanted, interference), each
    (N, K) in watts. Interference sums the cross terms directly instead of
    subtracting the wanted power, which avoids cancellation.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(norms_sq > 0, np.sqrt(powers_w / norms_sq), 0.0)
    cross = np.einsum("lnkj,njl->nkj", gram, coef)
    cross = cross * tx_mask[:, None, :]
    kk = np.arange(cross.shape[1])
    wanted = np.abs(cross[:, kk, kk]) ** 2
    p2 = np.abs(cross) ** 2
    p2[:, kk, kk] = 0.0
    interference = p2.sum(axis=2)
    return wanted, interference


def noise_power(band: BandPlan, noise_figure_db: float) -> float:
    """Thermal noise over one RB at 290 K, scaled by the receiver noise figure."""
    if band.rb_bandwidth_hz <= 0:
        raise ValueError("rb_bandwidth_hz must be > 0")
    return (
        BOLTZMANN_J_PER_K
        * REFERENCE_TEMP_K
        * band.rb_bandwidth_hz
        * 10.0 ** (noise_figure_db / 10.0)
    )


def sinr(wanted_w: float, interference_w: float, noise_w: float) -> LinkBudget:
    if wanted_w < 0 or interference_w < 0 or noise_w <= 0:
        raise ValueError("budget components must be nonnegative (noise positive)")
    return LinkBudget(wanted_w=wanted_w, interference_w=interference_w, noise_w=noise_w)
