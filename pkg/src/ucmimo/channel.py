"""Synthetic geometry-based radio channel.

Replaces ray tracing with a log-distance path loss (LOS/NLOS split decided by
building occlusion) plus a small set of scattered paths per link. A channel
vector for one (user, base station, resource block) is the phasor sum of the
paths, each carrying a delay phase at the RB center frequency and a planar
array steering vector at its departure angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import AntennaPanel, BaseStation, Scenario

SPEED_OF_LIGHT = 299792458.0
USER_HEIGHT_M = 1.5

# Scattered departure elevations jitter around the direct ray by this much.
SCATTER_ELEVATION_STD_RAD = math.radians(3.0)


@dataclass(frozen=True)
class PathSet:
    """Propagation paths of one link, sorted by increasing delay.

    ``gains`` are complex amplitude gains (dimensionless). ``azimuth_aoa_rad``
    is the arrival azimuth at the user, which drives the phase advance under
    user motion.
    """

    delays_s: np.ndarray
    gains: np.ndarray
    azimuth_aod_rad: np.ndarray
    elevation_aod_rad: np.ndarray
    azimuth_aoa_rad: np.ndarray
    los: bool

    def __len__(self) -> int:
        return len(self.delays_s)


@dataclass(frozen=True)
class ChannelVector:
    """Complex coefficients between one user and all elements of one BS."""

    coefficients: np.ndarray
    bs_id: int
    rb_index: int
    user_id: int = -1

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.coefficients, self.coefficients).real)


def wavelength(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz


def _segment_hits_box(p0, p1, rect, height) -> bool:
    """Does the open segment p0->p1 pass through the box interior?

    Box is rect x [0, height]; p0/p1 are 3-vectors. Uses the slab method and
    requires a positive-length overlap strictly inside the segment.
    """
    lo = np.array([rect.x_min, rect.y_min, 0.0])
    hi = np.array([rect.x_max, rect.y_max, height])
    d = p1 - p0
    t_enter, t_exit = 0.0, 1.0
    for ax in range(3):
        if abs(d[ax]) < 1e-12:
            if p0[ax] <= lo[ax] or p0[ax] >= hi[ax]:
                return False
            continue
        t0 = (lo[ax] - p0[ax]) / d[ax]
        t1 = (hi[ax] - p0[ax]) / d[ax]
        if t0 > t1:
            t0, t1 = t1, t0
        t_enter = max(t_enter, t0)
        t_exit = min(t_exit, t1)
        if t_enter >= t_exit:
            return False
    return t_exit - t_enter > 1e-12


def is_los(scenario: Scenario, bs: BaseStation, user_position) -> bool:
    """True iff no building blocks the BS antenna to user (1.5 m) segment."""
    p0 = np.array([bs.x_m, bs.y_m, bs.height_m])
    p1 = np.array([user_position[0], user_position[1], USER_HEIGHT_M])
    for b in scenario.buildings:
        if _segment_hits_box(p0, p1, b.footprint, b.height_m):
            return False
    return True


def link_distance_m(bs: BaseStation, user_position) -> float:
    dx = user_position[0] - bs.x_m
    dy = user_position[1] - bs.y_m
    dz = USER_HEIGHT_M - bs.height_m
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def path_loss(scenario: Scenario, bs: BaseStation, user_position, los: bool) -> float:
    """Log-distance loss in dB, anchored at the 1 m free-space reference."""
    cfg = scenario.channel
    d = max(link_distance_m(bs, user_position), 1.0)
    f = scenario.band.center_frequency_hz
    ref_1m = 20.0 * math.log10(4.0 * math.pi * f / SPEED_OF_LIGHT)
    if los:
        return ref_1m + 10.0 * cfg.los_exponent * math.log10(d)
    return ref_1m + 10.0 * cfg.nlos_exponent * math.log10(d) + cfg.nlos_excess_db(bs.kind)


def _panel_element_positions(panel: AntennaPanel, frequency_hz: float) -> np.ndarray:
    """(M, 3) element offsets in meters, rotated into the global frame.

    Local frame: boresight +x, columns along y, rows stacked along z. The
    global orientation applies the downtilt about y, then the boresight
    azimuth about z.
    """
    d = panel.element_spacing_wavelengths * wavelength(frequency_hz)
    r = np.arange(panel.rows) - (panel.rows - 1) / 2.0
    c = np.arange(panel.cols) - (panel.cols - 1) / 2.0
    cc, rr = np.meshgrid(c, r)  # row-major over (rows, cols)
    local = np.stack(
        [np.zeros(panel.num_elements), (cc * d).ravel(), (rr * d).ravel()], axis=1
    )
    tilt = math.radians(panel.downtilt_deg)
    az = math.radians(panel.azimuth_boresight_deg)
    rot_y = np.array(
        [[math.cos(tilt), 0.0, math.sin(tilt)], [0.0, 1.0, 0.0], [-math.sin(tilt), 0.0, math.cos(tilt)]]
    )
    rot_z = np.array(
        [[math.cos(az), -math.sin(az), 0.0], [math.sin(az), math.cos(az), 0.0], [0.0, 0.0, 1.0]]
    )
    return local @ rot_y.T @ rot_z.T


def _unit_direction(azimuth, elevation):
    ce = np.cos(elevation)
    return np.stack(
        [ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation) * np.ones_like(azimuth)],
        axis=-1,
    )


def steering_vector(panel: AntennaPanel, azimuth: float, elevation: float, frequency_hz: float) -> np.ndarray:
    """Unit-modulus phase vector of the panel toward (azimuth, elevation).

    Angles are global: azimuth counterclockwise from +x, elevation positive
    upward. At the panel boresight every entry equals 1+0j.
    """
    pos = _panel_element_positions(panel, frequency_hz)
    k = 2.0 * math.pi / wavelength(frequency_hz)
    phase = k * pos @ _unit_direction(azimuth, elevation)
    return np.exp(1j * phase)


def bs_steering_vector(bs: BaseStation, azimuth, elevation, frequency_hz: float) -> np.ndarray:
    """Steering vector across all panels of the BS, concatenated in order."""
    return np.concatenate(
        [steering_vector(p, azimuth, elevation, frequency_hz) for p in bs.panels]
    )


def _bs_steering_many(bs: BaseStation, azimuths, elevations, frequency_hz: float) -> np.ndarray:
    """(P, M) steering vectors for P directions at once."""
    k = 2.0 * math.pi / wavelength(frequency_hz)
    u = _unit_direction(np.asarray(azimuths), np.asarray(elevations))  # (P, 3)
    blocks = []
    for p in bs.panels:
        pos = _panel_element_positions(p, frequency_hz)  # (M_p, 3)
        blocks.append(np.exp(1j * k * (u @ pos.T)))
    return np.concatenate(blocks, axis=1)


def generate_paths(scenario: Scenario, bs: BaseStation, user_position, rng_seed: int) -> PathSet:
    """Draw the multipath set of one link.

    Deterministic in (rng_seed, bs.id, user position quantized to the
    configured grid): users inside the same quantization cell see the same
    scatterers, which keeps fading spatially consistent. A LOS link carries a
    deterministic specular path holding K/(K+1) of the power (all of it when
    no scattered paths are configured); the remainder is spread over
    ``num_scatter_paths`` complex Gaussian arrivals with exponentially
    distributed excess delays.
    """
    cfg = scenario.channel
    los = is_los(scenario, bs, user_position)
    pl_db = path_loss(scenario, bs, user_position, los)
    g = 10.0 ** (-pl_db / 10.0)

    q = cfg.path_seed_quantization_m
    qx = max(0, int(math.floor((user_position[0] - scenario.bounds.x_min) / q)))
    qy = max(0, int(math.floor((user_position[1] - scenario.bounds.y_min) / q)))
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(bs.id, qx, qy)))

    dx = user_position[0] - bs.x_m
    dy = user_position[1] - bs.y_m
    d2d = math.hypot(dx, dy)
    az0 = math.atan2(dy, dx)
    el0 = math.atan2(USER_HEIGHT_M - bs.height_m, d2d)
    aoa0 = math.atan2(-dy, -dx)
    tau0 = max(link_distance_m(bs, user_position), 1.0) / SPEED_OF_LIGHT

    n_s = cfg.num_scatter_paths
    delays, gains, aods_az, aods_el, aoas = [], [], [], [], []
    if los:
        spec_power = g if n_s == 0 else g * cfg.rician_k_factor / (cfg.rician_k_factor + 1.0)
        scatter_power = g - spec_power
        delays.append(tau0)
        gains.append(math.sqrt(spec_power) + 0.0j)
        aods_az.append(az0)
        aods_el.append(el0)
        aoas.append(aoa0)
    else:
        scatter_power = g
        if n_s == 0:
            # Degenerate config: keep the link alive with one deterministic path.
            delays.append(tau0)
            gains.append(math.sqrt(g) + 0.0j)
            aods_az.append(az0)
            aods_el.append(el0)
            aoas.append(aoa0)
            scatter_power = 0.0

    if n_s > 0 and scatter_power > 0:
        per_path = scatter_power / n_s
        amp = math.sqrt(per_path / 2.0)
        cg = amp * (rng.standard_normal(n_s) + 1j * rng.standard_normal(n_s))
        excess = rng.exponential(cfg.rms_delay_spread_s, size=n_s)
        delays.extend(tau0 + excess)
        gains.extend(cg)
        aods_az.extend(rng.uniform(0.0, 2.0 * math.pi, size=n_s))
        el = np.clip(
            el0 + rng.normal(0.0, SCATTER_ELEVATION_STD_RAD, size=n_s),
            -math.pi / 2,
            math.pi / 2,
        )
        aods_el.extend(el)
        aoas.extend(rng.uniform(0.0, 2.0 * math.pi, size=n_s))

    order = np.argsort(np.asarray(delays), kind="stable")
    return PathSet(
        delays_s=np.asarray(delays, dtype=float)[order],
        gains=np.asarray(gains, dtype=complex)[order],
        azimuth_aod_rad=np.asarray(aods_az, dtype=float)[order],
        elevation_aod_rad=np.asarray(aods_el, dtype=float)[order],
        azimuth_aoa_rad=np.asarray(aoas, dtype=float)[order],
        los=los,
    )


def channel_vector(scenario: Scenario, paths: PathSet, bs: BaseStation, rb_index: int, user_id: int = -1) -> ChannelVector:
    """Phasor-sum the paths into the per-RB coefficient vector.

    Coefficients are flat within one RB; RBs differ only through the delay
    phase at each RB center frequency.
    """
    n_rb = scenario.band.num_resource_blocks
    if not 0 <= rb_index < n_rb:
        raise ValueError(f"rb_index {rb_index} outside 0..{n_rb - 1}")
    f_n = scenario.band.rb_center_frequencies()[rb_index]
    steer = _bs_steering_many(bs, paths.azimuth_aod_rad, paths.elevation_aod_rad,
                              scenario.band.center_frequency_hz)  # (P, M)
    phase = np.exp(-2j * math.pi * f_n * paths.delays_s)
    coeff = (paths.gains * phase) @ steer
    return ChannelVector(coefficients=coeff, bs_id=bs.id, rb_index=rb_index, user_id=user_id)


def advance_paths(paths: PathSet, displacement, frequency_hz: float) -> PathSet:
    """Rotate each path's phase for a small user displacement (dx, dy).

    Motion toward a path's arrival direction shortens it, advancing the
    phase by k * (d . u_aoa). Valid while the geometry itself is frozen,
    i.e. within one coherence block.
    """
    k = 2.0 * math.pi / wavelength(frequency_hz)
    step = displacement[0] * np.cos(paths.azimuth_aoa_rad) + displacement[1] * np.sin(paths.azimuth_aoa_rad)
    return PathSet(
        delays_s=paths.delays_s,
        gains=paths.gains * np.exp(1j * k * step),
        azimuth_aod_rad=paths.azimuth_aod_rad,
        elevation_aod_rad=paths.elevation_aod_rad,
        azimuth_aoa_rad=paths.azimuth_aoa_rad,
        los=paths.los,
    )
