"""Scenario definition: band plan, base stations, buildings and run parameters.

A scenario is loaded from a YAML document whose keys carry explicit units
(``_hz``, ``_m``, ``_dbm``, ``_deg``, ``_s``, ``_mps``).  The dataclasses keep
the file units; conversions to SI/linear happen where the physics needs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .errors import ScenarioError

SERVING_MODES = ("network_centric", "user_centric", "cluster")

MACRO = "macro"
MICRO = "micro"


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle on the ground plane, in meters."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains_interior(self, x, y):
        """Strictly inside; boundary points do not count."""
        return (self.x_min < x) & (x < self.x_max) & (self.y_min < y) & (y < self.y_max)

    def contains_closed(self, x, y):
        return (self.x_min <= x) & (x <= self.x_max) & (self.y_min <= y) & (y <= self.y_max)

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.x_min <= other.x_min
            and self.y_min <= other.y_min
            and other.x_max <= self.x_max
            and other.y_max <= self.y_max
        )


@dataclass(frozen=True)
class BandPlan:
    """OFDMA band layout; the resource block is the scheduling unit."""

    center_frequency_hz: float
    bandwidth_hz: float
    num_resource_blocks: int
    rb_bandwidth_hz: float
    slot_duration_s: float

    def rb_center_frequencies(self) -> np.ndarray:
        """Absolute center frequency of every resource block, in Hz."""
        n = np.arange(self.num_resource_blocks)
        offset = (n - (self.num_resource_blocks - 1) / 2.0) * self.rb_bandwidth_hz
        return self.center_frequency_hz + offset

    def validate(self):
        for name in ("center_frequency_hz", "bandwidth_hz", "rb_bandwidth_hz", "slot_duration_s"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"band.{name} must be strictly positive")
        if self.num_resource_blocks <= 0:
            raise ScenarioError("band.num_resource_blocks must be strictly positive")
        if self.num_resource_blocks * self.rb_bandwidth_hz > self.bandwidth_hz + 1e-6:
            raise ScenarioError(
                "band: num_resource_blocks * rb_bandwidth_hz exceeds bandwidth_hz"
            )


@dataclass(frozen=True)
class AntennaPanel:
    """Uniform planar array: `rows` vertical by `cols` horizontal elements."""

    rows: int
    cols: int
    element_spacing_wavelengths: float = 0.5
    azimuth_boresight_deg: float = 0.0
    downtilt_deg: float = 0.0

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols

    def validate(self):
        if self.rows < 1 or self.cols < 1:
            raise ScenarioError("panel rows and cols must be >= 1")
        if self.element_spacing_wavelengths <= 0:
            raise ScenarioError("panel element_spacing_wavelengths must be > 0")


@dataclass(frozen=True)
class BaseStation:
    id: int
    kind: str  # "macro" or "micro"
    x_m: float
    y_m: float
    height_m: float
    total_tx_power_dbm: float
    panels: tuple[AntennaPanel, ...]

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m])

    @property
    def num_elements(self) -> int:
        return sum(p.num_elements for p in self.panels)

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watt(self.total_tx_power_dbm)

    def validate(self):
        if self.kind not in (MACRO, MICRO):
            raise ScenarioError(f"base station {self.id}: kind must be macro or micro")
        if self.height_m <= 0:
            raise ScenarioError(f"base station {self.id}: height_m must be > 0")
        if self.tx_power_w <= 0:
            raise ScenarioError(f"base station {self.id}: total tx power must be > 0")
        if not self.panels:
            raise ScenarioError(f"base station {self.id}: needs at least one panel")
        if self.kind == MACRO and len(self.panels) != 1:
            raise ScenarioError(f"base station {self.id}: a macro carries exactly one panel")
        for p in self.panels:
            p.validate()


@dataclass(frozen=True)
class Building:
    """Extruded rectangle: footprint plus a roof height."""

    footprint: Rect
    height_m: float

    def validate(self, bounds: Rect):
        if self.footprint.width <= 0 or self.footprint.height <= 0:
            raise ScenarioError("building footprint must have positive extents")
        if self.height_m <= 0:
            raise ScenarioError("building height_m must be > 0")
        if not bounds.contains_rect(self.footprint):
            raise ScenarioError("building footprint lies outside the scenario bounds")


@dataclass(frozen=True)
class ChannelConfig:
    """Knobs of the synthetic geometry-based multipath model."""

    los_exponent: float = 2.0
    nlos_exponent: float = 3.5
    nlos_excess_db_macro: float = 20.0
    nlos_excess_db_micro: float = 15.0
    num_scatter_paths: int = 8
    rms_delay_spread_s: float = 100e-9
    rician_k_factor: float = 10.0  # linear ratio of specular to total scattered power
    coherence_block_slots: int = 100
    path_seed_quantization_m: float = 1.0

    def nlos_excess_db(self, kind: str) -> float:
        return self.nlos_excess_db_macro if kind == MACRO else self.nlos_excess_db_micro

    def validate(self):
        if self.los_exponent >= self.nlos_exponent:
            raise ScenarioError("channel: los_exponent must be below nlos_exponent")
        if self.num_scatter_paths < 0:
            raise ScenarioError("channel: num_scatter_paths must be >= 0")
        if self.rms_delay_spread_s < 0:
            raise ScenarioError("channel: rms_delay_spread_s must be >= 0")
        if self.rician_k_factor < 0:
            raise ScenarioError("channel: rician_k_factor must be >= 0")
        if self.coherence_block_slots < 1:
            raise ScenarioError("channel: coherence_block_slots must be >= 1")
        if self.path_seed_quantization_m <= 0:
            raise ScenarioError("channel: path_seed_quantization_m must be > 0")


@dataclass(frozen=True)
class Scenario:
    name: str
    band: BandPlan
    bounds: Rect
    base_stations: tuple[BaseStation, ...]
    buildings: tuple[Building, ...]
    num_users: int
    user_speed_mps: float
    num_slots: int
    num_runs: int
    noise_figure_db: float
    serving_mode: str = "user_centric"
    cluster_size: int | None = None
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    @property
    def num_base_stations(self) -> int:
        return len(self.base_stations)

    def effective_cluster_size(self) -> int:
        """Serving cluster size implied by the mode (1, N_bs, or explicit C)."""
        if self.serving_mode == "network_centric":
            return 1
        if self.serving_mode == "user_centric":
            return self.num_base_stations
        return int(self.cluster_size)

    def validate(self) -> "Scenario":
        self.band.validate()
        self.channel.validate()
        if self.bounds.width <= 0 or self.bounds.height <= 0:
            raise ScenarioError("bounds must have positive extents")
        if not self.base_stations:
            raise ScenarioError("at least one base station is required")
        ids = [bs.id for bs in self.base_stations]
        if ids != list(range(len(ids))):
            raise ScenarioError("base station ids must be 0..N_bs-1 in order")
        for bs in self.base_stations:
            bs.validate()
        for b in self.buildings:
            b.validate(self.bounds)
        if self.num_users < 1:
            raise ScenarioError("num_users must be >= 1")
        if self.num_runs < 1:
            raise ScenarioError("num_runs must be >= 1")
        if self.num_slots < 0:
            raise ScenarioError("num_slots must be >= 0")
        if self.user_speed_mps < 0:
            raise ScenarioError("user_speed_mps must be >= 0")
        if self.noise_figure_db < 0:
            raise ScenarioError("noise_figure_db must be >= 0")
        if self.serving_mode not in SERVING_MODES:
            raise ScenarioError(f"serving_mode must be one of {SERVING_MODES}")
        if self.serving_mode == "cluster":
            if self.cluster_size is None:
                raise ScenarioError("cluster mode requires cluster_size")
            if not (1 <= self.cluster_size <= self.num_base_stations):
                raise ScenarioError(
                    f"cluster_size {self.cluster_size} outside 1..{self.num_base_stations}"
                )
        return self


def default_scenario() -> Scenario:
    """Built-in urban deployment; no file needed.

    A 387 m x 552 m Manhattan-style block grid. One elevated macro west of
    center plus five street-level micros along the eastern north-south street
    canyon. Band and power constants follow the 5G mid-band deployment this
    simulator models: 25 MHz at 3.6 GHz split into 69 resource blocks,
    a 46 dBm / 128-element macro at 45 m and 30 dBm / 16-element micros at 6 m.
    """
    band = BandPlan(
        center_frequency_hz=3.6e9,
        bandwidth_hz=25e6,
        num_resource_blocks=69,
        rb_bandwidth_hz=360e3,
        slot_duration_s=0.5e-3,
    )
    bounds = Rect(0.0, 0.0, 387.0, 552.0)

    # 3 x 4 block grid: vertical streets 18 m, horizontal streets 24 m wide.
    block_x = [(18.0, 123.0), (141.0, 246.0), (264.0, 369.0)]
    block_y = [(24.0, 132.0), (156.0, 264.0), (288.0, 396.0), (420.0, 528.0)]
    heights = [27.0, 21.0, 24.0, 30.0, 18.0, 27.0, 24.0, 21.0, 30.0, 24.0, 27.0, 21.0]
    buildings = []
    k = 0
    for y0, y1 in block_y:
        for x0, x1 in block_x:
            buildings.append(Building(Rect(x0, y0, x1, y1), heights[k]))
            k += 1

    macro_panel = AntennaPanel(rows=8, cols=16, azimuth_boresight_deg=0.0, downtilt_deg=6.0)
    # Micros carry two back-to-back 8-element columns firing along the canyon.
    micro_panels = (
        AntennaPanel(rows=8, cols=1, azimuth_boresight_deg=90.0),
        AntennaPanel(rows=8, cols=1, azimuth_boresight_deg=270.0),
    )
    stations = [
        BaseStation(0, MACRO, 70.5, 276.0, 45.0, 46.0, (macro_panel,)),
    ]
    for i, y in enumerate((78.0, 210.0, 276.0, 342.0, 474.0)):
        stations.append(BaseStation(1 + i, MICRO, 255.0, y, 6.0, 30.0, micro_panels))

    return Scenario(
        name="urban-grid-6bs",
        band=band,
        bounds=bounds,
        base_stations=tuple(stations),
        buildings=tuple(buildings),
        num_users=50,
        user_speed_mps=1.5,
        num_slots=1000,
        num_runs=10,
        noise_figure_db=9.0,
        serving_mode="user_centric",
    ).validate()


def _rect_from_dict(d) -> Rect:
    try:
        return Rect(float(d["x_min_m"]), float(d["y_min_m"]), float(d["x_max_m"]), float(d["y_max_m"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"bad rectangle entry: {d!r}") from e


def _rect_to_dict(r: Rect) -> dict:
    return {"x_min_m": r.x_min, "y_min_m": r.y_min, "x_max_m": r.x_max, "y_max_m": r.y_max}


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and validate a Scenario from a parsed YAML document."""
    try:
        band_d = doc["band"]
        band = BandPlan(
            center_frequency_hz=float(band_d["center_frequency_hz"]),
            bandwidth_hz=float(band_d["bandwidth_hz"]),
            num_resource_blocks=int(band_d["num_resource_blocks"]),
            rb_bandwidth_hz=float(band_d["rb_bandwidth_hz"]),
            slot_duration_s=float(band_d["slot_duration_s"]),
        )
        bounds = _rect_from_dict(doc["bounds"])
        stations = []
        for bs_d in doc["base_stations"]:
            panels = tuple(
                AntennaPanel(
                    rows=int(p["rows"]),
                    cols=int(p["cols"]),
                    element_spacing_wavelengths=float(p.get("element_spacing_wavelengths", 0.5)),
                    azimuth_boresight_deg=float(p.get("azimuth_boresight_deg", 0.0)),
                    downtilt_deg=float(p.get("downtilt_deg", 0.0)),
                )
                for p in bs_d["panels"]
            )
            stations.append(
                BaseStation(
                    id=int(bs_d["id"]),
                    kind=str(bs_d["kind"]),
                    x_m=float(bs_d["x_m"]),
                    y_m=float(bs_d["y_m"]),
                    height_m=float(bs_d["height_m"]),
                    total_tx_power_dbm=float(bs_d["total_tx_power_dbm"]),
                    panels=panels,
                )
            )
        buildings = tuple(
            Building(_rect_from_dict(b), float(b["height_m"])) for b in doc.get("buildings", [])
        )
        ch_d = doc.get("channel", {})
        defaults = ChannelConfig()
        channel = ChannelConfig(
            los_exponent=float(ch_d.get("los_exponent", defaults.los_exponent)),
            nlos_exponent=float(ch_d.get("nlos_exponent", defaults.nlos_exponent)),
            nlos_excess_db_macro=float(ch_d.get("nlos_excess_db_macro", defaults.nlos_excess_db_macro)),
            nlos_excess_db_micro=float(ch_d.get("nlos_excess_db_micro", defaults.nlos_excess_db_micro)),
            num_scatter_paths=int(ch_d.get("num_scatter_paths", defaults.num_scatter_paths)),
            rms_delay_spread_s=float(ch_d.get("rms_delay_spread_s", defaults.rms_delay_spread_s)),
            rician_k_factor=float(ch_d.get("rician_k_factor", defaults.rician_k_factor)),
            coherence_block_slots=int(ch_d.get("coherence_block_slots", defaults.coherence_block_slots)),
            path_seed_quantization_m=float(
                ch_d.get("path_seed_quantization_m", defaults.path_seed_quantization_m)
            ),
        )
        cluster = doc.get("cluster_size")
        scenario = Scenario(
            name=str(doc.get("name", "unnamed")),
            band=band,
            bounds=bounds,
            base_stations=tuple(stations),
            buildings=buildings,
            num_users=int(doc["num_users"]),
            user_speed_mps=float(doc["user_speed_mps"]),
            num_slots=int(doc["num_slots"]),
            num_runs=int(doc["num_runs"]),
            noise_figure_db=float(doc["noise_figure_db"]),
            serving_mode=str(doc.get("serving_mode", "user_centric")),
            cluster_size=None if cluster is None else int(cluster),
            channel=channel,
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"malformed scenario document: {e}") from e
    return scenario.validate()


def scenario_to_dict(s: Scenario) -> dict:
    doc = {
        "name": s.name,
        "band": {
            "center_frequency_hz": s.band.center_frequency_hz,
            "bandwidth_hz": s.band.bandwidth_hz,
            "num_resource_blocks": s.band.num_resource_blocks,
            "rb_bandwidth_hz": s.band.rb_bandwidth_hz,
            "slot_duration_s": s.band.slot_duration_s,
        },
        "bounds": _rect_to_dict(s.bounds),
        "base_stations": [
            {
                "id": bs.id,
                "kind": bs.kind,
                "x_m": bs.x_m,
                "y_m": bs.y_m,
                "height_m": bs.height_m,
                "total_tx_power_dbm": bs.total_tx_power_dbm,
                "panels": [asdict(p) for p in bs.panels],
            }
            for bs in s.base_stations
        ],
        "buildings": [
            {**_rect_to_dict(b.footprint), "height_m": b.height_m} for b in s.buildings
        ],
        "num_users": s.num_users,
        "user_speed_mps": s.user_speed_mps,
        "num_slots": s.num_slots,
        "num_runs": s.num_runs,
        "noise_figure_db": s.noise_figure_db,
        "serving_mode": s.serving_mode,
        "channel": asdict(s.channel),
    }
    if s.cluster_size is not None:
        doc["cluster_size"] = s.cluster_size
    return doc


def load_scenario(path) -> Scenario:
    """Parse and validate a YAML scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ScenarioError(f"cannot parse scenario file {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario file {path} does not hold a mapping")
    return scenario_from_dict(doc)


def write_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(s), fh, sort_keys=False)


_PROBE_DIRECTIONS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def _covered(scenario: Scenario, x, y):
    covered = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for b in scenario.buildings:
        covered = np.logical_or(covered, b.footprint.contains_closed(x, y))
    return covered


def is_outdoor(scenario: Scenario, x, y):
    """True where (x, y) is standable outdoor ground.

    Outdoor means the closure of the free area: building interiors are
    indoor, and a point on a wall counts as outdoor only where the wall
    faces free ground (probed a hair away in the compass directions).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    in_bounds = scenario.bounds.contains_closed(x, y)
    if not scenario.buildings:
        return in_bounds
    covered = _covered(scenario, x, y)
    outdoor = np.logical_and(in_bounds, np.logical_not(covered))
    on_wall = np.logical_and(in_bounds, covered)
    if np.any(on_wall):
        delta = 1e-7 * max(scenario.bounds.width, scenario.bounds.height)
        rescued = np.zeros_like(on_wall)
        for dx, dy in _PROBE_DIRECTIONS:
            qx = x + dx * delta
            qy = y + dy * delta
            free = np.logical_and(
                scenario.bounds.contains_closed(qx, qy),
                np.logical_not(_covered(scenario, qx, qy)),
            )
            rescued = np.logical_or(rescued, free)
        outdoor = np.logical_or(outdoor, np.logical_and(on_wall, rescued))
    return outdoor


def outdoor_grid(scenario: Scenario, spacing: float) -> np.ndarray:
    """Regular grid of outdoor positions, row-major (y rows, x within a row).

    Returns an (P, 2) array of [x, y] in meters; outdoor follows the
    standable-ground rule of is_outdoor.
    """
    if spacing <= 0:
        raise ScenarioError("grid spacing must be > 0")
    b = scenario.bounds
    nx = int(math.floor(b.width / spacing + 1e-9)) + 1
    ny = int(math.floor(b.height / spacing + 1e-9)) + 1
    xs = b.x_min + spacing * np.arange(nx)
    ys = b.y_min + spacing * np.arange(ny)
    xx, yy = np.meshgrid(xs, ys)  # row-major: yy varies along rows
    keep = is_outdoor(scenario, xx, yy)
    return np.column_stack([xx[keep], yy[keep]])
