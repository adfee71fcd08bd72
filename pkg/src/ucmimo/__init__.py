"""Downlink system-level simulator for network-centric vs user-centric massive MIMO."""

__version__ = "0.1.0"

from .scenario import (  # noqa: F401
    AntennaPanel,
    BandPlan,
    BaseStation,
    Building,
    ChannelConfig,
    Rect,
    Scenario,
    default_scenario,
    load_scenario,
    outdoor_grid,
    write_scenario,
)
from .channel import (  # noqa: F401
    ChannelVector,
    PathSet,
    channel_vector,
    generate_paths,
    is_los,
    path_loss,
    steering_vector,
)
from .phy import (  # noqa: F401
    LinkBudget,
    allocate_power,
    interference_power,
    mrt_precoder,
    noise_power,
    received_power,
    sinr,
)
from .mcs import McsTable, default_mcs_table, select_mcs, transport_outcome, user_rate  # noqa: F401
from .scheduler import PfState, channel_correlation, schedule_rb, update_pf  # noqa: F401
from .engine import RunConfig, RunMetrics, drop_users, run_campaign, run_simulation, serving_set, step_mobility  # noqa: F401
from .metrics import CoverageGrid, compare_modes, coverage_map, quantile  # noqa: F401
