import numpy as np
import pytest

from ucmimo.scenario import (
    AntennaPanel,
    BandPlan,
    BaseStation,
    ChannelConfig,
    Rect,
    Scenario,
)


def small_band(num_rb=4, rb_bw=360e3):
    return BandPlan(
        center_frequency_hz=3.6e9,
        bandwidth_hz=num_rb * rb_bw,
        num_resource_blocks=num_rb,
        rb_bandwidth_hz=rb_bw,
        slot_duration_s=0.5e-3,
    )


def make_scenario(
    num_bs=2,
    num_rb=4,
    num_users=3,
    panel_shape=(2, 2),
    side_m=200.0,
    buildings=(),
    num_scatter=3,
    tx_dbm=30.0,
    num_slots=20,
    coherence=10,
    serving_mode="user_centric",
    cluster_size=None,
    user_speed=1.5,
):
    """Small open scenario for unit tests; validated on construction."""
    panels = (AntennaPanel(rows=panel_shape[0], cols=panel_shape[1]),)
    xs = np.linspace(side_m * 0.2, side_m * 0.8, num_bs)
    stations = tuple(
        BaseStation(i, "micro", float(xs[i]), side_m / 2.0, 10.0, tx_dbm, panels)
        for i in range(num_bs)
    )
    return Scenario(
        name="test",
        band=small_band(num_rb),
        bounds=Rect(0.0, 0.0, side_m, side_m),
        base_stations=stations,
        buildings=tuple(buildings),
        num_users=num_users,
        user_speed_mps=user_speed,
        num_slots=num_slots,
        num_runs=1,
        noise_figure_db=9.0,
        serving_mode=serving_mode,
        cluster_size=cluster_size,
        channel=ChannelConfig(num_scatter_paths=num_scatter, coherence_block_slots=coherence),
    ).validate()


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
