import numpy as np
import pytest

from ucmimo.mcs import (
    NUM_MCS_LEVELS,
    McsTable,
    default_mcs_table,
    load_mcs_table,
    save_mcs_table,
    select_mcs,
    select_mcs_array,
    transport_outcome,
    user_rate,
)


def test_default_table_shape_and_ordering():
    t = default_mcs_table()
    assert len(t.thresholds_db) == NUM_MCS_LEVELS
    assert np.all(np.diff(t.thresholds_db) > 0)
    assert np.all(np.diff(t.efficiencies) > 0)
    assert t.thresholds_db[0] == -6.0
    assert t.thresholds_db[-1] == pytest.approx(19.8)
    assert t.efficiencies[0] == 0.25 and t.efficiencies[-1] == 5.4


def test_table_validation():
    good = default_mcs_table()
    with pytest.raises(ValueError):
        McsTable(good.thresholds_db[:10], good.efficiencies[:10])
    thr = good.thresholds_db.copy()
    thr[5] = thr[4]
    with pytest.raises(ValueError):
        McsTable(thr, good.efficiencies)
    eff = good.efficiencies.copy()
    eff[3] = eff[4]
    with pytest.raises(ValueError):
        McsTable(good.thresholds_db, eff)


def test_select_below_floor_is_none():
    t = default_mcs_table()
    assert select_mcs(t, -6.001) is None
    assert select_mcs(t, -40.0) is None


def test_select_infinite_sinr_is_top():
    t = default_mcs_table()
    assert select_mcs(t, float("inf")) == 15
    assert select_mcs(t, 1000.0) == 15


def test_select_on_threshold_is_closed_lower_bound():
    t = default_mcs_table()
    for i in range(NUM_MCS_LEVELS):
        assert select_mcs(t, float(t.thresholds_db[i])) == i + 1


def test_select_matches_scan_oracle():
    t = default_mcs_table()
    for sinr_db in np.linspace(-10.0, 25.0, 701):
        best = None
        for i in range(NUM_MCS_LEVELS):
            if t.thresholds_db[i] <= sinr_db:
                best = i + 1
        assert select_mcs(t, float(sinr_db)) == best


def test_select_monotone_in_sinr():
    t = default_mcs_table()
    prev = 0
    for sinr_db in np.arange(-20.0, 40.0, 0.1):
        idx = select_mcs(t, float(sinr_db)) or 0
        assert idx >= prev
        prev = idx


def test_select_array_matches_scalar():
    t = default_mcs_table()
    grid = np.linspace(-12.0, 24.0, 999)
    vec = select_mcs_array(t, grid)
    for s, v in zip(grid, vec):
        assert (select_mcs(t, float(s)) or 0) == v


def test_transport_success_and_block_error():
    t = default_mcs_table()
    assert transport_outcome(t, 7, float(t.thresholds_db[6])) == t.efficiencies[6]
    assert transport_outcome(t, 7, float(t.thresholds_db[6]) - 0.1) == 0.0


def test_transport_step_function():
    t = default_mcs_table()
    thr = float(t.thresholds_db[9])
    for realized in np.linspace(thr - 2.0, thr + 2.0, 81):
        want = t.efficiencies[9] if realized >= thr else 0.0
        assert transport_outcome(t, 10, float(realized)) == want


def test_transport_rejects_bad_index():
    t = default_mcs_table()
    with pytest.raises(ValueError):
        transport_outcome(t, 0, 10.0)
    with pytest.raises(ValueError):
        transport_outcome(t, 16, 10.0)


def test_user_rate_empty():
    assert user_rate([], 360e3) == 0.0


def test_user_rate_ten_rbs():
    assert user_rate([2.0] * 10, 360e3) == pytest.approx(7.2e6)


def test_user_rate_matches_summation_oracle(rng):
    effs = default_mcs_table().efficiencies
    for _ in range(50):
        picks = rng.choice(effs, size=int(rng.integers(0, 30)))
        total = 0.0
        for e in picks:
            total += e * 360e3
        assert user_rate(picks, 360e3) == pytest.approx(total, rel=1e-12)


def test_rate_never_exceeds_top_efficiency(rng):
    t = default_mcs_table()
    n_rb = 20
    for _ in range(50):
        sinr_db = rng.uniform(-20, 50, n_rb)
        delivered = [
            transport_outcome(t, select_mcs(t, float(s)), float(s)) if select_mcs(t, float(s)) else 0.0
            for s in sinr_db
        ]
        assert user_rate(delivered, 360e3) <= t.max_efficiency * n_rb * 360e3 + 1e-9


def test_csv_roundtrip(tmp_path):
    t = default_mcs_table()
    path = tmp_path / "mcs.csv"
    save_mcs_table(t, path)
    t2 = load_mcs_table(path)
    assert np.array_equal(t.thresholds_db, t2.thresholds_db)
    assert np.array_equal(t.efficiencies, t2.efficiencies)


def test_csv_rejects_wrong_indices(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("index,threshold_db,efficiency\n1,-6.0,0.25\n")
    with pytest.raises(ValueError):
        load_mcs_table(path)
