"""Link adaptation: 15-level MCS table, selection and transport outcome."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

NUM_MCS_LEVELS = 15

# Default ladder: QPSK 1/8 at -6 dB up to 64QAM 9/10 at 19.8 dB, roughly
# 1.84 dB between switching points.
_DEFAULT_THRESHOLDS_DB = [
    -6.0, -4.157, -2.314, -0.471, 1.371, 3.214, 5.057, 6.9,
    8.743, 10.586, 12.429, 14.271, 16.114, 17.957, 19.8,
]
_DEFAULT_EFFICIENCIES = [
    0.25, 0.38, 0.60, 0.88, 1.18, 1.48, 1.91, 2.41,
    2.73, 3.32, 3.90, 4.52, 4.80, 5.12, 5.40,
]


@dataclass(frozen=True)
class McsTable:
    """SINR switching thresholds (dB) and spectral efficiencies (bit/s/Hz).

    Index i (1-based) is usable from thresholds_db[i-1] upward.
    """

    thresholds_db: np.ndarray
    efficiencies: np.ndarray

    def __post_init__(self):
        thr = np.asarray(self.thresholds_db, dtype=float)
        eff = np.asarray(self.efficiencies, dtype=float)
        object.__setattr__(self, "thresholds_db", thr)
        object.__setattr__(self, "efficiencies", eff)
        if len(thr) != NUM_MCS_LEVELS or len(eff) != NUM_MCS_LEVELS:
            raise ValueError(f"MCS table needs exactly {NUM_MCS_LEVELS} entries")
        if np.any(np.diff(thr) <= 0):
            raise ValueError("MCS thresholds must be strictly increasing")
        if np.any(np.diff(eff) <= 0) or eff[0] <= 0:
            raise ValueError("MCS efficiencies must be positive and strictly increasing")

    @property
    def max_efficiency(self) -> float:
        return float(self.efficiencies[-1])


def default_mcs_table() -> McsTable:
    return McsTable(np.array(_DEFAULT_THRESHOLDS_DB), np.array(_DEFAULT_EFFICIENCIES))


def load_mcs_table(path) -> McsTable:
    """Read a table from CSV with columns index,threshold_db,efficiency."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append((int(rec["index"]), float(rec["threshold_db"]), float(rec["efficiency"])))
    rows.sort()
    if [r[0] for r in rows] != list(range(1, NUM_MCS_LEVELS + 1)):
        raise ValueError(f"MCS file must carry indices 1..{NUM_MCS_LEVELS}")
    return McsTable(np.array([r[1] for r in rows]), np.array([r[2] for r in rows]))


def save_mcs_table(table: McsTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "threshold_db", "efficiency"])
        for i in range(NUM_MCS_LEVELS):
            writer.writerow([i + 1, repr(float(table.thresholds_db[i])), repr(float(table.efficiencies[i]))])


def select_mcs(table: McsTable, estimated_sinr_db: float):
    """Highest index whose threshold is <= the SINR; None below the ladder."""
    pos = int(np.searchsorted(table.thresholds_db, estimated_sinr_db, side="right"))
    return pos if pos > 0 else None


def select_mcs_array(table: McsTable, sinr_db: np.ndarray) -> np.ndarray:
    """Vector form of select_mcs; 0 stands for no usable MCS."""
    return np.searchsorted(table.thresholds_db, sinr_db, side="right")


def transport_outcome(table: McsTable, chosen_index: int, realized_sinr_db: float) -> float:
    """Delivered spectral efficiency: full on success, zero on block error.

    Success means the realized SINR still reaches the chosen index's
    threshold (hard 0/1 error model).
    """
    if not 1 <= chosen_index <= NUM_MCS_LEVELS:
        raise ValueError(f"MCS index {chosen_index} outside 1..{NUM_MCS_LEVELS}")
    if realized_sinr_db >= table.thresholds_db[chosen_index - 1]:
        return float(table.efficiencies[chosen_index - 1])
    return 0.0


def user_rate(delivered_efficiencies, rb_bandwidth_hz: float) -> float:
    """Slot rate in bit/s: delivered efficiency summed over assigned RBs."""
    return float(np.sum(delivered_efficiencies) * rb_bandwidth_hz)
