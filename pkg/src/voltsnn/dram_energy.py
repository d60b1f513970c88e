"""Row-buffer classification, energy and latency accounting over access traces.

Each bank, keyed by (channel, rank, chip, bank), holds at most one open row.
A row is identified within its bank by (subarray, row). Latency per access
is ``t_burst`` for a hit, ``t_rcd + t_burst`` for a miss and
``t_rp + t_rcd + t_burst`` for a conflict. When the previous access went to
a different bank, the command time overlaps with that bank's burst and only
``max(t_burst, command)`` is exposed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import VoltsnnError
from .dram_mapping import AccessTrace
from .dram_org import Access, AddressError, DramAddress, DramGeometry, VoltageConfig, energy_scale

_CODES = {0: Access.HIT, 1: Access.MISS, 2: Access.CONFLICT}


@dataclass(frozen=True)
class RowBufferState:
    open_rows: dict = field(default_factory=dict)

    def open_row(self, addr: DramAddress) -> Optional[tuple]:
        return self.open_rows.get(addr[:4])


def classify_access(state: RowBufferState, addr: DramAddress) -> tuple[Access, RowBufferState]:
    bank = tuple(addr[:4])
    row = (addr.subarray, addr.row)
    current = state.open_rows.get(bank)
    if current == row:
        return Access.HIT, state
    cond = Access.MISS if current is None else Access.CONFLICT
    return cond, RowBufferState({**state.open_rows, bank: row})


def classify_trace(trace: AccessTrace) -> np.ndarray:
    """Vectorised classification; returns codes 0 = hit, 1 = miss, 2 = conflict."""
    g = trace.geometry
    cols = np.asarray(trace.columns, dtype=np.int64)
    if len(cols) == 0:
        return np.zeros(0, dtype=np.int8)
    bank = cols // g.columns_per_bank
    row = (cols % g.columns_per_bank) // g.n_columns
    order = np.argsort(bank, kind="stable")
    b_sorted, r_sorted = bank[order], row[order]
    prev_row = np.full(len(cols), -1, dtype=np.int64)
    same = np.zeros(len(cols), dtype=bool)
    same[1:] = b_sorted[1:] == b_sorted[:-1]
    prev_row[1:][same[1:]] = r_sorted[:-1][same[1:]]
    codes_sorted = np.where(prev_row == -1, 1, np.where(prev_row == r_sorted, 0, 2)).astype(np.int8)
    codes = np.empty_like(codes_sorted)
    codes[order] = codes_sorted
    return codes


@dataclass(frozen=True)
class EnergyReport:
    hits: int
    misses: int
    conflicts: int
    energy_nj: float
    latency_ns: float
    bytes_transferred: int
    v_supply: float

    @property
    def n_accesses(self) -> int:
        return self.hits + self.misses + self.conflicts

    @property
    def throughput(self) -> float:
        """Bytes per second."""
        return self.bytes_transferred / (self.latency_ns * 1e-9) if self.latency_ns else 0.0

    @property
    def hit_rate(self) -> float:
        return self.hits / self.n_accesses if self.n_accesses else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["throughput_bytes_per_s"] = self.throughput
        d["hit_rate"] = self.hit_rate
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    CSV_FIELDS = (
        "hits", "misses", "conflicts", "energy_nj", "latency_ns",
        "bytes_transferred", "throughput_bytes_per_s", "hit_rate", "v_supply",
    )

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d[k] for k in self.CSV_FIELDS]


def simulate_trace(trace: AccessTrace, voltage: VoltageConfig, geometry: Optional[DramGeometry] = None) -> EnergyReport:
    g = geometry or trace.geometry
    if g != trace.geometry:
        raise ValueError("trace was generated for a different geometry")
    cols = np.asarray(trace.columns, dtype=np.int64)
    bad = np.flatnonzero((cols < 0) | (cols >= g.n_column_slots))
    if len(bad):
        raise AddressError(f"column slot at trace position {int(bad[0])}", int(cols[bad[0]]), g.n_column_slots)
    n = len(cols)
    if n == 0:
        return EnergyReport(0, 0, 0, 0.0, 0.0, 0, voltage.v_supply)
    codes = classify_trace(trace)

    base = np.array([voltage.e_hit, voltage.e_miss, voltage.e_conflict])
    per_access = base[codes] * np.where(trace.writes, voltage.write_energy_factor, 1.0)
    energy = float(per_access.sum() * energy_scale(voltage))

    command = np.array([0.0, voltage.t_rcd, voltage.t_rp + voltage.t_rcd])[codes]
    bank = cols // g.columns_per_bank
    switched = np.zeros(n, dtype=bool)
    switched[1:] = bank[1:] != bank[:-1]
    exposed = np.where(switched, np.maximum(voltage.t_burst, command), command + voltage.t_burst)
    counts = np.bincount(codes, minlength=3)
    return EnergyReport(
        hits=int(counts[0]),
        misses=int(counts[1]),
        conflicts=int(counts[2]),
        energy_nj=energy,
        latency_ns=float(exposed.sum()),
        bytes_transferred=n * g.bytes_per_column,
        v_supply=voltage.v_supply,
    )


class ComparisonError(VoltsnnError, ZeroDivisionError):
    pass


def compare_reports(baseline: EnergyReport, improved: EnergyReport) -> dict:
    """Energy saving fraction and latency speed-up of ``improved`` over ``baseline``."""
    if baseline.energy_nj <= 0 or improved.latency_ns <= 0:
        raise ComparisonError("reports must have non-zero energy and latency")
    return {
        "energy_saving_fraction": 1.0 - improved.energy_nj / baseline.energy_nj,
        "speedup": baseline.latency_ns / improved.latency_ns,
    }


def write_reports_csv(path, rows: list[tuple[dict, EnergyReport]], header_comment: str | None = None) -> None:
    """One CSV row per report, prefixed with its label columns."""
    if not rows:
        raise ValueError("no reports to write")
    labels = list(rows[0][0].keys())
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow([*labels, *EnergyReport.CSV_FIELDS])
        for label, rep in rows:
            w.writerow([*(label[k] for k in labels), *rep.csv_row()])
