"""Weight placement in DRAM and access-trace generation.

Two policies produce a :class:`PhysicalLayout`:

* ``map_enforcesnn`` walks channel, rank, chip, row, subarray, bank and
  fills every column of a row before moving on, skipping any subarray whose
  BER exceeds the threshold. Consecutive rows land in different banks, so
  row activations overlap with the previous bank's burst.
* ``map_baseline`` fills one bank sequentially (column, row, subarray)
  before touching the next bank, with no error awareness.

A layout stores flat column-slot indices; byte ``i`` lives in slot
``i // bytes_per_column`` at offset ``i % bytes_per_column``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import CapacityError
from .dram_org import DramGeometry, validate_flat

ENFORCESNN = "enforcesnn"
BASELINE = "baseline"
VARIANTS = ("listing", "prose")


@dataclass(frozen=True)
class PhysicalLayout:
    geometry: DramGeometry
    columns: np.ndarray
    n_bytes: int
    policy: str
    safe_subarrays: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        need = -(-self.n_bytes // self.geometry.bytes_per_column)
        if len(self.columns) != need:
            raise ValueError(f"layout has {len(self.columns)} column slots, {need} needed")

    def __len__(self) -> int:
        return self.n_bytes

    def byte_addresses(self) -> np.ndarray:
        """Flat byte address of every stored byte, in byte order."""
        bpc = self.geometry.bytes_per_column
        i = np.arange(self.n_bytes, dtype=np.int64)
        return self.columns[i // bpc] * bpc + i % bpc

    def subarray_ids(self) -> np.ndarray:
        """Flat subarray index of every column slot."""
        return self.columns // self.geometry.columns_per_subarray

    def to_csv(self, path, header_comment: str | None = None) -> None:
        parts = self.geometry.unflatten(self.columns)
        bpc = self.geometry.bytes_per_column
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["byte_index", "ch", "ra", "cp", "ba", "su", "ro", "co"])
            for b in range(self.n_bytes):
                s = b // bpc
                w.writerow([b, *(int(p[s]) for p in parts)])


def _safe_mask(geometry: DramGeometry, subarray_bers, ber_th) -> np.ndarray:
    if subarray_bers is None or ber_th is None:
        return np.ones(geometry.subarray_shape, dtype=bool)
    bers = np.asarray(subarray_bers, dtype=np.float64)
    if bers.shape != geometry.subarray_shape:
        raise ValueError(f"subarray BER table shape {bers.shape} != {geometry.subarray_shape}")
    return bers <= ber_th


def map_enforcesnn(
    geometry: DramGeometry,
    subarray_bers,
    ber_th: Optional[float],
    data_bytes: int,
    variant: str = "listing",
) -> PhysicalLayout:
    """Error-aware, row-buffer-friendly placement.

    ``variant="listing"`` nests channel > rank > chip > row > subarray > bank >
    column. ``variant="prose"`` interleaves banks at column granularity
    (row > subarray > column > bank) so that every consecutive access
    switches bank. Passing ``ber_th=None`` treats every subarray as safe.
    """
    if variant not in VARIANTS:
        raise ValueError(f"mapping variant must be one of {VARIANTS}")
    g = geometry
    safe = _safe_mask(g, subarray_bers, ber_th)
    need = -(-int(data_bytes) // g.bytes_per_column)
    available = int(safe.sum()) * g.columns_per_subarray
    if need > available:
        raise CapacityError(
            f"need {need * g.bytes_per_column} bytes, safe capacity is "
            f"{available * g.bytes_per_column} bytes"
        )

    su, ba, co = np.meshgrid(
        np.arange(g.n_subarrays), np.arange(g.n_banks), np.arange(g.n_columns), indexing="ij"
    )
    if variant == "prose":
        su, ba, co = (a.transpose(0, 2, 1) for a in (su, ba, co))
    su, ba, co = su.ravel(), ba.ravel(), co.ravel()

    chunks = []
    filled = 0
    for ch in range(g.n_channels):
        for ra in range(g.n_ranks):
            for cp in range(g.n_chips):
                keep = safe[ch, ra, cp, ba, su]
                if not keep.any():
                    continue
                su_k, ba_k, co_k = su[keep], ba[keep], co[keep]
                for ro in range(g.n_rows):
                    chunk = g.flatten(ch, ra, cp, ba_k, su_k, ro, co_k)
                    chunks.append(chunk[: need - filled])
                    filled += len(chunks[-1])
                    if filled >= need:
                        break
                if filled >= need:
                    break
            if filled >= need:
                break
        if filled >= need:
            break
    columns = np.concatenate(chunks).astype(np.int64) if chunks else np.zeros(0, np.int64)
    return PhysicalLayout(g, columns, int(data_bytes), ENFORCESNN, safe)


def map_baseline(geometry: DramGeometry, data_bytes: int) -> PhysicalLayout:
    """Sequential placement: fill a bank completely, then the next bank."""
    need = -(-int(data_bytes) // geometry.bytes_per_column)
    if need > geometry.n_column_slots:
        raise CapacityError(
            f"need {need * geometry.bytes_per_column} bytes, capacity is "
            f"{geometry.n_column_slots * geometry.bytes_per_column} bytes"
        )
    # flat order is already ch > ra > cp > ba > su > ro > co
    return PhysicalLayout(geometry, np.arange(need, dtype=np.int64), int(data_bytes), BASELINE)


def map_layout(
    policy: str,
    geometry: DramGeometry,
    data_bytes: int,
    subarray_bers=None,
    ber_th: Optional[float] = None,
    variant: str = "listing",
) -> PhysicalLayout:
    if policy == ENFORCESNN:
        return map_enforcesnn(geometry, subarray_bers, ber_th, data_bytes, variant)
    if policy == BASELINE:
        return map_baseline(geometry, data_bytes)
    raise ValueError(f"unknown mapping policy {policy!r}")


@dataclass(frozen=True)
class AccessTrace:
    """Ordered column accesses; ``writes[i]`` is True for a write."""

    geometry: DramGeometry
    columns: np.ndarray
    writes: np.ndarray

    def __post_init__(self):
        if self.columns.shape != self.writes.shape:
            raise ValueError("columns and writes must align")

    def __len__(self) -> int:
        return len(self.columns)

    def addresses(self):
        return [self.geometry.address(c) for c in self.columns]

    def to_csv(self, path, header_comment: str | None = None) -> None:
        parts = self.geometry.unflatten(self.columns)
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["index", "ch", "ra", "cp", "ba", "su", "ro", "co", "op"])
            for i in range(len(self.columns)):
                op = "W" if self.writes[i] else "R"
                w.writerow([i, *(int(p[i]) for p in parts), op])

    @classmethod
    def from_csv(cls, path, geometry: DramGeometry) -> "AccessTrace":
        rows = []
        with open(path, newline="") as fh:
            lines = (ln for ln in fh if not ln.startswith("#"))
            for rec in csv.DictReader(lines):
                rows.append(rec)
        if not rows:
            return cls(geometry, np.zeros(0, np.int64), np.zeros(0, bool))
        idx = [np.array([int(r[k]) for r in rows]) for k in ("ch", "ra", "cp", "ba", "su", "ro", "co")]
        columns = geometry.flatten(*idx).astype(np.int64)
        writes = np.array([r["op"].upper() == "W" for r in rows])
        return cls(geometry, columns, writes)


def generate_trace(layout: PhysicalLayout, pattern: str = "sequential_read_all", epochs: int = 1) -> AccessTrace:
    """Reads in layout order; ``repeated_epochs`` concatenates ``epochs`` passes."""
    validate_flat(layout.geometry, layout.columns)
    if pattern == "sequential_read_all":
        reps = 1
    elif pattern == "repeated_epochs":
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        reps = epochs
    else:
        raise ValueError(f"unknown trace pattern {pattern!r}")
    cols = np.tile(layout.columns, reps)
    return AccessTrace(layout.geometry, cols, np.zeros(len(cols), dtype=bool))

