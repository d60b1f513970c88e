"""DRAM geometry, addressing and the voltage-parametric energy model.

Addresses flatten in the order channel, rank, chip, bank, subarray, row,
column, so one bank (and one subarray) occupies a contiguous range of
flat column indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import VoltsnnError

V_NOMINAL = 1.35
V_MIN = 1.025


class AddressError(VoltsnnError, IndexError):
    """An address index falls outside the geometry."""

    def __init__(self, dimension: str, index: int, bound: int):
        super().__init__(f"{dimension} index {index} out of range [0, {bound})")
        self.dimension = dimension


class Access(str, Enum):
    HIT = "hit"
    MISS = "miss"
    CONFLICT = "conflict"


class DramAddress(NamedTuple):
    channel: int
    rank: int
    chip: int
    bank: int
    subarray: int
    row: int
    column: int


ADDRESS_FIELDS = DramAddress._fields


@dataclass(frozen=True)
class DramGeometry:
    n_channels: int = 1
    n_ranks: int = 1
    n_chips: int = 1
    n_banks: int = 8
    n_subarrays: int = 8
    n_rows: int = 256
    n_columns: int = 64
    bytes_per_column: int = 1

    def __post_init__(self):
        for name, value in zip(ADDRESS_FIELDS, self.shape):
            if int(value) < 1:
                raise ValueError(f"geometry count for {name} must be >= 1, got {value}")
        if self.bytes_per_column < 1:
            raise ValueError("bytes_per_column must be >= 1")

    @property
    def shape(self) -> tuple[int, ...]:
        return (
            self.n_channels,
            self.n_ranks,
            self.n_chips,
            self.n_banks,
            self.n_subarrays,
            self.n_rows,
            self.n_columns,
        )

    @property
    def subarray_shape(self) -> tuple[int, ...]:
        return self.shape[:5]

    @property
    def n_column_slots(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def columns_per_bank(self) -> int:
        return self.n_subarrays * self.n_rows * self.n_columns

    @property
    def columns_per_subarray(self) -> int:
        return self.n_rows * self.n_columns

    @property
    def bits_per_column(self) -> int:
        return 8 * self.bytes_per_column

    @property
    def bits_per_subarray(self) -> int:
        return self.columns_per_subarray * self.bits_per_column

    @property
    def bits_per_bank(self) -> int:
        return self.columns_per_bank * self.bits_per_column

    @property
    def n_banks_total(self) -> int:
        return self.n_channels * self.n_ranks * self.n_chips * self.n_banks

    def flatten(self, channel, rank, chip, bank, subarray, row, column):
        """Flat column index (vectorised over numpy arrays)."""
        return np.ravel_multi_index(
            (channel, rank, chip, bank, subarray, row, column), self.shape
        )

    def unflatten(self, flat) -> tuple:
        return np.unravel_index(flat, self.shape)

    def address(self, flat: int) -> DramAddress:
        return DramAddress(*(int(i) for i in np.unravel_index(int(flat), self.shape)))


def linear_capacity(geometry: DramGeometry) -> int:
    """Total capacity in bytes."""
    return geometry.n_column_slots * geometry.bytes_per_column


def validate_address(geometry: DramGeometry, addr: DramAddress) -> None:
    for name, index, bound in zip(ADDRESS_FIELDS, addr, geometry.shape):
        if not 0 <= index < bound:
            raise AddressError(name, index, bound)


def validate_flat(geometry: DramGeometry, flat: np.ndarray) -> None:
    """Bulk check for flat column indices."""
    flat = np.asarray(flat)
    if flat.size and (flat.min() < 0 or flat.max() >= geometry.n_column_slots):
        bad = int(flat[(flat < 0) | (flat >= geometry.n_column_slots)][0])
        raise AddressError("column slot", bad, geometry.n_column_slots)


@dataclass(frozen=True)
class VoltageConfig:
    """Supply voltage plus per-condition energies (nJ, at nominal) and timings (ns)."""

    v_supply: float = V_NOMINAL
    v_nominal: float = V_NOMINAL
    energy_exponent: float = 2.0
    e_hit: float = 4.0
    e_miss: float = 7.0
    e_conflict: float = 10.0
    t_rcd: float = 18.0
    t_ras: float = 42.0
    t_rp: float = 18.0
    t_burst: float = 10.0
    write_energy_factor: float = 1.0

    def __post_init__(self):
        if not V_MIN - 1e-12 <= self.v_supply <= self.v_nominal + 1e-12:
            raise ValueError(f"v_supply {self.v_supply} outside [{V_MIN}, {self.v_nominal}]")
        if not 0 < self.e_hit < self.e_miss < self.e_conflict:
            raise ValueError("energies must satisfy 0 < e_hit < e_miss < e_conflict")
        if min(self.t_rcd, self.t_ras, self.t_rp, self.t_burst) < 0:
            raise ValueError("timings must be non-negative")
        if self.energy_exponent <= 0:
            raise ValueError("energy_exponent must be positive")

    def at(self, v_supply: float) -> "VoltageConfig":
        """Same tables, different supply voltage."""
        return VoltageConfig(**{**self.__dict__, "v_supply": v_supply})

    def base_energy(self, condition: Access) -> float:
        return {Access.HIT: self.e_hit, Access.MISS: self.e_miss, Access.CONFLICT: self.e_conflict}[
            Access(condition)
        ]


def energy_scale(v: VoltageConfig) -> float:
    return (v.v_supply / v.v_nominal) ** v.energy_exponent


def access_energy(condition: Access, v: VoltageConfig) -> float:
    """Energy of one access in nJ."""
    return v.base_energy(condition) * energy_scale(v)
