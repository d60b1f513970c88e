"""Error Model-0: uniformly distributed weak cells and bit-flip injection.

Each bank's bit-cells are weak independently with probability ``F``; a weak
cell flips the bit it stores with probability ``P`` on each injection, so
the effective BER is ``F * P``. Only weak coordinates are stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dram_mapping import PhysicalLayout
from .dram_org import DramAddress, DramGeometry
from .fixedpoint import QuantizedTensor

DEFAULT_FLIP_PROBABILITY = 0.5


@dataclass(frozen=True)
class WeakCellMap:
    """Sorted flat bit indices of the weak cells of a geometry.

    Flat bit index = flat column slot * bits_per_column + 8 * byte + bit.
    """

    geometry: DramGeometry
    weak_fraction: float
    flip_probability: float
    seed: int
    weak_bits: np.ndarray

    @property
    def ber(self) -> float:
        return self.weak_fraction * self.flip_probability

    def __len__(self) -> int:
        return len(self.weak_bits)


def _check_probability(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def generate_weak_cells(geometry: DramGeometry, weak_fraction: float, flip_probability: float, seed: int) -> WeakCellMap:
    _check_probability("weak_fraction", weak_fraction)
    _check_probability("flip_probability", flip_probability)
    rng = np.random.default_rng(seed)
    n = geometry.bits_per_bank
    chunks = []
    for bank in range(geometry.n_banks_total):
        k = int(rng.binomial(n, weak_fraction)) if weak_fraction > 0 else 0
        if k:
            pos = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
            chunks.append(pos + bank * n)
    weak = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return WeakCellMap(geometry, float(weak_fraction), float(flip_probability), int(seed), weak)


def weak_cells_for_ber(geometry: DramGeometry, ber: float, seed: int, flip_probability: float = DEFAULT_FLIP_PROBABILITY) -> WeakCellMap:
    """Weak-cell map for a target BER using ``F = BER / P``."""
    if ber < 0:
        raise ValueError("BER must be non-negative")
    if flip_probability <= 0:
        raise ValueError("flip_probability must be positive")
    if ber > flip_probability:
        raise ValueError(f"BER {ber} unreachable with flip probability {flip_probability}")
    return generate_weak_cells(geometry, ber / flip_probability, flip_probability, seed)


def subarray_bers(weak_map: WeakCellMap) -> np.ndarray:
    """Estimated BER of every subarray, shaped ``(ch, ra, cp, ba, su)``."""
    g = weak_map.geometry
    n_sub = int(np.prod(g.subarray_shape))
    counts = np.bincount(weak_map.weak_bits // g.bits_per_subarray, minlength=n_sub)
    return (counts / g.bits_per_subarray * weak_map.flip_probability).reshape(g.subarray_shape)


def subarray_ber(weak_map: WeakCellMap, channel: int, rank: int, chip: int, bank: int, subarray: int) -> float:
    return float(subarray_bers(weak_map)[channel, rank, chip, bank, subarray])


@dataclass(frozen=True)
class ErrorMask:
    """Flat bit positions flipped by one injection event."""

    geometry: DramGeometry
    bits: np.ndarray

    def __len__(self) -> int:
        return len(self.bits)

    def positions(self) -> list[tuple[DramAddress, int]]:
        bpc = self.geometry.bits_per_column
        return [(self.geometry.address(b // bpc), int(b % bpc)) for b in self.bits]

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# ch ra cp ba su ro co bit\n")
            for addr, bit in self.positions():
                fh.write(" ".join(str(v) for v in (*addr, bit)) + "\n")


def _stored_weak_bits(layout: PhysicalLayout, weak_map: WeakCellMap):
    """(byte index, bit within byte) for every stored bit that sits in a weak cell."""
    if weak_map.geometry != layout.geometry:
        raise ValueError("weak-cell map and layout use different geometries")
    addr = layout.byte_addresses()
    order = np.argsort(addr, kind="stable")
    sorted_addr = addr[order]
    weak_bytes = weak_map.weak_bits >> 3
    pos = np.searchsorted(sorted_addr, weak_bytes)
    hit = pos < len(sorted_addr)
    hit[hit] = sorted_addr[pos[hit]] == weak_bytes[hit]
    return order[pos[hit]], (weak_map.weak_bits[hit] & 7), weak_map.weak_bits[hit]


def sample_error_mask(layout: PhysicalLayout, weak_map: WeakCellMap, seed: int) -> ErrorMask:
    """One Bernoulli(P) draw per stored weak bit."""
    _, _, flat_bits = _stored_weak_bits(layout, weak_map)
    rng = np.random.default_rng(seed)
    flips = rng.random(len(flat_bits)) < weak_map.flip_probability
    return ErrorMask(layout.geometry, flat_bits[flips])


def _apply(tensor: QuantizedTensor, layout: PhysicalLayout, byte_idx, bit_idx) -> QuantizedTensor:
    raw = tensor.to_bytes()
    np.bitwise_xor.at(raw, byte_idx, (1 << bit_idx).astype(np.uint8))
    return QuantizedTensor.from_bytes(raw, tensor.format, tensor.shape)


def inject_errors(tensor: QuantizedTensor, layout: PhysicalLayout, weak_map: WeakCellMap, seed: int) -> QuantizedTensor:
    """Flip stored bits that sit in weak cells, each with probability P."""
    if layout.n_bytes != tensor.n_bytes:
        raise ValueError(f"layout holds {layout.n_bytes} bytes but tensor needs {tensor.n_bytes}")
    byte_idx, bit_idx, _ = _stored_weak_bits(layout, weak_map)
    rng = np.random.default_rng(seed)
    flips = rng.random(len(byte_idx)) < weak_map.flip_probability
    if not flips.any():
        return tensor
    return _apply(tensor, layout, byte_idx[flips], bit_idx[flips])


def apply_error_mask(tensor: QuantizedTensor, layout: PhysicalLayout, mask: ErrorMask) -> QuantizedTensor:
    """Flip exactly the bits of ``mask`` that hold data of ``tensor``."""
    if layout.n_bytes != tensor.n_bytes:
        raise ValueError(f"layout holds {layout.n_bytes} bytes but tensor needs {tensor.n_bytes}")
    addr = layout.byte_addresses()
    order = np.argsort(addr, kind="stable")
    sorted_addr = addr[order]
    mb = mask.bits >> 3
    pos = np.searchsorted(sorted_addr, mb)
    ok = pos < len(sorted_addr)
    ok[ok] = sorted_addr[pos[ok]] == mb[ok]
    return _apply(tensor, layout, order[pos[ok]], mask.bits[ok] & 7)
