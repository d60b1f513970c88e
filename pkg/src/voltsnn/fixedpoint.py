"""Fixed-point weight quantization and bit-exact storage codes.

Weights are quantized to integer codes (two's complement when signed) so
that DRAM bit errors can be injected into their exact binary
representation. Downstream arithmetic runs on the dequantized reals
(simulated quantization).

A second storage format, ``FP32``, passes real values through unchanged;
its "codes" are the IEEE-754 bit patterns, which is what the DRAM holds.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from . import VoltsnnError


class InvalidWeightError(VoltsnnError, ValueError):
    """Raised for non-finite weights or codes outside a format."""


class Rounding(str, Enum):
    TR = "TR"
    RN = "RN"
    SR = "SR"


@dataclass(frozen=True)
class FixedPointFormat:
    """``Qi.f`` format: optional sign bit, ``i`` integer bits, ``f`` fraction bits."""

    signed: bool
    integer_bits: int
    fraction_bits: int

    def __post_init__(self):
        if self.integer_bits < 0 or self.fraction_bits < 0:
            raise ValueError("bit counts must be non-negative")
        if self.total_bits < 1:
            raise ValueError("format must have at least one bit")

    @property
    def total_bits(self) -> int:
        return int(self.signed) + self.integer_bits + self.fraction_bits

    @property
    def eps(self) -> float:
        return 2.0 ** -self.fraction_bits

    @property
    def min_code(self) -> int:
        return -(1 << (self.integer_bits + self.fraction_bits)) if self.signed else 0

    @property
    def max_code(self) -> int:
        return (1 << (self.integer_bits + self.fraction_bits)) - 1

    @property
    def min_value(self) -> float:
        return self.min_code * self.eps

    @property
    def max_value(self) -> float:
        return self.max_code * self.eps

    @property
    def bytes_per_weight(self) -> int:
        return (self.total_bits + 7) // 8

    @property
    def name(self) -> str:
        kind = "signed" if self.signed else "unsigned"
        return f"fxp{self.total_bits}_{kind}_q{self.integer_bits}_{self.fraction_bits}"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Float32Format:
    """Pass-through IEEE-754 single precision storage."""

    @property
    def total_bits(self) -> int:
        return 32

    @property
    def bytes_per_weight(self) -> int:
        return 4

    @property
    def name(self) -> str:
        return "fp32"

    def __str__(self) -> str:
        return self.name


FP32 = Float32Format()
SIGNED_Q1_6 = FixedPointFormat(signed=True, integer_bits=1, fraction_bits=6)
UNSIGNED_Q1_7 = FixedPointFormat(signed=False, integer_bits=1, fraction_bits=7)

WeightFormat = Union[FixedPointFormat, Float32Format]

_FORMAT_RE = re.compile(r"^fxp(\d+)_(signed|unsigned)_q(\d+)_(\d+)$")


def parse_format(text: str) -> WeightFormat:
    """Parse a config format string such as ``"fxp8_signed_q1_6"`` or ``"fp32"``."""
    text = text.strip().lower()
    if text == "fp32":
        return FP32
    m = _FORMAT_RE.match(text)
    if not m:
        raise ValueError(f"unknown weight format {text!r}")
    width, kind, i, f = int(m.group(1)), m.group(2), int(m.group(3)), int(m.group(4))
    fmt = FixedPointFormat(signed=kind == "signed", integer_bits=i, fraction_bits=f)
    if fmt.total_bits != width:
        raise ValueError(f"{text!r}: declared width {width} != {fmt.total_bits} bits")
    return fmt


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("stochastic rounding needs an explicit seed or Generator")
    return np.random.default_rng(rng)


def quantize_array(values, fmt: FixedPointFormat, rounding=Rounding.TR, rng=None) -> np.ndarray:
    """Elementwise quantization to int64 codes, saturating at the format bounds."""
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidWeightError("weights must be finite")
    rounding = Rounding(rounding)
    scaled = x * (1 << fmt.fraction_bits)
    if rounding is Rounding.TR:
        codes = np.floor(scaled)
    elif rounding is Rounding.RN:
        # ties away from zero
        codes = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    else:
        lo = np.floor(scaled)
        codes = lo + (_as_rng(rng).random(scaled.shape) < (scaled - lo))
    return np.clip(codes, fmt.min_code, fmt.max_code).astype(np.int64)


def quantize(value: float, fmt: FixedPointFormat, rounding=Rounding.TR, rng=None) -> int:
    """Quantize one real value to its integer code."""
    if not math.isfinite(value):
        raise InvalidWeightError(f"non-finite weight {value!r}")
    return int(quantize_array(np.array([value]), fmt, rounding, rng)[0])


def dequantize(code, fmt: FixedPointFormat):
    """Map code(s) back to reals: ``code / 2**f``."""
    c = np.asarray(code, dtype=np.int64)
    if np.any(c < fmt.min_code) or np.any(c > fmt.max_code):
        raise InvalidWeightError(f"code outside {fmt.name} range [{fmt.min_code}, {fmt.max_code}]")
    out = c.astype(np.float64) * fmt.eps
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuantizedTensor:
    """Integer codes plus their format.

    For fixed-point formats ``codes`` holds signed integer codes; for FP32 it
    holds the uint32 bit patterns of the float32 values.
    """

    codes: np.ndarray
    format: WeightFormat

    @property
    def shape(self) -> tuple:
        return self.codes.shape

    @property
    def n_bytes(self) -> int:
        return int(self.codes.size) * self.format.bytes_per_weight

    def dequantize(self) -> np.ndarray:
        if isinstance(self.format, Float32Format):
            return self.codes.astype(np.uint32).view(np.float32).astype(np.float64)
        return dequantize(self.codes, self.format)

    def to_bytes(self) -> np.ndarray:
        """Little-endian storage bytes, ``bytes_per_weight`` per element, in C order."""
        bpw = self.format.bytes_per_weight
        if isinstance(self.format, Float32Format):
            raw = self.codes.astype("<u4").ravel()
        else:
            mask = (1 << self.format.total_bits) - 1
            raw = (self.codes.ravel() & mask).astype("<u8")
        return raw.view(np.uint8).reshape(-1, raw.dtype.itemsize)[:, :bpw].ravel().copy()

    @classmethod
    def from_bytes(cls, data: np.ndarray, fmt: WeightFormat, shape) -> "QuantizedTensor":
        bpw = fmt.bytes_per_weight
        data = np.asarray(data, dtype=np.uint8).reshape(-1, bpw)
        padded = np.zeros((data.shape[0], 8), dtype=np.uint8)
        padded[:, :bpw] = data
        raw = padded.view("<u8").ravel()
        if isinstance(fmt, Float32Format):
            codes = raw.astype(np.uint32)
        else:
            bits = fmt.total_bits
            raw = (raw & ((1 << bits) - 1)).astype(np.int64)
            if fmt.signed:
                raw = np.where(raw >= (1 << (bits - 1)), raw - (1 << bits), raw)
            codes = raw
        return cls(codes=codes.reshape(shape), format=fmt)


def quantize_tensor(weights, fmt: WeightFormat, rounding=Rounding.TR, rng=None) -> QuantizedTensor:
    """Quantize a real matrix elementwise; shape is preserved."""
    w = np.asarray(weights, dtype=np.float64)
    if isinstance(fmt, Float32Format):
        if not np.all(np.isfinite(w)):
            raise InvalidWeightError("weights must be finite")
        return QuantizedTensor(codes=w.astype(np.float32).view(np.uint32), format=fmt)
    return QuantizedTensor(codes=quantize_array(w, fmt, rounding, rng), format=fmt)


def simulate_quantization(weights, fmt: WeightFormat, rounding=Rounding.TR, rng=None) -> np.ndarray:
    """Quantize then dequantize: the real values a quantized model computes with."""
    return quantize_tensor(weights, fmt, rounding, rng).dequantize()
