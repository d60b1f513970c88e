"""Experiment configuration: a JSON document validated on load.

Relative dataset paths resolve against the config file's directory.
Unknown keys anywhere in the document are rejected.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import VoltsnnError
from .dram_org import V_MIN, V_NOMINAL, DramGeometry, VoltageConfig
from .fixedpoint import Float32Format, Rounding, parse_format
from .snn_core import SnnParams


class ConfigError(VoltsnnError, ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DatasetConfig(_Strict):
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    n_train: Optional[int] = Field(default=None, ge=1)
    n_test: Optional[int] = Field(default=None, ge=1)
    # FAT keeps its best level by accuracy on this many training-file samples
    # after the first n_train; without it the test set is used
    n_validation: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _validation_needs_n_train(self):
        if self.n_validation is not None and self.n_train is None:
            raise ValueError("n_validation requires n_train")
        return self


class NetworkConfig(_Strict):
    n_inputs: int = Field(default=784, ge=1)
    n_neurons: int = Field(default=100, ge=1)
    epochs: int = Field(default=1, ge=1)
    init_seed: int = Field(default=0, ge=0)
    params: dict = Field(default_factory=dict)

    @field_validator("params")
    @classmethod
    def _known_params(cls, v: dict) -> dict:
        try:
            SnnParams(**v)
        except TypeError as e:
            raise ValueError(f"unknown network parameter: {e}") from None
        return v

    def snn_params(self) -> SnnParams:
        return SnnParams(**self.params)


class QuantizationConfig(_Strict):
    format: str = "fxp8_signed_q1_6"
    rounding: Rounding = Rounding.RN

    @field_validator("format")
    @classmethod
    def _parse(cls, v: str) -> str:
        parse_format(v)
        return v


class GeometryConfig(_Strict):
    n_channels: int = 1
    n_ranks: int = 1
    n_chips: int = 1
    n_banks: int = 8
    n_subarrays: int = 8
    n_rows: int = 256
    n_columns: int = 64
    bytes_per_column: int = 1

    def build(self) -> DramGeometry:
        return DramGeometry(**self.model_dump())


class EnergyTableConfig(_Strict):
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

    def at(self, v_supply: float) -> VoltageConfig:
        return VoltageConfig(v_supply=v_supply, **self.model_dump())


class VoltageBer(_Strict):
    v_supply: float
    ber: float = Field(ge=0, le=1)


# placeholder operating points; replace with measured device data
DEFAULT_VOLTAGE_BER = (
    VoltageBer(v_supply=1.35, ber=0.0),
    VoltageBer(v_supply=1.2, ber=1e-5),
    VoltageBer(v_supply=1.1, ber=1e-3),
    VoltageBer(v_supply=1.025, ber=1e-2),
)


class DramConfig(_Strict):
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    energy: EnergyTableConfig = Field(default_factory=EnergyTableConfig)
    supply_voltages: tuple[float, ...] = (1.025, 1.1, 1.2, 1.35)
    voltage_ber: tuple[VoltageBer, ...] = DEFAULT_VOLTAGE_BER
    flip_probability: float = Field(default=0.5, gt=0, le=1)
    policy: Literal["enforcesnn", "baseline"] = "enforcesnn"
    variant: Literal["listing", "prose"] = "listing"
    ber_th: Optional[float] = Field(default=1e-2, ge=0, le=1)

    @model_validator(mode="after")
    def _check(self):
        table = {p.v_supply for p in self.voltage_ber}
        for v in self.supply_voltages:
            if not V_MIN <= v <= self.energy.v_nominal:
                raise ValueError(f"supply voltage {v} outside [{V_MIN}, {self.energy.v_nominal}]")
            if v not in table:
                raise ValueError(f"no BER entry for supply voltage {v}")
        return self

    def ber_at(self, v_supply: float) -> float:
        for p in self.voltage_ber:
            if p.v_supply == v_supply:
                return p.ber
        raise ConfigError(f"no BER entry for supply voltage {v_supply}")


class ProfileConfig(_Strict):
    bers: tuple[float, ...] = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    trials: int = Field(default=5, ge=1)
    max_drop: float = Field(default=0.03, ge=0, le=1)
    rounding_study: bool = True

    @field_validator("bers")
    @classmethod
    def _valid(cls, v):
        if any(b < 0 or b > 1 for b in v):
            raise ValueError("BERs must lie in [0, 1]")
        if len(set(v)) != len(v):
            raise ValueError("duplicate BER values")
        return v


class FatConfig(_Strict):
    mode: Literal["efficient", "conventional", "explicit"] = "efficient"
    schedule: Optional[tuple[float, ...]] = None
    max_ber: Optional[float] = None
    region_a_drop: float = Field(default=0.01, ge=0, le=1)
    collapse_drop: float = Field(default=0.20, ge=0, le=1)
    epoch_time_factor: float = Field(default=1.0, gt=0)
    epoch_energy_factor: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _explicit(self):
        if self.mode == "explicit" and not self.schedule:
            raise ValueError("explicit FAT mode needs a schedule")
        if self.mode != "explicit" and self.schedule:
            raise ValueError("a schedule is only allowed in explicit mode")
        return self


class SelectionConfig(_Strict):
    mu: tuple[float, ...] = (0.0, 1.0, 5.0, 10.0)
    eps: tuple[float, ...] = (0.0, 1.0, 5.0, 10.0)
    trials: int = Field(default=3, ge=1)
    formats: tuple[str, ...] = ("fp32", "fxp8_signed_q1_6")

    @field_validator("mu", "eps")
    @classmethod
    def _non_negative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("trade-off weights must be non-negative")
        return v

    @field_validator("formats")
    @classmethod
    def _formats(cls, v):
        for f in v:
            fmt = parse_format(f)
            if not isinstance(fmt, Float32Format) and fmt.total_bits != 8:
                raise ValueError(f"candidate format {f} must be 8 or 32 bits wide")
        return v


class ExperimentConfig(_Strict):
    seed: int = Field(default=0, ge=0)
    output_dir: str = "voltsnn_out"
    dataset: DatasetConfig
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    quantization: QuantizationConfig = Field(default_factory=QuantizationConfig)
    dram: DramConfig = Field(default_factory=DramConfig)
    profile: ProfileConfig = Field(default_factory=ProfileConfig)
    fat: FatConfig = Field(default_factory=FatConfig)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)

    def canonical_json(self) -> str:
        """Sorted-key JSON of everything that affects results (not the output directory)."""
        return json.dumps(self.model_dump(mode="json", exclude={"output_dir"}), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path, seed: Optional[int] = None, output_dir: Optional[str] = None) -> tuple[ExperimentConfig, Path]:
    """Parse and validate; returns the config and its base directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    if seed is not None:
        raw["seed"] = seed
    if output_dir is not None:
        raw["output_dir"] = output_dir
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from None
    return cfg, path.resolve().parent
