import numpy as np
import pytest
from hypothesis import given, strategies as st

from voltsnn.dram_org import (
    Access,
    AddressError,
    DramAddress,
    DramGeometry,
    VoltageConfig,
    access_energy,
    energy_scale,
    linear_capacity,
    validate_address,
)

volts = st.floats(min_value=1.025, max_value=1.35, allow_nan=False)


def test_energy_scale_examples():
    assert energy_scale(VoltageConfig(v_supply=1.35)) == 1.0
    # (1.025/1.35)^2 and (1.2/1.35)^2 by hand
    assert energy_scale(VoltageConfig(v_supply=1.025)) == pytest.approx(0.576475, abs=1e-6)
    assert energy_scale(VoltageConfig(v_supply=1.2)) == pytest.approx(0.790123, abs=1e-6)


def test_access_energy_examples():
    v = VoltageConfig()
    assert access_energy(Access.HIT, v) == v.e_hit
    low = v.at(1.025)
    assert access_energy("conflict", low) == pytest.approx(v.e_conflict * (1.025 / 1.35) ** 2)


@given(volts)
def test_ordering_preserved(vs):
    v = VoltageConfig(v_supply=vs)
    assert access_energy("hit", v) < access_energy("miss", v) < access_energy("conflict", v)


@given(volts, volts)
def test_energy_scale_monotone(a, b):
    lo, hi = sorted((a, b))
    if lo < hi:
        assert energy_scale(VoltageConfig(v_supply=lo)) < energy_scale(VoltageConfig(v_supply=hi))


@given(volts, st.floats(min_value=0.1, max_value=10))
def test_table_rescaling_commutes(vs, k):
    v = VoltageConfig(v_supply=vs)
    scaled = VoltageConfig(v_supply=vs, e_hit=k * 4.0, e_miss=k * 7.0, e_conflict=k * 10.0)
    for cond in Access:
        assert access_energy(cond, scaled) == pytest.approx(k * access_energy(cond, v))


@pytest.mark.parametrize(
    "kwargs",
    [dict(v_supply=1.0), dict(v_supply=1.4), dict(e_hit=8.0), dict(e_miss=11.0)],
)
def test_voltage_config_invariants(kwargs):
    with pytest.raises(ValueError):
        VoltageConfig(**kwargs)


def test_linear_capacity():
    g = DramGeometry(1, 1, 1, 2, 2, 4, 8, bytes_per_column=1)
    assert linear_capacity(g) == 128
    assert linear_capacity(DramGeometry(1, 1, 1, 2, 2, 4, 8, bytes_per_column=4)) == 512


def test_geometry_rejects_zero_counts():
    with pytest.raises(ValueError, match="n_banks|bank"):
        DramGeometry(n_banks=0)


def test_validate_address():
    g = DramGeometry(1, 1, 1, 2, 2, 4, 8)
    validate_address(g, DramAddress(0, 0, 0, 0, 0, 0, 0))
    with pytest.raises(AddressError, match="bank") as info:
        validate_address(g, DramAddress(0, 0, 0, 2, 0, 0, 0))
    assert info.value.dimension == "bank"
    with pytest.raises(AddressError, match="column"):
        validate_address(g, DramAddress(0, 0, 0, 0, 0, 0, -1))


def test_flatten_round_trip_and_bank_contiguity():
    g = DramGeometry(2, 1, 2, 2, 2, 3, 4)
    flat = np.arange(g.n_column_slots)
    parts = g.unflatten(flat)
    assert np.array_equal(g.flatten(*parts), flat)
    bank_id = flat // g.columns_per_bank
    # (ch, ra, cp, ba) identifies a bank and is contiguous in flat order
    key = ((parts[0] * g.n_ranks + parts[1]) * g.n_chips + parts[2]) * g.n_banks + parts[3]
    assert np.array_equal(bank_id, key)
    assert g.address(5) == DramAddress(0, 0, 0, 0, 0, 1, 1)
