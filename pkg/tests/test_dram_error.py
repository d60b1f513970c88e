import math

import numpy as np
import pytest

from voltsnn.dram_error import (
    WeakCellMap,
    apply_error_mask,
    generate_weak_cells,
    inject_errors,
    sample_error_mask,
    subarray_ber,
    subarray_bers,
    weak_cells_for_ber,
)
from voltsnn.dram_mapping import map_baseline, map_enforcesnn
from voltsnn.dram_org import DramGeometry
from voltsnn.fixedpoint import FP32, SIGNED_Q1_6, QuantizedTensor, quantize_tensor

SMALL = DramGeometry(1, 1, 1, 2, 2, 4, 8)


def _tensor(n, seed=0):
    w = np.random.default_rng(seed).random(n)
    return quantize_tensor(w, SIGNED_Q1_6)


def test_probabilities_validated():
    with pytest.raises(ValueError):
        generate_weak_cells(SMALL, 1.5, 0.5, 0)
    with pytest.raises(ValueError):
        generate_weak_cells(SMALL, 0.1, -0.1, 0)
    with pytest.raises(ValueError):
        weak_cells_for_ber(SMALL, 0.6, 0, flip_probability=0.5)


def test_zero_fraction_is_identity():
    wm = generate_weak_cells(SMALL, 0.0, 0.5, 1)
    assert len(wm) == 0
    t = _tensor(100)
    out = inject_errors(t, map_baseline(SMALL, 100), wm, 3)
    assert np.array_equal(out.codes, t.codes)
    assert np.all(subarray_bers(wm) == 0)


def test_all_weak_all_flip():
    wm = generate_weak_cells(SMALL, 1.0, 1.0, 1)
    assert len(wm) == SMALL.n_column_slots * 8
    t = _tensor(100)
    out = inject_errors(t, map_baseline(SMALL, 100), wm, 3)
    assert np.array_equal(out.to_bytes(), t.to_bytes() ^ 0xFF)
    assert np.allclose(subarray_bers(wm), 1.0)


def test_subarray_ber_at_full_fraction_equals_p():
    wm = generate_weak_cells(SMALL, 1.0, 0.3, 1)
    assert subarray_ber(wm, 0, 0, 0, 1, 1) == pytest.approx(0.3)


def test_subarray_ber_law_of_large_numbers():
    g = DramGeometry(1, 1, 1, 2, 2, 128, 128)
    wm = generate_weak_cells(g, 1e-2, 1.0, 5)
    bits = g.bits_per_subarray
    sigma = math.sqrt(1e-2 * (1 - 1e-2) / bits)
    assert np.all(np.abs(subarray_bers(wm) - 1e-2) < 5 * sigma)


def test_weak_map_reproducible_and_seed_sensitive():
    g = DramGeometry(1, 1, 1, 4, 2, 32, 32)
    a = generate_weak_cells(g, 1e-2, 0.5, 11)
    b = generate_weak_cells(g, 1e-2, 0.5, 11)
    c = generate_weak_cells(g, 1e-2, 0.5, 12)
    assert np.array_equal(a.weak_bits, b.weak_bits)
    assert not np.array_equal(a.weak_bits, c.weak_bits)
    assert a.ber == pytest.approx(5e-3)
    assert np.all(np.diff(a.weak_bits) > 0)


def test_weak_cells_uniform_across_banks():
    g = DramGeometry(1, 1, 1, 4, 1, 64, 64)
    wm = generate_weak_cells(g, 0.05, 1.0, 2)
    per_bank = np.bincount(wm.weak_bits // g.bits_per_bank, minlength=4)
    expected = g.bits_per_bank * 0.05
    assert np.all(np.abs(per_bank - expected) < 5 * math.sqrt(expected))


def test_sign_bit_flip_example():
    # code 44 = 0b00101100; bit 7 of byte 0 is the sign bit
    t = QuantizedTensor(codes=np.array([44]), format=SIGNED_Q1_6)
    lay = map_baseline(SMALL, 1)
    wm = WeakCellMap(SMALL, 1.0, 1.0, 0, np.array([7], dtype=np.int64))
    assert inject_errors(t, lay, wm, 0).codes.tolist() == [-84]


def test_injection_deterministic_and_matches_mask():
    g = DramGeometry(1, 1, 1, 2, 2, 16, 16)
    wm = generate_weak_cells(g, 0.05, 0.5, 4)
    t = _tensor(900)
    lay = map_baseline(g, 900)
    a = inject_errors(t, lay, wm, 9)
    b = inject_errors(t, lay, wm, 9)
    assert np.array_equal(a.codes, b.codes)
    mask = sample_error_mask(lay, wm, 9)
    c = apply_error_mask(t, lay, mask)
    assert np.array_equal(a.codes, c.codes)
    flipped = np.unpackbits(a.to_bytes() ^ t.to_bytes()).sum()
    assert flipped == len(mask)


def test_injection_touches_only_weak_cells_in_layout():
    g = DramGeometry(1, 1, 1, 2, 2, 16, 16)
    wm = generate_weak_cells(g, 0.05, 1.0, 4)
    lay = map_baseline(g, 500)
    mask = sample_error_mask(lay, wm, 1)
    assert np.all(np.isin(mask.bits, wm.weak_bits))
    mask_bytes = mask.bits >> 3
    assert np.all(np.isin(mask_bytes, lay.byte_addresses()))
    for addr, bit in mask.positions()[:20]:
        assert 0 <= bit < 8 and addr.bank < g.n_banks


def test_zero_threshold_layout_is_never_corrupted():
    g = DramGeometry(1, 1, 1, 4, 4, 16, 16)
    # sparse weak cells: some subarrays stay clean
    wm = generate_weak_cells(g, 2e-5, 0.5, 8)
    bers = subarray_bers(wm)
    clean = int((bers == 0).sum())
    assert clean > 0
    n = clean * g.columns_per_subarray
    lay = map_enforcesnn(g, bers, 0.0, n)
    t = _tensor(n)
    for s in range(5):
        assert np.array_equal(inject_errors(t, lay, wm, s).codes, t.codes)


def test_flip_rate_statistics():
    g = DramGeometry(1, 1, 1, 8, 8, 64, 64)
    n_bytes = 200_000  # 1.6e6 stored bits
    lay = map_baseline(g, n_bytes)
    t = QuantizedTensor(codes=np.zeros(n_bytes, dtype=np.int64), format=SIGNED_Q1_6)
    bits = n_bytes * 8
    sigma = math.sqrt(1e-3 * (1 - 1e-3) / bits)
    wm = generate_weak_cells(g, 1e-2, 1e-1, 0)
    flipped = np.unpackbits(inject_errors(t, lay, wm, 1).to_bytes()).sum()
    assert abs(flipped / bits - 1e-3) < 3 * sigma


def test_flip_count_concentrates_on_weak_times_p():
    g = DramGeometry(1, 1, 1, 2, 2, 32, 32)
    wm = generate_weak_cells(g, 0.02, 0.25, 3)
    lay = map_baseline(g, 3000)
    stored_weak = np.isin(wm.weak_bits >> 3, lay.byte_addresses()).sum()
    counts = [len(sample_error_mask(lay, wm, s)) for s in range(200)]
    mean = np.mean(counts)
    sd = math.sqrt(stored_weak * 0.25 * 0.75 / 200)
    assert abs(mean - stored_weak * 0.25) < 4 * sd


def test_fp32_injection_flips_float_bits():
    g = DramGeometry(1, 1, 1, 1, 1, 4, 8)
    t = quantize_tensor(np.array([1.0, 0.5]), FP32)
    lay = map_baseline(g, t.n_bytes)
    # weight 0 occupies bytes 0..3; byte 3 bit 6 is the top exponent bit
    wm = WeakCellMap(g, 1.0, 1.0, 0, np.array([3 * 8 + 6], dtype=np.int64))
    out = inject_errors(t, lay, wm, 0).dequantize()
    assert out[1] == 0.5
    # 0x3F800000 ^ (1 << 30) = 0x7F800000 = +inf
    assert np.isposinf(out[0])


def test_size_mismatch_raises():
    lay = map_baseline(SMALL, 10)
    with pytest.raises(ValueError, match="layout holds 10 bytes"):
        inject_errors(_tensor(11), lay, generate_weak_cells(SMALL, 0, 0.5, 0), 0)
