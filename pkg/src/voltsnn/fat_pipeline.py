"""Error-tolerance profiling and fault-aware training.

A :class:`DramStack` bundles everything between a float weight matrix and
the corrupted weights an accelerator would read back: quantization, the
weak-cell map for a BER, the data layout and bit-flip injection.

Accuracy thresholds are absolute fractions (0.03 is three percentage points).
"""

from __future__ import annotations

import csv
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dram_error import DEFAULT_FLIP_PROBABILITY, inject_errors, subarray_bers, weak_cells_for_ber
from .dram_mapping import ENFORCESNN, map_layout
from .dram_org import DramGeometry
from .fixedpoint import SIGNED_Q1_6, QuantizedTensor, Rounding, WeightFormat, quantize_tensor
from .snn_core import SnnModel, assign_labels, evaluate, train_epoch, with_labels

log = logging.getLogger(__name__)

CONVENTIONAL_SCHEDULE = tuple(10.0 ** e for e in range(-8, -1))


def derive_seed(*parts: int) -> int:
    """Independent 63-bit seed for a tuple of integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class DramStack:
    geometry: DramGeometry = field(default_factory=DramGeometry)
    fmt: WeightFormat = SIGNED_Q1_6
    rounding: Rounding = Rounding.RN
    policy: str = ENFORCESNN
    ber_th: Optional[float] = None
    flip_probability: float = DEFAULT_FLIP_PROBABILITY
    variant: str = "listing"

    def store(self, weights: np.ndarray, seed: int = 0) -> QuantizedTensor:
        return quantize_tensor(weights, self.fmt, self.rounding, rng=derive_seed(seed, 0))

    def quantized(self, weights: np.ndarray, seed: int = 0) -> np.ndarray:
        """Error-free round trip through the storage format."""
        return self.store(weights, seed).dequantize()

    def read_back(self, stored: QuantizedTensor, ber: float, seed: int) -> np.ndarray:
        """Stored weights as read from DRAM whose cells fail at ``ber``."""
        if ber == 0:
            return stored.dequantize()
        weak = weak_cells_for_ber(self.geometry, ber, derive_seed(seed, 1), self.flip_probability)
        bers = subarray_bers(weak) if self.ber_th is not None else None
        layout = map_layout(self.policy, self.geometry, stored.n_bytes, bers, self.ber_th, self.variant)
        return inject_errors(stored, layout, weak, derive_seed(seed, 2)).dequantize()

    def corrupt(self, weights: np.ndarray, ber: float, seed: int) -> np.ndarray:
        return self.read_back(self.store(weights, seed), ber, seed)


def _workers(max_workers: Optional[int]) -> int:
    if max_workers is not None:
        return max(1, int(max_workers))
    env = os.environ.get("VOLTSNN_THREADS")
    return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class AccuracyProfile:
    bers: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    baseline: float
    trials: np.ndarray  # (n_bers, n_trials)

    def __post_init__(self):
        if np.any(np.diff(self.bers) <= 0):
            raise ValueError("profile BERs must be strictly increasing")
        if np.any((self.mean < 0) | (self.mean > 1)) or not 0 <= self.baseline <= 1:
            raise ValueError("accuracies must lie in [0, 1]")

    @property
    def drop(self) -> np.ndarray:
        return self.baseline - self.mean

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["ber", "mean_accuracy", "std_accuracy", "accuracy_drop", "n_trials"])
            for b, m, s, d in zip(self.bers, self.mean, self.std, self.drop):
                w.writerow([repr(float(b)), repr(float(m)), repr(float(s)), repr(float(d)), self.trials.shape[1]])


def accuracy_profile(
    model: SnnModel,
    ber_list: Sequence[float],
    trials: int,
    stack: DramStack,
    images,
    labels,
    seed: int,
    max_workers: Optional[int] = None,
) -> AccuracyProfile:
    """Mean and spread of accuracy over fresh weak-cell maps at each BER.

    Every trial at every BER uses the same input spikes, so the differences
    come from the injected errors alone.
    """
    if trials < 1:
        raise ValueError("need at least one trial per BER")
    bers = np.asarray(sorted(float(b) for b in ber_list))
    eval_seed = derive_seed(seed, 0)
    stored = stack.store(model.weights, derive_seed(seed, 1))
    baseline = evaluate(model, images, labels, eval_seed, weights=stored.dequantize())

    def one(job):
        i, t = job
        w = stack.read_back(stored, bers[i], derive_seed(seed, 2, i, t))
        return evaluate(model, images, labels, eval_seed, weights=w)

    jobs = [(i, t) for i in range(len(bers)) for t in range(trials)]
    n = _workers(max_workers)
    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            accs = list(ex.map(one, jobs))
    else:
        accs = [one(j) for j in jobs]
    acc = np.asarray(accs).reshape(len(bers), trials)
    return AccuracyProfile(bers, acc.mean(axis=1), acc.std(axis=1), float(baseline), acc)


def _tolerable_prefix(profile: AccuracyProfile, max_drop: float) -> np.ndarray:
    """Nonzero BERs up to (not including) the first one whose drop exceeds ``max_drop``."""
    keep = []
    for b, d in zip(profile.bers, profile.drop):
        if b == 0:
            continue
        if d > max_drop + 1e-12:
            break
        keep.append(b)
    return np.asarray(keep)


def determine_ber_th(profile: AccuracyProfile, max_drop: float = 0.03) -> float:
    """Largest BER before the profile first degrades by more than ``max_drop``."""
    nonzero = profile.bers[profile.bers > 0]
    if len(nonzero) == 0:
        raise ValueError("profile has no nonzero BER")
    ok = _tolerable_prefix(profile, max_drop)
    if len(ok) == 0:
        raise ValueError(f"every profiled BER degrades accuracy by more than {max_drop:.2%}")
    return float(ok[-1])


@dataclass(frozen=True)
class FatSchedule:
    bers: tuple

    def __post_init__(self):
        b = np.asarray(self.bers, dtype=float)
        if np.any(b <= 0) or np.any(np.diff(b) <= 0):
            raise ValueError("schedule BERs must be positive and strictly increasing")

    def __len__(self) -> int:
        return len(self.bers)

    def __iter__(self):
        return iter(self.bers)


def ladder(lowest: float, highest: float, ratio: float = 10.0) -> FatSchedule:
    """``lowest, lowest*ratio, ...`` up to ``highest``."""
    if ratio <= 1 or lowest <= 0 or highest < lowest:
        raise ValueError("need 0 < lowest <= highest and ratio > 1")
    out, b = [], lowest
    while b <= highest * (1 + 1e-9):
        out.append(b)
        b *= ratio
    return FatSchedule(tuple(out))


def conventional_schedule() -> FatSchedule:
    return FatSchedule(CONVENTIONAL_SCHEDULE)


def derive_fat_schedule(
    profile: AccuracyProfile, max_ber: Optional[float] = None, region_a_drop: float = 0.01
) -> FatSchedule:
    """Two highest acceptable BERs followed by every unacceptable one up to ``max_ber``.

    Acceptable means within ``region_a_drop`` of the baseline; the acceptable
    region ends at the first BER that is not.
    """
    nonzero = profile.bers[profile.bers > 0]
    region_a = _tolerable_prefix(profile, region_a_drop)
    region_b = nonzero[len(region_a):]
    if max_ber is not None:
        region_b = region_b[region_b <= max_ber * (1 + 1e-12)]
    if len(region_a) < 2:
        warnings.warn(f"only {len(region_a)} acceptable BER level(s) in profile", stacklevel=2)
    chosen = [*region_a[-2:], *region_b]
    if not chosen:
        raise ValueError("profile has no BER levels to train on")
    return FatSchedule(tuple(float(b) for b in chosen))


@dataclass(frozen=True)
class LevelLog:
    level: int
    ber: float
    loss_proxy: float
    accuracy: float
    collapse: bool


@dataclass
class FatResult:
    model: SnnModel
    accuracy: float
    log: list = field(default_factory=list)
    baseline_accuracy: float = 0.0

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["level", "ber", "loss_proxy", "accuracy", "collapse"])
            for r in self.log:
                w.writerow([r.level, repr(r.ber), repr(r.loss_proxy), repr(r.accuracy), int(r.collapse)])


def fault_aware_train(
    model0: SnnModel,
    schedule: FatSchedule | Sequence[float],
    stack: DramStack,
    train_set: tuple,
    test_set: tuple,
    seed: int,
    collapse_drop: float = 0.20,
) -> FatResult:
    """Retrain through an ascending BER schedule, keeping the best model seen.

    At each level the working model's weights go through the DRAM stack at
    that BER (errors stay in the weights, clipped to [0, 1]), then one STDP
    epoch runs, neurons are relabelled, and the quantized working model is
    scored on ``test_set``. Errors carry over from level to level. The loss
    proxy is the mean absolute weight change made by the epoch.
    """
    schedule = schedule if isinstance(schedule, FatSchedule) else FatSchedule(tuple(schedule))
    train_x, train_y = train_set
    test_x, test_y = test_set
    eval_seed = derive_seed(seed, 0)
    baseline = evaluate(model0, test_x, test_y, eval_seed, weights=stack.quantized(model0.weights))
    result = FatResult(model0.copy(), 0.0, [], baseline)
    working = model0.copy()
    w_max = working.params.w_max
    for i, ber in enumerate(schedule):
        corrupted = stack.corrupt(working.weights, ber, derive_seed(seed, 1, i))
        # float formats can read back NaN/inf
        working.weights = np.clip(np.nan_to_num(corrupted, nan=0.0, posinf=w_max, neginf=0.0), 0.0, w_max)
        before = working.weights.copy()
        working = train_epoch(working, train_x, derive_seed(seed, 2, i))
        working = with_labels(working, assign_labels(working, train_x, train_y, derive_seed(seed, 3, i)))
        acc = evaluate(working, test_x, test_y, eval_seed, weights=stack.quantized(working.weights))
        collapse = acc < baseline - collapse_drop
        if collapse:
            log.warning("accuracy collapse at BER %g: %.3f vs baseline %.3f", ber, acc, baseline)
        result.log.append(LevelLog(i, float(ber), float(np.abs(working.weights - before).mean()), acc, bool(collapse)))
        if acc > result.accuracy:
            result.model, result.accuracy = working.copy(), acc
    return result


def retraining_cost(
    schedule: FatSchedule | Sequence[float],
    per_epoch_time: float = 1.0,
    per_epoch_energy: float = 1.0,
    reference_epoch_time: float = 1.0,
    reference_epoch_energy: float = 1.0,
    reference_levels: int = len(CONVENTIONAL_SCHEDULE),
) -> dict:
    """Speed-up and energy saving of one epoch per level against a reference schedule."""
    n = len(schedule)
    if n == 0:
        raise ValueError("empty schedule has no retraining cost")
    if min(per_epoch_time, per_epoch_energy, reference_epoch_time, reference_epoch_energy) <= 0:
        raise ValueError("per-epoch costs must be positive")
    return {
        "speedup": (reference_levels * reference_epoch_time) / (n * per_epoch_time),
        "energy_saving": 1.0 - (n * per_epoch_energy) / (reference_levels * reference_epoch_energy),
    }
