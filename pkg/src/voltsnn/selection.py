"""Trade-off reward for model selection and training carbon estimates.

    R = acc - (mu * m_norm + eps * E_norm)

``m_norm`` is the candidate's weight memory over that of the same network
stored in FP32; ``E_norm`` is its DRAM access energy on approximate DRAM
over the energy on accurate DRAM.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

from . import VoltsnnError

FP_BITS = 32
ALLOWED_BITWIDTHS = (8, 32)
DEFAULT_GRID = (0.0, 1.0, 5.0, 10.0)

# carbon constants (p_t in kWh from hours and watts)
PUE = 1.58
CO2_PER_KWH = 0.954


class SelectionError(VoltsnnError, ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    model_id: str
    accuracy: float
    n_weights: int
    bitwidth: int
    e_approx: float
    e_accurate: float
    ber: float = 0.0
    v_supply: float = 1.35

    def __post_init__(self):
        if not 0 <= self.accuracy <= 1:
            raise SelectionError(f"{self.model_id}: accuracy must lie in [0, 1]")
        if self.bitwidth not in ALLOWED_BITWIDTHS:
            raise SelectionError(f"{self.model_id}: bitwidth must be one of {ALLOWED_BITWIDTHS}")
        if self.n_weights <= 0:
            raise SelectionError(f"{self.model_id}: n_weights must be positive")
        if self.e_approx <= 0 or self.e_accurate <= 0:
            raise SelectionError(f"{self.model_id}: energies must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "Candidate":
        return cls(**d)


def load_candidates(path) -> list[Candidate]:
    with open(path) as fh:
        data = json.load(fh)
    rows = data["candidates"] if isinstance(data, dict) else data
    return [Candidate.from_dict(r) for r in rows]


def memory_norm(candidate, reference=None) -> float:
    """Weight memory relative to the FP32 reference with the same weight count."""
    if reference is not None:
        if reference.n_weights != candidate.n_weights:
            raise SelectionError(
                f"reference has {reference.n_weights} weights, candidate has {candidate.n_weights}"
            )
        if reference.bitwidth != FP_BITS:
            raise SelectionError("reference model must use 32-bit weights")
    return (candidate.n_weights * candidate.bitwidth) / (candidate.n_weights * FP_BITS)


def energy_norm(candidate) -> float:
    if candidate.e_accurate == 0:
        raise SelectionError("accurate-DRAM energy is zero")
    ratio = candidate.e_approx / candidate.e_accurate
    if ratio > 1:
        warnings.warn(f"{getattr(candidate, 'model_id', 'candidate')}: approximate DRAM costs more than accurate DRAM")
    return ratio


def _check_weights(mu: float, eps: float) -> None:
    if mu < 0 or eps < 0:
        raise SelectionError("mu and eps must be non-negative")


def reward(acc: float, m_norm: float, e_norm: float, mu: float, eps: float) -> float:
    _check_weights(mu, eps)
    return acc - (mu * m_norm + eps * e_norm)


def select(candidates: Sequence[Candidate], mu: float, eps: float) -> Candidate:
    """Highest reward; ties go to the smaller memory, then the smaller energy."""
    _check_weights(mu, eps)
    if not candidates:
        raise SelectionError("no candidates to select from")

    def key(c):
        m, e = memory_norm(c), energy_norm(c)
        return (-reward(c.accuracy, m, e, mu, eps), m, e)

    return min(candidates, key=key)


@dataclass(frozen=True)
class RewardRow:
    model_id: str
    mu: float
    eps: float
    m_norm: float
    e_norm: float
    reward: float
    selected: bool


@dataclass(frozen=True)
class RewardReport:
    rows: tuple

    FIELDS = ("candidate", "mu", "eps", "m_norm", "e_norm", "reward", "selected")

    def selected(self, mu: float, eps: float) -> str:
        for r in self.rows:
            if r.mu == mu and r.eps == eps and r.selected:
                return r.model_id
        raise KeyError((mu, eps))

    def to_csv(self, path, header_comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(self.FIELDS)
            for r in self.rows:
                w.writerow([r.model_id, repr(r.mu), repr(r.eps), repr(r.m_norm), repr(r.e_norm), repr(r.reward), int(r.selected)])

    def to_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def reward_grid(
    candidates: Sequence[Candidate],
    mus: Iterable[float] = DEFAULT_GRID,
    epss: Iterable[float] = DEFAULT_GRID,
) -> RewardReport:
    """Reward of every candidate at every ``(mu, eps)`` point, marking the selection."""
    rows = []
    epss = list(epss)
    for mu in mus:
        for eps in epss:
            best = select(candidates, mu, eps)
            for c in candidates:
                m, e = memory_norm(c), energy_norm(c)
                rows.append(RewardRow(c.model_id, float(mu), float(eps), m, e, reward(c.accuracy, m, e, mu, eps), c is best))
    return RewardReport(tuple(rows))


def carbon_emission(t: float, p_c: float, p_r: float, p_g: float, g: float) -> dict:
    """Energy ``p_t`` (kWh) and ``CO2e`` (lbs) of training for ``t`` hours.

    ``p_c``, ``p_r`` and ``p_g`` are CPU, DRAM and per-GPU power in watts;
    ``g`` is the GPU count.
    """
    for name, v in (("t", t), ("p_c", p_c), ("p_r", p_r), ("p_g", p_g), ("g", g)):
        if v < 0:
            raise SelectionError(f"{name} must be non-negative")
    p_t = PUE * t * (p_c + p_r + g * p_g) / 1000.0
    return {"p_t": p_t, "co2e": CO2_PER_KWH * p_t}
