"""Fully-connected LIF network with rate coding, weight-dependent STDP and
lateral inhibition, in the style of Diehl & Cook (2015).

Every input pixel drives every excitatory neuron. A neuron that fires
inhibits all the others on the next timestep (graded), or, with
``hard_wta``, only the neuron with the largest overshoot fires and every
other membrane is reset. Learning is post-synaptically triggered:

    dw = eta * (x_pre - x_target) * (w_max - w) ** mu,   w in [0, 1]

Inference is frozen (no STDP, no threshold adaptation). ``weights=`` lets
callers evaluate a corrupted copy of the weights without touching the model.
Each sample draws its spikes from its own generator keyed by
``(seed, sample index, attempt)``, so results do not depend on batching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numba
import numpy as np

from . import VoltsnnError


class UnlabeledModelError(VoltsnnError):
    pass


@dataclass(frozen=True)
class SnnParams:
    duration_ms: float = 350.0
    dt_ms: float = 1.0
    max_rate_hz: float = 63.75
    v_rest: float = -65.0
    v_reset: float = -60.0
    v_thresh: float = -52.0
    tau_mem_ms: float = 100.0
    refractory_ms: float = 5.0
    theta_plus: float = 0.5
    tau_theta_ms: float = 1e7
    inhibition_strength: float = 100.0
    hard_wta: bool = False
    tau_trace_ms: float = 20.0
    eta: float = 0.01
    x_target: float = 0.4
    mu: float = 0.2
    w_max: float = 1.0
    weight_norm: Optional[float] = 78.4
    init_scale: float = 0.3
    min_spikes: int = 5
    max_retries: int = 3

    def __post_init__(self):
        if self.dt_ms <= 0 or self.duration_ms <= 0:
            raise ValueError("dt and duration must be positive")
        if min(self.tau_mem_ms, self.tau_trace_ms, self.tau_theta_ms) <= 0:
            raise ValueError("time constants must be positive")
        if self.inhibition_strength < 0 or self.theta_plus < 0:
            raise ValueError("inhibition and theta_plus must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_ms / self.dt_ms))

    @property
    def refractory_steps(self) -> int:
        return int(round(self.refractory_ms / self.dt_ms))

    def _kernel_args(self):
        return (
            self.v_rest, self.v_reset, self.v_thresh,
            math.exp(-self.dt_ms / self.tau_mem_ms), self.refractory_steps,
            self.theta_plus, math.exp(-self.dt_ms / self.tau_theta_ms),
            self.inhibition_strength, self.hard_wta,
            math.exp(-self.dt_ms / self.tau_trace_ms),
            self.eta, self.x_target, self.mu, self.w_max,
        )


@dataclass
class SnnModel:
    weights: np.ndarray
    theta: np.ndarray
    params: SnnParams = field(default_factory=SnnParams)
    label_map: Optional[np.ndarray] = None

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "SnnModel":
        return SnnModel(
            self.weights.copy(),
            self.theta.copy(),
            self.params,
            None if self.label_map is None else self.label_map.copy(),
        )


def init_model(n_inputs: int, n_neurons: int, params: SnnParams = SnnParams(), seed: int = 0) -> SnnModel:
    if n_inputs < 1 or n_neurons < 1:
        raise ValueError("network needs at least one input and one neuron")
    rng = np.random.default_rng(seed)
    w = params.init_scale * rng.random((n_inputs, n_neurons))
    return SnnModel(np.clip(w, 0.0, params.w_max), np.zeros(n_neurons), params)


# -- spike generation ---------------------------------------------------------


@dataclass(frozen=True)
class SpikeTrain:
    """Spikes as parallel ``(step, pixel)`` arrays, sorted by step."""

    steps: np.ndarray
    pixels: np.ndarray
    n_steps: int
    n_pixels: int
    dt_ms: float

    @property
    def duration_ms(self) -> float:
        return self.n_steps * self.dt_ms

    @property
    def n_spikes(self) -> int:
        return len(self.steps)

    def times(self, pixel: int) -> np.ndarray:
        """Sorted spike times (ms) of one pixel."""
        return self.steps[self.pixels == pixel] * self.dt_ms

    def raster(self) -> np.ndarray:
        r = np.zeros((self.n_steps, self.n_pixels), dtype=bool)
        r[self.steps, self.pixels] = True
        return r


def _spike_prob(intensity, max_rate_hz: float, dt_ms: float) -> np.ndarray:
    return np.clip(np.asarray(intensity, dtype=np.float64) * max_rate_hz * dt_ms / 1000.0, 0.0, 1.0)


def _draw(rng: np.random.Generator, prob: np.ndarray, n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Bernoulli spikes per step; only pixels with nonzero rate consume randomness."""
    live = np.flatnonzero(prob > 0)
    hits = rng.random((n_steps, len(live))) < prob[live]
    t, k = np.nonzero(hits)
    return t.astype(np.int64), live[k].astype(np.int64)


def _check_intensity(x: np.ndarray) -> None:
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise ValueError("pixel intensities must be normalised to [0, 1]")


def encode_rate(image, duration_ms: float, max_rate_hz: float, seed, dt_ms: float = 1.0) -> SpikeTrain:
    """Poisson rate code: each pixel spikes at ``intensity * max_rate``."""
    x = np.asarray(image, dtype=np.float64).ravel()
    _check_intensity(x)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    steps = int(round(duration_ms / dt_ms))
    t, pix = _draw(rng, _spike_prob(x, max_rate_hz, dt_ms), steps)
    return SpikeTrain(t, pix, steps, x.size, dt_ms)


def _sample_rng(seed: int, index: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index), int(attempt)])


def _as_seed(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(2**63))
    if seed is None or int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    return int(seed)


# -- single-neuron building blocks -------------------------------------------


@dataclass(frozen=True)
class LifState:
    v: np.ndarray
    theta: np.ndarray
    refractory: np.ndarray

    @classmethod
    def rest(cls, n: int, params: SnnParams, theta=None) -> "LifState":
        th = np.zeros(n) if theta is None else np.asarray(theta, dtype=np.float64).copy()
        return cls(np.full(n, params.v_rest), th, np.zeros(n, dtype=np.int64))


def lif_step(state: LifState, input_current, dt_ms: float, params: SnnParams, adapt: bool = True):
    """One step of leaky integrate-and-fire dynamics; returns ``(state, fired)``.

    The membrane relaxes toward ``v_rest`` by ``exp(-dt/tau_mem)``, then the
    input is added unless the neuron is refractory. Crossing
    ``v_thresh + theta`` fires, resets to ``v_reset`` and starts the
    refractory period. With ``adapt`` the threshold rises by ``theta_plus``
    on each spike and decays with ``tau_theta``.
    """
    if dt_ms <= 0:
        raise ValueError("dt must be positive")
    p = params
    refrac_steps = int(round(p.refractory_ms / dt_ms))
    v = p.v_rest + (state.v - p.v_rest) * math.exp(-dt_ms / p.tau_mem_ms)
    active = state.refractory <= 0
    v = v + np.where(active, np.asarray(input_current, dtype=np.float64), 0.0)
    refrac = np.maximum(state.refractory - 1, 0)
    fired = active & (v >= p.v_thresh + state.theta)
    v = np.where(fired, p.v_reset, v)
    refrac = np.where(fired, refrac_steps, refrac)
    theta = state.theta.astype(np.float64, copy=True)
    if adapt:
        theta = (theta + p.theta_plus * fired) * math.exp(-dt_ms / p.tau_theta_ms)
    return LifState(v, theta, refrac), fired


def stdp_update(weights: np.ndarray, pre_traces, post_spikes, params: SnnParams) -> np.ndarray:
    """Post-triggered weight-dependent STDP on the columns of spiking neurons."""
    x = np.asarray(pre_traces, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("pre-synaptic traces must be non-negative")
    post = np.asarray(post_spikes, dtype=bool)
    w = np.array(weights, dtype=np.float64, copy=True)
    if post.any():
        cols = w[:, post]
        cols += params.eta * (x - params.x_target)[:, None] * np.power(
            np.clip(params.w_max - cols, 0.0, None), params.mu
        )
        w[:, post] = np.clip(cols, 0.0, params.w_max)
    return w


# -- compiled network simulation ---------------------------------------------


@numba.njit(cache=True, nogil=True)
def _run(weights, theta, steps, pixels, n_steps, learn, record,
         v_rest, v_reset, v_thresh, decay_v, refrac_steps,
         theta_plus, decay_theta, inh, hard_wta,
         decay_x, eta, x_target, mu, w_max):
    """Present one spike train; mutates ``weights`` and ``theta`` when learning.

    Matches ``lif_step`` + ``stdp_update`` step for step, with inhibition from
    step t's spikes applied to step t+1's input.
    """
    n_in, n = weights.shape
    v = np.full(n, v_rest)
    refrac = np.zeros(n, np.int64)
    inhib = np.zeros(n)
    counts = np.zeros(n, np.int64)
    x = np.zeros(n_in)
    cur = np.zeros(n)
    fired = np.zeros(n, np.bool_)
    k = 0
    n_spk = len(steps)
    for t in range(n_steps):
        start = k
        while k < n_spk and steps[k] == t:
            k += 1
        if learn:
            for i in range(n_in):
                x[i] *= decay_x
            for s in range(start, k):
                x[pixels[s]] += 1.0
        for j in range(n):
            cur[j] = inhib[j]
        for s in range(start, k):
            row = pixels[s]
            for j in range(n):
                cur[j] += weights[row, j]
        n_fired = 0
        best = -1
        best_over = -np.inf
        for j in range(n):
            vj = v_rest + (v[j] - v_rest) * decay_v
            active = refrac[j] <= 0
            if active:
                vj += cur[j]
            refrac[j] = max(refrac[j] - 1, 0)
            fired[j] = active and vj >= v_thresh + theta[j]
            if fired[j]:
                n_fired += 1
                over = vj - v_thresh - theta[j]
                if over > best_over:
                    best_over = over
                    best = j
            v[j] = vj
        if hard_wta and n_fired > 0:
            for j in range(n):
                fired[j] = j == best
                v[j] = v_reset
            n_fired = 1
        for j in range(n):
            inhib[j] = 0.0
            if fired[j]:
                v[j] = v_reset
                refrac[j] = refrac_steps
                counts[j] += 1
                record[t, j] = True
                if learn:
                    theta[j] += theta_plus
                    for i in range(n_in):
                        w = weights[i, j]
                        room = w_max - w
                        if room < 0.0:
                            room = 0.0
                        w += eta * (x[i] - x_target) * room ** mu
                        weights[i, j] = min(max(w, 0.0), w_max)
            if not hard_wta and n_fired > 0:
                inhib[j] = -inh * (n_fired - (1 if fired[j] else 0))
            if learn:
                theta[j] *= decay_theta
    return counts


def _present(model: SnnModel, steps, pixels, learn: bool, weights=None, record=None) -> np.ndarray:
    p = model.params
    w = model.weights if weights is None else weights
    theta = model.theta if learn else model.theta.copy()
    if record is None:
        record = np.zeros((p.n_steps, model.n_neurons), dtype=np.bool_)
    return _run(w, theta, steps, pixels, p.n_steps, learn, record, *p._kernel_args())


def present(model: SnnModel, train: SpikeTrain, learn: bool = False, weights=None):
    """Run one spike train through the network.

    Returns ``(counts, raster)`` where ``raster[t, j]`` marks output spikes.
    With ``learn`` the model's weights and thresholds are updated in place.
    """
    p = model.params
    if train.n_pixels != model.n_inputs or train.n_steps != p.n_steps:
        raise ValueError("spike train does not match the network's inputs or duration")
    if learn and weights is not None:
        raise ValueError("cannot learn into a weight override")
    w = None if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    record = np.zeros((p.n_steps, model.n_neurons), dtype=np.bool_)
    counts = _present(model, train.steps, train.pixels, learn, w, record)
    return counts, record


def _normalise(model: SnnModel) -> None:
    norm = model.params.weight_norm
    if norm is None:
        return
    s = model.weights.sum(axis=0)
    s[s == 0] = 1.0
    model.weights *= norm / s
    np.clip(model.weights, 0.0, model.params.w_max, out=model.weights)


def _boost(attempt: int) -> float:
    return 1.0 + 0.5 * attempt


def _images(images, n_inputs: int) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.size == 0:
        return x.reshape(0, n_inputs)
    x = x.reshape(len(x), -1)
    if x.shape[1] != n_inputs:
        raise ValueError(f"images have {x.shape[1]} pixels, network expects {n_inputs}")
    _check_intensity(x)
    return x


def train_epoch(model: SnnModel, images, seed) -> SnnModel:
    """One unsupervised pass over ``images`` (rows of intensities in [0, 1]).

    Samples that draw fewer than ``min_spikes`` output spikes are presented
    again at a higher input rate, up to ``max_retries`` times. Weights are
    renormalised after every sample. Returns a new model.
    """
    out = model.copy()
    x = _images(images, out.n_inputs)
    seed = _as_seed(seed)
    p = out.params
    for i, img in enumerate(x):
        prob = _spike_prob(img, p.max_rate_hz, p.dt_ms)
        for attempt in range(p.max_retries + 1):
            t, pix = _draw(_sample_rng(seed, i, attempt), np.clip(prob * _boost(attempt), 0, 1), p.n_steps)
            counts = _present(out, t, pix, learn=True)
            if counts.sum() >= p.min_spikes:
                break
        _normalise(out)
    out.label_map = None
    return out


def spike_counts(model: SnnModel, images, seed, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-sample, per-neuron spike counts with learning off, shape ``(n, neurons)``."""
    p = model.params
    x = _images(images, model.n_inputs)
    seed = _as_seed(seed)
    w = np.ascontiguousarray(model.weights if weights is None else weights, dtype=np.float64)
    if w.shape != model.weights.shape:
        raise ValueError("weight override has the wrong shape")
    out = np.zeros((len(x), model.n_neurons), dtype=np.int64)
    for i, img in enumerate(x):
        prob = _spike_prob(img, p.max_rate_hz, p.dt_ms)
        for attempt in range(p.max_retries + 1):
            t, pix = _draw(_sample_rng(seed, i, attempt), np.clip(prob * _boost(attempt), 0, 1), p.n_steps)
            out[i] = _present(model, t, pix, learn=False, weights=w)
            if out[i].sum() >= p.min_spikes:
                break
    return out


def assign_labels(model: SnnModel, images, labels, seed, n_classes: Optional[int] = None) -> np.ndarray:
    """Label each neuron with the class that drives it hardest on average.

    Neurons that never fire get label -1 and take no part in voting.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("label assignment needs at least one labelled sample")
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes
    counts = spike_counts(model, images, seed)
    per_class = np.zeros((n_classes, model.n_neurons))
    for c in range(n_classes):
        sel = labels == c
        if sel.any():
            per_class[c] = counts[sel].mean(axis=0)
    label_map = np.argmax(per_class, axis=0)
    label_map[per_class.max(axis=0) == 0] = -1
    return label_map


def with_labels(model: SnnModel, label_map) -> SnnModel:
    label_map = np.asarray(label_map, dtype=np.int64)
    if label_map.shape != (model.n_neurons,):
        raise ValueError("label map needs one entry per neuron")
    return replace(model.copy(), label_map=label_map)


def vote(counts: np.ndarray, label_map: np.ndarray) -> np.ndarray:
    """Class whose labelled neurons have the highest mean count."""
    counts = np.atleast_2d(counts)
    classes = np.unique(label_map[label_map >= 0])
    if len(classes) == 0:
        return np.zeros(len(counts), dtype=np.int64)
    scores = np.full((len(counts), int(classes.max()) + 1), -1.0)
    for c in classes:
        scores[:, c] = counts[:, label_map == c].mean(axis=1)
    return np.argmax(scores, axis=1)


def predict(model: SnnModel, images, seed, weights: Optional[np.ndarray] = None) -> np.ndarray:
    if model.label_map is None:
        raise UnlabeledModelError("model has no label map; call assign_labels first")
    return vote(spike_counts(model, images, seed, weights), model.label_map)


def infer(model: SnnModel, image, seed, weights: Optional[np.ndarray] = None) -> int:
    return int(predict(model, np.asarray(image, dtype=np.float64).reshape(1, -1), seed, weights)[0])


def evaluate(model: SnnModel, images, labels, seed, weights: Optional[np.ndarray] = None) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("accuracy is undefined on an empty dataset")
    return float(np.mean(predict(model, images, seed, weights) == labels))
