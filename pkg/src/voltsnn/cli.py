"""``voltsnn`` command line: train, profile, fat, energy, select, report.

Each command reads its config plus the artifacts of earlier commands from
the output directory and writes its own artifacts there. Files are written
to a temporary name and moved into place, so a crash never leaves a
half-written output. Every CSV starts with a provenance comment and every
JSON carries a ``provenance`` object; neither holds timestamps, so a rerun
with the same config and seed reproduces the files byte for byte.

Exit codes: 0 ok, 1 other failure, 2 usage, 3 invalid config, 4 missing
input file, 5 DRAM capacity, 6 malformed input file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import CapacityError, __version__
from . import checkpoint as ckpt
from . import plotting
from .config import ConfigError, ExperimentConfig, load_config
from .dram_energy import compare_reports, simulate_trace
from .dram_error import subarray_bers, weak_cells_for_ber
from .dram_mapping import BASELINE, ENFORCESNN, generate_trace, map_layout
from .fat_pipeline import (
    AccuracyProfile,
    DramStack,
    FatSchedule,
    _workers,
    accuracy_profile,
    conventional_schedule,
    derive_fat_schedule,
    derive_seed,
    determine_ber_th,
    fault_aware_train,
    retraining_cost,
)
from .fixedpoint import FP32, Float32Format, Rounding, parse_format
from .idx import IdxFormatError, load_dataset
from .selection import Candidate, reward_grid
from .snn_core import SnnModel, assign_labels, evaluate, init_model, train_epoch, with_labels

log = logging.getLogger("voltsnn")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_CAPACITY = 5
EXIT_FORMAT = 6

COMMANDS = ("train", "profile", "fat", "energy", "select", "report")

# seed streams, one per command
_TRAIN, _PROFILE, _FAT, _ENERGY, _SELECT = 1, 2, 3, 4, 5

CHECKPOINT = "checkpoint.json"
CHECKPOINT_FAT = "checkpoint_fat.json"


# -- output plumbing --------------------------------------------------------


def _atomic(path: Path, write: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_text(path: Path, text: str) -> None:
    _atomic(path, lambda p: p.write_text(text))


def _csv_text(header: str, fields, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


class Run:
    """Everything a command needs: validated config, paths, provenance."""

    def __init__(self, cfg: ExperimentConfig, base: Path, command: str, out: Path, checkpoint: Optional[Path] = None):
        self.cfg, self.base, self.command, self.out = cfg, base, command, out
        self.checkpoint = checkpoint
        self.sha = cfg.sha256()
        self._data = None

    @property
    def header(self) -> str:
        return f"voltsnn config_sha256={self.sha} seed={self.cfg.seed} command={self.command}"

    @property
    def provenance(self) -> dict:
        return {"config_sha256": self.sha, "seed": self.cfg.seed, "command": self.command, "version": __version__}

    def path(self, name: str) -> Path:
        return self.out / name

    def need(self, name: str) -> Path:
        p = self.path(name)
        if not p.is_file():
            raise FileNotFoundError(f"{p} not found; run the command that produces it first")
        return p

    def write_json(self, name: str, obj: dict) -> Path:
        doc = dict(obj)
        doc["provenance"] = self.provenance
        p = self.path(name)
        _write_text(p, json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return p

    def write_csv(self, name: str, fields, rows) -> Path:
        p = self.path(name)
        _write_text(p, _csv_text(self.header, fields, rows))
        return p

    def write_via(self, name: str, to_csv: Callable) -> Path:
        """For result objects that know how to write their own CSV."""
        p = self.path(name)
        _atomic(p, lambda tmp: to_csv(tmp, header_comment=self.header))
        return p

    # -- inputs --

    def _resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    def data(self) -> dict:
        """``train``, ``validation`` (may be None) and ``test`` splits."""
        if self._data is None:
            ds = self.cfg.dataset
            for rel in (ds.train_images, ds.train_labels, ds.test_images, ds.test_labels):
                if not self._resolve(rel).is_file():
                    raise FileNotFoundError(f"dataset file {self._resolve(rel)} not found")
            extra = ds.n_validation or 0
            limit = None if ds.n_train is None else ds.n_train + extra
            x, y = load_dataset(self._resolve(ds.train_images), self._resolve(ds.train_labels), limit)
            xt, yt = load_dataset(self._resolve(ds.test_images), self._resolve(ds.test_labels), ds.n_test)
            if x.shape[1] != self.cfg.network.n_inputs:
                raise ConfigError(f"images have {x.shape[1]} pixels, network.n_inputs is {self.cfg.network.n_inputs}")
            n = len(x) - extra
            val = (x[n:], y[n:]) if extra else None
            if extra and len(val[0]) < extra:
                raise ConfigError(f"training file holds {len(x)} samples, need n_train + n_validation")
            self._data = {"train": (x[:n], y[:n]), "validation": val, "test": (xt, yt)}
        return self._data

    def model(self, name: str = CHECKPOINT) -> SnnModel:
        if name == CHECKPOINT and self.checkpoint is not None:
            if not self.checkpoint.is_file():
                raise FileNotFoundError(f"{self.checkpoint} not found")
            return ckpt.load(self.checkpoint)
        return ckpt.load(self.need(name))

    def stack(self, fmt=None, guarded: bool = True) -> DramStack:
        d, q = self.cfg.dram, self.cfg.quantization
        return DramStack(
            geometry=d.geometry.build(),
            fmt=parse_format(q.format) if fmt is None else fmt,
            rounding=q.rounding,
            policy=d.policy,
            ber_th=d.ber_th if guarded else None,
            flip_probability=d.flip_probability,
            variant=d.variant,
        )

    def save_model(self, name: str, model: SnnModel, stack: DramStack, seed: int) -> None:
        stored = stack.store(model.weights, seed)
        text = ckpt.dumps(model, stored, stack.rounding, self.provenance)
        _write_text(self.path(name), text)


def _accuracy(model: SnnModel, split, seed: int, weights=None) -> float:
    x, y = split
    return evaluate(model, x, y, seed, weights=weights)


# -- train ------------------------------------------------------------------


def cmd_train(run: Run) -> None:
    cfg, net = run.cfg, run.cfg.network
    data = run.data()
    x, y = data["train"]
    model = init_model(net.n_inputs, net.n_neurons, net.snn_params(), net.init_seed)
    for epoch in range(net.epochs):
        log.info("training epoch %d/%d on %d samples", epoch + 1, net.epochs, len(x))
        model = train_epoch(model, x, derive_seed(cfg.seed, _TRAIN, epoch))
    model = with_labels(model, assign_labels(model, x, y, derive_seed(cfg.seed, _TRAIN, 100)))
    stack = run.stack()
    store_seed = derive_seed(cfg.seed, _TRAIN, 101)
    eval_seed = derive_seed(cfg.seed, _TRAIN, 102)
    acc = _accuracy(model, data["test"], eval_seed)
    acc_q = _accuracy(model, data["test"], eval_seed, stack.quantized(model.weights, store_seed))
    run.save_model(CHECKPOINT, model, stack, store_seed)
    run.write_json("train.json", {
        "n_train": len(x),
        "n_test": len(data["test"][0]),
        "n_neurons": net.n_neurons,
        "format": stack.fmt.name,
        "test_accuracy": acc,
        "test_accuracy_quantized": acc_q,
        "silent_neurons": int(np.sum(model.label_map < 0)),
    })
    log.info("test accuracy %.4f (%s: %.4f)", acc, stack.fmt.name, acc_q)


# -- profile ----------------------------------------------------------------


def _profile_doc(prof: AccuracyProfile) -> dict:
    return {
        "bers": prof.bers.tolist(),
        "mean": prof.mean.tolist(),
        "std": prof.std.tolist(),
        "baseline": prof.baseline,
        "trials": prof.trials.tolist(),
    }


def _profile_from_doc(d: dict) -> AccuracyProfile:
    return AccuracyProfile(np.asarray(d["bers"]), np.asarray(d["mean"]), np.asarray(d["std"]), d["baseline"],
                           np.asarray(d["trials"]))


def _profile(run: Run, model: SnnModel, stack: DramStack, trials: Optional[int] = None) -> AccuracyProfile:
    p = run.cfg.profile
    x, y = run.data()["test"]
    return accuracy_profile(model, p.bers, trials or p.trials, stack, x, y, derive_seed(run.cfg.seed, _PROFILE))


def cmd_profile(run: Run) -> None:
    cfg = run.cfg
    model = run.model()
    # the analysis sweeps BERs past any threshold, so no subarray is excluded
    stack = run.stack(guarded=False)
    prof = _profile(run, model, stack)
    run.write_via("profile.csv", prof.to_csv)

    doc = _profile_doc(prof)
    doc["max_drop"] = cfg.profile.max_drop
    try:
        ber_th = determine_ber_th(prof, cfg.profile.max_drop)
    except ValueError as e:
        log.warning("no tolerable BER: %s", e)
        ber_th = None
    doc["ber_th"] = ber_th
    if ber_th is not None and cfg.dram.ber_th is not None and ber_th != cfg.dram.ber_th:
        log.warning("profiled BER threshold %g differs from dram.ber_th %g", ber_th, cfg.dram.ber_th)
    doc["schedule"] = None
    if ber_th is not None:
        cap = cfg.fat.max_ber if cfg.fat.max_ber is not None else ber_th
        doc["schedule"] = list(derive_fat_schedule(prof, max_ber=cap, region_a_drop=cfg.fat.region_a_drop).bers)
    run.write_json("profile.json", doc)
    log.info("baseline %.4f, BER threshold %s, schedule %s", prof.baseline, ber_th, doc["schedule"])

    if cfg.profile.rounding_study and not isinstance(stack.fmt, Float32Format):
        rows = []
        for r in Rounding:
            rp = _profile(run, model, replace(stack, rounding=r), trials=1)
            rows += [[r.value, _num(b), _num(a)] for b, a in zip(rp.bers, rp.mean)]
        run.write_csv("profile_rounding.csv", ["rounding", "ber", "accuracy"], rows)


# -- fat --------------------------------------------------------------------


def _schedule(run: Run) -> FatSchedule:
    f = run.cfg.fat
    if f.mode == "explicit":
        return FatSchedule(tuple(f.schedule))
    if f.mode == "conventional":
        return conventional_schedule()
    doc = json.loads(run.need("profile.json").read_text())
    if doc.get("schedule") is None:
        raise ConfigError("profile found no tolerable BER; use an explicit or conventional FAT schedule")
    return FatSchedule(tuple(doc["schedule"]))


def cmd_fat(run: Run) -> None:
    cfg = run.cfg
    model0 = run.model()
    schedule = _schedule(run)
    data = run.data()
    keep_on = data["validation"] or data["test"]
    stack = run.stack()
    log.info("FAT over %s (%s mode)", list(schedule.bers), cfg.fat.mode)
    res = fault_aware_train(model0, schedule, stack, data["train"], keep_on, derive_seed(cfg.seed, _FAT),
                            cfg.fat.collapse_drop)

    eval_seed = derive_seed(cfg.seed, _FAT, 100)
    store_seed = derive_seed(cfg.seed, _FAT, 101)
    before = _accuracy(model0, data["test"], eval_seed, stack.quantized(model0.weights, store_seed))
    after = _accuracy(res.model, data["test"], eval_seed, stack.quantized(res.model.weights, store_seed))
    run.save_model(CHECKPOINT_FAT, res.model, stack, store_seed)
    run.write_via("fat_levels.csv", res.to_csv)

    prof = _profile(run, res.model, run.stack(guarded=False))
    run.write_via("profile_fat.csv", prof.to_csv)
    run.write_json("fat.json", {
        "mode": cfg.fat.mode,
        "schedule": list(schedule.bers),
        "selection_split": "validation" if data["validation"] else "test",
        "best_selection_accuracy": res.accuracy,
        "initial_selection_accuracy": res.baseline_accuracy,
        "test_accuracy_before": before,
        "test_accuracy_after": after,
        "collapsed_levels": [r.level for r in res.log if r.collapse],
        "retraining_cost": retraining_cost(schedule, cfg.fat.epoch_time_factor, cfg.fat.epoch_energy_factor),
        "profile": _profile_doc(prof),
    })
    log.info("test accuracy %.4f -> %.4f", before, after)


# -- energy -----------------------------------------------------------------


def _formats(cfg: ExperimentConfig) -> list:
    names = ["fp32", cfg.quantization.format, *cfg.selection.formats]
    return [parse_format(n) for n in dict.fromkeys(names)]


class EnergyModel:
    """Streaming-read energy of a weight image per (format, policy, voltage).

    One weak-cell map is drawn per supply voltage and shared by every
    format and policy, as they would all sit on the same device.
    """

    def __init__(self, run: Run):
        self.cfg = run.cfg
        self.geometry = run.cfg.dram.geometry.build()
        self.seed = run.cfg.seed
        self._bers = {}
        self._cache = {}

    def subarray_table(self, v: float):
        d = self.cfg.dram
        if v not in self._bers:
            ber = next((p.ber for p in d.voltage_ber if p.v_supply == v), 0.0)
            if ber == 0 or d.ber_th is None:
                self._bers[v] = None
            else:
                weak = weak_cells_for_ber(self.geometry, ber, derive_seed(self.seed, _ENERGY, round(v * 1e6)),
                                          d.flip_probability)
                self._bers[v] = subarray_bers(weak)
        return self._bers[v]

    def report(self, fmt, policy: str, v: float, n_weights: int):
        key = (fmt.name, policy, v, n_weights)
        if key not in self._cache:
            d = self.cfg.dram
            table = self.subarray_table(v) if policy == ENFORCESNN else None
            layout = map_layout(policy, self.geometry, n_weights * fmt.bytes_per_weight, table,
                                d.ber_th if table is not None else None, d.variant)
            self._cache[key] = simulate_trace(generate_trace(layout), d.energy.at(v))
        return self._cache[key]


ENERGY_FIELDS = (
    "format", "policy", "v_supply", "ber", "hits", "misses", "conflicts", "energy_nj", "latency_ns",
    "bytes_transferred", "throughput_bytes_per_s", "hit_rate", "energy_saving_vs_reference", "speedup_vs_reference",
)


def cmd_energy(run: Run) -> None:
    cfg = run.cfg
    net, d = cfg.network, cfg.dram
    n_weights = net.n_inputs * net.n_neurons
    em = EnergyModel(run)
    v_nom = d.energy.v_nominal
    ref = em.report(FP32, BASELINE, v_nom, n_weights)
    qfmt = parse_format(cfg.quantization.format)

    rows, records = [], []
    for fmt in _formats(cfg):
        for policy in (BASELINE, ENFORCESNN):
            for v in sorted(d.supply_voltages, reverse=True):
                rep = em.report(fmt, policy, v, n_weights)
                cmp = compare_reports(ref, rep)
                rd = rep.to_dict()
                rows.append([fmt.name, policy, _num(v), _num(d.ber_at(v)),
                             *(rd[k] if isinstance(rd[k], int) else _num(rd[k]) for k in ENERGY_FIELDS[4:12]),
                             _num(cmp["energy_saving_fraction"]), _num(cmp["speedup"])])
                records.append({"format": fmt.name, "policy": policy, "v_supply": v, "ber": d.ber_at(v),
                                "report": rd, "vs_reference": cmp})
    run.write_csv("energy.csv", ENERGY_FIELDS, rows)

    v_low = min(d.supply_voltages)
    comparisons = {
        "format_saving_nominal": {
            p: compare_reports(em.report(FP32, p, v_nom, n_weights), em.report(qfmt, p, v_nom, n_weights))
            for p in (BASELINE, ENFORCESNN)
        },
        "combined_lowest_voltage": {
            "v_supply": v_low,
            **compare_reports(ref, em.report(qfmt, ENFORCESNN, v_low, n_weights)),
        },
        "mapping_speedup": {
            repr(v): compare_reports(em.report(FP32, BASELINE, v, n_weights), em.report(qfmt, ENFORCESNN, v, n_weights))
            for v in sorted(d.supply_voltages)
        },
    }
    run.write_json("energy.json", {
        "n_weights": n_weights,
        "reference": {"format": "fp32", "policy": BASELINE, "v_supply": v_nom},
        "reports": records,
        "comparisons": comparisons,
    })
    c = comparisons["combined_lowest_voltage"]
    log.info("%s + %s at %g V saves %.1f%% vs FP32 baseline at %g V",
             qfmt.name, ENFORCESNN, v_low, 100 * c["energy_saving_fraction"], v_nom)


# -- select -----------------------------------------------------------------


def _candidate_models(run: Run) -> list[tuple[str, SnnModel]]:
    models = [("base", run.model())]
    if run.path(CHECKPOINT_FAT).is_file():
        models.append(("fat", run.model(CHECKPOINT_FAT)))
    return models


def cmd_select(run: Run) -> None:
    cfg = run.cfg
    d, s = cfg.dram, cfg.selection
    models = _candidate_models(run)
    x, y = run.data()["test"]
    em = EnergyModel(run)
    voltages = sorted(d.supply_voltages, reverse=True)
    formats = [parse_format(f) for f in s.formats]
    eval_seed = derive_seed(cfg.seed, _SELECT)

    jobs = []
    for mi, (name, model) in enumerate(models):
        for fi, fmt in enumerate(formats):
            stack = run.stack(fmt=fmt)
            stored = stack.store(model.weights, derive_seed(cfg.seed, _SELECT, mi, fi))
            for vi, v in enumerate(voltages):
                ber = d.ber_at(v)
                # without errors every trial would be identical
                for t in range(s.trials if ber > 0 else 1):
                    jobs.append((mi, fi, vi, t, stack, stored, ber))

    def one(job):
        mi, fi, vi, t, stack, stored, ber = job
        w = stack.read_back(stored, ber, derive_seed(cfg.seed, _SELECT, mi, fi, vi, t))
        return evaluate(models[mi][1], x, y, eval_seed, weights=w)

    n = _workers(None)
    if n > 1:
        with ThreadPoolExecutor(n) as ex:
            accs = list(ex.map(one, jobs))
    else:
        accs = [one(j) for j in jobs]
    by_key = {}
    for job, acc in zip(jobs, accs):
        by_key.setdefault(job[:3], []).append(acc)

    cands = []
    for mi, (name, model) in enumerate(models):
        n_w = model.weights.size
        for fi, fmt in enumerate(formats):
            accurate = em.report(fmt, d.policy, d.energy.v_nominal, n_w).energy_nj
            for vi, v in enumerate(voltages):
                cands.append(Candidate(
                    model_id=f"{name}-{fmt.name}-{v:g}V",
                    accuracy=float(np.mean(by_key[(mi, fi, vi)])),
                    n_weights=n_w,
                    bitwidth=fmt.total_bits,
                    e_approx=em.report(fmt, d.policy, v, n_w).energy_nj,
                    e_accurate=accurate,
                    ber=d.ber_at(v),
                    v_supply=v,
                ))
    run.write_json("candidates.json", {"candidates": [vars(c) for c in cands]})
    rep = reward_grid(cands, s.mu, s.eps)
    run.write_via("reward.csv", rep.to_csv)
    picks = {f"mu={m:g},eps={e:g}": rep.selected(float(m), float(e)) for m in s.mu for e in s.eps}
    run.write_json("selection.json", {"selected": picks})
    log.info("selected at mu=eps=0: %s", rep.selected(float(s.mu[0]), float(s.eps[0])))


# -- report -----------------------------------------------------------------


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def _png(run: Run, name: str, draw: Callable[[Path], None]) -> None:
    _atomic(run.path(name), draw)


def _rounding(run: Run) -> None:
    rows = _read_csv(run.need("profile_rounding.csv"))
    series = {}
    for r in rows:
        b, a = series.setdefault(r["rounding"], ([], []))
        b.append(float(r["ber"]))
        a.append(float(r["accuracy"]))
    run.write_csv("rounding_study.csv", ["rounding", "ber", "accuracy"],
                  [[k, _num(b), _num(a)] for k, (bs, accs) in series.items() for b, a in zip(bs, accs)])
    _png(run, "rounding_study.png", lambda p: plotting.rounding_study(p, series))


def _tolerance(run: Run) -> None:
    base = json.loads(run.need("profile.json").read_text())
    fat = json.loads(run.need("fat.json").read_text())["profile"]
    if base["bers"] != fat["bers"]:
        raise ConfigError("baseline and FAT profiles were taken at different BERs")
    fields = ["ber", "baseline_mean", "baseline_std", "fat_mean", "fat_std"]
    rows = [[_num(b), _num(m0), _num(s0), _num(m1), _num(s1)]
            for b, m0, s0, m1, s1 in zip(base["bers"], base["mean"], base["std"], fat["mean"], fat["std"])]
    run.write_csv("error_tolerance.csv", fields, rows)
    curves = {"baseline": (base["mean"], base["std"]), "FAT": (fat["mean"], fat["std"])}
    _png(run, "error_tolerance.png", lambda p: plotting.tolerance(p, base["bers"], curves, base.get("ber_th")))


def _energy(run: Run) -> None:
    doc = json.loads(run.need("energy.json").read_text())
    fields = ["format", "policy", "v_supply", "energy_nj", "energy_saving", "speedup"]
    rows, saving, speedup, volts = [], {}, {}, []
    for r in doc["reports"]:
        label = f"{r['format']}/{r['policy']}"
        rows.append([r["format"], r["policy"], _num(r["v_supply"]), _num(r["report"]["energy_nj"]),
                     _num(r["vs_reference"]["energy_saving_fraction"]), _num(r["vs_reference"]["speedup"])])
        saving.setdefault(label, []).append(r["vs_reference"]["energy_saving_fraction"])
        speedup.setdefault(label, []).append(r["vs_reference"]["speedup"])
        if r["v_supply"] not in volts:
            volts.append(r["v_supply"])
    run.write_csv("energy_by_voltage.csv", fields, rows)
    _png(run, "energy_by_voltage.png", lambda p: plotting.energy(p, volts, saving, speedup))


def _selection(run: Run) -> None:
    rows = _read_csv(run.need("reward.csv"))
    cands = {c["model_id"]: c for c in json.loads(run.need("candidates.json").read_text())["candidates"]}
    mus = sorted({float(r["mu"]) for r in rows})
    epss = sorted({float(r["eps"]) for r in rows})
    picked = {(float(r["mu"]), float(r["eps"])): r["candidate"] for r in rows if r["selected"] == "1"}
    out = []
    for (m, e), name in sorted(picked.items()):
        c = cands[name]
        out.append([_num(m), _num(e), name, _num(c["accuracy"]), _num(c["bitwidth"] / 32),
                    _num(c["e_approx"] / c["e_accurate"])])
    run.write_csv("selection_map.csv", ["mu", "eps", "selected", "accuracy", "m_norm", "e_norm"], out)
    _png(run, "selection_map.png", lambda p: plotting.selection_map(p, mus, epss, picked))

    eps0 = epss[0]
    curves = {}
    for r in rows:
        if float(r["eps"]) == eps0:
            curves.setdefault(r["candidate"], []).append(float(r["reward"]))
    run.write_csv("reward_curves.csv", ["candidate", "mu", "eps", "reward"],
                  [[r["candidate"], r["mu"], r["eps"], r["reward"]] for r in rows])
    _png(run, "reward_curves.png", lambda p: plotting.rewards(p, mus, curves, eps0))


FIGURES = (("rounding study", _rounding), ("error tolerance", _tolerance), ("energy", _energy), ("selection", _selection))


def cmd_report(run: Run) -> None:
    """Render every figure whose inputs exist; fail only if none do."""
    done = []
    for name, make in FIGURES:
        try:
            make(run)
            done.append(name)
        except FileNotFoundError as e:
            log.warning("skipping %s: %s", name, e)
    if not done:
        raise FileNotFoundError(f"no pipeline outputs found in {run.out}")
    log.info("rendered %s", ", ".join(done))


HANDLERS = {
    "train": cmd_train,
    "profile": cmd_profile,
    "fat": cmd_fat,
    "energy": cmd_energy,
    "select": cmd_select,
    "report": cmd_report,
}


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="voltsnn", description="SNN weights on reduced-voltage approximate DRAM.")
    ap.add_argument("--version", action="version", version=f"voltsnn {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", type=Path, help="override the output directory")
    ap.add_argument("--checkpoint", type=Path, help="input checkpoint instead of <out>/checkpoint.json")
    ap.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    if args.seed is not None and args.seed < 0:
        print("voltsnn: --seed must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    try:
        if not args.config.is_file():
            raise FileNotFoundError(f"config {args.config} not found")
        cfg, base = load_config(args.config, seed=args.seed)
        out = args.out if args.out is not None else base / cfg.output_dir
        HANDLERS[args.command](Run(cfg, base, args.command, out, args.checkpoint))
    except ConfigError as e:
        print(f"voltsnn: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"voltsnn: missing file: {e}", file=sys.stderr)
        return EXIT_MISSING
    except CapacityError as e:
        print(f"voltsnn: DRAM capacity: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (IdxFormatError, ckpt.CheckpointError) as e:
        print(f"voltsnn: malformed input: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except Exception as e:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"voltsnn: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
