"""Seeded batch sweeps over ICA, PICA and TrICA with flat CSV output."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .classify import (IcaConfig, IcaResult, LatentFeatures, LogisticConfig, PipelineConfig,
                       prepare_latent, run_ica, transfer_features)
from .factorization import FitConfig, fit_single, k_grid, pick_k, quality_score
from .graph import LabeledSplit, Network, binarize_labels, largest_class, split_labeled
from .ingest import LinqsDataset, PlantedPartitionParams, generate_planted_partition, load_linqs, read_network
from .propagation import AffinityConfig, network_propagation

log = logging.getLogger(__name__)

METHODS = ("ica", "pica", "trica")
DEFAULT_P_GRID = (0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
SWEEP_P = 0.5
CSV_COLUMNS = ("method", "source", "target", "p", "beta", "k", "repeat", "seed",
               "accuracy", "converged", "wall_time_s")


def accuracy(predicted, truth, eval_set) -> float:
    eval_set = np.asarray(eval_set, dtype=np.int64)
    if eval_set.size == 0:
        raise ValueError("empty evaluation set")
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    return float(np.mean(predicted[eval_set] == truth[eval_set]))


def pica_features(target: Network, split: LabeledSplit,
                  config: PipelineConfig = PipelineConfig()) -> LatentFeatures:
    """Structure features from the target's own propagation matrix, ``P_t ~ F_t R_t^T``."""
    P_t = network_propagation(target, config.affinity).p
    truth = target.label_index()
    fit = config.fit
    if config.k is not None:
        k = max(2, int(config.k))
        f = fit_single(P_t, k, fit.max_sweeps, fit.rel_tol, fit.seed, fit.epsilon)
        return LatentFeatures(f.F, k, [])
    fits, scores = {}, []
    for k in k_grid(max(2, config.k_max), config.k_step):
        fits[k] = fit_single(P_t, k, fit.max_sweeps, fit.rel_tol, fit.seed, fit.epsilon)
        scores.append((k, quality_score(fits[k].F, split.labeled, truth)))
    k = pick_k(scores, config.k_mode)
    return LatentFeatures(fits[k].F, k, scores)


@dataclass
class MethodOutcome:
    result: IcaResult
    k: Optional[int]


def run_method(method: str, source: Optional[Network], target: Network, split: LabeledSplit,
               config: PipelineConfig = PipelineConfig()) -> MethodOutcome:
    if method == "ica":
        return MethodOutcome(run_ica(target, split, None, config.ica, config.base), None)
    if method == "pica":
        latent = pica_features(target, split, config)
    elif method == "trica":
        if source is None:
            raise ValueError("trica needs a source network")
        latent = transfer_features(source, target, split, config)
    else:
        raise ValueError(f"unknown method {method!r}")
    rows = prepare_latent(latent.rows, config.standardize_latent)
    return MethodOutcome(run_ica(target, split, rows, config.ica, config.base), latent.k)


def as_binary_task(network: Network) -> Network:
    """Largest class against the rest, unless the network is already a binary task."""
    if len(network.label_set) == 2 and network.positive_label is not None:
        return network
    return binarize_labels(network, largest_class(network))


def load_network_ref(ref: str) -> Network:
    """Resolve a dataset reference.

    ``linqs:DIR/STEM`` reads ``STEM.content``/``STEM.cites``;
    ``planted:blocks=60x2,p_in=0.25,p_out=0.01,dim=20,noise=1,seed=0`` generates
    a planted-partition network; anything else is a network file.
    """
    if ref.startswith("linqs:"):
        stem = Path(ref[len("linqs:"):])
        return load_linqs(LinqsDataset.from_dir(stem.parent, stem.name))
    if ref.startswith("planted:"):
        opts = dict(part.split("=", 1) for part in ref[len("planted:"):].split(",") if part)
        size, _, count = opts.get("blocks", "50x2").partition("x")
        blocks = [int(size)] * int(count or 1) if count else [int(b) for b in size.split("/")]
        return generate_planted_partition(PlantedPartitionParams(
            blocks, float(opts.get("p_in", 0.2)), float(opts.get("p_out", 0.02)),
            int(opts.get("dim", 16)), float(opts.get("noise", 1.0)), int(opts.get("seed", 0)),
            opts.get("prefix", "block")))
    return read_network(ref)


@dataclass(frozen=True)
class ExperimentConfig:
    target: str
    source: Optional[str] = None
    methods: tuple = METHODS
    p_grid: tuple = DEFAULT_P_GRID
    repeats: int = 3
    beta_grid: tuple = ()
    k_grid: tuple = ()
    seed: int = 0
    pipeline: PipelineConfig = PipelineConfig()
    stratified: bool = False

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        if any(not 0 < p < 1 for p in self.p_grid):
            raise ValueError("every p must lie in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if "trica" in self.methods and self.source is None:
            raise ValueError("trica needs a source dataset")


@dataclass
class RunResult:
    method: str
    p: float
    beta: Optional[float]
    k: Optional[int]
    repeat: int
    seed: int
    accuracy: float
    converged: bool
    wall_time: float
    failed: bool = False
    k_setting: str = ""
    error: str = ""


def cell_seed(base: int, p: float, repeat: int) -> int:
    """Split/fit seed shared by every method in one (p, repeat) cell, so comparisons are paired."""
    seq = np.random.SeedSequence([int(base), int(round(p * 1_000_000)), int(repeat)])
    return int(seq.generate_state(1)[0])


def _cells(config: ExperimentConfig) -> list[tuple]:
    pc = config.pipeline
    default_k = "auto" if pc.k is None else str(pc.k)
    cells = []
    for method in config.methods:
        beta = pc.fit.beta if method == "trica" else None
        for p in config.p_grid:
            for r in range(config.repeats):
                cells.append((method, p, beta, default_k, r))
    if "trica" in config.methods:
        for beta in config.beta_grid:
            for r in range(config.repeats):
                cells.append(("trica", SWEEP_P, float(beta), default_k, r))
    for method in ("pica", "trica"):
        if method in config.methods:
            beta = pc.fit.beta if method == "trica" else None
            for k in config.k_grid:
                for r in range(config.repeats):
                    cells.append((method, SWEEP_P, beta, str(int(k)), r))
    # sweeps may repeat a main-grid cell; keep the first
    return list(dict.fromkeys(cells))


def run_experiment(config: ExperimentConfig, source: Optional[Network] = None,
                   target: Optional[Network] = None) -> list[RunResult]:
    """Run every cell; a failing cell is recorded and the sweep continues."""
    if target is None:
        target = load_network_ref(config.target)
    if source is None and config.source is not None and "trica" in config.methods:
        source = load_network_ref(config.source)
    target = as_binary_task(target)
    truth = target.label_index()

    results = []
    for method, p, beta, k_setting, r in _cells(config):
        seed = cell_seed(config.seed, p, r)
        pc = config.pipeline
        fit = replace(pc.fit, seed=seed, beta=beta if beta is not None else pc.fit.beta)
        pc = replace(pc, fit=fit, k=None if k_setting == "auto" else int(k_setting),
                     ica=replace(pc.ica, seed=seed))
        start = time.perf_counter()
        try:
            split = split_labeled(target, p, seed, config.stratified)
            outcome = run_method(method, source, target, split, pc)
            acc = accuracy(outcome.result.predicted, truth, split.unlabeled)
            res = RunResult(method, p, beta, outcome.k, r, seed, acc, outcome.result.converged,
                            time.perf_counter() - start, k_setting=k_setting)
        except Exception as exc:  # cell failures are data, not fatal
            log.error("cell %s p=%s beta=%s k=%s repeat=%d failed: %s", method, p, beta, k_setting, r, exc)
            res = RunResult(method, p, beta, None, r, seed, math.nan, False, time.perf_counter() - start,
                            failed=True, k_setting=k_setting, error=traceback.format_exc(limit=3))
        results.append(res)
    return results


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def result_rows(results: Sequence[RunResult], source_name: str = "", target_name: str = "",
                include_wall_time: bool = True) -> list[dict]:
    """Per-cell rows in sorted order, each group followed by its mean row."""
    def group_key(r):
        return (r.method, r.p, -1.0 if r.beta is None else r.beta, r.k_setting)

    groups: dict = {}
    for r in results:
        groups.setdefault(group_key(r), []).append(r)
    rows = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda r: r.repeat)
        for r in members:
            rows.append({
                "method": r.method, "source": source_name if r.method == "trica" else "",
                "target": target_name, "p": _fmt(r.p), "beta": _fmt(r.beta),
                "k": _fmt(r.k), "repeat": str(r.repeat), "seed": str(r.seed),
                "accuracy": _fmt(r.accuracy), "converged": "failed" if r.failed else str(r.converged).lower(),
                "wall_time_s": f"{r.wall_time:.3f}" if include_wall_time else "",
            })
        ok = [r.accuracy for r in members if not r.failed]
        first = members[0]
        rows.append({
            "method": first.method, "source": source_name if first.method == "trica" else "",
            "target": target_name, "p": _fmt(first.p), "beta": _fmt(first.beta),
            "k": first.k_setting if first.method != "ica" else "", "repeat": "mean", "seed": "",
            "accuracy": _fmt(float(np.mean(ok))) if ok else "nan",
            "converged": str(all(r.converged for r in members)).lower(),
            "wall_time_s": f"{sum(r.wall_time for r in members):.3f}" if include_wall_time else "",
        })
    return rows


def results_csv(results: Sequence[RunResult], source_name: str = "", target_name: str = "",
                include_wall_time: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(result_rows(results, source_name, target_name, include_wall_time))
    return buf.getvalue()


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        raw[key.strip()] = value.strip()

    known = {"source", "target", "methods", "p_grid", "repeats", "beta_grid", "k_grid", "seed",
             "alpha", "kernel", "sigma", "squared_norm", "beta", "k", "k_max", "k_step", "k_mode",
             "rules", "normalize", "max_sweeps", "rel_tol", "l2", "max_iterations", "aggregation",
             "retrain", "standardize_latent", "stratified"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "target" not in raw:
        raise ValueError("config needs a target")

    rules = raw.get("rules", "as_printed")
    rules = {"printed": "as_printed", "standard": "standard_tri_nmf"}.get(rules, rules)
    affinity = AffinityConfig(raw.get("kernel", "binary"), float(raw.get("sigma", 1.0)),
                              float(raw.get("alpha", 0.5)), _flag(raw.get("squared_norm", "false")))
    fit = FitConfig(k=10, beta=float(raw.get("beta", 1.0)), max_sweeps=int(raw.get("max_sweeps", 200)),
                    rel_tol=float(raw.get("rel_tol", 1e-6)), rule_set=rules, normalize=raw.get("normalize"))
    k = raw.get("k", "auto")
    pipeline = PipelineConfig(
        affinity=affinity, fit=fit, k=None if k == "auto" else int(k),
        k_max=int(raw.get("k_max", 20)), k_step=int(raw.get("k_step", 10)), k_mode=raw.get("k_mode", "max"),
        standardize_latent=_flag(raw.get("standardize_latent", "true")),
        ica=IcaConfig(max_iterations=int(raw.get("max_iterations", 50)),
                      aggregation=raw.get("aggregation", "proportion"),
                      retrain=_flag(raw.get("retrain", "false"))),
        base=LogisticConfig(l2=float(raw.get("l2", 1e-3))),
    )
    methods = tuple(m.strip().lower() for m in raw.get("methods", ",".join(METHODS)).split(",") if m.strip())
    return ExperimentConfig(
        target=raw["target"], source=raw.get("source"), methods=methods,
        p_grid=_floats(raw["p_grid"]) if "p_grid" in raw else DEFAULT_P_GRID,
        repeats=int(raw.get("repeats", 3)), beta_grid=_floats(raw.get("beta_grid", "")),
        k_grid=tuple(int(k) for k in _floats(raw.get("k_grid", ""))), seed=int(raw.get("seed", 0)),
        pipeline=pipeline, stratified=_flag(raw.get("stratified", "false")),
    )
