"""Experiment drivers behind the ``run``, ``sweep`` and ``compare`` subcommands.

Each unit of work (one repeat, one sweep point) is a top-level function of
the resolved config text so it can be shipped to a process pool. Units are
single-threaded and seeded from ``(experiment.seed, repeat, role)``; pooling
changes scheduling only, never results.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .._rng import derive_seed, make_rng
from ..baselines import (
    Comparator,
    comparator_loss,
    dsgd_run,
    exact_ogd_run,
    inverse_sqrt_schedule,
    realizable_comparator,
)
from ..exceptions import ConfigError
from ..shrinking_gradient import averaged_hypothesis, predict_many, run, save_checkpoint
from .config import ExperimentConfig

log = logging.getLogger(__name__)

COMPARATOR_MAX_N = 10_000
SWEEP_COLUMNS = ("T", "eta", "m_train", "regret", "regret_per_T", "regret_over_B_sqrt_T", "weight_samples", "wall_time")
COMPARE_COLUMNS = ("train_size", "algorithm", "test_mse", "sd")

_DATA, _LEARNER, _DSGD, _PREDICT = range(4)


def _map(fn: Callable, jobs: Iterable, workers: int) -> list:
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def _comparator(cfg: ExperimentConfig, stream, X, y) -> Comparator | None:
    family = cfg.make_family()
    if cfg.learner.comparator == "off" or not family.has_exact_kernel:
        return None
    if X.shape[0] > COMPARATOR_MAX_N:
        log.warning("skipping comparator: %d points exceed %d", X.shape[0], COMPARATOR_MAX_N)
        return None
    if getattr(stream, "target", None) is not None:
        return realizable_comparator(stream, X, y, cfg.learner.B)
    return comparator_loss(X, y, family, cfg.learner.B)


def _dsgd_schedule(cfg: ExperimentConfig):
    if cfg.dsgd.schedule == "constant":
        return cfg.dsgd.eta0
    return inverse_sqrt_schedule(cfg.dsgd.eta0)


def run_repeat(cfg_text: str, r: int, out_dir: str) -> dict:
    """One repeat of ``cmd_run``: every configured algorithm on one stream."""
    cfg = ExperimentConfig.from_string(cfg_text)
    seed, T = cfg.experiment.seed, cfg.learner.T
    stream = cfg.make_stream(derive_seed(seed, r, _DATA))
    family = cfg.make_family()
    X, y = stream.take(T)
    comp = _comparator(cfg, stream, X, y)
    rdir = Path(out_dir) / f"repeat_{r:03d}"
    rdir.mkdir(parents=True, exist_ok=True)
    results = {}
    for alg in cfg.experiment.algorithms:
        if alg == "shrinking":
            lc = cfg.learner_config(T, derive_seed(seed, r, _LEARNER))
            state, summary = run(lc, stream, family)
            save_checkpoint(rdir / "shrinking.checkpoint.json", state, lc)
        elif alg == "exact_ogd":
            lc = cfg.learner_config(T, derive_seed(seed, r, _LEARNER))
            _, summary = exact_ogd_run(lc, stream, family)
        else:
            _, _, summary = dsgd_run(
                T, _dsgd_schedule(cfg), cfg.dsgd.gamma, family, stream, derive_seed(seed, r, _DSGD)
            )
        if comp is not None:
            summary.comparator_loss, summary.comparator_norm = comp.loss, comp.norm
        (rdir / f"{alg}.csv").write_text(summary.to_csv(), encoding="utf-8")
        doc = summary.to_dict()
        (rdir / f"{alg}.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")
        results[alg] = doc
    return results


def _mean_sd(values) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "sd": None}
    arr = np.asarray(vals, dtype=float)
    return {"mean": float(arr.mean()), "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}


AGG_METRICS = ("cumulative_surrogate_loss", "cumulative_exact_loss", "regret", "wall_time")


def aggregate(per_repeat: list) -> dict:
    out = {}
    for alg in per_repeat[0]:
        docs = [rep[alg] for rep in per_repeat]
        agg = {m: _mean_sd(d[m] for d in docs) for m in AGG_METRICS}
        for key in docs[0]["counters"]:
            agg[key] = _mean_sd(d["counters"][key] for d in docs)
        out[alg] = {"repeats": len(docs), **agg}
    return out


def prepare_out(cfg: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.ini").write_text(cfg.to_ini(), encoding="utf-8")
    return out


def cmd_run(cfg: ExperimentConfig, out_dir) -> dict:
    out = prepare_out(cfg, out_dir)
    text = cfg.to_ini()
    jobs = [(text, r, str(out)) for r in range(cfg.experiment.repeats)]
    per_repeat = _map(run_repeat, jobs, cfg.experiment.workers)
    agg = aggregate(per_repeat)
    (out / "aggregate.json").write_text(json.dumps(agg, indent=2), encoding="utf-8")
    return agg


def sweep_point(cfg_text: str, T: int, r: int) -> dict:
    cfg = ExperimentConfig.from_string(cfg_text)
    seed = cfg.experiment.seed
    stream = cfg.make_stream(derive_seed(seed, r, _DATA))
    family = cfg.make_family()
    lc = cfg.learner_config(T, derive_seed(seed, r, _LEARNER), force_schedule=True)
    X, y = stream.take(T)
    _, summary = run(lc, stream, family)
    comp = _comparator(cfg, stream, X, y)
    if comp is None:
        raise ConfigError("sweep needs a family with an exact kernel and the comparator enabled")
    summary.comparator_loss = comp.loss
    regret = summary.regret
    return {
        "T": T,
        "repeat": r,
        "eta": lc.eta,
        "m_train": lc.m_train,
        "regret": regret,
        "regret_per_T": regret / T,
        "regret_over_B_sqrt_T": regret / (lc.B * math.sqrt(T)),
        "weight_samples": summary.counters["weight_samples"],
        "wall_time": summary.wall_time,
    }


def _csv(rows: list, columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def cmd_sweep(cfg: ExperimentConfig, out_dir, horizons=None) -> list:
    """Regret against the comparator for each horizon, averaged over repeats."""
    horizons = list(cfg.sweep.horizons if horizons is None else horizons)
    if not horizons:
        raise ConfigError("sweep needs at least one horizon")
    if not cfg.make_family().has_exact_kernel:
        raise ConfigError("sweep needs a family with an exact kernel")
    if cfg.learner.eta is not None or cfg.learner.m_train is not None:
        warnings.warn("sweep ignores explicit eta/m_train and uses the schedule", RuntimeWarning)
    out = prepare_out(cfg, out_dir)
    text = cfg.to_ini()
    jobs = [(text, T, r) for T in horizons for r in range(cfg.experiment.repeats)]
    rows = _map(sweep_point, jobs, cfg.experiment.workers)
    (out / "sweep_runs.csv").write_text(_csv(rows, ("repeat",) + SWEEP_COLUMNS), encoding="utf-8")
    table = []
    for T in horizons:
        group = [row for row in rows if row["T"] == T]
        entry = {"T": T, "eta": group[0]["eta"], "m_train": group[0]["m_train"]}
        for key in ("regret", "regret_per_T", "regret_over_B_sqrt_T", "wall_time"):
            entry[key] = float(np.mean([row[key] for row in group]))
        entry["weight_samples"] = group[0]["weight_samples"]
        table.append(entry)
    (out / "sweep.csv").write_text(_csv(table, SWEEP_COLUMNS), encoding="utf-8")
    return table


def compare_repeat(cfg_text: str, r: int) -> list:
    """Test MSE of every algorithm at every training size for one repeat."""
    cfg = ExperimentConfig.from_string(cfg_text)
    seed, lrn = cfg.experiment.seed, cfg.learner
    stream = cfg.make_stream(derive_seed(seed, r, _DATA))
    family = cfg.make_family()
    X_test, y_test = stream.test(cfg.data.test_size)
    rng = make_rng(seed, r, _PREDICT)
    rows = []
    for n in cfg.compare.sizes:
        lc = cfg.learner_config(n, derive_seed(seed, r, _LEARNER))
        lc.track_exact_loss = False
        for alg in cfg.experiment.algorithms:
            if alg == "shrinking":
                state, _ = run(lc, stream, family)
                h = averaged_hypothesis(state)
                if cfg.compare.test_eval == "exact":
                    pred = h.exact_values(X_test)
                else:
                    pred = predict_many(h, X_test, lrn.eps0, lrn.delta, rng)
            elif alg == "exact_ogd":
                if not family.has_exact_kernel:
                    continue
                state, _ = exact_ogd_run(lc, stream, family)
                pred = averaged_hypothesis(state).exact_values(X_test)
            else:
                final, averaged, _ = dsgd_run(
                    n, _dsgd_schedule(cfg), cfg.dsgd.gamma, family, stream, derive_seed(seed, r, _DSGD)
                )
                pred = (averaged if cfg.dsgd.average else final).values(X_test)
            mse = float(np.mean((pred - y_test) ** 2))
            rows.append({"repeat": r, "train_size": n, "algorithm": alg, "test_mse": mse})
    return rows


def cmd_compare(cfg: ExperimentConfig, out_dir) -> list:
    out = prepare_out(cfg, out_dir)
    text = cfg.to_ini()
    jobs = [(text, r) for r in range(cfg.experiment.repeats)]
    rows = [row for part in _map(compare_repeat, jobs, cfg.experiment.workers) for row in part]
    (out / "compare_runs.csv").write_text(
        _csv(rows, ("repeat", "train_size", "algorithm", "test_mse")), encoding="utf-8"
    )
    table = []
    for n in cfg.compare.sizes:
        for alg in cfg.experiment.algorithms:
            vals = [row["test_mse"] for row in rows if row["train_size"] == n and row["algorithm"] == alg]
            if not vals:
                continue
            stats = _mean_sd(vals)
            table.append({"train_size": n, "algorithm": alg, "test_mse": stats["mean"], "sd": stats["sd"]})
    (out / "compare.csv").write_text(_csv(table, COMPARE_COLUMNS), encoding="utf-8")
    return table


def out_dir_for(cfg: ExperimentConfig, flag: str | None) -> str:
    """``--out`` beats ``$SHRINKSGD_OUT`` beats ``experiment.out``."""
    return flag or os.environ.get("SHRINKSGD_OUT") or cfg.experiment.out
