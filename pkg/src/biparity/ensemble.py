"""Monte-Carlo ensembles of conditioned trajectories and their purity statistics."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from .pauli import StateValidationError, TwoQubitState, validate
from .rng import NoiseStream
from .sme import SimParams, TrajectoryRecord, integrate_batch
from .strategies import StrategyConfig

__all__ = [
    "SCHEMA_VERSION",
    "EnsembleConfig",
    "EnsembleStats",
    "EnsembleResult",
    "DeterminismReport",
    "run_ensemble",
    "determinism_report",
    "time_to_target",
    "initial_slope",
    "resolve_workers",
]

SCHEMA_VERSION = 1
DEFAULT_CHUNK = 256
QUANTILES = (0.05, 0.5, 0.95)


def resolve_workers(worker_count):
    if worker_count in (None, "auto"):
        return max(1, os.cpu_count() or 1)
    n = int(worker_count)
    if n < 1:
        raise ValueError("worker_count must be a positive integer or 'auto'")
    return n


@dataclass(frozen=True)
class EnsembleConfig:
    initial: TwoQubitState
    strategy: StrategyConfig
    params: SimParams
    n_traj: int = 100
    record_trajectories: bool = False
    worker_count: Union[int, str] = 1
    stats_stride: int = 1
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        if int(self.n_traj) < 1:
            raise ValueError("n_traj must be >= 1")
        if int(self.stats_stride) < 1:
            raise ValueError("stats_stride must be >= 1")
        if int(self.chunk_size) < 1:
            raise ValueError("chunk_size must be >= 1")
        resolve_workers(self.worker_count)

    def to_dict(self):
        return {
            "initial": self.initial.to_json(),
            "strategy": self.strategy.to_dict(),
            "params": self.params.to_dict(),
            "n_traj": int(self.n_traj),
            "record_trajectories": self.record_trajectories,
            "stats_stride": int(self.stats_stride),
        }


@dataclass
class EnsembleStats:
    """Per-time-step purity statistics over all trajectories (population variance)."""

    times: np.ndarray
    mean_pa: np.ndarray
    var_pa: np.ndarray
    q05_pa: np.ndarray
    q50_pa: np.ndarray
    q95_pa: np.ndarray
    mean_pb: np.ndarray
    var_pb: np.ndarray
    q05_pb: np.ndarray
    q50_pb: np.ndarray
    q95_pb: np.ndarray
    n_traj: int
    flagged_positivity_count: int = 0

    COLUMNS = ("t", "mean_pa", "var_pa", "q05_pa", "q50_pa", "q95_pa", "mean_pb", "var_pb", "q05_pb", "q50_pb", "q95_pb")

    @classmethod
    def from_purities(cls, times, pa, pb, flagged=0):
        def block(p):
            q = np.quantile(p, QUANTILES, axis=0)
            return p.mean(axis=0), p.var(axis=0), q[0], q[1], q[2]

        ma, va, a05, a50, a95 = block(pa)
        mb, vb, b05, b50, b95 = block(pb)
        return cls(np.asarray(times), ma, va, a05, a50, a95, mb, vb, b05, b50, b95, pa.shape[0], int(flagged))

    def sem(self, party):
        """Standard error of the mean purity at each step (unbiased variance)."""
        var = self.var_pa if party.lower() in ("a", "alice") else self.var_pb
        n = self.n_traj
        if n < 2:
            return np.zeros_like(var)
        return np.sqrt(var * n / (n - 1) / n)

    def columns(self):
        return {"t": self.times, **{c: getattr(self, c) for c in self.COLUMNS[1:]}}

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        cols = self.columns()
        for i in range(len(self.times)):
            w.writerow([repr(float(cols[c][i])) for c in self.COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_json(self, config=None, metadata=None):
        obj = {
            "schema_version": SCHEMA_VERSION,
            "config": config,
            "metadata": {"n_traj": self.n_traj, "flagged_positivity_count": self.flagged_positivity_count, **(metadata or {})},
            "stats": {c: [float(x) for x in v] for c, v in self.columns().items()},
        }
        return json.dumps(obj, indent=2, sort_keys=True)


@dataclass
class DeterminismReport:
    """Cross-trajectory spread ``max_i |P_i(t) - mean P(t)|`` per step for each party.

    A party counts as deterministic when its spread stays below ``tol``
    (default ``10 * dt``: Euler stepping leaves an O(dt) residue even when
    the purity increment has no noise term).
    """

    times: np.ndarray
    spread_a: np.ndarray
    spread_b: np.ndarray
    tol: float

    @property
    def deterministic_a(self):
        return bool(np.all(self.spread_a < self.tol))

    @property
    def deterministic_b(self):
        return bool(np.all(self.spread_b < self.tol))

    def to_dict(self):
        return {
            "tol": self.tol,
            "max_spread_a": float(np.max(self.spread_a)),
            "max_spread_b": float(np.max(self.spread_b)),
            "deterministic_a": self.deterministic_a,
            "deterministic_b": self.deterministic_b,
        }


def _spread(p):
    return np.max(np.abs(p - p.mean(axis=0)), axis=0)


def determinism_report(records, dt=None, tol=None):
    """Spread of purities across trajectories.

    ``records`` is a list of :class:`TrajectoryRecord` or an
    :class:`EnsembleResult`.
    """
    if isinstance(records, EnsembleResult):
        times, pa, pb = records.times, records.purities_a, records.purities_b
        dt = dt if dt is not None else records.config.params.dt
    else:
        records = list(records)
        if not records:
            raise ValueError("determinism_report needs at least one trajectory")
        times = records[0].times
        pa = np.stack([rec.purities_a for rec in records])
        pb = np.stack([rec.purities_b for rec in records])
        if dt is None:
            dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    if tol is None:
        tol = 10.0 * dt
    return DeterminismReport(np.asarray(times), _spread(pa), _spread(pb), float(tol))


def time_to_target(purities, times, target):
    """First time each trajectory reaches ``purity >= target`` (``inf`` if never)."""
    purities = np.atleast_2d(purities)
    hit = purities >= target
    first = np.argmax(hit, axis=1)
    reached = hit[np.arange(purities.shape[0]), first]
    return np.where(reached, np.asarray(times)[first], np.inf)


def initial_slope(result, party="b", window=10):
    """Mean purity slope over the first ``window`` recorded steps, with its standard error.

    The slope is averaged per trajectory, so the standard error reflects
    the spread of individual trajectories over the window.
    """
    p = result.purities_b if party.lower() in ("b", "bob") else result.purities_a
    w = min(window, len(result.times) - 1)
    if w < 1:
        return float("nan"), float("nan")
    per = (p[:, w] - p[:, 0]) / (result.times[w] - result.times[0])
    n = per.shape[0]
    sem = float(np.std(per, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(per.mean()), sem


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    stats: EnsembleStats
    times: np.ndarray
    purities_a: np.ndarray  # (n_traj, n_times), sampled every stats_stride steps
    purities_b: np.ndarray
    flagged: np.ndarray
    records: Optional[List[TrajectoryRecord]] = None

    def determinism(self, tol=None):
        return determinism_report(self, tol=tol)


def _run_chunk(config: EnsembleConfig, start, stop):
    p = config.params
    n = p.n_steps
    noise = np.stack([NoiseStream(p.seed, i).increments(n, p.dt, p.increments) for i in range(start, stop)])
    r0 = np.broadcast_to(config.initial.r, (stop - start, 4, 4))
    stride = int(config.stats_stride)
    res = integrate_batch(
        r0,
        config.strategy,
        p,
        noise,
        record_states=config.record_trajectories,
        check_every=stride,
    )
    records = None
    if config.record_trajectories:
        times = p.times()
        records = []
        for b in range(stop - start):
            records.append(
                TrajectoryRecord(
                    times=times,
                    states=res.states[b],
                    axes=res.axes[b],
                    noises=np.concatenate([noise[b], [np.nan]]),
                    purities_a=res.purities_a[b],
                    purities_b=res.purities_b[b],
                    positivity_flagged=bool(res.flagged[b]),
                    meta={"seed": int(p.seed), "index": start + b},
                )
            )
    idx = _sample_index(n, stride)
    return res.purities_a[:, idx], res.purities_b[:, idx], res.flagged, records


def _sample_index(n_steps, stride):
    idx = np.arange(0, n_steps + 1, stride)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def run_ensemble(config: EnsembleConfig) -> EnsembleResult:
    """Run ``n_traj`` independent trajectories and aggregate purity statistics.

    Trajectory ``i`` draws its increments from stream ``i`` of the master
    seed, and trajectories are integrated in fixed-size chunks whose
    per-row arithmetic is independent of the chunk, so the result is
    bit-identical for any ``worker_count``.
    """
    problems = validate(config.initial)
    if problems:
        raise StateValidationError("initial state: " + "; ".join(problems))
    n_traj = int(config.n_traj)
    size = int(config.chunk_size)
    bounds = [(s, min(s + size, n_traj)) for s in range(0, n_traj, size)]
    workers = resolve_workers(config.worker_count)
    if workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(config, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(config, *ab), bounds))

    pa = np.concatenate([p[0] for p in parts])
    pb = np.concatenate([p[1] for p in parts])
    flagged = np.concatenate([p[2] for p in parts])
    records = None
    if config.record_trajectories:
        records = [rec for p in parts for rec in p[3]]
    times = config.params.times()[_sample_index(config.params.n_steps, int(config.stats_stride))]
    stats = EnsembleStats.from_purities(times, pa, pb, flagged=int(flagged.sum()))
    return EnsembleResult(config, stats, times, pa, pb, flagged, records)
