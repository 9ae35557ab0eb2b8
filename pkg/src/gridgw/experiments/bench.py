"""Timing harness: fast vs naive gradient on the experiment tasks.

Every solver run is timed with ``time.perf_counter`` inside
``threadpool_limits(1)`` so both modes run single-threaded. Per size one
warm-up run per mode is discarded, then ``repetitions`` instances (seeds
``seed, seed + 1, ...``) are timed. The report keeps the mean and median
time; speedups and fitted slopes use the median.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from ..core import SolverConfig
from ..errors import ConfigInvalid, NaiveTooLarge
from ..fast_multiply import MATERIALIZE_LIMIT
from ..solvers import plan_discrepancy, solve
from . import data, images

log = logging.getLogger(__name__)

TASKS = ("random1d", "random2d", "timeseries", "digits", "horse")

#: Default regularization per task. The image tasks use pixel-scale
#: distances (h = 1 or 100/n), so they need a much larger epsilon.
DEFAULT_EPSILON = {
    "random1d": 0.002,
    "random2d": 0.004,
    "timeseries": 0.002,
    "digits": 1.0,
    "horse": 20.0,
}

CSV_COLUMNS = ("N", "time_fast_s", "time_naive_s", "speedup", "plan_diff_fro")


def fit_loglog_slope(sizes, times) -> float:
    """Least-squares slope of ``log(time)`` against ``log(size)``."""
    sizes = np.asarray(sizes, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if sizes.shape != times.shape or sizes.size < 2:
        raise ConfigInvalid("need at least two (size, time) pairs")
    if np.any(sizes <= 0) or np.any(times <= 0):
        raise ConfigInvalid("sizes and times must be positive")
    slope, _ = np.polyfit(np.log(sizes), np.log(times), 1)
    return float(slope)


@dataclass
class BenchRecord:
    N: int
    side: Optional[int] = None
    time_fast_s: Optional[float] = None
    time_naive_s: Optional[float] = None
    mean_fast_s: Optional[float] = None
    mean_naive_s: Optional[float] = None
    setup_fast_s: Optional[float] = None
    setup_naive_s: Optional[float] = None
    speedup: Optional[float] = None
    plan_diff_fro: Optional[float] = None
    repetitions: int = 0
    converged: bool = True


@dataclass
class BenchReport:
    task: str
    metric: str
    records: List[BenchRecord] = field(default_factory=list)
    fitted_slope_fast: Optional[float] = None
    fitted_slope_naive: Optional[float] = None
    config: Dict = field(default_factory=dict)

    def fit_slopes(self):
        """Fit slopes for each mode that has at least three timed sizes."""
        for mode in ("fast", "naive"):
            pts = [(r.N, getattr(r, f"time_{mode}_s")) for r in self.records
                   if getattr(r, f"time_{mode}_s") is not None]
            slope = fit_loglog_slope(*zip(*pts)) if len(pts) >= 3 else None
            setattr(self, f"fitted_slope_{mode}", slope)
        return self

    def record(self, n) -> BenchRecord:
        for r in self.records:
            if r.N == n:
                return r
        raise KeyError(n)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metric": self.metric,
            "records": [asdict(r) for r in self.records],
            "fitted_slope_fast": self.fitted_slope_fast,
            "fitted_slope_naive": self.fitted_slope_naive,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow(["" if getattr(r, c) is None else repr(getattr(r, c))
                             for c in CSV_COLUMNS])
        return buf.getvalue()

    def table(self) -> str:
        def fmt(x, style):
            if x is None:
                return "-".rjust(int(style.split(".")[0] or 0))
            return format(x, style)

        lines = [f"{self.task} / {self.metric}",
                 f"{'N':>8} {'fast (s)':>10} {'naive (s)':>10} {'speedup':>8} {'||P_fast-P_naive||_F':>22}"]
        for r in self.records:
            lines.append(f"{r.N:>8d} {fmt(r.time_fast_s, '10.4f')} {fmt(r.time_naive_s, '10.4f')} "
                         f"{fmt(r.speedup, '8.2f')} {fmt(r.plan_diff_fro, '22.3e')}")
        lines.append(f"fitted slope fast: {fmt(self.fitted_slope_fast, '.3f')}   "
                     f"naive: {fmt(self.fitted_slope_naive, '.3f')}")
        return "\n".join(lines)


def make_instance(task: str, size: int, seed=None, metric: str = "gw",
                  transform: str = "rotation", image_paths: Sequence[str] = (),
                  power: int = 1):
    """Build ``(u, v, cost)`` for one benchmark task; ``cost`` is None for GW.

    ``size`` is the point count for 1D tasks and the image side otherwise.
    """
    if task == "random1d" or task == "random2d":
        dim = 1 if task == "random1d" else 2
        u, v = data.random_pair(size, seed, dim=dim, power=power)
        cost = data.coordinate_cost(u.grid, v.grid) if metric == "fgw" else None
        return u, v, cost
    if task == "timeseries":
        s = data.gen_two_hump_series(size, seed=seed, power=power)
        return s.source, s.target, s.cost if metric == "fgw" else None
    if task in ("digits", "horse"):
        spacing = 1.0 if task == "digits" else 100.0 / size
        if image_paths:
            src = images.subsample(images.read_image(image_paths[0]), size)
            if len(image_paths) > 1:
                tgt = images.subsample(images.read_image(image_paths[1]), size)
            else:
                tgt = None
        elif task == "digits":
            src, tgt = images.subsample(images.synthetic_digit(), size), None
        else:
            src, tgt = (images.subsample(im, size) for im in images.synthetic_horses())
        if tgt is None:
            if transform not in images.TRANSFORMS:
                raise ConfigInvalid(f"unknown transform {transform!r}")
            tgt = images.TRANSFORMS[transform](src)
        u = images.image_measure(src, spacing, power)
        v = images.image_measure(tgt, spacing, power)
        cost = images.gray_level_cost(src, tgt) if metric == "fgw" else None
        return u, v, cost
    raise ConfigInvalid(f"unknown task {task!r}; choose from {', '.join(TASKS)}")


def _timed(u, v, cost, config):
    t0 = time.perf_counter()
    result = solve(u, v, cost, config)
    return time.perf_counter() - t0, result


def run_benchmark(task: str, sizes: Sequence[int], repetitions: int = 1,
                  modes: Sequence[str] = ("fast", "naive"), metric: str = "gw",
                  config: Optional[SolverConfig] = None, seed: int = 0,
                  naive_sizes: Optional[Sequence[int]] = None, warmup: bool = True,
                  **instance_options) -> BenchReport:
    """Time the requested gradient modes over ``sizes``.

    Parameters
    ----------
    task : str
        One of :data:`TASKS`.
    sizes : sequence of int
        Ascending sizes (points in 1D, image side in 2D).
    repetitions : int
        Timed runs per size and mode.
    modes : sequence of str
        Any of ``"fast"`` and ``"naive"``.
    naive_sizes : sequence of int, optional
        Restrict the naive mode to these sizes (default: all).
    warmup : bool
        Discard one untimed run per size and mode first.

    Naive runs above the materialization guard are skipped when the fast
    mode is also requested; requesting only the naive mode there raises
    :class:`NaiveTooLarge`.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or sizes != sorted(sizes):
        raise ConfigInvalid("sizes must be non-empty and ascending")
    if repetitions < 1:
        raise ConfigInvalid("repetitions must be at least 1")
    modes = tuple(dict.fromkeys(modes))
    if not modes or any(m not in ("fast", "naive") for m in modes):
        raise ConfigInvalid(f"modes must be drawn from fast, naive; got {modes}")
    if metric not in ("gw", "fgw"):
        raise ConfigInvalid(f"unknown metric {metric!r}")
    if task == "timeseries" and metric != "fgw":
        raise ConfigInvalid("the time-series task uses the fgw metric")
    if config is None:
        config = SolverConfig(epsilon=DEFAULT_EPSILON.get(task, 0.002))

    report = BenchReport(task, metric, config={
        "sizes": sizes, "repetitions": repetitions, "modes": list(modes), "seed": seed,
        "naive_sizes": None if naive_sizes is None else list(naive_sizes),
        "solver": asdict(config), **{k: v for k, v in instance_options.items()},
    })
    with threadpool_limits(limits=1):
        for size in sizes:
            points = size if task == "random1d" or task == "timeseries" else size * size
            run_modes = []
            for m in modes:
                if m == "naive" and naive_sizes is not None and size not in naive_sizes:
                    continue
                if m == "naive" and points > MATERIALIZE_LIMIT:
                    if "fast" not in modes:
                        raise NaiveTooLarge(
                            f"naive mode needs dense {points}x{points} distance matrices "
                            f"(limit {MATERIALIZE_LIMIT} points)"
                        )
                    log.info("skipping naive mode at %d points (above guard)", points)
                    continue
                run_modes.append(m)
            rec = BenchRecord(N=points, side=None if points == size else size)
            times = {m: [] for m in run_modes}
            setups = {m: [] for m in run_modes}
            for m in run_modes if warmup else ():
                u, v, cost = make_instance(task, size, seed, metric, **instance_options)
                solve(u, v, cost, config.with_(gradient_mode=m))
            for rep in range(repetitions):
                u, v, cost = make_instance(task, size, seed + rep, metric, **instance_options)
                plans = {}
                for m in run_modes:
                    dt, result = _timed(u, v, cost, config.with_(gradient_mode=m))
                    times[m].append(dt)
                    setups[m].append(result.timings.get("setup_s", 0.0))
                    plans[m] = result.plan
                    rec.converged &= bool(result.converged)
                if len(plans) == 2:
                    d = plan_discrepancy(plans["fast"], plans["naive"])
                    rec.plan_diff_fro = d if rec.plan_diff_fro is None else max(rec.plan_diff_fro, d)
            for m in run_modes:
                setattr(rec, f"time_{m}_s", statistics.median(times[m]))
                setattr(rec, f"mean_{m}_s", statistics.fmean(times[m]))
                setattr(rec, f"setup_{m}_s", statistics.median(setups[m]))
            if rec.time_fast_s and rec.time_naive_s:
                rec.speedup = rec.time_naive_s / rec.time_fast_s
            rec.repetitions = repetitions
            log.info("size %d: fast %s s, naive %s s", points, rec.time_fast_s, rec.time_naive_s)
            report.records.append(rec)
    return report.fit_slopes()
