"""Synthetic inputs for the experiments: random measures and two-hump series.

Randomness comes from numpy's PCG64 generator (``np.random.default_rng``),
seeded explicitly so every instance can be regenerated bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..core import DiscreteMeasure, FeatureCost, UniformGrid1D, UniformGrid2D
from ..errors import ConfigInvalid, OverlappingHumps


def _spacing(points_per_axis: int) -> float:
    # grid on [0, 1]; a single point gets unit spacing (distances are all zero anyway)
    return 1.0 / (points_per_axis - 1) if points_per_axis > 1 else 1.0


def gen_random_measure(size: int, seed=None, dim: int = 1, power: int = 1,
                       rng=None) -> DiscreteMeasure:
    """Weights drawn iid from U[0, 1] and normalized.

    ``size`` is the point count ``N`` in 1D and the side ``n`` in 2D. The
    grid covers [0, 1] (or the unit square) with spacing ``1 / (size - 1)``.
    """
    if size < 1:
        raise ConfigInvalid(f"size must be positive, got {size}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    if dim == 1:
        grid = UniformGrid1D(size, _spacing(size), power)
    elif dim == 2:
        grid = UniformGrid2D(size, _spacing(size), power)
    else:
        raise ConfigInvalid(f"dim must be 1 or 2, got {dim}")
    w = rng.uniform(0.0, 1.0, size=grid.points)
    return DiscreteMeasure(w / w.sum(), grid)


def random_pair(size: int, seed=None, dim: int = 1, power: int = 1):
    """Two independent random measures drawn from one seeded stream."""
    rng = np.random.default_rng(seed)
    return (gen_random_measure(size, dim=dim, power=power, rng=rng),
            gen_random_measure(size, dim=dim, power=power, rng=rng))


def grid_coordinates(grid) -> np.ndarray:
    """Point coordinates, shape (points,) in 1D and (points, 2) in 2D."""
    if isinstance(grid, UniformGrid1D):
        return np.arange(grid.size) * grid.spacing
    flat = np.arange(grid.points)
    return np.stack([flat % grid.side, flat // grid.side], axis=1) * grid.spacing


def coordinate_cost(gx, gy) -> FeatureCost:
    """Feature cost ``|x_i - y_p|`` (Manhattan in 2D) between grid coordinates."""
    x, y = grid_coordinates(gx), grid_coordinates(gy)
    if x.ndim == 1:
        return FeatureCost(np.abs(x[:, None] - y[None, :]))
    return FeatureCost(np.abs(x[:, None, :] - y[None, :, :]).sum(axis=2))


def raised_cosine(t, center: float, width: float, height: float) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    z = (t - center) / width
    return np.where(np.abs(z) < 0.5, height * 0.5 * (1.0 + np.cos(2.0 * np.pi * z)), 0.0)


@dataclass(frozen=True, eq=False)
class HumpSeries:
    """A pair of sampled two-hump signals with everything needed to align them."""

    times: np.ndarray
    source_signal: np.ndarray
    target_signal: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure
    cost: FeatureCost
    source_supports: Tuple[np.ndarray, ...]
    target_supports: Tuple[np.ndarray, ...]


def _check_humps(centers, width, times):
    for c in centers:
        if c - width / 2 < 0.0 or c + width / 2 > 1.0:
            raise ConfigInvalid(f"hump at {c} with width {width} leaves [0, 1]")
        inside = np.count_nonzero(np.abs(times - c) < width / 2)
        if inside < 3:
            raise ConfigInvalid(
                f"hump at {c} covers only {inside} sample points; increase N"
            )
    order = sorted(centers)
    for a, b in zip(order, order[1:]):
        if b - a < width:
            raise OverlappingHumps(f"humps at {a} and {b} overlap for width {width}")


def _hump_weights(times, centers, heights, width):
    # each sampled hump is rescaled to mass h_j / sum(h), so matching humps carry
    # identical mass in both series whatever the sampling offset
    total = float(sum(heights))
    w = np.zeros_like(times)
    for c, h in zip(centers, heights):
        hump = raised_cosine(times, c, width, h)
        w += hump * (h / total / hump.sum())
    return w / w.sum()


def gen_two_hump_series(n: int, source_positions: Sequence[float] = (0.2, 0.7),
                        target_positions: Sequence[float] = (0.3, 0.6),
                        heights: Sequence[float] = (0.5, 0.8), width: float = 0.15,
                        noise: float = 0.0, seed=None, power: int = 1,
                        weights: str = "signal") -> HumpSeries:
    """Sample two series on ``n`` uniform points of [0, 1].

    Each series is a sum of raised-cosine humps (``heights[i]`` at
    ``*_positions[i]``); the target moves the humps. The feature cost is the
    absolute signal difference. With ``weights="signal"`` each measure follows
    the clean hump profile, every hump rescaled to mass ``h / sum(heights)``
    so matching humps carry equal mass in both series;
    ``weights="uniform"`` spreads it evenly over time. ``noise`` adds seeded
    Gaussian noise to the signals (and so to the feature cost only).
    """
    times = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    if len(source_positions) != len(heights) or len(target_positions) != len(heights):
        raise ConfigInvalid("need one position per hump height")
    _check_humps(source_positions, width, times)
    _check_humps(target_positions, width, times)
    src = sum(raised_cosine(times, c, width, h) for c, h in zip(source_positions, heights))
    tgt = sum(raised_cosine(times, c, width, h) for c, h in zip(target_positions, heights))
    if noise > 0:
        rng = np.random.default_rng(seed)
        src = src + noise * rng.standard_normal(n)
        tgt = tgt + noise * rng.standard_normal(n)
    grid = UniformGrid1D(n, _spacing(n), power)
    if weights == "uniform":
        u, v = DiscreteMeasure.uniform(grid), DiscreteMeasure.uniform(grid)
    elif weights == "signal":
        u = DiscreteMeasure(_hump_weights(times, source_positions, heights, width), grid)
        v = DiscreteMeasure(_hump_weights(times, target_positions, heights, width), grid)
    else:
        raise ConfigInvalid(f"unknown weights {weights!r}")
    return HumpSeries(
        times=times,
        source_signal=src,
        target_signal=tgt,
        source=u,
        target=v,
        cost=FeatureCost(np.abs(src[:, None] - tgt[None, :])),
        source_supports=tuple(np.abs(times - c) < width / 2 for c in source_positions),
        target_supports=tuple(np.abs(times - c) < width / 2 for c in target_positions),
    )


def hump_transfer(plan, series: HumpSeries):
    """Fraction of each source hump's mass landing in the matching target hump.

    A hump that sends no mass reports ``nan``.
    """
    g = np.asarray(getattr(plan, "values", plan))
    out = []
    for s, t in zip(series.source_supports, series.target_supports):
        sent = g[s].sum()
        out.append(float(g[np.ix_(s, t)].sum() / sent) if sent > 0 else float("nan"))
    return out


def band_mass(plan, half_width: float) -> float:
    """Mass of the plan within ``|i - p| <= half_width``."""
    g = np.asarray(getattr(plan, "values", plan))
    i = np.arange(g.shape[0])[:, None]
    p = np.arange(g.shape[1])[None, :]
    return float(g[np.abs(i - p) <= half_width].sum())
