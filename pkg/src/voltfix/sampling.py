"""Deterministic sample generators."""

import numpy as np
from scipy.stats import qmc

from .grid import Grid, GridFunction


def low_discrepancy(n: int, bounds, seed: int = 0) -> np.ndarray:
    """``n`` scrambled Halton points in the box ``bounds = [(lo, hi), ...]``."""
    bounds = np.asarray(bounds, dtype=np.float64)
    sampler = qmc.Halton(d=len(bounds), scramble=True, seed=seed)
    pts = sampler.random(int(n))
    return bounds[:, 0] + pts * (bounds[:, 1] - bounds[:, 0])


def trig_sum_values(grid: Grid, rng: np.random.Generator, lo: float, hi: float, max_slope: float = 5.0, terms: int = 4):
    """Random ``c + sum_k a_k sin(w_k t + p_k)`` with range in ``[lo, hi]`` and slope ``<= max_slope``."""
    t = grid.t
    freq = rng.uniform(0.1, 3.0, terms)
    amp = rng.uniform(-1.0, 1.0, terms)
    phase = rng.uniform(0.0, 2 * np.pi, terms)
    half = 0.5 * (hi - lo)
    scale = rng.uniform(0.2, 1.0) * min(half / np.abs(amp).sum(), max_slope / np.abs(amp * freq).sum())
    amp = amp * scale
    spread = np.abs(amp).sum()
    center = rng.uniform(lo + spread, hi - spread) if hi - lo > 2 * spread else 0.5 * (lo + hi)
    vals = center + (amp[:, None] * np.sin(freq[:, None] * t[None, :] + phase[:, None])).sum(axis=0)
    return np.clip(vals, lo, hi)


def trig_sums(grid: Grid, count: int, seed: int, lo: float, hi: float, max_slope: float = 5.0):
    rng = np.random.default_rng(seed)
    return [GridFunction(grid, trig_sum_values(grid, rng, lo, hi, max_slope)) for _ in range(int(count))]
