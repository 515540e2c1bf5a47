"""Vectorized arithmetic for piecewise-linear signal densities on [-1, 1].

Every signal family the package ships is piecewise linear in density (the
linear families are a single segment), so the simulation kernels only ever
see this representation.  Functions here take a :class:`PLDensity` and numpy
arrays and never loop in Python.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PLDensity:
    grid: np.ndarray
    f0: np.ndarray
    f1: np.ndarray
    cdf0: np.ndarray
    cdf1: np.ndarray
    sf0: np.ndarray
    sf1: np.ndarray
    llr: np.ndarray

    @classmethod
    def build(cls, grid, f0, f1) -> "PLDensity":
        grid = np.ascontiguousarray(grid, dtype=np.float64)
        f0 = np.ascontiguousarray(f0, dtype=np.float64)
        f1 = np.ascontiguousarray(f1, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 2 or f0.shape != grid.shape or f1.shape != grid.shape:
            raise ValueError("grid and density arrays must be 1-d with matching length >= 2")
        if grid[0] != -1.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing from -1 to 1")
        if np.any(f0 < 0) or np.any(f1 < 0):
            raise ValueError("densities must be non-negative")
        w = np.diff(grid)
        z0 = np.sum(0.5 * w * (f0[1:] + f0[:-1]))
        z1 = np.sum(0.5 * w * (f1[1:] + f1[:-1]))
        f0 = f0 / z0
        f1 = f1 / z1
        seg0 = 0.5 * w * (f0[1:] + f0[:-1])
        seg1 = 0.5 * w * (f1[1:] + f1[:-1])
        cdf0 = np.concatenate(([0.0], np.cumsum(seg0)))
        cdf1 = np.concatenate(([0.0], np.cumsum(seg1)))
        sf0 = np.concatenate((np.cumsum(seg0[::-1])[::-1], [0.0]))
        sf1 = np.concatenate((np.cumsum(seg1[::-1])[::-1], [0.0]))
        cdf0[-1] = cdf1[-1] = 1.0
        sf0[0] = sf1[0] = 1.0
        with np.errstate(divide="ignore"):
            llr = np.log(f1) - np.log(f0)
        arrays = [np.ascontiguousarray(a) for a in (grid, f0, f1, cdf0, cdf1, sf0, sf1, llr)]
        for a in arrays:
            a.setflags(write=False)
        return cls(*arrays)

    @property
    def segments(self) -> int:
        return self.grid.size - 1

    def kernel_arrays(self) -> tuple:
        return (self.grid, self.f0, self.f1, self.cdf0, self.cdf1, self.sf0, self.sf1, self.llr)


def _seg(d: PLDensity, x):
    j = np.searchsorted(d.grid, x, side="right") - 1
    return np.clip(j, 0, d.segments - 1)


def _dens(d: PLDensity, state: int):
    return (d.f1, d.cdf1, d.sf1) if state else (d.f0, d.cdf0, d.sf0)


def pdf(d: PLDensity, state: int, x):
    f, _, _ = _dens(d, state)
    return np.interp(x, d.grid, f)


def cdf(d: PLDensity, state: int, x):
    f, c, _ = _dens(d, state)
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    j = _seg(d, x)
    g = d.grid
    slope = (f[j + 1] - f[j]) / (g[j + 1] - g[j])
    dx = x - g[j]
    return c[j] + dx * (f[j] + 0.5 * slope * dx)


def sf(d: PLDensity, state: int, x):
    f, _, s = _dens(d, state)
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    j = _seg(d, x)
    g = d.grid
    slope = (f[j + 1] - f[j]) / (g[j + 1] - g[j])
    dx = g[j + 1] - x
    return s[j + 1] + dx * (f[j + 1] - 0.5 * slope * dx)


def mass(d: PLDensity, state: int, a, b):
    """Probability of the open interval (a, b); zero when b <= a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    upper = a >= 0.0
    out = np.where(upper, sf(d, state, a) - sf(d, state, b), cdf(d, state, b) - cdf(d, state, a))
    return np.where(b > a, np.maximum(out, 0.0), 0.0)


def ppf(d: PLDensity, state: int, u):
    """Inverse CDF; the upper half is inverted through the survival function."""
    f, c, s = _dens(d, state)
    u = np.asarray(u, dtype=np.float64)
    g = d.grid
    lower = u <= 0.5
    # lower tail: locate via cdf nodes
    jl = np.clip(np.searchsorted(c, u, side="right") - 1, 0, d.segments - 1)
    slope_l = (f[jl + 1] - f[jl]) / (g[jl + 1] - g[jl])
    r = np.maximum(u - c[jl], 0.0)
    disc = np.sqrt(np.maximum(f[jl] ** 2 + 2.0 * slope_l * r, 0.0))
    denom = f[jl] + disc
    xl = g[jl] + np.where(denom > 0, 2.0 * r / np.where(denom > 0, denom, 1.0), 0.0)
    # upper tail: locate via survival nodes (decreasing)
    v = 1.0 - u
    ju = np.clip(np.searchsorted(-s, -v, side="left") - 1, 0, d.segments - 1)
    slope_u = (f[ju + 1] - f[ju]) / (g[ju + 1] - g[ju])
    r = np.maximum(v - s[ju + 1], 0.0)
    disc = np.sqrt(np.maximum(f[ju + 1] ** 2 - 2.0 * slope_u * r, 0.0))
    denom = f[ju + 1] + disc
    xu = g[ju + 1] - np.where(denom > 0, 2.0 * r / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(np.where(lower, xl, xu), -1.0, 1.0)


def llr(d: PLDensity, x):
    with np.errstate(divide="ignore"):
        return np.log(pdf(d, 1, x)) - np.log(pdf(d, 0, x))


def threshold(d: PLDensity, lam):
    """Signal t with llr(t) = -lam; +-1 when no interior root exists."""
    lam = np.asarray(lam, dtype=np.float64)
    target = -lam
    ll = d.llr
    j = np.clip(np.searchsorted(ll, target, side="right") - 1, 0, d.segments - 1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        r = np.exp(target)
        num = r * d.f0[j] - d.f1[j]
        den = (d.f1[j + 1] - d.f1[j]) - r * (d.f0[j + 1] - d.f0[j])
        alpha = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    alpha = np.clip(np.nan_to_num(alpha, nan=0.0), 0.0, 1.0)
    t = d.grid[j] + alpha * (d.grid[j + 1] - d.grid[j])
    t = np.where(target <= ll[0], -1.0, t)
    t = np.where(target >= ll[-1], 1.0, t)
    return t
