"""Goodness-of-fit tests and iterated-logarithm diagnostics.

Kolmogorov-Smirnov thresholds use the asymptotic Kolmogorov distribution at
the configured significance (all production tests run at n >= 2000 where the
asymptotics are accurate to a couple of percent).  LIL traces follow a single
realization across a geometric grid of scales, because each almost-sure
statement is about one path; re-drawing per scale would test the wrong object.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distributions import (
    IncrementModel,
    RandomStream,
    TailModel,
    satisfies_quadratic_moment,
    sample_xi,
    sample_zeta,
)

# critical values c(alpha) of the Kolmogorov distribution: threshold is
# c(alpha) * sqrt((n + m) / (n m)), one-sample being the m = inf case
KS_CRITICAL = {0.01: 1.62762, 0.05: 1.35810, 0.10: 1.22387}

_LIL_CHUNK = 1 << 16


class HypothesisError(ValueError):
    """A diagnostic was requested outside the regime where it is meaningful."""


def ks_critical_value(alpha: float) -> float:
    try:
        return KS_CRITICAL[alpha]
    except KeyError:
        # c(alpha) = sqrt(-ln(alpha/2) / 2), exact for the asymptotic law
        return math.sqrt(-math.log(alpha / 2.0) / 2.0)


@dataclass(frozen=True)
class KsReport:
    statistic: float
    n: int
    threshold: float
    passed: bool
    mode: str  # "one_sample" | "two_sample"
    alpha: float
    m: int | None = None

    def as_dict(self) -> dict:
        d = {
            "statistic": self.statistic,
            "n": self.n,
            "threshold": self.threshold,
            "pass": self.passed,
            "mode": self.mode,
            "alpha": self.alpha,
        }
        if self.m is not None:
            d["m"] = self.m
        return d


def _clean(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sample")
    if np.isnan(x).any():
        raise ValueError("sample contains NaN")
    return x


def ks_one_sample(samples, cdf: Callable, alpha: float = 0.01) -> KsReport:
    """Two-sided sup distance between the ECDF and ``cdf``."""
    x = np.sort(_clean(samples))
    n = x.size
    f = np.asarray(cdf(x), dtype=np.float64)
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - f)
    d_minus = np.max(f - (grid - 1.0 / n))
    stat = float(max(d_plus, d_minus))
    thr = ks_critical_value(alpha) / math.sqrt(n)
    return KsReport(stat, n, thr, stat < thr, "one_sample", alpha)


def ks_two_sample(samples_a, samples_b, alpha: float = 0.01) -> KsReport:
    a = np.sort(_clean(samples_a))
    b = np.sort(_clean(samples_b))
    n, m = a.size, b.size
    all_x = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, all_x, side="right") / n
    cdf_b = np.searchsorted(b, all_x, side="right") / m
    stat = float(np.max(np.abs(cdf_a - cdf_b)))
    thr = ks_critical_value(alpha) * math.sqrt((n + m) / (n * m))
    return KsReport(stat, n, thr, stat < thr, "two_sample", alpha, m=m)


def ecdf(samples, x) -> np.ndarray:
    s = np.sort(_clean(samples))
    return np.searchsorted(s, np.asarray(x, dtype=np.float64), side="right") / s.size


# ---------------------------------------------------------------------------
# LIL traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimsupTrace:
    checkpoints: tuple  # ((scale, statistic), ...) in grid order
    target: float
    normalization: str  # "perpetuity" | "suprema" | "bm_functional"
    truncated: bool = False

    @property
    def scales(self) -> np.ndarray:
        return np.array([s for s, _ in self.checkpoints])

    @property
    def statistics(self) -> np.ndarray:
        return np.array([v for _, v in self.checkpoints])

    @property
    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.statistics)


def _loglog(x: float) -> float:
    return math.log(math.log(x))


def _check_geometric(grid: Sequence[float], decreasing: bool) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.size == 0:
        raise ValueError("empty scale grid")
    d = np.diff(g)
    if decreasing and g.size > 1 and np.any(d >= 0):
        raise ValueError("scale grid must be strictly decreasing")
    if not decreasing and g.size > 1 and np.any(d <= 0):
        raise ValueError("scale grid must be strictly increasing")
    return g


def lil_trace_suprema(
    increment: IncrementModel,
    tail: TailModel,
    n_grid: Sequence[int],
    rng: RandomStream,
) -> LimsupTrace:
    """statistic(n) = max_{k <= n}(S_k + zeta_{k+1}) / sqrt(n loglog n), target sqrt(2) sigma.

    Requires a tail with a finite quadratic-over-loglog moment; a quadratic
    polynomial tail breaks the statement (its record perturbations outgrow the
    normalization), so such models are rejected here.
    """
    if not satisfies_quadratic_moment(tail):
        raise HypothesisError(
            f"{type(tail).__name__} has an infinite x^2/loglog x moment, so the "
            "running-maximum normalization sqrt(n loglog n) does not apply; use a "
            "light (exponential) tail"
        )
    grid = _check_geometric(n_grid, decreasing=False).astype(np.int64)
    if grid[0] < 16:
        raise ValueError("smallest scale must be >= 16 so that loglog n > 0")
    n_max = int(grid[-1])

    checkpoints = []
    run_max = -math.inf
    s_last = 0.0
    next_i = 0
    k0 = 1
    # k = 0 term is zeta_1 alone
    run_max = float(sample_zeta(tail, rng, 1)[0])
    while k0 <= n_max:
        b = min(_LIL_CHUNK, n_max - k0 + 1)
        # always draw a full chunk so prefixes agree across different grids
        xi = sample_xi(increment, rng, _LIL_CHUNK)[:b]
        zc = sample_zeta(tail, rng, _LIL_CHUNK)[:b]
        s_path = s_last + np.cumsum(xi)
        terms = s_path + zc
        cummax = np.maximum(np.maximum.accumulate(terms), run_max)
        while next_i < grid.size and grid[next_i] <= k0 + b - 1:
            j = int(grid[next_i] - k0)
            n_here = float(grid[next_i])
            stat = cummax[j] / math.sqrt(n_here * _loglog(n_here))
            checkpoints.append((n_here, float(stat)))
            next_i += 1
        run_max = float(cummax[-1])
        s_last = float(s_path[-1])
        k0 += b
    return LimsupTrace(
        checkpoints=tuple(checkpoints),
        target=math.sqrt(2.0) * increment.sigma,
        normalization="suprema",
    )


def lil_trace_perpetuity(
    increment: IncrementModel,
    tail: TailModel,
    a_grid: Sequence[float],
    rng: RandomStream,
    delta: float = 40.0,
    k_min_factor: float = 10.0,
    step_budget: int = 3 * 10**8,
) -> LimsupTrace:
    """statistic(a) = 2 a log Y(a) / loglog(1/a) along one trajectory, target sigma.

    All Y(a) are functionals of the same (xi_k, zeta_k) stream, so the whole
    grid is evaluated on one path.  Scales whose drift-envelope horizon
    ``k_min_factor / a^2`` exceeds ``step_budget`` are dropped with a warning.
    """
    grid = _check_geometric(a_grid, decreasing=True)
    if grid[0] >= 1.0 / math.e:
        raise ValueError("a_grid must lie inside (0, 1/e) for loglog(1/a) > 0")

    horizons = k_min_factor / grid**2
    keep = horizons <= step_budget
    if not keep.all():
        dropped = grid[~keep]
        warnings.warn(
            f"lil_trace_perpetuity: dropping scales {dropped.tolist()} whose "
            f"horizon exceeds the step budget {step_budget}",
            RuntimeWarning,
        )
        grid = grid[keep]
        if grid.size == 0:
            raise ValueError("step budget leaves no usable scales")

    n_a = grid.size
    k_min = np.ceil(k_min_factor / grid**2).astype(np.int64)

    zeta1 = float(sample_zeta(tail, rng, 1)[0])
    m_acc = np.full(n_a, zeta1)
    s_acc = np.ones(n_a)
    z = np.full(n_a, zeta1)
    frozen = np.zeros(n_a, dtype=bool)
    log_y = np.zeros(n_a)

    s_last = 0.0
    k0 = 1
    while not frozen.all():
        if k0 > step_budget * 4 + 16:
            raise RuntimeError("perpetuity LIL trace failed to freeze within 4x budget")
        xi = sample_xi(increment, rng, _LIL_CHUNK)
        zc = sample_zeta(tail, rng, _LIL_CHUNK)
        s_path = s_last + np.cumsum(xi)
        kk = np.arange(k0, k0 + _LIL_CHUNK, dtype=np.float64)
        live = np.flatnonzero(~frozen)
        terms = s_path[None, :] - grid[live, None] * kk[None, :] + zc[None, :]
        run_z = np.maximum(np.maximum.accumulate(terms, axis=1), z[live, None])
        # merge chunk into per-scale log-sum-exp accumulators
        m2 = terms.max(axis=1)
        s2 = np.exp(terms - m2[:, None]).sum(axis=1)
        lo = m2 <= m_acc[live]
        s_acc[live] = np.where(
            lo,
            s_acc[live] + np.exp(m2 - np.where(lo, m_acc[live], m2)) * s2,
            np.exp(np.where(lo, 0.0, m_acc[live] - m2)) * s_acc[live] + s2,
        )
        m_acc[live] = np.maximum(m_acc[live], m2)
        z[live] = run_z[:, -1]
        # freeze a scale once past its horizon with the envelope delta below max
        envelope = s_path[-1] - grid[live] * (k0 + _LIL_CHUNK - 1)
        done = (k0 + _LIL_CHUNK - 1 >= k_min[live]) & (envelope + delta < z[live])
        for i in np.flatnonzero(done):
            gi = live[i]
            log_y[gi] = m_acc[gi] + math.log(s_acc[gi])
            frozen[gi] = True
        s_last = float(s_path[-1])
        k0 += _LIL_CHUNK

    stats = 2.0 * grid * log_y / np.array([_loglog(1.0 / a) for a in grid])
    checkpoints = tuple((float(a), float(v)) for a, v in zip(grid, stats))
    return LimsupTrace(
        checkpoints=checkpoints,
        target=increment.sigma,
        normalization="perpetuity",
        truncated=not keep.all(),
    )


def lil_trace_bm_functional(
    a_grid: Sequence[float],
    h: float,
    rng: RandomStream,
    step_budget: int = 3 * 10**8,
) -> LimsupTrace:
    """statistic(a) = 2 a log(int exp(B - a s) ds) / loglog(1/a) on one path, target 1."""
    grid = _check_geometric(a_grid, decreasing=True)
    if grid[0] >= 1.0 / math.e:
        raise ValueError("a_grid must lie inside (0, 1/e)")
    if h > grid[-1] / 10.0:
        raise ValueError(f"step h must satisfy h <= a_min/10, got h={h}")

    t_min = 10.0 / grid**2
    keep = t_min / h <= step_budget
    if not keep.all():
        warnings.warn(
            f"lil_trace_bm_functional: dropping scales {grid[~keep].tolist()} "
            f"beyond the step budget {step_budget}",
            RuntimeWarning,
        )
        grid = grid[keep]
        t_min = t_min[keep]
        if grid.size == 0:
            raise ValueError("step budget leaves no usable scales")

    n_a = grid.size
    sqrt_h = math.sqrt(h)
    integral = np.zeros(n_a)
    f_prev = np.ones(n_a)
    run_max = np.zeros(n_a)
    frozen = np.zeros(n_a, dtype=bool)
    b_last = 0.0
    step0 = 0
    chunk = _LIL_CHUNK
    while not frozen.all():
        if step0 > step_budget * 8 + 16:
            raise RuntimeError("BM-functional LIL trace failed to freeze within 8x budget")
        incr = sqrt_h * rng.standard_normal(chunk)
        b_path = b_last + np.cumsum(incr)
        tt = (step0 + np.arange(1, chunk + 1)) * h
        live = np.flatnonzero(~frozen)
        drifted = b_path[None, :] - grid[live, None] * tt[None, :]
        f = np.exp(drifted)
        integral[live] += h * (0.5 * f_prev[live] + f[:, :-1].sum(axis=1) + 0.5 * f[:, -1])
        f_prev[live] = f[:, -1]
        run_max[live] = np.maximum(run_max[live], drifted.max(axis=1))
        t_now = (step0 + chunk) * h
        done = (tt[-1] >= t_min[live]) & (drifted[:, -1] < run_max[live] - 40.0)
        frozen[live[done]] = True
        b_last = float(b_path[-1])
        step0 += chunk

    stats = 2.0 * grid * np.log(integral) / np.array([_loglog(1.0 / a) for a in grid])
    checkpoints = tuple((float(a), float(v)) for a, v in zip(grid, stats))
    return LimsupTrace(
        checkpoints=checkpoints,
        target=1.0,
        normalization="bm_functional",
        truncated=not keep.all(),
    )
