"""Marginal limit laws: closed-form CDFs and cross-validating samplers.

Three families appear as small-discount limits of the rescaled perpetuity:

* ``BmSupLaw``  -- sup of a drifted Brownian motion, exactly exponential;
* ``PppSupLaw`` -- sup over the atoms (t_k, j_k) of a Poisson random measure
  with intensity dt x (gamma rho x^{-rho-1} dx) of ``j_k - u t_k``, with an
  explicit CDF on finite and infinite horizons;
* ``MixedSupLaw`` -- sup over the same atoms of ``sigma B(t_k) - u t_k + j_k``
  with an independent Brownian motion riding along; its CDF is only available
  as an expectation over Brownian paths and is estimated by Monte Carlo.

Every closed form is paired with a sampler built directly from the point
process / path mechanics, so the formulas and the generators validate each
other without sharing code paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .distributions import GammaLaw, RandomStream, sample_gamma  # noqa: F401  (GammaLaw re-exported for oracles)

_MIXED_BATCH = 512     # draws per batch in the mixed sampler
_CDF_MC_BATCH = 20000  # paths per batch in the mixed CDF estimator
_EF_CHUNK = 4096       # grid steps per chunk in the exponential functional


class LawError(ValueError):
    """Illegal limit-law parameters."""


# ---------------------------------------------------------------------------
# sup_{s>=0} (sigma B(s) - u s): exponential with rate 2u/sigma^2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BmSupLaw:
    sigma: float
    u: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.u > 0):
            raise LawError(f"BmSupLaw needs sigma > 0 and u > 0, got {self}")

    @property
    def rate(self) -> float:
        return 2.0 * self.u / (self.sigma * self.sigma)


def bm_sup_cdf(law: BmSupLaw, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x <= 0.0, 0.0, -np.expm1(-law.rate * np.maximum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


def sample_bm_sup(law: BmSupLaw, rng: RandomStream, size: int | None = None):
    n = 1 if size is None else int(size)
    out = rng.standard_exponential(n) / law.rate
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# sup_k (j_k - u t_k) over a Poisson random measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PppSupLaw:
    lam: float
    beta: float
    u: float
    horizon: float = math.inf

    def __post_init__(self):
        if not (self.lam > 0 and self.u > 0 and self.horizon > 0):
            raise LawError(f"PppSupLaw needs lam, u, horizon > 0, got {self}")
        if self.beta == 1.0:
            if math.isinf(self.horizon):
                raise LawError(
                    "index beta = 1 on an infinite horizon is degenerate: the "
                    "supremum is +inf almost surely (its CDF is identically 0); "
                    "a finite horizon is required at beta = 1"
                )
        elif not (1.0 < self.beta <= 2.0):
            raise LawError(f"beta must be 1 (finite horizon) or in (1, 2], got {self.beta}")


def ppp_sup_cdf(law: PppSupLaw, x):
    """Exact CDF; 0 for x <= 0 (the supremum is a.s. positive)."""
    x = np.asarray(x, dtype=np.float64)
    xp = np.maximum(x, 1e-300)
    if law.beta == 1.0:
        val = (xp / (law.u * law.horizon + xp)) ** (law.lam / law.u)
    else:
        c = law.lam / (law.u * (law.beta - 1.0))
        expo = xp ** (1.0 - law.beta)
        if math.isfinite(law.horizon):
            expo = expo - (xp + law.u * law.horizon) ** (1.0 - law.beta)
        val = np.exp(-c * expo)
    out = np.where(x <= 0.0, 0.0, val)
    return float(out) if out.ndim == 0 else out


def ppp_sup_quantile(law: PppSupLaw, p: float) -> float:
    if not (0.0 < p < 1.0):
        raise LawError(f"quantile level must be in (0, 1), got {p}")
    if law.beta == 1.0:
        q = p ** (law.u / law.lam)
        return law.u * law.horizon * q / (1.0 - q)
    c = law.lam / (law.u * (law.beta - 1.0))
    x_inf = (c / (-math.log(p))) ** (1.0 / (law.beta - 1.0))
    if math.isinf(law.horizon):
        return x_inf
    # finite horizon: CDF is larger, so the quantile sits below x_inf
    hi = x_inf
    lo = hi
    for _ in range(200):
        lo = lo / 2.0
        if ppp_sup_cdf(law, lo) < p:
            break
    else:
        raise LawError(f"failed to bracket quantile at p={p} for {law}")
    return float(brentq(lambda t: ppp_sup_cdf(law, t) - p, lo, hi, xtol=1e-14, rtol=1e-12))


def _ppp_blocks(law: PppSupLaw, delta: float, eps_miss: float):
    """Geometric time blocks with thresholds riding the drift line.

    Block i covers [e_i, e_{i+1}) and keeps marks j > z_i = u e_i + delta.
    A dropped point in block i has value j - u t <= delta, so given a sampled
    maximum above delta the thinning is exact.  On an infinite horizon blocks
    continue until the mean count of relevant points beyond the last edge is
    below ``eps_miss``.
    """
    u, beta, lam = law.u, law.beta, law.lam
    if math.isinf(law.horizon):
        # lam * (u (beta-1))^-1 * (u T + delta)^(1-beta) <= eps_miss
        tail_level = (eps_miss * u * (beta - 1.0) / lam) ** (1.0 / (1.0 - beta))
        t_end = max((tail_level - delta) / u, 2.0 * delta / u)
    else:
        t_end = law.horizon
    edges = [0.0]
    width = delta / u
    while edges[-1] < t_end:
        edges.append(min(edges[-1] + width, t_end))
        width *= 2.0
    edges_arr = np.array(edges)
    z = u * edges_arr[:-1] + delta
    means = lam * np.diff(edges_arr) * z ** (-beta)
    return edges_arr, z, means


def _sample_ppp_point_process(law: PppSupLaw, rng: RandomStream, n: int) -> np.ndarray:
    delta = ppp_sup_quantile(law, 1e-4) / 4.0
    edges, z, means = _ppp_blocks(law, delta, eps_miss=1e-6)
    inv_beta = 1.0 / law.beta

    out = np.full(n, -np.inf)
    idx = np.arange(n)
    for _ in range(64):
        out[idx] = -np.inf  # conditioning on clearing delta needs fresh draws
        m = idx.size
        for i in range(z.size):
            counts = rng.poisson(means[i], m)
            tot = int(counts.sum())
            if tot == 0:
                continue
            t = edges[i] + rng.random(tot) * (edges[i + 1] - edges[i])
            j = z[i] * np.maximum(rng.random(tot), 1e-300) ** (-inv_beta)
            owner = np.repeat(idx, counts)
            np.maximum.at(out, owner, j - law.u * t)
        idx = idx[out[idx] <= delta]
        if idx.size == 0:
            return out
    raise RuntimeError(f"point-process sampler failed to clear level {delta} for {law}")


def sample_ppp_sup(
    law: PppSupLaw,
    rng: RandomStream,
    size: int | None = None,
    method: str = "inverse",
):
    """Draw the point-process supremum.

    ``method="inverse"`` inverts the closed-form CDF (the production path);
    ``method="point_process"`` simulates the thinned atoms directly and is the
    independent oracle used to validate the closed form.
    """
    n = 1 if size is None else int(size)
    if method == "inverse":
        p = np.maximum(rng.random(n), 1e-300)
        if law.beta == 1.0:
            q = p ** (law.u / law.lam)
            out = law.u * law.horizon * q / (1.0 - q)
        elif math.isinf(law.horizon):
            c = law.lam / (law.u * (law.beta - 1.0))
            out = (c / (-np.log(p))) ** (1.0 / (law.beta - 1.0))
        else:
            out = np.array([ppp_sup_quantile(law, pi) for pi in p])
    elif method == "point_process":
        out = _sample_ppp_point_process(law, rng, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Mixed law: sup_k (sigma B(t_k) - u t_k + j_k), marks with index -2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedSupLaw:
    sigma: float
    lam: float
    u: float
    step: float | None = None     # BM grid for the CDF estimator; default 1e-3 min(1, x/u)
    horizon: float | None = None  # estimator horizon; default 12 sigma^2/u^2

    def __post_init__(self):
        if not (self.sigma > 0 and self.lam > 0 and self.u > 0):
            raise LawError(f"MixedSupLaw needs sigma, lam, u > 0, got {self}")
        if self.step is not None and not self.step > 0:
            raise LawError("step must be > 0 when given")
        if self.horizon is not None and not self.horizon > 0:
            raise LawError("horizon must be > 0 when given")


@dataclass(frozen=True)
class MixedCdfEstimate:
    estimate: float
    stderr: float
    horizon_warning: bool


def mixed_sup_cdf_mc(
    law: MixedSupLaw, x: float, n_paths: int, rng: RandomStream
) -> MixedCdfEstimate:
    """MC estimate of P{mixed sup <= x} = E exp(-lam G(x)) 1{BM part stays < x}.

    ``G(x)`` is the integral of (x - sigma B(t) + u t)^-2; a path whose
    Brownian part touches level x makes the integrand explode and contributes
    exactly 0.  The post-horizon integral is added analytically using the
    (u t)^-2 decay of the integrand, which the Brownian strong law provides.
    """
    if x <= 0.0:
        raise LawError(f"mixed CDF estimator requires x > 0, got {x}")
    sigma, lam, u = law.sigma, law.lam, law.u
    h = law.step if law.step is not None else 1e-3 * min(1.0, x / u)
    t_sim = law.horizon if law.horizon is not None else 12.0 * sigma * sigma / (u * u)
    n_steps = max(int(round(t_sim / h)), 8)
    t_sim = n_steps * h
    sqrt_h = math.sqrt(h)

    weights = np.empty(n_paths)
    late_kills = 0
    boundary_hits = 0
    n_done = 0
    while n_done < n_paths:
        m = min(_CDF_MC_BATCH, n_paths - n_done)
        b = np.zeros(m)
        integral = np.full(m, 1.0 / (x * x) * 0.5 * h)  # half-weight of the t=0 node
        g_prev = None
        killed = np.zeros(m, dtype=bool)
        kill_step = np.zeros(m, dtype=np.int64)
        for step_i in range(1, n_steps + 1):
            b += sqrt_h * rng.standard_normal(m)
            v = x - sigma * b + u * (step_i * h)
            newly = (~killed) & (v <= 0.0)
            kill_step[newly] = step_i
            killed |= newly
            # cap the integrand near the boundary so the weight underflows to 0
            # without inf arithmetic
            g = np.where(v > 1e-150, 1.0 / np.maximum(v, 1e-150) ** 2, 1e300)
            if step_i == 1:
                integral += 0.5 * h * g  # closes the trapezoid against the t=0 node
            else:
                integral += 0.5 * h * (g_prev + g)
            g_prev = g
        v_end = x - sigma * b + u * t_sim
        alive = ~killed
        boundary_hits += int(np.count_nonzero(alive & (v_end <= 0.0)))
        late_kills += int(np.count_nonzero(killed & (kill_step > 0.9 * n_steps)))
        tail = np.where(v_end > 0.0, 1.0 / (u * np.maximum(v_end, 1e-300)), 0.0)
        w = np.where(alive, np.exp(-lam * (integral + tail)), 0.0)
        weights[n_done : n_done + m] = w
        n_done += m

    n_alive = int(np.count_nonzero(weights > 0.0))
    warn = False
    if n_alive > 0 and boundary_hits / max(n_alive, 1) > 0.01:
        warn = True
    if late_kills / n_paths > 0.01:
        # kills this close to the horizon mean the horizon truncates real mass
        warn = True
    est = float(weights.mean())
    se = float(weights.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
    return MixedCdfEstimate(estimate=est, stderr=se, horizon_warning=warn)


def _mixed_windows(law: MixedSupLaw, delta: float):
    """Fine windows graded by 1x/2x/4x thresholds, then drift-riding far blocks.

    The fine windows cover the region where the Brownian argmax can live; the
    mark threshold doubles where the argmax is exponentially unlikely, keeping
    the atom count bounded.  Far blocks keep marks above
    ``4 delta + u (t - T3) / 2``; half the drift is left as margin for the
    Brownian fluctuation, so a dropped far atom beats the sampled maximum only
    on an event of probability well under 1e-4.
    """
    sigma, lam, u = law.sigma, law.lam, law.u
    t1 = max(4.0 * sigma * sigma / (u * u), delta / u)
    fine_edges = np.array([0.0, t1, 4.0 * t1, 16.0 * t1])
    fine_z = np.array([delta, 2.0 * delta, 4.0 * delta])
    t3 = fine_edges[-1]
    # far blocks until the mean count of candidate atoms beyond is < 5e-5
    z_end = max(2.0 * lam / (u * 2.5e-5), 8.0 * delta)
    t_end = t3 + 2.0 * (z_end - 4.0 * delta) / u
    far_edges = [t3]
    width = t3 / 4.0
    while far_edges[-1] < t_end:
        far_edges.append(min(far_edges[-1] + width, t_end))
        width *= 2.0
    far_edges = np.array(far_edges)
    far_z = 4.0 * delta + u * (far_edges[:-1] - t3) / 2.0
    edges = np.concatenate([fine_edges, far_edges[1:]])
    z = np.concatenate([fine_z, far_z])
    rate = lam * z ** (-2.0)  # atom rate per unit time above each threshold
    return edges, z, rate


def _mixed_batch(law: MixedSupLaw, rng: RandomStream, m: int, edges, z, rate) -> np.ndarray:
    """One batch of mixed-sup draws; Brownian motion advanced window by window."""
    sigma, u = law.sigma, law.u
    best = np.full(m, -np.inf)
    b_cur = np.zeros(m)
    t_cur = np.zeros(m)
    for i in range(z.size):
        left, right = edges[i], edges[i + 1]
        mean_count = rate[i] * (right - left)
        pad = int(math.ceil(mean_count + 6.0 * math.sqrt(mean_count) + 12.0))
        # sorted atom times via exponential gaps; rows needing more atoms than
        # pad are topped up below (vanishingly rare by construction)
        gaps = rng.standard_exponential((m, pad)) / rate[i]
        times = left + np.cumsum(gaps, axis=1)
        while times[:, -1].min() < right:
            extra = rng.standard_exponential((m, 8)) / rate[i]
            times = np.concatenate([times, times[:, -1:] + np.cumsum(extra, axis=1)], axis=1)
        valid = times < right
        clipped = np.minimum(times, right)
        # exact BM increments at the (sorted) atom times, then to the window edge
        dt = np.diff(np.concatenate([t_cur[:, None], clipped], axis=1), axis=1)
        incr = np.sqrt(dt) * rng.standard_normal(dt.shape)
        b_at = b_cur[:, None] + np.cumsum(incr, axis=1)
        edge_dt = right - clipped[:, -1]
        b_cur = b_at[:, -1] + np.sqrt(edge_dt) * rng.standard_normal(m)
        t_cur = np.full(m, right)
        j = z[i] * np.maximum(rng.random((m, times.shape[1])), 1e-300) ** -0.5
        vals = np.where(valid, sigma * b_at - u * clipped + j, -np.inf)
        best = np.maximum(best, vals.max(axis=1))
    return best


def sample_mixed_sup(law: MixedSupLaw, rng: RandomStream, size: int | None = None):
    """Point-process sampler for the mixed supremum.

    Atoms with marks above a graded threshold are simulated together with the
    Brownian motion evaluated exactly at the atom times (sequential Gaussian
    increments, no grid).  Draws that fail to clear the thinning level are
    re-sampled; the observed resample rate is itself a diagnostic for the
    thinning bias and stays far below 1e-3 at sane parameters.
    """
    n = 1 if size is None else int(size)
    sigma, lam, u = law.sigma, law.lam, law.u
    pure = PppSupLaw(lam=lam, beta=2.0, u=u)
    q_low = ppp_sup_quantile(pure, 1e-4)
    scale = max(sigma * sigma / (2.0 * u), ppp_sup_quantile(pure, 0.5))
    # mesh bound: the between-atom Brownian deficit 0.583 sigma sqrt(delta^2/lam)
    # is kept at ~3% of the law's scale
    delta_mesh = 0.03 * scale * math.sqrt(lam) / (0.5826 * sigma)
    delta = min(q_low / 4.0, delta_mesh)
    edges, z, rate = _mixed_windows(law, delta)

    out = np.empty(n)
    done = 0
    while done < n:
        m = min(_MIXED_BATCH, n - done)
        vals = _mixed_batch(law, rng, m, edges, z, rate)
        for _ in range(64):
            bad = np.flatnonzero(vals <= delta)
            if bad.size == 0:
                break
            vals[bad] = _mixed_batch(law, rng, bad.size, edges, z, rate)
        else:
            raise RuntimeError(f"mixed sampler failed to clear level {delta} for {law}")
        out[done : done + m] = vals
        done += m
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Exponential functional of Brownian motion: int_0^inf exp(B(s) - a s) ds
# ---------------------------------------------------------------------------


def exp_functional_bm(
    a: float,
    h: float,
    rng: RandomStream,
    size: int | None = None,
    max_steps: int = 2 * 10**9,
):
    """Trapezoid evaluation of the Brownian exponential functional.

    The horizon adapts per path: integration stops once the drifted path has
    fallen 40 below its running maximum and at least ``10 / a^2`` time units
    have elapsed, after which the neglected mass is geometrically negligible.
    """
    if not (0.0 < a <= 1.0):
        raise LawError(f"discount a must be in (0, 1], got {a}")
    if h > a / 10.0:
        raise LawError(f"step h must satisfy h <= a/10, got h={h}, a={a}")
    n = 1 if size is None else int(size)
    t_min = 10.0 / (a * a)
    sqrt_h = math.sqrt(h)

    integral = np.zeros(n)
    f_prev = np.ones(n)  # exp(B(0) - 0)
    b = np.zeros(n)
    run_max = np.zeros(n)
    alive = np.arange(n)
    step0 = 0
    while alive.size:
        if step0 > max_steps:
            raise RuntimeError(
                f"exponential-functional horizon cap exceeded at a={a}, h={h}: "
                f"{alive.size} paths still integrating after {step0} steps"
            )
        m = alive.size
        incr = sqrt_h * rng.standard_normal((m, _EF_CHUNK))
        paths = b[alive, None] + np.cumsum(incr, axis=1)
        tt = (step0 + np.arange(1, _EF_CHUNK + 1)) * h
        drifted = paths - a * tt[None, :]
        f = np.exp(drifted)
        integral[alive] += h * (0.5 * f_prev[alive] + f[:, :-1].sum(axis=1) + 0.5 * f[:, -1])
        f_prev[alive] = f[:, -1]
        b[alive] = paths[:, -1]
        run_max[alive] = np.maximum(run_max[alive], drifted.max(axis=1))
        t_now = (step0 + _EF_CHUNK) * h
        if t_now >= t_min:
            still = drifted[:, -1] >= run_max[alive] - 40.0
            alive = alive[still]
        step0 += _EF_CHUNK
    return float(integral[0]) if size is None else integral
