"""Streaming simulation of the discounted perpetuity and its running supremum.

One run walks k = 0, 1, ..., K generating (xi_k, zeta_{k+1}) and maintains,
for every u on a shared grid,

* ``log_Y(u)`` -- a streaming log-sum-exp over terms S_k - a u k + zeta_{k+1};
* ``Z(u)``     -- the running maximum of the same terms.

The grid shares one trajectory (common random numbers), matching the joint
nature of the convergence being probed.  Truncation follows a drift-envelope
rule: after ``k_min = k_min_factor / a^2`` steps, stop once the walk envelope
``S_k - a u_min k`` has spent ``patience`` consecutive steps more than
``delta`` below every running maximum.  Future terms are then dominated by a
geometric envelope with ratio ``exp(-a u / 2)``, whose total log-mass is
recorded as ``tail_bound``.

The generator is consumed in fixed-size blocks (xi block, then zeta block),
so a run is a pure function of (params, generator state).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    IncrementModel,
    RandomStream,
    TailModel,
    sample_xi,
    sample_zeta,
)

# chunk schedule is fixed (part of the reproducibility contract): short runs
# stay cheap, long heavy-tail runs amortize per-chunk overhead
_CHUNK_START = 4096
_CHUNK_MAX = 1 << 18
_HARD_CAP = 10**9


class TruncationOverrunError(RuntimeError):
    """The truncation rule failed to trigger within the hard step cap."""


@dataclass(frozen=True)
class TruncationRule:
    delta: float = 40.0
    k_min_factor: float = 10.0
    patience: int = 3

    def __post_init__(self):
        if not (self.delta > 0 and self.k_min_factor > 0 and self.patience > 0):
            raise ValueError(f"truncation parameters must be positive: {self}")


@dataclass(frozen=True)
class PerpetuityParams:
    a: float
    u_grid: tuple
    trunc: TruncationRule
    increment: IncrementModel
    tail: TailModel

    def __post_init__(self):
        if not (0.0 < self.a <= 1.0):
            raise ValueError(f"discount rate a must be in (0, 1], got {self.a}")
        u = np.asarray(self.u_grid, dtype=np.float64)
        if u.size == 0:
            raise ValueError("u_grid must be nonempty")
        if np.any(u <= 0.0):
            raise ValueError("u_grid entries must be > 0")
        if u.size > 1 and np.any(np.diff(u) <= 0.0):
            raise ValueError("u_grid must be strictly increasing")
        object.__setattr__(self, "u_grid", tuple(float(x) for x in u))


@dataclass(frozen=True)
class PerpetuityRun:
    u_grid: tuple
    log_y: tuple
    z: tuple
    k: int
    tail_bound: float
    seed: str = ""

    @property
    def log_y_by_u(self) -> dict:
        return dict(zip(self.u_grid, self.log_y))

    @property
    def z_by_u(self) -> dict:
        return dict(zip(self.u_grid, self.z))


def log_sum_exp_stream(state: float, new_term_log: float) -> float:
    """One step of a log-space streaming sum: log(exp(state) + exp(new)).

    ``-inf`` encodes the empty sum and is handled exactly.
    """
    if state == -math.inf:
        return new_term_log
    if new_term_log == -math.inf:
        return state
    hi, lo = (state, new_term_log) if state >= new_term_log else (new_term_log, state)
    return hi + math.log1p(math.exp(lo - hi))


class _LseAccumulator:
    """Vector log-sum-exp accumulator: one slot per u, merged chunk by chunk."""

    def __init__(self, n: int):
        self.m = np.full(n, -np.inf)
        self.s = np.zeros(n)

    def update(self, terms: np.ndarray) -> None:
        # terms: (n_u, chunk) matrix of new log-terms
        m2 = terms.max(axis=1)
        s2 = np.exp(terms - m2[:, None]).sum(axis=1)
        lower = m2 <= self.m
        # merge (m2, s2) into (m, s) anchored at the larger max
        s_new = np.where(
            lower,
            self.s + np.exp(m2 - np.where(lower, self.m, m2)) * s2,
            np.exp(np.where(lower, 0.0, self.m - m2)) * self.s + s2,
        )
        self.m = np.maximum(self.m, m2)
        self.s = s_new

    def values(self) -> np.ndarray:
        return self.m + np.log(self.s)


def _consecutive_true(cond: np.ndarray, carry: int) -> np.ndarray:
    """Count of consecutive True runs ending at each index, seeded by ``carry``."""
    n = cond.size
    pos = np.arange(1, n + 1)
    last_false = np.maximum.accumulate(np.where(~cond, pos, 0))
    cnt = pos - last_false
    if carry:
        cnt = cnt + np.where(last_false == 0, carry, 0)
    return cnt


def simulate_run(
    params: PerpetuityParams,
    rng: RandomStream,
    seed_id: str = "",
    hard_cap: int = _HARD_CAP,
) -> PerpetuityRun:
    """Simulate one realization of (log_Y(a u), Z(a u)) on the u-grid."""
    a = params.a
    u = np.asarray(params.u_grid)
    n_u = u.size
    rule = params.trunc
    k_min = int(math.ceil(rule.k_min_factor / (a * a)))
    u_min = u[0]

    # k = 0 term: S_0 = 0, so the term is zeta_1 for every u
    zeta1 = float(sample_zeta(params.tail, rng, 1)[0])
    acc = _LseAccumulator(n_u)
    acc.m[:] = zeta1
    acc.s[:] = 1.0
    z = np.full(n_u, zeta1)

    s_last = 0.0
    k0 = 1
    carry = 0
    k_stop = 0
    chunk = _CHUNK_START

    while True:
        if k0 > hard_cap:
            raise TruncationOverrunError(
                f"truncation rule did not trigger within {hard_cap} steps "
                f"(a={a}, k_min={k_min}, delta={rule.delta}); either a is too "
                "small for the configured cap or the rule is misconfigured"
            )
        xi = sample_xi(params.increment, rng, chunk)
        zc = sample_zeta(params.tail, rng, chunk)
        s_path = s_last + np.cumsum(xi)  # S_k for k in [k0, k0+chunk)
        kk = np.arange(k0, k0 + chunk, dtype=np.float64)

        terms = s_path[None, :] - a * u[:, None] * kk[None, :] + zc[None, :]
        run_z = np.maximum(np.maximum.accumulate(terms, axis=1), z[:, None])
        z_min_running = run_z.min(axis=0)

        cond = (s_path - a * u_min * kk + rule.delta) < z_min_running
        cnt = _consecutive_true(cond, carry)
        hit = np.flatnonzero((cnt >= rule.patience) & (kk >= k_min))

        if hit.size:
            j = int(hit[0])
            k_stop = k0 + j
            if k_stop > hard_cap:
                raise TruncationOverrunError(
                    f"truncation index {k_stop} exceeds the hard cap {hard_cap} "
                    f"(a={a}, k_min={k_min}); a is too small for the configured cap"
                )
            acc.update(terms[:, : j + 1])
            z = run_z[:, j].copy()
            break

        acc.update(terms)
        z = run_z[:, -1].copy()
        carry = int(cnt[-1]) if cond[-1] else 0
        s_last = float(s_path[-1])
        k0 += chunk
        chunk = min(chunk * 2, _CHUNK_MAX)

    log_y = acc.values()
    # log of the geometric envelope sum_{k>K} exp(Z - delta - a u (k-K)/2),
    # reported for the worst u on the grid
    per_u = z - rule.delta - np.log(np.expm1(a * u / 2.0))
    tail_bound = float(per_u.max())

    return PerpetuityRun(
        u_grid=params.u_grid,
        log_y=tuple(float(v) for v in log_y),
        z=tuple(float(v) for v in z),
        k=int(k_stop),
        tail_bound=tail_bound,
        seed=seed_id,
    )


@dataclass(frozen=True)
class ConvexityReport:
    max_violation: float
    curve: str = "both"


def check_convexity(run: PerpetuityRun) -> ConvexityReport:
    """Most negative divided second difference of u -> log_Y(u) and u -> Z(u).

    Both maps are convex path by path (log_Y as a log of a Laplace transform,
    Z as a supremum of affine functions of u), so the report should be >= 0
    up to floating-point noise.  Requires at least 3 grid points.
    """
    u = np.asarray(run.u_grid)
    if u.size < 3:
        raise ValueError("convexity check needs a u_grid with at least 3 points")
    worst = math.inf
    worst_curve = "both"
    for name, y in (("log_Y", np.asarray(run.log_y)), ("Z", np.asarray(run.z))):
        slopes = np.diff(y) / np.diff(u)
        second = np.diff(slopes)
        m = float(second.min())
        if m < worst:
            worst = m
            worst_curve = name
    return ConvexityReport(max_violation=worst, curve=worst_curve)
