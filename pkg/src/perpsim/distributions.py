"""Input distributions for the perpetuity simulator.

Two families drive every experiment:

* the walk step ``xi`` -- zero mean, finite positive variance ``sigma**2``;
* the perturbation exponent ``zeta = log(eta)`` -- supported on ``[0, inf)``
  with an exact, piecewise-closed-form right tail, so that samplers can be
  validated against the tail function bit-for-bit.

Elementary laws (gamma with arbitrary positive shape, exponential, Pareto)
used by the limit-law module live here as well.  All samplers are pure
functions of ``(model, rng)`` where ``rng`` is a ``numpy.random.Generator``;
models are frozen dataclasses and safe to share across tasks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

RandomStream = np.random.Generator

_SQRT3 = math.sqrt(3.0)


class ModelError(ValueError):
    """Raised when a distribution model is constructed with illegal parameters."""


# ---------------------------------------------------------------------------
# Walk increment xi
# ---------------------------------------------------------------------------

#: increment kinds accepted by the public constructor
INCREMENT_KINDS = ("gaussian", "rademacher", "centered_uniform", "shifted_exponential")


@dataclass(frozen=True)
class IncrementModel:
    """Law of the walk step: mean 0, variance ``sigma**2`` by construction.

    ``kind == "constant0"`` (xi identically 0) is a test-only degenerate law;
    it has zero variance and is rejected by :func:`make_increment_model`.
    """

    kind: str
    sigma: float = 1.0


def make_increment_model(kind: str, sigma: float = 1.0) -> IncrementModel:
    if kind not in INCREMENT_KINDS:
        raise ModelError(
            f"unknown increment kind {kind!r}; expected one of {INCREMENT_KINDS} "
            "(the degenerate 'constant0' law has zero variance and is test-only)"
        )
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ModelError(f"sigma must be finite and > 0, got {sigma}")
    return IncrementModel(kind, float(sigma))


def sample_xi(model: IncrementModel, rng: RandomStream, size: int | None = None):
    """Draw xi.  Scalar when ``size`` is None, else an ndarray of that length."""
    n = 1 if size is None else int(size)
    s = model.sigma
    if model.kind == "gaussian":
        out = rng.standard_normal(n) * s
    elif model.kind == "rademacher":
        out = (rng.integers(0, 2, n).astype(np.float64) * 2.0 - 1.0) * s
    elif model.kind == "centered_uniform":
        # uniform on [-sqrt(3) s, sqrt(3) s]: variance s^2
        out = (rng.random(n) * 2.0 - 1.0) * (_SQRT3 * s)
    elif model.kind == "shifted_exponential":
        # Exp(mean s) - s: mean 0, variance s^2
        out = rng.standard_exponential(n) * s - s
    elif model.kind == "constant0":
        out = np.zeros(n)
    else:
        raise ModelError(f"unknown increment kind {model.kind!r}")
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Perturbation exponent zeta = log(eta) >= 0
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LightExp:
    """P{zeta > t} = exp(-rate t): light tail, t^2 P{zeta > t} -> 0."""

    rate: float


@dataclass(frozen=True)
class ParetoRV:
    """P{zeta > t} = min(1, kappa t^-beta) for t >= t0, beta in (1, 2).

    Below ``t0`` the survival is 1; if ``kappa * t0**-beta < 1`` the law
    carries an atom at ``t0`` of the leftover mass.  Regularly varying of
    index ``-beta`` either way.
    """

    beta: float
    kappa: float = 1.0
    t0: float = 1.0


@dataclass(frozen=True)
class QuadraticTail:
    """P{zeta > t} = min(1, lam t^-2) for t >= t0: the critical quadratic tail."""

    lam: float
    t0: float = 1.0


@dataclass(frozen=True)
class ZeroTail:
    """zeta identically 0 (test-only degenerate perturbation)."""


TailModel = Union[LightExp, ParetoRV, QuadraticTail, ZeroTail]

TAIL_KINDS = ("light_exp", "pareto_rv", "quadratic_tail")


def make_tail_model(kind: str, **params) -> TailModel:
    """Validated tail-model constructor.

    Rejects ``beta`` outside ``(1, 2)`` for ``pareto_rv``: at ``beta = 1`` the
    rescaled supremum is almost surely infinite, and a pure Pareto tail with
    ``beta = 2`` has ``t^2 P{zeta > t} -> lam`` (a finite limit), which sits
    on the critical boundary and must be requested as ``quadratic_tail``.
    """
    if kind == "light_exp":
        rate = params.get("rate")
        if rate is None or not (rate > 0 and math.isfinite(rate)):
            raise ModelError(f"light_exp requires rate > 0, got {rate}")
        return LightExp(float(rate))
    if kind == "pareto_rv":
        beta = params.get("beta")
        kappa = params.get("kappa", 1.0)
        t0 = params.get("t0", 1.0)
        if beta is None or not (1.0 < beta <= 2.0):
            raise ModelError(
                f"pareto_rv requires beta in (1, 2], got {beta}: at beta = 1 the "
                "limiting supremum is +inf almost surely, so index -1 tails are "
                "out of range"
            )
        if beta == 2.0:
            raise ModelError(
                "pareto_rv with beta = 2 is rejected: an exact quadratic tail has "
                "t^2 P{zeta > t} -> const, not -> inf as the beta = 2 regime of the "
                "heavy-tail limit requires; use quadratic_tail, whose limit mixes "
                "the walk and the perturbation"
            )
        if not (kappa > 0 and math.isfinite(kappa)):
            raise ModelError(f"pareto_rv requires kappa > 0, got {kappa}")
        if not (t0 > 0 and math.isfinite(t0)):
            raise ModelError(f"pareto_rv requires t0 > 0, got {t0}")
        return ParetoRV(float(beta), float(kappa), float(t0))
    if kind == "quadratic_tail":
        lam = params.get("lam", params.get("lambda"))
        t0 = params.get("t0", 1.0)
        if lam is None or not (lam > 0 and math.isfinite(lam)):
            raise ModelError(f"quadratic_tail requires lam > 0, got {lam}")
        if not (t0 > 0 and math.isfinite(t0)):
            raise ModelError(f"quadratic_tail requires t0 > 0, got {t0}")
        return QuadraticTail(float(lam), float(t0))
    raise ModelError(f"unknown tail kind {kind!r}; expected one of {TAIL_KINDS}")


def tail_function(model: TailModel, t):
    """Exact survival function P{zeta > t}, vectorised over ``t``."""
    t = np.asarray(t, dtype=np.float64)
    if isinstance(model, LightExp):
        return np.where(t < 0.0, 1.0, np.exp(-model.rate * np.maximum(t, 0.0)))
    if isinstance(model, ParetoRV):
        power = np.minimum(1.0, model.kappa * np.maximum(t, model.t0) ** (-model.beta))
        return np.where(t < model.t0, 1.0, power)
    if isinstance(model, QuadraticTail):
        power = np.minimum(1.0, model.lam * np.maximum(t, model.t0) ** (-2.0))
        return np.where(t < model.t0, 1.0, power)
    if isinstance(model, ZeroTail):
        return np.where(t < 0.0, 1.0, 0.0)
    raise ModelError(f"unknown tail model {model!r}")


def sample_zeta(model: TailModel, rng: RandomStream, size: int | None = None):
    """Draw zeta >= 0 by exact inversion of the tail function."""
    n = 1 if size is None else int(size)
    if isinstance(model, LightExp):
        out = rng.standard_exponential(n) / model.rate
    elif isinstance(model, (ParetoRV, QuadraticTail)):
        beta = 2.0 if isinstance(model, QuadraticTail) else model.beta
        scale = model.lam if isinstance(model, QuadraticTail) else model.kappa
        u = rng.random(n)
        # generalized inverse of the survival; u = 0 cannot occur with random()
        out = np.maximum(model.t0, (scale / u) ** (1.0 / beta))
    elif isinstance(model, ZeroTail):
        out = np.zeros(n)
    else:
        raise ModelError(f"unknown tail model {model!r}")
    return float(out[0]) if size is None else out


def satisfies_quadratic_moment(model: TailModel) -> bool:
    """True when E[(zeta^+)^2 / loglog zeta^+] < inf.

    Among the supported kinds only the exponential tail (and the degenerate
    zero tail) has it; every polynomial tail with index <= 2 fails, which is
    exactly the regime where the iterated-logarithm normalisation breaks down.
    """
    return isinstance(model, (LightExp, ZeroTail))


# ---------------------------------------------------------------------------
# Gamma law theta_{b,c} (shape b, rate c)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaLaw:
    b: float  # shape
    c: float  # rate


def make_gamma_law(b: float, c: float) -> GammaLaw:
    if not (b > 0 and math.isfinite(b)):
        raise ModelError(f"gamma shape must be > 0, got {b}")
    if not (c > 0 and math.isfinite(c)):
        raise ModelError(f"gamma rate must be > 0, got {c}")
    return GammaLaw(float(b), float(c))


def _gamma_shape_ge1(shape: float, rng: RandomStream, n: int) -> np.ndarray:
    # Marsaglia-Tsang squeeze; vectorised rejection with per-slot retry.
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    todo = np.arange(n)
    while todo.size:
        m = todo.size
        x = rng.standard_normal(m)
        v = 1.0 + c * x
        u = rng.random(m)
        v3 = v * v * v
        ok_v = v > 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            squeeze = u < 1.0 - 0.0331 * x**4
            log_ok = np.log(u) < 0.5 * x * x + d * (1.0 - v3 + np.log(np.where(ok_v, v3, 1.0)))
        accept = ok_v & (squeeze | log_ok)
        out[todo[accept]] = d * v3[accept]
        todo = todo[~accept]
    return out


def sample_gamma(law: GammaLaw, rng: RandomStream, size: int | None = None):
    """Gamma draw; shapes below 1 use the boost theta_{b,c} =d theta_{b+1,c} U^(1/b).

    The boost keeps the rejection step on shapes >= 1 where it is valid, which
    is what makes shape ``2a`` usable all the way down to a -> 0+.
    """
    n = 1 if size is None else int(size)
    if law.b >= 1.0:
        out = _gamma_shape_ge1(law.b, rng, n)
    else:
        g = _gamma_shape_ge1(law.b + 1.0, rng, n)
        u = rng.random(n)
        # u == 0 would underflow the power; random() excludes it
        out = g * u ** (1.0 / law.b)
    out = out / law.c
    return float(out[0]) if size is None else out
