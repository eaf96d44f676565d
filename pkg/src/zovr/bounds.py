"""Closed-form variance and convergence bounds, plus Monte-Carlo checks.

The formulas are pure functions of :class:`BoundInputs`.  The Monte-Carlo
helpers draw the same random quantities the optimizers draw (batches,
directions, anchor sets) through the public estimator functions, and return
sample means with standard errors so that callers can compare
``mean <= bound + 3 * stderr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .estimators import coord_estimate, sample_unit_sphere, svrg_coord_inner, svrg_rand_inner
from .objectives import FiniteSumObjective, analytic_gradient
from .optimizers import run_zo_spider_coord
from .params import HyperParams

__all__ = [
    "BoundInputs",
    "lemma1_bound",
    "lemma2_bound",
    "lemma3_bound",
    "coord_bias_bound",
    "smoothing_gaps",
    "SvrgRandConstants",
    "svrg_rand_constants",
    "svrg_rand_stationarity_bound",
    "spider_stationarity_bound",
    "gradient_variance",
    "sample_unit_ball",
    "smoothed_gradient",
    "smoothed_value",
    "MonteCarloEstimate",
    "mc_svrg_rand_variance",
    "mc_svrg_coord_variance",
    "mc_spider_variance",
]


@dataclass(frozen=True)
class BoundInputs:
    """Problem constants and algorithm parameters entering the bounds.

    ``dist_sq`` is ``|x^k - x_anchor|^2`` for the iterate being bounded.
    The anchor-batch indicator ``s1 < n`` is derived, not stored.
    """

    L: float
    sigma2: float
    d: int
    n: int
    s1: int
    s2: int
    q: int
    K: int
    eta: float
    beta: float
    delta: float
    dist_sq: float = 0.0

    def __post_init__(self):
        for name in ("d", "n", "s1", "s2", "q", "K"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.s1 > self.n:
            raise ValueError(f"s1={self.s1} exceeds n={self.n}")
        for name in ("L", "eta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("sigma2", "beta", "delta", "dist_sq"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and nonnegative")

    @classmethod
    def from_params(cls, hp: HyperParams, L: float, sigma2: float, n: int, d: int, dist_sq: float = 0.0):
        return cls(L, sigma2, d, n, hp.s1, hp.s2, hp.q, hp.K, hp.eta, hp.beta, hp.delta, dist_sq)

    @property
    def indicator(self) -> int:
        return int(self.s1 < self.n)

    def anchor_term(self, factor: float) -> float:
        """``factor * I(s1 < n) / s1 * (2 L^2 d delta^2 + sigma^2)``."""
        if not self.indicator:
            return 0.0
        return factor / self.s1 * (2 * self.L**2 * self.d * self.delta**2 + self.sigma2)


def lemma1_bound(inp: BoundInputs) -> float:
    """Bound on ``E|v^k - grad f_beta(x^k)|^2`` for the ZO-SVRG-Coord-Rand inner estimate."""
    L2, d, s2 = inp.L**2, inp.d, inp.s2
    return (
        6 * d * L2 * inp.dist_sq / s2
        + 3 * L2 * inp.beta**2 * d**2 / s2
        + inp.anchor_term(18)
        + 6 * L2 * d * inp.delta**2
        + 1.5 * inp.beta**2 * L2 * d**2
    )


def lemma2_bound(inp: BoundInputs) -> float:
    """Bound on ``E|v^k - coord_grad f(x^k)|^2`` for the ZO-SVRG-Coord inner estimate."""
    L2 = inp.L**2
    return 12 * L2 * inp.d * inp.delta**2 / inp.s2 + 6 * L2 * inp.dist_sq / inp.s2 + inp.anchor_term(6)


def lemma3_bound(inp: BoundInputs, sum_v_sq: float, k_minus_anchor: int) -> float:
    """Bound on ``E|v^k - coord_grad f(x^k)|^2`` for the ZO-SPIDER-Coord recursion.

    ``sum_v_sq`` is ``sum_{t=anchor}^{k-1} E|v^t|^2`` and ``k_minus_anchor``
    the number of inner steps since the last refresh.
    """
    if sum_v_sq < 0:
        raise ValueError("sum_v_sq must be nonnegative")
    if k_minus_anchor < 0:
        raise ValueError("k_minus_anchor must be nonnegative")
    L2 = inp.L**2
    return (
        3 * inp.eta**2 * L2 / inp.s2 * sum_v_sq
        + k_minus_anchor * 6 * L2 * inp.d * inp.delta**2 / inp.s2
        + inp.anchor_term(3)
    )


def coord_bias_bound(L: float, d: int, delta: float) -> float:
    """``|coord_grad f(x) - grad f(x)|^2 <= L^2 d delta^2``."""
    return L**2 * d * delta**2


def smoothing_gaps(L: float, d: int, beta: float) -> tuple[float, float]:
    """``(beta^2 L / 2, beta L d / 2)``: value and gradient gaps between ``f_beta`` and ``f``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return beta**2 * L / 2, beta * L * d / 2


# -- convergence bounds (reporting only) -------------------------------------


@dataclass(frozen=True)
class SvrgRandConstants:
    g: float
    c: float
    lam: float
    rho: float
    chi: float
    tau: float


def svrg_rand_constants(inp: BoundInputs, g: Optional[float] = None) -> SvrgRandConstants:
    """Lyapunov constants of the ZO-SVRG-Coord-Rand analysis.

    ``g`` defaults to ``4000 d eta^2 L^3 q / s2``, the choice paired with the
    mini-batch parameter selector.
    """
    L, d, eta, s2, q = inp.L, inp.d, inp.eta, inp.s2, inp.q
    if g is None:
        g = 4000 * d * eta**2 * L**3 * q / s2
    if not g > 0:
        raise ValueError("g must be positive")
    theta = eta * g + 12 * eta**2 * d * L**2 / s2
    c = 9 * d * L**3 * eta**2 / s2 * ((1 + theta) ** q - 1) / theta
    lam = eta / 4 - 4 * c * eta / g - 1.5 * L * eta**2
    rho = (6 * eta**2 * L + c * eta / g) * L**2 * d**2 * inp.beta**2
    chi = inp.beta**2 * L**2 * d**2 + inp.anchor_term(9) + 3 * L**2 * d * inp.delta**2
    tau = (eta / 2 + 2 * c * eta / g + 4 * c * eta**2 + 3 * L * eta**2) * chi + rho
    return SvrgRandConstants(g, c, lam, rho, chi, tau)


def svrg_rand_stationarity_bound(inp: BoundInputs, initial_gap: float, g: Optional[float] = None) -> float:
    """``initial_gap / (lambda (K + 1)) + tau / lambda``; ``inf`` when ``lambda <= 0``."""
    k = svrg_rand_constants(inp, g)
    if k.lam <= 0:
        return math.inf
    return initial_gap / (k.lam * (inp.K + 1)) + k.tau / k.lam


def spider_stationarity_bound(inp: BoundInputs, initial_gap: float) -> float:
    """Bound on ``E|grad f(x_zeta)|^2`` for ZO-SPIDER-Coord; ``inf`` when ``phi <= 0``."""
    L, d, eta, s2, q, dl2 = inp.L, inp.d, inp.eta, inp.s2, inp.q, inp.delta**2
    phi = eta / 2 - eta**2 * L / 2 - 3 * L**2 * eta**3 * q / s2
    if phi <= 0:
        return math.inf
    theta = 3 * q * L**2 * d * dl2 / s2 + inp.anchor_term(3)
    lead = 9 * q * eta**2 * L**2 / (phi * s2) + 3 / phi
    return 3 * L**2 * d * dl2 + 3 * theta + lead * (initial_gap / inp.K + eta * (theta + L**2 * d * dl2))


# -- problem constants by enumeration ----------------------------------------


def gradient_variance(obj: FiniteSumObjective, probe_points) -> float:
    """``max_x (1/n) sum_i |grad f_i(x) - grad f(x)|^2`` over the probe points."""
    worst = 0.0
    for x in np.atleast_2d(np.asarray(probe_points, dtype=np.float64)):
        grads = obj.component_gradients(x)
        worst = max(worst, float(np.mean(np.sum((grads - grads.mean(axis=0)) ** 2, axis=1))))
    return worst


def sample_unit_ball(rng: np.random.Generator, d: int, size: int) -> np.ndarray:
    """Uniform draws from the unit ball, shape ``(size, d)``."""
    u = sample_unit_sphere(rng, d, size)
    return u * rng.random((size, 1)) ** (1.0 / d)


def smoothed_gradient(obj: FiniteSumObjective, x, beta: float, rng: np.random.Generator, samples: int = 20000) -> np.ndarray:
    """Monte-Carlo ``grad f_beta(x) = E_w grad f(x + beta w)``, ``w`` uniform in the ball."""
    x = np.asarray(x, dtype=np.float64)
    pts = x + beta * sample_unit_ball(rng, obj.d, samples)
    return np.mean([analytic_gradient(obj, p) for p in pts], axis=0)


def smoothed_value(obj: FiniteSumObjective, x, beta: float, rng: np.random.Generator, samples: int = 20000) -> float:
    """Monte-Carlo ``f_beta(x) = E_w f(x + beta w)``; antithetic pairs cancel the odd terms."""
    x = np.asarray(x, dtype=np.float64)
    w = sample_unit_ball(rng, obj.d, samples)
    pts = np.concatenate([x + beta * w, x - beta * w])
    return float(np.mean(obj.eval_batch(np.arange(obj.n), pts)))


# -- Monte-Carlo variance estimates ------------------------------------------


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    draws: int

    def dominated_by(self, bound: float, n_se: float = 3.0) -> bool:
        return self.mean <= bound + n_se * self.stderr


def _summary(values: np.ndarray) -> MonteCarloEstimate:
    values = np.asarray(values, dtype=np.float64)
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return MonteCarloEstimate(float(values.mean()), se, int(values.size))


def _anchor_grad(obj, rng, s1, x_anchor, delta):
    if s1 >= obj.n:
        idx = np.arange(obj.n)
    else:
        idx = np.sort(rng.choice(obj.n, size=s1, replace=False))
    return coord_estimate(obj, idx, x_anchor, delta).vector


def mc_svrg_rand_variance(
    obj: FiniteSumObjective,
    x_k,
    x_anchor,
    hp: HyperParams,
    rng: np.random.Generator,
    draws: int = 10_000,
    reference: Optional[np.ndarray] = None,
) -> MonteCarloEstimate:
    """``E|v^k - grad f_beta(x^k)|^2`` for the two-point inner estimate.

    Each draw samples the anchor set ``S1`` (when ``s1 < n``), the inner
    batch and its directions.  ``reference`` defaults to a Monte-Carlo
    ``grad f_beta(x^k)``.
    """
    if reference is None:
        reference = smoothed_gradient(obj, x_k, hp.beta, rng)
    fixed = _anchor_grad(obj, rng, hp.s1, x_anchor, hp.delta) if hp.s1 >= obj.n else None
    errs = np.empty(draws)
    for t in range(draws):
        g0 = fixed if fixed is not None else _anchor_grad(obj, rng, hp.s1, x_anchor, hp.delta)
        batch = rng.integers(0, obj.n, size=hp.s2)
        us = sample_unit_sphere(rng, obj.d, hp.s2)
        v = svrg_rand_inner(obj, batch, us, x_k, x_anchor, g0, hp.beta).vector
        errs[t] = np.sum((v - reference) ** 2)
    return _summary(errs)


def mc_svrg_coord_variance(
    obj: FiniteSumObjective, x_k, x_anchor, hp: HyperParams, rng: np.random.Generator, draws: int = 10_000
) -> MonteCarloEstimate:
    """``E|v^k - coord_grad f(x^k)|^2`` for the ZO-SVRG-Coord inner estimate."""
    reference = coord_estimate(obj, np.arange(obj.n), x_k, hp.delta).vector
    fixed = _anchor_grad(obj, rng, hp.s1, x_anchor, hp.delta) if hp.s1 >= obj.n else None
    errs = np.empty(draws)
    for t in range(draws):
        g0 = fixed if fixed is not None else _anchor_grad(obj, rng, hp.s1, x_anchor, hp.delta)
        batch = rng.integers(0, obj.n, size=hp.s2)
        v = svrg_coord_inner(obj, batch, x_k, x_anchor, g0, hp.delta).vector
        errs[t] = np.sum((v - reference) ** 2)
    return _summary(errs)


@dataclass(frozen=True)
class SpiderVarianceCheck:
    """Per-iteration Monte-Carlo check of the recursive-estimator bound.

    ``excess[k]`` estimates ``E|v^k - coord_grad f(x^k)|^2 - a * sum_t E|v^t|^2``
    (the data-dependent part of the bound moved to the left), so the check is
    ``excess[k].mean <= constant[k] + 3 * excess[k].stderr``.
    """

    excess: list[MonteCarloEstimate]
    constant: list[float]
    error: list[MonteCarloEstimate]

    def violations(self, n_se: float = 3.0) -> list[int]:
        return [k for k, (e, c) in enumerate(zip(self.excess, self.constant)) if not e.dominated_by(c, n_se)]


def mc_spider_variance(
    obj: FiniteSumObjective, hp: HyperParams, sigma2: float, seeds: Sequence[int], x0=None
) -> SpiderVarianceCheck:
    """Run ZO-SPIDER-Coord once per seed and test the variance bound at every ``k``."""
    K, q = hp.K, hp.q
    err = np.zeros((len(seeds), K + 1))
    vsq = np.zeros((len(seeds), K + 1))
    full = np.arange(obj.n)
    for r, seed in enumerate(seeds):

        def record(state, r=r):
            ref = coord_estimate(obj, full, state.x, hp.delta).vector
            err[r, state.k] = np.sum((state.v - ref) ** 2)
            vsq[r, state.k] = np.sum(state.v**2)

        run_zo_spider_coord(obj, hp.with_(seed=int(seed)), x0, callback=record, record_every=K + 1)
    inp = BoundInputs.from_params(hp, obj.metadata.smoothness_L, sigma2, obj.n, obj.d)
    a = 3 * hp.eta**2 * inp.L**2 / hp.s2
    excess, constant, error = [], [], []
    for k in range(K + 1):
        start = k - k % q
        partial = vsq[:, start:k].sum(axis=1)
        excess.append(_summary(err[:, k] - a * partial))
        constant.append(lemma3_bound(inp, 0.0, k - start))
        error.append(_summary(err[:, k]))
    return SpiderVarianceCheck(excess, constant, error)
