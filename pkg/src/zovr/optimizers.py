"""Zeroth-order variance-reduced optimizer loops and baselines.

All loops share one skeleton (:func:`_run`): iterations ``k = 0..K``; when
``k % q == 0`` an outer step refreshes the anchor with a coordinate-wise
estimate over a batch ``S1`` drawn without replacement, otherwise an
algorithm-specific inner estimate is formed from a batch ``S2`` drawn with
replacement; then ``x <- x - eta * v`` (or its proximal version).

RNG consumption order is part of the contract (tests replay it):

1. the output index ``zeta`` is drawn first, uniform on ``{0..K}``;
2. the C variants draw their snapshot offset at every outer step;
3. outer steps draw ``S1`` only when ``s1 < n`` (``s1 == n`` uses ``0..n-1``);
4. inner steps draw the batch, then (two-point methods) the directions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .estimators import (
    GradientEstimate,
    coord_estimate,
    sample_unit_sphere,
    spider_coord_step,
    svrg_coord_inner,
    svrg_rand_inner,
)
from .objectives import FiniteSumObjective, QueryMeter, analytic_gradient, full_value, metered
from .params import HyperParams
from .prox import ProximableRegularizer, ZeroRegularizer, generalized_gradient

__all__ = [
    "TraceRow",
    "RunTrace",
    "OptimizerState",
    "run_zo_svrg_coord_rand",
    "run_zo_svrg_coord",
    "run_zo_spider_coord",
    "run_prox_zo_spider_coord",
    "run_zo_svrg_coord_rand_c",
    "run_zo_spider_coord_c",
    "run_zo_gd",
    "run_zo_sgd",
    "ALGORITHMS",
    "run_algorithm",
    "expected_queries",
]


@dataclass(frozen=True)
class TraceRow:
    k: int
    queries: int
    f_value: float
    grad_norm_sq: float
    wall_ms: float = 0.0


@dataclass
class RunTrace:
    """Per-iterate record of a run.

    Row ``k`` describes iterate ``x^k`` and the number of queries spent to
    produce it.  ``status`` is ``"ok"``, ``"budget"`` (stopped by the query
    cap) or ``"nonfinite"`` (aborted; rows up to the failure are kept).
    """

    rows: list[TraceRow] = field(default_factory=list)
    output_index: int = -1
    x_output: Optional[np.ndarray] = None
    x_final: Optional[np.ndarray] = None
    algorithm: str = ""
    status: str = "ok"
    message: str = ""
    total_queries: int = 0
    per_phase: dict = field(default_factory=dict)
    outer_steps: int = 0
    inner_steps: int = 0

    @property
    def queries(self) -> np.ndarray:
        return np.array([r.queries for r in self.rows], dtype=np.int64)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([r.f_value for r in self.rows])

    @property
    def grad_norms_sq(self) -> np.ndarray:
        return np.array([r.grad_norm_sq for r in self.rows])


@dataclass
class OptimizerState:
    """Mutable loop state handed to callbacks after ``v^k`` is formed."""

    x: np.ndarray
    v: Optional[np.ndarray] = None
    anchor_x: Optional[np.ndarray] = None
    anchor_grad: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None
    k: int = 0
    is_outer: bool = False


Callback = Callable[[OptimizerState], None]


def _outer_batch(rng: np.random.Generator, n: int, s1: int) -> np.ndarray:
    if s1 >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=s1, replace=False))


class _Algorithm:
    """Hooks that distinguish one algorithm from another."""

    name = ""
    uses_epochs = True
    convex_snapshot = False

    def outer(self, obj, rng, hp, state: OptimizerState) -> GradientEstimate:
        est = coord_estimate(obj, _outer_batch(rng, obj.n, hp.s1), state.x, hp.delta)
        state.anchor_x = state.x
        state.anchor_grad = est.vector
        return est

    def inner(self, obj, rng, hp, state: OptimizerState) -> GradientEstimate:
        raise NotImplementedError


class _SvrgCoordRand(_Algorithm):
    name = "zo-svrg-coord-rand"

    def inner(self, obj, rng, hp, state):
        batch = rng.integers(0, obj.n, size=hp.s2)
        us = sample_unit_sphere(rng, obj.d, hp.s2)
        return svrg_rand_inner(obj, batch, us, state.x, state.anchor_x, state.anchor_grad, hp.beta)


class _SvrgCoord(_Algorithm):
    name = "zo-svrg-coord"

    def inner(self, obj, rng, hp, state):
        batch = rng.integers(0, obj.n, size=hp.s2)
        return svrg_coord_inner(obj, batch, state.x, state.anchor_x, state.anchor_grad, hp.delta)


class _SpiderCoord(_Algorithm):
    name = "zo-spider-coord"

    def inner(self, obj, rng, hp, state):
        batch = rng.integers(0, obj.n, size=hp.s2)
        return spider_coord_step(obj, batch, state.x, state.x_prev, state.v, hp.delta)


class _SvrgCoordRandC(_SvrgCoordRand):
    name = "zo-svrg-coord-rand-c"
    convex_snapshot = True

    def inner(self, obj, rng, hp, state):
        batch = rng.integers(0, obj.n, size=1)
        us = sample_unit_sphere(rng, obj.d, 1)
        return svrg_rand_inner(obj, batch, us, state.x, state.anchor_x, state.anchor_grad, hp.beta)


class _SpiderCoordC(_SpiderCoord):
    name = "zo-spider-coord-c"
    convex_snapshot = True

    def inner(self, obj, rng, hp, state):
        batch = rng.integers(0, obj.n, size=1)
        return spider_coord_step(obj, batch, state.x, state.x_prev, state.v, hp.delta)


class _ZoSgd(_Algorithm):
    name = "zo-sgd"
    uses_epochs = False

    def inner(self, obj, rng, hp, state):
        batch = rng.integers(0, obj.n, size=hp.s2)
        us = sample_unit_sphere(rng, obj.d, hp.s2)
        return _two_point_minibatch(obj, batch, us, state.x, hp.beta)


class _ZoGd(_Algorithm):
    name = "zo-gd"
    uses_epochs = False

    def inner(self, obj, rng, hp, state):
        u = sample_unit_sphere(rng, obj.d)
        n = obj.n
        return _two_point_minibatch(obj, np.arange(n), np.broadcast_to(u, (n, obj.d)), state.x, hp.beta)


def _two_point_minibatch(obj, batch, us, x, beta) -> GradientEstimate:
    """``mean_j d (f_{a_j}(x + beta u_j) - f_{a_j}(x)) / beta * u_j``."""
    m = batch.size
    d = obj.d
    points = np.concatenate([x + beta * us, np.broadcast_to(x, (m, d))])
    vals = obj.eval_paired(np.concatenate([batch, batch]), points)
    coeff = d * (vals[:m] - vals[m:]) / beta
    return GradientEstimate(coeff @ us / m, 2 * m)


def _run(
    algo: _Algorithm,
    obj: FiniteSumObjective,
    hp: HyperParams,
    x0=None,
    *,
    h_reg: Optional[ProximableRegularizer] = None,
    query_budget: Optional[int] = None,
    record_every: int = 1,
    timing: bool = False,
    callback: Optional[Callback] = None,
    meter: Optional[QueryMeter] = None,
) -> RunTrace:
    hp.check_for(obj.n)
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if query_budget is not None and query_budget < 1:
        raise ValueError("query_budget must be positive")
    meter = meter if meter is not None else QueryMeter()
    mobj = metered(obj, meter)
    rng = np.random.default_rng(hp.seed)
    K, q, eta = hp.K, hp.q, hp.eta
    prox = h_reg is not None
    h = h_reg if h_reg is not None else ZeroRegularizer()

    x = np.zeros(obj.d) if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (obj.d,):
        raise ValueError(f"x0 must have shape ({obj.d},)")

    zeta = int(rng.integers(0, K + 1))
    trace = RunTrace(algorithm=algo.name, output_index=zeta)
    start = time.perf_counter()

    def record(k: int, point: np.ndarray) -> None:
        if prox:
            fval = full_value(obj, point) + h.value(point)
            g = generalized_gradient(obj, point, eta, h) if obj.has_gradient else None
        else:
            fval = full_value(obj, point)
            g = analytic_gradient(obj, point) if obj.has_gradient else None
        gsq = float(g @ g) if g is not None else float("nan")
        wall = (time.perf_counter() - start) * 1e3 if timing else 0.0
        trace.rows.append(TraceRow(k, meter.total_queries, fval, gsq, wall))

    state = OptimizerState(x=x)
    snapshot_offset = -1
    snapshot: Optional[np.ndarray] = None
    record(0, x)
    last_recorded = 0
    k = 0
    for k in range(K + 1):
        if query_budget is not None and meter.total_queries >= query_budget:
            trace.status = "budget"
            break
        is_outer = algo.uses_epochs and k % q == 0
        if is_outer and algo.convex_snapshot:
            if k > 0 and snapshot is not None:
                x = snapshot
                state.x = x
            snapshot_offset = int(rng.integers(0, q))
            snapshot = None
        if algo.convex_snapshot and k % q == snapshot_offset:
            snapshot = x
        if k == zeta:
            trace.x_output = x.copy()
        state.k = k
        state.is_outer = is_outer
        if is_outer:
            with meter.phase("outer"):
                est = algo.outer(mobj, rng, hp, state)
            trace.outer_steps += 1
        else:
            with meter.phase("inner"):
                est = algo.inner(mobj, rng, hp, state)
            trace.inner_steps += 1
        v = est.vector
        state.v = v
        if callback is not None:
            callback(state)
        if prox:
            x_new = h.prox(x - eta * v, eta)
        else:
            x_new = x - eta * v
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(x_new))):
            trace.status = "nonfinite"
            trace.message = f"non-finite estimate or iterate at k={k}"
            break
        state.x_prev = x
        x = x_new
        state.x = x
        if (k + 1) % record_every == 0 or k == K:
            record(k + 1, x)
            last_recorded = k + 1
    else:
        k = K + 1

    if trace.status != "ok":
        # x is x^k, the last finite iterate
        if last_recorded != k:
            record(k, x)
        if trace.x_output is None:
            trace.output_index = k
            trace.x_output = x.copy()
    trace.x_final = x.copy()
    trace.total_queries = meter.total_queries
    trace.per_phase = meter.per_phase
    return trace


def run_zo_svrg_coord_rand(obj, hp, x0=None, **kw) -> RunTrace:
    """ZO-SVRG-Coord-Rand: coordinate anchors, shared-direction two-point inner steps."""
    return _run(_SvrgCoordRand(), obj, hp, x0, **kw)


def run_zo_svrg_coord(obj, hp, x0=None, **kw) -> RunTrace:
    """ZO-SVRG-Coord: coordinate anchors and coordinate inner corrections."""
    return _run(_SvrgCoord(), obj, hp, x0, **kw)


def run_zo_spider_coord(obj, hp, x0=None, **kw) -> RunTrace:
    """ZO-SPIDER-Coord: coordinate anchors, recursive coordinate inner updates."""
    return _run(_SpiderCoord(), obj, hp, x0, **kw)


def run_prox_zo_spider_coord(obj, h_reg: ProximableRegularizer, hp, x0=None, **kw) -> RunTrace:
    """ZO-SPIDER-Coord with the update replaced by a proximal step.

    Trace rows report ``f + h`` and the squared generalized gradient.
    """
    trace = _run(_SpiderCoord(), obj, hp, x0, h_reg=h_reg, **kw)
    trace.algorithm = "prox-zo-spider-coord"
    return trace


def run_zo_svrg_coord_rand_c(obj, hp, x0=None, **kw) -> RunTrace:
    """Convex variant: each outer step restarts from a uniformly chosen iterate
    of the previous epoch; single-sample inner steps (``hp.s2`` is ignored)."""
    return _run(_SvrgCoordRandC(), obj, hp, x0, **kw)


def run_zo_spider_coord_c(obj, hp, x0=None, **kw) -> RunTrace:
    """Convex SPIDER variant with single-sample coordinate recursion."""
    return _run(_SpiderCoordC(), obj, hp, x0, **kw)


def run_zo_sgd(obj, hp, x0=None, **kw) -> RunTrace:
    """ZO-SGD baseline: minibatch of ``hp.s2`` two-point estimates, one direction per sample."""
    return _run(_ZoSgd(), obj, hp, x0, **kw)


def run_zo_gd(obj, hp, x0=None, **kw) -> RunTrace:
    """ZO-GD baseline: two-point estimate of the full objective along one direction."""
    return _run(_ZoGd(), obj, hp, x0, **kw)


ALGORITHMS = {
    "zo-svrg-coord-rand": run_zo_svrg_coord_rand,
    "zo-svrg-coord": run_zo_svrg_coord,
    "zo-spider-coord": run_zo_spider_coord,
    "prox-zo-spider-coord": run_prox_zo_spider_coord,
    "zo-svrg-coord-rand-c": run_zo_svrg_coord_rand_c,
    "zo-spider-coord-c": run_zo_spider_coord_c,
    "zo-sgd": run_zo_sgd,
    "zo-gd": run_zo_gd,
}


def run_algorithm(name: str, obj, hp, x0=None, h_reg=None, **kw) -> RunTrace:
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    if name == "prox-zo-spider-coord":
        return run_prox_zo_spider_coord(obj, h_reg if h_reg is not None else ZeroRegularizer(), hp, x0, **kw)
    return ALGORITHMS[name](obj, hp, x0, **kw)


def expected_queries(name: str, n: int, d: int, hp: HyperParams) -> int:
    """Closed-form query count of a full run (``k = 0..K``, no budget)."""
    iters = hp.K + 1
    if name == "zo-sgd":
        return iters * 2 * hp.s2
    if name == "zo-gd":
        return iters * 2 * n
    outer = -(-iters // hp.q)
    inner = iters - outer
    s1 = min(hp.s1, n)
    inner_cost = {
        "zo-svrg-coord-rand": 4 * hp.s2,
        "zo-svrg-coord": 4 * d * hp.s2,
        "zo-spider-coord": 4 * d * hp.s2,
        "prox-zo-spider-coord": 4 * d * hp.s2,
        "zo-svrg-coord-rand-c": 4,
        "zo-spider-coord-c": 4 * d,
    }[name]
    return outer * 2 * d * s1 + inner * inner_cost
