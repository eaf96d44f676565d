"""Zeroth-order gradient estimators.

Two primitives:

* coordinate-wise central differences over a sample set ``S``::

      sum_i (f_S(x + delta e_i) - f_S(x - delta e_i)) / (2 delta) e_i

  costing ``2 d |S|`` component evaluations;
* the two-point random estimate ``d (f_a(x + beta u) - f_a(x)) / beta * u``
  with ``u`` uniform on the unit sphere, costing 2 evaluations.

The variance-reduced inner-loop estimators are built from these.  Every
function returns a :class:`GradientEstimate` whose ``queries_used`` is the
exact number of ``f_i`` evaluations performed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .objectives import FiniteSumObjective

__all__ = [
    "GradientEstimate",
    "SmoothingParams",
    "SmoothingClampWarning",
    "smoothing_floor",
    "coord_estimate",
    "rand_two_point_estimate",
    "sample_unit_sphere",
    "svrg_rand_inner",
    "svrg_coord_inner",
    "spider_coord_step",
]

_FLOOR_FACTOR = 1e3 * np.finfo(np.float64).eps


class SmoothingClampWarning(RuntimeWarning):
    """A smoothing radius was raised to the floating-point floor."""


@dataclass(frozen=True)
class GradientEstimate:
    vector: np.ndarray
    queries_used: int


@dataclass(frozen=True)
class SmoothingParams:
    """``beta``: two-point radius; ``delta``: coordinate half-step."""

    beta: float
    delta: float

    def __post_init__(self):
        if not (self.beta > 0 and self.delta > 0):
            raise ValueError(f"smoothing radii must be positive, got beta={self.beta}, delta={self.delta}")


def smoothing_floor(x: np.ndarray) -> float:
    return float(_FLOOR_FACTOR * (1.0 + np.max(np.abs(x), initial=0.0)))


def _checked_radius(name: str, value: float, *points: np.ndarray) -> float:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    floor = max(smoothing_floor(p) for p in points)
    if value < floor:
        warnings.warn(f"{name}={value:.3g} below floor {floor:.3g}; clamped", SmoothingClampWarning, stacklevel=3)
        return floor
    return float(value)


def _vec(x, d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (d,):
        raise ValueError(f"expected a vector of shape ({d},), got {arr.shape}")
    return arr


def _coord_vector(obj: FiniteSumObjective, idx: np.ndarray, x: np.ndarray, delta: float) -> np.ndarray:
    d = obj.d
    shifts = delta * np.eye(d)
    points = np.concatenate([x + shifts, x - shifts])
    values = obj.eval_batch(idx, points).mean(axis=1)
    return (values[:d] - values[d:]) / (2.0 * delta)


def coord_estimate(obj: FiniteSumObjective, sample_set, x, delta: float) -> GradientEstimate:
    """Coordinate-wise central-difference estimate of ``grad f_S(x)``.

    ``sample_set`` may contain repeats; ``f_S`` is the average over the
    multiset.
    """
    idx = np.asarray(sample_set, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise ValueError("sample set must be nonempty")
    x = _vec(x, obj.d)
    delta = _checked_radius("delta", delta, x)
    return GradientEstimate(_coord_vector(obj, idx, x, delta), 2 * obj.d * idx.size)


def rand_two_point_estimate(obj: FiniteSumObjective, sample_index: int, x, u, beta: float) -> GradientEstimate:
    """``d (f_a(x + beta u) - f_a(x)) / beta * u`` for a unit vector ``u``."""
    d = obj.d
    x = _vec(x, d)
    u = _vec(u, d)
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("u must be a unit vector")
    beta = _checked_radius("beta", beta, x)
    vals = obj.eval_paired([sample_index, sample_index], np.stack([x + beta * u, x]))
    return GradientEstimate(d * (vals[0] - vals[1]) / beta * u, 2)


def sample_unit_sphere(rng: np.random.Generator, d: int, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the unit sphere in ``R^d`` via normalized Gaussians.

    Returns shape ``(d,)`` when ``size`` is None, else ``(size, d)``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    shape = (d,) if size is None else (size, d)
    while True:
        g = rng.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.all(norms > 0):
            return g / norms


def svrg_rand_inner(obj: FiniteSumObjective, batch, us, x_k, x_anchor, anchor_grad, beta: float) -> GradientEstimate:
    """Inner-loop estimate of ZO-SVRG-Coord-Rand.

    For each ``j`` the same direction ``u_j`` is used at ``x_k`` and at the
    anchor, so the two random estimates share their noise::

        v = mean_j [g_rand(f_{a_j}, x_k; u_j) - g_rand(f_{a_j}, x_anchor; u_j)] + anchor_grad
    """
    d = obj.d
    idx = np.asarray(batch, dtype=np.intp).reshape(-1)
    us = np.asarray(us, dtype=np.float64).reshape(-1, d) if np.size(us) else np.zeros((0, d))
    if idx.size != us.shape[0]:
        raise ValueError(f"batch has {idx.size} samples but {us.shape[0]} directions were given")
    if idx.size == 0:
        raise ValueError("batch must be nonempty")
    if np.any(np.abs(np.linalg.norm(us, axis=1) - 1.0) > 1e-12):
        raise ValueError("directions must be unit vectors")
    x_k = _vec(x_k, d)
    x_anchor = _vec(x_anchor, d)
    anchor_grad = _vec(anchor_grad, d)
    beta = _checked_radius("beta", beta, x_k, x_anchor)
    m = idx.size
    points = np.concatenate([x_k + beta * us, np.broadcast_to(x_k, (m, d)), x_anchor + beta * us, np.broadcast_to(x_anchor, (m, d))])
    vals = obj.eval_paired(np.tile(idx, 4), points).reshape(4, m)
    coeff = d * ((vals[0] - vals[1]) - (vals[2] - vals[3])) / beta
    return GradientEstimate((coeff @ us) / m + anchor_grad, 4 * m)


def svrg_coord_inner(obj: FiniteSumObjective, batch, x_k, x_anchor, anchor_grad, delta: float) -> GradientEstimate:
    """Inner-loop estimate of ZO-SVRG-Coord::

        v = g_coord(f_batch, x_k) - g_coord(f_batch, x_anchor) + anchor_grad
    """
    idx = np.asarray(batch, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise ValueError("batch must be nonempty")
    d = obj.d
    x_k = _vec(x_k, d)
    x_anchor = _vec(x_anchor, d)
    anchor_grad = _vec(anchor_grad, d)
    delta = _checked_radius("delta", delta, x_k, x_anchor)
    diff = _coord_vector(obj, idx, x_k, delta) - _coord_vector(obj, idx, x_anchor, delta)
    return GradientEstimate(diff + anchor_grad, 4 * d * idx.size)


def spider_coord_step(obj: FiniteSumObjective, batch, x_k, x_prev, v_prev, delta: float) -> GradientEstimate:
    """Recursive SPIDER update with coordinate estimates::

        v_k = g_coord(f_batch, x_k) - g_coord(f_batch, x_prev) + v_prev
    """
    idx = np.asarray(batch, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise ValueError("batch must be nonempty")
    d = obj.d
    x_k = _vec(x_k, d)
    x_prev = _vec(x_prev, d)
    v_prev = _vec(v_prev, d)
    if not np.all(np.isfinite(v_prev)):
        raise ValueError("v_prev must be finite")
    delta = _checked_radius("delta", delta, x_k, x_prev)
    diff = _coord_vector(obj, idx, x_k, delta) - _coord_vector(obj, idx, x_prev, delta)
    return GradientEstimate(diff + v_prev, 4 * d * idx.size)
