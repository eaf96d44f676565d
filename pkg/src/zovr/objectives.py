"""Black-box finite-sum objectives and query metering.

An objective exposes ``n`` component functions ``f_i: R^d -> R`` and the
full objective ``f = (1/n) sum_i f_i``.  Optimizers only ever see the
evaluation methods (``eval_component``, ``eval_batch``, ``eval_paired``);
values and gradients used for reporting go through :func:`full_value` and
:func:`analytic_gradient`, which are never metered.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "GradientUnavailableError",
    "ObjectiveMetadata",
    "QueryMeter",
    "FiniteSumObjective",
    "LogisticRegressionObjective",
    "QuadraticSumObjective",
    "BlackBoxObjective",
    "MeteredObjective",
    "make_nonconvex_logreg",
    "make_logreg_from_arrays",
    "make_quadratic",
    "make_quadratic_sum",
    "make_constant",
    "metered",
    "analytic_gradient",
    "full_value",
]


class GradientUnavailableError(RuntimeError):
    """Raised when a reporting gradient is requested from a pure black box."""


@dataclass(frozen=True)
class ObjectiveMetadata:
    """Known problem constants.  ``None`` means unknown."""

    smoothness_L: Optional[float] = None
    variance_sigma2: Optional[float] = None
    pl_gamma: Optional[float] = None
    optimum_value: Optional[float] = None


class QueryMeter:
    """Thread-safe count of component-function evaluations.

    Every single ``f_i(x)`` evaluation adds exactly one.  Counts are also
    attributed to the currently active phase label (see :meth:`phase`).
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total = 0
        self._per_phase: dict[str, int] = {}
        self._phase: Optional[str] = None

    @property
    def total_queries(self) -> int:
        return self._total

    @property
    def per_phase(self) -> dict[str, int]:
        with self._lock:
            return dict(self._per_phase)

    def add(self, count: int) -> None:
        if count < 0:
            raise ValueError("query count increments must be nonnegative")
        with self._lock:
            self._total += count
            if self._phase is not None:
                self._per_phase[self._phase] = self._per_phase.get(self._phase, 0) + count

    @contextmanager
    def phase(self, label: str) -> Iterator[None]:
        previous = self._phase
        self._phase = label
        try:
            yield
        finally:
            self._phase = previous

    def __repr__(self) -> str:
        return f"QueryMeter(total_queries={self._total}, per_phase={self._per_phase})"


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


class FiniteSumObjective:
    """Base class for ``f(x) = (1/n) sum_i f_i(x)``.

    Subclasses implement ``_eval_batch`` (cross product of points and
    components) and may override ``_eval_paired`` and ``_gradient``.
    """

    n: int
    d: int
    metadata: ObjectiveMetadata

    def __init__(self, n: int, d: int, metadata: Optional[ObjectiveMetadata] = None):
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        self.n = int(n)
        self.d = int(d)
        self.metadata = metadata if metadata is not None else ObjectiveMetadata()

    # -- evaluation (what optimizers may call) ---------------------------

    def _check_indices(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.intp).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError(f"component index out of range [0, {self.n})")
        return idx

    def _check_points(self, points) -> np.ndarray:
        pts = _as_points(points)
        if pts.shape[1] != self.d:
            raise ValueError(f"points have dimension {pts.shape[1]}, objective has d={self.d}")
        return pts

    def eval_component(self, i: int, x) -> float:
        """Value of ``f_i`` at ``x``."""
        return float(self.eval_batch([i], x)[0, 0])

    def eval_batch(self, indices, points) -> np.ndarray:
        """Values ``out[p, j] = f_{indices[j]}(points[p])``, shape ``(P, m)``."""
        return self._eval_batch(self._check_indices(indices), self._check_points(points))

    def eval_paired(self, indices, points) -> np.ndarray:
        """Values ``out[j] = f_{indices[j]}(points[j])``, shape ``(m,)``."""
        idx = self._check_indices(indices)
        pts = self._check_points(points)
        if pts.shape[0] != idx.size:
            raise ValueError("eval_paired needs one point per index")
        return self._eval_paired(idx, pts)

    def _eval_batch(self, idx: np.ndarray, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval_paired(self, idx: np.ndarray, pts: np.ndarray) -> np.ndarray:
        return np.array([self._eval_batch(idx[j : j + 1], pts[j : j + 1])[0, 0] for j in range(idx.size)])

    # -- reporting (never metered, never given to optimizers) ------------

    def _full_value(self, x: np.ndarray) -> float:
        return float(np.mean(self._eval_batch(np.arange(self.n), x[None, :])))

    def _gradient(self, x: np.ndarray) -> np.ndarray:
        raise GradientUnavailableError(f"{type(self).__name__} has no analytic gradient")

    @property
    def has_gradient(self) -> bool:
        return False


class LogisticRegressionObjective(FiniteSumObjective):
    """``f_i(w) = log(1 + exp(-y_i w.x_i)) + alpha * sum_j w_j^2 / (1 + w_j^2)``."""

    def __init__(self, features: np.ndarray, labels: np.ndarray, alpha: float = 0.1):
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValueError("features must be a nonempty (n, d) array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must have one entry per sample")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be in {-1, +1}")
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.features = features
        self.labels = labels
        self.alpha = float(alpha)
        # logistic loss curvature <= |x_i|^2 / 4; regularizer curvature <= 2 alpha
        L = 0.25 * float(np.max(np.sum(features**2, axis=1))) + 2.0 * self.alpha
        super().__init__(features.shape[0], features.shape[1], ObjectiveMetadata(smoothness_L=L))

    def _regularizer(self, pts: np.ndarray) -> np.ndarray:
        sq = pts * pts
        return self.alpha * np.sum(sq / (1.0 + sq), axis=1)

    def _eval_batch(self, idx, pts):
        margins = (pts @ self.features[idx].T) * self.labels[idx]
        return np.logaddexp(0.0, -margins) + self._regularizer(pts)[:, None]

    def _eval_paired(self, idx, pts):
        margins = np.einsum("jk,jk->j", pts, self.features[idx]) * self.labels[idx]
        return np.logaddexp(0.0, -margins) + self._regularizer(pts)

    def _full_value(self, x):
        margins = (self.features @ x) * self.labels
        return float(np.mean(np.logaddexp(0.0, -margins)) + self._regularizer(x[None, :])[0])

    def _gradient(self, x):
        margins = (self.features @ x) * self.labels
        # d/dm log(1 + e^{-m}) = -sigmoid(-m)
        weights = -self.labels * _sigmoid(-margins)
        loss_grad = self.features.T @ weights / self.n
        return loss_grad + self.alpha * 2.0 * x / (1.0 + x * x) ** 2

    def component_gradients(self, x) -> np.ndarray:
        """All ``grad f_i(x)`` stacked as an ``(n, d)`` array."""
        x = np.asarray(x, dtype=np.float64)
        margins = (self.features @ x) * self.labels
        weights = -self.labels * _sigmoid(-margins)
        return weights[:, None] * self.features + self.alpha * 2.0 * x / (1.0 + x * x) ** 2

    @property
    def has_gradient(self) -> bool:
        return True


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class QuadraticSumObjective(FiniteSumObjective):
    """``f_i(x) = x^T A_i x / 2 - b_i^T x + c_i`` with symmetric ``A_i``."""

    def __init__(self, mats, vecs, consts=None, metadata: Optional[ObjectiveMetadata] = None):
        mats = np.asarray(mats, dtype=np.float64)
        vecs = np.asarray(vecs, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError("mats must have shape (n, d, d)")
        if vecs.shape != mats.shape[:2]:
            raise ValueError("vecs must have shape (n, d)")
        if not np.allclose(mats, np.swapaxes(mats, 1, 2), rtol=0.0, atol=1e-12):
            raise ValueError("quadratic matrices must be symmetric")
        self.mats = mats
        self.vecs = vecs
        self.consts = np.zeros(mats.shape[0]) if consts is None else np.asarray(consts, dtype=np.float64)
        self.mean_mat = mats.mean(axis=0)
        self.mean_vec = vecs.mean(axis=0)
        super().__init__(mats.shape[0], mats.shape[1], metadata)

    def _eval_batch(self, idx, pts):
        A = self.mats[idx]
        quad = 0.5 * np.einsum("pj,mjk,pk->pm", pts, A, pts)
        return quad - pts @ self.vecs[idx].T + self.consts[idx]

    def _eval_paired(self, idx, pts):
        quad = 0.5 * np.einsum("mj,mjk,mk->m", pts, self.mats[idx], pts)
        return quad - np.einsum("mj,mj->m", pts, self.vecs[idx]) + self.consts[idx]

    def _full_value(self, x):
        return float(0.5 * x @ self.mean_mat @ x - self.mean_vec @ x + self.consts.mean())

    def _gradient(self, x):
        return self.mean_mat @ x - self.mean_vec

    def component_gradient(self, i: int, x) -> np.ndarray:
        return self.mats[i] @ np.asarray(x, dtype=np.float64) - self.vecs[i]

    def component_gradients(self, x) -> np.ndarray:
        """All ``grad f_i(x)`` stacked as an ``(n, d)`` array."""
        return self.mats @ np.asarray(x, dtype=np.float64) - self.vecs

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.mean_mat, self.mean_vec)

    @property
    def has_gradient(self) -> bool:
        return True


class BlackBoxObjective(FiniteSumObjective):
    """Finite sum over arbitrary Python callables ``f_i(x) -> float``.

    ``gradient``, if given, is the gradient of the full objective and is used
    for reporting only.
    """

    def __init__(
        self,
        components: Sequence[Callable[[np.ndarray], float]],
        d: int,
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        metadata: Optional[ObjectiveMetadata] = None,
    ):
        self.components = list(components)
        self._grad_fn = gradient
        super().__init__(len(self.components), d, metadata)

    def _eval_batch(self, idx, pts):
        out = np.empty((pts.shape[0], idx.size))
        for p in range(pts.shape[0]):
            for j, i in enumerate(idx):
                out[p, j] = float(self.components[i](pts[p].copy()))
        return out

    def _gradient(self, x):
        if self._grad_fn is None:
            return super()._gradient(x)
        return np.asarray(self._grad_fn(x), dtype=np.float64)

    @property
    def has_gradient(self) -> bool:
        return self._grad_fn is not None


class MeteredObjective(FiniteSumObjective):
    """Pass-through wrapper that counts every component evaluation."""

    def __init__(self, inner: FiniteSumObjective, meter: Optional[QueryMeter] = None):
        self.inner = inner
        self.meter = meter if meter is not None else QueryMeter()
        super().__init__(inner.n, inner.d, inner.metadata)

    def _eval_batch(self, idx, pts):
        values = self.inner._eval_batch(idx, pts)
        self.meter.add(pts.shape[0] * idx.size)
        return values

    def _eval_paired(self, idx, pts):
        values = self.inner._eval_paired(idx, pts)
        self.meter.add(idx.size)
        return values

    def _full_value(self, x):
        return self.inner._full_value(x)

    def _gradient(self, x):
        return self.inner._gradient(x)

    @property
    def has_gradient(self) -> bool:
        return self.inner.has_gradient


def metered(obj: FiniteSumObjective, meter: Optional[QueryMeter] = None) -> MeteredObjective:
    """Wrap ``obj`` so that each ``f_i`` evaluation increments ``meter`` by one."""
    return MeteredObjective(obj, meter)


def analytic_gradient(obj: FiniteSumObjective, x) -> np.ndarray:
    """Exact ``grad f(x)`` for reporting.  Never touches the query meter."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (obj.d,):
        raise ValueError(f"x must have shape ({obj.d},)")
    return obj._gradient(x)


def full_value(obj: FiniteSumObjective, x) -> float:
    """Exact ``f(x)`` for reporting.  Never touches the query meter."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (obj.d,):
        raise ValueError(f"x must have shape ({obj.d},)")
    return obj._full_value(x)


# -- constructors ---------------------------------------------------------


def make_logreg_from_arrays(features, labels, alpha: float = 0.1) -> LogisticRegressionObjective:
    return LogisticRegressionObjective(features, labels, alpha)


def make_nonconvex_logreg(records, alpha: float = 0.1, d: Optional[int] = None, normalize: bool = True):
    """Logistic regression with the bounded nonconvex penalty ``w^2/(1+w^2)``.

    ``records`` is a list of :class:`zovr.data_io.DatasetRecord`.  With
    ``normalize`` every feature column is divided by its max absolute value,
    so features lie in ``[-1, 1]``.
    """
    from .data_io import records_to_arrays

    features, labels = records_to_arrays(records, d=d, normalize=normalize)
    return LogisticRegressionObjective(features, labels, alpha)


def make_quadratic_sum(mats, vecs, consts=None) -> QuadraticSumObjective:
    """Finite sum of quadratics.  Metadata uses the worst component for ``L``
    and the mean Hessian for ``gamma`` and ``f(x*)``."""
    obj = QuadraticSumObjective(mats, vecs, consts)
    eig_components = np.linalg.eigvalsh(obj.mats)
    if eig_components.min() < -1e-10 * max(1.0, abs(eig_components).max()):
        raise ValueError("quadratic matrices must be positive semidefinite")
    L = float(np.max(np.abs(eig_components)))
    eig_mean = np.linalg.eigvalsh(obj.mean_mat)
    gamma = None
    optimum = None
    if eig_mean[0] > 1e-12 * max(1.0, eig_mean[-1]):
        gamma = 1.0 / (2.0 * float(eig_mean[0]))
        optimum = obj._full_value(obj.minimizer())
    elif not np.any(obj.mean_vec):
        optimum = float(obj.consts.mean())
    obj.metadata = ObjectiveMetadata(smoothness_L=L if L > 0 else None, pl_gamma=gamma, optimum_value=optimum)
    return obj


def make_quadratic(A, b) -> QuadraticSumObjective:
    """Single-component quadratic ``f(x) = x^T A x / 2 - b^T x`` (n = 1)."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise ValueError("A must be (d, d) and b must be (d,)")
    return make_quadratic_sum(A[None], b[None])


def make_constant(n: int, d: int, value: float = 1.0) -> QuadraticSumObjective:
    """Constant objective: every component returns ``value``."""
    obj = QuadraticSumObjective(np.zeros((n, d, d)), np.zeros((n, d)), np.full(n, float(value)))
    obj.metadata = ObjectiveMetadata(optimum_value=float(value))
    return obj
