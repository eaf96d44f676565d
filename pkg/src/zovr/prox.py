"""Proximal maps for composite objectives ``f + h``."""

from __future__ import annotations

import numpy as np

from .objectives import FiniteSumObjective, analytic_gradient

__all__ = ["ProximableRegularizer", "ZeroRegularizer", "L1Regularizer", "prox_map", "generalized_gradient"]


def prox_map(z, eta_times_lambda: float, kind: str = "l1") -> np.ndarray:
    """Closed-form proximal map.

    ``l1`` is soft thresholding ``sign(z) * max(|z| - eta*lambda, 0)``;
    ``zero`` is the identity.
    """
    if eta_times_lambda < 0:
        raise ValueError("eta_times_lambda must be nonnegative")
    z = np.asarray(z, dtype=np.float64)
    if kind == "zero":
        return z.copy()
    if kind == "l1":
        return np.sign(z) * np.maximum(np.abs(z) - eta_times_lambda, 0.0)
    raise ValueError(f"unknown proximal kind {kind!r}")


class ProximableRegularizer:
    """Convex ``h`` with a closed-form ``argmin_z h(z) + |z - y|^2 / (2 eta)``."""

    kind = "zero"
    lam = 0.0

    def value(self, x) -> float:
        return 0.0

    def prox(self, y, eta: float) -> np.ndarray:
        return prox_map(y, eta * self.lam, self.kind)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.lam == 0.0


class ZeroRegularizer(ProximableRegularizer):
    def __repr__(self):
        return "ZeroRegularizer()"


class L1Regularizer(ProximableRegularizer):
    kind = "l1"

    def __init__(self, lam: float):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.lam = float(lam)

    def value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(x)))

    def __repr__(self):
        return f"L1Regularizer(lam={self.lam})"


def generalized_gradient(obj: FiniteSumObjective, x, eta: float, h_reg: ProximableRegularizer) -> np.ndarray:
    """``(x - x_plus) / eta`` with ``x_plus = prox_{eta h}(x - eta grad f(x))``.

    Uses the reporting gradient, so no queries are spent.  For ``h = 0`` the
    true gradient is returned as is.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = analytic_gradient(obj, x)
    if h_reg.is_zero:
        return grad
    x_plus = h_reg.prox(x - eta * grad, eta)
    return (x - x_plus) / eta
