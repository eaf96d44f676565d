"""Hyperparameter bundles and the closed-form selectors from the convergence results."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .estimators import SmoothingParams

__all__ = ["HyperParams", "select_params", "baseline_params", "SELECTORS", "ceil_root", "ceil_rational_power"]


@dataclass(frozen=True)
class HyperParams:
    """Stepsize ``eta``, epoch length ``q``, last iteration index ``K``
    (iterations run for ``k = 0..K``), batch sizes ``s1``/``s2``, smoothing
    radii and RNG seed."""

    eta: float
    q: int
    K: int
    s1: int
    s2: int
    smoothing: SmoothingParams
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        for name in ("q", "K", "s1", "s2"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.q > self.K:
            raise ValueError(f"q={self.q} exceeds K={self.K}")

    def check_for(self, n: int) -> None:
        if self.s1 > n:
            raise ValueError(f"s1={self.s1} exceeds n={n}")

    @property
    def beta(self) -> float:
        return self.smoothing.beta

    @property
    def delta(self) -> float:
        return self.smoothing.delta

    def with_(self, **changes) -> "HyperParams":
        if "beta" in changes or "delta" in changes:
            changes["smoothing"] = SmoothingParams(
                changes.pop("beta", self.smoothing.beta), changes.pop("delta", self.smoothing.delta)
            )
        return replace(self, **changes)


def ceil_root(value: int, k: int) -> int:
    """Smallest integer ``m >= 0`` with ``m**k >= value`` (exact integer arithmetic)."""
    if value <= 0:
        return 0
    m = max(int(round(value ** (1.0 / k))), 0)
    while m**k < value:
        m += 1
    while m > 0 and (m - 1) ** k >= value:
        m -= 1
    return m


def ceil_rational_power(num: int, den: int, p: int, r: int) -> int:
    """Smallest integer ``m`` with ``m >= (num/den)**(p/r)``, i.e. ``m**r * den**p >= num**p``."""
    target_num = num**p
    target_den = den**p
    m = max(int(math.floor((num / den) ** (p / r))) - 1, 0)
    while m**r * target_den < target_num:
        m += 1
    return m


def _cor1(n, d, K, L):
    s1 = min(n, K)
    q = ceil_root(s1, 3)
    return dict(eta=1 / (20 * L), s1=s1, q=q, s2=d * q * q, beta=1 / (L * d * math.sqrt(K)), delta=1 / (L * math.sqrt(d * K)))


def _cor2(n, d, K, L):
    s1 = min(n, ceil_rational_power(K, d, 3, 5))
    q = s1 * d
    cbrt_s1 = s1 ** (1 / 3)
    return dict(
        eta=1 / (20 * d ** (1 / 3) * q ** (2 / 3) * L),
        s1=s1,
        q=q,
        s2=1,
        beta=cbrt_s1 / (L * math.sqrt(d * K)),
        delta=cbrt_s1 / (L * math.sqrt(K)),
    )


def _cor3(n, d, K, L):
    s1 = min(n, K)
    q = ceil_root(s1, 2)
    delta = 1 / (math.sqrt(K * d) * L)
    return dict(eta=1 / (4 * L), s1=s1, q=q, s2=q, beta=delta, delta=delta)


def _cor4(n, d, K, L):
    q = min(n, ceil_root(K * K, 3))
    delta = 1 / (math.sqrt(q * K * d) * L)
    return dict(eta=1 / (4 * L * math.sqrt(q)), s1=q, q=q, s2=1, beta=delta, delta=delta)


def _theorem2(n, d, K, L):
    s1 = min(n, K)
    q = ceil_root(s1, 3)
    delta = 1 / (L * math.sqrt(d * K))
    return dict(eta=1 / (15 * L), s1=s1, q=q, s2=q * q, beta=delta, delta=delta)


SELECTORS = {"cor1": _cor1, "cor2": _cor2, "cor3": _cor3, "cor4": _cor4, "theorem2": _theorem2}

SELECTOR_TARGETS = {
    "cor1": "zo-svrg-coord-rand (mini-batch)",
    "cor2": "zo-svrg-coord-rand (single sample)",
    "cor3": "zo-spider-coord (mini-batch)",
    "cor4": "zo-spider-coord (single sample)",
    "theorem2": "zo-svrg-coord",
}


def select_params(corollary: str, n: int, d: int, K: int, L: float, seed: int = 0) -> HyperParams:
    """Parameters prescribed by a convergence result, verbatim.

    ``cor1``/``cor2``: ZO-SVRG-Coord-Rand (mini-batch / single sample);
    ``theorem2``: ZO-SVRG-Coord; ``cor3``/``cor4``: ZO-SPIDER-Coord
    (mini-batch / single sample).  Where a result prescribes no ``beta``,
    ``beta = delta`` (the coordinate-only methods never use it).
    """
    if corollary not in SELECTORS:
        raise ValueError(f"unknown selector {corollary!r}; choose from {sorted(SELECTORS)}")
    if min(n, d, K) < 1 or not L > 0:
        raise ValueError("n, d, K and L must be positive")
    p = SELECTORS[corollary](int(n), int(d), int(K), float(L))
    return HyperParams(
        eta=p["eta"], q=p["q"], K=int(K), s1=p["s1"], s2=p["s2"], smoothing=SmoothingParams(p["beta"], p["delta"]), seed=seed
    )


def baseline_params(d: int, K: int, s2: int = 1, c: float = 0.8, beta: float = 1e-3, seed: int = 0) -> HyperParams:
    """ZO-GD / ZO-SGD parameters with the ``c/d`` stepsize."""
    return HyperParams(eta=c / d, q=1, K=K, s1=1, s2=s2, smoothing=SmoothingParams(beta, beta), seed=seed)
