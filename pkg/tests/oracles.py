"""Independent reference computations used to derive expected test values.

Nothing here imports the estimators or optimizers; the references read raw
arrays and replay the documented RNG order themselves.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def logreg_component(w, x, y, alpha) -> float:
    """Scalar-loop evaluation of one logistic component with the bounded regularizer."""
    margin = y * sum(wi * xi for wi, xi in zip(w, x))
    loss = math.log1p(math.exp(-margin)) if margin > -30 else -margin + math.log1p(math.exp(margin))
    return loss + alpha * sum(wi * wi / (1.0 + wi * wi) for wi in w)


def central_difference(fun, x, h=1e-6):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def ceil_root_bruteforce(value: int, k: int) -> int:
    m = 0
    while m**k < value:
        m += 1
    return m


def lemma1_exact(L, d, s2, beta, delta, dist_sq, sigma2=0, s1=1, indicator=0):
    """Term-by-term rational arithmetic."""
    L, beta, delta, dist_sq, sigma2 = map(Fraction, (L, beta, delta, dist_sq, sigma2))
    outer = Fraction(18 * indicator, s1) * (2 * L**2 * d * delta**2 + sigma2)
    return (
        6 * d * L**2 * dist_sq / s2
        + 3 * L**2 * beta**2 * d**2 / s2
        + outer
        + 6 * L**2 * d * delta**2
        + Fraction(3, 2) * beta**2 * L**2 * d**2
    )


def lemma2_exact(L, d, s2, delta, dist_sq, sigma2=0, s1=1, indicator=0):
    L, delta, dist_sq, sigma2 = map(Fraction, (L, delta, dist_sq, sigma2))
    return 12 * L**2 * d * delta**2 / s2 + 6 * L**2 * dist_sq / s2 + Fraction(6 * indicator, s1) * (2 * L**2 * d * delta**2 + sigma2)


def lemma3_exact(eta, L, s2, sum_v_sq, k_minus_anchor, d, delta, sigma2=0, s1=1, indicator=0):
    eta, L, sum_v_sq, delta, sigma2 = map(Fraction, (eta, L, sum_v_sq, delta, sigma2))
    return (
        3 * eta**2 * L**2 / s2 * sum_v_sq
        + k_minus_anchor * 6 * L**2 * d * delta**2 / s2
        + Fraction(3 * indicator, s1) * (2 * L**2 * d * delta**2 + sigma2)
    )


def schedule_queries(kind: str, n, d, K, q, s1, s2) -> int:
    """Walk the loop k = 0..K and add the cost of each step."""
    total = 0
    for k in range(K + 1):
        if kind in ("zo-sgd",):
            total += 2 * s2
        elif kind == "zo-gd":
            total += 2 * n
        elif k % q == 0:
            total += 2 * d * s1
        elif kind == "zo-svrg-coord-rand":
            total += 4 * s2
        elif kind in ("zo-svrg-coord", "zo-spider-coord"):
            total += 4 * d * s2
        elif kind == "zo-svrg-coord-rand-c":
            total += 4
        elif kind == "zo-spider-coord-c":
            total += 4 * d
        else:
            raise ValueError(kind)
    return total


def first_order_reference(kind: str, mats, vecs, x0, eta, q, K, s1, s2, seed):
    """Exact-gradient SVRG (``kind='svrg'``) or SPIDER (``kind='spider'``) on
    ``f_i(x) = x^T A_i x / 2 - b_i^T x``, replaying the optimizer RNG order:
    output index first, then ``S1`` (only when ``s1 < n``), then inner batches."""
    n = mats.shape[0]
    rng = np.random.default_rng(seed)
    rng.integers(0, K + 1)

    def grad(idx, x):
        return np.mean([mats[i] @ x - vecs[i] for i in idx], axis=0)

    x = np.array(x0, dtype=np.float64)
    iterates = [x.copy()]
    anchor = anchor_grad = v = x_prev = None
    for k in range(K + 1):
        if k % q == 0:
            idx = np.arange(n) if s1 >= n else np.sort(rng.choice(n, size=s1, replace=False))
            v = grad(idx, x)
            anchor, anchor_grad = x.copy(), v
        else:
            batch = rng.integers(0, n, size=s2)
            if kind == "svrg":
                v = grad(batch, x) - grad(batch, anchor) + anchor_grad
            else:
                v = grad(batch, x) - grad(batch, x_prev) + v
        x_prev = x
        x = x - eta * v
        iterates.append(x.copy())
    return np.array(iterates)
