"""Self-check suites run by ``zovr verify <suite>``.

Each suite returns a list of :class:`CheckResult`; the CLI prints one line per
check and exits nonzero if any failed.  The instances are small and seeded so
that every suite is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .bounds import (
    BoundInputs,
    coord_bias_bound,
    gradient_variance,
    lemma1_bound,
    lemma2_bound,
    mc_spider_variance,
    mc_svrg_coord_variance,
    mc_svrg_rand_variance,
    smoothed_value,
    smoothing_gaps,
)
from .data_io import make_synthetic_logreg_data
from .estimators import (
    SmoothingParams,
    coord_estimate,
    rand_two_point_estimate,
    sample_unit_sphere,
    spider_coord_step,
    svrg_coord_inner,
    svrg_rand_inner,
)
from .experiment import ProblemSpec, build_problem
from .objectives import (
    QueryMeter,
    analytic_gradient,
    full_value,
    make_nonconvex_logreg,
    make_quadratic,
    make_quadratic_sum,
    metered,
)
from .optimizers import run_prox_zo_spider_coord, run_zo_spider_coord
from .params import HyperParams, select_params
from .prox import L1Regularizer, ZeroRegularizer

__all__ = [
    "CheckResult",
    "SUITES",
    "run_suite",
    "small_logreg",
    "random_quadratic",
    "pl_quadratic",
    "benchmark_logreg",
    "fit_log_linear",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


# -- instances -----------------------------------------------------------------


def small_logreg(seed: int = 7, n: int = 6, d: int = 3, alpha: float = 0.1):
    rng = np.random.default_rng(seed)
    return make_nonconvex_logreg(make_synthetic_logreg_data(rng, n, d, separability=1.0), alpha)


def random_quadratic(rng: np.random.Generator, d: int):
    """Single positive-definite quadratic ``x^T A x / 2 - b^T x``."""
    M = rng.standard_normal((d, d))
    return make_quadratic(M @ M.T / d + 0.1 * np.eye(d), rng.standard_normal(d))


def pl_quadratic(seed: int = 0, n: int = 36, d: int = 10, condition: float = 10.0):
    """Finite sum of quadratics whose mean Hessian has eigenvalues
    ``geomspace(1, condition)``; components scale each eigenvalue by a factor
    in ``[0.5, 1.5]`` (zero mean over components)."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.geomspace(1.0, condition, d)
    jitter = rng.uniform(-0.5, 0.5, (n, d))
    jitter -= jitter.mean(axis=0)
    mats = np.einsum("ij,nj,kj->nik", Q, eig * (1.0 + jitter), Q)
    mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
    x_star = rng.standard_normal(d)
    noise = rng.standard_normal((n, d))
    noise -= noise.mean(axis=0)
    return make_quadratic_sum(mats, mats @ x_star + noise)


def benchmark_logreg():
    """The default synthetic benchmark: n=200, d=20, alpha=0.1."""
    return build_problem(ProblemSpec())


def fit_log_linear(values) -> tuple[float, float]:
    """Slope and R^2 of ``log(values)`` against index."""
    y = np.log(np.asarray(values, dtype=np.float64))
    fit = stats.linregress(np.arange(y.size), y)
    return float(fit.slope), float(fit.rvalue**2)


# -- estimators ------------------------------------------------------------------


def _coord_bias(obj, rng, deltas=(1e-2, 1e-3, 1e-4), points=100, spread=2.0):
    L = obj.metadata.smoothness_L
    violations, worst = 0, 0.0
    xs = spread * rng.standard_normal((points, obj.d))
    for delta in deltas:
        bound = coord_bias_bound(L, obj.d, delta)
        for x in xs:
            err = np.sum((coord_estimate(obj, np.arange(obj.n), x, delta).vector - analytic_gradient(obj, x)) ** 2)
            violations += err > bound
            worst = max(worst, err / bound)
    return int(violations), worst


def check_coord_bias() -> list[CheckResult]:
    out = []
    for label, obj, rng in (
        ("logreg n=6 d=3", small_logreg(), np.random.default_rng(11)),
        ("quadratic d=5", random_quadratic(np.random.default_rng(5), 5), np.random.default_rng(12)),
    ):
        bad, worst = _coord_bias(obj, rng)
        out.append(CheckResult(f"coordinate bias bound ({label})", bad == 0, f"{bad} violations in 300, worst ratio {worst:.3g}"))
    return out


def check_sphere_identity(draws: int = 100_000, d: int = 3, tol: float = 0.01) -> CheckResult:
    u = sample_unit_sphere(np.random.default_rng(3), d, draws)
    dev = float(np.max(np.abs(u.T @ u / draws - np.eye(d) / d)))
    return CheckResult("sphere second moment E[uu^T] = I/d", dev <= tol, f"max entry deviation {dev:.2e} (tol {tol})")


def check_two_point_unbiased(draws: int = 20_000) -> CheckResult:
    # on a quadratic the ball-smoothed gradient equals the gradient
    rng = np.random.default_rng(4)
    obj = random_quadratic(rng, 4)
    x = rng.standard_normal(4)
    us = sample_unit_sphere(rng, 4, draws)
    est = np.array([rand_two_point_estimate(obj, 0, x, u, 1e-3).vector for u in us])
    z = (est.mean(axis=0) - analytic_gradient(obj, x)) / (est.std(axis=0, ddof=1) / np.sqrt(draws))
    worst = float(np.max(np.abs(z)))
    return CheckResult("two-point estimate unbiased on a quadratic", worst < 4.0, f"max |z| = {worst:.2f} over {draws} draws")


def check_estimator_queries() -> CheckResult:
    obj = small_logreg()
    d = obj.d
    rng = np.random.default_rng(5)
    x, y, v = rng.standard_normal((3, d))
    batch = np.array([0, 3, 3])
    us = sample_unit_sphere(rng, d, batch.size)
    cases = [
        ("coord", lambda o: coord_estimate(o, batch, x, 1e-3), 2 * d * batch.size),
        ("rand", lambda o: rand_two_point_estimate(o, 1, x, us[0], 1e-3), 2),
        ("svrg-rand", lambda o: svrg_rand_inner(o, batch, us, x, y, v, 1e-3), 4 * batch.size),
        ("svrg-coord", lambda o: svrg_coord_inner(o, batch, x, y, v, 1e-3), 4 * d * batch.size),
        ("spider", lambda o: spider_coord_step(o, batch, x, y, v, 1e-3), 4 * d * batch.size),
    ]
    bad = []
    for label, call, expected in cases:
        meter = QueryMeter()
        est = call(metered(obj, meter))
        if not (meter.total_queries == est.queries_used == expected):
            bad.append(f"{label}: metered {meter.total_queries}, reported {est.queries_used}, expected {expected}")
    return CheckResult("estimator query counts", not bad, "; ".join(bad) or "all five estimators exact")


def check_smoothing_gap(draws: int = 200_000) -> CheckResult:
    rng = np.random.default_rng(6)
    obj = random_quadratic(rng, 3)
    x, beta = rng.standard_normal(3), 0.1
    gap = smoothed_value(obj, x, beta, rng, draws) - full_value(obj, x)
    exact = beta**2 * np.trace(obj.mean_mat) / (2 * (obj.d + 2))
    bound = smoothing_gaps(obj.metadata.smoothness_L, obj.d, beta)[0]
    ok = abs(gap - exact) <= 0.05 * exact and exact <= bound
    return CheckResult("smoothed value gap on a quadratic", bool(ok), f"measured {gap:.4e}, closed form {exact:.4e}, bound {bound:.4e}")


def suite_estimators() -> list[CheckResult]:
    return [*check_coord_bias(), check_sphere_identity(), check_two_point_unbiased(), check_estimator_queries(), check_smoothing_gap()]


# -- lemmas ----------------------------------------------------------------------


def variance_checks(obj, x_k, x_anchor, hp: HyperParams, sigma2: float, seed: int, draws: int = 10_000):
    """Monte-Carlo vs closed form for both SVRG inner estimates at one point."""
    dist_sq = float(np.sum((x_k - x_anchor) ** 2))
    inp = BoundInputs.from_params(hp, obj.metadata.smoothness_L, sigma2, obj.n, obj.d, dist_sq)
    rand = mc_svrg_rand_variance(obj, x_k, x_anchor, hp, np.random.default_rng(seed), draws)
    coord = mc_svrg_coord_variance(obj, x_k, x_anchor, hp, np.random.default_rng(seed + 1), draws)
    return (rand, lemma1_bound(inp)), (coord, lemma2_bound(inp))


def _probe_sigma2(obj, rng, *points):
    return gradient_variance(obj, np.vstack([2.0 * rng.standard_normal((64, obj.d)), *points]))


def suite_lemmas(draws: int = 10_000) -> list[CheckResult]:
    obj = small_logreg()
    rng = np.random.default_rng(21)
    x_k = rng.standard_normal(obj.d)
    x_anchor = x_k + 0.3 * rng.standard_normal(obj.d)
    sigma2 = _probe_sigma2(obj, rng, x_k, x_anchor)
    out = []
    for s1, s2, radius in ((obj.n, 2, 0.01), (3, 1, 0.05)):
        hp = HyperParams(eta=0.1, q=3, K=10, s1=s1, s2=s2, smoothing=SmoothingParams(radius, radius))
        (rand, b1), (coord, b2) = variance_checks(obj, x_k, x_anchor, hp, sigma2, seed=100 + s1, draws=draws)
        tag = f"s1={s1} s2={s2} beta=delta={radius}"
        out.append(CheckResult(f"two-point inner variance bound ({tag})", rand.dominated_by(b1), f"MC {rand.mean:.3e} +- {rand.stderr:.1e} vs bound {b1:.3e}"))
        out.append(CheckResult(f"coordinate inner variance bound ({tag})", coord.dominated_by(b2), f"MC {coord.mean:.3e} +- {coord.stderr:.1e} vs bound {b2:.3e}"))
        out.append(CheckResult(f"coordinate bound tighter than two-point bound ({tag})", b2 < b1, f"{b2:.3e} < {b1:.3e}"))

    small = small_logreg(seed=8, n=4, d=3)
    x0 = np.random.default_rng(22).standard_normal(3)
    hp = HyperParams(eta=0.1, q=4, K=12, s1=2, s2=1, smoothing=SmoothingParams(0.05, 0.05))
    sig = _probe_sigma2(small, np.random.default_rng(23), x0)
    check = mc_spider_variance(small, hp, sig, range(1000), x0)
    bad = check.violations()
    out.append(CheckResult("recursive estimator variance bound (n=4, 1000 runs)", not bad, f"violations at k={bad}" if bad else f"all {hp.K + 1} iterations dominated"))
    return out


# -- PL ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PLFit:
    slope: float
    r2: float
    final_gap: float
    epochs: int
    q: int


def pl_fit(K: int = 600, delta: float = 1e-6, epochs: int = 20, seed: int = 0) -> PLFit:
    """ZO-SPIDER-Coord with the mini-batch selector on :func:`pl_quadratic`;
    fits ``log(f(x^k) - f*)`` over the first ``epochs`` epochs."""
    obj = pl_quadratic(seed)
    hp = select_params("cor3", obj.n, obj.d, K, obj.metadata.smoothness_L).with_(beta=delta, delta=delta)
    trace = run_zo_spider_coord(obj, hp, np.zeros(obj.d))
    gap = trace.f_values - obj.metadata.optimum_value
    slope, r2 = fit_log_linear(gap[: epochs * hp.q + 1])
    return PLFit(slope, r2, float(gap[-1]), epochs, hp.q)


def suite_pl() -> list[CheckResult]:
    fit = pl_fit()
    return [
        CheckResult("linear decay of log optimality gap", fit.slope < 0 and fit.r2 > 0.95, f"slope {fit.slope:.4f} per iteration, R^2 {fit.r2:.4f} over {fit.epochs} epochs (q={fit.q})"),
        CheckResult("final optimality gap below 1e-8", fit.final_gap < 1e-8, f"gap {fit.final_gap:.3e}"),
    ]


# -- prox --------------------------------------------------------------------------


def prox_params(obj, K: int = 300, seed: int = 0) -> HyperParams:
    """Mini-batch SPIDER selector on the benchmark instance."""
    return select_params("cor3", obj.n, obj.d, K, obj.metadata.smoothness_L, seed=seed)


def suite_prox() -> list[CheckResult]:
    obj = benchmark_logreg()
    hp = prox_params(obj)
    plain = run_zo_spider_coord(obj, hp)
    zero = run_prox_zo_spider_coord(obj, ZeroRegularizer(), hp)
    same = plain.rows == zero.rows and np.array_equal(plain.x_output, zero.x_output) and plain.total_queries == zero.total_queries
    l1 = run_prox_zo_spider_coord(obj, L1Regularizer(0.01), hp)
    g0, g_out = l1.rows[0].grad_norm_sq, l1.rows[l1.output_index].grad_norm_sq
    return [
        CheckResult("proximal variant with h = 0 matches the plain run", bool(same), "bit-identical trace and output" if same else "traces differ"),
        CheckResult("l1 proximal run shrinks the generalized gradient", g_out <= 0.1 * g0, f"|G|^2 {g0:.3e} -> {g_out:.3e} at the output iterate"),
    ]


SUITES: dict[str, Callable[[], list[CheckResult]]] = {
    "estimators": suite_estimators,
    "lemmas": suite_lemmas,
    "pl": suite_pl,
    "prox": suite_prox,
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
