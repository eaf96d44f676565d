"""Config-driven benchmark runs: every (algorithm, seed) pair, trace files and a summary table.

Config files are YAML.  Schema (all keys except ``algorithms`` and ``seeds``
are optional)::

    problem:
      kind: synthetic            # or "libsvm"
      path: data/german.libsvm   # libsvm only; relative to the config file
      n: 200                     # synthetic only
      d: 20
      separability: 2.0
      scale: 0.5
      correlation: 0.0
      data_seed: 12345
      alpha: 0.1
      normalize: true
      l1_lambda: 0.01            # turns on the proximal variant's regularizer
    defaults:                    # shared by every algorithm unless overridden
      eta: 0.8                   # or eta_over_d: 0.8 for eta = 0.8 / d
      q: 7
      K: 10000000
      s1: null                   # null means n
      s2: 32
      beta: 1.0e-4
      delta: 1.0e-4
    algorithms:
      - name: zo-spider-coord
      - name: zo-sgd
        eta_over_d: 0.8
      - name: zo-spider-coord
        label: spider-cor3
        selector: cor3           # parameters from a convergence result
        K: 2000
    seeds: [0, 1, 2]
    query_budget: 2000000
    record_every: 1
    target: {kind: grad_norm_sq, value: 1.0e-4}   # or {kind: half_gap}
    output_dir: runs/benchmark   # ZOVR_OUTPUT_DIR overrides
    workers: 1
    timing: false
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .data_io import load_libsvm, make_synthetic_logreg_data, write_trace
from .estimators import SmoothingParams
from .objectives import LogisticRegressionObjective, make_nonconvex_logreg
from .optimizers import ALGORITHMS, RunTrace, run_algorithm
from .params import SELECTORS, HyperParams, select_params
from .prox import L1Regularizer, ZeroRegularizer

__all__ = [
    "ConfigError",
    "ProblemSpec",
    "AlgorithmSpec",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "build_problem",
    "run_experiment",
    "summarize",
    "AlgorithmSummary",
    "ExperimentResult",
    "OUTPUT_DIR_ENV",
]

OUTPUT_DIR_ENV = "ZOVR_OUTPUT_DIR"

_HP_KEYS = ("eta", "eta_over_d", "q", "K", "s1", "s2", "beta", "delta")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "synthetic"
    path: Optional[str] = None
    n: int = 200
    d: int = 20
    separability: float = 2.0
    scale: float = 0.5
    correlation: float = 0.0
    data_seed: int = 12345
    alpha: float = 0.1
    normalize: bool = True
    l1_lambda: Optional[float] = None


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    label: str
    params: dict = field(default_factory=dict)
    selector: Optional[str] = None


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    algorithms: tuple[AlgorithmSpec, ...]
    seeds: tuple[int, ...]
    defaults: dict = field(default_factory=dict)
    query_budget: Optional[int] = None
    record_every: int = 1
    target_kind: str = "grad_norm_sq"
    target_value: Optional[float] = 1e-4
    output_dir: str = "runs"
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"algorithm labels must be unique, got {labels}")
        if self.query_budget is not None and self.query_budget < 1:
            raise ConfigError("query_budget must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.target_kind not in ("grad_norm_sq", "half_gap"):
            raise ConfigError(f"unknown target kind {self.target_kind!r}")
        if self.target_kind == "grad_norm_sq" and not (self.target_value and self.target_value > 0):
            raise ConfigError("grad_norm_sq target needs a positive value")


def _expect(mapping, key, kind, where, default=None):
    value = mapping.get(key, default)
    if value is None:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ConfigError(f"{where}.{key} must be {kind.__name__}, got {value!r}")
    return value


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def _hp_overrides(mapping, where) -> dict:
    out = {}
    for key in _HP_KEYS:
        if key not in mapping:
            continue
        kind = int if key in ("q", "K", "s1", "s2") else float
        value = _expect(mapping, key, kind, where)
        if value is not None:
            out[key] = value
    return out


def parse_config(raw: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a config mapping (as loaded from YAML)."""
    _check_keys(
        raw,
        ("problem", "defaults", "algorithms", "seeds", "query_budget", "record_every", "target", "output_dir", "workers", "timing"),
        "config",
    )
    praw = raw.get("problem", {}) or {}
    _check_keys(praw, ProblemSpec.__dataclass_fields__, "problem")
    kind = praw.get("kind", "synthetic")
    if kind not in ("synthetic", "libsvm"):
        raise ConfigError(f"problem.kind must be 'synthetic' or 'libsvm', got {kind!r}")
    path = _expect(praw, "path", str, "problem")
    if kind == "libsvm":
        if path is None:
            raise ConfigError("problem.path is required for libsvm problems")
        if base_dir is not None and not os.path.isabs(path):
            path = str(base_dir / path)
    defaults = ProblemSpec()
    problem = ProblemSpec(
        kind=kind,
        path=path,
        n=_expect(praw, "n", int, "problem", defaults.n),
        d=_expect(praw, "d", int, "problem", defaults.d),
        separability=_expect(praw, "separability", float, "problem", defaults.separability),
        scale=_expect(praw, "scale", float, "problem", defaults.scale),
        correlation=_expect(praw, "correlation", float, "problem", defaults.correlation),
        data_seed=_expect(praw, "data_seed", int, "problem", defaults.data_seed),
        alpha=_expect(praw, "alpha", float, "problem", defaults.alpha),
        normalize=_expect(praw, "normalize", bool, "problem", defaults.normalize),
        l1_lambda=_expect(praw, "l1_lambda", float, "problem"),
    )
    draw = raw.get("defaults", {}) or {}
    _check_keys(draw, _HP_KEYS, "defaults")
    hp_defaults = _hp_overrides(draw, "defaults")

    algos_raw = raw.get("algorithms")
    if not isinstance(algos_raw, list) or not algos_raw:
        raise ConfigError("algorithms must be a nonempty list")
    algos = []
    for i, entry in enumerate(algos_raw):
        where = f"algorithms[{i}]"
        if isinstance(entry, str):
            entry = {"name": entry}
        _check_keys(entry, ("name", "label", "selector") + _HP_KEYS, where)
        name = entry.get("name")
        if name not in ALGORITHMS:
            raise ConfigError(f"{where}.name: unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
        selector = entry.get("selector")
        if selector is not None and selector not in SELECTORS:
            raise ConfigError(f"{where}.selector: unknown selector {selector!r}; choose from {sorted(SELECTORS)}")
        algos.append(AlgorithmSpec(name, str(entry.get("label", name)), _hp_overrides(entry, where), selector))

    seeds = raw.get("seeds")
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be a nonempty list of integers")
    if any(s < 0 or s >= 2**64 for s in seeds):
        raise ConfigError("seeds must be 64-bit nonnegative integers")

    target = raw.get("target", {"kind": "grad_norm_sq", "value": 1e-4}) or {}
    _check_keys(target, ("kind", "value"), "target")
    return ExperimentConfig(
        problem=problem,
        algorithms=tuple(algos),
        seeds=tuple(seeds),
        defaults=hp_defaults,
        query_budget=_expect(raw, "query_budget", int, "config"),
        record_every=_expect(raw, "record_every", int, "config", 1),
        target_kind=target.get("kind", "grad_norm_sq"),
        target_value=_expect(target, "value", float, "target"),
        output_dir=_expect(raw, "output_dir", str, "config", "runs"),
        workers=_expect(raw, "workers", int, "config", 1),
        timing=_expect(raw, "timing", bool, "config", False),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    return parse_config(raw, base_dir=path.parent)


def build_problem(spec: ProblemSpec) -> LogisticRegressionObjective:
    if spec.kind == "libsvm":
        records, d = load_libsvm(spec.path)
    else:
        rng = np.random.default_rng(spec.data_seed)
        records = make_synthetic_logreg_data(rng, spec.n, spec.d, spec.separability, spec.scale, spec.correlation)
        d = spec.d
    return make_nonconvex_logreg(records, spec.alpha, d=d, normalize=spec.normalize)


def _stepsize(params: dict, d: int, where: str) -> dict:
    params = dict(params)
    if "eta" in params and "eta_over_d" in params:
        raise ConfigError(f"{where}: give eta or eta_over_d, not both")
    if "eta_over_d" in params:
        params["eta"] = params.pop("eta_over_d") / d
    return params


def resolve_params(cfg: ExperimentConfig, algo: AlgorithmSpec, obj, seed: int) -> HyperParams:
    """Defaults, then selector output, then per-algorithm overrides."""
    own = _stepsize(algo.params, obj.d, algo.label)
    try:
        if algo.selector is not None:
            K = own.get("K", cfg.defaults.get("K"))
            if K is None:
                raise ConfigError(f"{algo.label}: selector {algo.selector} needs K")
            base = select_params(algo.selector, obj.n, obj.d, K, obj.metadata.smoothness_L, seed=seed)
            hp = base.with_(**own)
        else:
            merged = _stepsize(cfg.defaults, obj.d, "defaults")
            merged.update(own)
            missing = [k for k in ("eta", "q", "K", "s2", "beta", "delta") if merged.get(k) is None]
            if missing:
                raise ConfigError(f"{algo.label}: missing hyperparameters {missing}")
            hp = HyperParams(
                eta=merged["eta"],
                q=merged["q"],
                K=merged["K"],
                s1=merged.get("s1") or obj.n,
                s2=merged["s2"],
                smoothing=SmoothingParams(merged["beta"], merged["delta"]),
                seed=seed,
            )
        hp.check_for(obj.n)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{algo.label}: {exc}") from None
    return hp


def _regularizer(cfg: ExperimentConfig):
    lam = cfg.problem.l1_lambda
    return L1Regularizer(lam) if lam else ZeroRegularizer()


def _run_one(cfg: ExperimentConfig, label: str, seed: int, obj=None) -> RunTrace:
    if obj is None:
        obj = build_problem(cfg.problem)
    algo = next(a for a in cfg.algorithms if a.label == label)
    hp = resolve_params(cfg, algo, obj, seed)
    return run_algorithm(
        algo.name,
        obj,
        hp,
        h_reg=_regularizer(cfg) if algo.name == "prox-zo-spider-coord" else None,
        query_budget=cfg.query_budget,
        record_every=cfg.record_every,
        timing=cfg.timing,
    )


# -- summary -----------------------------------------------------------------


def value_at_budget(trace: RunTrace, budget: int, column: str = "f_value") -> float:
    """Step interpolation: the value of the last row whose query count is <= budget."""
    queries = trace.queries
    pos = int(np.searchsorted(queries, budget, side="right")) - 1
    if pos < 0:
        raise ValueError("budget precedes the first trace row")
    return float(getattr(trace.rows[pos], column))


def queries_to_reach(trace: RunTrace, threshold: float, column: str = "f_value") -> float:
    values = trace.f_values if column == "f_value" else trace.grad_norms_sq
    hit = np.flatnonzero(values <= threshold)
    return float(trace.queries[hit[0]]) if hit.size else math.inf


@dataclass(frozen=True)
class AlgorithmSummary:
    label: str
    algorithm: str
    median_f: float
    median_grad_norm_sq: float
    median_queries_to_target: float
    median_queries_to_half_gap: float
    rank: int


@dataclass(frozen=True)
class ExperimentResult:
    summaries: list[AlgorithmSummary]
    comparison_budget: int
    f_initial: float
    f_best: float
    output_dir: Optional[Path] = None


def summarize(cfg: ExperimentConfig, traces: dict[tuple[str, int], RunTrace]) -> ExperimentResult:
    """Medians over seeds at the largest query count every run reached.

    The half-gap target is ``f0 - (f0 - f_best) / 2`` with ``f_best`` the lowest
    value seen in any run.  Ranks order algorithms by median queries to the
    configured target, ties broken by median final value.
    """
    budget = min(int(t.queries[-1]) for t in traces.values())
    f0 = max(t.rows[0].f_value for t in traces.values())
    f_best = min(float(np.min(t.f_values)) for t in traces.values())
    half_gap = f0 - 0.5 * (f0 - f_best)
    rows = []
    for algo in cfg.algorithms:
        runs = [traces[(algo.label, s)] for s in cfg.seeds]
        med_f = float(np.median([value_at_budget(t, budget) for t in runs]))
        med_g = float(np.median([value_at_budget(t, budget, "grad_norm_sq") for t in runs]))
        med_half = float(np.median([queries_to_reach(t, half_gap) for t in runs]))
        if cfg.target_kind == "half_gap":
            med_target = med_half
        else:
            med_target = float(np.median([queries_to_reach(t, cfg.target_value, "grad_norm_sq") for t in runs]))
        rows.append([algo, med_f, med_g, med_target, med_half])
    order = sorted(range(len(rows)), key=lambda i: (rows[i][3], rows[i][1]))
    ranks = {i: r + 1 for r, i in enumerate(order)}
    summaries = [
        AlgorithmSummary(a.label, a.name, f, g, t, h, ranks[i]) for i, (a, f, g, t, h) in enumerate(rows)
    ]
    return ExperimentResult(summaries, budget, f0, f_best)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def _output_dir(cfg: ExperimentConfig, override=None) -> Path:
    return Path(override or os.environ.get(OUTPUT_DIR_ENV) or cfg.output_dir)


def run_experiment(cfg: ExperimentConfig, output_dir=None, write: bool = True) -> tuple[ExperimentResult, dict]:
    """Run every (algorithm, seed) pair, write traces plus ``summary.csv`` and ``runs.csv``.

    Output directory precedence: ``output_dir`` argument, then
    ``$ZOVR_OUTPUT_DIR``, then ``cfg.output_dir``.  Returns the summary and
    the traces keyed by ``(label, seed)``.
    """
    pairs = [(a.label, s) for a in cfg.algorithms for s in cfg.seeds]
    obj = build_problem(cfg.problem)
    for algo in cfg.algorithms:
        resolve_params(cfg, algo, obj, cfg.seeds[0])
    if cfg.workers > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_one, cfg, label, seed) for label, seed in pairs]
            traces = {pair: fut.result() for pair, fut in zip(pairs, futures)}
    else:
        traces = {(label, seed): _run_one(cfg, label, seed, obj) for label, seed in pairs}
    result = summarize(cfg, traces)
    if not write:
        return result, traces
    out = _output_dir(cfg, output_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for (label, seed), trace in traces.items():
        write_trace(trace, out / "traces" / f"{label}_seed{seed}.csv")
    _write_csv(
        out / "summary.csv",
        ["label", "algorithm", "rank", "median_f", "median_grad_norm_sq", "median_queries_to_target", "median_queries_to_half_gap", "comparison_budget"],
        [
            [s.label, s.algorithm, s.rank, _fmt(s.median_f), _fmt(s.median_grad_norm_sq), _fmt(s.median_queries_to_target), _fmt(s.median_queries_to_half_gap), result.comparison_budget]
            for s in result.summaries
        ],
    )
    _write_csv(
        out / "runs.csv",
        ["label", "seed", "status", "total_queries", "last_k", "output_index", "final_f", "final_grad_norm_sq"],
        [
            [label, seed, t.status, t.total_queries, t.rows[-1].k, t.output_index, _fmt(t.rows[-1].f_value), _fmt(t.rows[-1].grad_norm_sq)]
            for (label, seed), t in traces.items()
        ],
    )
    return ExperimentResult(result.summaries, result.comparison_budget, result.f_initial, result.f_best, out), traces

