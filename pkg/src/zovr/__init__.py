"""Zeroth-order variance-reduced optimization for finite sums.

Black-box access to the components ``f_i`` is metered by :class:`QueryMeter`;
the optimizers only ever see function values.
"""

from .data_io import DatasetRecord, LibSVMFormatError, load_libsvm, make_synthetic_logreg_data, parse_libsvm, read_trace, serialize_libsvm, write_trace
from .estimators import GradientEstimate, SmoothingParams, coord_estimate, rand_two_point_estimate, spider_coord_step, svrg_coord_inner, svrg_rand_inner
from .objectives import (
    BlackBoxObjective,
    FiniteSumObjective,
    LogisticRegressionObjective,
    QuadraticSumObjective,
    QueryMeter,
    analytic_gradient,
    full_value,
    make_nonconvex_logreg,
    make_quadratic,
    make_quadratic_sum,
    metered,
)
from .optimizers import (
    ALGORITHMS,
    RunTrace,
    TraceRow,
    expected_queries,
    run_algorithm,
    run_prox_zo_spider_coord,
    run_zo_gd,
    run_zo_sgd,
    run_zo_spider_coord,
    run_zo_spider_coord_c,
    run_zo_svrg_coord,
    run_zo_svrg_coord_rand,
    run_zo_svrg_coord_rand_c,
)
from .params import HyperParams, baseline_params, select_params
from .prox import L1Regularizer, ZeroRegularizer, generalized_gradient, prox_map

__version__ = "0.1.0"
