"""LIBSVM parsing, synthetic logistic-regression data and trace CSV files."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

__all__ = [
    "DatasetRecord",
    "LibSVMFormatError",
    "parse_libsvm",
    "load_libsvm",
    "serialize_libsvm",
    "records_to_arrays",
    "make_synthetic_logreg_data",
    "TRACE_HEADER",
    "write_trace",
    "read_trace",
]


class LibSVMFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class DatasetRecord:
    """One labeled sample.  ``features`` holds ``(index, value)`` pairs with
    1-based, strictly increasing indices; missing indices are zeros."""

    label: int
    features: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")
        prev = 0
        for index, value in self.features:
            if index <= prev:
                raise ValueError("feature indices must be positive and strictly increasing")
            if not math.isfinite(value):
                raise ValueError(f"feature {index} is not finite")
            prev = index

    @property
    def max_index(self) -> int:
        return self.features[-1][0] if self.features else 0


_LABELS = {1.0: 1, -1.0: -1, 0.0: -1}


def _parse_label(token: str, lineno: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise LibSVMFormatError(f"bad label {token!r}", lineno) from None
    if value not in _LABELS:
        raise LibSVMFormatError(f"label {token!r} is not one of +1, 1, -1, 0", lineno)
    return _LABELS[value]


def parse_libsvm(text: Union[bytes, str]) -> tuple[list[DatasetRecord], int]:
    """Parse ``<label> <idx>:<val> ...`` lines.

    Returns the records and the inferred dimension (largest feature index).
    Blank lines and ``#`` comments are skipped.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    records: list[DatasetRecord] = []
    dim = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        label = _parse_label(tokens[0], lineno)
        feats = []
        prev = 0
        for tok in tokens[1:]:
            idx_str, sep, val_str = tok.partition(":")
            if not sep:
                raise LibSVMFormatError(f"malformed token {tok!r}", lineno)
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise LibSVMFormatError(f"malformed token {tok!r}", lineno) from None
            if idx < 1:
                raise LibSVMFormatError(f"feature index {idx} must be >= 1", lineno)
            if idx <= prev:
                raise LibSVMFormatError(f"feature index {idx} does not increase", lineno)
            if not math.isfinite(val):
                raise LibSVMFormatError(f"feature {idx} has non-finite value", lineno)
            feats.append((idx, val))
            prev = idx
        records.append(DatasetRecord(label, tuple(feats)))
        dim = max(dim, prev)
    if not records:
        raise LibSVMFormatError("empty dataset")
    return records, dim


def load_libsvm(path: Union[str, os.PathLike]) -> tuple[list[DatasetRecord], int]:
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read())


def serialize_libsvm(records: Iterable[DatasetRecord]) -> str:
    lines = []
    for rec in records:
        parts = ["+1" if rec.label == 1 else "-1"]
        parts.extend(f"{i}:{v!r}" for i, v in rec.features)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def records_to_arrays(records, d: Optional[int] = None, normalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(n, d)`` feature matrix and label vector.

    With ``normalize`` each column is divided by its max absolute value
    (all-zero columns are left alone), which maps features into ``[-1, 1]``.
    """
    records = list(records)
    if not records:
        raise ValueError("empty dataset")
    inferred = max(rec.max_index for rec in records)
    if d is None:
        d = max(inferred, 1)
    elif inferred > d:
        raise ValueError(f"record has feature index {inferred} > d={d}")
    features = np.zeros((len(records), d))
    labels = np.empty(len(records))
    for row, rec in enumerate(records):
        if rec.label not in (-1, 1):
            raise ValueError(f"label {rec.label} outside {{-1, +1}}")
        labels[row] = rec.label
        for idx, val in rec.features:
            features[row, idx - 1] = val
    if normalize:
        scale = np.max(np.abs(features), axis=0)
        scale[scale == 0] = 1.0
        features /= scale
    return features, labels


def make_synthetic_logreg_data(
    rng: np.random.Generator,
    n: int,
    d: int,
    separability: float = 2.0,
    scale: float = 0.5,
    correlation: float = 0.0,
) -> list[DatasetRecord]:
    """Gaussian features clipped to ``[-1, 1]``, labels from a planted linear rule.

    Features are ``scale * (rho * g + sqrt(1 - rho^2) * z_j)`` with a shared
    factor ``g``; ``correlation = rho`` near 1 gives an ill-conditioned
    Hessian.

    The label agrees with ``sign(w*.x)`` with probability
    ``sigmoid(separability * |w*.x|)``: ``separability = inf`` gives separable
    data, ``0`` gives fair coin labels.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if separability < 0:
        raise ValueError("separability must be nonnegative")
    if not 0.0 <= correlation < 1.0:
        raise ValueError("correlation must lie in [0, 1)")
    planted = rng.standard_normal(d)
    planted /= np.linalg.norm(planted)
    raw = rng.standard_normal((n, d))
    if correlation > 0.0:
        raw = correlation * rng.standard_normal((n, 1)) + np.sqrt(1.0 - correlation**2) * raw
    X = np.clip(scale * raw, -1.0, 1.0)
    margins = X @ planted
    clean = np.where(margins >= 0, 1, -1)
    if math.isinf(separability):
        keep_prob = np.ones(n)
    else:
        keep_prob = 1.0 / (1.0 + np.exp(-separability * np.abs(margins)))
    flips = rng.random(n) >= keep_prob
    labels = np.where(flips, -clean, clean)
    return [
        DatasetRecord(int(labels[i]), tuple((j + 1, float(X[i, j])) for j in range(d) if X[i, j] != 0.0))
        for i in range(n)
    ]


# -- trace files -------------------------------------------------------------

TRACE_HEADER = ("k", "queries", "f", "grad_norm_sq", "wall_ms")


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_trace(trace, path: Union[str, os.PathLike]) -> None:
    """Write ``trace.rows`` as CSV.  Floats use 17 significant digits so that
    :func:`read_trace` recovers them exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for row in trace.rows:
        writer.writerow([str(row.k), str(row.queries), _fmt(row.f_value), _fmt(row.grad_norm_sq), _fmt(row.wall_ms)])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_trace(path: Union[str, os.PathLike]):
    from .optimizers import RunTrace, TraceRow

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace file") from None
        if tuple(header) != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if len(fields) != len(TRACE_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(TRACE_HEADER)} fields")
            try:
                rows.append(TraceRow(int(fields[0]), int(fields[1]), float(fields[2]), float(fields[3]), float(fields[4])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return RunTrace(rows=rows)
