"""Operational realization of a causal kernel as a sampled filter cascade.

Paths are generated letter by letter: ``x_i`` from the source given ``x^{i-1}``,
then ``y_i`` from ``q_i`` given ``(y^{i-1}, x^i)``. Every path consumes
``2 * (n + 1)`` uniforms from a Philox (counter-based) stream keyed by the
seed: the first ``n + 1`` drive the source and the rest drive the kernel, so
changing source letters never changes which uniforms the kernel sees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .probability import CausalKernelFamily
from .solver import RDPoint
from .source import JointMeasure, SourceModel


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _inverse_cdf(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sample one symbol per row of ``rows`` using uniforms ``u``."""
    cdf = np.cumsum(rows, axis=-1)
    idx = (u[:, None] >= cdf).sum(axis=-1)
    return np.minimum(idx, rows.shape[-1] - 1)


def _source_tables(model: SourceModel) -> list[np.ndarray]:
    return [model.conditional_table(i).reshape(-1, model.nx) for i in range(model.horizon + 1)]


def _draw_sources(tables, u_x: np.ndarray, nx: int) -> np.ndarray:
    paths, n1 = u_x.shape
    x = np.empty((paths, n1), dtype=np.int64)
    code = np.zeros(paths, dtype=np.int64)
    for i in range(n1):
        x[:, i] = _inverse_cdf(tables[i][code], u_x[:, i])
        code = code * nx + x[:, i]
    return x


def _run_cascade(q: CausalKernelFamily, x: np.ndarray, u_y: np.ndarray) -> np.ndarray:
    paths, n1 = x.shape
    nx, ny = q.nx, q.ny
    y = np.empty((paths, n1), dtype=np.int64)
    x_code = np.zeros(paths, dtype=np.int64)
    y_code = np.zeros(paths, dtype=np.int64)
    for i, st in enumerate(q.stages):
        x_code = x_code * nx + x[:, i]
        rows = st.rows[y_code * nx ** (i + 1) + x_code]
        y[:, i] = _inverse_cdf(rows, u_y[:, i])
        y_code = y_code * ny + y[:, i]
    return y


def _check_shapes(model: SourceModel, q: CausalKernelFamily) -> None:
    if q.horizon != model.horizon or q.nx != model.nx:
        raise DomainError("kernel and source disagree on horizon or alphabet")


def reconstruct(q: CausalKernelFamily, x: Sequence[int], seed: int) -> np.ndarray:
    """Kernel outputs for a given source path, using the kernel half of the seed's uniforms."""
    x = np.asarray(x, dtype=np.int64)
    n1 = q.horizon + 1
    if x.shape != (n1,) or np.any(x < 0) or np.any(x >= q.nx):
        raise DomainError(f"source path must hold {n1} symbols below {q.nx}")
    u = _rng(seed).random((2, n1))
    return _run_cascade(q, x[None, :], u[1][None, :])[0]


def sample_path(model: SourceModel, q: CausalKernelFamily, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One ``(x^n, y^n)`` drawn through the cascade; reproducible from ``seed``."""
    _check_shapes(model, q)
    n1 = model.horizon + 1
    u = _rng(seed).random((2, n1))
    x = _draw_sources(_source_tables(model), u[0][None, :], model.nx)
    return x[0], _run_cascade(q, x, u[1][None, :])[0]


def sample_paths(model: SourceModel, q: CausalKernelFamily, num_paths: int, seed: int):
    """``num_paths`` paths; path 0 equals :func:`sample_path` with the same seed."""
    _check_shapes(model, q)
    n1 = model.horizon + 1
    u = _rng(seed).random((num_paths, 2, n1))
    x = _draw_sources(_source_tables(model), u[:, 0], model.nx)
    return x, _run_cascade(q, x, u[:, 1])


def plugin_mutual_information(counts: np.ndarray) -> float:
    """Plug-in estimate (nats) from a 2-D contingency table of counts."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    p = counts / total
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    pos = p > 0
    return float((p[pos] * (np.log(p[pos]) - np.log((px * py)[pos]))).sum())


@dataclass(frozen=True)
class RealizationReport:
    num_paths: int
    seed: int
    empirical_D: float
    empirical_D_stderr: float | None
    empirical_I: float
    nonzero_cells: int
    plugin_bias_bound: float
    miller_madow_bias: float
    s: float
    point_D: float
    point_R: float
    point_I: float
    horizon: int
    histogram: np.ndarray = field(repr=False)

    @property
    def stderr_defined(self) -> bool:
        return self.empirical_D_stderr is not None

    def distortion_zscore(self) -> float | None:
        if not self.empirical_D_stderr:
            return None
        return (self.empirical_D - self.point_D) / self.empirical_D_stderr

    def to_dict(self) -> dict:
        n1 = self.horizon + 1
        return {
            "num_paths": self.num_paths,
            "seed": self.seed,
            "s": self.s,
            "empirical_D_total": self.empirical_D,
            "empirical_D_per_letter": self.empirical_D / n1,
            "empirical_D_stderr": self.empirical_D_stderr,
            "stderr_defined": self.stderr_defined,
            "empirical_I_nats": self.empirical_I,
            "empirical_I_bits": self.empirical_I / math.log(2),
            "nonzero_cells": self.nonzero_cells,
            "plugin_bias_bound_nats": self.plugin_bias_bound,
            "miller_madow_bias_nats": self.miller_madow_bias,
            "computed_D_total": self.point_D,
            "computed_R_nats": self.point_R,
            "computed_I_nats": self.point_I,
        }


def realize_and_estimate(model: SourceModel, point: RDPoint, num_paths: int, seed: int) -> RealizationReport:
    """Sample the cascade for ``point.kernel`` and compare with the computed point."""
    if num_paths < 1:
        raise DomainError("num_paths must be >= 1")
    if point.kernel is None:
        raise DomainError("only causal points carry a realizable kernel")
    q = point.kernel
    x, y = sample_paths(model, q, num_paths, seed)
    n1 = model.horizon + 1
    rho = point.rho.rho
    d = rho[x, y].sum(axis=1)
    emp_d = float(d.mean())
    stderr = float(d.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else None

    weights_x = model.nx ** np.arange(n1 - 1, -1, -1)
    weights_y = q.ny ** np.arange(n1 - 1, -1, -1)
    cx = x @ weights_x
    cy = y @ weights_y
    size_x, size_y = model.nx ** n1, q.ny ** n1
    hist = np.bincount(cx * size_y + cy, minlength=size_x * size_y).reshape(size_x, size_y)
    nonzero = int((hist > 0).sum())
    mm = (nonzero - int((hist.sum(1) > 0).sum()) - int((hist.sum(0) > 0).sum()) + 1) / (2 * num_paths)
    return RealizationReport(
        num_paths=num_paths,
        seed=int(seed),
        empirical_D=emp_d,
        empirical_D_stderr=stderr,
        empirical_I=plugin_mutual_information(hist),
        nonzero_cells=nonzero,
        plugin_bias_bound=(model.nx * q.ny) ** n1 / (2 * num_paths),
        miller_madow_bias=mm,
        s=point.s,
        point_D=point.D,
        point_R=point.R,
        point_I=point.I,
        horizon=model.horizon,
        histogram=hist,
    )


def total_variation(report: RealizationReport, joint: JointMeasure) -> float:
    """TV distance between the empirical ``(x^n, y^n)`` histogram and ``joint``."""
    emp = report.histogram / report.num_paths
    ref = joint.table.reshape(emp.shape)
    return 0.5 * float(np.abs(emp - ref).sum())
