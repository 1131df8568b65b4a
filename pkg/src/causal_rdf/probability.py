"""Finite-alphabet probability primitives.

Distributions are plain 1-D float arrays. Conditional kernels are dense
arrays whose leading axes are the conditioning symbols and whose last axis
is the conditioned symbol, so the C-order flattening of the leading axes is
the mixed-radix history code (earliest symbol most significant).

A stage-``i`` reconstruction kernel ``q_i(y_i | y^{i-1}, x^i)`` therefore has
shape ``(ny,)*i + (nx,)*(i+1) + (ny,)``, and an output kernel
``nu_i(y_i | y^{i-1})`` has shape ``(ny,)*i + (ny,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDistributionError, DomainError

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet ``{0, ..., size-1}``."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise DomainError(f"alphabet size must be a positive integer, got {self.size!r}")


@dataclass(frozen=True)
class HistoryIndex:
    radices: tuple[int, ...]
    code: int

    @property
    def symbols(self) -> tuple[int, ...]:
        return decode_history(self.code, self.radices)


def encode_history(symbols: Sequence[int], radices: Sequence[int]) -> HistoryIndex:
    """Mixed-radix code of ``symbols``; the earliest symbol is most significant."""
    radices = tuple(int(r) for r in radices)
    if len(symbols) != len(radices):
        raise DomainError(f"history of length {len(symbols)} does not match {len(radices)} radices")
    code = 0
    for pos, (sym, radix) in enumerate(zip(symbols, radices)):
        if not 0 <= sym < radix:
            raise DomainError(f"symbol {sym} at position {pos} is outside alphabet of size {radix}")
        code = code * radix + int(sym)
    return HistoryIndex(radices, code)


def decode_history(code: int, radices: Sequence[int]) -> tuple[int, ...]:
    radices = tuple(int(r) for r in radices)
    if not 0 <= code < math.prod(radices):
        raise DomainError(f"history code {code} out of range for radices {radices}")
    out = []
    for radix in reversed(radices):
        code, sym = divmod(code, radix)
        out.append(sym)
    return tuple(reversed(out))


def normalize(weights) -> np.ndarray:
    """Scale nonnegative ``weights`` to sum to one."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise DomainError("normalize expects a 1-D weight sequence")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise DegenerateDistributionError("cannot normalize an all-zero weight vector")
    return w / total


def normalize_rows(table: np.ndarray) -> np.ndarray:
    """Normalize along the last axis; rows with zero mass become uniform."""
    table = np.asarray(table, dtype=float)
    sums = table.sum(axis=-1, keepdims=True)
    out = np.divide(table, sums, out=np.full_like(table, 1.0 / table.shape[-1]), where=sums > 0)
    return out


def is_prob_vector(p, tol: float = NORMALIZATION_TOL) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(np.all(p >= 0) and abs(p.sum() - 1.0) <= tol)


def check_rows(table: np.ndarray, tol: float = NORMALIZATION_TOL, what: str = "kernel") -> None:
    """Raise DomainError unless every row (last axis) of ``table`` is a distribution."""
    table = np.asarray(table)
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        raise DomainError(f"{what} has negative or non-finite entries")
    err = np.abs(table.sum(axis=-1) - 1.0)
    if err.size and err.max() > tol:
        bad = np.unravel_index(int(err.argmax()), err.shape)
        raise DomainError(f"{what} row {bad} sums to {table.sum(axis=-1)[bad]!r}")


def entropy(p) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def kl_divergence(p, q) -> float:
    """Relative entropy D(p || q) in nats.

    Returns ``math.inf`` when ``p`` is not absolutely continuous with respect
    to ``q``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DomainError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    val = float((p[support] * (np.log(p[support]) - np.log(q[support]))).sum())
    return max(val, 0.0)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def stage_history_shape(i: int, nx: int, ny: int) -> tuple[int, ...]:
    """Radices of the conditioning tuple ``(y^{i-1}, x^i)`` of stage ``i``."""
    return (ny,) * i + (nx,) * (i + 1)


@dataclass(frozen=True)
class StageKernel:
    """Table of ``q_i(y_i | y^{i-1}, x^i)``."""

    stage: int
    nx: int
    ny: int
    table: np.ndarray

    def __post_init__(self):
        table = _frozen(self.table)
        expected = self.history_shape + (self.ny,)
        if table.shape != expected:
            raise DomainError(f"stage {self.stage} kernel has shape {table.shape}, expected {expected}")
        check_rows(table, what=f"stage {self.stage} kernel")
        object.__setattr__(self, "table", table)

    @property
    def history_shape(self) -> tuple[int, ...]:
        return stage_history_shape(self.stage, self.nx, self.ny)

    @property
    def rows(self) -> np.ndarray:
        """One row per history code, shape ``(ny**i * nx**(i+1), ny)``."""
        return self.table.reshape(-1, self.ny)

    def row(self, y_hist: Sequence[int], x_hist: Sequence[int]) -> np.ndarray:
        if len(y_hist) != self.stage or len(x_hist) != self.stage + 1:
            raise DomainError(f"stage {self.stage} needs {self.stage} past outputs and {self.stage + 1} inputs")
        return self.table[tuple(y_hist) + tuple(x_hist)]


@dataclass(frozen=True)
class CausalKernelFamily:
    """The causal product ``q_0 ⊗ q_1 ⊗ ... ⊗ q_n``."""

    stages: tuple[StageKernel, ...]

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise DomainError("kernel family needs at least one stage")
        nx, ny = stages[0].nx, stages[0].ny
        for i, st in enumerate(stages):
            if st.stage != i or st.nx != nx or st.ny != ny:
                raise DomainError(f"stage {i} is inconsistent with the family")
        object.__setattr__(self, "stages", stages)

    @property
    def horizon(self) -> int:
        return len(self.stages) - 1

    @property
    def nx(self) -> int:
        return self.stages[0].nx

    @property
    def ny(self) -> int:
        return self.stages[0].ny

    @classmethod
    def from_tables(cls, tables: Sequence[np.ndarray], nx: int, ny: int) -> "CausalKernelFamily":
        return cls(tuple(StageKernel(i, nx, ny, t) for i, t in enumerate(tables)))

    @classmethod
    def uniform(cls, horizon: int, nx: int, ny: int) -> "CausalKernelFamily":
        return cls.from_tables(
            [np.full(stage_history_shape(i, nx, ny) + (ny,), 1.0 / ny) for i in range(horizon + 1)], nx, ny
        )

    @classmethod
    def copy_kernel(cls, horizon: int, size: int) -> "CausalKernelFamily":
        """Deterministic ``y_i = x_i``."""
        tables = []
        for i in range(horizon + 1):
            t = np.zeros(stage_history_shape(i, size, size) + (size,))
            t[..., :, :] = np.eye(size)
            tables.append(t)
        return cls.from_tables(tables, size, size)

    @classmethod
    def from_markov_tables(cls, tables: Sequence[np.ndarray], nx: int) -> "CausalKernelFamily":
        """Expand tables ``r_i(y_i | y^{i-1}, x_i)`` of shape ``(ny,)*i + (nx, ny)``."""
        full = []
        for i, t in enumerate(tables):
            t = np.asarray(t, dtype=float)
            ny = t.shape[-1]
            expanded = np.expand_dims(t, axis=tuple(range(i, 2 * i)))
            full.append(np.broadcast_to(expanded, stage_history_shape(i, nx, ny) + (ny,)))
        return cls.from_tables(full, nx, full[0].shape[-1])

    @classmethod
    def random(cls, horizon: int, nx: int, ny: int, rng: np.random.Generator) -> "CausalKernelFamily":
        tables = [
            rng.dirichlet(np.ones(ny), size=stage_history_shape(i, nx, ny)) for i in range(horizon + 1)
        ]
        return cls.from_tables(tables, nx, ny)


@dataclass(frozen=True)
class OutputKernelFamily:
    """Tables ``nu_i(y_i | y^{i-1})`` of shape ``(ny,)*i + (ny,)``."""

    stages: tuple[np.ndarray, ...]

    def __post_init__(self):
        stages = tuple(_frozen(t) for t in self.stages)
        if not stages:
            raise DomainError("output family needs at least one stage")
        ny = stages[0].shape[-1]
        for i, t in enumerate(stages):
            if t.shape != (ny,) * (i + 1):
                raise DomainError(f"output stage {i} has shape {t.shape}, expected {(ny,) * (i + 1)}")
            check_rows(t, what=f"output stage {i}")
        object.__setattr__(self, "stages", stages)

    @property
    def horizon(self) -> int:
        return len(self.stages) - 1

    @property
    def ny(self) -> int:
        return self.stages[0].shape[-1]

    @classmethod
    def uniform(cls, horizon: int, ny: int) -> "OutputKernelFamily":
        return cls(tuple(np.full((ny,) * (i + 1), 1.0 / ny) for i in range(horizon + 1)))

    @classmethod
    def random(cls, horizon: int, ny: int, rng: np.random.Generator) -> "OutputKernelFamily":
        return cls(tuple(rng.dirichlet(np.ones(ny), size=(ny,) * i) for i in range(horizon + 1)))
