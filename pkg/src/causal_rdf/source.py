"""Finite-horizon sources and the joint measures they induce."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError
from .probability import CausalKernelFamily, check_rows

MAX_TABLE_ENTRIES = 2**26
JOINT_TOL = 1e-10

SOURCE_KINDS = ("memoryless", "markov1", "general")


def check_capacity(horizon: int, nx: int, ny: int = 1) -> None:
    entries = (nx * ny) ** (horizon + 1)
    if entries > MAX_TABLE_ENTRIES:
        raise CapacityError(
            f"dense tables need {entries} entries (|X|={nx}, |Y|={ny}, n={horizon}); "
            f"the cap is {MAX_TABLE_ENTRIES}. Use a shorter horizon or smaller alphabets."
        )


@dataclass(frozen=True)
class SourceModel:
    """Source kernels ``P(x_i | x^{i-1})`` for ``i = 0..horizon``.

    ``memoryless`` stores one distribution ``probs``; ``markov1`` stores
    ``initial`` and a row-stochastic ``transition[x_prev, x]``; ``general``
    stores ``stages[i]`` of shape ``(nx,)*i + (nx,)``.
    """

    horizon: int
    nx: int
    kind: str
    probs: np.ndarray | None = None
    initial: np.ndarray | None = None
    transition: np.ndarray | None = None
    stages: tuple[np.ndarray, ...] | None = field(default=None)

    def __post_init__(self):
        if self.horizon < 0:
            raise DomainError("horizon must be >= 0")
        if self.kind not in SOURCE_KINDS:
            raise DomainError(f"unknown source kind {self.kind!r}; expected one of {SOURCE_KINDS}")
        nx = self.nx
        if self.kind == "memoryless":
            p = np.asarray(self.probs, dtype=float)
            if p.shape != (nx,):
                raise DomainError(f"memoryless probs must have length {nx}")
            check_rows(p, what="source probs")
            object.__setattr__(self, "probs", p)
        elif self.kind == "markov1":
            p0 = np.asarray(self.initial, dtype=float)
            T = np.asarray(self.transition, dtype=float)
            if p0.shape != (nx,) or T.shape != (nx, nx):
                raise DomainError(f"markov1 source needs initial of length {nx} and a {nx}x{nx} transition")
            check_rows(p0, what="source initial")
            check_rows(T, what="source transition")
            object.__setattr__(self, "initial", p0)
            object.__setattr__(self, "transition", T)
        else:
            if self.stages is None or len(self.stages) != self.horizon + 1:
                raise DomainError(f"general source needs {self.horizon + 1} stage tables")
            tabs = []
            for i, t in enumerate(self.stages):
                t = np.asarray(t, dtype=float)
                if t.shape != (nx,) * (i + 1):
                    raise DomainError(f"general source stage {i} must have shape {(nx,) * (i + 1)}")
                check_rows(t, what=f"source stage {i}")
                tabs.append(t)
            object.__setattr__(self, "stages", tuple(tabs))

    @classmethod
    def memoryless(cls, probs, horizon: int) -> "SourceModel":
        probs = np.asarray(probs, dtype=float)
        return cls(horizon, len(probs), "memoryless", probs=probs)

    @classmethod
    def markov1(cls, initial, transition, horizon: int) -> "SourceModel":
        initial = np.asarray(initial, dtype=float)
        return cls(horizon, len(initial), "markov1", initial=initial, transition=transition)

    @classmethod
    def general(cls, stages: Sequence[np.ndarray]) -> "SourceModel":
        stages = tuple(np.asarray(s, dtype=float) for s in stages)
        return cls(len(stages) - 1, stages[0].shape[-1], "general", stages=stages)

    def conditional_table(self, i: int) -> np.ndarray:
        """``P(x_i | x^{i-1})`` as an array of shape ``(nx,)*(i+1)``."""
        if not 0 <= i <= self.horizon:
            raise DomainError(f"stage {i} outside horizon 0..{self.horizon}")
        nx = self.nx
        if self.kind == "memoryless":
            t = self.probs.reshape((1,) * i + (nx,))
        elif self.kind == "markov1":
            if i == 0:
                return self.initial.copy()
            t = self.transition.reshape((1,) * (i - 1) + (nx, nx))
        else:
            return self.stages[i].copy()
        return np.broadcast_to(t, (nx,) * (i + 1)).copy()

    def marginal(self, i: int) -> np.ndarray:
        """Distribution of the single letter ``X_i``."""
        if self.kind == "memoryless":
            return self.probs.copy()
        if self.kind == "markov1":
            p = self.initial
            for _ in range(i):
                p = p @ self.transition
            return p
        mu = joint_source_measure(self).table
        return mu.sum(axis=tuple(a for a in range(self.horizon + 1) if a != i))


@dataclass(frozen=True)
class JointSourceMeasure:
    """``mu(x^n)`` as an array of shape ``(nx,)*(n+1)``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if np.any(t < 0) or abs(t.sum() - 1.0) > JOINT_TOL:
            raise DomainError("source measure must be nonnegative and sum to 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def horizon(self) -> int:
        return self.table.ndim - 1

    @property
    def nx(self) -> int:
        return self.table.shape[0]

    def prefix(self, i: int) -> np.ndarray:
        """Marginal ``mu(x^i)``."""
        return self.table.sum(axis=tuple(range(i + 1, self.horizon + 1)))


def joint_source_measure(model: SourceModel) -> JointSourceMeasure:
    check_capacity(model.horizon, model.nx)
    table = np.ones(())
    for i in range(model.horizon + 1):
        table = table[..., None] * model.conditional_table(i)
    return JointSourceMeasure(table)


@dataclass(frozen=True)
class JointMeasure:
    """``P(x^n, y^n)`` with axes ``(x_0..x_n, y_0..y_n)``."""

    table: np.ndarray
    marginal_y: np.ndarray
    source: JointSourceMeasure

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        t.setflags(write=False)
        my = np.array(self.marginal_y, dtype=float)
        my.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "marginal_y", my)

    @property
    def horizon(self) -> int:
        return self.source.horizon

    @property
    def nx(self) -> int:
        return self.source.nx

    @property
    def ny(self) -> int:
        return self.table.shape[-1]

    def x_axes(self) -> tuple[int, ...]:
        return tuple(range(self.horizon + 1))

    def y_axes(self) -> tuple[int, ...]:
        n1 = self.horizon + 1
        return tuple(range(n1, 2 * n1))

    def marginal_x(self) -> np.ndarray:
        return self.table.sum(axis=self.y_axes())

    def prefix(self, i: int, j: int) -> np.ndarray:
        """Marginal over ``(x^i, y^j)``; ``i`` or ``j`` may be -1 for an empty block."""
        n = self.horizon
        drop = tuple(range(i + 1, n + 1)) + tuple(n + 1 + k for k in range(j + 1, n + 1))
        return self.table.sum(axis=drop)


def _stage_as_joint_factor(q_table: np.ndarray, i: int, n: int, nx: int, ny: int) -> np.ndarray:
    """Rearrange a stage table to broadcast against axes ``(x^n, y^i)``."""
    # q axes: y_0..y_{i-1}, x_0..x_i, y_i -> x_0..x_i, y_0..y_{i-1}, y_i
    perm = tuple(range(i, 2 * i + 1)) + tuple(range(i)) + (2 * i + 1,)
    q = np.transpose(q_table, perm)
    return q.reshape((nx,) * (i + 1) + (1,) * (n - i) + (ny,) * (i + 1))


def build_joint(mu: JointSourceMeasure, q: CausalKernelFamily) -> JointMeasure:
    """``P(x^n, y^n) = mu(x^n) * prod_i q_i(y_i | y^{i-1}, x^i)``."""
    n = mu.horizon
    if q.horizon != n or q.nx != mu.nx:
        raise DomainError(
            f"kernel (n={q.horizon}, |X|={q.nx}) does not match source (n={n}, |X|={mu.nx})"
        )
    check_capacity(n, mu.nx, q.ny)
    table = mu.table
    for i, st in enumerate(q.stages):
        table = table[..., None] * _stage_as_joint_factor(st.table, i, n, q.nx, q.ny)
    marginal_y = table.sum(axis=tuple(range(n + 1)))
    return JointMeasure(table, marginal_y, mu)


def posterior_tables(joint: JointMeasure, i: int) -> np.ndarray:
    """``P(x^i | y^{i-1})`` for every ``y^{i-1}``, shape ``(ny,)*i + (nx,)*(i+1)``.

    Histories ``y^{i-1}`` of zero probability get the prior ``mu(x^i)``.
    """
    if not 0 <= i <= joint.horizon:
        raise DomainError(f"stage {i} outside horizon 0..{joint.horizon}")
    pxy = joint.prefix(i, i - 1)  # axes x^i, y^{i-1}
    pxy = np.moveaxis(pxy, tuple(range(i + 1, 2 * i + 1)), tuple(range(i)))
    py = pxy.sum(axis=tuple(range(i, 2 * i + 1)), keepdims=True)
    prior = np.broadcast_to(joint.source.prefix(i), pxy.shape)
    return np.divide(pxy, py, out=np.array(prior), where=py > 0)


def posterior_source_history(joint: JointMeasure, i: int, y_hist: Sequence[int]) -> np.ndarray:
    """``P(x^i | y^{i-1})`` flattened in mixed-radix order of ``x^i``."""
    if len(y_hist) != i:
        raise DomainError(f"stage {i} posterior needs {i} past outputs, got {len(y_hist)}")
    if any(not 0 <= y < joint.ny for y in y_hist):
        raise DomainError(f"output history {tuple(y_hist)} outside alphabet of size {joint.ny}")
    return posterior_tables(joint, i)[tuple(y_hist)].reshape(-1)
