"""Single-letter distortion measures and the block distortions they induce."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .source import JointMeasure

PRESETS = ("hamming", "squared_error")


@dataclass(frozen=True)
class DistortionMatrix:
    """``rho[x, y]``; the block distortion is ``sum_i rho[x_i, y_i]``."""

    rho: np.ndarray
    preset: str | None = None
    levels_x: tuple[float, ...] | None = None
    levels_y: tuple[float, ...] | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.size == 0:
            raise DomainError("distortion matrix must be a non-empty 2-D table")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise DomainError("distortion entries must be finite and nonnegative")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def nx(self) -> int:
        return self.rho.shape[0]

    @property
    def ny(self) -> int:
        return self.rho.shape[1]

    @classmethod
    def hamming(cls, nx: int, ny: int | None = None) -> "DistortionMatrix":
        ny = nx if ny is None else ny
        rho = 1.0 - np.eye(nx, ny)
        return cls(rho, preset="hamming")

    @classmethod
    def squared_error(cls, levels_x: Sequence[float], levels_y: Sequence[float] | None = None) -> "DistortionMatrix":
        lx = np.asarray(levels_x, dtype=float)
        ly = lx if levels_y is None else np.asarray(levels_y, dtype=float)
        rho = (lx[:, None] - ly[None, :]) ** 2
        return cls(rho, preset="squared_error", levels_x=tuple(lx), levels_y=tuple(ly))

    def block_table(self, horizon: int) -> np.ndarray:
        """``d(x^n, y^n)`` on axes ``(x_0..x_n, y_0..y_n)``."""
        n1 = horizon + 1
        d = np.zeros((self.nx,) * n1 + (self.ny,) * n1)
        for i in range(n1):
            shape = [1] * (2 * n1)
            shape[i] = self.nx
            shape[n1 + i] = self.ny
            d = d + self.rho.reshape(shape)
        return d

    def min_expected(self, px: np.ndarray) -> float:
        """``E[min_y rho(X, y)]`` for a single letter with law ``px``."""
        return float(np.asarray(px) @ self.rho.min(axis=1))


def cumulative_distortion(x: Sequence[int], y: Sequence[int], rho: DistortionMatrix) -> float:
    if len(x) != len(y):
        raise DomainError(f"sequence lengths differ: {len(x)} vs {len(y)}")
    total = 0.0
    for xi, yi in zip(x, y):
        if not (0 <= xi < rho.nx and 0 <= yi < rho.ny):
            raise DomainError(f"symbol pair ({xi}, {yi}) outside the distortion table")
        total += rho.rho[xi, yi]
    return float(total)


def average_distortion(joint: JointMeasure, rho: DistortionMatrix) -> float:
    """Exact ``E[d(X^n, Y^n)]`` under ``joint``."""
    if (joint.nx, joint.ny) != rho.rho.shape:
        raise DomainError(f"distortion table {rho.rho.shape} does not match joint alphabets ({joint.nx}, {joint.ny})")
    n = joint.horizon
    total = 0.0
    for i in range(n + 1):
        # pair marginal of (X_i, Y_i)
        keep = (i, n + 1 + i)
        pair = joint.table.sum(axis=tuple(a for a in range(2 * (n + 1)) if a not in keep))
        total += float((pair * rho.rho).sum())
    return total


def minimum_distortion(marginals: Sequence[np.ndarray], rho: DistortionMatrix) -> float:
    """Block ``D_min = sum_i E[min_y rho(X_i, y)]`` from per-letter marginals."""
    return sum(rho.min_expected(p) for p in marginals)
