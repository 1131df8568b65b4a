"""Brute-force checks for the solver on desk-scale instances.

The minimizer here shares nothing with :mod:`causal_rdf.solver`: it treats
every stage-kernel row as a free point of its simplex and runs multi-start
projected gradient descent on ``I - s * E[d]``, with the gradient estimated by
central differences and ``I`` computed by enumerating the full joint law.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .distortion import DistortionMatrix
from .errors import CapacityError, DomainError
from .probability import CausalKernelFamily, stage_history_shape
from .source import JointMeasure, JointSourceMeasure, SourceModel, joint_source_measure

log = logging.getLogger(__name__)

MAX_FREE_PARAMS = 12
FD_STEP = 1e-6
CONDITIONAL_TOL = 1e-10
NULL_MASS = 1e-14


@dataclass(frozen=True)
class OracleConfig:
    restarts: int = 64
    local_steps: int = 5000
    step_tol: float = 1e-9
    seed: int = 0
    markov_rows: bool = False  # rows indexed by (y^{i-1}, x_i) only

    def __post_init__(self):
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")
        if self.local_steps < 1:
            raise DomainError("local_steps must be >= 1")


def project_rows_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row (last axis) onto the probability simplex."""
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, v.shape[-1] + 1)
    cond = u - css / k > 0
    r = v.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, r[..., None], axis=-1) / (r[..., None] + 1.0)
    return np.maximum(v - theta, 0.0)


class _Layout:
    """Maps stacked free parameters to stage-kernel row tables."""

    def __init__(self, horizon: int, nx: int, ny: int, markov_rows: bool):
        self.horizon, self.nx, self.ny = horizon, nx, ny
        self.markov_rows = markov_rows
        self.shapes = []
        for i in range(horizon + 1):
            hist = (ny,) * i + (nx,) if markov_rows else stage_history_shape(i, nx, ny)
            self.shapes.append(hist)
        self.row_counts = [int(np.prod(h)) for h in self.shapes]
        self.n_rows = sum(self.row_counts)
        self.n_free = self.n_rows * (ny - 1)

    def rows_from_free(self, theta: np.ndarray) -> np.ndarray:
        """``(B, n_free)`` -> ``(B, n_rows, ny)``; the last entry absorbs the remainder."""
        head = theta.reshape(theta.shape[0], self.n_rows, self.ny - 1)
        last = 1.0 - head.sum(axis=-1, keepdims=True)
        return np.concatenate([head, last], axis=-1)

    def free_from_rows(self, rows: np.ndarray) -> np.ndarray:
        return rows[..., :-1].reshape(rows.shape[0], -1)

    def stage_tables(self, rows: np.ndarray) -> list[np.ndarray]:
        """Full-layout stage tables with a leading batch axis."""
        out, start = [], 0
        for i, (hist, count) in enumerate(zip(self.shapes, self.row_counts)):
            t = rows[:, start:start + count].reshape((rows.shape[0],) + hist + (self.ny,))
            start += count
            if self.markov_rows and i > 0:
                t = np.expand_dims(t, axis=tuple(range(1 + i, 1 + 2 * i)))
                t = np.broadcast_to(t, (rows.shape[0],) + stage_history_shape(i, self.nx, self.ny) + (self.ny,))
            out.append(t)
        return out

    def family(self, rows: np.ndarray) -> CausalKernelFamily:
        tables = [t[0] for t in self.stage_tables(rows[None])]
        return CausalKernelFamily.from_tables(tables, self.nx, self.ny)


def _batched_objective(tables, mu: np.ndarray, d_block: np.ndarray, s: float) -> np.ndarray:
    """``I - s E[d]`` for each member of a batch of causal kernel families."""
    n = mu.ndim - 1
    B = tables[0].shape[0]
    nx = mu.shape[0]
    joint = np.broadcast_to(mu, (B,) + mu.shape)
    for i, t in enumerate(tables):
        ny = t.shape[-1]
        perm = (0,) + tuple(range(1 + i, 2 + 2 * i)) + tuple(range(1, 1 + i)) + (2 + 2 * i,)
        f = np.transpose(t, perm).reshape((B,) + (nx,) * (i + 1) + (1,) * (n - i) + (ny,) * (i + 1))
        joint = joint[..., None] * f
    joint = np.clip(joint, 0.0, None)
    xs = tuple(range(1, n + 2))
    py = joint.sum(axis=xs, keepdims=True)
    prod = mu.reshape((1,) + mu.shape + (1,) * (n + 1)) * py
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * (np.log(joint) - np.log(prod)), 0.0)
    info = terms.reshape(B, -1).sum(axis=1)
    dist = (joint * d_block).reshape(B, -1).sum(axis=1)
    return info - s * dist


def brute_force_lagrangian(
    model: SourceModel,
    rho: DistortionMatrix,
    s: float,
    cfg: OracleConfig | None = None,
) -> tuple[float, CausalKernelFamily]:
    """Smallest ``I - s E[d]`` found over causal kernels, with its kernel."""
    cfg = cfg or OracleConfig()
    if s > 0:
        raise DomainError("s must be <= 0")
    if rho.nx != model.nx:
        raise DomainError("distortion table does not match the source alphabet")
    layout = _Layout(model.horizon, model.nx, rho.ny, cfg.markov_rows)
    if layout.n_free > MAX_FREE_PARAMS:
        raise CapacityError(
            f"oracle instance has {layout.n_free} free kernel parameters (limit {MAX_FREE_PARAMS}); "
            "use a shorter horizon, smaller alphabets, or markov_rows for memoryless sources"
        )
    mu = joint_source_measure(model).table
    d_block = rho.block_table(model.horizon)
    R, P, ny = cfg.restarts, layout.n_free, rho.ny

    def evaluate(theta):
        rows = layout.rows_from_free(theta)
        return _batched_objective(layout.stage_tables(rows), mu, d_block, s)

    if P == 0:
        rows = np.ones((1, layout.n_rows, 1))
        return float(evaluate(np.zeros((1, 0)))[0]), layout.family(rows[0])

    seeds = np.random.SeedSequence(cfg.seed).spawn(R)
    start = np.stack([np.random.default_rng(sq).dirichlet(np.ones(ny), size=layout.n_rows) for sq in seeds])
    theta = layout.free_from_rows(start)
    f = evaluate(theta)
    eta = np.full(R, 0.1)
    active = np.ones(R, dtype=bool)
    eye = np.eye(P) * FD_STEP

    for _ in range(cfg.local_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        th = theta[idx]
        probes = np.concatenate([th[:, None, :] + eye, th[:, None, :] - eye], axis=1).reshape(-1, P)
        fp = evaluate(probes).reshape(idx.size, 2, P)
        grad = (fp[:, 0] - fp[:, 1]) / (2 * FD_STEP)
        cand_rows = project_rows_to_simplex(layout.rows_from_free(th - eta[idx, None] * grad))
        cand = layout.free_from_rows(cand_rows)
        fc = evaluate(cand)
        better = fc < f[idx]
        gain = np.where(better, f[idx] - fc, 0.0)
        theta[idx[better]] = cand[better]
        f[idx[better]] = fc[better]
        eta[idx] = np.where(better, eta[idx] * 1.5, eta[idx] * 0.5)
        done = (better & (gain < cfg.step_tol)) | (eta[idx] < 1e-14)
        active[idx[done]] = False

    best = int(np.argmin(f))
    rows = project_rows_to_simplex(layout.rows_from_free(theta[best:best + 1]))[0]
    log.debug("oracle restarts: best %.10g, spread %.3g", f[best], float(np.ptp(f)))
    return float(f[best]), layout.family(rows)


# -- causality checks -----------------------------------------------------------


def _conditional(num: np.ndarray, den: np.ndarray):
    mask = np.broadcast_to(den > NULL_MASS, num.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(mask, num / np.where(den > 0, den, 1.0), 0.0)
    return val, mask


def causality_conditions(joint: JointMeasure, tol: float = CONDITIONAL_TOL) -> tuple[bool, bool]:
    """Verdicts of the two conditional-independence characterizations of causality.

    The first holds iff, for every ``i < n``, ``Y_i`` is independent of the
    future letters ``X_{i+1..n}`` given ``(X^i, Y^{i-1})``. The second holds
    iff, for every ``i < n``, ``X_{i+1}`` is independent of ``Y^i`` given
    ``X^i``. Null conditioning histories are skipped.
    """
    n = joint.horizon
    full_x = joint.table
    future_ok = True
    feedback_ok = True
    for i in range(n):
        # P(x^n, y^i) / P(x^n, y^{i-1})  vs  P(x^i, y^i) / P(x^i, y^{i-1})
        ax_y_after = tuple(n + 1 + k for k in range(i + 1, n + 1))
        p_xn_yi = full_x.sum(axis=ax_y_after)  # (x^n, y^i)
        p_xn_yim = p_xn_yi.sum(axis=-1, keepdims=True)
        cond_full, mask = _conditional(p_xn_yi, p_xn_yim)
        p_xi_yi = joint.prefix(i, i)
        p_xi_yim = p_xi_yi.sum(axis=-1, keepdims=True)
        cond_past, _ = _conditional(p_xi_yi, p_xi_yim)
        cond_past = cond_past.reshape(cond_past.shape[: i + 1] + (1,) * (n - i) + cond_past.shape[i + 1:])
        if np.any(mask & (np.abs(cond_full - cond_past) > tol)):
            future_ok = False

        # P(x_{i+1} | x^i, y^i) vs P(x_{i+1} | x^i)
        p_next = joint.prefix(i + 1, i)  # (x^{i+1}, y^i)
        p_prev = p_next.sum(axis=i + 1, keepdims=True)
        cond_xy, mask_xy = _conditional(p_next, p_prev)
        mu_next = joint.source.prefix(i + 1)
        cond_x, _ = _conditional(mu_next, mu_next.sum(axis=-1, keepdims=True))
        cond_x = cond_x.reshape(cond_x.shape + (1,) * (i + 1))
        if np.any(mask_xy & (np.abs(cond_xy - cond_x) > tol)):
            feedback_ok = False
    return future_ok, feedback_ok


def verify_causal_factorization(joint: JointMeasure, tol: float = CONDITIONAL_TOL) -> bool:
    """True iff the joint law comes from a causal reconstruction kernel."""
    future_ok, feedback_ok = causality_conditions(joint, tol)
    if future_ok != feedback_ok:
        log.warning("causality characterizations disagree (future=%s, feedback=%s)", future_ok, feedback_ok)
    return future_ok and feedback_ok


def build_noncausal_joint(mu: JointSourceMeasure, tables) -> JointMeasure:
    """Joint law from kernels ``q_i(y_i | y^{i-1}, x^n)`` that may look ahead.

    ``tables[i]`` has shape ``(ny,)*i + (nx,)*(n+1) + (ny,)``.
    """
    n = mu.horizon
    nx = mu.nx
    table = mu.table
    for i, t in enumerate(tables):
        t = np.asarray(t, dtype=float)
        ny = t.shape[-1]
        if t.shape != (ny,) * i + (nx,) * (n + 1) + (ny,):
            raise DomainError(f"non-causal stage {i} has shape {t.shape}")
        perm = tuple(range(i, i + n + 1)) + tuple(range(i)) + (i + n + 1,)
        table = table[..., None] * np.transpose(t, perm)
    return JointMeasure(table, table.sum(axis=tuple(range(n + 1))), mu)


def random_noncausal_joint(mu: JointSourceMeasure, ny: int, rng: np.random.Generator) -> JointMeasure:
    n, nx = mu.horizon, mu.nx
    tables = [rng.dirichlet(np.ones(ny), size=(ny,) * i + (nx,) * (n + 1)) for i in range(n + 1)]
    return build_noncausal_joint(mu, tables)
