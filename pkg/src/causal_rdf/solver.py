"""Causal rate distortion solver.

For a multiplier ``s <= 0`` the optimal causal kernel is sought in the
exponentially tilted form

    q_i(y_i | y^{i-1}, x^i) = exp(s * rho(x_i, y_i)) * nu_i(y_i | y^{i-1}) / Z_i(x_i, y^{i-1})

and the output kernels ``nu_i`` are closed by requiring that they equal the
conditional output law ``P(y_i | y^{i-1})`` induced by the source and ``q``.
The two updates are alternated stage by stage until the kernels stop moving.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .distortion import DistortionMatrix, average_distortion, minimum_distortion
from .errors import DegenerateRowError, DistortionRangeError, DomainError
from .probability import (
    CausalKernelFamily,
    OutputKernelFamily,
    StageKernel,
    normalize_rows,
    stage_history_shape,
)
from .source import (
    JointMeasure,
    JointSourceMeasure,
    SourceModel,
    build_joint,
    check_capacity,
    joint_source_measure,
)

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
MONOTONE_SLACK = 1e-9
ZERO_RATE = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    s: float = 0.0
    tol: float = 1e-10
    max_iter: int = 10000
    init: str = "uniform"
    restarts: int = 1
    seed: int = 0
    strict_monotone: bool = False

    def __post_init__(self):
        if not self.s <= 0:
            raise DomainError(f"Lagrange multiplier must satisfy s <= 0, got {self.s}")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1 or self.restarts < 1:
            raise DomainError("max_iter and restarts must be >= 1")
        if self.init not in ("uniform", "random"):
            raise DomainError(f"unknown init rule {self.init!r}")


@dataclass(frozen=True)
class RDPoint:
    """One solved point of the rate distortion curve (all rates in nats)."""

    s: float
    D: float
    R: float
    I: float
    horizon: int
    kernel: CausalKernelFamily | None
    output_family: OutputKernelFamily | None
    iterations: int
    converged: bool
    residual: float
    kind: str = "causal"
    monotone: bool = True
    source: JointSourceMeasure | None = field(default=None, repr=False)
    rho: DistortionMatrix | None = field(default=None, repr=False)
    block_kernel: np.ndarray | None = field(default=None, repr=False)
    lagrangian_trace: tuple[float, ...] = field(default=(), repr=False)
    restart_values: tuple[float, ...] = field(default=(), repr=False)

    @property
    def letters(self) -> int:
        return self.horizon + 1

    @property
    def lagrangian(self) -> float:
        """``I - s * D``, the objective minimized at fixed ``s``."""
        return self.I - self.s * self.D

    @property
    def R_per_letter(self) -> float:
        return self.R / self.letters

    @property
    def D_per_letter(self) -> float:
        return self.D / self.letters

    @property
    def R_bits(self) -> float:
        return self.R / LN2


# -- kernel construction ---------------------------------------------------


def _log_tilt(nu_i: np.ndarray, s: float, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced tilted table on ``(y^{i-1}, x_i, y_i)`` and ``log Z`` on ``(y^{i-1}, x_i)``."""
    with np.errstate(divide="ignore"):
        log_nu = np.log(nu_i)
    logw = log_nu[..., None, :] + s * rho
    log_z = logsumexp(logw, axis=-1)
    if not np.all(np.isfinite(log_z)):
        raise DegenerateRowError("tilted row has zero normalizer; output kernel vanishes on its support")
    r = np.exp(logw - log_z[..., None])
    return normalize_rows(r), log_z


def _expand_reduced(r: np.ndarray, i: int, nx: int) -> np.ndarray:
    """Broadcast ``(y^{i-1}, x_i, y_i)`` to the full ``(y^{i-1}, x^i, y_i)`` layout."""
    ny = r.shape[-1]
    expanded = np.expand_dims(r, axis=tuple(range(i, 2 * i)))
    return np.broadcast_to(expanded, stage_history_shape(i, nx, ny) + (ny,))


def tilted_stage_kernel(nu_i: np.ndarray, s: float, rho: DistortionMatrix, i: int) -> StageKernel:
    """Stage-``i`` kernel ``exp(s rho) nu_i / Z_i``.

    ``nu_i`` has shape ``(ny,)*i + (ny,)``. The result depends on ``x^i`` only
    through ``x_i``.
    """
    if s > 0:
        raise DomainError("s must be <= 0")
    nu_i = np.asarray(nu_i, dtype=float)
    if nu_i.shape != (rho.ny,) * (i + 1):
        raise DomainError(f"output table for stage {i} must have shape {(rho.ny,) * (i + 1)}")
    r, _ = _log_tilt(nu_i, s, rho.rho)
    return StageKernel(i, rho.nx, rho.ny, _expand_reduced(r, i, rho.nx))


def tilted_family(nu: OutputKernelFamily, s: float, rho: DistortionMatrix) -> CausalKernelFamily:
    return CausalKernelFamily(tuple(tilted_stage_kernel(t, s, rho, i) for i, t in enumerate(nu.stages)))


# -- the nu closure ----------------------------------------------------------


def update_output_family(q: CausalKernelFamily, mu: JointSourceMeasure) -> OutputKernelFamily:
    """``nu_i(y_i | y^{i-1}) = sum_{x^i} q_i(y_i | y^{i-1}, x^i) P(x^i | y^{i-1})``."""
    from .source import posterior_tables

    joint = build_joint(mu, q)
    stages = []
    for i, st in enumerate(q.stages):
        post = posterior_tables(joint, i)  # (y^{i-1}, x^i)
        x_axes = tuple(range(i, 2 * i + 1))
        nu_i = (post[..., None] * st.table).sum(axis=x_axes)
        stages.append(normalize_rows(nu_i))
    return OutputKernelFamily(tuple(stages))


@dataclass
class _Round:
    reduced: list  # tilted tables on (y^{i-1}, x_i, y_i) used in this round
    nu: list  # induced output tables after the round
    info: float
    distortion: float


def _forward_round(model: SourceModel, rho: np.ndarray, nu: Sequence[np.ndarray], s: float) -> _Round:
    """One stage-ordered sweep: tilt ``nu_i``, then refresh ``nu_i`` from the induced law.

    The state carried between stages is ``P(y^{i-1}, x^i)`` with axes
    ``(y_0..y_{i-1}, x_0..x_i)``.
    """
    n = model.horizon
    nx = model.nx
    state = model.conditional_table(0)
    reduced, new_nu = [], []
    info = dist = 0.0
    for i in range(n + 1):
        r, _ = _log_tilt(nu[i], s, rho)
        reduced.append(r)
        q_full = _expand_reduced(r, i, nx)
        pj = state[..., None] * q_full  # (y^{i-1}, x^i, y_i)
        x_axes = tuple(range(i, 2 * i + 1))
        p_hist_y = pj.sum(axis=x_axes)  # (y^{i-1}, y_i)
        nu_i = normalize_rows(p_hist_y)
        new_nu.append(nu_i)
        p_xy = pj.sum(axis=tuple(range(i)) + tuple(range(i, 2 * i)))  # (x_i, y_i)
        dist += float((p_xy * rho).sum())
        # info increment E[log q_i - log nu_i] using the induced nu_i
        nu_b = np.expand_dims(nu_i, axis=tuple(range(i, 2 * i + 1)))
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(pj > 0, pj * (np.log(q_full) - np.log(nu_b)), 0.0)
        info += float(terms.sum())
        if i < n:
            # move y_i next to y^{i-1}, then append x_{i+1}
            nxt = np.moveaxis(pj, -1, i)
            nxt = np.expand_dims(nxt, -1) * np.expand_dims(model.conditional_table(i + 1), tuple(range(i + 1)))
            state = nxt
    return _Round(reduced, new_nu, info, dist)


# -- diagnostics ---------------------------------------------------------------


def mutual_information(joint: JointMeasure) -> float:
    """``D(P || mu x nu)`` in nats by exhaustive enumeration."""
    n1 = joint.horizon + 1
    px = joint.source.table.reshape(joint.source.table.shape + (1,) * n1)
    prod = px * joint.marginal_y
    t = joint.table
    pos = t > 0
    if np.any(prod[pos] <= 0):
        return math.inf
    val = float((t[pos] * (np.log(t[pos]) - np.log(prod[pos]))).sum())
    return max(val, 0.0)


def rdf_from_multiplier(
    s: float,
    D: float,
    nu: OutputKernelFamily,
    q: CausalKernelFamily,
    mu: JointSourceMeasure,
    rho: DistortionMatrix,
) -> float:
    """``R = s D - sum_i E[log Z_i(x_i, y^{i-1})]``.

    ``Z_i`` is the normalizer of the tilt of ``nu_i``; the expectation runs over
    ``(x^i, y^{i-1})`` under ``mu`` and the first ``i`` stages of ``q``.
    """
    joint = build_joint(mu, q)
    total = 0.0
    for i, nu_i in enumerate(nu.stages):
        _, log_z = _log_tilt(nu_i, s, rho.rho)  # (y^{i-1}, x_i)
        pxy = joint.prefix(i, i - 1)  # (x^i, y^{i-1})
        p_xi_y = pxy.sum(axis=tuple(range(i)))  # (x_i, y^{i-1})
        p_xi_y = np.moveaxis(p_xi_y, 0, -1)  # (y^{i-1}, x_i)
        total += float((p_xi_y * log_z).sum())
    return s * D - total


def verify_markov_reduction(q: CausalKernelFamily, tol: float = 1e-10) -> bool:
    """True iff each stage row depends on ``x^i`` only through ``x_i``."""
    for st in q.stages:
        i = st.stage
        if i == 0:
            continue
        ref = st.table[(slice(None),) * i + (0,) * i]
        ref = np.expand_dims(ref, axis=tuple(range(i, 2 * i)))
        if np.max(np.abs(st.table - ref)) > tol:
            return False
    return True


def tilt_residual(point: RDPoint) -> float:
    """Sup-norm gap between the kernel and the tilt of its own output family."""
    rebuilt = tilted_family(point.output_family, point.s, point.rho)
    return max(float(np.max(np.abs(a.table - b.table))) for a, b in zip(point.kernel.stages, rebuilt.stages))


def distortion_equality_report(point: RDPoint, tol: float = 1e-8) -> dict:
    """Diagnostics behind :func:`check_distortion_equality`."""
    joint = build_joint(point.source, point.kernel)
    d_re = average_distortion(joint, point.rho)
    induced = update_output_family(point.kernel, point.source)
    nu_gap = max(
        float(np.max(np.abs(a - b))) for a, b in zip(induced.stages, point.output_family.stages)
    )
    return {
        "positive_rate": point.R > ZERO_RATE,
        "s_negative": point.s < 0,
        "distortion_gap": abs(d_re - point.D),
        "tilt_gap": tilt_residual(point),
        "output_gap": nu_gap,
        "tol": tol,
    }


def check_distortion_equality(point: RDPoint, tol: float = 1e-8) -> bool:
    """Active-constraint check: a positive rate needs ``s < 0`` and a genuine fixed point
    whose achieved distortion is the reported ``D``."""
    if point.R <= ZERO_RATE:
        return True
    rep = distortion_equality_report(point, tol)
    scale = point.letters
    return bool(
        rep["s_negative"]
        and rep["distortion_gap"] <= tol * scale
        and rep["tilt_gap"] <= tol
        and rep["output_gap"] <= tol
    )


# -- solving -------------------------------------------------------------------


def _initial_nu(cfg: SolverConfig, horizon: int, ny: int, rng: np.random.Generator) -> OutputKernelFamily:
    if cfg.init == "random":
        return OutputKernelFamily.random(horizon, ny, rng)
    return OutputKernelFamily.uniform(horizon, ny)


def _check_instance(model: SourceModel, rho: DistortionMatrix) -> None:
    if rho.nx != model.nx:
        raise DomainError(f"distortion rows ({rho.nx}) do not match source alphabet ({model.nx})")
    check_capacity(model.horizon, model.nx, rho.ny)


def _iterate(model, rho, s, nu0, cfg):
    nu = [np.array(t) for t in nu0.stages]
    prev = None
    trace = []
    monotone = True
    residual = math.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        rnd = _forward_round(model, rho.rho, nu, s)
        lag = rnd.info - s * rnd.distortion
        if trace and lag > trace[-1] + MONOTONE_SLACK:
            if monotone:
                log.info("Lagrangian increased at iteration %d: %.12g -> %.12g", it, trace[-1], lag)
            monotone = False
        trace.append(lag)
        if prev is not None:
            residual = max(
                max(float(np.max(np.abs(a - b))) for a, b in zip(rnd.reduced, prev.reduced)),
                max(float(np.max(np.abs(a - b))) for a, b in zip(rnd.nu, nu)),
            )
        nu = rnd.nu
        prev = rnd
        if residual < cfg.tol:
            break
    return OutputKernelFamily(tuple(nu)), it, residual, monotone, tuple(trace)


def _assemble(model, mu, rho, s, nu, it, residual, monotone, trace, cfg) -> RDPoint:
    q = tilted_family(nu, s, rho)
    joint = build_joint(mu, q)
    D = average_distortion(joint, rho)
    info = mutual_information(joint)
    R = 0.0 if s == 0 else max(rdf_from_multiplier(s, D, nu, q, mu, rho), 0.0)
    converged = residual < cfg.tol and (monotone or not cfg.strict_monotone)
    return RDPoint(
        s=s, D=D, R=R, I=info, horizon=model.horizon, kernel=q, output_family=nu,
        iterations=it, converged=converged, residual=residual, monotone=monotone,
        source=mu, rho=rho, lagrangian_trace=trace,
    )


def solve_fixed_point(
    model: SourceModel,
    rho: DistortionMatrix,
    cfg: SolverConfig,
    nu_init: OutputKernelFamily | None = None,
) -> RDPoint:
    """Alternate tilt and output-marginal updates at multiplier ``cfg.s``.

    With ``cfg.restarts > 1`` the first run starts from ``nu_init`` (or the
    configured rule) and the rest from random output kernels; the point with
    the smallest Lagrangian is returned and all values are kept in
    ``restart_values``.
    """
    _check_instance(model, rho)
    mu = joint_source_measure(model)
    s = float(cfg.s)
    rng = np.random.default_rng(cfg.seed)
    best = None
    values = []
    for k in range(cfg.restarts):
        if k == 0:
            nu0 = nu_init if nu_init is not None else _initial_nu(cfg, model.horizon, rho.ny, rng)
        else:
            nu0 = OutputKernelFamily.random(model.horizon, rho.ny, rng)
        if s == 0:
            # q = nu exactly; one round only confirms stationarity
            nu, it, residual, mono, trace = nu0, 1, 0.0, True, ()
        else:
            nu, it, residual, mono, trace = _iterate(model, rho, s, nu0, cfg)
        pt = _assemble(model, mu, rho, s, nu, it, residual, mono, trace, cfg)
        if not pt.converged:
            log.warning("s=%g: no convergence after %d iterations (residual %.2e)", s, it, residual)
        values.append(pt.lagrangian)
        if best is None or (pt.converged, -pt.lagrangian) > (best.converged, -best.lagrangian):
            best = pt
    return replace(best, restart_values=tuple(values))


def sweep(
    model: SourceModel,
    rho: DistortionMatrix,
    s_grid: Sequence[float],
    cfg: SolverConfig | None = None,
    warm_start: bool = True,
    max_workers: int | None = None,
) -> list[RDPoint]:
    """Solve at every ``s`` in ``s_grid``; result sorted by distortion.

    Warm starting seeds each solve with the previous output family, so the
    grid is processed in descending ``s``. Without warm starts, points may be
    solved concurrently.
    """
    cfg = cfg or SolverConfig()
    grid = [float(s) for s in s_grid]
    if not grid:
        raise DomainError("s grid is empty")
    if any(s > 0 for s in grid):
        raise DomainError("all grid values must be <= 0")
    order = sorted(grid, reverse=True)
    if warm_start:
        points = []
        nu = None
        for s in order:
            pt = solve_fixed_point(model, rho, replace(cfg, s=s), nu_init=nu)
            if s != 0:
                nu = pt.output_family
            points.append(pt)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            points = list(pool.map(lambda s: solve_fixed_point(model, rho, replace(cfg, s=s)), order))
    return sorted(points, key=lambda p: (p.D, -p.s))


def distortion_bounds(model: SourceModel, rho: DistortionMatrix, cfg: SolverConfig | None = None):
    """``(D_min, D_max, zero-rate point)`` of the achievable distortion interval."""
    cfg = cfg or SolverConfig()
    marginals = [model.marginal(i) for i in range(model.horizon + 1)]
    d_min = minimum_distortion(marginals, rho)
    zero = solve_fixed_point(model, rho, replace(cfg, s=0.0))
    return d_min, zero.D, zero


def _invert(D_of_s, target, tol_d, s_floor=-1e4):
    """Root of ``D(s) = target`` for monotone ``D`` on ``(-inf, 0]``."""
    lo = -1.0
    while D_of_s(lo) > target:
        lo *= 2.0
        if lo < s_floor:
            raise DistortionRangeError(f"target distortion {target} needs s below {s_floor}")
    return brentq(lambda s: D_of_s(s) - target, lo, 0.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def solve_for_target_distortion(
    model: SourceModel,
    rho: DistortionMatrix,
    D_target: float,
    cfg: SolverConfig | None = None,
) -> RDPoint:
    """Causal point whose average (block) distortion equals ``D_target``."""
    cfg = cfg or SolverConfig()
    n1 = model.horizon + 1
    d_min, d_max, zero = distortion_bounds(model, rho, cfg)
    tol_d = 1e-6 * n1
    if D_target >= d_max - 1e-12 * n1:
        if D_target > d_max + tol_d:
            raise DistortionRangeError(
                f"D={D_target} exceeds the zero-rate distortion; achievable interval is ({d_min}, {d_max}]",
                d_min, d_max,
            )
        return zero
    if D_target <= d_min:
        raise DistortionRangeError(
            f"D={D_target} is not above E[min_y rho] = {d_min}; achievable interval is ({d_min}, {d_max}]",
            d_min, d_max,
        )
    cache: dict[float, RDPoint] = {}
    last = [None]

    def D_of_s(s):
        if s == 0.0:
            return d_max
        if s not in cache:
            pt = solve_fixed_point(model, rho, replace(cfg, s=s), nu_init=last[0])
            cache[s] = pt
            last[0] = pt.output_family
        return cache[s].D

    s_star = _invert(D_of_s, D_target, tol_d)
    D_of_s(s_star)
    pt = cache[s_star] if s_star in cache else zero
    if abs(pt.D - D_target) >= tol_d:
        raise DistortionRangeError(
            f"D={D_target} could not be matched (closest {pt.D} at s={s_star}); "
            f"the zero-rate distortion {d_max} may sit above the s<0 branch",
            d_min, d_max,
        )
    return pt


# -- classical (non-causal) baseline ------------------------------------------


def classical_rdf(
    mu: JointSourceMeasure,
    rho: DistortionMatrix,
    s: float,
    cfg: SolverConfig | None = None,
    output_init: np.ndarray | None = None,
) -> RDPoint:
    """Blahut-Arimoto on the block alphabets, without any causality restriction.

    ``output_init`` (a law on output blocks) warm-starts the iteration; the
    returned point's ``block_kernel`` gives the conditional ``Q(y^n | x^n)``.
    """
    cfg = cfg or SolverConfig()
    if s > 0:
        raise DomainError("s must be <= 0")
    n = mu.horizon
    if rho.nx != mu.nx:
        raise DomainError("distortion table does not match the source alphabet")
    check_capacity(n, mu.nx, rho.ny)
    p = mu.table.reshape(-1)
    d = rho.block_table(n).reshape(p.size, -1)
    ny_block = d.shape[1]
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
        if output_init is None:
            log_q = np.full(ny_block, -math.log(ny_block))
        else:
            log_q = np.log(np.asarray(output_init, dtype=float).reshape(ny_block))
    residual = math.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        logw = log_q + s * d
        log_z = logsumexp(logw, axis=1, keepdims=True)
        log_Q = logw - log_z
        new_log_q = logsumexp(log_p[:, None] + log_Q, axis=0)
        residual = float(np.max(np.abs(np.exp(new_log_q) - np.exp(log_q))))
        log_q = new_log_q
        if residual < cfg.tol or s == 0:
            residual = 0.0 if s == 0 else residual
            break
    logw = log_q + s * d
    log_z = logsumexp(logw, axis=1, keepdims=True)
    Q = np.exp(logw - log_z)
    joint = p[:, None] * Q
    D = float((joint * d).sum())
    q_y = joint.sum(axis=0)
    pos = joint > 0
    info = float((joint[pos] * (np.log(Q[pos]) - np.log(np.broadcast_to(q_y, Q.shape)[pos]))).sum())
    R = 0.0 if s == 0 else max(s * D - float(p[p > 0] @ log_z[p > 0, 0]), 0.0)
    return RDPoint(
        s=s, D=D, R=R, I=max(info, 0.0), horizon=n, kernel=None, output_family=None,
        iterations=it, converged=residual < cfg.tol, residual=residual, kind="classical",
        source=mu, rho=rho, block_kernel=Q,
    )


def classical_for_target_distortion(
    mu: JointSourceMeasure,
    rho: DistortionMatrix,
    D_target: float,
    cfg: SolverConfig | None = None,
) -> RDPoint:
    """Classical point at block distortion ``D_target`` (bisection on ``s``)."""
    cfg = cfg or SolverConfig()
    n1 = mu.horizon + 1
    marginals = [mu.table.sum(axis=tuple(a for a in range(n1) if a != i)) for i in range(n1)]
    d_min = minimum_distortion(marginals, rho)
    # zero-rate distortion of the classical problem: best constant block output
    d_block = rho.block_table(mu.horizon).reshape(mu.table.size, -1)
    d_max = float((mu.table.reshape(-1) @ d_block).min())
    if D_target >= d_max:
        return replace(classical_rdf(mu, rho, 0.0, cfg), D=d_max)
    if D_target <= d_min:
        raise DistortionRangeError(
            f"D={D_target} is not above E[min_y rho] = {d_min}", d_min, d_max
        )
    cache: dict[float, RDPoint] = {}
    p = mu.table.reshape(-1)
    warm = [None]

    def D_of_s(s):
        if s == 0.0:
            return d_max
        if s not in cache:
            pt = classical_rdf(mu, rho, s, cfg, output_init=warm[0])
            cache[s] = pt
            # keep every output block in the support so later tilts stay well posed
            warm[0] = np.maximum(p @ pt.block_kernel, 1e-300)
        return cache[s].D

    s_star = _invert(D_of_s, D_target, 1e-9 * n1)
    D_of_s(s_star)
    return cache[s_star]
