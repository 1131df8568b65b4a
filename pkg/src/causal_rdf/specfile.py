"""Problem-spec files: a TOML document describing source, distortion and solver settings.

See ``docs/formats.md`` for the grammar. Example::

    horizon = 2

    [alphabet]
    x = 2
    y = 2

    [source]
    kind = "markov1"
    initial = [0.5, 0.5]
    transition = [[0.8, 0.2], [0.2, 0.8]]

    [distortion]
    preset = "hamming"

    [solver]
    s_grid = "0:-5:0.25"
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .distortion import PRESETS, DistortionMatrix
from .errors import CapacityError, DomainError, SpecError, SpecParseError
from .source import SourceModel, check_capacity

ROW_TOL = 1e-9
S_FLOOR = -50.0


@dataclass(frozen=True)
class ProblemSpec:
    source: SourceModel
    distortion: DistortionMatrix
    ny: int
    tol: float | None = None
    max_iter: int | None = None
    s: float | None = None
    s_grid: tuple[float, ...] | None = None
    s_grid_text: str | None = None
    target_D: float | None = None

    @property
    def horizon(self) -> int:
        return self.source.horizon

    @property
    def nx(self) -> int:
        return self.source.nx


def parse_s_grid(text) -> tuple[float, ...]:
    """``"start:stop:step"`` (inclusive, descending) or a comma list of values."""
    if isinstance(text, (list, tuple)):
        values = [float(v) for v in text]
    else:
        text = str(text).strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise SpecError(f"s grid {text!r} must look like start:stop:step", field="solver.s_grid")
            start, stop, step = (float(p) for p in parts)
            step = abs(step)
            if step == 0 or stop > start:
                raise SpecError(f"s grid {text!r} must descend with a nonzero step", field="solver.s_grid")
            count = int(round((start - stop) / step)) + 1
            values = [start - k * step for k in range(count)]
            values = [0.0 if abs(v) < 1e-12 else v for v in values]
        else:
            values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise SpecError("s grid is empty", field="solver.s_grid")
    for v in values:
        check_multiplier(v, "solver.s_grid")
    return tuple(values)


def check_multiplier(s: float, field: str = "s") -> float:
    s = float(s)
    if not S_FLOOR <= s <= 0:
        raise SpecError(f"{field}: multiplier {s} must lie in [{S_FLOOR}, 0]", field=field)
    return s


def _line_of(text: str, section: str | None, key: str) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return lineno
    return None


def _rows(value, field: str, width: int, text: str, section: str, key: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SpecParseError(f"{field}: expected a numeric table", field=field, line=_line_of(text, section, key))
    line = _line_of(text, section, key)
    if arr.ndim == 0 or arr.shape[-1] != width:
        raise SpecError(f"{field}: rows must have {width} entries", field=field, line=line)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise SpecError(f"{field}: probabilities must be finite and nonnegative", field=field, line=line)
    sums = arr.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        name = field + "".join(f"[{i}]" for i in idx)
        where = f" (line {line})" if line else ""
        raise SpecError(f"{name} sums to {sums[idx]:.12g}, not 1{where}", field=name, line=line)
    return arr / sums[..., None]


def _require(table: dict, key: str, section: str, text: str):
    if key not in table:
        raise SpecError(f"missing required field {section + '.' if section else ''}{key}", field=key)
    return table[key]


def parse_spec(text: str) -> ProblemSpec:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise SpecParseError(f"parse error: {exc}", line=int(m.group(1)) if m else None) from exc

    try:
        horizon = int(_require(doc, "horizon", "", text))
        alpha = _require(doc, "alphabet", "", text)
        nx = int(_require(alpha, "x", "alphabet", text))
        ny = int(alpha.get("y", nx))
        if horizon < 0 or nx < 1 or ny < 1:
            raise SpecError("horizon must be >= 0 and alphabet sizes >= 1", field="alphabet")
        check_capacity(horizon, nx, ny)

        src = _require(doc, "source", "", text)
        kind = _require(src, "kind", "source", text)
        if kind == "memoryless":
            probs = _rows(_require(src, "probs", "source", text), "source.probs", nx, text, "source", "probs")
            if probs.shape != (nx,):
                raise SpecError("source.probs must be a single row", field="source.probs")
            model = SourceModel.memoryless(probs, horizon)
        elif kind == "markov1":
            init = _rows(_require(src, "initial", "source", text), "source.initial", nx, text, "source", "initial")
            trans = _rows(_require(src, "transition", "source", text), "source.transition", nx, text, "source", "transition")
            if init.shape != (nx,) or trans.shape != (nx, nx):
                raise SpecError(f"markov1 needs initial[{nx}] and transition[{nx}][{nx}]", field="source")
            model = SourceModel.markov1(init, trans, horizon)
        elif kind == "general":
            raw = _require(src, "stages", "source", text)
            if len(raw) != horizon + 1:
                raise SpecError(f"source.stages needs {horizon + 1} tables", field="source.stages")
            stages = []
            for i, t in enumerate(raw):
                arr = _rows(t, f"source.stages[{i}]", nx, text, "source", "stages")
                if arr.shape != (nx,) * (i + 1):
                    raise SpecError(f"source.stages[{i}] must have shape {(nx,) * (i + 1)}", field=f"source.stages[{i}]")
                stages.append(arr)
            model = SourceModel.general(stages)
        else:
            raise SpecError(f"source.kind must be memoryless, markov1 or general, not {kind!r}",
                            field="source.kind", line=_line_of(text, "source", "kind"))

        dist = _require(doc, "distortion", "", text)
        if "matrix" in dist:
            rho = DistortionMatrix(np.asarray(dist["matrix"], dtype=float))
        else:
            preset = _require(dist, "preset", "distortion", text)
            if preset not in PRESETS:
                raise SpecError(f"distortion.preset must be one of {PRESETS}", field="distortion.preset",
                                line=_line_of(text, "distortion", "preset"))
            if preset == "hamming":
                rho = DistortionMatrix.hamming(nx, ny)
            else:
                lx = _require(dist, "levels_x", "distortion", text)
                rho = DistortionMatrix.squared_error(lx, dist.get("levels_y"))
        if rho.rho.shape != (nx, ny):
            raise SpecError(f"distortion table is {rho.rho.shape}, expected ({nx}, {ny})", field="distortion")

        solver = doc.get("solver", {})
        s = check_multiplier(solver["s"], "solver.s") if "s" in solver else None
        grid_text = solver.get("s_grid")
        grid = parse_s_grid(grid_text) if grid_text is not None else None
        target = float(solver["target_D"]) if "target_D" in solver else None
        return ProblemSpec(
            source=model,
            distortion=rho,
            ny=ny,
            tol=float(solver["tol"]) if "tol" in solver else None,
            max_iter=int(solver["max_iter"]) if "max_iter" in solver else None,
            s=s,
            s_grid=grid,
            s_grid_text=grid_text if isinstance(grid_text, str) else None,
            target_D=target,
        )
    except (CapacityError, SpecError):
        raise
    except DomainError as exc:
        raise SpecError(str(exc)) from exc
    except (TypeError, ValueError, KeyError) as exc:
        raise SpecParseError(f"invalid value: {exc}") from exc


def load_spec(path) -> ProblemSpec:
    return parse_spec(Path(path).read_text())


def spec_to_dict(spec: ProblemSpec) -> dict:
    m = spec.source
    doc: dict = {"horizon": m.horizon, "alphabet": {"x": m.nx, "y": spec.ny}}
    if m.kind == "memoryless":
        doc["source"] = {"kind": "memoryless", "probs": m.probs.tolist()}
    elif m.kind == "markov1":
        doc["source"] = {"kind": "markov1", "initial": m.initial.tolist(), "transition": m.transition.tolist()}
    else:
        doc["source"] = {"kind": "general", "stages": [t.tolist() for t in m.stages]}
    rho = spec.distortion
    if rho.preset == "hamming":
        doc["distortion"] = {"preset": "hamming"}
    elif rho.preset == "squared_error":
        doc["distortion"] = {"preset": "squared_error", "levels_x": list(rho.levels_x), "levels_y": list(rho.levels_y)}
    else:
        doc["distortion"] = {"matrix": rho.rho.tolist()}
    solver = {}
    for key in ("tol", "max_iter", "s", "target_D"):
        val = getattr(spec, key)
        if val is not None:
            solver[key] = val
    if spec.s_grid is not None:
        solver["s_grid"] = spec.s_grid_text if spec.s_grid_text else list(spec.s_grid)
    if solver:
        doc["solver"] = solver
    return doc


def dump_spec(spec: ProblemSpec) -> str:
    return tomli_w.dumps(spec_to_dict(spec))
