"""Finite-variation paths ``Y = Yᶜ + Σ ΔY`` on a grid, and built-in constructions."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .levy import merge_grid
from .measures import JumpMeasure, as_seed_sequence, sample_events


class FVSpecError(ValueError):
    pass


@dataclass(frozen=True)
class FVPath:
    """Grid representation of a finite-variation process.

    ``yc[i]`` is the continuous part at ``times[i]`` and ``jumps[i]`` the jump
    ``ΔY`` at that grid point.  With the convention ``Y_{0-} = 0`` a nonzero
    initial value is a jump at time 0, so ``yc[0] == 0``.  Arrays are ``(n,)``
    for scalar ``Y`` and ``(n, r)`` otherwise.
    """

    times: np.ndarray
    yc: np.ndarray
    jumps: np.ndarray

    def __post_init__(self):
        if self.yc.shape != self.jumps.shape or self.yc.shape[0] != len(self.times):
            raise ValueError("yc, jumps and times must be aligned")
        if np.any(self.yc[0] != 0):
            raise ValueError("continuous part must start at 0 (Y_{0-} = 0 convention)")

    @property
    def dim(self) -> int:
        return 1 if self.yc.ndim == 1 else self.yc.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self.yc + np.cumsum(self.jumps, axis=0)

    @property
    def pre_values(self) -> np.ndarray:
        return self.values - self.jumps

    def jump_list(self) -> list[tuple[float, Any]]:
        nz = np.any(self.jumps.reshape(len(self.times), -1) != 0, axis=1)
        return [(float(self.times[i]), self.jumps[i].copy() if self.jumps.ndim > 1 else float(self.jumps[i])) for i in np.flatnonzero(nz)]

    def total_variation(self) -> float:
        dyc = np.abs(np.diff(self.yc, axis=0)).sum()
        return float(dyc + np.abs(self.jumps).sum())

    def to_csv(self) -> str:
        if self.dim != 1:
            raise ValueError("CSV export supports scalar Y only")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "Yc", "cumulative_jumps", "Y"])
        cj = np.cumsum(self.jumps)
        for t, c, j, y in zip(self.times, self.yc, cj, self.values):
            w.writerow([f"{t:.17g}", f"{c:.17g}", f"{j:.17g}", f"{y:.17g}"])
        return buf.getvalue()


def decompose(path: FVPath):
    """``((times, Yᶜ), [(t, ΔY), ...])``; recomposition is exact."""
    return (path.times, path.yc.copy()), path.jump_list()


def zero_fv(times, dim: int = 1) -> FVPath:
    shape = (len(times),) if dim == 1 else (len(times), dim)
    return FVPath(np.asarray(times, dtype=float), np.zeros(shape), np.zeros(shape))


def reflection_regulator(times, values, pre_values=None) -> FVPath:
    """Skorokhod regulator ``Y_t = -min(0, inf_{s<=t} X_s)`` on the skeleton.

    Left limits are included in the infimum, so a downward jump that
    undershoots the running minimum produces a jump of ``Y``.
    """
    x = np.asarray(values, dtype=float)
    xp = x if pre_values is None else np.asarray(pre_values, dtype=float)
    if x[0] < 0:
        raise ValueError("reflection needs X_0 >= 0")
    run_min = np.minimum.accumulate(np.minimum(x, xp))
    y = np.maximum(0.0, -run_min)
    # Y_{t_i-}: infimum over [0, t_i), whose last value is the left limit X_{t_i-}
    prev_min = np.minimum(np.concatenate(([np.inf], run_min[:-1])), xp)
    y_pre = np.maximum(0.0, -prev_min)
    y_pre[0] = 0.0
    jumps = y - y_pre
    jumps[0] = y[0]
    dyc = np.concatenate(([0.0], y_pre[1:] - y[:-1]))
    yc = np.cumsum(dyc)
    return FVPath(np.asarray(times, dtype=float), yc, jumps)


# ---------------------------------------------------------------------------
# Built-in kinds
# ---------------------------------------------------------------------------

_KINDS = ("zero", "linear", "staircase", "compound_poisson", "table")


def _require(spec: Mapping, key: str, kind: str):
    if key not in spec:
        raise FVSpecError(f"fv kind '{kind}' requires field '{key}'")
    return spec[key]


def fv_event_times(spec: Mapping, horizon: float, seed=None) -> np.ndarray:
    """Jump epochs of the FV spec on ``(0, horizon]`` (to be merged into X grids)."""
    kind = spec.get("kind")
    if kind == "staircase":
        ep = np.asarray(_require(spec, "epochs", kind), dtype=float)
        return ep[(ep > 0) & (ep <= horizon)]
    if kind == "compound_poisson":
        ev = sample_events(_cp_measure(spec), horizon, _fv_seed(seed))
        return ev.times
    if kind == "table":
        jumps = spec.get("jumps", [])
        return np.asarray([j[0] for j in jumps], dtype=float)
    if kind in ("zero", "linear", None):
        return np.zeros(0)
    raise FVSpecError(f"unknown fv kind '{kind}'; expected one of {_KINDS}")


def _fv_seed(seed):
    return as_seed_sequence(0 if seed is None else seed)


def _cp_measure(spec) -> JumpMeasure:
    rate = float(_require(spec, "rate", "compound_poisson"))
    if rate <= 0:
        raise FVSpecError("compound_poisson rate must be positive")
    jd = spec.get("jump")
    if isinstance(jd, JumpMeasure):
        dist = jd
    elif jd is None or isinstance(jd, (int, float)):
        size = -0.5 if jd is None else float(jd)
        dist = JumpMeasure.atom(size, 1.0)
    else:
        from .config import build_measure

        dist = build_measure(jd, "fv.jump")
    return dist.scaled(rate / dist.total_mass)


def make_fv(spec: Mapping, grid, seed=None) -> FVPath:
    """Deterministic or seeded FV path of a built-in kind on ``grid``.

    Kinds: ``zero``; ``linear`` (``rate``); ``staircase`` (``size``,
    ``epochs``); ``compound_poisson`` (``rate``, ``jump``); ``table``
    (``times``/``values`` for a piecewise-linear continuous part and
    ``jumps`` as ``[[t, dy], ...]``).  Jump epochs are merged into ``grid``;
    use :func:`fv_event_times` to build the X grid first when the two must
    coincide.
    """
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise FVSpecError("fv spec must be a mapping with a 'kind' field")
    kind = spec["kind"]
    grid = np.asarray(grid, dtype=float)
    horizon = float(grid[-1])
    epochs = fv_event_times(spec, horizon, seed)
    times = merge_grid(grid, epochs)
    n = len(times)
    yc = np.zeros(n)
    jumps = np.zeros(n)
    if kind == "zero":
        pass
    elif kind == "linear":
        yc = float(_require(spec, "rate", kind)) * times
    elif kind == "staircase":
        size = np.broadcast_to(np.asarray(_require(spec, "size", kind), dtype=float), epochs.shape)
        np.add.at(jumps, np.searchsorted(times, epochs), size)
    elif kind == "compound_poisson":
        ev = sample_events(_cp_measure(spec), horizon, _fv_seed(seed))
        np.add.at(jumps, np.searchsorted(times, ev.times), ev.marks)
    elif kind == "table":
        tt = np.asarray(spec.get("times", [0.0, horizon]), dtype=float)
        vv = np.asarray(spec.get("values", [0.0, 0.0]), dtype=float)
        if tt.shape != vv.shape or np.any(np.diff(tt) <= 0):
            raise FVSpecError("table times must be increasing and match values")
        if vv[0] != 0.0 or tt[0] != 0.0:
            raise FVSpecError("table continuous part must start at (0, 0)")
        yc = np.interp(times, tt, vv)
        for t, dy in spec.get("jumps", []):
            jumps[np.searchsorted(times, t)] += float(dy)
    else:
        raise FVSpecError(f"unknown fv kind '{kind}'; expected one of {_KINDS}")
    return FVPath(times, yc, jumps)
