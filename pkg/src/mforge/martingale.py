"""Pathwise assembly of the generator martingale of ``f(X, Y)``, its
exponential special cases and quadratic variations.

Discretisation on a grid ``t_0 < … < t_L`` with post-jump values ``X_k`` and
left limits ``X_{k-}``:

* time integrals use the trapezoid ``Σ (𝒜f(X_k, Y_k) + 𝒜f(X_{(k+1)-}, Y_{(k+1)-})) Δt_k / 2``
  under rule ``"midpoint"`` and the left endpoint under rule ``"right"``;
  the trapezoid removes the O(Δt) drift that a left sum picks up along the
  linear stretches of a path, which matters over long horizons;
* ``∫ ∇_y f dYᶜ`` over ``(t_k, t_{k+1})`` is taken in closed form as
  ``f(X*, Y_k + ΔYᶜ_k) - f(X*, Y_k)`` with ``X`` frozen at
  ``X* = (X_k + X_{(k+1)-}) / 2`` (rule ``"midpoint"``) or at ``X_{k+1}``
  (rule ``"right"``); both are exact when ``f`` does not depend on ``x``;
* the jump correction ``f(X_s, Y_s) - f(X_s, Y_{s-})`` is summed exactly
  over grid points ``s > 0``, with post-jump ``X_s`` in both terms.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fv import FVPath, reflection_regulator, zero_fv
from .generator import MapGenerator, TestFunction, map_exponent_matrix, x_only
from .levy import LevyTriplet, laplace_exponent, levy_exponent
from .map_process import MapParams

CHUNK = 20000
RULES = ("midpoint", "right")


class PathMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class CoupledPath:
    """``X`` (optionally modulated by ``J``) and an FV path ``Y`` on one grid."""

    times: np.ndarray
    x: np.ndarray
    x_pre: np.ndarray
    y: FVPath
    j: np.ndarray | None = None
    j_pre: np.ndarray | None = None
    seed: object = None
    _yv: np.ndarray = field(init=False, repr=False, compare=False)
    _yp: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        L = len(self.times)
        if not np.array_equal(self.y.times, self.times):
            raise PathMismatchError("X and Y grids differ; simulate X with the FV epochs as extra times")
        if self.x.shape[0] != L or self.x_pre.shape != self.x.shape:
            raise PathMismatchError("X values, left limits and grid are misaligned")
        if (self.j is None) != (self.j_pre is None):
            raise PathMismatchError("J and its left limits must be given together")
        if self.j is not None and (len(self.j) != L or len(self.j_pre) != L):
            raise PathMismatchError("J path and grid are misaligned")
        object.__setattr__(self, "_yv", self.y.values)
        object.__setattr__(self, "_yp", self.y.pre_values)

    @classmethod
    def couple(cls, xpath, y: FVPath | None = None) -> "CoupledPath":
        """Pair a simulated X path (Lévy, JD or MAP) with ``Y`` (default ``Y ≡ 0``)."""
        y = zero_fv(xpath.times) if y is None else y
        j = getattr(xpath, "states", None)
        jp = getattr(xpath, "pre_states", None)
        return cls(xpath.times, xpath.values, xpath.pre_values, y, j, jp, getattr(xpath, "seed", None))

    @classmethod
    def reflected(cls, xpath) -> "CoupledPath":
        """``Y`` is the Skorokhod regulator of ``X`` so that ``Z = X + Y >= 0``."""
        return cls.couple(xpath, reflection_regulator(xpath.times, xpath.values, xpath.pre_values))

    @property
    def y_values(self) -> np.ndarray:
        return self._yv

    @property
    def y_pre(self) -> np.ndarray:
        return self._yp

    @property
    def z(self) -> np.ndarray:
        return self.x + self.y_values

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.x.ndim > 1 or self.y.dim > 1:
            raise ValueError("CSV export supports scalar X and Y only")
        head = ["time", "X"] + (["J"] if self.j is not None else []) + ["Y", "Yc", "is_jump"]
        w.writerow(head)
        jump = (self.x != self.x_pre) | (self.y.jumps != 0)
        for k, t in enumerate(self.times):
            row = [f"{t:.17g}", f"{self.x[k]:.17g}"]
            if self.j is not None:
                row.append(int(self.j[k]))
            row += [f"{self._yv[k]:.17g}", f"{self.y.yc[k]:.17g}", int(jump[k])]
            w.writerow(row)
        return buf.getvalue()


@dataclass(frozen=True)
class MartingalePath:
    """``M = terminal + generator + stieltjes + jumpsum`` on the grid.

    The four terms are stored with their signs, e.g. ``generator`` holds
    ``-∫𝒜f ds``.  Arrays are ``(L,)`` (real or complex) or ``(L, K)``.
    """

    times: np.ndarray
    terminal: np.ndarray
    generator: np.ndarray
    stieltjes: np.ndarray
    jumpsum: np.ndarray
    values: np.ndarray = field(init=False)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", self.terminal + self.generator + self.stieltjes + self.jumpsum)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def at(self, t: float):
        k = np.searchsorted(self.times, t, side="right") - 1
        return self.values[k]

    def __neg__(self) -> "MartingalePath":
        return MartingalePath(self.times, -self.terminal, -self.generator, -self.stieltjes, -self.jumpsum, label=f"-{self.label}")

    def to_csv(self, predictable=None, realized=None) -> str:
        if self.values.ndim > 1:
            raise ValueError("CSV export supports scalar martingales only")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cplx = self.is_complex
        head = ["time", "M_re"] + (["M_im"] if cplx else []) + ["term_terminal", "term_generator", "term_stieltjes", "term_jumpsum"]
        head += (["predictable_qv"] if predictable is not None else []) + (["realized_qv"] if realized is not None else [])
        w.writerow(head)
        fmt = lambda v: f"{v.real:.17g}" if not cplx else f"{v.real:.17g}{v.imag:+.17g}j"
        for k, t in enumerate(self.times):
            m = self.values[k]
            row = [f"{t:.17g}", f"{np.real(m):.17g}"] + ([f"{np.imag(m):.17g}"] if cplx else [])
            row += [fmt(self.terminal[k]), fmt(self.generator[k]), fmt(self.stieltjes[k]), fmt(self.jumpsum[k])]
            if predictable is not None:
                row.append(f"{predictable[k]:.17g}")
            if realized is not None:
                row.append(f"{realized[k]:.17g}")
            w.writerow(row)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# shared discretisation
# ---------------------------------------------------------------------------


def _cum(incr):
    """Cumulative sum of per-step increments with a leading zero."""
    z = np.zeros((1,) + incr.shape[1:], dtype=incr.dtype)
    return np.concatenate((z, np.cumsum(incr, axis=0)))


def _frozen_x(path: CoupledPath, rule: str):
    if rule == "midpoint":
        return 0.5 * (path.x[:-1] + path.x_pre[1:])
    if rule == "right":
        return path.x[1:]
    raise ValueError(f"unknown Stieltjes rule '{rule}'; expected one of {RULES}")


def _frozen_j(path: CoupledPath, rule: str):
    if path.j is None:
        return None
    return path.j[:-1] if rule == "midpoint" else path.j[1:]


def _check_rule(rule: str):
    if rule not in RULES:
        raise ValueError(f"unknown Stieltjes rule '{rule}'; expected one of {RULES}")


def _jump_mask(path: CoupledPath, with_j: bool) -> np.ndarray:
    """Grid points whose left limit differs from the value (index 0 never)."""
    dx = path.x != path.x_pre
    m = dx.reshape(len(path.times), -1).any(axis=1)
    dy = path.y_values != path.y_pre
    m |= dy.reshape(len(path.times), -1).any(axis=1)
    if with_j and path.j is not None:
        m |= path.j != path.j_pre
    m[0] = False
    return m


def _integrand_pre(a, path: CoupledPath, evalf, with_j: bool):
    """Integrand at left limits: equal to ``a`` except at jump points."""
    pre = a.copy()
    idx = np.flatnonzero(_jump_mask(path, with_j))
    if idx.size:
        jp = path.j_pre[idx] if with_j and path.j is not None else None
        pre[idx] = evalf(path.x_pre[idx], path.y_pre[idx], jp)
    return pre


def _time_increments(a, pre, dt, rule: str):
    """Per-step ``∫ a ds`` increments; ``a``/``pre`` hold all ``L`` grid points."""
    w = dt.reshape((-1,) + (1,) * (np.ndim(a) - 1))
    if rule == "right":
        return a[:-1] * w
    return 0.5 * (a[:-1] + pre[1:]) * w


def _chunked(fn, n: int, *arrays):
    if n <= CHUNK:
        return fn(*arrays)
    parts = []
    for s in range(0, n, CHUNK):
        parts.append(fn(*(None if a is None else a[s : s + CHUNK] for a in arrays)))
    return np.concatenate(parts)


def _apply(gen, f, x, y, j):
    if j is None:
        return np.asarray(gen.apply(f, x, y))
    return np.asarray(gen.apply(f, x, y, j))


def assemble_martingale(path: CoupledPath, f: TestFunction, gen, rule: str = "midpoint") -> MartingalePath:
    """``M_t = f(X_t,Y_t) - f(X_0,Y_0) - ∫𝒜f ds - ∫∇_y f dYᶜ - Σ (f(X_s,Y_s) - f(X_s,Y_{s-}))``.

    ``gen`` is a generator object (:class:`~mforge.generator.LevyGenerator`,
    ``JDGenerator`` or ``MapGenerator``); for MAP paths ``f`` may be
    modulated and is evaluated at the post-jump state ``J_s``.
    """
    if path.j is not None and isinstance(gen, MapGenerator) and not f.modulated:
        from .generator import state_blind

        f = state_blind(f)
    j = path.j if f.modulated else None
    if f.modulated and j is None:
        raise PathMismatchError("a modulated test function needs a path with J")
    _check_rule(rule)
    x, y, yp, dt = path.x, path.y_values, path.y_pre, np.diff(path.times)
    fv = f.value(x, y, j)
    term = fv - fv[0]
    evalf = lambda xx, yy, jj: _chunked(lambda a1, a2, a3: _apply(gen, f, a1, a2, a3), len(xx), xx, yy, jj)
    a = evalf(x, y, j)
    pre = a if rule == "right" else _integrand_pre(a, path, evalf, j is not None)
    gen_term = -_cum(_time_increments(a, pre, dt, rule))
    xs = _frozen_x(path, rule)
    js = _frozen_j(path, rule) if f.modulated else None
    st = -_cum(f.value(xs, yp[1:], js) - f.value(xs, y[:-1], js))
    jmp = fv[1:] - f.value(x[1:], yp[1:], None if j is None else j[1:])
    jmp_term = -_cum(jmp)
    return MartingalePath(path.times, term, gen_term, st, jmp_term, label=f.name)


def assemble_batch(paths: Sequence[CoupledPath], f: TestFunction, gen, rule: str = "midpoint") -> list[MartingalePath]:
    """:func:`assemble_martingale` for many paths with one generator evaluation
    over the concatenated grid points."""
    if not paths:
        return []
    lens = np.array([len(p.times) for p in paths])
    ends = np.cumsum(lens)
    starts = ends - lens
    modulated = f.modulated
    if paths[0].j is not None and isinstance(gen, MapGenerator) and not modulated:
        from .generator import state_blind

        f = state_blind(f)
        modulated = True
    _check_rule(rule)
    evalf = lambda xx, yy, jj: _chunked(lambda a1, a2, a3: _apply(gen, f, a1, a2, a3), len(xx), xx, yy, jj)
    X = np.concatenate([p.x for p in paths])
    Y = np.concatenate([p.y_values for p in paths])
    J = np.concatenate([p.j for p in paths]) if modulated else None
    A = evalf(X, Y, J)
    PRE = A
    if rule != "right":
        mask = np.concatenate([_jump_mask(p, modulated) for p in paths])
        idx = np.flatnonzero(mask)
        PRE = A.copy()
        if idx.size:
            Xp = np.concatenate([p.x_pre for p in paths])[idx]
            Yp = np.concatenate([p.y_pre for p in paths])[idx]
            Jp = np.concatenate([p.j_pre for p in paths])[idx] if modulated else None
            PRE[idx] = evalf(Xp, Yp, Jp)
    out = []
    for p, s0, e0 in zip(paths, starts, ends):
        ak = _time_increments(A[s0:e0], PRE[s0:e0], np.diff(p.times), rule)
        j = p.j if modulated else None
        x, y, yp = p.x, p.y_values, p.y_pre
        fv = f.value(x, y, j)
        xs = _frozen_x(p, rule)
        js = _frozen_j(p, rule) if modulated else None
        st = -_cum(f.value(xs, yp[1:], js) - f.value(xs, y[:-1], js))
        jmp = -_cum(fv[1:] - f.value(x[1:], yp[1:], None if j is None else j[1:]))
        out.append(MartingalePath(p.times, fv - fv[0], -_cum(ak), st, jmp, label=f.name))
    return out


# ---------------------------------------------------------------------------
# closed-form special cases
# ---------------------------------------------------------------------------


def _exp_terms(path: CoupledPath, coef: complex, rule: str):
    """Pieces of ``e^{coef Z}`` martingales with ``Z = X + Y`` (scalar)."""
    x, y, yp, dt = path.x, path.y_values, path.y_pre, np.diff(path.times)
    ez = np.exp(coef * (x + y))
    xs = _frozen_x(path, rule)
    pre = _integrand_pre(ez, path, lambda xx, yy, _j: np.exp(coef * (xx + yy)), False)
    integral = _cum(_time_increments(ez, pre, dt, rule))
    stieltjes = _cum(np.exp(coef * xs) * (np.exp(coef * yp[1:]) - np.exp(coef * y[:-1])))
    jumps = _cum(ez[1:] * (1.0 - np.exp(-coef * (y[1:] - yp[1:]))))
    return ez, integral, stieltjes, jumps


def kella_whitt_martingale(t: LevyTriplet, alpha: float, path: CoupledPath, rule: str = "midpoint") -> MartingalePath:
    """``ψ(α)∫e^{iαZ}ds + e^{iαZ_0} - e^{iαZ_t} + iα∫e^{iαZ}dYᶜ + Σ e^{iαZ_s}(1 - e^{-iαΔY_s})``.

    This is the negative of :func:`assemble_martingale` for
    ``f = e^{iα(x+y)}``.  ``iα∫e^{iαZ}dYᶜ`` is discretised by the same
    per-segment closed form.
    """
    a = float(alpha)
    psi = levy_exponent(t, a)
    ez, integral, st, jumps = _exp_terms(path, 1j * a, rule)
    return MartingalePath(path.times, ez[0] - ez, psi * integral, st, jumps, label=f"kella_whitt({a})")


def laplace_kw_martingale(t: LevyTriplet, alpha: float, path: CoupledPath, rule: str = "midpoint") -> MartingalePath:
    """``φ(α)∫e^{-αZ}ds + e^{-αZ_0} - e^{-αZ_t} - α∫e^{-αZ}dYᶜ + Σ e^{-αZ_s}(1 - e^{αΔY_s})``.

    Requires a spectrally positive triplet and ``Z >= 0`` on the path.
    """
    a = float(alpha)
    if not a > 0:
        raise ValueError("alpha must be positive")
    phi = laplace_exponent(t, a)
    if np.any(path.z < -1e-12) or np.any(path.x_pre + path.y_pre < -1e-12):
        raise ValueError("Z = X + Y takes negative values on this path")
    ez, integral, st, jumps = _exp_terms(path, -a, rule)
    return MartingalePath(path.times, ez[0] - ez, phi * integral, st, jumps, label=f"laplace_kw({a})")


# ---------------------------------------------------------------------------
# Markov additive vector martingale
# ---------------------------------------------------------------------------


def map_vector_martingale(
    p: MapParams,
    g: TestFunction,
    path: CoupledPath,
    alpha: float | None = None,
    rule: str = "midpoint",
) -> MartingalePath:
    """``g(X_t,Y_t)𝟏_{J_t} - g(X_0,Y_0)𝟏_{J_0} - ∫𝟏_{J_s}ᵀ𝓕g ds - ∫ g_y 𝟏_{J_s} dYᶜ
    - Σ (g(X_s,Y_s) - g(X_s,Y_{s-}))𝟏_{J_s}`` as an ``(L, K)`` array.

    With ``alpha`` given, ``g`` must be ``e^{α(x+y)}`` and ``𝓕g = F(α) g`` is
    used in place of quadrature.
    """
    if path.j is None:
        raise PathMismatchError("map_vector_martingale needs a path with J")
    K = p.K
    x, y, yp, dt, j = path.x, path.y_values, path.y_pre, np.diff(path.times), path.j
    E = np.eye(K)
    gv = g.value(x, y)
    term = gv[:, None] * E[j] - gv[0] * E[j[0]]
    _check_rule(rule)
    if alpha is not None:
        F = map_exponent_matrix(p, alpha)
        evalf = lambda xx, yy, jj: F[jj] * g.value(xx, yy)[:, None]
    else:
        gen = MapGenerator(p)

        def evalf(xx, yy, jj):
            Fg = _chunked(lambda a1, a2: gen.f_operator(g, a1, a2), len(xx), xx, yy)
            return Fg[np.arange(len(xx)), jj]

    rows = evalf(x, y, j)
    pre = rows if rule == "right" else _integrand_pre(rows, path, evalf, True)
    gen_term = -_cum(_time_increments(rows, pre, dt, rule))
    xs = _frozen_x(path, rule)
    js = _frozen_j(path, rule)
    st = -_cum((g.value(xs, yp[1:]) - g.value(xs, y[:-1]))[:, None] * E[js])
    jmp = -_cum((gv[1:] - g.value(x[1:], yp[1:]))[:, None] * E[j[1:]])
    return MartingalePath(path.times, term, gen_term, st, jmp, label=f"map_vector({g.name})")


# ---------------------------------------------------------------------------
# quadratic variation
# ---------------------------------------------------------------------------


def qv_density(path: CoupledPath, f: TestFunction, gen) -> np.ndarray:
    """Predictable-QV integrand at the left endpoint of every step."""
    j = path.j if (f.modulated or isinstance(gen, MapGenerator)) else None
    x, y = path.x[:-1], path.y_values[:-1]
    jj = None if j is None else j[:-1]
    if jj is None:
        return _chunked(lambda a, b, c: np.asarray(gen.qv_integrand(f, a, b)), len(x), x, y, None)
    return _chunked(lambda a, b, c: np.asarray(gen.qv_integrand(f, a, b, c)), len(x), x, y, jj)


def predictable_qv(path: CoupledPath, f: TestFunction, gen) -> np.ndarray:
    """``∫_0^t (σ²|f_x|² + ∫|f(X_s+z,Y_s) - f(X_s,Y_s)|² ν(dz)) ds`` (with the
    JD and MAP analogues supplied by ``gen``), left-endpoint rule."""
    return _cum(qv_density(path, f, gen) * np.diff(path.times))


def realized_qv(m: MartingalePath) -> np.ndarray:
    """``Σ |ΔM|²`` along the grid (per coordinate for vector martingales)."""
    return _cum(np.abs(np.diff(m.values, axis=0)) ** 2)


# ---------------------------------------------------------------------------
# product form
# ---------------------------------------------------------------------------


def product_form_martingale(xi: TestFunction, eta, path: CoupledPath, gen) -> MartingalePath:
    """``∫_{(0,t]} η(Y_{s-}) dM^ξ_s`` on the grid, with ``M^ξ`` the martingale of
    the Y-blind ``ξ`` and ``η(Y_{s-})`` frozen at the left grid point.

    Coincides with :func:`assemble_martingale` for ``f = ξη`` and rule
    ``"right"``.  ``xi`` may be a :class:`TestFunction` or a callable
    ``ξ(x)`` (then finite differences supply the derivatives).
    """
    if not isinstance(xi, TestFunction):
        xi = x_only(xi)
    mxi = assemble_martingale(path, xi, gen, rule="right")
    w = np.asarray(eta(path.y_values[:-1]))
    d = lambda a: _cum(w * np.diff(a))
    return MartingalePath(path.times, d(mxi.terminal), d(mxi.generator), d(mxi.stieltjes), d(mxi.jumpsum), label=f"product({xi.name})")


def predictable_qv_batch(paths: Sequence[CoupledPath], f: TestFunction, gen) -> list[np.ndarray]:
    """:func:`predictable_qv` for many paths with one integrand evaluation."""
    if not paths:
        return []
    use_j = f.modulated or isinstance(gen, MapGenerator)
    lens = np.array([len(p.times) - 1 for p in paths])
    X = np.concatenate([p.x[:-1] for p in paths])
    Y = np.concatenate([p.y_values[:-1] for p in paths])
    J = np.concatenate([p.j[:-1] for p in paths]) if use_j else None
    if J is None:
        dens = _chunked(lambda a, b, c: np.asarray(gen.qv_integrand(f, a, b)), len(X), X, Y, None)
    else:
        dens = _chunked(lambda a, b, c: np.asarray(gen.qv_integrand(f, a, b, c)), len(X), X, Y, J)
    out = []
    pos = 0
    for p, n in zip(paths, lens):
        out.append(_cum(dens[pos : pos + n] * np.diff(p.times)))
        pos += n
    return out
