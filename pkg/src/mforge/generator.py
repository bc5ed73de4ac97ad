"""Test functions and numerical evaluation of the operator 𝒜 for the three
process classes (Lévy, jump diffusion, Markov additive), plus the MAP matrix
exponent and Assumption-style bound checks.

All evaluators are vectorised: ``x`` and ``y`` are arrays of states (one per
grid point) and the jump integrals use the fixed quadrature rule of the
measure, so a whole path is processed with a handful of numpy calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .jump_diffusion import JDCoefficients, convert_drift, _as_states
from .levy import LevyTriplet, cumulant_exponent
from .map_process import MapParams
from .measures import MeasureError, integrate

TAYLOR_CUTOFF = 1e-6


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Closed rectangle ``B`` on which bounds are checked (``states`` for MAPs)."""

    x: tuple = (-1.0, 1.0)
    y: tuple = (0.0, 0.0)
    states: tuple | None = None


@dataclass(frozen=True)
class TestFunction:
    """A 𝒞^{2,1} function ``f(x, y)`` (or ``f(i, x, y)`` when ``modulated``).

    Callables must be vectorised: ``x`` is ``(N,)`` for scalar X and
    ``(N, n)`` otherwise, ``y`` likewise with ``r``; ``i`` is an integer
    array.  Missing partials are replaced by central differences with step
    ``h`` (``10 h`` for the second derivative).  Values may be complex.
    Closures must be pure so that evaluation is thread-safe.
    """

    __test__ = False

    f: Callable
    f_x: Callable | None = None
    f_xx: Callable | None = None
    f_y: Callable | None = None
    x_dim: int = 1
    y_dim: int = 1
    modulated: bool = False
    h: float = 1e-5
    domain: Box | None = None
    name: str = "f"

    # -- evaluation ---------------------------------------------------------
    def _call(self, fn, x, y, i):
        return fn(i, x, y) if self.modulated else fn(x, y)

    def value(self, x, y, i=None):
        return self._call(self.f, x, y, i)

    def dx(self, x, y, i=None):
        if self.f_x is not None:
            return self._call(self.f_x, x, y, i)
        return self._fd_first(self.f, x, y, i, self.h)

    def dxx(self, x, y, i=None):
        if self.f_xx is not None:
            return self._call(self.f_xx, x, y, i)
        h = 10.0 * self.h
        x = np.asarray(x, dtype=float)
        if self.x_dim == 1:
            return (self._call(self.f, x + h, y, i) - 2.0 * self._call(self.f, x, y, i) + self._call(self.f, x - h, y, i)) / (h * h)
        n = self.x_dim
        cols = []
        for a in range(n):
            row = []
            for b in range(n):
                ea = np.zeros(n)
                eb = np.zeros(n)
                ea[a] = h
                eb[b] = h
                v = (
                    self._call(self.f, x + ea + eb, y, i)
                    - self._call(self.f, x + ea - eb, y, i)
                    - self._call(self.f, x - ea + eb, y, i)
                    + self._call(self.f, x - ea - eb, y, i)
                ) / (4 * h * h)
                row.append(v)
            cols.append(np.stack(row, axis=-1))
        return np.stack(cols, axis=-2)

    def dy(self, x, y, i=None):
        if self.f_y is not None:
            return self._call(self.f_y, x, y, i)
        y = np.asarray(y, dtype=float)
        h = self.h
        if self.y_dim == 1:
            return (self._call(self.f, x, y + h, i) - self._call(self.f, x, y - h, i)) / (2 * h)
        out = []
        for a in range(self.y_dim):
            e = np.zeros(self.y_dim)
            e[a] = h
            out.append((self._call(self.f, x, y + e, i) - self._call(self.f, x, y - e, i)) / (2 * h))
        return np.stack(out, axis=-1)

    def _fd_first(self, fn, x, y, i, h):
        x = np.asarray(x, dtype=float)
        if self.x_dim == 1:
            return (self._call(fn, x + h, y, i) - self._call(fn, x - h, y, i)) / (2 * h)
        out = []
        for a in range(self.x_dim):
            e = np.zeros(self.x_dim)
            e[a] = h
            out.append((self._call(fn, x + e, y, i) - self._call(fn, x - e, y, i)) / (2 * h))
        return np.stack(out, axis=-1)

    # -- derived functions --------------------------------------------------
    def numeric(self) -> "TestFunction":
        """Same function with every partial replaced by finite differences."""
        return replace(self, f_x=None, f_xx=None, f_y=None, name=self.name + "[fd]")

    def part(self, which: str) -> "TestFunction":
        """Real or imaginary part as a real test function."""
        take = np.real if which == "real" else np.imag
        if which not in ("real", "imag"):
            raise ValueError("part must be 'real' or 'imag'")

        def wrap(fn):
            if fn is None:
                return None
            return lambda *a: take(fn(*a))

        return replace(
            self,
            f=wrap(self.f),
            f_x=wrap(self.f_x),
            f_xx=wrap(self.f_xx),
            f_y=wrap(self.f_y),
            name=f"{which}({self.name})",
        )

    def is_complex(self) -> bool:
        probe_x = np.zeros(1) if self.x_dim == 1 else np.zeros((1, self.x_dim))
        probe_y = np.zeros(1) if self.y_dim == 1 else np.zeros((1, self.y_dim))
        v = self.value(probe_x, probe_y, np.zeros(1, dtype=int) if self.modulated else None)
        return bool(np.iscomplexobj(v))

    def check_partials(self, points_x, points_y, states=None, rtol: float = 1e-4) -> float:
        """Largest relative gap between analytic and finite-difference partials."""
        num = self.numeric()
        worst = 0.0
        for a, b in ((self.dx, num.dx), (self.dxx, num.dxx), (self.dy, num.dy)):
            va = np.asarray(a(points_x, points_y, states))
            vb = np.asarray(b(points_x, points_y, states))
            scale = np.maximum(1.0, np.abs(va))
            worst = max(worst, float(np.max(np.abs(va - vb) / scale)))
        return worst


# -- built-in families -------------------------------------------------------


def exp_i_alpha(alpha: float) -> TestFunction:
    """``e^{iα(x+y)}``."""
    a = float(alpha)
    f = lambda x, y: np.exp(1j * a * (x + y))
    return TestFunction(
        f=f,
        f_x=lambda x, y: 1j * a * f(x, y),
        f_xx=lambda x, y: -a * a * f(x, y),
        f_y=lambda x, y: 1j * a * f(x, y),
        name=f"exp_i_alpha({a})",
    )


def exp_alpha(alpha: float) -> TestFunction:
    """``e^{α(x+y)}`` with real ``α``."""
    a = float(alpha)
    f = lambda x, y: np.exp(a * (x + y))
    return TestFunction(
        f=f,
        f_x=lambda x, y: a * f(x, y),
        f_xx=lambda x, y: a * a * f(x, y),
        f_y=lambda x, y: a * f(x, y),
        name=f"exp_alpha({a})",
    )


def exp_neg_alpha(alpha: float) -> TestFunction:
    """``e^{-α(x+y)}``."""
    return replace(exp_alpha(-float(alpha)), name=f"exp_neg_alpha({alpha})")


def sin_alpha(alpha: float) -> TestFunction:
    a = float(alpha)
    return TestFunction(
        f=lambda x, y: np.sin(a * (x + y)),
        f_x=lambda x, y: a * np.cos(a * (x + y)),
        f_xx=lambda x, y: -a * a * np.sin(a * (x + y)),
        f_y=lambda x, y: a * np.cos(a * (x + y)),
        name=f"sin_alpha({a})",
    )


def polynomial(coefficients: Sequence[Sequence[float]]) -> TestFunction:
    """``Σ_{j,k} a[j][k] x^j y^k``."""
    a = np.asarray(coefficients, dtype=float)
    if a.ndim != 2:
        raise ValueError("polynomial coefficients must be a 2-d table a[j][k]")
    P = np.polynomial.polynomial

    def f(x, y):
        return P.polyval2d(*np.broadcast_arrays(x, y), a)

    dx = P.polyder(a, axis=0)
    dxx = P.polyder(a, m=2, axis=0)
    dy = P.polyder(a, axis=1)

    def ev(c):
        if c.size == 0:
            return lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return lambda x, y: P.polyval2d(*np.broadcast_arrays(x, y), c)

    return TestFunction(f=f, f_x=ev(dx), f_xx=ev(dxx), f_y=ev(dy), name="polynomial")


def of_sum(g: Callable, g1: Callable | None = None, g2: Callable | None = None, name: str = "g(x+y)") -> TestFunction:
    """``f(x, y) = g(x + y)`` for a one-variable ``g``."""
    return TestFunction(
        f=lambda x, y: g(x + y),
        f_x=None if g1 is None else (lambda x, y: g1(x + y)),
        f_xx=None if g2 is None else (lambda x, y: g2(x + y)),
        f_y=None if g1 is None else (lambda x, y: g1(x + y)),
        name=name,
    )


def product(xi: Callable, eta: Callable, xi1=None, xi2=None, eta1=None, name: str = "xi*eta") -> TestFunction:
    """``f(x, y) = ξ(x) η(y)``."""
    return TestFunction(
        f=lambda x, y: xi(x) * eta(y),
        f_x=None if xi1 is None else (lambda x, y: xi1(x) * eta(y)),
        f_xx=None if xi2 is None else (lambda x, y: xi2(x) * eta(y)),
        f_y=None if eta1 is None else (lambda x, y: xi(x) * eta1(y)),
        name=name,
    )


def x_only(xi: Callable, xi1=None, xi2=None, name: str = "xi(x)") -> TestFunction:
    """``f(x, y) = ξ(x)``: Y-blind."""
    zero = lambda x, y: np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    return TestFunction(
        f=lambda x, y: xi(x) + 0.0 * np.asarray(y),
        f_x=None if xi1 is None else (lambda x, y: xi1(x) + 0.0 * np.asarray(y)),
        f_xx=None if xi2 is None else (lambda x, y: xi2(x) + 0.0 * np.asarray(y)),
        f_y=zero,
        name=name,
    )


def state_indicator(g: TestFunction, state: int) -> TestFunction:
    """``f(i, x, y) = g(x, y) 1{i = state}``."""
    k = int(state)

    def wrap(fn):
        if fn is None:
            return None
        return lambda i, x, y: fn(x, y) * (np.asarray(i) == k)

    return TestFunction(
        f=wrap(g.f),
        f_x=wrap(g.f_x),
        f_xx=wrap(g.f_xx),
        f_y=wrap(g.f_y),
        x_dim=g.x_dim,
        y_dim=g.y_dim,
        modulated=True,
        h=g.h,
        domain=g.domain,
        name=f"{g.name}*1[J={k}]",
    )


def state_blind(g: TestFunction) -> TestFunction:
    """``f(i, x, y) = g(x, y)``."""

    def wrap(fn):
        if fn is None:
            return None
        return lambda i, x, y: fn(x, y)

    return TestFunction(
        f=wrap(g.f), f_x=wrap(g.f_x), f_xx=wrap(g.f_xx), f_y=wrap(g.f_y),
        x_dim=g.x_dim, y_dim=g.y_dim, modulated=True, h=g.h, domain=g.domain, name=g.name,
    )


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _col(a, q: int):
    """Broadcast a per-point array against ``q`` quadrature nodes."""
    a = np.asarray(a)
    if a.ndim <= 1:
        return a.reshape(-1, 1) if a.ndim == 1 else a
    return a[:, None, ...]


def _levy_jump_integral(f: TestFunction, x, y, i, fx, fxx, z, w):
    """``Σ_k w_k (f(x+z_k, y) - f(x, y) - f_x z_k 1{|z_k|<=1})`` with a Taylor guard."""
    if z.size == 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    fv = f.value(x, y, i)
    small = np.abs(z) < TAYLOR_CUTOFF
    zz = z[~small]
    ww = w[~small]
    total = 0.0
    if zz.size:
        xs = x[:, None] + zz[None, :]
        ys = _col(y, zz.size)
        ii = None if i is None else np.asarray(i)[:, None]
        shifted = f.value(xs, ys, ii)
        comp = (np.abs(zz) <= 1.0) * zz
        integrand = shifted - fv[:, None] - np.asarray(fx)[:, None] * comp[None, :]
        total = integrand @ ww
    if small.any():
        total = total + 0.5 * np.asarray(fxx) * np.sum(w[small] * z[small] ** 2)
    return total


def _levy_sq_integral(f: TestFunction, x, y, i, z, w):
    if z.size == 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    fv = f.value(x, y, i)
    ii = None if i is None else np.asarray(i)[:, None]
    shifted = f.value(x[:, None] + z[None, :], _col(y, z.size), ii)
    return (np.abs(shifted - fv[:, None]) ** 2) @ w


def _const_like(x, v):
    return np.full(np.shape(x)[:1], v, dtype=float)


# ---------------------------------------------------------------------------
# Lévy
# ---------------------------------------------------------------------------


class LevyGenerator:
    """``𝒜f = c f_x + σ²/2 f_xx + ∫ (f(x+z,y) - f(x,y) - f_x z 1{|z|<=1}) ν(dz)``."""

    def __init__(self, triplet: LevyTriplet):
        self.triplet = triplet
        self.z, self.w = triplet.nu.rule()

    def apply(self, f: TestFunction, x, y, state=None):
        t = self.triplet
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        fx = f.dx(x, y, state)
        fxx = f.dxx(x, y, state)
        out = t.c * fx + 0.5 * t.sigma**2 * fxx
        return out + _levy_jump_integral(f, x, y, state, fx, fxx, self.z, self.w)

    def qv_integrand(self, f: TestFunction, x, y, state=None):
        """``σ² |f_x|² + ∫ |f(x+z,y) - f(x,y)|² ν(dz)``."""
        t = self.triplet
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = t.sigma**2 * np.abs(f.dx(x, y, state)) ** 2
        return out + _levy_sq_integral(f, x, y, state, self.z, self.w)

    def diffusion_bound(self, f, x, y, state=None):
        return self.triplet.sigma * np.abs(f.dx(x, y, state))

    def jump_bound(self, f, x, y, state=None):
        return _levy_sq_integral(f, np.atleast_1d(x), np.atleast_1d(y), state, self.z, self.w)


def apply_generator_levy(t: LevyTriplet, f: TestFunction, x, y):
    out = LevyGenerator(t).apply(f, x, y)
    return out if np.ndim(x) else out[0]


# ---------------------------------------------------------------------------
# Jump diffusion
# ---------------------------------------------------------------------------


class JDGenerator:
    """Generator of the (axes-concentrated) jump diffusion.

    ``c(x)ᵀ∇f + ½ tr(σσᵀ ∇²f) + Σ_j ∫ (f(x+K^j(x,z), y) - f(x,y)
    - Σ_i ∂_i f K^j_i 1{|K^j_i|<=1}) ν_j(dz)`` with ``c`` from
    :func:`convert_drift`.
    """

    def __init__(self, coeffs: JDCoefficients):
        self.coeffs = coeffs
        self.rules = [nu.rule() for _, nu in coeffs.kernels]

    def _prep(self, f, x, y):
        n = self.coeffs.dim
        X = _as_states(x, n)
        xf = X[:, 0] if n == 1 else X
        yy = np.atleast_1d(np.asarray(y, dtype=float))
        fx = np.asarray(f.dx(xf, yy))
        fx2 = fx.reshape(len(X), n)
        return X, xf, yy, fx, fx2

    def _shifted(self, f, X, yy, K):
        # X (N, n), K (N, Q, n)
        n = X.shape[1]
        xs = X[:, None, :] + K
        xs = xs[..., 0] if n == 1 else xs
        return f.value(xs, _col(yy, K.shape[1]))

    def apply(self, f: TestFunction, x, y):
        c = self.coeffs
        X, xf, yy, fx, fx2 = self._prep(f, x, y)
        drift = convert_drift(c, X)
        out = np.sum(drift * fx2, axis=-1)
        sig = c.sigma_at(X)  # (N, n, k)
        if np.any(sig != 0):
            fxx = np.asarray(f.dxx(xf, yy)).reshape(len(X), c.dim, c.dim)
            a = np.einsum("nik,njk->nij", sig, sig)
            out = out + 0.5 * np.einsum("nij,nij->n", a, fxx)
        fv = f.value(xf, yy)
        for (kern, _), (z, w) in zip(c.kernels, self.rules):
            if z.size == 0:
                continue
            K = c.kernel_at(kern, X, z)  # (N, Q, n)
            shifted = self._shifted(f, X, yy, K)
            comp = np.sum(fx2[:, None, :] * K * (np.abs(K) <= 1.0), axis=-1)
            out = out + (shifted - fv[:, None] - comp) @ w
        return out

    def apply_pushforward(self, f: TestFunction, x, y):
        """Same operator computed through ``∫ g(w) μ(x, dw)`` with
        ``g(w) = f(x+w,y) - f(x,y) - ∇fᵀ w 1{|w|<=1}``."""
        from .jump_diffusion import pushforward_measure

        c = self.coeffs
        X, xf, yy, fx, fx2 = self._prep(f, x, y)
        out = np.sum(convert_drift(c, X) * fx2, axis=-1)
        sig = c.sigma_at(X)
        if np.any(sig != 0):
            fxx = np.asarray(f.dxx(xf, yy)).reshape(len(X), c.dim, c.dim)
            out = out + 0.5 * np.einsum("nij,nij->n", np.einsum("nik,njk->nij", sig, sig), fxx)
        fv = f.value(xf, yy)

        def g(W):  # W (N, Q, n)
            xs = X[:, None, :] + W
            xs = xs[..., 0] if c.dim == 1 else xs
            return f.value(xs, _col(yy, W.shape[1])) - fv[:, None] - np.sum(fx2[:, None, :] * W * (np.abs(W) <= 1.0), axis=-1)

        return out + pushforward_measure(c, X, g)

    def qv_integrand(self, f: TestFunction, x, y, state=None):
        """``‖∇fᵀσ‖² + Σ_j ∫ |f(x+K^j(x,z),y) - f(x,y)|² ν_j(dz)``."""
        c = self.coeffs
        X, xf, yy, fx, fx2 = self._prep(f, x, y)
        sig = c.sigma_at(X)
        out = np.sum(np.abs(np.einsum("ni,nik->nk", fx2, sig)) ** 2, axis=-1)
        return out + self.jump_bound(f, x, y)

    def diffusion_bound(self, f, x, y, state=None):
        c = self.coeffs
        X, xf, yy, fx, fx2 = self._prep(f, x, y)
        return np.sqrt(np.sum(np.abs(np.einsum("ni,nik->nk", fx2, c.sigma_at(X))) ** 2, axis=-1))

    def jump_bound(self, f, x, y, state=None):
        c = self.coeffs
        X = _as_states(x, c.dim)
        xf = X[:, 0] if c.dim == 1 else X
        yy = np.atleast_1d(np.asarray(y, dtype=float))
        fv = f.value(xf, yy)
        out = np.zeros(len(X))
        for (kern, _), (z, w) in zip(c.kernels, self.rules):
            if z.size == 0:
                continue
            K = c.kernel_at(kern, X, z)
            out = out + (np.abs(self._shifted(f, X, yy, K) - fv[:, None]) ** 2) @ w
        return out


def apply_generator_jd(coeffs: JDCoefficients, f: TestFunction, x, y):
    return JDGenerator(coeffs).apply(f, x, y)


# ---------------------------------------------------------------------------
# Markov additive processes
# ---------------------------------------------------------------------------


class MapGenerator:
    """``𝒜f(i,x,y) = c_i f_x + σ_i²/2 f_xx + ∫(f(i,x+z,y) - f(i,x,y) - f_x z 1{|z|<=1})ν_i(dz)
    + Σ_j q_ij ∫ f(j, x+z, y) G_ij(dz)`` with ``G_ii = δ_0``."""

    def __init__(self, params: MapParams):
        self.params = params
        self.state_gens = [LevyGenerator(t) for t in params.triplets]
        self.g_rules = {(i, j): params.G[(i, j)].rule() for i in range(params.K) for j in range(params.K) if i != j}

    def _states(self, state, n):
        if state is None:
            raise GeneratorError("a modulating state is required for MAP generators")
        s = np.broadcast_to(np.asarray(state, dtype=int), (n,))
        return s

    def apply(self, f: TestFunction, x, y, state):
        if not f.modulated:
            f = state_blind(f)
        p = self.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self._states(state, len(x))
        out = np.zeros(len(x), dtype=complex if f.is_complex() else float)
        for i in range(p.K):
            sel = s == i
            if not sel.any():
                continue
            xi, yi = x[sel], y[sel]
            si = s[sel]
            out[sel] = self.state_gens[i].apply(f, xi, yi, si)
            for j in range(p.K):
                q = p.Q[i, j]
                if q == 0.0:
                    continue
                jj = np.full(si.shape, j)
                if i == j:
                    out[sel] += q * f.value(xi, yi, jj)
                else:
                    z, w = self.g_rules[(i, j)]
                    vals = f.value(xi[:, None] + z[None, :], _col(yi, z.size), jj[:, None])
                    out[sel] += q * (vals @ w)
        return out

    def f_operator(self, g: TestFunction, x, y):
        """Matrix-valued ``𝓕g(x,y) = diag(𝒜_i g) + Q ∘ ∫ g(x+z,y) G(dz)``, shape ``(N, K, K)``."""
        p = self.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        gv = g.value(x, y)
        out = np.zeros((len(x), p.K, p.K), dtype=np.result_type(gv, float))
        for i in range(p.K):
            out[:, i, i] = self.state_gens[i].apply(g, x, y) + p.Q[i, i] * gv
            for j in range(p.K):
                if i == j or p.Q[i, j] == 0.0:
                    continue
                z, w = self.g_rules[(i, j)]
                out[:, i, j] = p.Q[i, j] * (g.value(x[:, None] + z[None, :], _col(y, z.size)) @ w)
        return out

    def qv_integrand(self, f: TestFunction, x, y, state):
        """Embedding form: ``σ_i² f_x² + ∫(Δ_z f)² ν_i + Σ_{j≠i} q_ij ∫ (f(j,x+z,y) - f(i,x,y))² G_ij(dz)``."""
        if not f.modulated:
            f = state_blind(f)
        p = self.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self._states(state, len(x))
        out = np.zeros(len(x))
        for i in range(p.K):
            sel = s == i
            if not sel.any():
                continue
            xi, yi, si = x[sel], y[sel], s[sel]
            out[sel] = self.state_gens[i].qv_integrand(f, xi, yi, si)
            fv = f.value(xi, yi, si)
            for j in range(p.K):
                if i == j or p.Q[i, j] == 0.0:
                    continue
                z, w = self.g_rules[(i, j)]
                vals = f.value(xi[:, None] + z[None, :], _col(yi, z.size), np.full((len(xi), 1), j))
                out[sel] += p.Q[i, j] * ((np.abs(vals - fv[:, None]) ** 2) @ w)
        return out

    def diffusion_bound(self, f, x, y, state):
        if not f.modulated:
            f = state_blind(f)
        s = self._states(state, len(np.atleast_1d(x)))
        sig = np.array([t.sigma for t in self.params.triplets])[s]
        return sig * np.abs(f.dx(np.atleast_1d(x), np.atleast_1d(y), s))

    def jump_bound(self, f, x, y, state):
        if not f.modulated:
            f = state_blind(f)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self._states(state, len(x))
        out = np.zeros(len(x))
        for i in range(self.params.K):
            sel = s == i
            if sel.any():
                out[sel] = self.state_gens[i].jump_bound(f, x[sel], y[sel], s[sel])
        return out


def apply_generator_map(p: MapParams, f: TestFunction, i, x, y):
    out = MapGenerator(p).apply(f, x, y, i)
    return out if np.ndim(x) else out[0]


def map_exponent_matrix(p: MapParams, alpha: float) -> np.ndarray:
    """``F(α) = diag(ψ_1(α), …, ψ_K(α)) + Q ∘ Ĝ(α)`` with real exponents
    ``ψ_i(α) = log E e^{α X_1}`` under triplet ``i`` and ``Ĝ_ij(α) = ∫ e^{αz} G_ij(dz)``."""
    a = float(alpha)
    F = np.array(p.Q, dtype=float)
    for i in range(p.K):
        try:
            F[i, i] += cumulant_exponent(p.triplets[i], a)
        except MeasureError as exc:
            raise MeasureError(f"exponent of state {i} diverges at alpha={a}: {exc}") from exc
        for j in range(p.K):
            if i == j or p.Q[i, j] == 0.0:
                continue
            G = p.G[(i, j)]
            if (a > 0 and a >= G.right_rate) or (a < 0 and -a >= G.left_rate):
                raise MeasureError(f"transform of G[{i},{j}] diverges at alpha={a}")
            F[i, j] = p.Q[i, j] * float(integrate(G, lambda z: math.exp(a * z)))
    return F


# ---------------------------------------------------------------------------
# Assumption bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    sup_diffusion: float
    sup_jump: float
    cap: float
    n_probes: int
    passed: bool

    @property
    def C(self) -> float:
        """Upper bound on the predictable-QV density over the probes."""
        return self.sup_diffusion**2 + self.sup_jump

    def __str__(self):
        flag = "pass" if self.passed else "FAIL"
        return (
            f"assumption bounds [{flag}]: sup|σ f_x| = {self.sup_diffusion:.6g}, "
            f"sup ∫(Δf)² dν = {self.sup_jump:.6g} (cap {self.cap:.3g}, {self.n_probes} probes)"
        )


def _probe_points(B: Box, n_grid: int, n_random: int, seed: int, x_dim: int = 1):
    rng = np.random.default_rng(seed)
    xlo, xhi = B.x
    ylo, yhi = B.y
    gx = np.linspace(xlo, xhi, n_grid)
    gy = np.linspace(ylo, yhi, n_grid) if yhi > ylo else np.array([ylo])
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    xs = np.concatenate((X.ravel(), rng.uniform(xlo, xhi, n_random)))
    ys = np.concatenate((Y.ravel(), rng.uniform(ylo, yhi, n_random) if yhi > ylo else np.full(n_random, ylo)))
    if x_dim > 1:
        xs = np.repeat(xs[:, None], x_dim, axis=1)
    return xs, ys


def check_assumption_bounds(
    f: TestFunction,
    gen,
    B: Box | None = None,
    cap: float = 1e6,
    n_grid: int = 11,
    n_random: int = 200,
    seed: int = 0,
) -> BoundReport:
    """Sup over probes of ``B`` of the diffusion factor and the squared jump
    integral.  Never raises on unbounded growth: it is reported."""
    B = B or f.domain or Box()
    xs, ys = _probe_points(B, n_grid, n_random, seed, getattr(getattr(gen, "coeffs", None), "dim", 1))
    states = B.states
    if isinstance(gen, MapGenerator):
        states = states if states is not None else tuple(range(gen.params.K))
    sup_d = 0.0
    sup_j = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for s in (states if states is not None else (None,)):
            st = None if s is None else np.full(len(xs), s)
            d = np.asarray(gen.diffusion_bound(f, xs, ys, st), dtype=float)
            j = np.asarray(gen.jump_bound(f, xs, ys, st), dtype=float)
            sup_d = max(sup_d, float(np.max(np.where(np.isfinite(d), d, np.inf))))
            sup_j = max(sup_j, float(np.max(np.where(np.isfinite(j), j, np.inf))))
    ok = math.isfinite(sup_d) and math.isfinite(sup_j) and sup_d <= cap and sup_j <= cap
    return BoundReport(sup_d, sup_j, cap, len(xs) * (len(states) if states else 1), ok)
