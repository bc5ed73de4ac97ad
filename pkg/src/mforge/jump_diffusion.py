"""Jump-diffusion SDEs driven by independent one-dimensional Poisson random
measures (one per axis kernel), drift conversion and kernel pushforwards."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .levy import merge_grid, regular_grid
from .measures import (
    JumpMeasure,
    NonFiniteIntegrandError,
    QuadratureError,
    as_seed_sequence,
    integrate,
    sample_events,
)


class CoefficientError(ValueError):
    pass


def _as_states(x, n: int) -> np.ndarray:
    """Points as an ``(N, n)`` float array."""
    a = np.asarray(x, dtype=float)
    if n == 1:
        return a.reshape(-1, 1)
    return np.atleast_2d(a).reshape(-1, n)


@dataclass(frozen=True)
class JDCoefficients:
    """Coefficients of ``dX = b(X)dt + σ(X)dW + Σ_j ∫ K^j(X_{t-}, z) Ñ_j/N_j(dt, dz)``.

    Callables are vectorised over leading axes:

    * ``b(x)``: ``(..., n) -> (..., n)``
    * ``sigma(x)``: ``(..., n) -> (..., n, k)``; ``None`` means no diffusion
    * each kernel ``K(x, z)``: ``x`` of shape ``(..., n)`` and ``z`` of shape
      ``(..., 1)``, result broadcastable to ``(..., n)``

    Small ``z`` (``|z| <= 1``) are compensated, as in the SDE.  ``lipschitz``
    is the declared constant, used only as metadata and by
    :func:`lipschitz_spot_check`.
    """

    dim: int
    b: Callable
    sigma: Callable | None = None
    kernels: tuple = ()
    noise_dim: int = 1
    lipschitz: float | None = None
    name: str = "jd"

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple((k, nu) for k, nu in self.kernels))
        for _, nu in self.kernels:
            if not isinstance(nu, JumpMeasure):
                raise CoefficientError("each kernel must be paired with a JumpMeasure")
        probe = np.zeros((1, self.dim))
        vals = [self.drift_at(probe), self.sigma_at(probe)]
        for kern, nu in self.kernels:
            z, _ = nu.rule()
            if z.size:
                vals.append(self.kernel_at(kern, probe, z[:1]))
        for v in vals:
            if not np.all(np.isfinite(v)):
                raise CoefficientError("coefficients are not finite at the probe point x = 0")

    def drift_at(self, X) -> np.ndarray:
        X = _as_states(X, self.dim)
        return np.broadcast_to(np.asarray(self.b(X), dtype=float), X.shape)

    def sigma_at(self, X) -> np.ndarray:
        X = _as_states(X, self.dim)
        shape = (len(X), self.dim, self.noise_dim)
        if self.sigma is None:
            return np.zeros(shape)
        return np.broadcast_to(np.asarray(self.sigma(X), dtype=float), shape)

    def kernel_at(self, kern, X, z) -> np.ndarray:
        """``K(x_n, z_q)`` for every point and node, shape ``(N, Q, n)``."""
        X = _as_states(X, self.dim)
        z = np.asarray(z, dtype=float)
        out = kern(X[:, None, :], z[None, :, None])
        return np.broadcast_to(np.asarray(out, dtype=float), (len(X), len(z), self.dim))

    def simulation_drift(self, X) -> np.ndarray:
        """``b(x) - Σ_j ∫_{|z|<=1} K^j(x, z) ν_j(dz)``: path slope when every
        jump is added uncompensated."""
        X = _as_states(X, self.dim)
        out = np.array(self.drift_at(X), dtype=float)
        for kern, nu in self.kernels:
            z, w = nu.rule()
            small = np.abs(z) <= 1.0
            if small.any():
                out -= np.einsum("nqi,q->ni", self.kernel_at(kern, X, z[small]), w[small])
        return out


def convert_drift(coeffs: JDCoefficients, x) -> np.ndarray:
    """Drift ``c`` of the representation compensating exactly the jumps with ``|K_i| <= 1``.

    ``c_i(x) = b_i(x) - Σ_j ∫_{|z|<=1} K^j_i 1{|K^j_i|>1} ν_j(dz)
    + Σ_j ∫_{|z|>1} K^j_i 1{|K^j_i|<=1} ν_j(dz)``.

    Returns ``(N, n)`` for an array of points, ``(n,)`` for a single point.
    """
    X = _as_states(x, coeffs.dim)
    out = np.array(coeffs.drift_at(X), dtype=float)
    for kern, nu in coeffs.kernels:
        z, w = nu.rule()
        if z.size == 0:
            continue
        K = coeffs.kernel_at(kern, X, z)
        zsmall = (np.abs(z) <= 1.0)[None, :, None]
        ksmall = np.abs(K) <= 1.0
        integrand = np.where(zsmall & ~ksmall, -K, 0.0) + np.where(~zsmall & ksmall, K, 0.0)
        out += np.einsum("nqi,q->ni", integrand, w)
    single = np.ndim(x) == 0 or (coeffs.dim > 1 and np.ndim(x) == 1)
    return out[0] if single else out


def pushforward_measure(coeffs: JDCoefficients, x, g: Callable):
    """``∫ g(w) μ(x, dw) = Σ_j ∫ g(K^j(x, z)) ν_j(dz)``.

    ``g`` receives the kernel values with shape ``(N, Q, n)`` and returns
    ``(N, Q)``; the result has shape ``(N,)``.
    """
    X = _as_states(x, coeffs.dim)
    out = 0.0
    for kern, nu in coeffs.kernels:
        z, w = nu.rule()
        if z.size == 0:
            continue
        out = out + np.asarray(g(coeffs.kernel_at(kern, X, z))) @ w
    return np.broadcast_to(out, (len(X),)) if np.ndim(out) == 0 else out


def pushforward_scalar(coeffs: JDCoefficients, x, g: Callable) -> float:
    """Single-point version with a scalar ``g(w)`` for ``n = 1`` or ``g(w_vector)``;
    adaptive quadrature, used as an oracle."""
    X = _as_states(x, coeffs.dim)[0]
    total = 0.0
    for kern, nu in coeffs.kernels:
        def h(z):
            k = np.asarray(kern(X, np.array([z])), dtype=float)
            k = np.broadcast_to(k, (coeffs.dim,))
            return g(float(k[0]) if coeffs.dim == 1 else k)

        total += integrate(nu, h)
    return total


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FinitenessReport:
    values: tuple  # ((kernel index, coordinate, value), ...)
    passed: bool

    def __str__(self):
        rows = ", ".join(f"K{j}[{i}]: {v:.6g}" for j, i, v in self.values)
        return f"small-jump square integrability [{'pass' if self.passed else 'FAIL'}]: {rows}"


def check_kernel_finiteness(coeffs: JDCoefficients, probe=None, cap: float = 1e12) -> FinitenessReport:
    """``∫_{|z|<=1} K^j_i(x, z)² ν_j(dz)`` at a probe point, per kernel and coordinate."""
    x = _as_states(np.zeros(coeffs.dim) if probe is None else probe, coeffs.dim)[0]
    rows = []
    ok = True
    for j, (kern, nu) in enumerate(coeffs.kernels):
        for i in range(coeffs.dim):
            def g(z, i=i):
                if abs(z) > 1.0:
                    return 0.0
                k = np.broadcast_to(np.asarray(kern(x, np.array([z])), dtype=float), (coeffs.dim,))
                return float(k[i]) ** 2

            try:
                with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                    v = float(integrate(nu, g))
            except (QuadratureError, NonFiniteIntegrandError, ZeroDivisionError):
                v = math.inf
            good = math.isfinite(v) and v <= cap
            ok = ok and good
            rows.append((j, i, v))
    return FinitenessReport(tuple(rows), ok)


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    declared: float | None
    n_pairs: int

    @property
    def consistent(self) -> bool:
        return self.declared is None or self.max_ratio <= self.declared * (1 + 1e-9)

    def __str__(self):
        return f"Lipschitz spot check: max observed ratio {self.max_ratio:.6g} vs declared {self.declared} over {self.n_pairs} pairs"


def lipschitz_spot_check(coeffs: JDCoefficients, n_pairs: int = 200, scale: float = 1.0, seed: int = 0) -> LipschitzReport:
    """Largest observed ``(|b(x1)-b(x2)|² + ‖σ(x1)-σ(x2)‖²)^{1/2} / |x1-x2|`` on random
    pairs.  Kernels enter through ``(∫ |K(x1,z)-K(x2,z)|² ν(dz))^{1/2}`` over
    the quadrature nodes of ``ν`` restricted to ``|z| <= 1``."""
    rng = np.random.default_rng(seed)
    x1 = rng.normal(scale=scale, size=(n_pairs, coeffs.dim))
    x2 = rng.normal(scale=scale, size=(n_pairs, coeffs.dim))
    num = np.sum((coeffs.drift_at(x1) - coeffs.drift_at(x2)) ** 2, axis=1)
    num += np.sum((coeffs.sigma_at(x1) - coeffs.sigma_at(x2)) ** 2, axis=(1, 2))
    for kern, nu in coeffs.kernels:
        z, w = nu.rule()
        small = np.abs(z) <= 1.0
        if small.any():
            d = coeffs.kernel_at(kern, x1, z[small]) - coeffs.kernel_at(kern, x2, z[small])
            num += np.einsum("nqi,q->n", d**2, w[small])
    den = np.linalg.norm(x1 - x2, axis=1)
    return LipschitzReport(float(np.max(np.sqrt(num) / den)), coeffs.lipschitz, n_pairs)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JDPath:
    """Skeleton of a jump-diffusion path; ``values`` are post-jump and
    ``pre_values`` the left limits.  Arrays are ``(L,)`` when ``n = 1``."""

    times: np.ndarray
    values: np.ndarray
    pre_values: np.ndarray
    event_times: tuple
    event_marks: tuple
    seed: object = None

    @property
    def is_jump(self) -> np.ndarray:
        d = (self.values != self.pre_values)
        return d if d.ndim == 1 else d.any(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        vals = self.values.reshape(len(self.times), -1)
        pre = self.pre_values.reshape(len(self.times), -1)
        n = vals.shape[1]
        names = ["X"] if n == 1 else [f"X{i + 1}" for i in range(n)]
        w.writerow(["time", *names, "is_jump", *[f"delta_{c}" for c in names]])
        for t, v, p in zip(self.times, vals, pre):
            d = v - p
            w.writerow([f"{t:.17g}", *(f"{a:.17g}" for a in v), int(np.any(d != 0)), *(f"{a:.17g}" for a in d)])
        return buf.getvalue()


def _path_events(coeffs: JDCoefficients, horizon: float, dt: float, seed, extra_times):
    ss = as_seed_sequence(seed)
    children = ss.spawn(1 + len(coeffs.kernels))
    streams = [sample_events(nu, horizon, c) for (_, nu), c in zip(coeffs.kernels, children[1:])]
    times = merge_grid(regular_grid(horizon, dt), *(s.times for s in streams), extra_times)
    dts = np.diff(times)
    rng = np.random.default_rng(children[0])
    normals = rng.standard_normal(len(dts)) if coeffs.noise_dim == 1 else rng.standard_normal((len(dts), coeffs.noise_dim))
    return times, dts, normals.reshape(len(dts), coeffs.noise_dim), streams


def simulate_jd_batch(
    coeffs: JDCoefficients,
    x0,
    horizon: float,
    dt: float,
    seeds: Sequence,
    extra_times=(),
    path_extra_times: Sequence | None = None,
) -> list[JDPath]:
    """Euler-Maruyama for several paths at once, vectorised by step index.

    Each path has its own grid (regular grid plus its jump epochs); shorter
    grids are padded with zero-length steps.  Between grid points
    ``ΔX = (b(X) - Σ_j ∫_{|z|<=1} K^j(X, z) ν_j(dz)) Δt + σ(X) ΔW`` and at an
    event ``(t, z)`` of stream ``j`` the state jumps by ``K^j(X_{t-}, z)``.
    Jump epochs and marks use the same seed construction as
    :func:`mforge.levy.simulate_levy_path`.  ``path_extra_times`` adds
    grid points per path (e.g. FV jump epochs).
    """
    n = coeffs.dim
    P = len(seeds)
    if path_extra_times is None:
        path_extra_times = [()] * P
    parts = [
        _path_events(coeffs, horizon, dt, s, np.concatenate((np.asarray(extra_times, dtype=float), np.asarray(e, dtype=float))))
        for s, e in zip(seeds, path_extra_times)
    ]
    L = max(len(p[0]) for p in parts)
    T = np.full((P, L), float(horizon))
    DT = np.zeros((P, L - 1))
    DW = np.zeros((P, L - 1, coeffs.noise_dim))
    marks = [np.full((P, L), np.nan) for _ in coeffs.kernels]
    for k, (times, dts, normals, streams) in enumerate(parts):
        T[k, : len(times)] = times
        DT[k, : len(dts)] = dts
        DW[k, : len(dts)] = normals * np.sqrt(dts)[:, None]
        for j, s in enumerate(streams):
            if len(s):
                marks[j][k, np.searchsorted(times, s.times)] = s.marks
    X = np.empty((P, L, n))
    Xpre = np.empty((P, L, n))
    X[:, 0] = np.broadcast_to(np.asarray(x0, dtype=float), (P, n))
    Xpre[:, 0] = X[:, 0]
    cur = X[:, 0].copy()
    has_sigma = coeffs.sigma is not None
    for l in range(L - 1):
        step = coeffs.simulation_drift(cur) * DT[:, l, None]
        if has_sigma:
            step = step + np.einsum("pik,pk->pi", coeffs.sigma_at(cur), DW[:, l])
        cur = cur + step
        Xpre[:, l + 1] = cur
        jump = np.zeros_like(cur)
        for (kern, _), mk in zip(coeffs.kernels, marks):
            hit = ~np.isnan(mk[:, l + 1])
            if hit.any():
                jump[hit] += coeffs.kernel_at(kern, cur[hit], mk[hit, l + 1])[:, 0, :]
        cur = cur + jump
        if not np.all(np.isfinite(cur)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(cur), axis=1))[0])
            raise CoefficientError(f"non-finite state at t={T[bad, l + 1]:.6g} from X={Xpre[bad, l]}")
        X[:, l + 1] = cur
    out = []
    for k, (times, _, _, streams) in enumerate(parts):
        m = len(times)
        v, p = X[k, :m], Xpre[k, :m]
        if n == 1:
            v, p = v[:, 0], p[:, 0]
        out.append(JDPath(times, v, p, tuple(s.times for s in streams), tuple(s.marks for s in streams), seeds[k]))
    return out


def simulate_jd_path(coeffs: JDCoefficients, x0, horizon: float, dt: float, seed, extra_times=()) -> JDPath:
    return simulate_jd_batch(coeffs, x0, horizon, dt, [seed], extra_times)[0]


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------


def linear_drift(a, d=0.0):
    """``b(x) = A x + d``."""
    A = np.atleast_2d(np.asarray(a, dtype=float))
    dd = np.asarray(d, dtype=float)
    return lambda x: x @ A.T + dd


def affine_sigma(s0, s1=0.0):
    """Diagonal ``σ(x) = diag(s0 + s1 x)`` (one noise per coordinate)."""
    a = np.asarray(s0, dtype=float)
    b = np.asarray(s1, dtype=float)
    return lambda x: (a + b * x)[..., :, None] * np.eye(x.shape[-1])


def additive_kernel(scale=1.0, axis: int | None = None, dim: int = 1):
    """``K(x, z) = scale · z`` (on one coordinate when ``axis`` is given)."""
    s = float(scale)
    if axis is None:
        return lambda x, z: s * z + 0.0 * x
    e = np.zeros(dim)
    e[axis] = 1.0
    return lambda x, z: s * z * e + 0.0 * x


def multiplicative_kernel(scale=1.0, axis: int | None = None, dim: int = 1):
    """``K(x, z) = scale · x z`` (coordinate-wise, or on one coordinate)."""
    s = float(scale)
    if axis is None:
        return lambda x, z: s * x * z
    e = np.zeros(dim)
    e[axis] = 1.0
    return lambda x, z: s * x * z * e
