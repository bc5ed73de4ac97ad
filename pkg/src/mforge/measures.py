"""Jump measures: atoms plus density components, quadrature and event sampling.

A :class:`JumpMeasure` stands for a Lévy measure (or, with
``allow_zero_atom=True``, a transition-jump distribution).  Two integration
routes are provided:

* :func:`integrate` -- adaptive Gauss-Kronrod (QUADPACK) per component, used
  for scalar quantities such as exponents and drift conversions.
* :meth:`JumpMeasure.rule` -- a fixed node/weight rule used to evaluate
  integrals at many states at once (generators along whole paths).

The two routes are independent and are cross-checked in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _spi

SeedLike = "int | np.random.SeedSequence"

DEFAULT_EPSABS = 1e-10
DEFAULT_EPSREL = 1e-8

# Gauss-Legendre reference nodes per panel for the fixed rules.
_GL_NODES = 12
_TAIL_TOL = 1e-17


class MeasureError(ValueError):
    """Structurally invalid measure or an operation the measure cannot support."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NonFiniteIntegrandError(ValueError):
    """The integrand returned a non-finite value at some jump size."""

    def __init__(self, z, value):
        super().__init__(f"integrand is not finite at z={z!r} (value {value!r})")
        self.z = z
        self.value = value


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Normalise an int or SeedSequence into a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawn() is stateful and reuse must reproduce the same children
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence(int(seed))


def path_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Seed of the ``index``-th path of a Monte Carlo run started from ``seed``.

    Equal to ``SeedSequence(seed).spawn(n)[index]`` without materialising the
    whole spawn list.
    """
    return np.random.SeedSequence(int(seed), spawn_key=(int(index),))


def _gl(a: float, b: float, n: int = _GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def _panels_rule(edges: np.ndarray, n: int = _GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    z = (half[:, None] * x + (0.5 * (a + b))[:, None]).ravel()
    wt = (half[:, None] * w).ravel()
    return z, wt


def _split_edges(lo: float, hi: float, breaks: Sequence[float]) -> list[float]:
    inner = sorted({b for b in breaks if lo < b < hi})
    return [lo, *inner, hi]


# ---------------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    location: float
    mass: float


class DensityComponent:
    """Absolutely continuous part of a measure.

    Subclasses provide ``support`` (an open interval, possibly infinite),
    ``mass`` (total mass, possibly ``inf`` for infinite activity),
    :meth:`density` scaled so that it integrates to ``mass``, an inverse CDF
    :meth:`ppf` of the normalised law and :meth:`rule`.
    """

    name = "density"
    support: tuple[float, float]
    mass: float

    def density(self, z):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def rule(self, breaks: Sequence[float] = ()):
        """Fixed quadrature nodes and weights (weights include the density)."""
        lo, hi = self.support
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo = lo if math.isfinite(lo) else float(self.ppf(1e-15))
            hi = hi if math.isfinite(hi) else float(self.ppf(1.0 - 1e-15))
        edges = []
        pieces = _split_edges(lo, hi, breaks)
        for a, b in zip(pieces[:-1], pieces[1:]):
            edges.extend(np.linspace(a, b, 9)[:-1])
        edges.append(pieces[-1])
        z, w = _panels_rule(np.asarray(edges))
        return z, w * self.density(z)

    # exponential-moment abscissas: E e^{a Z} finite for left_rate > -a, a < right_rate
    right_rate = math.inf
    left_rate = math.inf

    def describe(self) -> str:
        return f"{self.name}(support={self.support}, mass={self.mass})"


@dataclass(frozen=True)
class ExponentialDensity(DensityComponent):
    """``mass * rate * exp(-rate (|z| - lower))`` on ``|z| > lower`` on one side.

    ``side=+1`` puts the support on ``(lower, inf)``, ``side=-1`` on
    ``(-inf, -lower)``.
    """

    rate: float
    mass: float = 1.0
    lower: float = 0.0
    side: int = 1
    name = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise MeasureError(f"exponential rate must be positive, got {self.rate}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise MeasureError(f"exponential mass must be positive and finite, got {self.mass}")
        if self.lower < 0:
            raise MeasureError("exponential lower cut must be nonnegative")
        if self.side not in (1, -1):
            raise MeasureError("side must be +1 or -1")

    @property
    def support(self):
        if self.side > 0:
            return (self.lower, math.inf)
        return (-math.inf, -self.lower)

    @property
    def right_rate(self):
        return self.rate if self.side > 0 else math.inf

    @property
    def left_rate(self):
        return self.rate if self.side < 0 else math.inf

    def density(self, z):
        z = np.asarray(z, dtype=float)
        u = self.side * z - self.lower
        return np.where(u > 0, self.mass * self.rate * np.exp(-self.rate * np.maximum(u, 0.0)), 0.0)

    def ppf(self, u):
        return self.side * (self.lower - np.log1p(-np.asarray(u)) / self.rate)

    def rule(self, breaks: Sequence[float] = ()):
        # work on |z|, then mirror
        mags = sorted({self.side * b for b in breaks if self.side * b > self.lower})
        edges = [self.lower]
        for m in mags:
            edges.append(m)
        start = edges[-1]
        h = 1.0 / self.rate
        while math.exp(-self.rate * (edges[-1] - start)) > _TAIL_TOL:
            edges.append(edges[-1] + h)
            h *= 1.25
        u, w = _panels_rule(np.asarray(edges, dtype=float))
        w = w * self.mass * self.rate * np.exp(-self.rate * (u - self.lower))
        return self.side * u, w


@dataclass(frozen=True)
class UniformDensity(DensityComponent):
    a: float
    b: float
    mass: float = 1.0
    name = "uniform"

    def __post_init__(self):
        if not (self.b > self.a):
            raise MeasureError("uniform density needs a < b")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise MeasureError("uniform mass must be positive and finite")

    @property
    def support(self):
        return (self.a, self.b)

    def density(self, z):
        z = np.asarray(z, dtype=float)
        inside = (z > self.a) & (z < self.b)
        return np.where(inside, self.mass / (self.b - self.a), 0.0)

    def ppf(self, u):
        return self.a + (self.b - self.a) * np.asarray(u)

    def rule(self, breaks: Sequence[float] = ()):
        pieces = _split_edges(self.a, self.b, breaks)
        z, w = _panels_rule(np.asarray(pieces, dtype=float))
        return z, w * self.mass / (self.b - self.a)


@dataclass(frozen=True)
class PowerLawDensity(DensityComponent):
    """Stable-like density ``coef * |z|**(-1 - index)`` on ``lower < |z| <= upper``.

    With ``lower == 0`` and ``index >= 0`` the total mass is infinite: the
    measure can still be integrated (exponents, generators) but cannot be
    sampled until it is truncated with ``lower > 0``.
    """

    coef: float
    index: float
    lower: float
    upper: float
    side: int = 1
    name = "power_law"

    def __post_init__(self):
        if not (0 <= self.lower < self.upper and math.isfinite(self.upper)):
            raise MeasureError("power_law needs 0 <= lower < upper < inf")
        if not (self.coef > 0):
            raise MeasureError("power_law coefficient must be positive")
        if not (self.index < 2):
            raise MeasureError("power_law index must be < 2 for a Lévy measure")
        if self.side not in (1, -1):
            raise MeasureError("side must be +1 or -1")

    @property
    def support(self):
        if self.side > 0:
            return (self.lower, self.upper)
        return (-self.upper, -self.lower)

    @cached_property
    def mass(self):
        a, lo, hi = self.index, self.lower, self.upper
        if lo == 0 and a >= 0:
            return math.inf
        if a == 0:
            return self.coef * math.log(hi / lo)
        return self.coef * (lo ** (-a) - hi ** (-a)) / a

    def density(self, z):
        z = np.asarray(z, dtype=float)
        u = self.side * z
        inside = (u > self.lower) & (u <= self.upper)
        safe = np.where(inside, u, 1.0)
        return np.where(inside, self.coef * safe ** (-1.0 - self.index), 0.0)

    def ppf(self, u):
        if not math.isfinite(self.mass):
            raise MeasureError("infinite-activity component cannot be sampled; truncate with lower > 0")
        u = np.asarray(u)
        a, lo, hi = self.index, self.lower, self.upper
        if a == 0:
            mag = lo * (hi / lo) ** u
        else:
            mag = (lo ** (-a) - u * (lo ** (-a) - hi ** (-a))) ** (-1.0 / a)
        return self.side * mag

    def rule(self, breaks: Sequence[float] = ()):
        lo, hi = self.lower, self.upper
        mags = sorted({self.side * b for b in breaks if lo < self.side * b < hi})
        pieces = [lo, *mags, hi]
        edges = [hi]
        for a, b in zip(pieces[:-1], pieces[1:]):
            edges.append(a)
            if a == 0:
                # geometric grading towards the singular end
                edges.extend(b * 0.5 ** np.arange(1, 60))
        e = np.unique(np.asarray(edges, dtype=float))
        u, w = _panels_rule(e)
        w = w * self.coef * u ** (-1.0 - self.index)
        return self.side * u, w


@dataclass(frozen=True)
class GenericDensity(DensityComponent):
    """User-supplied density (library API only).

    ``density`` must integrate to ``mass`` over ``support`` and ``ppf`` is
    the inverse CDF of the normalised law.
    """

    support: tuple[float, float]
    density_fn: Callable
    mass: float
    ppf_fn: Callable
    name: str = "generic"

    def __post_init__(self):
        lo, hi = self.support
        if not hi > lo:
            raise MeasureError("generic density support must be a nonempty interval")
        if not (self.mass > 0):
            raise MeasureError("generic density mass must be positive")

    def density(self, z):
        z = np.asarray(z, dtype=float)
        lo, hi = self.support
        inside = (z > lo) & (z < hi)
        out = np.zeros_like(z)
        out[inside] = self.density_fn(z[inside])
        return out if out.ndim else float(out)

    def ppf(self, u):
        return self.ppf_fn(np.asarray(u))


# ---------------------------------------------------------------------------
# Measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventStream:
    """Marked Poisson events on ``(0, horizon]``."""

    times: np.ndarray
    marks: np.ndarray
    horizon: float
    seed: object = None

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class JumpMeasure:
    """Atoms plus density components, immutable.

    ``epsilon`` records the small-jump cutoff used to build the measure:
    density components must stay at distance ``>= epsilon`` from 0.
    """

    atoms: tuple[Atom, ...] = ()
    densities: tuple[DensityComponent, ...] = ()
    epsilon: float = 0.0
    allow_zero_atom: bool = False

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(Atom(float(a.location), float(a.mass)) for a in self.atoms))
        object.__setattr__(self, "densities", tuple(self.densities))
        if self.epsilon < 0:
            raise MeasureError("epsilon must be nonnegative")
        for a in self.atoms:
            if not (a.mass > 0 and math.isfinite(a.mass)):
                raise MeasureError(f"atom at {a.location} has invalid mass {a.mass}")
            if not math.isfinite(a.location):
                raise MeasureError("atom location must be finite")
            if a.location == 0.0 and not self.allow_zero_atom:
                raise MeasureError("a Lévy measure cannot charge 0 (atom at z=0)")
        for d in self.densities:
            if not isinstance(d, DensityComponent):
                raise MeasureError(f"not a density component: {d!r}")
            lo, hi = d.support
            if self.epsilon > 0 and lo < self.epsilon and hi > -self.epsilon:
                raise MeasureError(f"{d.describe()} reaches inside the cutoff |z| < {self.epsilon}")
            if lo < 0 < hi:
                raise MeasureError(f"{d.describe()} straddles 0; split it into one-sided components")

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls) -> "JumpMeasure":
        return cls()

    @classmethod
    def atom(cls, location: float, mass: float = 1.0, **kw) -> "JumpMeasure":
        return cls(atoms=(Atom(location, mass),), **kw)

    @classmethod
    def dirac(cls, location: float = 0.0) -> "JumpMeasure":
        """Probability measure concentrated at ``location`` (may be 0)."""
        return cls(atoms=(Atom(location, 1.0),), allow_zero_atom=True)

    def scaled(self, factor: float) -> "JumpMeasure":
        if factor <= 0:
            raise MeasureError("scale factor must be positive")
        dens = []
        for d in self.densities:
            if isinstance(d, (ExponentialDensity, UniformDensity)):
                dens.append(_replace_mass(d, d.mass * factor))
            elif isinstance(d, PowerLawDensity):
                dens.append(PowerLawDensity(d.coef * factor, d.index, d.lower, d.upper, d.side))
            else:
                dens.append(GenericDensity(d.support, lambda z, d=d: factor * d.density(z), d.mass * factor, d.ppf))
        return JumpMeasure(tuple(Atom(a.location, a.mass * factor) for a in self.atoms), tuple(dens), self.epsilon, self.allow_zero_atom)

    # -- basic properties ---------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.atoms and not self.densities

    @cached_property
    def total_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms) + sum(d.mass for d in self.densities))

    @property
    def components(self):
        return (*self.atoms, *self.densities)

    @property
    def min_support(self) -> float:
        los = [a.location for a in self.atoms] + [d.support[0] for d in self.densities]
        return min(los) if los else 0.0

    @property
    def max_support(self) -> float:
        his = [a.location for a in self.atoms] + [d.support[1] for d in self.densities]
        return max(his) if his else 0.0

    @property
    def right_rate(self) -> float:
        rates = [d.right_rate for d in self.densities]
        return min(rates) if rates else math.inf

    @property
    def left_rate(self) -> float:
        rates = [d.left_rate for d in self.densities]
        return min(rates) if rates else math.inf

    def breakpoints(self) -> tuple[float, ...]:
        pts = {-1.0, 1.0}
        if self.epsilon > 0:
            pts |= {-self.epsilon, self.epsilon}
        return tuple(sorted(pts))

    @cached_property
    def _rule(self):
        zs, ws = [], []
        if self.atoms:
            zs.append(np.array([a.location for a in self.atoms]))
            ws.append(np.array([a.mass for a in self.atoms]))
        for d in self.densities:
            z, w = d.rule(self.breakpoints())
            keep = w > 0
            zs.append(np.asarray(z, dtype=float)[keep])
            ws.append(np.asarray(w, dtype=float)[keep])
        if not zs:
            return np.zeros(0), np.zeros(0)
        z, w = np.concatenate(zs), np.concatenate(ws)
        z.setflags(write=False)
        w.setflags(write=False)
        return z, w

    def rule(self):
        """Fixed nodes ``z`` and weights ``w`` with ``sum(w g(z)) ~ ∫ g dν``.

        Atoms are exact nodes; each density contributes composite
        Gauss-Legendre panels split at ``±1`` and ``±epsilon``.
        """
        return self._rule

    def truncation_drift(self, **kw) -> float:
        """``∫_{ε<|z|<=1} z ν(dz)``: drift that compensates the small jumps."""
        return float(integrate(self, lambda z: z if abs(z) <= 1.0 else 0.0, **kw).real)


def _replace_mass(d, mass):
    from dataclasses import replace

    return replace(d, mass=mass)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _quad_component(d: DensityComponent, g, breaks, epsabs, epsrel, is_complex):
    lo, hi = d.support
    pieces = _split_edges(lo, hi, breaks)
    total = 0.0 + 0.0j if is_complex else 0.0

    def integrand(z):
        val = g(z)
        if not np.isfinite(val):
            raise NonFiniteIntegrandError(z, val)
        return val * float(d.density(z))

    for a, b in zip(pieces[:-1], pieces[1:]):
        kw = dict(epsabs=epsabs, epsrel=epsrel, limit=200, full_output=1)
        if is_complex:
            kw["complex_func"] = True
        res = _spi.quad(integrand, a, b, **kw)
        if is_complex:
            val = res[0]
            infos = res[2]
            msgs = [infos.get("real"), infos.get("imag")]
            errs = [m for m in msgs if isinstance(m, tuple) and len(m) > 3]
            if errs:
                raise QuadratureError(f"quadrature did not converge on {d.describe()} over ({a}, {b}): {errs[0][1]}")
        else:
            val = res[0]
            if len(res) > 3:
                raise QuadratureError(f"quadrature did not converge on {d.describe()} over ({a}, {b}): {res[3]}")
        total += val
    return total


def integrate(m: JumpMeasure, g: Callable, epsabs: float = DEFAULT_EPSABS, epsrel: float = DEFAULT_EPSREL):
    """``Σ g(z_k) m_k + Σ ∫ g(z) density(z) dz`` with adaptive Gauss-Kronrod.

    ``g`` is called with scalar floats and may return complex values, in
    which case real and imaginary parts are integrated separately.
    """
    atom_vals = []
    for a in m.atoms:
        v = g(a.location)
        if not np.isfinite(v):
            raise NonFiniteIntegrandError(a.location, v)
        atom_vals.append(v * a.mass)
    probe = None
    if m.densities:
        lo, hi = m.densities[0].support
        mid = 0.5 * (lo + hi) if math.isfinite(lo + hi) else (lo + 1.0 if math.isfinite(lo) else hi - 1.0)
        probe = g(mid)
    is_complex = any(np.iscomplexobj(v) or isinstance(v, complex) for v in atom_vals) or (
        probe is not None and (np.iscomplexobj(probe) or isinstance(probe, complex))
    )
    total = complex(sum(atom_vals)) if is_complex else float(sum(atom_vals))
    for d in m.densities:
        total += _quad_component(d, g, m.breakpoints(), epsabs, epsrel, is_complex)
    return total


def check_levy_measure(m: JumpMeasure, **kw) -> tuple[float, bool]:
    """Numerical value of ``∫ (z² ∧ 1) ν(dz)`` and whether it is finite."""
    value = float(integrate(m, lambda z: min(z * z, 1.0), **kw))
    return value, bool(math.isfinite(value))


def sample_events(m: JumpMeasure, horizon: float, seed) -> EventStream:
    """Poisson random measure with mean measure ``ν(dz) dt`` on ``(0, horizon]``.

    The seed is split into a count/time substream and a mark substream, so
    the same seed always reproduces the same stream.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ss = as_seed_sequence(seed)
    count_ss, mark_ss = ss.spawn(2)
    if m.is_zero:
        return EventStream(np.zeros(0), np.zeros(0), float(horizon), seed)
    lam = m.total_mass
    if not math.isfinite(lam):
        raise MeasureError(
            "measure has infinite total mass; truncate small jumps (epsilon > 0, components away from 0) before sampling"
        )
    rng_c = np.random.default_rng(count_ss)
    rng_m = np.random.default_rng(mark_ss)
    n = int(rng_c.poisson(lam * horizon))
    times = np.sort(rng_c.uniform(0.0, horizon, size=n))
    if n == 0:
        return EventStream(times, np.zeros(0), float(horizon), seed)
    comps = m.components
    masses = np.array([c.mass for c in comps], dtype=float)
    which = rng_m.choice(len(comps), size=n, p=masses / masses.sum()) if len(comps) > 1 else np.zeros(n, dtype=int)
    u = rng_m.uniform(size=n)
    marks = np.empty(n)
    for k, c in enumerate(comps):
        sel = which == k
        if not sel.any():
            continue
        if isinstance(c, Atom):
            marks[sel] = c.location
        else:
            marks[sel] = c.ppf(u[sel])
    return EventStream(times, marks, float(horizon), seed)
