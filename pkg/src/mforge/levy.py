"""Lévy triplets, their exponents, and path simulation via the Lévy-Itô split."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .measures import (
    JumpMeasure,
    MeasureError,
    as_seed_sequence,
    check_levy_measure,
    integrate,
    sample_events,
)


class NotSpectrallyPositiveError(MeasureError):
    pass


class MomentError(MeasureError):
    pass


@dataclass(frozen=True)
class LevyTriplet:
    """Drift ``c``, Gaussian coefficient ``sigma`` and Lévy measure ``nu``.

    ``c`` is the drift of the compensated (truncation-at-1) representation,
    so ``X_t = c t + sigma W_t + big jumps + compensated small jumps``.
    """

    c: float
    sigma: float = 0.0
    nu: JumpMeasure = field(default_factory=JumpMeasure)
    _comp: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.nu.allow_zero_atom:
            raise MeasureError("a Lévy measure cannot charge 0")
        if not self.nu.is_zero:
            _, ok = check_levy_measure(self.nu)
            if not ok:
                raise MeasureError("∫(z²∧1)ν(dz) is not finite")
            object.__setattr__(self, "_comp", float(self.nu.truncation_drift()))

    @classmethod
    def from_net_drift(cls, net_drift: float, sigma: float = 0.0, nu: JumpMeasure | None = None) -> "LevyTriplet":
        """Build a triplet whose paths drift at ``net_drift`` between jumps.

        The compensator ``∫_{|z|<=1} z ν(dz)`` of the small jumps is added back
        into ``c``; e.g. the M/M/1 net input (unit service, upward jumps) has
        ``net_drift = -1``.
        """
        nu = nu if nu is not None else JumpMeasure()
        comp = nu.truncation_drift() if not nu.is_zero else 0.0
        return cls(net_drift + comp, sigma, nu)

    @property
    def spectrally_positive(self) -> bool:
        return self.nu.is_zero or self.nu.min_support >= 0

    def compensator(self) -> float:
        """``∫_{|z|<=1} z ν(dz)`` (computed once at construction)."""
        return self._comp

    def net_drift(self) -> float:
        """Slope of the path between jumps (all jumps added uncompensated)."""
        return self.c - self.compensator()


def levy_exponent(t: LevyTriplet, alpha) -> complex:
    """``ψ(α) = icα - σ²α²/2 + ∫(e^{iαz} - 1 - iαz 1{|z|<=1}) ν(dz)``.

    ``alpha`` may be complex; ``levy_exponent(t, 1j*a)`` is the Laplace
    exponent when it exists.
    """
    alpha = complex(alpha)
    val = 1j * t.c * alpha - 0.5 * t.sigma**2 * alpha**2
    if not t.nu.is_zero:
        val += integrate(t.nu, lambda z: np.exp(1j * alpha * z) - 1.0 - 1j * alpha * z * (abs(z) <= 1.0))
    return complex(val)


def _check_mgf(t: LevyTriplet, a: float):
    if a > 0 and a >= t.nu.right_rate:
        raise MeasureError(f"E exp({a} X_1) is infinite: upper tail decays at rate {t.nu.right_rate}")
    if a < 0 and -a >= t.nu.left_rate:
        raise MeasureError(f"E exp({a} X_1) is infinite: lower tail decays at rate {t.nu.left_rate}")


def cumulant_exponent(t: LevyTriplet, a: float) -> float:
    """Real exponent ``κ(a) = log E e^{a X_1} = ca + σ²a²/2 + ∫(e^{az}-1-az1{|z|<=1})ν(dz)``."""
    a = float(a)
    _check_mgf(t, a)
    val = t.c * a + 0.5 * t.sigma**2 * a * a
    if not t.nu.is_zero and a != 0.0:
        val += float(integrate(t.nu, lambda z: math.expm1(a * z) - a * z * (abs(z) <= 1.0)))
    return float(val)


def laplace_exponent(t: LevyTriplet, alpha: float) -> float:
    """``φ(α) = log E e^{-α X_1}`` for a spectrally positive triplet."""
    if not t.spectrally_positive:
        raise NotSpectrallyPositiveError("not spectrally positive: ν charges (-∞, 0)")
    alpha = float(alpha)
    val = -t.c * alpha + 0.5 * t.sigma**2 * alpha * alpha
    if not t.nu.is_zero and alpha != 0.0:
        val += float(integrate(t.nu, lambda z: math.expm1(-alpha * z) + alpha * z * (z <= 1.0)))
    return float(val)


def mean_rate(t: LevyTriplet) -> float:
    """``E X_1 = c + ∫_{|z|>1} z ν(dz)``; raises when the first moment is infinite."""
    if t.nu.is_zero:
        return float(t.c)
    tail = integrate(t.nu, lambda z: abs(z) if abs(z) > 1.0 else 0.0)
    if not math.isfinite(tail):
        raise MomentError("first moment infinite")
    for d in t.nu.densities:
        lo, hi = d.support
        heavy = (not math.isfinite(hi) and d.right_rate == math.inf) or (not math.isfinite(lo) and d.left_rate == math.inf)
        if heavy:
            raise MomentError(f"first moment infinite: {d.describe()} has no exponential tail bound")
    big = integrate(t.nu, lambda z: z if abs(z) > 1.0 else 0.0)
    return float(t.c + big)


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------


def regular_grid(horizon: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = max(1, int(math.ceil(horizon / dt - 1e-9)))
    grid = np.arange(n + 1, dtype=float) * dt
    grid[-1] = horizon
    return grid


def merge_grid(base: np.ndarray, *extra) -> np.ndarray:
    """Union of ``base`` and the extra epochs in ``(0, base[-1]]``.

    Base points within rounding distance of an extra epoch are dropped so
    that event times stay exact and no zero-length steps appear.
    """
    base = np.asarray(base, dtype=float)
    hi = base[-1]
    ev = [np.asarray(e, dtype=float) for e in extra]
    ev = np.unique(np.concatenate([e[(e > 0) & (e <= hi)] for e in ev])) if ev else np.zeros(0)
    if not ev.size:
        return base
    eps = 1e-12 * max(1.0, abs(hi))
    pos = np.clip(np.searchsorted(ev, base), 1, len(ev)) - 1
    near = np.abs(base - ev[pos]) <= eps
    nxt = np.minimum(pos + 1, len(ev) - 1)
    near |= np.abs(base - ev[nxt]) <= eps
    near[0] = False
    if near[-1]:
        # keep the horizon itself; an epoch rounding onto it is the horizon
        near[-1] = False
        ev = ev[ev < hi - eps]
    return np.unique(np.concatenate((base[~near], ev)))


@dataclass(frozen=True)
class LevyPath:
    """Skeleton of a Lévy path.

    ``values[i]`` is ``X`` at ``times[i]`` (right-continuous, jump included);
    ``pre_values[i]`` is the left limit ``X_{t_i-}``.  ``brownian`` holds the
    standard normal draws used for each grid interval.
    """

    times: np.ndarray
    values: np.ndarray
    pre_values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    brownian: np.ndarray
    seed: object = None

    @property
    def is_jump(self) -> np.ndarray:
        return self.values != self.pre_values

    def at(self, t: float) -> float:
        i = np.searchsorted(self.times, t, side="right") - 1
        return float(self.values[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "X", "is_jump", "delta_X"])
        jumps = self.values - self.pre_values
        for t, x, dx in zip(self.times, self.values, jumps):
            w.writerow([f"{t:.17g}", f"{x:.17g}", int(dx != 0.0), f"{dx:.17g}"])
        return buf.getvalue()


def simulate_levy_path(
    t: LevyTriplet,
    x0: float,
    horizon: float,
    dt: float,
    seed,
    extra_times=(),
) -> LevyPath:
    """Exact skeleton of ``x0 + X`` on a regular grid plus the jump epochs.

    Jumps come from a Poisson random measure with mean ``ν(dz)dt`` (the
    measure must be finite, i.e. already truncated); every jump is added
    uncompensated and ``-t ∫_{|z|<=1} z ν(dz)`` is folded into the drift.
    The seed is split into a Brownian substream and a jump substream, so
    changing ``sigma`` leaves the jumps unchanged.
    """
    ss = as_seed_sequence(seed)
    bm_ss, jump_ss = ss.spawn(2)
    events = sample_events(t.nu, horizon, jump_ss)
    times = merge_grid(regular_grid(horizon, dt), events.times, extra_times)
    dts = np.diff(times)
    normals = np.random.default_rng(bm_ss).standard_normal(len(dts))
    cont = np.concatenate(([0.0], np.cumsum(t.net_drift() * dts + t.sigma * np.sqrt(dts) * normals)))
    jumps = np.zeros(len(times))
    if len(events):
        idx = np.searchsorted(times, events.times)
        np.add.at(jumps, idx, events.marks)
    values = x0 + cont + np.cumsum(jumps)
    pre = values - jumps
    return LevyPath(times, values, pre, events.times, events.marks, normals, seed)


def simulate_levy_terminal(t: LevyTriplet, x0: float, horizon: float, seed) -> float:
    """``X_horizon`` only, with the same seed construction and draws as
    ``simulate_levy_path`` on a single-step grid (equal up to rounding)."""
    ss = as_seed_sequence(seed)
    bm_ss, jump_ss = ss.spawn(2)
    events = sample_events(t.nu, horizon, jump_ss)
    out = x0 + t.net_drift() * horizon
    if t.sigma != 0.0:
        out += t.sigma * math.sqrt(horizon) * np.random.default_rng(bm_ss).standard_normal()
    return float(out + events.marks.sum())
