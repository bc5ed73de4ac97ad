"""Monte Carlo and single-path statistical checks of the martingale claims.

Every check returns :class:`VerdictReport` rows.  Cross-path statistics are
accumulated per chunk of paths and merged in chunk order (Chan's pairwise
update), so results are bit-identical for any thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .fv import fv_event_times, make_fv, reflection_regulator
from .generator import (
    Box,
    JDGenerator,
    LevyGenerator,
    MapGenerator,
    TestFunction,
    _probe_points,
    check_assumption_bounds,
    exp_i_alpha,
    exp_neg_alpha,
    state_blind,
    state_indicator,
    x_only,
)
from .jump_diffusion import JDCoefficients, simulate_jd_batch
from .levy import LevyTriplet, laplace_exponent, levy_exponent, mean_rate, simulate_levy_path, simulate_levy_terminal
from .map_process import MapParams, simulate_map_path, transform_evolution
from .martingale import (
    CoupledPath,
    MartingalePath,
    assemble_batch,
    assemble_martingale,
    kella_whitt_martingale,
    laplace_kw_martingale,
    map_vector_martingale,
    predictable_qv_batch,
    product_form_martingale,
    realized_qv,
)
from .measures import path_seed

SE_MULTIPLIER = 3.0
DEFAULT_CHUNK = 250


class HarnessError(ValueError):
    pass


# ---------------------------------------------------------------------------
# reports and statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerdictReport:
    """One statistic: ``passed`` iff ``|estimate - target| <= threshold``
    and the optional side condition holds."""

    scenario: str
    statistic: str
    estimate: float
    se: float
    threshold: float
    n_paths: int
    seeds: tuple
    target: float = 0.0
    t: float | None = None
    side_condition: bool = True
    note: str = ""
    curve: tuple = field(default=(), compare=False, repr=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = bool(np.isfinite(self.estimate)) and abs(self.estimate - self.target) <= self.threshold
        object.__setattr__(self, "passed", bool(ok and self.side_condition))

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        at = "" if self.t is None else f" t={self.t:g}"
        return (
            f"[{flag}] {self.scenario}: {self.statistic}{at}: estimate {self.estimate:.6g} "
            f"target {self.target:.6g} threshold {self.threshold:.3g} (se {self.se:.3g}, n={self.n_paths})"
            + (f" {self.note}" if self.note else "")
        )


def refused(scenario: str, statistic: str, note: str, seed=None) -> VerdictReport:
    return VerdictReport(scenario, statistic, math.nan, math.nan, math.nan, 0, (seed,), side_condition=False, note=note)


@dataclass
class Moments:
    """Running count, mean and centred second moment of feature vectors."""

    n: int = 0
    mean: np.ndarray | None = None
    m2: np.ndarray | None = None

    @classmethod
    def of(cls, rows: np.ndarray) -> "Moments":
        rows = np.asarray(rows, dtype=float)
        mu = rows.mean(axis=0)
        return cls(len(rows), mu, ((rows - mu) ** 2).sum(axis=0))

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return Moments(other.n, other.mean.copy(), other.m2.copy())
        n = self.n + other.n
        d = other.mean - self.mean
        mean = self.mean + d * (other.n / n)
        m2 = self.m2 + other.m2 + d * d * (self.n * other.n / n)
        return Moments(n, mean, m2)

    @property
    def var(self) -> np.ndarray:
        return self.m2 / max(self.n - 1, 1)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.var / max(self.n, 1))


def _chunks(n: int, size: int):
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def run_chunks(fn: Callable, n: int, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> Moments:
    """Apply ``fn(start, stop) -> (rows, d)`` over index chunks and merge in order."""
    parts = _chunks(n, chunk)
    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda c: fn(*c), parts))
    else:
        results = [fn(*c) for c in parts]
    total = Moments()
    for r in results:
        total = total.merge(Moments.of(r))
    return total


def components(values: np.ndarray) -> np.ndarray:
    """Real view: complex ``(...,)`` becomes ``(..., 2)``; real stays ``(..., d)``."""
    v = np.asarray(values)
    if np.iscomplexobj(v):
        return np.stack((v.real, v.imag), axis=-1)
    return v[..., None] if v.ndim == 1 else v


# ---------------------------------------------------------------------------
# weight functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightFunction:
    """Deterministic weight ``h(t)``: power ``t^{-γ}`` or a user table (linear interpolation)."""

    kind: str = "power"
    gamma: float | None = 1.0
    table_t: tuple = ()
    table_h: tuple = ()
    declared_sqrt_vanishing: bool = False
    declared_square_integrable: bool = False

    @classmethod
    def power(cls, gamma: float) -> "WeightFunction":
        return cls("power", float(gamma))

    @classmethod
    def table(cls, t, h, sqrt_vanishing: bool = False, square_integrable: bool = False) -> "WeightFunction":
        return cls("table", None, tuple(map(float, t)), tuple(map(float, h)), sqrt_vanishing, square_integrable)

    def __post_init__(self):
        if self.kind not in ("power", "table"):
            raise HarnessError("weight kind must be 'power' or 'table'")
        if self.kind == "table":
            if len(self.table_t) < 2 or len(self.table_t) != len(self.table_h) or np.any(np.diff(self.table_t) <= 0):
                raise HarnessError("weight table needs increasing times and matching values")
            if min(self.table_h) < 0:
                raise HarnessError("weights must be nonnegative")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return t ** (-self.gamma)
        return np.interp(t, self.table_t, self.table_h)

    @property
    def sqrt_vanishing(self) -> bool:
        """``h(t)√t → 0``."""
        return self.gamma > 0.5 if self.kind == "power" else self.declared_sqrt_vanishing

    @property
    def nonincreasing(self) -> bool:
        return self.gamma >= 0 if self.kind == "power" else bool(np.all(np.diff(self.table_h) <= 0))

    @property
    def square_integrable(self) -> bool:
        return self.gamma > 0.5 if self.kind == "power" else self.declared_square_integrable


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


class PerturbedGenerator:
    """Generator with ``eps · f_x`` added: a deliberately wrong drift, used as a negative control."""

    def __init__(self, base, eps: float = 0.1):
        self.base = base
        self.eps = float(eps)

    def apply(self, f, x, y, *state):
        return self.base.apply(f, x, y, *state) + self.eps * np.asarray(f.dx(x, y, *(state or (None,))))

    def qv_integrand(self, f, x, y, *state):
        return self.base.qv_integrand(f, x, y, *state)

    def diffusion_bound(self, *a):
        return self.base.diffusion_bound(*a)

    def jump_bound(self, *a):
        return self.base.jump_bound(*a)


MARTINGALES = ("generic", "kella_whitt", "laplace_kw", "map_vector")
_FV_KEY = 99


@dataclass(frozen=True)
class Scenario:
    """A process, an FV coupling and a test function, with MC settings.

    ``y`` is ``None`` (``Y ≡ 0``), ``"reflection"`` or an FV spec mapping.
    ``martingale`` selects the generic assembly or a closed-form special case
    (which need ``alpha``).  Path ``i`` uses ``SeedSequence(seed, spawn_key=(i,))``.
    """

    name: str
    process: object
    f: TestFunction | None = None
    x0: object = 0.0
    y: object = None
    horizon: float = 1.0
    dt: float = 0.01
    n_paths: int = 1000
    seed: int = 0
    domain: Box | None = None
    j0: int | None = None
    martingale: str = "generic"
    alpha: float | None = None
    generator: object = None
    rule: str = "midpoint"
    claim: str = ""

    def __post_init__(self):
        if self.martingale not in MARTINGALES:
            raise HarnessError(f"martingale must be one of {MARTINGALES}")
        if not (self.dt > 0 and self.horizon > 0 and self.dt <= self.horizon):
            raise HarnessError("need 0 < dt <= horizon")
        if self.n_paths < 1:
            raise HarnessError("n_paths must be at least 1")
        if self.martingale in ("kella_whitt", "laplace_kw") and not isinstance(self.process, LevyTriplet):
            raise HarnessError("closed-form exponential martingales need a Lévy triplet")
        if self.martingale == "map_vector" and not isinstance(self.process, MapParams):
            raise HarnessError("the vector martingale needs a MAP process")
        if self.martingale != "generic" and self.alpha is None and self.martingale != "map_vector":
            raise HarnessError("closed-form martingales need alpha")
        if self.f is None:
            if self.martingale == "kella_whitt":
                object.__setattr__(self, "f", exp_i_alpha(self.alpha))
            elif self.martingale == "laplace_kw":
                object.__setattr__(self, "f", exp_neg_alpha(self.alpha))
            else:
                raise HarnessError("a test function is required")

    @property
    def kind(self) -> str:
        if isinstance(self.process, LevyTriplet):
            return "levy"
        if isinstance(self.process, JDCoefficients):
            return "jd"
        if isinstance(self.process, MapParams):
            return "map"
        raise HarnessError(f"unsupported process {type(self.process).__name__}")

    def gen(self):
        if self.generator is not None:
            return self.generator
        return {"levy": LevyGenerator, "jd": JDGenerator, "map": MapGenerator}[self.kind](self.process)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=int(seed))

    # -- paths ---------------------------------------------------------------
    def _fv_seed(self, i: int):
        return np.random.SeedSequence(self.seed, spawn_key=(int(i), _FV_KEY))

    def simulate(self, start: int, stop: int, horizon: float | None = None, extra_times=()) -> list[CoupledPath]:
        T = self.horizon if horizon is None else float(horizon)
        idx = range(start, stop)
        seeds = [path_seed(self.seed, i) for i in idx]
        fv_spec = self.y if isinstance(self.y, Mapping) else None
        extra = [
            np.concatenate((np.asarray(extra_times, dtype=float), fv_event_times(fv_spec, T, self._fv_seed(i)) if fv_spec else np.zeros(0)))
            for i in idx
        ]
        if self.kind == "levy":
            xs = [simulate_levy_path(self.process, float(self.x0), T, self.dt, s, e) for s, e in zip(seeds, extra)]
        elif self.kind == "jd":
            xs = simulate_jd_batch(self.process, self.x0, T, self.dt, seeds, path_extra_times=extra)
        else:
            xs = [simulate_map_path(self.process, self.j0, float(self.x0), T, self.dt, s, e) for s, e in zip(seeds, extra)]
        out = []
        for i, xp in zip(idx, xs):
            if self.y == "reflection":
                out.append(CoupledPath.reflected(xp))
            elif fv_spec:
                out.append(CoupledPath.couple(xp, make_fv(fv_spec, xp.times, self._fv_seed(i))))
            else:
                out.append(CoupledPath.couple(xp))
        return out

    def martingales(self, paths: Sequence[CoupledPath]) -> list[MartingalePath]:
        if self.martingale == "generic":
            return assemble_batch(paths, self.f, self.gen(), self.rule)
        if self.martingale == "kella_whitt":
            return [kella_whitt_martingale(self.process, self.alpha, p, self.rule) for p in paths]
        if self.martingale == "laplace_kw":
            return [laplace_kw_martingale(self.process, self.alpha, p, self.rule) for p in paths]
        return [map_vector_martingale(self.process, self.f, p, self.alpha, self.rule) for p in paths]

    def qv_functions(self) -> list[TestFunction]:
        """Test functions whose predictable QV matches each martingale coordinate."""
        if self.martingale == "map_vector":
            return [state_indicator(self.f, j) for j in range(self.process.K)]
        return [self.f]

    def predictable(self, paths: Sequence[CoupledPath]) -> np.ndarray:
        """Per path, predictable QV at every grid point: list of ``(L, d)``."""
        cols = [predictable_qv_batch(paths, g, self.gen()) for g in self.qv_functions()]
        return [np.stack([c[k] for c in cols], axis=-1) for k in range(len(paths))]


def _at(times: np.ndarray, checkpoints) -> np.ndarray:
    idx = np.searchsorted(times, checkpoints, side="right") - 1
    return idx


def _check_times(scn: Scenario, times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if np.any(t <= 0) or np.any(t > scn.horizon + 1e-12):
        raise HarnessError(f"checkpoints must lie in (0, {scn.horizon}]")
    return t


def _width(m: MartingalePath) -> int:
    return components(m.values[:1]).shape[-1]


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def mc_zero_mean(scn: Scenario, times, n_paths: int | None = None, seed: int | None = None, threads: int = 1) -> list[VerdictReport]:
    """Sample mean of ``M_t`` per checkpoint and real component, pass at ``3·SE``."""
    scn = scn if seed is None else scn.with_seed(seed)
    n = scn.n_paths if n_paths is None else int(n_paths)
    ts = _check_times(scn, times)

    def fn(a, b):
        paths = scn.simulate(a, b, extra_times=ts)
        ms = scn.martingales(paths)
        return np.stack([components(m.values[_at(m.times, ts)]).ravel() for m in ms])

    mo = run_chunks(fn, n, threads)
    d = mo.mean.size // len(ts)
    names = _component_names(scn, d)
    out = []
    for k, t in enumerate(ts):
        for c in range(d):
            i = k * d + c
            se = float(mo.se[i])
            out.append(
                VerdictReport(scn.name, f"mean of M ({names[c]})", float(mo.mean[i]), se, SE_MULTIPLIER * se, n, (scn.seed,), t=float(t))
            )
    return out


def _component_names(scn: Scenario, d: int) -> list[str]:
    if scn.martingale == "map_vector":
        return [f"coordinate {j}" for j in range(d)]
    if d == 2:
        return ["real part", "imaginary part"]
    return ["real"] if d == 1 else [f"component {j}" for j in range(d)]


def _square(m: MartingalePath) -> np.ndarray:
    """``|M|²`` per coordinate: complex martingales give one column."""
    v = m.values
    s = np.abs(v) ** 2
    return s[:, None] if s.ndim == 1 else s


def qv_isometry_check(
    scn: Scenario,
    times,
    n_paths: int | None = None,
    seed: int | None = None,
    rel_tol: float = 0.05,
    threads: int = 1,
) -> list[VerdictReport]:
    """``E|M_t|²`` and ``E[realized QV]_t`` against ``E[predictable QV]_t``
    within ``rel_tol`` relative, per checkpoint and coordinate."""
    scn = scn if seed is None else scn.with_seed(seed)
    n = scn.n_paths if n_paths is None else int(n_paths)
    ts = _check_times(scn, times)

    def fn(a, b):
        paths = scn.simulate(a, b, extra_times=ts)
        ms = scn.martingales(paths)
        pq = scn.predictable(paths)
        rows = []
        for m, q in zip(ms, pq):
            idx = _at(m.times, ts)
            rq = realized_qv(m)
            rq = rq[:, None] if rq.ndim == 1 else rq
            rows.append(np.concatenate((_square(m)[idx].ravel(), q[idx].ravel(), rq[idx].ravel())))
        return np.stack(rows)

    mo = run_chunks(fn, n, threads)
    d = mo.mean.size // (3 * len(ts))
    sq, pq, rq = np.split(mo.mean, 3)
    sq_se, pq_se, rq_se = np.split(mo.se, 3)
    out = []
    for k, t in enumerate(ts):
        for c in range(d):
            i = k * d + c
            base = float(pq[i])
            tag = "" if d == 1 else f" (coordinate {c})"
            for label, est, se in (("E|M|^2", sq[i], sq_se[i]), ("E realized QV", rq[i], rq_se[i])):
                out.append(
                    VerdictReport(
                        scn.name,
                        f"{label} vs E predictable QV{tag}",
                        float(est),
                        float(se),
                        rel_tol * abs(base),
                        n,
                        (scn.seed,),
                        target=base,
                        t=float(t),
                        note=f"predictable QV se {pq_se[i]:.3g}",
                    )
                )
    return out


def qv_bound(scn: Scenario, cap: float = 1e6, n_grid: int = 11, n_random: int = 200, seed: int = 0):
    """``(report, C)``: Assumption-bound report on the declared domain and the
    sup of the predictable-QV integrand over its probes."""
    g = scn.gen()
    B = scn.domain or scn.f.domain or Box()
    funcs = scn.qv_functions()
    reports = [check_assumption_bounds(f, g, B, cap, n_grid, n_random, seed) for f in funcs]
    dim = getattr(scn.process, "dim", 1) if scn.kind == "jd" else 1
    xs, ys = _probe_points(B, n_grid, n_random, seed, dim)
    states = B.states if B.states is not None else (tuple(range(scn.process.K)) if scn.kind == "map" else (None,))
    C = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for f in funcs:
            for s in states:
                args = () if s is None else (np.full(len(xs), s),)
                v = np.asarray(g.qv_integrand(f, xs, ys, *args), dtype=float)
                C = max(C, float(np.max(np.where(np.isfinite(v), v, np.inf))))
    ok = all(r.passed for r in reports) and math.isfinite(C) and C <= cap
    return reports, C, ok


def l2_growth_check(scn: Scenario, times, n_paths: int | None = None, seed: int | None = None, threads: int = 1) -> VerdictReport:
    """``max_t E|M_t|²/t`` against the probed bound ``C`` (pass if at most ``C(1 + 3·rel SE)``).

    Refuses (a failing report, no exception) when the bound check fails.
    """
    scn = scn if seed is None else scn.with_seed(seed)
    n = scn.n_paths if n_paths is None else int(n_paths)
    reports, C, ok = qv_bound(scn)
    stat = "max over t of E|M_t|^2 / t"
    if not ok:
        return refused(scn.name, stat, "refused: Assumption bound check failed on the declared domain; " + "; ".join(map(str, reports)), scn.seed)
    ts = _check_times(scn, times)

    def fn(a, b):
        ms = scn.martingales(scn.simulate(a, b, extra_times=ts))
        return np.stack([_square(m)[_at(m.times, ts)].sum(axis=1) for m in ms])

    mo = run_chunks(fn, n, threads)
    ratio = mo.mean / ts
    k = int(np.argmax(ratio))
    rel = float(mo.se[k] / mo.mean[k]) if mo.mean[k] > 0 else 0.0
    return VerdictReport(scn.name, stat, float(ratio[k]), float(mo.se[k] / ts[k]), C * (1 + SE_MULTIPLIER * rel), n, (scn.seed,), t=float(ts[k]), note=f"C = {C:.6g}")


def rate_convergence_check(
    scn: Scenario,
    h: WeightFunction,
    t_grid,
    n_paths: int | None = None,
    seed: int | None = None,
    mode: str = "l2",
    threads: int = 1,
    factor: float = 5.0,
    min_passing: int | None = None,
) -> VerdictReport:
    """Decay of ``h(t) M_t``.

    ``mode="l2"``: ``E|h(t)M_t|²`` along ``t_grid`` must be non-increasing
    (up to 3 SE of the difference) with final/initial below 0.1.
    ``mode="as"``: on each of ``n_paths`` (default 20) long paths,
    ``|h(T)M_T|`` must sit below the path's running maximum of ``|h(t)M_t|``
    over ``[t_grid[0], T]`` by ``factor``; at least ``min_passing`` paths must
    show it (default: all of them).  This is a trend criterion on finitely
    many paths, not a proof.
    """
    scn = scn if seed is None else scn.with_seed(seed)
    ts = np.asarray(t_grid, dtype=float)
    if mode == "l2":
        if not h.sqrt_vanishing:
            raise HarnessError("L² mode needs h(t)√t → 0 (power weights need γ > 1/2)")
    elif mode == "as":
        if not (h.nonincreasing and h.square_integrable):
            raise HarnessError("a.s. mode needs a nonincreasing square-integrable h (power weights need γ > 1/2)")
    else:
        raise HarnessError("mode must be 'l2' or 'as'")
    T = float(ts[-1])
    scn = replace(scn, horizon=max(scn.horizon, T))
    if mode == "l2":
        n = scn.n_paths if n_paths is None else int(n_paths)
        w = h(ts) ** 2

        def fn(a, b):
            ms = scn.martingales(scn.simulate(a, b, horizon=T, extra_times=ts))
            return np.stack([_square(m)[_at(m.times, ts)].sum(axis=1) * w for m in ms])

        mo = run_chunks(fn, n, threads)
        m, se = mo.mean, mo.se
        steps = np.diff(m) <= SE_MULTIPLIER * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
        ratio = float(m[-1] / m[0]) if m[0] > 0 else math.inf
        return VerdictReport(
            scn.name,
            "E|h(t)M_t|^2 final/initial",
            ratio,
            float(se[-1] / m[0]) if m[0] > 0 else math.nan,
            0.1,
            n,
            (scn.seed,),
            side_condition=bool(steps.all()),
            note=f"decreasing={bool(steps.all())}",
            curve=tuple(zip(ts.tolist(), m.tolist())),
        )
    n = 20 if n_paths is None else int(n_paths)
    min_passing = n if min_passing is None else int(min_passing)
    fails = 0
    ratios = []
    curve = ()
    for i in range(n):
        m = scn.martingales(scn.simulate(i, i + 1, horizon=T, extra_times=ts))[0]
        keep = m.times >= ts[0]
        vals = np.sqrt(_square(m)[keep].sum(axis=1)) * h(m.times[keep])
        r = float(vals[-1] / vals.max()) if vals.max() > 0 else 0.0
        if i == 0:
            curve = tuple(zip(m.times[keep][_at(m.times[keep], ts)].tolist(), vals[_at(m.times[keep], ts)].tolist()))
        ratios.append(r)
        fails += r > 1.0 / factor
    return VerdictReport(
        scn.name,
        f"paths without a factor-{factor:g} drop of |h(t)M_t| at T",
        float(fails),
        0.0,
        float(n - min_passing),
        n,
        (scn.seed,),
        note=f"trend criterion on {n} paths; median ratio {np.median(ratios):.3g}",
        curve=curve,
    )


@dataclass(frozen=True)
class TimeAverage:
    value: float
    se: float
    curve_t: np.ndarray
    curve_avg: np.ndarray


def reflected_time_average(t: LevyTriplet, alpha: float, T: float, dt: float, seed, block: float = 1000.0, n_batches: int = 20) -> TimeAverage:
    """``(1/T)∫_0^T e^{-αZ_s} ds`` for the reflected process started at 0.

    The horizon is simulated in blocks (state carried over, one seed child per
    block) and integrated by the trapezoid rule between grid points using
    left limits at jumps.  SE from batch means.
    """
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    nb = max(1, int(math.ceil(T / block - 1e-9)))
    z = 0.0
    integrals = []
    ends = []
    for b in range(nb):
        length = min(block, T - b * block)
        s = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (b,))
        xp = simulate_levy_path(t, z, length, dt, s)
        y = reflection_regulator(xp.times, xp.values, xp.pre_values)
        Z = xp.values + y.values
        Zp = xp.pre_values + y.pre_values
        e = np.exp(-alpha * Z)
        ep = np.exp(-alpha * Zp)
        integrals.append(float(np.sum(0.5 * (e[:-1] + ep[1:]) * np.diff(xp.times))))
        ends.append((b * block + length, length))
        z = float(Z[-1])
    integrals = np.array(integrals)
    lengths = np.array([l for _, l in ends])
    cum = np.cumsum(integrals) / np.cumsum(lengths)
    k = min(n_batches, nb)
    groups = np.array_split(np.arange(nb), k)
    means = np.array([integrals[g].sum() / lengths[g].sum() for g in groups])
    se = float(means.std(ddof=1) / math.sqrt(k)) if k > 1 else math.nan
    return TimeAverage(float(integrals.sum() / lengths.sum()), se, np.array([e for e, _ in ends]), cum)


def pk_target(t: LevyTriplet, alpha: float) -> float:
    """``αφ'(0)/φ(α)`` with ``φ'(0) = -E X_1``; 0 when ``φ'(0) <= 0``."""
    d0 = -mean_rate(t)
    if d0 <= 0:
        return 0.0
    return alpha * d0 / laplace_exponent(t, alpha)


def pk_limit_check(
    t: LevyTriplet,
    alpha: float,
    T: float = 1e5,
    dt: float = 1e-2,
    seed: int = 0,
    rel_tol: float = 0.02,
    unstable_tol: float = 0.05,
    cross_paths: int = 100,
    cross_T: float = 1e3,
    name: str = "pk",
    block: float = 1000.0,
) -> tuple[list[VerdictReport], TimeAverage]:
    """Time average of ``e^{-αZ}`` for the reflected process against the
    generalised Pollaczek-Khinchine value; single long path plus an average
    over ``cross_paths`` shorter paths."""
    if not t.spectrally_positive:
        raise HarnessError("the limit needs a spectrally positive triplet")
    target = pk_target(t, alpha)
    stable = target > 0
    single = reflected_time_average(t, alpha, T, dt, np.random.SeedSequence(seed, spawn_key=(0,)), block)
    thr = rel_tol * target if stable else unstable_tol
    out = [VerdictReport(name, "single-path time average of exp(-alpha Z)", single.value, single.se, thr, 1, (seed,), target=target, t=T)]
    if cross_paths:
        vals = np.array([
            reflected_time_average(t, alpha, cross_T, dt, np.random.SeedSequence(seed, spawn_key=(1, i)), block).value
            for i in range(cross_paths)
        ])
        out.append(
            VerdictReport(
                name,
                f"mean over paths of the time average to T={cross_T:g}",
                float(vals.mean()),
                float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan,
                thr,
                cross_paths,
                (seed,),
                target=target,
                t=cross_T,
            )
        )
    return out, single


def flat_below_zero(g: TestFunction, lo: float = -2.0, tol: float = 1e-8) -> bool:
    z = np.linspace(lo, 0.0, 201)
    return bool(np.max(np.abs(g.dx(z, np.zeros_like(z)))) <= tol)


def reflected_generator_check(
    scn: Scenario,
    n_paths: int | None = None,
    seed: int | None = None,
    require_flat: bool = True,
    threads: int = 1,
) -> VerdictReport:
    """Mean of ``g(Z_T) - g(Z_0) - ∫_0^T 𝒜g(Z_s) ds`` for the reflected process.

    ``scn.f`` must be ``g(x + y)`` (see :func:`mforge.generator.of_sum`) and
    ``scn.y == "reflection"``.  ``g`` must be constant on ``(-∞, 0]``
    (probed on ``[-2, 0]``) unless ``require_flat`` is False.
    """
    scn = scn if seed is None else scn.with_seed(seed)
    if scn.y != "reflection":
        raise HarnessError("reflected_generator_check needs y = 'reflection'")
    if require_flat and not flat_below_zero(scn.f):
        raise HarnessError("g is not flat below zero: g'(z) != 0 for some z in [-2, 0]")
    n = scn.n_paths if n_paths is None else int(n_paths)

    def fn(a, b):
        ms = assemble_batch(scn.simulate(a, b), scn.f, scn.gen(), scn.rule)
        return np.array([[np.real(m.terminal[-1] + m.generator[-1])] for m in ms])

    mo = run_chunks(fn, n, threads)
    se = float(mo.se[0])
    return VerdictReport(scn.name, "mean of g(Z_T) - g(Z_0) - int A g(Z_s) ds", float(mo.mean[0]), se, SE_MULTIPLIER * se, n, (scn.seed,), t=scn.horizon)


def characteristic_check(t: LevyTriplet, alphas, horizon: float = 1.0, n_paths: int = 100000, seed: int = 0, name: str = "characteristic") -> list[VerdictReport]:
    """``E e^{iαX_t}`` against ``e^{tψ(α)}`` per component at ``3·SE``."""
    x = np.array([simulate_levy_terminal(t, 0.0, horizon, path_seed(seed, i)) for i in range(n_paths)])
    out = []
    for a in alphas:
        target = np.exp(horizon * levy_exponent(t, a))
        for part, vals, tv in (("real", np.cos(a * x), target.real), ("imaginary", np.sin(a * x), target.imag)):
            se = float(vals.std(ddof=1) / math.sqrt(n_paths))
            out.append(VerdictReport(name, f"E exp(i alpha X) {part} part, alpha={a:g}", float(vals.mean()), se, SE_MULTIPLIER * se, n_paths, (seed,), target=float(tv), t=horizon))
    return out


def transform_check(p: MapParams, alpha: float, horizon: float, n_paths: int = 100000, seed: int = 0, start_states=None, name: str = "map_transform") -> list[VerdictReport]:
    """MC ``E_i[e^{αX_t}; J_t = j]`` against ``e^{F(α)t}`` entries at ``3·SE``."""
    M = transform_evolution(p, alpha, horizon)
    out = []
    for i in (range(p.K) if start_states is None else start_states):
        base = np.random.SeedSequence(seed, spawn_key=(int(i),))
        rows = np.zeros((n_paths, p.K))
        for k in range(n_paths):
            s = np.random.SeedSequence(base.entropy, spawn_key=base.spawn_key + (k,))
            mp = simulate_map_path(p, i, 0.0, horizon, horizon, s)
            rows[k, mp.states[-1]] = math.exp(alpha * mp.values[-1])
        mu = rows.mean(axis=0)
        se = rows.std(axis=0, ddof=1) / math.sqrt(n_paths)
        for j in range(p.K):
            out.append(
                VerdictReport(name, f"E_{i}[exp(alpha X_t); J_t={j}], alpha={alpha:g}", float(mu[j]), float(se[j]), SE_MULTIPLIER * float(se[j]), n_paths, (seed,), target=float(M[i, j]), t=horizon)
            )
    return out


PATHWISE = ("zero", "kella_whitt", "laplace_kw", "product_form", "map_coordinate_sum")


def pathwise_identity_check(scn: Scenario, identity: str, n_paths: int | None = None, tol: float = 1e-8, seed: int | None = None, xi=None, eta=None) -> VerdictReport:
    """Largest sup-norm gap between two code paths over ``n_paths`` paths.

    * ``zero``: ``sup|M|`` (e.g. ``f`` independent of ``x``)
    * ``kella_whitt`` / ``laplace_kw``: generic assembly against the negated closed form
    * ``product_form``: ``∫η(Y_-)dM^ξ`` against the direct assembly of ``ξη`` (rule ``"right"``)
    * ``map_coordinate_sum``: coordinate sum of the vector martingale against the
      scalar assembly of the state-blind function
    """
    if identity not in PATHWISE:
        raise HarnessError(f"identity must be one of {PATHWISE}")
    scn = scn if seed is None else scn.with_seed(seed)
    n = scn.n_paths if n_paths is None else int(n_paths)
    worst = 0.0
    g = scn.gen()
    for a, b in _chunks(n, DEFAULT_CHUNK):
        paths = scn.simulate(a, b)
        for p in paths:
            if identity == "zero":
                d = assemble_martingale(p, scn.f, g, scn.rule).values
            elif identity == "kella_whitt":
                d = assemble_martingale(p, exp_i_alpha(scn.alpha), g, scn.rule).values + kella_whitt_martingale(scn.process, scn.alpha, p, scn.rule).values
            elif identity == "laplace_kw":
                d = assemble_martingale(p, exp_neg_alpha(scn.alpha), g, scn.rule).values + laplace_kw_martingale(scn.process, scn.alpha, p, scn.rule).values
            elif identity == "product_form":
                if xi is None or eta is None:
                    raise HarnessError("product_form needs xi and eta")
                direct = assemble_martingale(p, scn.f, g, rule="right").values
                d = direct - product_form_martingale(xi, eta, p, g).values
            else:
                vec = map_vector_martingale(scn.process, scn.f, p, scn.alpha, scn.rule).values.sum(axis=1)
                d = vec - assemble_martingale(p, state_blind(scn.f), g, scn.rule).values
            worst = max(worst, float(np.max(np.abs(d))))
    return VerdictReport(scn.name, f"sup-norm gap ({identity})", worst, 0.0, tol, n, (scn.seed,))


def sqrt_t_sample(scn: Scenario, t: float, n_paths: int | None = None, threads: int = 1) -> np.ndarray:
    """Samples of ``M_t/√t`` (real part or first coordinate) for the exploratory histogram."""
    n = scn.n_paths if n_paths is None else int(n_paths)
    out = []
    for a, b in _chunks(n, DEFAULT_CHUNK):
        ms = scn.martingales(scn.simulate(a, b, horizon=max(t, scn.horizon), extra_times=[t]))
        out.extend(components(m.values[_at(m.times, [t])])[0, 0] / math.sqrt(t) for m in ms)
    return np.array(out)
