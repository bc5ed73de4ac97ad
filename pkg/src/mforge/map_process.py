"""Markov additive processes ``(J, X)`` with a finite modulating chain."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .levy import LevyTriplet, merge_grid, regular_grid
from .measures import JumpMeasure, MeasureError, as_seed_sequence, sample_events


class MapSpecError(ValueError):
    pass


@dataclass(frozen=True)
class MapParams:
    """Rate matrix ``Q``, per-state triplets and transition jump laws ``G[(i, j)]``.

    Missing ``G[(i, j)]`` entries default to ``δ_0``.  ``initial`` is the law
    of ``J_0`` (defaults to state 0).
    """

    Q: np.ndarray
    triplets: tuple
    G: Mapping = field(default_factory=dict)
    initial: np.ndarray | None = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        K = Q.shape[0]
        if Q.shape != (K, K):
            raise MapSpecError("Q must be square")
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise MapSpecError("off-diagonal rates must be nonnegative")
        if np.any(np.abs(Q.sum(axis=1)) > 1e-12 * max(1.0, np.abs(Q).max())):
            raise MapSpecError("rows of Q must sum to 0")
        trip = tuple(self.triplets)
        if len(trip) != K:
            raise MapSpecError(f"need {K} triplets, got {len(trip)}")
        for t in trip:
            if not isinstance(t, LevyTriplet):
                raise MapSpecError("triplets must be LevyTriplet instances")
        G = {}
        for i in range(K):
            for j in range(K):
                if i == j:
                    continue
                g = dict(self.G).get((i, j), JumpMeasure.dirac(0.0))
                if abs(g.total_mass - 1.0) > 1e-12:
                    raise MapSpecError(f"G[{i},{j}] must be a probability measure (mass {g.total_mass})")
                G[(i, j)] = g
        init = np.eye(K)[0] if self.initial is None else np.asarray(self.initial, dtype=float)
        if init.shape != (K,) or np.any(init < 0) or abs(init.sum() - 1.0) > 1e-12:
            raise MapSpecError("initial law must be a probability vector of length K")
        Q.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "triplets", trip)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "initial", init)

    @property
    def K(self) -> int:
        return self.Q.shape[0]

    def stationary(self) -> np.ndarray:
        """Solution of ``πQ = 0``, ``Σπ = 1``."""
        A = np.vstack((self.Q.T, np.ones(self.K)))
        rhs = np.zeros(self.K + 1)
        rhs[-1] = 1.0
        return np.linalg.lstsq(A, rhs, rcond=None)[0]

    def embedded_chain(self) -> np.ndarray:
        rates = -np.diag(self.Q)
        P = np.where(rates[:, None] > 0, self.Q / np.where(rates > 0, rates, 1.0)[:, None], 0.0)
        np.fill_diagonal(P, 0.0)
        return P


@dataclass(frozen=True)
class MapPath:
    """Skeleton of ``(J, X)``: post-jump values and left limits of both."""

    times: np.ndarray
    values: np.ndarray
    pre_values: np.ndarray
    states: np.ndarray
    pre_states: np.ndarray
    transitions: tuple  # ((t, i, j, mark), ...)
    seed: object = None

    @property
    def is_jump(self) -> np.ndarray:
        return (self.values != self.pre_values) | (self.states != self.pre_states)

    def occupation(self, K: int) -> np.ndarray:
        """Time spent in each state over ``[0, horizon]``."""
        dts = np.diff(self.times)
        return np.bincount(self.states[:-1], weights=dts, minlength=K)

    def sojourns(self) -> list[tuple[int, float]]:
        """Completed sojourns ``(state, length)``."""
        out = []
        start, state = 0.0, int(self.states[0])
        for t, i, j, _ in self.transitions:
            out.append((state, t - start))
            start, state = t, j
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "X", "J", "is_jump", "delta_X"])
        for t, x, p, j, flag in zip(self.times, self.values, self.pre_values, self.states, self.is_jump):
            w.writerow([f"{t:.17g}", f"{x:.17g}", int(j), int(flag), f"{x - p:.17g}"])
        return buf.getvalue()


def _pairs(K: int):
    return [(i, j) for i in range(K) for j in range(K) if i != j]


def simulate_map_path(p: MapParams, j0, x0: float, horizon: float, dt: float, seed, extra_times=()) -> MapPath:
    """Exact skeleton of ``(J, X)``.

    The seed is split into a Brownian stream, one within-state jump stream
    per state, one transition stream per ordered pair (intensity
    ``q_ij G_ij``) and a stream for drawing ``J_0`` when ``j0`` is ``None``.
    An event of ``N_ij`` is effective only when ``J_{s-} = i``; within-state
    jumps of ``ν_i`` only when ``J_{s-} = i``.  With one state this is
    :func:`mforge.levy.simulate_levy_path` draw for draw.
    """
    K = p.K
    pairs = _pairs(K)
    ss = as_seed_sequence(seed)
    ch = ss.spawn(1 + K + len(pairs) + 1)
    bm_ss, within_ss, trans_ss, init_ss = ch[0], ch[1 : 1 + K], ch[1 + K : 1 + K + len(pairs)], ch[-1]
    if j0 is None:
        j0 = int(np.random.default_rng(init_ss).choice(K, p=p.initial))
    j0 = int(j0)
    if not 0 <= j0 < K:
        raise MapSpecError(f"initial state {j0} out of range")
    within = [sample_events(p.triplets[i].nu, horizon, within_ss[i]) for i in range(K)]
    tev = []
    for (i, j), s in zip(pairs, trans_ss):
        q = p.Q[i, j]
        if q <= 0:
            continue
        ev = sample_events(p.G[(i, j)].scaled(q), horizon, s)
        tev.extend((float(t), i, j, float(m)) for t, m in zip(ev.times, ev.marks))
    tev.sort()
    transitions = []
    state = j0
    for t, i, j, m in tev:
        if state == i:
            transitions.append((t, i, j, m))
            state = j
    ttimes = np.array([tr[0] for tr in transitions])
    tfrom = np.array([tr[1] for tr in transitions], dtype=int)

    def state_before(times):
        # J_{s-}: last effective transition strictly before s
        k = np.searchsorted(ttimes, times, side="left")
        out = np.full(len(times), j0)
        has = k > 0
        out[has] = [transitions[kk - 1][2] for kk in k[has]]
        return out

    wtimes, wmarks = [], []
    for i, s in enumerate(within):
        if len(s):
            keep = state_before(s.times) == i
            wtimes.append(s.times[keep])
            wmarks.append(s.marks[keep])
    wt = np.concatenate(wtimes) if wtimes else np.zeros(0)
    wm = np.concatenate(wmarks) if wmarks else np.zeros(0)
    times = merge_grid(regular_grid(horizon, dt), wt, ttimes, extra_times)
    dts = np.diff(times)
    normals = np.random.default_rng(bm_ss).standard_normal(len(dts))

    kk = np.searchsorted(ttimes, times, side="right")
    seq = np.array([j0] + [tr[2] for tr in transitions], dtype=int)
    states = seq[kk]
    pre_states = states.copy()
    at_tr = np.searchsorted(times, ttimes)
    pre_states[at_tr] = tfrom

    drift = np.array([t.net_drift() for t in p.triplets])
    sig = np.array([t.sigma for t in p.triplets])
    seg = states[:-1]
    cont = np.concatenate(([0.0], np.cumsum(drift[seg] * dts + sig[seg] * np.sqrt(dts) * normals)))
    jumps = np.zeros(len(times))
    if wt.size:
        np.add.at(jumps, np.searchsorted(times, wt), wm)
    if ttimes.size:
        np.add.at(jumps, at_tr, [tr[3] for tr in transitions])
    values = x0 + cont + np.cumsum(jumps)
    return MapPath(times, values, values - jumps, states, pre_states, tuple(transitions), seed)


def transform_evolution(p: MapParams, alpha: float, t: float) -> np.ndarray:
    """``e^{F(α) t}``; entry ``(i, j)`` is ``E_i[e^{α(X_t - X_0)}; J_t = j]``."""
    from .generator import map_exponent_matrix

    F = map_exponent_matrix(p, alpha)
    with np.errstate(over="raise", invalid="raise"):
        try:
            M = scipy.linalg.expm(F * float(t))
        except FloatingPointError as exc:
            raise MeasureError(f"matrix exponential overflows at alpha={alpha}, t={t}; rescale alpha or t") from exc
    if not np.all(np.isfinite(M)):
        raise MeasureError(f"matrix exponential overflows at alpha={alpha}, t={t}; rescale alpha or t")
    return M
