"""Execute configured checks, write CSV results and SVG plots, decide the suite verdict.

A check is green when its reports agree with its expectation (``expect:
pass`` means every report passes, ``expect: fail`` means at least one
fails).  The suite is green when at least 95% of checks are green on the
first run and every red check turns green when re-run with an independent
seed.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import traceback
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import harness as H
from .config import CheckSpec, ConfigError, ScenarioSpec, Suite, _get, _named, _nums
from .generator import x_only
from .levy import LevyTriplet
from .map_process import MapParams
from .svg import line_chart

log = logging.getLogger("mforge")

GREEN_FRACTION = 0.95
RERUN_OFFSET = 1_000_003


@dataclass(frozen=True)
class CheckResult:
    scenario: str
    index: int
    kind: str
    expect: str
    reports: tuple
    error: str = ""
    plot: str = ""
    seed: int | None = None

    @property
    def green(self) -> bool:
        if self.error or not self.reports:
            return False
        if self.expect == "pass":
            return all(r.passed for r in self.reports)
        return any(not r.passed for r in self.reports)

    @property
    def file_stem(self) -> str:
        return f"{self.index:02d}_{self.kind}"


def _times(spec: CheckSpec, scn, key="times"):
    v = spec.params.get(key)
    if v is None:
        return [scn.horizon]
    return _nums(v, f"{scn.name}.checks.{key}")


def _p(spec: CheckSpec, key, default=..., kind=None):
    return _get(spec.params, key, f"check {spec.kind}", default, kind)


def run_check(sspec: ScenarioSpec, spec: CheckSpec, index: int, threads: int = 1, seed: int | None = None) -> CheckResult:
    """Run one configured check; exceptions become a red result with the message."""
    scn = sspec.scenario
    seed = int(_p(spec, "seed", scn.seed, int)) if seed is None else int(seed)
    scn = scn.with_seed(seed)
    n = spec.params.get("n_paths")
    n = None if n is None else int(_p(spec, "n_paths", kind=int))
    plot = ""
    try:
        k = spec.kind
        if k == "zero_mean":
            reports = H.mc_zero_mean(scn, _times(spec, scn), n, threads=threads)
        elif k == "isometry":
            ts = _times(spec, scn)
            reports = H.qv_isometry_check(scn, ts, n, rel_tol=_p(spec, "rel_tol", 0.05, float), threads=threads)
            sq = [r for r in reports if r.statistic.startswith("E|M|^2")]
            plot = line_chart(
                [
                    ("E|M_t|^2", [r.t for r in sq], [r.estimate for r in sq]),
                    ("E predictable QV", [r.t for r in sq], [r.target for r in sq]),
                ],
                f"{scn.name}: second moment vs predictable QV",
                "t",
                "value",
            )
        elif k == "l2_growth":
            reports = [H.l2_growth_check(scn, _times(spec, scn), n, threads=threads)]
        elif k == "rate":
            if "table" in spec.params:
                tb = spec.params["table"]
                h = H.WeightFunction.table(tb["t"], tb["h"], bool(tb.get("sqrt_vanishing", False)), bool(tb.get("square_integrable", False)))
            else:
                h = H.WeightFunction.power(_p(spec, "gamma", 1.0, float))
            t_min = _p(spec, "t_min", 1.0, float)
            t_max = _p(spec, "t_max", kind=float)
            grid = np.geomspace(t_min, t_max, _p(spec, "n_points", 10, int))
            mode = _p(spec, "mode", "l2")
            r = H.rate_convergence_check(scn, h, grid, n, mode=mode, threads=threads)
            reports = [r]
            if r.curve:
                xs, ys = zip(*r.curve)
                label = "E|h(t)M_t|^2" if mode == "l2" else "|h(t)M_t| (first path)"
                plot = line_chart([(label, xs, ys)], f"{scn.name}: weighted martingale decay", "t", label, logx=True, logy=True)
        elif k == "pk":
            if not isinstance(scn.process, LevyTriplet):
                raise ConfigError("process", "pk check needs a Lévy process")
            reports, avg = H.pk_limit_check(
                scn.process,
                _p(spec, "alpha", 1.0, float),
                _p(spec, "T", 1e5, float),
                _p(spec, "dt", scn.dt, float),
                seed,
                rel_tol=_p(spec, "rel_tol", 0.02, float),
                cross_paths=_p(spec, "cross_paths", 100, int),
                cross_T=_p(spec, "cross_T", 1e3, float),
                name=scn.name,
                block=_p(spec, "block", 1000.0, float),
            )
            target = reports[0].target
            plot = line_chart(
                [("running time average", avg.curve_t, avg.curve_avg), ("target", [avg.curve_t[0], avg.curve_t[-1]], [target, target])],
                f"{scn.name}: time average of exp(-alpha Z)",
                "T",
                "average",
                logx=True,
            )
            reports = tuple(reports)
        elif k == "reflected_generator":
            reports = [H.reflected_generator_check(scn, n, require_flat=bool(spec.params.get("require_flat", True)), threads=threads)]
        elif k == "characteristic":
            if not isinstance(scn.process, LevyTriplet):
                raise ConfigError("process", "characteristic check needs a Lévy process")
            reports = H.characteristic_check(scn.process, _nums(_p(spec, "alphas"), "alphas"), _p(spec, "t", 1.0, float), n or scn.n_paths, seed, scn.name)
        elif k == "transform":
            if not isinstance(scn.process, MapParams):
                raise ConfigError("process", "transform check needs a MAP")
            st = spec.params.get("start_states")
            reports = H.transform_check(scn.process, _p(spec, "alpha", kind=float), _p(spec, "t", scn.horizon, float), n or scn.n_paths, seed, st, scn.name)
        elif k == "pathwise":
            xi = eta = None
            if "xi" in spec.params:
                g = _named(spec.params["xi"], "xi")
                xi = x_only(*g, name=str(spec.params["xi"]))
            if "eta" in spec.params:
                eta = _named(spec.params["eta"], "eta")[0]
            reports = [H.pathwise_identity_check(scn, _p(spec, "identity"), n, _p(spec, "tol", 1e-8, float), xi=xi, eta=eta)]
        else:
            raise ConfigError("kind", f"unknown check kind {k}")
        return CheckResult(scn.name, index, k, spec.expect, tuple(reports), plot=plot, seed=seed)
    except Exception as exc:  # isolate failures per check
        log.debug("check failed:\n%s", traceback.format_exc())
        return CheckResult(scn.name, index, spec.kind, spec.expect, (), error=f"{type(exc).__name__}: {exc}", seed=seed)


def _g(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def result_csv(res: CheckResult, claim: str) -> str:
    buf = io.StringIO()
    buf.write(f"# scenario: {res.scenario}\n")
    buf.write(f"# claim: {claim}\n")
    buf.write(f"# check: {res.kind} (expect {res.expect}); seed {res.seed}\n")
    if res.error:
        buf.write(f"# error: {res.error}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "statistic", "t", "estimate", "se", "target", "threshold", "passed", "n_paths", "seed", "note"])
    for r in res.reports:
        w.writerow([r.scenario, r.statistic, _g(r.t), _g(r.estimate), _g(r.se), _g(r.target), _g(r.threshold), _g(r.passed), r.n_paths, res.seed, r.note])
    return buf.getvalue()


@dataclass(frozen=True)
class SuiteResult:
    results: tuple
    reruns: tuple

    @property
    def n_checks(self) -> int:
        return len(self.results)

    @property
    def green_fraction(self) -> float:
        return 1.0 if not self.results else sum(r.green for r in self.results) / len(self.results)

    @property
    def green(self) -> bool:
        if not self.results:
            return True
        return self.green_fraction >= GREEN_FRACTION and all(r.green for r in self.reruns)


def run_suite(suite: Suite, out_dir, threads: int = 1, seed_override: int | None = None, echo=print) -> SuiteResult:
    out = Path(out_dir)
    results, reruns = [], []
    if not suite.scenarios:
        log.warning("config has no scenarios; nothing to run")
        echo("warning: empty scenario list")
    for sspec in suite.scenarios:
        scn_dir = out / "results" / sspec.scenario.name
        plot_dir = out / "plots" / sspec.scenario.name
        scn_dir.mkdir(parents=True, exist_ok=True)
        for i, c in enumerate(sspec.checks):
            base_seed = None if seed_override is None else int(seed_override)
            res = run_check(sspec, c, i, threads, base_seed)
            results.append(res)
            (scn_dir / f"{res.file_stem}.csv").write_text(result_csv(res, sspec.claim))
            if res.plot:
                plot_dir.mkdir(parents=True, exist_ok=True)
                (plot_dir / f"{res.file_stem}.svg").write_text(res.plot)
            echo(_status_line(res))
            if not res.green:
                rr = run_check(sspec, c, i, threads, (res.seed or 0) + RERUN_OFFSET)
                reruns.append(rr)
                (scn_dir / f"{rr.file_stem}_rerun.csv").write_text(result_csv(rr, sspec.claim))
                echo("  rerun with independent seed: " + _status_line(rr))
    sr = SuiteResult(tuple(results), tuple(reruns))
    (out / "results").mkdir(parents=True, exist_ok=True)
    (out / "results" / "summary.csv").write_text(summary_csv(sr))
    echo(f"suite {'GREEN' if sr.green else 'RED'}: {sum(r.green for r in results)}/{len(results)} checks green")
    return sr


def _status_line(res: CheckResult) -> str:
    flag = "green" if res.green else "RED"
    detail = res.error or "; ".join(r.line() for r in res.reports if not r.passed) or "all statistics within thresholds"
    if res.expect == "fail" and res.green:
        detail = "negative control failed as expected"
    return f"[{flag}] {res.scenario} #{res.index} {res.kind}: {detail}"


def summary_csv(sr: SuiteResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "check", "kind", "expect", "green", "rerun_green", "error"])
    rr = {(r.scenario, r.index): r for r in sr.reruns}
    for r in sr.results:
        again = rr.get((r.scenario, r.index))
        w.writerow([r.scenario, r.index, r.kind, r.expect, _g(r.green), "" if again is None else _g(again.green), r.error])
    w.writerow(["suite", "", "", "", _g(sr.green), "", ""])
    return buf.getvalue()
