"""Command-line front end: ``mforge run|describe|histogram CONFIG``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import harness as H
from . import suite as S
from .config import ConfigError, load_config
from .generator import map_exponent_matrix
from .jump_diffusion import JDCoefficients, check_kernel_finiteness, convert_drift, lipschitz_spot_check
from .levy import LevyTriplet, laplace_exponent, levy_exponent, mean_rate
from .map_process import MapParams
from .measures import MeasureError
from .svg import bar_chart


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get("MFORGE_OUT") or "mforge-out")


def _alphas(sspec) -> list[float]:
    found = []
    scn = sspec.scenario
    if scn.alpha is not None:
        found.append(float(scn.alpha))
    fspec = sspec.raw.get("f") if hasattr(sspec.raw, "get") else None
    if isinstance(fspec, dict) and "alpha" in fspec:
        found.append(float(fspec["alpha"]))
    for c in sspec.checks:
        if "alpha" in c.params:
            found.append(float(c.params["alpha"]))
        for a in c.params.get("alphas", []) or []:
            found.append(float(a))
    if not found:
        found = [1.0]
    return sorted(set(found))


def _describe_triplet(t: LevyTriplet, alphas, indent="  ") -> list[str]:
    lines = [f"{indent}triplet: c = {t.c:.12g}, sigma = {t.sigma:.12g}, nu = {_describe_measure(t.nu)}"]
    lines.append(f"{indent}net drift between jumps: {t.net_drift():.12g}")
    try:
        lines.append(f"{indent}E X_1 = {mean_rate(t):.12g}")
    except MeasureError as exc:
        lines.append(f"{indent}E X_1: {exc}")
    for a in alphas:
        psi = levy_exponent(t, a)
        lines.append(f"{indent}psi({a:g}) = {psi.real:.12g} {psi.imag:+.12g}i")
        if t.spectrally_positive and a > 0:
            try:
                lines.append(f"{indent}phi({a:g}) = {laplace_exponent(t, a):.12g}")
                if mean_rate(t) < 0:
                    lines.append(f"{indent}Pollaczek-Khinchine value alpha phi'(0)/phi(alpha) at {a:g}: {H.pk_target(t, a):.12g}")
            except MeasureError as exc:
                lines.append(f"{indent}phi({a:g}): {exc}")
    return lines


def _describe_measure(m) -> str:
    if m.is_zero:
        return "0"
    parts = [f"atom({a.location:g}, mass {a.mass:g})" for a in m.atoms]
    parts += [d.describe() for d in m.densities]
    return " + ".join(parts)


def describe_suite(suite) -> str:
    out = [f"suite: {suite.name} ({len(suite.scenarios)} scenarios)"]
    for sspec in suite.scenarios:
        scn = sspec.scenario
        out.append("")
        out.append(f"scenario {scn.name}: {scn.claim}")
        out.append(f"  horizon {scn.horizon:g}, dt {scn.dt:g}, n_paths {scn.n_paths}, seed {scn.seed}, x0 {scn.x0}, Y {scn.y if scn.y is not None else 'zero'}")
        out.append(f"  martingale: {scn.martingale}; test function: {scn.f.name}")
        alphas = _alphas(sspec)
        p = scn.process
        if isinstance(p, LevyTriplet):
            out += _describe_triplet(p, alphas)
        elif isinstance(p, MapParams):
            out.append(f"  MAP with {p.K} states; Q = {np.array2string(p.Q, precision=6)}")
            out.append(f"  stationary law: {np.array2string(p.stationary(), precision=8)}")
            for i, t in enumerate(p.triplets):
                out.append(f"  state {i}:")
                out += _describe_triplet(t, alphas, "    ")
            for a in alphas:
                try:
                    F = map_exponent_matrix(p, a)
                    out.append(f"  F({a:g}) = {np.array2string(F, precision=10)}")
                except MeasureError as exc:
                    out.append(f"  F({a:g}): {exc}")
        elif isinstance(p, JDCoefficients):
            x0 = np.broadcast_to(np.asarray(scn.x0, dtype=float), (p.dim,))
            out.append(f"  jump diffusion in dimension {p.dim} with {len(p.kernels)} kernel(s)")
            out.append(f"  converted drift c(x0) = {np.array2string(np.atleast_1d(convert_drift(p, x0[None, :])[0]), precision=10)}")
            out.append(f"  simulation drift at x0 = {np.array2string(p.simulation_drift(x0[None, :])[0], precision=10)}")
            out.append("  " + str(check_kernel_finiteness(p, x0)))
            out.append("  " + str(lipschitz_spot_check(p)))
        try:
            reports, C, ok = H.qv_bound(scn)
            for r in reports:
                out.append("  " + str(r))
            out.append(f"  sup of the predictable-QV integrand over the domain: {C:.6g} ({'ok' if ok else 'bound check failed'})")
        except Exception as exc:
            out.append(f"  bound check unavailable: {exc}")
        out.append("  checks: " + (", ".join(f"{c.kind}({c.expect})" for c in sspec.checks) or "none"))
    return "\n".join(out) + "\n"


def _cmd_run(args) -> int:
    suite = load_config(args.config)
    res = S.run_suite(suite, _out_dir(args), threads=args.threads, seed_override=args.seed_override)
    return 0 if res.green else 1


def _cmd_describe(args) -> int:
    sys.stdout.write(describe_suite(load_config(args.config)))
    return 0


def _cmd_histogram(args) -> int:
    suite = load_config(args.config)
    match = [s for s in suite.scenarios if s.scenario.name == args.scenario]
    if not match:
        raise ConfigError("--scenario", f"no scenario named '{args.scenario}'; available: {[s.scenario.name for s in suite.scenarios]}")
    scn = match[0].scenario
    if args.seed_override is not None:
        scn = scn.with_seed(args.seed_override)
    t = scn.horizon if args.t is None else float(args.t)
    vals = H.sqrt_t_sample(scn, t, args.n_paths, threads=args.threads)
    counts, edges = np.histogram(vals, bins=args.bins)
    out = _out_dir(args)
    (out / "results" / scn.name).mkdir(parents=True, exist_ok=True)
    (out / "plots" / scn.name).mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# exploratory histogram of M_t/sqrt(t) at t={t:g}; no pass/fail semantics\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_left", "bin_right", "count"])
    for a, b, c in zip(edges[:-1], edges[1:], counts):
        w.writerow([f"{a:.17g}", f"{b:.17g}", int(c)])
    (out / "results" / scn.name / "histogram.csv").write_text(buf.getvalue())
    (out / "plots" / scn.name / "histogram.svg").write_text(bar_chart(edges, counts.tolist(), f"{scn.name}: M_t/sqrt(t) at t={t:g}", "M_t/sqrt(t)"))
    mu, sd = float(vals.mean()), float(vals.std(ddof=1))
    m3 = float(np.mean(((vals - mu) / sd) ** 3)) if sd > 0 else math.nan
    m4 = float(np.mean(((vals - mu) / sd) ** 4)) - 3.0 if sd > 0 else math.nan
    print(f"M_t/sqrt(t) at t={t:g} over {len(vals)} paths (exploratory, no verdict)")
    print(f"mean {mu:.6g}  sd {sd:.6g}  skewness {m3:.4g}  excess kurtosis {m4:.4g}")
    top = max(int(counts.max()), 1)
    for a, b, c in zip(edges[:-1], edges[1:], counts):
        print(f"{a:>10.4g} .. {b:<10.4g} {'#' * int(round(40 * c / top))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mforge", description="Simulate Lévy-driven processes coupled with FV processes and verify generator martingales.")
    p.add_argument("--threads", type=int, default=1, help="worker threads for path generation (default 1)")
    p.add_argument("--seed-override", type=int, default=None, help="replace every scenario seed")
    p.add_argument("--out-dir", default=None, help="output directory (default $MFORGE_OUT or ./mforge-out)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every scenario's checks and write CSV and SVG outputs")
    r.add_argument("config", help="YAML config path or 'paper-suite' for the bundled suite")
    d = sub.add_parser("describe", help="print resolved parameters, exponents and bound checks")
    d.add_argument("config")
    h = sub.add_parser("histogram", help="exploratory histogram of M_t/sqrt(t)")
    h.add_argument("config")
    h.add_argument("--scenario", required=True)
    h.add_argument("--t", type=float, default=None)
    h.add_argument("--bins", type=int, default=30)
    h.add_argument("--n-paths", type=int, default=None)
    # accept global flags after the subcommand too
    for s in (r, d, h):
        s.add_argument("--threads", type=int, default=argparse.SUPPRESS)
        s.add_argument("--seed-override", type=int, default=argparse.SUPPRESS)
        s.add_argument("--out-dir", default=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return {"run": _cmd_run, "describe": _cmd_describe, "histogram": _cmd_histogram}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
