"""Acceptance criteria 1-11 at full size.

Every criterion prints one ``criterion N: PASS|FAIL ...`` line (also echoed
in the pytest terminal summary) and asserts the same verdict.
"""

import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from mforge import harness as H
from mforge import suite as S
from mforge.config import load_config
from mforge.generator import LevyGenerator, x_only
from mforge.levy import LevyTriplet
from mforge.measures import ExponentialDensity, JumpMeasure

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def bundled():
    return {s.scenario.name: s.scenario for s in load_config("paper-suite").scenarios}


def verdict(n: int, ok: bool, detail: str, started: float, budget: float | None = None) -> None:
    took = time.perf_counter() - started
    within = budget is None or took < budget
    flag = "PASS" if ok and within else "FAIL"
    limit = "" if budget is None else f" (budget {budget:g}s)"
    line = f"criterion {n}: {flag} {detail}; {took:.1f}s{limit}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def worst(reports) -> str:
    bad = [r for r in reports if not r.passed]
    r = bad[0] if bad else max(reports, key=lambda r: abs(r.estimate - r.target) / r.threshold if r.threshold else 0.0)
    return f"worst: {r.statistic}{'' if r.t is None else f' t={r.t:g}'} estimate {r.estimate:.6g} target {r.target:.6g} threshold {r.threshold:.3g}"


MM1 = LevyTriplet.from_net_drift(-1.0, 0.0, JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=0.5),)))


def test_stieltjes_degeneracy(bundled):
    t0 = time.perf_counter()
    r = H.pathwise_identity_check(bundled["stieltjes_degeneracy"], "zero", n_paths=1, tol=1e-12)
    verdict(1, r.passed, f"sup|M| = {r.estimate:.3g} (< 1e-12) for y^2 with a 5-jump staircase", t0, 1.0)


def test_dynkin_square(bundled):
    t0 = time.perf_counter()
    scn = bundled["dynkin_square"]
    reports = H.mc_zero_mean(scn, [1.0], 10_000) + H.qv_isometry_check(scn, [1.0], 10_000)
    verdict(2, all(r.passed for r in reports), f"mean of M_1 and E M_1^2 vs predictable QV on 1e4 paths; {worst(reports)}", t0, 30.0)


def test_kella_whitt_equality(bundled):
    t0 = time.perf_counter()
    r = H.pathwise_identity_check(bundled["mm1_kella_whitt"], "kella_whitt", n_paths=100, tol=1e-8)
    verdict(3, r.passed, f"sup gap {r.estimate:.3g} (< 1e-8) over 100 reflected M/M/1 paths", t0, 30.0)


def test_characteristic_identity(bundled):
    t0 = time.perf_counter()
    reports = []
    for name in ("characteristic_brownian", "characteristic_compound_poisson"):
        reports += H.characteristic_check(bundled[name].process, [0.5, 1.0, 2.0], 1.0, 100_000, bundled[name].seed, name)
    verdict(4, all(r.passed for r in reports), f"{len(reports)} components within 3 SE on 1e5 paths; {worst(reports)}", t0, 60.0)


def test_l2_isometry(bundled):
    t0 = time.perf_counter()
    reports = []
    for name in ("reflected_cp_isometry", "jd_sine", "map_two_state"):
        reports += [r for r in H.qv_isometry_check(bundled[name], [1.0, 5.0, 10.0], 10_000) if r.statistic.startswith("E|M|^2")]
    verdict(5, all(r.passed for r in reports), f"E M_t^2 within 5% of predictable QV at t=1,5,10 for Levy-KW, JD and MAP (1e4 paths each); {worst(reports)}", t0, 300.0)


def test_weighted_rates(bundled):
    t0 = time.perf_counter()
    scn = bundled["reflected_cp_rates"]
    l2 = H.rate_convergence_check(scn, H.WeightFunction.power(1.0), np.geomspace(1.0, 1e3, 10), 100, mode="l2")
    pathwise = H.rate_convergence_check(scn, H.WeightFunction.power(0.75), np.geomspace(1.0, 1e5, 11), 20, mode="as")
    ok = l2.passed and pathwise.passed
    verdict(6, ok, f"E(M_t/t)^2 final/initial {l2.estimate:.3g} ({l2.note}); gamma=0.75: {pathwise.estimate:g}/20 paths without a factor-5 drop by T=1e5", t0, 300.0)


def test_pollaczek_khinchine():
    t0 = time.perf_counter()
    stable, _ = H.pk_limit_check(MM1, 1.0, 1e5, 1e-2, seed=11, cross_paths=0, name="mm1")
    heavy = LevyTriplet.from_net_drift(-1.0, 0.0, JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=2.0),)))
    unstable, _ = H.pk_limit_check(heavy, 1.0, 1e5, 1e-2, seed=12, cross_paths=0, name="unstable")
    s, u = stable[0], unstable[0]
    ok = s.passed and abs(s.target - 2 / 3) < 1e-12 and u.estimate < 0.05
    verdict(7, ok, f"time average {s.estimate:.5f} vs {s.target:.5f} (2%); unstable {u.estimate:.3g} (< 0.05)", t0, 180.0)


def test_map_transform(bundled):
    t0 = time.perf_counter()
    reports = H.transform_check(bundled["map_two_state"].process, 0.2, 2.0, 100_000, seed=10)
    verdict(8, all(r.passed for r in reports), f"all {len(reports)} entries of exp(F(0.2) 2) within 3 SE on 1e5 paths; {worst(reports)}", t0, 180.0)


def test_reflected_generator(bundled):
    t0 = time.perf_counter()
    flat = H.reflected_generator_check(bundled["reflected_flat_generator"], 10_000)
    bent = H.reflected_generator_check(bundled["reflected_nonflat_control"], 10_000, require_flat=False)
    ok = flat.passed and not bent.passed
    verdict(9, ok, f"flat g mean {flat.estimate:.3g} (3 SE {flat.threshold:.3g}); non-flat control mean {bent.estimate:.3g} (3 SE {bent.threshold:.3g}) fails", t0, 120.0)


def test_product_form(bundled):
    t0 = time.perf_counter()
    xi = x_only(np.sin, np.cos, lambda x: -np.sin(x), name="sin")
    r = H.pathwise_identity_check(bundled["product_form"], "product_form", tol=1e-8, xi=xi, eta=lambda y: np.exp(-y))
    verdict(10, r.passed, f"sup gap {r.estimate:.3g} (< 1e-8) between product form and direct assembly", t0, 30.0)


def test_negative_control_and_determinism(tmp_path, bundled):
    t0 = time.perf_counter()
    scn = replace(bundled["dynkin_square"], horizon=10.0, dt=0.05, generator=H.PerturbedGenerator(LevyGenerator(bundled["dynkin_square"].process), 0.1))
    control = H.mc_zero_mean(scn, [10.0], 10_000)
    caught = not all(r.passed for r in control)
    suite = load_config("paper-suite")
    quiet = lambda *_: None
    first = S.run_suite(suite, tmp_path / "a", threads=1, echo=quiet)
    second = S.run_suite(suite, tmp_path / "b", threads=4, echo=quiet)

    def csvs(root):
        return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*.csv"))}

    a, b = csvs(tmp_path / "a"), csvs(tmp_path / "b")
    same = a == b and len(a) > 0
    ok = caught and same and first.green
    verdict(
        11,
        ok,
        f"perturbed generator mean {control[0].estimate:.3g} vs 3 SE {control[0].threshold:.3g} (caught: {caught}); "
        f"bundled suite green={first.green}, {len(a)} CSVs byte-identical across reruns and thread counts: {same}",
        t0,
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
