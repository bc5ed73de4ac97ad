"""YAML scenario configuration: schema checks with line numbers and builders
for measures, processes, test functions and scenarios.

Numbers may be written as YAML floats or strings such as ``1e5``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import generator as G
from .harness import PerturbedGenerator, Scenario
from .jump_diffusion import JDCoefficients, additive_kernel, affine_sigma, linear_drift, multiplicative_kernel
from .levy import LevyTriplet
from .map_process import MapParams
from .measures import (
    Atom,
    ExponentialDensity,
    JumpMeasure,
    PowerLawDensity,
    UniformDensity,
)


class ConfigError(ValueError):
    def __init__(self, where: str, message: str, line: int | None = None):
        self.where = where
        self.line = line
        loc = f"line {line}: " if line else ""
        super().__init__(f"{loc}field '{where}': {message}")


class _Map(dict):
    """Mapping that remembers the source line of each key."""

    lines: dict
    line: int | None = None

    def line_of(self, key):
        return self.lines.get(key, self.line)


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.lines = {}
    out.line = node.start_mark.line + 1
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        out[key] = loader.construct_object(v_node, deep=True)
        out.lines[key] = k_node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def load_yaml(text: str) -> Any:
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"invalid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from exc


# ---------------------------------------------------------------------------
# field helpers
# ---------------------------------------------------------------------------


def _line(spec, key=None):
    if isinstance(spec, _Map):
        return spec.line_of(key) if key is not None else spec.line
    return None


def _get(spec: Mapping, key: str, where: str, default=..., kind=None):
    if not isinstance(spec, Mapping):
        raise ConfigError(where, "expected a mapping")
    if key not in spec:
        if default is ...:
            raise ConfigError(f"{where}.{key}", "required field missing", _line(spec))
        return default
    v = spec[key]
    if kind is float:
        return _num(v, f"{where}.{key}", _line(spec, key))
    if kind is int:
        f = _num(v, f"{where}.{key}", _line(spec, key))
        if f != int(f):
            raise ConfigError(f"{where}.{key}", f"expected an integer, got {v!r}", _line(spec, key))
        return int(f)
    return v


def _num(v, where, line=None) -> float:
    if isinstance(v, bool):
        raise ConfigError(where, f"expected a number, got {v!r}", line)
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(where, f"expected a number, got {v!r}", line) from None


def _nums(v, where, line=None) -> list[float]:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(where, "expected a list of numbers", line)
    return [_num(a, f"{where}[{i}]", line) for i, a in enumerate(v)]


def _choice(spec, key, where, options, default=...):
    v = _get(spec, key, where, default)
    if v not in options:
        raise ConfigError(f"{where}.{key}", f"must be one of {list(options)}, got {v!r}", _line(spec, key))
    return v


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


def build_measure(spec, where: str = "nu", probability: bool = False) -> JumpMeasure:
    """``{atoms: [[z, mass], ...], densities: [...], epsilon}``; shorthands
    ``{dirac: z}`` and ``{atom: z, mass: m}``; ``null`` is the zero measure."""
    if spec is None:
        return JumpMeasure()
    if isinstance(spec, JumpMeasure):
        return spec
    if not isinstance(spec, Mapping):
        raise ConfigError(where, "expected a measure mapping")
    try:
        if "dirac" in spec:
            return JumpMeasure.dirac(_get(spec, "dirac", where, kind=float))
        allow0 = bool(spec.get("allow_zero_atom", probability))
        if "atom" in spec:
            return JumpMeasure.atom(_get(spec, "atom", where, kind=float), _get(spec, "mass", where, 1.0, float), allow_zero_atom=allow0)
        atoms = []
        for i, a in enumerate(spec.get("atoms", []) or []):
            loc, mass = _nums(a, f"{where}.atoms[{i}]", _line(spec, "atoms"))
            atoms.append(Atom(loc, mass))
        dens = []
        for i, d in enumerate(spec.get("densities", []) or []):
            dens.append(_density(d, f"{where}.densities[{i}]"))
        eps = _get(spec, "epsilon", where, 0.0, float)
        return JumpMeasure(tuple(atoms), tuple(dens), eps, allow0)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(where, str(exc), _line(spec)) from exc


def _density(d, where):
    fam = _choice(d, "family", where, ("exponential", "uniform", "power_law"))
    mass = _get(d, "mass", where, 1.0, float)
    if fam == "exponential":
        return ExponentialDensity(_get(d, "rate", where, kind=float), mass, _get(d, "lower", where, 0.0, float), _get(d, "side", where, 1, int))
    if fam == "uniform":
        return UniformDensity(_get(d, "a", where, kind=float), _get(d, "b", where, kind=float), mass)
    return PowerLawDensity(
        _get(d, "coef", where, kind=float),
        _get(d, "index", where, kind=float),
        _get(d, "lower", where, 0.0, float),
        _get(d, "upper", where, kind=float),
        _get(d, "side", where, 1, int),
    )


# ---------------------------------------------------------------------------
# processes
# ---------------------------------------------------------------------------


def build_triplet(spec, where: str) -> LevyTriplet:
    nu = build_measure(spec.get("nu"), f"{where}.nu")
    sigma = _get(spec, "sigma", where, 0.0, float)
    try:
        if "net_drift" in spec:
            if "c" in spec:
                raise ConfigError(where, "give either c or net_drift, not both", _line(spec))
            return LevyTriplet.from_net_drift(_get(spec, "net_drift", where, kind=float), sigma, nu)
        return LevyTriplet(_get(spec, "c", where, 0.0, float), sigma, nu)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(where, str(exc), _line(spec)) from exc


def build_process(spec, where: str = "process"):
    kind = _choice(spec, "kind", where, ("levy", "jump_diffusion", "map"))
    if kind == "levy":
        return build_triplet(spec, where)
    if kind == "jump_diffusion":
        return _build_jd(spec, where)
    return _build_map(spec, where)


def _build_jd(spec, where):
    n = _get(spec, "dim", where, 1, int)
    dr = _get(spec, "drift", where, {"family": "linear", "a": 0.0})
    _choice(dr, "family", f"{where}.drift", ("linear",))
    a = np.asarray(dr.get("a", 0.0), dtype=float) * (np.eye(n) if np.ndim(dr.get("a", 0.0)) == 0 else 1.0)
    b = linear_drift(a, np.asarray(dr.get("d", 0.0), dtype=float))
    sg = spec.get("sigma")
    sigma = None
    if sg is not None:
        _choice(sg, "family", f"{where}.sigma", ("affine",))
        sigma = affine_sigma(sg.get("s0", 0.0), sg.get("s1", 0.0))
    kernels = []
    for i, k in enumerate(spec.get("kernels", []) or []):
        w = f"{where}.kernels[{i}]"
        fam = _choice(k, "family", w, ("additive", "multiplicative"))
        scale = _get(k, "scale", w, 1.0, float)
        axis = k.get("axis")
        maker = additive_kernel if fam == "additive" else multiplicative_kernel
        kernels.append((maker(scale, axis, n), build_measure(k.get("nu"), f"{w}.nu")))
    try:
        return JDCoefficients(n, b, sigma, tuple(kernels), noise_dim=n, lipschitz=spec.get("lipschitz"))
    except ValueError as exc:
        raise ConfigError(where, str(exc), _line(spec)) from exc


def _build_map(spec, where):
    Q = _get(spec, "Q", where)
    if not isinstance(Q, list) or not all(isinstance(r, list) for r in Q):
        raise ConfigError(f"{where}.Q", "expected a dense row-major list of rows", _line(spec, "Q"))
    Q = np.array([_nums(r, f"{where}.Q[{i}]", _line(spec, "Q")) for i, r in enumerate(Q)])
    states = _get(spec, "states", where)
    if not isinstance(states, list):
        raise ConfigError(f"{where}.states", "expected a list of per-state triplets", _line(spec, "states"))
    trip = tuple(build_triplet(s, f"{where}.states[{i}]") for i, s in enumerate(states))
    Gs = {}
    for i, g in enumerate(spec.get("G", []) or []):
        w = f"{where}.G[{i}]"
        Gs[(_get(g, "from", w, kind=int), _get(g, "to", w, kind=int))] = build_measure(_get(g, "law", w), f"{w}.law", probability=True)
    init = spec.get("initial")
    try:
        return MapParams(Q, trip, Gs, None if init is None else np.asarray(_nums(init, f"{where}.initial"), dtype=float))
    except ValueError as exc:
        raise ConfigError(where, str(exc), _line(spec)) from exc


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

# name -> (g, g', g'')
NAMED = {
    "identity": (lambda z: z, lambda z: np.ones_like(np.asarray(z, dtype=float)), lambda z: np.zeros_like(np.asarray(z, dtype=float))),
    "square": (lambda z: z * z, lambda z: 2 * z, lambda z: 2 + 0 * z),
    "sin": (np.sin, np.cos, lambda z: -np.sin(z)),
    "cos": (np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z)),
    "exp": (np.exp, np.exp, np.exp),
    "exp_neg": (lambda z: np.exp(-z), lambda z: -np.exp(-z), lambda z: np.exp(-z)),
    "cube_pos": (lambda z: np.maximum(z, 0.0) ** 3, lambda z: 3 * np.maximum(z, 0.0) ** 2, lambda z: 6 * np.maximum(z, 0.0)),
    "one": (lambda z: 1.0 + 0 * z, lambda z: 0 * z, lambda z: 0 * z),
}


def _named(name, where, line=None):
    if name not in NAMED:
        raise ConfigError(where, f"unknown function '{name}'; known: {sorted(NAMED)}", line)
    return NAMED[name]


def build_test_function(spec, where: str = "f") -> G.TestFunction:
    fam = _choice(
        spec,
        "family",
        where,
        ("exp_i_alpha", "exp_alpha", "exp_neg_alpha", "sin_alpha", "polynomial", "product", "x_only", "of_sum", "table", "state_indicator"),
    )
    if fam in ("exp_i_alpha", "exp_alpha", "exp_neg_alpha", "sin_alpha"):
        f = getattr(G, fam)(_get(spec, "alpha", where, kind=float))
    elif fam == "polynomial":
        coef = _get(spec, "coefficients", where)
        if not isinstance(coef, list) or not all(isinstance(r, list) for r in coef):
            raise ConfigError(f"{where}.coefficients", "expected a table a[j][k] of x^j y^k coefficients", _line(spec, "coefficients"))
        f = G.polynomial([_nums(r, f"{where}.coefficients", _line(spec, "coefficients")) for r in coef])
    elif fam == "product":
        xi = _named(_get(spec, "xi", where), f"{where}.xi", _line(spec, "xi"))
        eta = _named(_get(spec, "eta", where), f"{where}.eta", _line(spec, "eta"))
        f = G.product(xi[0], eta[0], xi[1], xi[2], eta[1], name=f"{spec['xi']}(x)*{spec['eta']}(y)")
    elif fam == "x_only":
        xi = _named(_get(spec, "xi", where), f"{where}.xi", _line(spec, "xi"))
        f = G.x_only(*xi, name=f"{spec['xi']}(x)")
    elif fam == "of_sum":
        g = _named(_get(spec, "g", where), f"{where}.g", _line(spec, "g"))
        f = G.of_sum(*g, name=f"{spec['g']}(x+y)")
    elif fam == "table":
        from scipy.interpolate import CubicSpline

        z = _nums(_get(spec, "z", where), f"{where}.z", _line(spec, "z"))
        v = _nums(_get(spec, "values", where), f"{where}.values", _line(spec, "values"))
        if len(z) != len(v) or len(z) < 4 or np.any(np.diff(z) <= 0):
            raise ConfigError(where, "table needs >= 4 increasing z values matching values", _line(spec))
        cs = CubicSpline(z, v)
        d1, d2 = cs.derivative(1), cs.derivative(2)
        f = G.of_sum(cs, d1, d2, name="table(x+y)")
    else:
        base = build_test_function(_get(spec, "base", where), f"{where}.base")
        f = G.state_indicator(base, _get(spec, "state", where, kind=int))
    if "h" in spec:
        from dataclasses import replace

        f = replace(f, h=_get(spec, "h", where, kind=float))
    return f


def build_box(spec, where="domain") -> G.Box | None:
    if spec is None:
        return None
    x = tuple(_nums(_get(spec, "x", where, [-1.0, 1.0]), f"{where}.x", _line(spec, "x")))
    y = tuple(_nums(_get(spec, "y", where, [0.0, 0.0]), f"{where}.y", _line(spec, "y")))
    st = spec.get("states")
    return G.Box(x, y, None if st is None else tuple(int(s) for s in st))


# ---------------------------------------------------------------------------
# scenarios and checks
# ---------------------------------------------------------------------------

CHECK_KINDS = (
    "zero_mean",
    "isometry",
    "l2_growth",
    "rate",
    "pk",
    "reflected_generator",
    "characteristic",
    "transform",
    "pathwise",
)


@dataclass(frozen=True)
class CheckSpec:
    kind: str
    params: Mapping
    expect: str = "pass"
    line: int | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario
    checks: tuple
    claim: str
    line: int | None = None
    raw: Mapping = field(default_factory=dict)


def build_scenario(spec, where: str) -> ScenarioSpec:
    name = _get(spec, "name", where)
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigError(f"{where}.name", "must be a non-empty string without '/'", _line(spec, "name"))
    proc = build_process(_get(spec, "process", where), f"{where}.process")
    horizon = _get(spec, "horizon", where, 1.0, float)
    dt = _get(spec, "dt", where, 0.01, float)
    if not dt > 0:
        raise ConfigError(f"{where}.dt", "must be positive", _line(spec, "dt"))
    if dt > horizon:
        raise ConfigError(f"{where}.dt", f"dt={dt} exceeds horizon={horizon}", _line(spec, "dt"))
    n_paths = _get(spec, "n_paths", where, 1000, int)
    if n_paths < 1:
        raise ConfigError(f"{where}.n_paths", "must be at least 1", _line(spec, "n_paths"))
    y = spec.get("y")
    if y is not None and y != "reflection" and not isinstance(y, Mapping):
        raise ConfigError(f"{where}.y", "expected null, 'reflection' or an FV spec mapping", _line(spec, "y"))
    martingale = _choice(spec, "martingale", where, ("generic", "kella_whitt", "laplace_kw", "map_vector"), "generic")
    alpha = spec.get("alpha")
    alpha = None if alpha is None else _get(spec, "alpha", where, kind=float)
    f = build_test_function(spec["f"], f"{where}.f") if spec.get("f") is not None else None
    gen_spec = spec.get("generator")
    scn_kw = dict(
        name=name,
        process=proc,
        f=f,
        x0=spec.get("x0", 0.0),
        y=y,
        horizon=horizon,
        dt=dt,
        n_paths=n_paths,
        seed=_get(spec, "seed", where, 0, int),
        domain=build_box(spec.get("domain"), f"{where}.domain"),
        j0=spec.get("j0"),
        martingale=martingale,
        alpha=alpha,
        rule=_choice(spec, "rule", where, ("midpoint", "right"), "midpoint"),
        claim=str(spec.get("claim", "")),
    )
    try:
        scn = Scenario(**scn_kw)
        if gen_spec is not None:
            eps = _get(gen_spec, "perturb", f"{where}.generator", kind=float)
            from dataclasses import replace

            scn = replace(scn, generator=PerturbedGenerator(scn.gen(), eps))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(where, str(exc), _line(spec)) from exc
    checks = []
    for i, c in enumerate(spec.get("checks", []) or []):
        w = f"{where}.checks[{i}]"
        kind = _choice(c, "kind", w, CHECK_KINDS)
        expect = _choice(c, "expect", w, ("pass", "fail"), "pass")
        checks.append(CheckSpec(kind, c, expect, _line(c)))
    return ScenarioSpec(scn, tuple(checks), scn.claim, _line(spec), spec)


@dataclass(frozen=True)
class Suite:
    name: str
    scenarios: tuple
    source: str = ""


def parse_config(text: str, source: str = "<string>") -> Suite:
    doc = load_yaml(text)
    if doc is None:
        doc = _Map()
        doc.lines = {}
    if not isinstance(doc, Mapping):
        raise ConfigError("<document>", "top level must be a mapping")
    scen = doc.get("scenarios", []) or []
    if not isinstance(scen, list):
        raise ConfigError("scenarios", "expected a list", _line(doc, "scenarios"))
    out = [build_scenario(s, f"scenarios[{i}]") for i, s in enumerate(scen)]
    names = [s.scenario.name for s in out]
    if len(set(names)) != len(names):
        raise ConfigError("scenarios", "scenario names must be unique")
    return Suite(str(doc.get("suite", Path(source).stem)), tuple(out), source)


def load_config(path) -> Suite:
    """Load a config file; ``paper-suite`` (or ``bundled:NAME``) names a bundled config."""
    p = str(path)
    if p.startswith("bundled:") or (p == "paper-suite" and not Path(p).exists()):
        name = p.split(":", 1)[-1]
        text = resources.files("mforge").joinpath("configs", f"{name}.yaml").read_text()
        return parse_config(text, f"bundled:{name}")
    return parse_config(Path(p).read_text(), p)
