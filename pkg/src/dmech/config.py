"""Run configuration files: ``[section]`` headers and ``key = value`` lines.

``#`` starts a comment. Vectors are comma-separated reals. Custom systems
give expressions in the grammar of :mod:`dmech.expr`; vector-valued entries
separate components with ``;`` and matrix columns (or rows of forms) with ``|``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import systems
from .bundle import TrivialBundle
from .dms import DiscreteMechanicalSystem
from .errors import ConfigError
from .expr import compile_expression, pair_env, pair_variables, point_env, point_variables
from .forced import ForcedDMS
from .lie import LieGroup
from .nonholonomic import NonholonomicDMS
from .numerics import DerivativeScheme, NewtonConfig

MODES = ("simulate", "reduce", "routh", "nonholonomic", "two_stage", "diagnose")

SCHEMA: Dict[str, Dict[str, str]] = {
    "system": {"name": "str", "h": "float", "n": "int", "omega": "float", "k": "float",
               "b": "float", "asymmetry": "float", "c": "float", "lagrangian": "str",
               "f_minus": "str", "f_plus": "str", "chi": "str", "basis": "str",
               "annihilator": "str"},
    "symmetry": {"group": "str", "fiber_indices": "ints", "shape_indices": "ints"},
    "constants": {},
    "run": {"mode": "str", "q0": "vector", "q1": "vector", "steps": "int", "mu": "vector",
            "split": "int", "seed": "int"},
    "solver": {"tol": "float", "max_iter": "int", "damping": "str", "fd_step": "float",
               "derivatives": "str"},
    "checks": {"residual_tol": "float", "equivalence_tol": "float", "momentum_tol": "float",
               "invariance_tol": "float", "samples": "int"},
    "output": {"dir": "str"},
}

BUILTIN_PARAMS = {
    "free_particle": ("n", "h"),
    "harmonic_oscillator": ("h", "omega", "n"),
    "central_force": ("h", "k", "b", "asymmetry"),
    "central_force_product": ("h", "k", "b"),
    "damped_particle": ("h", "c", "n"),
    "nonholonomic_particle": ("h",),
}
CUSTOM_KEYS = ("n", "h", "lagrangian", "f_minus", "f_plus", "chi", "basis", "annihilator")


@dataclass
class RunConfig:
    path: str
    system: Dict[str, object]
    mode: str
    q0: np.ndarray
    q1: np.ndarray
    steps: int
    newton: NewtonConfig
    scheme: DerivativeScheme
    mu: Optional[np.ndarray] = None
    split: int = 1
    seed: int = 0
    symmetry: Dict[str, object] = field(default_factory=dict)
    constants: Dict[str, float] = field(default_factory=dict)
    checks: Dict[str, float] = field(default_factory=dict)
    out_dir: Optional[str] = None
    lines: Dict[Tuple[str, str], int] = field(default_factory=dict, repr=False)

    def check(self, name: str) -> float:
        return self.checks[name]


DEFAULT_CHECKS = {"residual_tol": 1e-10, "equivalence_tol": 1e-8, "momentum_tol": 1e-9,
                  "invariance_tol": 1e-8, "samples": 100}


def _convert(kind, raw, line, key):
    try:
        if kind == "str":
            return raw
        if kind == "float":
            return float(raw)
        if kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind == "vector":
            vals = np.array([float(p) for p in raw.split(",")], dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ValueError
            return vals
        if kind == "ints":
            return [int(p) for p in raw.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind}", line, key) from None
    raise AssertionError(kind)


def read_sections(text: str):
    """``{section: {key: (value, line)}}`` with duplicate and unknown-key checks."""
    out: Dict[str, Dict[str, tuple]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[([A-Za-z_]+)\]", line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in out:
                raise ConfigError(f"section [{section}] appears twice", lineno)
            out[section] = {}
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", key):
            raise ConfigError(f"bad key {key!r}", lineno)
        schema = SCHEMA[section]
        if section == "constants":
            kind = "float"
        elif key not in schema:
            raise ConfigError(f"unknown key in [{section}]", lineno, key)
        else:
            kind = schema[key]
        if key in out[section]:
            raise ConfigError("duplicate key", lineno, key)
        if value == "":
            raise ConfigError("empty value", lineno, key)
        out[section][key] = (_convert(kind, value, lineno, key), lineno)
    return out


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    sec = read_sections(text)
    lines = {(s, k): v[1] for s, kv in sec.items() for k, v in kv.items()}

    def get(s, k, default=None):
        return sec.get(s, {}).get(k, (default, None))[0]

    def where(s, k):
        return lines.get((s, k))

    system = {k: v[0] for k, v in sec.get("system", {}).items()}
    if "name" not in system:
        raise ConfigError("missing required field", None, "system.name")
    name = system["name"]
    if name != "custom" and name not in BUILTIN_PARAMS:
        raise ConfigError(f"unknown system {name!r}", where("system", "name"), "name")
    allowed = CUSTOM_KEYS if name == "custom" else BUILTIN_PARAMS[name]
    for k in system:
        if k != "name" and k not in allowed:
            raise ConfigError(f"not a parameter of system {name!r}", where("system", k), k)
    if name == "custom":
        for k in ("n", "lagrangian"):
            if k not in system:
                raise ConfigError("missing required field for a custom system", None, f"system.{k}")
        if system["n"] < 1:
            raise ConfigError("n must be positive", where("system", "n"), "n")
        nh_keys = [k for k in ("chi", "basis", "annihilator") if k in system]
        if nh_keys and len(nh_keys) != 3:
            raise ConfigError("chi, basis and annihilator must be given together", None, "system.chi")

    mode = get("run", "mode", "simulate")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}",
                          where("run", "mode"), "mode")
    for k in ("q0", "q1"):
        if get("run", k) is None:
            raise ConfigError("missing required seed", None, f"run.{k}")
    steps = get("run", "steps")
    if steps is None:
        if mode != "diagnose":
            raise ConfigError("missing required field", None, "run.steps")
        steps = 1
    if steps < 1:
        raise ConfigError("steps must be >= 1", where("run", "steps"), "steps")
    mu = get("run", "mu")
    if mode == "routh" and mu is None:
        raise ConfigError("mode=routh requires mu", None, "run.mu")

    try:
        newton = NewtonConfig(tol=get("solver", "tol", 1e-12), max_iter=get("solver", "max_iter", 50),
                              damping=get("solver", "damping", "backtracking"))
        scheme = DerivativeScheme(mode=get("solver", "derivatives", "analytic-if-available"),
                                  fd_step=get("solver", "fd_step", 1e-6))
    except ValueError as exc:
        raise ConfigError(str(exc), None, "solver") from None

    checks = dict(DEFAULT_CHECKS)
    checks.update({k: v[0] for k, v in sec.get("checks", {}).items()})
    cfg = RunConfig(
        path=str(path), system=system, mode=mode, q0=get("run", "q0"), q1=get("run", "q1"),
        steps=int(steps), newton=newton, scheme=scheme, mu=mu, split=get("run", "split", 1),
        seed=get("run", "seed", 0),
        symmetry={k: v[0] for k, v in sec.get("symmetry", {}).items()},
        constants={k: v[0] for k, v in sec.get("constants", {}).items()},
        checks=checks, out_dir=get("output", "dir"), lines=lines)

    # building the system validates dimensions and expressions
    setup = build(cfg)
    n = setup.sys.n
    for k in ("q0", "q1"):
        if getattr(cfg, k).size != n:
            raise ConfigError(f"seed has {getattr(cfg, k).size} entries, system has {n}",
                              where("run", k), k)
    needs_symmetry = mode in ("reduce", "routh", "two_stage")
    if needs_symmetry and setup.bundle is None:
        raise ConfigError(f"mode={mode} needs a symmetry ([symmetry] group)", None, "symmetry.group")
    if mode == "nonholonomic" and setup.nh is None:
        raise ConfigError("mode=nonholonomic needs a nonholonomic system", None, "system.chi")
    if mu is not None and setup.bundle is not None and mu.size != setup.bundle.group.dim:
        raise ConfigError("mu does not match the group dimension", where("run", "mu"), "mu")
    if mode == "two_stage" and setup.bundle.group.kind != "product":
        raise ConfigError("mode=two_stage needs a product group", None, "symmetry.group")
    return cfg


# ----------------------------------------------------------------------------
# building systems


@dataclass
class SystemSetup:
    sys: DiscreteMechanicalSystem
    bundle: Optional[TrivialBundle]
    source: object
    forced: Optional[ForcedDMS] = None
    nh: Optional[NonholonomicDMS] = None


def parse_group(text: str, line=None) -> LieGroup:
    s = text.replace(" ", "")

    def parse(i):
        m = re.match(r"vector\((\d+)\)", s[i:])
        if m:
            return LieGroup.vector(int(m.group(1))), i + m.end()
        if s.startswith("circle", i):
            return LieGroup.circle(), i + len("circle")
        if s.startswith("product(", i):
            i += len("product(")
            factors = []
            while True:
                f, i = parse(i)
                factors.append(f)
                if i < len(s) and s[i] == ",":
                    i += 1
                    continue
                if i < len(s) and s[i] == ")":
                    return LieGroup.product(*factors), i + 1
                raise ConfigError(f"bad group {text!r}", line, "group")
        raise ConfigError(f"bad group {text!r}", line, "group")

    g, end = parse(0)
    if end != len(s):
        raise ConfigError(f"bad group {text!r}", line, "group")
    return g


def _bundle_from(cfg: RunConfig, n: int) -> Optional[TrivialBundle]:
    sym = cfg.symmetry
    if not sym:
        return None
    if "group" not in sym:
        raise ConfigError("missing required field", None, "symmetry.group")
    grp = parse_group(sym["group"], cfg.lines.get(("symmetry", "group")))
    fib = sym.get("fiber_indices")
    if fib is None:
        fib = list(range(n - grp.dim, n))
    shp = sym.get("shape_indices")
    if shp is None:
        shp = [i for i in range(n) if i not in fib]
    try:
        return TrivialBundle(grp, n - grp.dim, shape_indices=shp, fiber_indices=fib)
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.lines.get(("symmetry", "fiber_indices")), "fiber_indices") from None


def _components(text, sep=";"):
    return [p.strip() for p in text.split(sep)]


def _custom(cfg: RunConfig) -> SystemSetup:
    p = cfg.system
    n = int(p["n"])
    consts = dict(cfg.constants)
    if "h" in p:
        consts.setdefault("h", float(p["h"]))
    pv = pair_variables(n) + list(consts)
    qv = point_variables(n) + list(consts)

    def comp(key, text, variables):
        try:
            return compile_expression(text, variables)
        except ConfigError as exc:
            raise ConfigError(str(exc), cfg.lines.get(("system", key)), key) from None

    Lx = comp("lagrangian", p["lagrangian"], pv)

    def L(q0, q1):
        return float(Lx(pair_env(q0, q1, consts)))

    sys = DiscreteMechanicalSystem(L, n, None, None, None, cfg.scheme, "custom", dict(p))
    bundle = _bundle_from(cfg, n)
    if bundle is not None:
        sys = DiscreteMechanicalSystem(L, n, None, None, bundle, cfg.scheme, "custom", dict(p))

    def vector_fn(key, size):
        exprs = [comp(key, t, pv) for t in _components(p[key])]
        if len(exprs) != size:
            raise ConfigError(f"expected {size} components", cfg.lines.get(("system", key)), key)
        return lambda q0, q1: np.array([e(pair_env(q0, q1, consts)) for e in exprs])

    source, forced, nh = sys, None, None
    if "f_minus" in p or "f_plus" in p:
        zero = lambda q0, q1: np.zeros(n)  # noqa: E731
        fm = vector_fn("f_minus", n) if "f_minus" in p else zero
        fp = vector_fn("f_plus", n) if "f_plus" in p else zero
        forced = source = ForcedDMS(sys, fm, fp)
    if "chi" in p:
        cols = [[comp("basis", t, qv) for t in _components(c)] for c in _components(p["basis"], "|")]
        rows = [[comp("annihilator", t, qv) for t in _components(r)] for r in _components(p["annihilator"], "|")]
        if any(len(c) != n for c in cols):
            raise ConfigError(f"basis columns need {n} entries", cfg.lines.get(("system", "basis")), "basis")
        if any(len(r) != n for r in rows):
            raise ConfigError(f"annihilator rows need {n} entries", cfg.lines.get(("system", "annihilator")),
                              "annihilator")
        d = len(cols)
        chi_fn = vector_fn("chi", n - d)
        if len(rows) != n - d:
            raise ConfigError("annihilator count must equal n minus the basis size",
                              cfg.lines.get(("system", "annihilator")), "annihilator")

        def basis(q):
            env = point_env(q, consts)
            return np.array([[e(env) for e in c] for c in cols]).T

        def annihilator(q):
            env = point_env(q, consts)
            return np.array([[e(env) for e in r] for r in rows])

        if forced is not None:
            raise ConfigError("forces and nonholonomic constraints cannot be combined", None, "system.chi")
        nh = source = NonholonomicDMS(sys, basis, annihilator, chi_fn)
    return SystemSetup(sys, bundle, source, forced, nh)


def build(cfg: RunConfig) -> SystemSetup:
    name = cfg.system["name"]
    if name == "custom":
        return _custom(cfg)
    kwargs = {k: v for k, v in cfg.system.items() if k != "name"}
    for k in ("n",):
        if k in kwargs:
            kwargs[k] = int(kwargs[k])
    obj = systems.BUILTINS[name](scheme=cfg.scheme, **kwargs)
    forced = obj if isinstance(obj, ForcedDMS) else None
    nh = obj if isinstance(obj, NonholonomicDMS) else None
    sys = obj.base if (forced or nh) else obj
    bundle = sys.bundle
    override = _bundle_from(cfg, sys.n)
    if override is not None:
        bundle = override
    return SystemSetup(sys, bundle, obj, forced, nh)
