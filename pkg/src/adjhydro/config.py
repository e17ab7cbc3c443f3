"""YAML run configuration with line-precise validation.

A configuration file is a nested mapping.  Every section is optional and
falls back to the defaults in :data:`SCHEMA`; unknown keys and wrongly typed
or out-of-range values raise :class:`ConfigError` pointing at the offending
line.  Presets shipped with the package live in ``adjhydro/presets``.

Schema (section: key = default)::

    mesh:        nx=128 ny=16 Lx=8 Ly=1 order=2
    materials:   left={rho0: 10, C0: 1, s: 1.5, gamma0: 2}
                 right={rho0: 1, C0: 1, s: 1.5, gamma0: 2}
    interface:   x=4 amplitude=0.1
    drive:       x=1 energy=0.15 background=0 field_file=null
    integration: T=7 cfl=0.25 dt=null integrator=rk4
    viscosity:   gamma1=0.5 gamma2=2 h_scale=0.2
    objective:   lambda1=1 lambda2=0.1 delta=0.1
    optimizer:   alpha=1 iterations=20 armijo=1e-4 max_halvings=20 growth=1
                 line_search=true constrained=false constrain_tol=1e-10
                 constrain_max_iters=500 filter=true
    checkpoint:  capacity_pct=null capacities=[...] steps=[...]
    verify:      T=2 directions=1 fd_dofs=10
    particles:   n=8 seed=0 box=[-2, 2] min_dist=1 q=1 g=1 T=1 dt=1e-3 R=2 iterations=200
    output:      dir=out snapshot_every=0
    seed: 0
    threads: null
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError

_NUM = (int, float)


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _pct(v):
    return 0 < v <= 100


# key -> (types, default, check, description of the check)
_EOS = {
    "rho0": (_NUM, None, _pos, "positive"),
    "C0": (_NUM, 1.0, _pos, "positive"),
    "s": (_NUM, 1.5, None, None),
    "gamma0": (_NUM, 2.0, None, None),
}

SCHEMA = {
    "mesh": {
        "nx": (int, 128, _pos, "positive"),
        "ny": (int, 16, _pos, "positive"),
        "Lx": (_NUM, 8.0, _pos, "positive"),
        "Ly": (_NUM, 1.0, _pos, "positive"),
        "order": (int, 2, _pos, "positive"),
    },
    "materials": {
        "left": (dict(_EOS, rho0=(_NUM, 10.0, _pos, "positive")),),
        "right": (dict(_EOS, rho0=(_NUM, 1.0, _pos, "positive")),),
    },
    "interface": {
        "x": (_NUM, 4.0, _pos, "positive"),
        "amplitude": (_NUM, 0.1, _nonneg, "non-negative"),
    },
    "drive": {
        "x": (_NUM, 1.0, _pos, "positive"),
        "energy": (_NUM, 0.15, _nonneg, "non-negative"),
        "background": (_NUM, 0.0, _nonneg, "non-negative"),
        "field_file": ((str, type(None)), None, None, None),
    },
    "integration": {
        "T": (_NUM, 7.0, _pos, "positive"),
        "cfl": (_NUM, 0.25, _pos, "positive"),
        "dt": ((int, float, type(None)), None, lambda v: v is None or v > 0, "positive"),
        "integrator": (str, "rk4", lambda v: v in ("rk4", "euler"), "one of rk4, euler"),
    },
    "viscosity": {
        "gamma1": (_NUM, 0.5, _nonneg, "non-negative"),
        "gamma2": (_NUM, 2.0, _nonneg, "non-negative"),
        "h_scale": (_NUM, 0.2, _pos, "positive"),
    },
    "objective": {
        "lambda1": (_NUM, 1.0, _nonneg, "non-negative"),
        "lambda2": (_NUM, 0.1, _nonneg, "non-negative"),
        "delta": (_NUM, 0.1, _pos, "positive"),
    },
    "optimizer": {
        "alpha": (_NUM, 1.0, _pos, "positive"),
        "iterations": (int, 20, _nonneg, "non-negative"),
        "armijo": (_NUM, 1e-4, _nonneg, "non-negative"),
        "max_halvings": (int, 20, _nonneg, "non-negative"),
        "growth": (_NUM, 1.0, _pos, "positive"),
        "line_search": (bool, True, None, None),
        "constrained": (bool, False, None, None),
        "constrain_tol": (_NUM, 1e-10, _pos, "positive"),
        "constrain_max_iters": (int, 500, _pos, "positive"),
        "filter": (bool, True, None, None),
    },
    "checkpoint": {
        "capacity_pct": ((int, float, type(None)), None, lambda v: v is None or _pct(v),
                         "in (0, 100]"),
        "capacities": (list, [0.5, 1.0, 1.5, 2.0, 5.0, 10.0], None, None),
        "steps": (list, [1000, 2000, 10000], None, None),
    },
    "verify": {
        "T": (_NUM, 2.0, _pos, "positive"),
        "directions": (int, 1, _pos, "positive"),
        "fd_dofs": (int, 10, _pos, "positive"),
    },
    "particles": {
        "n": (int, 8, _pos, "positive"),
        "seed": (int, 0, None, None),
        "box": (list, [-2.0, 2.0], lambda v: len(v) == 2 and v[0] < v[1], "[lo, hi] with lo < hi"),
        "min_dist": (_NUM, 1.0, _pos, "positive"),
        "q": (_NUM, 1.0, None, None),
        "g": (_NUM, 1.0, None, None),
        "T": (_NUM, 1.0, _pos, "positive"),
        "dt": (_NUM, 1e-3, _pos, "positive"),
        "R": (_NUM, 2.0, _pos, "positive"),
        "iterations": (int, 200, _nonneg, "non-negative"),
    },
    "output": {
        "dir": (str, "out", None, None),
        "snapshot_every": (int, 0, _nonneg, "non-negative"),
    },
    "seed": (int, 0, None, None),
    "threads": ((int, type(None)), None, lambda v: v is None or v > 0, "positive"),
}

PRESETS = ("rmi_default", "rmi_alt_energy", "rmi_opt", "rmi_constrained", "coarse", "particles")


@dataclass
class RunConfig:
    """Validated configuration; ``data`` mirrors :data:`SCHEMA` with defaults filled in."""

    data: dict
    source: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    def section(self, name):
        return self.data[name]


def _defaults(schema):
    out = {}
    for k, spec in schema.items():
        if isinstance(spec, dict):
            out[k] = _defaults(spec)
        elif len(spec) == 1:
            out[k] = _defaults(spec[0])
        else:
            out[k] = copy.deepcopy(spec[1])
    return out


def _scalar(node):
    """Resolve a YAML scalar node to a Python value."""
    return yaml.safe_load(yaml.serialize(node))


def _check(node, schema, target, path, source):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"'{'.'.join(path) or 'top level'}' must be a mapping",
                          node.start_mark.line + 1, source)
    seen = set()
    for knode, vnode in node.value:
        key = knode.value
        where = ".".join(path + [key])
        line = knode.start_mark.line + 1
        if key in seen:
            raise ConfigError(f"duplicate key '{where}'", line, source)
        seen.add(key)
        if key not in schema:
            raise ConfigError(f"unknown key '{where}'", line, source)
        spec = schema[key]
        if isinstance(spec, dict) or len(spec) == 1:
            sub = spec if isinstance(spec, dict) else spec[0]
            _check(vnode, sub, target[key], path + [key], source)
            continue
        types, _, check, desc = spec
        vline = vnode.start_mark.line + 1
        if list in (types if isinstance(types, tuple) else (types,)):
            if not isinstance(vnode, yaml.SequenceNode):
                raise ConfigError(f"'{where}' must be a list", vline, source)
            value = [_scalar(v) for v in vnode.value]
            for v, vn in zip(value, vnode.value):
                if isinstance(v, bool) or not isinstance(v, _NUM):
                    raise ConfigError(f"'{where}' entries must be numbers", vn.start_mark.line + 1,
                                      source)
        else:
            if not isinstance(vnode, yaml.ScalarNode):
                raise ConfigError(f"'{where}' must be a single value", vline, source)
            value = _scalar(vnode)
            ok_types = types if isinstance(types, tuple) else (types,)
            if isinstance(value, bool) and bool not in ok_types:
                ok = False
            elif isinstance(value, int) and float in ok_types:
                value, ok = value, True
            else:
                ok = isinstance(value, ok_types)
            if not ok:
                names = ", ".join(sorted({t.__name__ for t in ok_types}))
                raise ConfigError(f"'{where}' has type {type(value).__name__}, expected {names}",
                                  vline, source)
        if check is not None and not check(value):
            raise ConfigError(f"'{where}' = {value!r} must be {desc}", vline, source)
        target[key] = value


def parse(text: str, source: str | None = None) -> RunConfig:
    """Validate YAML ``text`` and merge it over the defaults."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line, source) from None
    data = _defaults(SCHEMA)
    if root is not None:
        _check(root, SCHEMA, data, [], source)
    cfg = RunConfig(data, source)
    _cross_checks(cfg, root, source)
    return cfg


def _line_of(root, *keys):
    node = root
    for k in keys:
        if not isinstance(node, yaml.MappingNode):
            return None
        nxt = None
        for kn, vn in node.value:
            if kn.value == k:
                nxt = vn
                line = kn.start_mark.line + 1
        if nxt is None:
            return None
        node = nxt
    return line


def _cross_checks(cfg, root, source):
    m, itf, drv = cfg["mesh"], cfg["interface"], cfg["drive"]
    if not drv["x"] < itf["x"] < m["Lx"]:
        raise ConfigError("need drive.x < interface.x < mesh.Lx",
                          _line_of(root, "interface", "x") or _line_of(root, "drive", "x"), source)
    h = m["Lx"] / m["nx"]
    for sec in ("interface", "drive"):
        k = cfg[sec]["x"] / h
        if abs(k - round(k)) > 1e-9:
            raise ConfigError(f"{sec}.x must lie on a grid line (element width {h:g})",
                              _line_of(root, sec, "x") or _line_of(root, "mesh", "nx"), source)
    if itf["amplitude"] >= min(itf["x"] - drv["x"], m["Lx"] - itf["x"]):
        raise ConfigError("interface.amplitude too large for the mesh warp band",
                          _line_of(root, "interface", "amplitude"), source)
    if cfg["particles"]["n"] > 1:
        lo, hi = cfg["particles"]["box"]
        d = cfg["particles"]["min_dist"]
        # area bound: n disks of diameter d cannot fit into a square of side (hi - lo + d)
        if cfg["particles"]["n"] * math.pi * d * d / 4 > (hi - lo + d) ** 2:
            raise ConfigError("particles.min_dist too large to place n particles in the box",
                              _line_of(root, "particles", "min_dist"), source)


def load(path) -> RunConfig:
    """Read and validate a config file; ``path`` may also name a shipped preset."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        return load_preset(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse(text, str(path))


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (choose from {', '.join(PRESETS)})")
    text = resources.files("adjhydro.presets").joinpath(f"{name}.yaml").read_text()
    return parse(text, f"preset:{name}")


def default_config() -> RunConfig:
    return parse("")

