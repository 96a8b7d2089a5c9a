"""JSON run configurations: loading, validation and defaults.

Every subcommand reads one JSON object. Unknown keys are rejected so typos
surface as configuration errors instead of silently falling back to defaults.
``resolve_*`` functions return a fully populated copy that is stored in the
run manifest, so a manifest can be fed back to the same subcommand.

Problem block (shared)::

    {"preset": "hump_supercritical", "params": {...}}
    {"formulation": "supercritical", "bathymetry": {"kind": "gaussian", ...},
     "eta0": 1.0, "u0": 3.0, "H0": null, "g": 1.0,
     "eta_init": {"base": 1.0, "amp": 0.05, "rate": 400.0, "center": 0.25}, "u_init": null}
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError, InvalidArgumentError
from .problems import (Formulation, ProblemConfig, gaussian_pulse, make_bathymetry,
                       preset, PRESETS)
from .time_integration import TABLEAUX

MANIFEST_TOOL = "swgalerkin"


def parse_json(text: str, source: str = "<config>") -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    return data


def load_config(path) -> tuple[dict, str | None]:
    """Read a config or a manifest; returns ``(config, command)``.

    For a manifest the stored resolved config and its command are returned;
    for a plain config the command is None.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    data = parse_json(text, str(path))
    if data.get("tool") == MANIFEST_TOOL and "config" in data:
        return data["config"], data.get("command")
    return data, None


def _check_keys(block: dict, allowed, where: str) -> None:
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


def _number(value, where: str, positive: bool = False, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive")
    return value


def _int(value, where: str, minimum: int | None = None, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}")
    return value


# -- problem ---------------------------------------------------------------

_PULSE_KEYS = ("base", "amp", "rate", "center", "scale")


def _pulse(spec, where):
    if spec is None:
        return None
    _check_keys(spec, _PULSE_KEYS, where)
    vals = {k: _number(spec.get(k, 1.0 if k == "scale" else 0.0), f"{where}.{k}")
            for k in _PULSE_KEYS}
    return gaussian_pulse(**vals)


def build_problem(spec: dict) -> ProblemConfig:
    where = "problem"
    if "preset" in spec:
        _check_keys(spec, ("preset", "params"), where)
        name = spec["preset"]
        if name not in PRESETS:
            raise ConfigError(f"{where}.preset: unknown preset {name!r} "
                              f"(choose from {', '.join(sorted(PRESETS))})")
        params = spec.get("params") or {}
        _check_keys(params, params.keys(), f"{where}.params")
        try:
            return preset(name, **params)
        except TypeError as exc:
            raise ConfigError(f"{where}.params: {exc}") from None
        except InvalidArgumentError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    _check_keys(spec, ("formulation", "bathymetry", "eta0", "u0", "H0", "g", "eta_init",
                       "u_init", "name"), where)
    try:
        formulation = Formulation.parse(spec.get("formulation"))
        bspec = dict(spec.get("bathymetry") or {})
        kind = bspec.pop("kind", None)
        if kind is None:
            raise ConfigError(f"{where}.bathymetry: missing 'kind'")
        bathy = make_bathymetry(kind, **bspec)
        return ProblemConfig(
            formulation, bathy,
            eta0=_number(spec.get("eta0", 0.0), f"{where}.eta0"),
            u0=_number(spec.get("u0", 0.0), f"{where}.u0"),
            H0=_number(spec.get("H0"), f"{where}.H0", allow_none=True),
            g=_number(spec.get("g", 1.0), f"{where}.g", positive=True),
            eta_init=_pulse(spec.get("eta_init"), f"{where}.eta_init"),
            u_init=_pulse(spec.get("u_init"), f"{where}.u_init"),
            name=str(spec.get("name", "custom")))
    except InvalidArgumentError as exc:
        raise ConfigError(f"{where}: {exc}") from None


# -- shared sections -------------------------------------------------------

def _mesh(cfg, where="mesh", many=False) -> dict:
    m = dict(cfg.get("mesh") or {})
    _check_keys(m, ("N", "perturbation", "seed"), where)
    if "N" not in m:
        raise ConfigError(f"{where}.N: required")
    N = m["N"]
    if many:
        if isinstance(N, int) and not isinstance(N, bool):
            N = [N]
        if not isinstance(N, list) or not N:
            raise ConfigError(f"{where}.N: expected a non-empty list of integers")
        N = [_int(n, f"{where}.N", 1) for n in N]
    else:
        N = _int(N, f"{where}.N", 1)
    pert = _number(m.get("perturbation", 0.0), f"{where}.perturbation")
    if not 0.0 <= pert < 0.45:
        raise ConfigError(f"{where}.perturbation: must lie in [0, 0.45)")
    return {"N": N, "perturbation": pert, "seed": _int(m.get("seed", 0), f"{where}.seed")}


def _space(cfg, default_r=2) -> dict:
    s = dict(cfg.get("space") or {})
    _check_keys(s, ("r", "continuity", "s"), "space")
    r = _int(s.get("r", default_r), "space.r", 2)
    cont = _int(s.get("continuity"), "space.continuity", 0, allow_none=True)
    if cont is not None and cont > r - 2:
        raise ConfigError("space.continuity: must be <= r - 2")
    q = _int(s.get("s"), "space.s", 1, allow_none=True)
    if q is not None and q > 16:
        raise ConfigError("space.s: at most 16 Gauss points")
    return {"r": r, "continuity": cont, "s": q}


def _time(cfg, default_ratio=0.1, default_dt=None, default_T=1.0) -> dict:
    t = dict(cfg.get("time") or {})
    _check_keys(t, ("tableau", "ratio", "dt", "T"), "time")
    tab = t.get("tableau", "rk4")
    if not isinstance(tab, str):
        raise ConfigError("time.tableau: expected a name or a file path")
    if tab.lower() not in TABLEAUX and not Path(tab).is_file():
        raise ConfigError(f"time.tableau: unknown tableau {tab!r}")
    dt = _number(t.get("dt", default_dt), "time.dt", positive=True, allow_none=True)
    ratio = _number(t.get("ratio", default_ratio), "time.ratio", positive=True)
    T = _number(t.get("T", default_T), "time.T", positive=True)
    return {"tableau": tab, "ratio": ratio, "dt": dt, "T": T}


_SCHEME_KEYS = ("source_mode", "approx", "flux_form", "depth_floor")


def _scheme(cfg) -> dict:
    opts = dict(cfg.get("scheme") or {})
    _check_keys(opts, _SCHEME_KEYS, "scheme")
    return opts


def _top(cfg, allowed, command):
    _check_keys(cfg, ("command", "description") + tuple(allowed), "config")
    cmd = cfg.get("command")
    if cmd is not None and cmd != command:
        raise ConfigError(f"config is for '{cmd}', not '{command}'")


def _problem_spec(cfg) -> dict:
    if "problem" not in cfg:
        raise ConfigError("problem: required")
    spec = copy.deepcopy(cfg["problem"])
    build_problem(spec)  # validate early
    return spec


# -- per-command resolution --------------------------------------------------

def resolve_converge(cfg: dict) -> dict:
    _top(cfg, ("problem", "mesh", "space", "time", "norm", "scheme"), "converge")
    norm = cfg.get("norm", "quadrature")
    if norm not in ("quadrature", "nodal"):
        raise ConfigError("norm: expected 'quadrature' or 'nodal'")
    out = {"command": "converge", "problem": _problem_spec(cfg), "mesh": _mesh(cfg, many=True),
           "space": _space(cfg), "time": _time(cfg), "norm": norm, "scheme": _scheme(cfg)}
    if build_problem(out["problem"]).manufactured is None:
        raise ConfigError("problem: convergence needs a preset with a manufactured solution")
    return out


def resolve_simulate(cfg: dict) -> dict:
    _top(cfg, ("problem", "mesh", "space", "time", "snapshots", "samples_per_element",
               "scheme"), "simulate")
    time = _time(cfg)
    snaps = cfg.get("snapshots", [])
    if not isinstance(snaps, list):
        raise ConfigError("snapshots: expected a list of times")
    snaps = sorted(float(_number(s, "snapshots")) for s in snaps)
    for s in snaps:
        if s < 0 or s > time["T"] * (1 + 1e-12):
            raise ConfigError(f"snapshots: time {s} outside [0, T={time['T']}]")
    space = _space(cfg)
    spe = _int(cfg.get("samples_per_element", 1 if space["r"] == 2 else 4),
               "samples_per_element", 1)
    return {"command": "simulate", "problem": _problem_spec(cfg), "mesh": _mesh(cfg),
            "space": space, "time": time, "snapshots": snaps,
            "samples_per_element": spe, "scheme": _scheme(cfg)}


def resolve_wellbalance(cfg: dict) -> dict:
    _top(cfg, ("mesh", "space", "time", "cases", "init", "bathymetry", "flux_form"),
         "wellbalance")
    cases = cfg.get("cases", [{"source_mode": "analytic", "s": 3},
                              {"source_mode": "projected", "s": 3},
                              {"source_mode": "projected", "s": 5}])
    if not isinstance(cases, list) or not cases:
        raise ConfigError("cases: expected a non-empty list")
    clean = []
    for i, c in enumerate(cases):
        _check_keys(c, ("source_mode", "s"), f"cases[{i}]")
        mode = c.get("source_mode", "projected")
        if mode not in ("analytic", "projected"):
            raise ConfigError(f"cases[{i}].source_mode: expected 'analytic' or 'projected'")
        clean.append({"source_mode": mode, "s": _int(c.get("s", 5), f"cases[{i}].s", 1)})
    init = cfg.get("init", "projection")
    if init not in ("projection", "interpolation"):
        raise ConfigError("init: expected 'projection' or 'interpolation'")
    flux = cfg.get("flux_form", "weak")
    if flux not in ("weak", "pointwise"):
        raise ConfigError("flux_form: expected 'weak' or 'pointwise'")
    b = dict(cfg.get("bathymetry") or {})
    _check_keys(b, ("amp", "rate"), "bathymetry")
    bathy = {"amp": _number(b.get("amp", 0.3), "bathymetry.amp"),
             "rate": _number(b.get("rate", 1000.0), "bathymetry.rate", positive=True)}
    if not bathy["amp"] < 1.0:
        raise ConfigError("bathymetry.amp: must be < 1 to keep the depth positive")
    cfg = dict(cfg)
    cfg.setdefault("mesh", {"N": 50})
    space = _space(cfg, default_r=4)
    return {"command": "wellbalance", "mesh": _mesh(cfg), "space": space,
            "time": _time(cfg, default_ratio=0.5, default_dt=0.01), "cases": clean,
            "init": init, "flux_form": flux, "bathymetry": bathy}


def resolve_steady(cfg: dict) -> dict:
    mode = cfg.get("mode", "preservation")
    if mode == "preservation":
        _top(cfg, ("mode", "bathymetry", "eta0", "u0", "g", "branch", "mesh", "space",
                   "time"), "steady")
        bspec = dict(cfg.get("bathymetry") or {})
        if "kind" not in bspec:
            raise ConfigError("bathymetry.kind: required")
        kind = bspec.pop("kind")
        try:
            make_bathymetry(kind, **bspec)
        except InvalidArgumentError as exc:
            raise ConfigError(f"bathymetry: {exc}") from None
        branch = cfg.get("branch", "supercritical")
        if branch not in ("supercritical", "subcritical"):
            raise ConfigError("branch: expected 'supercritical' or 'subcritical'")
        return {"command": "steady", "mode": mode, "bathymetry": dict(cfg["bathymetry"]),
                "eta0": _number(cfg.get("eta0", 0.0), "eta0"),
                "u0": _number(cfg.get("u0", 0.0), "u0"),
                "g": _number(cfg.get("g", 1.0), "g", positive=True), "branch": branch,
                "mesh": _mesh(cfg), "space": _space(cfg), "time": _time(cfg)}
    if mode == "froude_sweep":
        _top(cfg, ("mode", "froude", "c", "N", "compare_N", "dt", "T", "L", "delta0", "h0",
                   "g", "tableau"), "steady")

        def numlist(key, default):
            v = cfg.get(key, default)
            if not isinstance(v, list) or not v:
                raise ConfigError(f"{key}: expected a non-empty list of numbers")
            return [float(_number(x, key)) for x in v]

        fr = numlist("froude", [3.0, 4.0, 5.0, 6.0])
        if any(f <= 1 for f in fr):
            raise ConfigError("froude: supercritical sweep needs every value > 1")
        cs = numlist("c", [1.0, 2.0])
        if any(c <= 0.5 for c in cs):
            raise ConfigError("c: ramps need c > 1/2")
        T = cfg.get("T")
        return {"command": "steady", "mode": mode, "froude": fr, "c": cs,
                "N": _int(cfg.get("N", 1000), "N", 1),
                "compare_N": _int(cfg.get("compare_N"), "compare_N", 1, allow_none=True),
                "dt": _number(cfg.get("dt", 1.0), "dt", positive=True),
                "T": _number(T, "T", positive=True, allow_none=True),
                "L": _number(cfg.get("L", 1e6), "L", positive=True),
                "delta0": _number(cfg.get("delta0", 500.0), "delta0", positive=True),
                "h0": _number(cfg.get("h0", 1000.0), "h0", positive=True),
                "g": _number(cfg.get("g", 9.812), "g", positive=True),
                "tableau": cfg.get("tableau", "rk4")}
    raise ConfigError(f"mode: expected 'preservation' or 'froude_sweep', got {mode!r}")


RESOLVERS = {"converge": resolve_converge, "simulate": resolve_simulate,
             "wellbalance": resolve_wellbalance, "steady": resolve_steady}
