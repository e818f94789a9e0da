"""Config-driven scenario runner.

A scenario file (YAML or JSON) has four top-level keys::

    scenario: ring-spectrum        # one of SCENARIOS
    output_dir: out                # optional, overridden by --out
    seed: 0                        # optional, overridden by --seed
    params: {...}                  # scenario parameters, see PARAMS

Every key is checked before any compute and all problems are reported at
once. Ring scenarios take SI units; they are converted to a time unit of
``1 / Gamma_bar`` of the first generated resonance internally. The
waveguide and MPS scenarios are already dimensionless.

Each run writes its data files, ``summary.json`` and ``manifest.json``
(sha256 of every file). Nothing time-dependent is written, so identical
configs give identical bytes.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .errors import PreconditionError, SqueezeSimError, ValidationError
from .statistics import HBAR

SCENARIOS = ("waveguide-sweep", "waveguide-jsa", "ring-spectrum", "ring-pulsed", "mps-demo", "gaussian-adhoc")
EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3
REQUIRED = object()


class ScenarioError(SqueezeSimError):
    """A solver failure wrapped with the scenario it came from."""


@dataclass(frozen=True)
class Field:
    kind: str  # float, int, str, floats, section, map
    default: Any = REQUIRED
    lo: Optional[float] = None
    hi: Optional[float] = None
    open_lo: bool = False
    choices: tuple = ()
    schema: Any = None  # section schema, or the value Field/schema of a map
    guard: Any = None  # callable raising PreconditionError on a bad value


def _f(default=REQUIRED, lo=None, hi=None, open_lo=False):
    return Field("float", default, lo, hi, open_lo)


def _i(default=REQUIRED, lo=None, hi=None):
    return Field("int", default, lo, hi)


_GUIDE = {
    "length": _f(10.0, 0, open_lo=True),
    "tau": _f(1.0, 0, open_lo=True),
    "s": _f(0.193, 0, open_lo=True),
    "half_window": _f(8.0, 0, open_lo=True),
    "points": _i(129, 3, 1001),
    "t_span": _f(20.0, 0, open_lo=True),
    "dt": _f(0.02, 0, open_lo=True),
}

def _sigma_guard(sigma: float) -> None:
    from .ring import gamma_from_sigma
    gamma_from_sigma(sigma, 1.0, 1.0)


_RESONANCE = {
    "omega": _f(REQUIRED, 0, open_lo=True),  # rad/s
    "gamma": _f(None, 0),  # 1/s, channel damping
    "sigma": Field("float", None, guard=lambda s: _sigma_guard(s)),  # self-coupling, alternative to gamma
    "gamma_ph": _f(0.0, 0),
    "v": _f(1.0e8, 0, open_lo=True),  # m/s
}

_RING = {
    "scheme": Field("str", choices=("SP-SFWM", "DP-SFWM", "SPDC", "SPDC-degenerate")),
    "length": _f(REQUIRED, 0, open_lo=True),  # m
    "resonances": Field("map", schema=_RESONANCE),
    "lam": _f(5.0),  # 1/s
    "eta": _f(0.0),
    "zeta": _f(0.0),
    "detunings": Field("map", {}, schema=_f()),
    "delta_ring": _f(0.0),
}

_PULSE = {
    "energy": _f(REQUIRED, 0, open_lo=True),  # J
    "width": _f(REQUIRED, 0, open_lo=True),  # s, intensity standard deviation
    "center": _f(0.0),  # s
}

PARAMS = {
    "waveguide-sweep": {"phi": Field("floats", lo=0, open_lo=True), **_GUIDE},
    "waveguide-jsa": {"phi": _f(REQUIRED, 0, open_lo=True), **_GUIDE},
    "ring-spectrum": {
        **_RING,
        "pump_power": Field("map", schema=_f(REQUIRED, 0)),  # W per pump band
        "branch": _i(0, 0),
        "phi": _f(0.0),
        "span": _f(160.0, 8, open_lo=True),  # in 1/Gamma_bar_min
        "points": _i(2048, 64, 8192),
        "omega_max": _f(4.0, 0, open_lo=True),  # in Gamma_bar_ref
        "omega_points": _i(81, 1, 100000),
    },
    "ring-pulsed": {
        **_RING,
        "pulse": Field("map", schema=_PULSE),
        "span": _f(12.0, 0, open_lo=True),  # ringdown after the pulse, in 1/Gamma_bar_min
        "points": _i(1024, 64, 8192),
    },
    "mps-demo": {
        "delta": _f(0.0),
        "gamma": _f(1.0, 0),
        "v": _f(1.0, 0, open_lo=True),
        "dt": _f(0.02, 0, open_lo=True),
        "n_bins": _i(200, 1, 100000),
        "cutoff": _i(8, 2, 40),
        "D_max": _i(16, 1, 4096),
        "eps": _f(1e-10, 0),
        "initial_photons": _i(0, 0),
        "drive": Field("section", {}, schema={
            "amplitude": _f(0.0),
            "center": _f(1.5),
            "width": _f(0.7, 0, open_lo=True),
        }),
        "kerr": _f(0.0),
        "saturation": _f(1e-6, 0, open_lo=True),
        "weight_budget": _f(1e-6, 0, open_lo=True),
    },
    "gaussian-adhoc": {
        "modes": _i(2, 1, 64),
        "steps": _i(200, 1, 100000),
        "t_span": _f(1.0, 0, open_lo=True),
        "amplitude": _f(1.0, 0),
        "harmonics": _i(3, 1, 32),
    },
}

TOP = {
    "scenario": Field("str", choices=SCENARIOS),
    "output_dir": Field("str", "out"),
    "seed": _i(0, 0, 2**32 - 1),
}


# ---------------------------------------------------------------- validation

def _number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _range(v, f: Field, path: str, errors: list) -> None:
    lo_bad = f.lo is not None and (v <= f.lo if f.open_lo else v < f.lo)
    hi_bad = f.hi is not None and v > f.hi
    if lo_bad or hi_bad:
        lo = "-inf" if f.lo is None else f.lo
        hi = "inf" if f.hi is None else f.hi
        errors.append(f"{path}: {v!r} is out of range {'(' if f.open_lo else '['}{lo}, {hi}]")


def _check(v, f: Field, path: str, errors: list):
    if f.kind == "float":
        if not _number(v) or not math.isfinite(v):
            errors.append(f"{path}: expected a finite number, got {v!r}")
            return None
        _range(v, f, path, errors)
        if f.guard is not None:
            try:
                f.guard(v)
            except PreconditionError as exc:
                errors.append(f"{path}: {exc}")
        return float(v)
    if f.kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            errors.append(f"{path}: expected an integer, got {v!r}")
            return None
        _range(v, f, path, errors)
        return int(v)
    if f.kind == "str":
        if not isinstance(v, str):
            errors.append(f"{path}: expected a string, got {v!r}")
            return None
        if f.choices and v not in f.choices:
            errors.append(f"{path}: {v!r} is not one of {', '.join(f.choices)}")
        return v
    if f.kind == "floats":
        if not isinstance(v, list):
            errors.append(f"{path}: expected a list of numbers")
            return None
        item = Field("float", lo=f.lo, hi=f.hi, open_lo=f.open_lo)
        return [_check(x, item, f"{path}[{k}]", errors) for k, x in enumerate(v)]
    if f.kind == "section":
        return _section(v, f.schema or {}, path, errors)
    if f.kind == "map":
        if not isinstance(v, dict):
            errors.append(f"{path}: expected a mapping")
            return None
        out = {}
        for k in sorted(v, key=str):
            sub = f"{path}.{k}"
            if not isinstance(k, str):
                errors.append(f"{sub}: keys must be strings")
            elif isinstance(f.schema, Field):
                out[k] = _check(v[k], f.schema, sub, errors)
            else:
                out[k] = _section(v[k], f.schema, sub, errors)
        return out
    raise AssertionError(f.kind)


def _section(data, schema: dict, path: str, errors: list) -> Optional[dict]:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        errors.append(f"{path}: expected a mapping")
        return None
    out = {}
    for k in data:
        if k not in schema:
            errors.append(f"{path}.{k}: unknown key")
    for k, f in schema.items():
        v = data.get(k)
        sub = f"{path}.{k}"
        if v is None:
            if f.default is REQUIRED:
                errors.append(f"{sub}: missing required key")
                continue
            if f.kind == "section":
                out[k] = _section({}, f.schema, sub, errors)
            else:
                out[k] = copy.deepcopy(f.default)
            continue
        out[k] = _check(v, f, sub, errors)
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: dict
    output_dir: str = "out"
    seed: int = 0

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "output_dir": self.output_dir, "seed": self.seed,
                "params": copy.deepcopy(self.params)}

    def replace(self, **kw) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(kw)
        return ScenarioConfig(d["scenario"], d["params"], d["output_dir"], d["seed"])


def validate_config(data) -> ScenarioConfig:
    """Resolve defaults and check every key; raise ValidationError listing all problems."""
    errors: list = []
    if not isinstance(data, dict):
        raise ValidationError(["config: expected a mapping at the top level"])
    top = _section({k: v for k, v in data.items() if k != "params"}, TOP, "config", errors)
    kind = top.get("scenario")
    if kind not in PARAMS:
        raise ValidationError(errors)
    params = _section(data.get("params"), PARAMS[kind], "params", errors)
    if errors:
        raise ValidationError(errors)
    cfg = ScenarioConfig(kind, params, top["output_dir"], top["seed"])
    errors = _semantic(cfg)
    if errors:
        raise ValidationError(errors)
    return cfg


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e9``-style floats (YAML 1.2 rules)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def parse_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ValidationError([f"{p}: no such config file"])
    try:
        data = yaml.load(p.read_text(), Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ValidationError([f"{p}: not valid YAML/JSON ({exc})"]) from None
    return validate_config(data)


def emit_config(cfg: ScenarioConfig) -> str:
    """Resolved config as YAML; ``validate_config`` of it returns ``cfg``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def _semantic(cfg: ScenarioConfig) -> list:
    # build the downstream objects once so their own preconditions run here
    p, errors = cfg.params, []
    try:
        if cfg.scenario.startswith("waveguide"):
            phis = p["phi"] if isinstance(p["phi"], list) else [p["phi"]]
            for phi in phis[:1] or [1.0]:
                su = _guide_setup(p, phi)
                su.grid.check_window(su.process)
        elif cfg.scenario.startswith("ring"):
            errors += _ring_problems(cfg)
        elif cfg.scenario == "mps-demo":
            _mps_model(p).check()
        elif cfg.scenario == "gaussian-adhoc":
            if not np.all(np.diff(np.linspace(0.0, p["t_span"], p["steps"] + 1)) > 0):
                errors.append(f"params.t_span: {p['t_span']!r} is too short for {p['steps']} steps")
    except PreconditionError as exc:
        errors.append(f"params: {exc}")
    return errors


# ---------------------------------------------------------------- ring helpers

def _res_gamma(r: dict, length: float) -> float:
    from .ring import gamma_from_sigma
    if r["sigma"] is not None:
        return gamma_from_sigma(r["sigma"], r["v"], length) / (2 * r["v"])
    return r["gamma"]


def _ring_problems(cfg: ScenarioConfig) -> list:
    from .ring import SCHEMES
    p, errors = cfg.params, []
    pumps, gens = SCHEMES[p["scheme"]]
    res = p["resonances"]
    for b in pumps + gens:
        if b not in res:
            errors.append(f"params.resonances: scheme {p['scheme']} needs band {b!r}")
    for b, r in res.items():
        if (r["gamma"] is None) == (r["sigma"] is None):
            errors.append(f"params.resonances.{b}: give exactly one of gamma or sigma")
    for b in p["detunings"]:
        if b not in res:
            errors.append(f"params.detunings.{b}: no such resonance")
    drives = p["pump_power"] if cfg.scenario == "ring-spectrum" else p["pulse"]
    key = "pump_power" if cfg.scenario == "ring-spectrum" else "pulse"
    for b in drives:
        if b not in pumps:
            errors.append(f"params.{key}.{b}: not a pump band of {p['scheme']} ({', '.join(pumps)})")
    if not drives:
        errors.append(f"params.{key}: at least one pump band must be driven")
    if errors:
        return errors
    try:
        model, _ = _ring_model(p)
        model.check_scheme(p["scheme"])
    except PreconditionError as exc:
        errors.append(f"params: {exc}")
    return errors


def _ring_model(p: dict):
    """Dimensionless model in units of ``1 / Gamma_bar`` of the first generated band, length L."""
    from .ring import SCHEMES, Resonance, RingModel
    _, gens = SCHEMES[p["scheme"]]
    L = p["length"]
    rates = {b: (_res_gamma(r, L), r["gamma_ph"]) for b, r in p["resonances"].items()}
    ref = sum(rates[gens[0]])
    if ref <= 0:
        raise PreconditionError(f"resonance {gens[0]} needs a positive linewidth")
    tau0 = 1.0 / ref
    res = {b: Resonance(r["omega"] * tau0, rates[b][0] * tau0, rates[b][1] * tau0, r["v"] * tau0 / L)
           for b, r in p["resonances"].items()}
    model = RingModel(res, 1.0, p["lam"] * tau0, p["eta"] * tau0, p["zeta"] * tau0,
                      {b: d * tau0 for b, d in p["detunings"].items()}, p["delta_ring"] * tau0)
    return model, tau0


def _field_amplitude(power, r: dict, length: float):
    # psi = sqrt(P / (hbar omega v)), rescaled to the ring length
    return np.sqrt(np.asarray(power) / (HBAR * r["omega"] * r["v"])) * np.sqrt(length)


# ---------------------------------------------------------------- output

@dataclass
class Table:
    columns: Sequence[str]
    rows: list = field(default_factory=list)


def _fmt(x) -> str:
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else ("nan" if x != x else ("inf" if x > 0 else "-inf"))


def _json_value(v, indent: int, level: int) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(v, (bool, np.bool_)) or v is None:
        return json.dumps(None if v is None else bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v) if math.isfinite(v) else "null"
    if isinstance(v, (complex, np.complexfloating)):
        return _json_value([v.real, v.imag], indent, level)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, np.ndarray):
        return _json_value(v.tolist(), indent, level)
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json_value(v[k], indent, level + 1)}"
                 for k in sorted(v, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, (list, tuple)):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in v):
            return "[" + ", ".join(_json_value(x, indent, level + 1) for x in v) + "]"
        return "[\n" + ",\n".join(inner + _json_value(x, indent, level + 1) for x in v) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_stable(obj) -> str:
    """JSON with sorted keys and 17-significant-digit floats."""
    return _json_value(obj, 2, 0) + "\n"


def emit_plotdata(results, path, fmt: Optional[str] = None) -> Path:
    """Write a Table (or ``{"columns", "rows"}``) as CSV or JSON with LF endings."""
    path = Path(path)
    if isinstance(results, dict):
        results = Table(results["columns"], results.get("rows", []))
    fmt = fmt or path.suffix.lstrip(".")
    if fmt == "csv":
        lines = [",".join(results.columns)]
        lines += [",".join(_fmt(x) for x in row) for row in results.rows]
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        text = dumps_stable({"columns": list(results.columns), "rows": [list(r) for r in results.rows]})
    else:
        raise PreconditionError(f"unknown plot-data format {fmt!r}; expected csv or json")
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- scenarios

def _guide_setup(p: dict, phi: float):
    from .waveguide import separable_example
    return separable_example(phi, p["length"], p["tau"], p["s"], p["half_window"], p["points"],
                             p["t_span"], p["dt"])


def _sweep_point(args) -> list:
    from .waveguide import jsa_diagnostics, magnus3_schmidt, solve_waveguide
    p, phi = args
    su = _guide_setup(p, phi)
    res = solve_waveguide(su.process, su.grid, su.times)
    d = jsa_diagnostics(res, su.grid)
    m3 = magnus3_schmidt(su.xi_bar, p["tau"], p["tau"], np.zeros(1))
    return [phi, np.sinh(su.xi_bar) ** 2, m3.n_pairs, d.n_pairs, m3.K, d.K]


def _run_waveguide_sweep(cfg, out: Path, jobs: int) -> tuple[list, dict]:
    p = cfg.params
    work = [(p, phi) for phi in p["phi"]]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, work))
    else:
        rows = [_sweep_point(w) for w in work]
    cols = ("phi", "n_magnus1", "n_magnus3", "n_full", "K_magnus3", "K_full")
    f = emit_plotdata(Table(cols, rows), out / "sweep.csv")
    return [f], {"points": len(rows)}


def _run_waveguide_jsa(cfg, out: Path, jobs: int) -> tuple[list, dict]:
    from .waveguide import jsa_diagnostics, solve_waveguide
    p = cfg.params
    su = _guide_setup(p, p["phi"])
    res = solve_waveguide(su.process, su.grid, su.times)
    d = jsa_diagnostics(res, su.grid)
    vs, vi = su.process.bands["S"].v, su.process.bands["I"].v
    # kappa -> frequency offsets W_J = v_J kappa; the amplitude density rescales by 1/sqrt(v_S v_I)
    w1, w2 = vs * d.kappa, vi * d.kappa
    jsa = d.jsa / np.sqrt(vs * vi)
    rows = [[a, b, jsa[i, j].real, jsa[i, j].imag] for i, a in enumerate(w1) for j, b in enumerate(w2)]
    f = emit_plotdata(Table(("omega1", "omega2", "re", "im"), rows), out / "jsa.csv")
    return [f], {"n_pairs": d.n_pairs, "K": d.K, "xi_bar": su.xi_bar,
                 "schmidt_r": [float(x) for x in d.schmidt.r[:8]]}


def _run_ring_spectrum(cfg, out: Path, jobs: int) -> tuple[list, dict]:
    from .ring import (build_ring_generator, cw_steady_state, default_time_grid, green_function,
                       ring_moments, squeezing_spectrum)
    p = cfg.params
    model, tau0 = _ring_model(p)
    drives = {b: complex(_field_amplitude(P, p["resonances"][b], p["length"])) for b, P in p["pump_power"].items()}
    branches = cw_steady_state(model, p["scheme"], drives)
    if p["branch"] >= len(branches):
        raise ScenarioError(f"branch {p['branch']} requested but the drive has {len(branches)} steady state(s)")
    beta = branches[p["branch"]]
    gen = build_ring_generator(p["scheme"], model, beta)
    times = default_time_grid(gen, span=p["span"] / min(gen.gamma_bar), points=p["points"])
    mom = ring_moments(gen, green_function(gen, times))
    omega = np.linspace(-p["omega_max"], p["omega_max"], p["omega_points"])
    try:
        spec = squeezing_spectrum(mom, p["phi"], omega)
    except PreconditionError as exc:
        # a drifting window means the span is too short or the pump is above threshold
        raise ScenarioError(f"no stationary output: {exc}") from None
    rows = [[w / tau0, a, b, c] for w, a, b, c in zip(spec.omega, spec.S_min, spec.S_max, spec.S_at_phi)]
    f = emit_plotdata(Table(("omega", "S_min", "S_max", "S_at_phi"), rows), out / "spectrum.csv")
    k0 = int(np.argmin(np.abs(spec.omega)))
    summary = {
        "branches": len(branches),
        "pump_photons": {b: abs(v) ** 2 for b, v in beta.items()},
        "S_min_0": spec.S_min[k0], "S_max_0": spec.S_max[k0],
        "S_min_0_dB": 10 * np.log10(spec.S_min[k0]),
        "window": {"t0": spec.window[1] * tau0, "t1": spec.window[2] * tau0, "samples": spec.window[3]},
        "time_unit": tau0,
    }
    return [f], summary


def _run_ring_pulsed(cfg, out: Path, jobs: int) -> tuple[list, dict]:
    from .ring import (SCHEMES, build_ring_generator, green_function, pump_cavity_dynamics,
                       ring_moments)
    p = cfg.params
    model, tau0 = _ring_model(p)
    pumps, _ = SCHEMES[p["scheme"]]
    start = min(q["center"] - 5 * q["width"] for q in p["pulse"].values())
    stop = max(q["center"] + 5 * q["width"] for q in p["pulse"].values())
    gmin = min(model.res(b).gamma_bar for b in SCHEMES[p["scheme"]][1])
    t = np.linspace(start / tau0, stop / tau0 + p["span"] / gmin, p["points"])
    drives = {}
    for b, q in p["pulse"].items():
        power = q["energy"] / (np.sqrt(2 * np.pi) * q["width"]) * np.exp(-((t * tau0 - q["center"]) ** 2) / (2 * q["width"] ** 2))
        drives[b] = _field_amplitude(power, p["resonances"][b], p["length"])
    fns = {b: (lambda s, v=v: complex(np.interp(s, t, v))) for b, v in drives.items()}
    sol = pump_cavity_dynamics(model, p["scheme"], fns, t)
    gen = build_ring_generator(p["scheme"], model, sol.functions())
    mom = ring_moments(gen, green_function(gen, t))
    h = mom.dt
    chans = list(mom.N)
    flux = [np.real(np.diag(mom.N[c])) / tau0 for c in chans]
    if len(flux) == 1:
        flux = flux * 2
    pump_n = sum(np.abs(sol.beta[b]) ** 2 for b in pumps)
    rows = [[ti * tau0, pn, f1, f2] for ti, pn, f1, f2 in zip(t, pump_n, *flux)]
    f = emit_plotdata(Table(("t", "pump_photons", "flux_signal", "flux_idler"), rows), out / "pulsed.csv")
    N = mom.N[chans[0]] * h
    n_tot = float(np.real(np.trace(N)))
    k_eff = n_tot**2 / float(np.real(np.trace(N @ N))) if n_tot > 0 else 1.0
    return [f], {"mean_photons": n_tot, "K_effective": k_eff, "time_unit": tau0,
                 "hermiticity_residual": mom.hermiticity_residual()}


def _mps_model(p: dict):
    from .mps_cavity import CavityWaveguideModel
    d = p["drive"]
    h_nl = []
    if d["amplitude"] != 0:
        eps = lambda t, d=d: 0.5 * d["amplitude"] * np.exp(-(((t - d["center"]) / d["width"]) ** 2))
        h_nl += [(eps, 2, 0), (eps, 0, 2)]
    if p["kerr"] != 0:
        h_nl.append((p["kerr"], 2, 2))
    return CavityWaveguideModel(p["delta"], p["gamma"], p["v"], p["dt"], p["n_bins"], p["cutoff"],
                                tuple(h_nl), 0.0, p["D_max"], p["eps"], p["initial_photons"],
                                p["weight_budget"], p["saturation"])


def _run_mps_demo(cfg, out: Path, jobs: int) -> tuple[list, dict]:
    from .mps_cavity import occupations, simulate_cavity_mps
    model = _mps_model(cfg.params)
    mps = simulate_cavity_mps(model)
    cols = ("step", "t", "n_resonator", "n_bin", "bond", "discarded", "top_level")
    f1 = emit_plotdata(Table(cols, [[r[c] for c in cols] for r in mps.trace]), out / "trace.json")
    n = occupations(mps)
    rows = [[j, j * model.dt, n[j]] for j in range(model.n_bins)]
    f2 = emit_plotdata(Table(("bin", "t", "n"), rows), out / "occupations.csv")
    return [f1, f2], {"emitted_photons": float(np.sum(n[:-1])), "n_resonator_final": float(n[-1]),
                      "discarded_weight": mps.total_discarded(), "max_bond": max(mps.bond_dims, default=1)}


def _adhoc_trajectory(p: dict, seed: int):
    from .propagator import QuadraticHamiltonianTrajectory
    rng = np.random.default_rng(seed)
    l, H, T = p["modes"], p["harmonics"], p["t_span"]
    cd = rng.standard_normal((H, 2, l, l)) + 1j * rng.standard_normal((H, 2, l, l))
    cz = rng.standard_normal((H, 2, l, l)) + 1j * rng.standard_normal((H, 2, l, l))
    cd = 0.5 * (cd + np.conj(np.swapaxes(cd, -1, -2)))
    cz = 0.5 * (cz + np.swapaxes(cz, -1, -2))
    scale = p["amplitude"] / np.sqrt(H * l)

    def series(c, t):
        k = np.arange(1, H + 1)[:, None, None]
        w = 2 * np.pi * k * t / T
        return scale * np.sum(c[:, 0] * np.cos(w) + c[:, 1] * np.sin(w), axis=0)

    return QuadraticHamiltonianTrajectory.from_functions(lambda t: series(cd, t), lambda t: series(cz, t),
                                                         0.0, T, p["steps"])


def _run_gaussian_adhoc(cfg, out: Path, jobs: int) -> tuple[list, dict]:
    from .gaussian_state import state_from_propagator
    from .propagator import trotter_propagate
    from .statistics import photon_number_moments
    traj = _adhoc_trajectory(cfg.params, cfg.seed)
    K = trotter_propagate(traj)
    # round-off in K grows like |V|^2; accept what trotter_propagate accepted
    state = state_from_propagator(K, tol=1e-8 * max(1.0, float(np.linalg.norm(K.V)) ** 2))
    f = out / "state.json"
    f.write_text(dumps_stable(state.to_dict()), newline="\n")
    pm = photon_number_moments(state)
    r1, r2 = K.residuals()
    return [f], {"total_photons": pm.total_mean, "total_variance": pm.total_variance,
                 "symplectic_residual": max(r1, r2), "physicality": state.physicality()}


RUNNERS = {
    "waveguide-sweep": _run_waveguide_sweep,
    "waveguide-jsa": _run_waveguide_jsa,
    "ring-spectrum": _run_ring_spectrum,
    "ring-pulsed": _run_ring_pulsed,
    "mps-demo": _run_mps_demo,
    "gaussian-adhoc": _run_gaussian_adhoc,
}


def run_scenario(cfg: ScenarioConfig, out=None, jobs: int = 1) -> dict:
    """Run a validated scenario and write its files plus ``manifest.json``."""
    out = Path(out if out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        files, summary = RUNNERS[cfg.scenario](cfg, out, max(1, int(jobs)))
    except ScenarioError as exc:
        raise ScenarioError(f"{cfg.scenario}: {exc}") from exc
    except (SqueezeSimError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ScenarioError(f"{cfg.scenario}: {type(exc).__name__}: {exc}") from exc
    sfile = out / "summary.json"
    sfile.write_text(dumps_stable(summary), newline="\n")
    files = sorted(set(files) | {sfile}, key=lambda x: x.name)
    manifest = {
        "version": __version__,
        "scenario": cfg.scenario,
        "config": cfg.to_dict(),
        "files": [{"name": f.name, "sha256": _sha256(f), "bytes": f.stat().st_size} for f in files],
        "summary": summary,
    }
    (out / "manifest.json").write_text(dumps_stable(manifest), newline="\n")
    return manifest


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="squeezesim", description="Run squeezed-light scenarios from a config file.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="validate and run a scenario")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    run.add_argument("--seed", type=int, help="seed override")
    val = sub.add_parser("validate", help="check a config and print it with defaults filled in")
    val.add_argument("config")
    sub.add_parser("version", help="print the package version")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        cfg = parse_config(args.config)
        if args.command == "run" and args.seed is not None:
            cfg = validate_config(cfg.replace(seed=args.seed).to_dict())
        if args.command == "run" and args.jobs < 1:
            raise ValidationError([f"--jobs must be >= 1, got {args.jobs}"])
    except ValidationError as exc:
        for msg in exc.problems:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        sys.stdout.write(emit_config(cfg))
        return EXIT_OK
    try:
        manifest = run_scenario(cfg, args.out, args.jobs)
    except (ScenarioError, OSError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for f in manifest["files"]:
        print(f"{f['sha256']}  {f['name']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
