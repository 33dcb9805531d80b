"""Run configuration: TOML files validated against a per-subcommand schema.

Frequencies are written in Hz (keys ending in ``_hz``) and converted to
rad/s on load; the suffix is dropped in the resolved tree. Times are in
seconds (``_s``) or, for grids, optionally in units of ``1/Delta``
(``t_max_natural``). Unknown keys and sections are errors, and all problems
are reported together.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError, ParameterError, RegimeError

TWO_PI = 2.0 * math.pi
REQUIRED = object()


@dataclass(frozen=True)
class Field:
    kind: str
    default: object = REQUIRED
    choices: tuple = ()
    minimum: float | None = None
    exclusive: bool = False


def _f(default=REQUIRED, minimum=None, exclusive=False):
    return Field("float", default, minimum=minimum, exclusive=exclusive)


def _i(default=REQUIRED, minimum=None):
    return Field("int", default, minimum=minimum)


def _s(default=REQUIRED, choices=()):
    return Field("str", default, choices=choices)


GRID = {
    "t_max_s": _f(None, 0.0, True),
    "t_max_natural": _f(None, 0.0, True),
    "n_steps": _i(REQUIRED, 1),
}

SECTIONS = {
    "spin": {"epsilon_hz": _f(0.0), "delta_hz": _f(0.0)},
    "modes": {
        "omega_m_hz": _f(REQUIRED),
        "lambda_hz": _f(REQUIRED),
        "kappa_hz": _f(0.0, 0.0),
        "nbar": _f(0.0, 0.0),
        "n_max": _i(15, 1),
    },
    "grid": GRID,
    "simulate": {
        "initial": _s("up", ("up", "down", "plus_x", "minus_x", "plus_y", "minus_y", "explicit")),
        "initial_matrix": Field("matrix", None),
        "initial_matrix_imag": Field("matrix", None),
        "spin_dephasing_hz": _f(0.0, 0.0),
        "max_dim": _i(1024, 2),
        "truncation_audit": Field("bool", False),
        "check_invariants": Field("bool", True),
    },
    "nonmarkov": {
        "measures": Field("list_str", ["rhp", "blp"], choices=("rhp", "blp")),
        "threshold": _f(1e-14, 0.0),
        "pairs": Field("list_str", ["z", "x", "y"], choices=("z", "x", "y")),
        "blp_method": _s("maps", ("maps", "direct")),
        "rhp_grid": Field("table", None),
        "blp_grid": Field("table", None),
    },
    "bath": {
        "omega_m_hz": _f(REQUIRED, 0.0, True),
        "kappa_hz": _f(REQUIRED, 0.0, True),
        "nbar": _f(None, 0.0, True),
        "hbar_beta_s": _f(None, 0.0, True),
        "lambda_hz": _f(None, 0.0),
        "n_matsubara": _i(10_000, 1),
    },
    "corr": {"t_min_s": _f(0.0), "t_max_s": _f(REQUIRED), "n_points": _i(1001, 1)},
    "corr_dist": {
        "omega_m_hz": _f(REQUIRED, 0.0, True),
        "kappa_hz": Field("list_float"),
        "nbar": Field("list_float"),
        "n_matsubara": _i(10_000, 1),
    },
    "spectral_density": {
        "kind": _s("lorentzian", ("lorentzian", "flat", "ohmic", "tabulated")),
        "components": Field("components", None),
        "low_hz": _f(None, 0.0),
        "high_hz": _f(None, 0.0, True),
        "value_hz": _f(None, 0.0),
        "alpha": _f(None, 0.0),
        "omega_c_hz": _f(None, 0.0, True),
        "s": _f(1.0, 0.0, True),
        "file": _s(None),
    },
    "sd": {
        "f_min_hz": _f(0.0, 0.0),
        "f_max_hz": _f(REQUIRED, 0.0, True),
        "n_points": _i(1001, 2),
        "nbar": _f(None, 0.0, True),
        "hbar_beta_s": _f(None, 0.0, True),
        "nbar_ref_hz": _f(None, 0.0, True),
    },
    "sd_fit": {
        "n_components": _i(REQUIRED, 1),
        "n_restarts": _i(8, 1),
        "seed": _i(0),
        "f_max_hz": _f(None, 0.0, True),
        "n_points": _i(2000, 3),
    },
    "crystal": {
        "mass_1_amu": _f(REQUIRED, 0.0, True),
        "mass_2_amu": _f(REQUIRED, 0.0, True),
        "omega_com_ref_hz": _f(REQUIRED, 0.0, True),
        "mass_ref_amu": _f(None, 0.0, True),
    },
    "lasers": {
        "wavelength_m": _f(REQUIRED, 0.0, True),
        "geometry_angle_deg": _f(90.0, 0.0),
        "omega_odf_hz": _f(0.0, 0.0),
        "detuning_delta_m_hz": _f(0.0),
        "big_detuning_hz": _f(None, 0.0, True),
        "gamma_hz": _f(0.0, 0.0),
        "gamma_up_fraction": _f(0.5, 0.0),
        "rabi_0_hz": _f(0.0, 0.0),
        "rabi_table_hz": Field("matrix", None),
    },
    "ion_params": {"kappa_hz": _f(None, 0.0), "nbar": _f(None, 0.0, True), "spin_ion": _i(1, 0)},
    "chain": {"omega_max_hz": _f(REQUIRED, 0.0, True), "n_nodes": _i(2000, 2), "n_chain": _i(15, 1)},
    "chain_evolve": {
        "d_max": _i(4, 2),
        "n_sites": _i(6, 1),
        "initial": _s("up", ("up", "down", "plus_x", "minus_x", "plus_y", "minus_y")),
        "max_dim": _i(2 * 4 ** 7, 2),
    },
}

COMPONENT = {"lambda_hz": _f(REQUIRED, 0.0), "kappa_hz": _f(REQUIRED, 0.0, True),
             "omega_m_hz": _f(REQUIRED, 0.0, True)}

# subcommand -> (required sections, optional sections)
SUBCOMMANDS = {
    "sd": (("spectral_density", "sd"), ()),
    "sd-fit": (("spectral_density", "sd_fit"), ()),
    "corr": (("bath", "corr"), ()),
    "corr-dist": (("corr_dist",), ()),
    "simulate": (("spin", "grid"), ("modes", "simulate")),
    "nonmarkov": (("spin", "grid"), ("modes", "simulate", "nonmarkov")),
    "ion-params": (("crystal", "lasers"), ("ion_params",)),
    "chain": (("spectral_density", "chain"), ()),
    "chain-evolve": (("spin", "spectral_density", "chain", "grid"), ("chain_evolve",)),
}


def _check_number(path, value, fld, problems):
    if fld.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path}: expected an integer, got {value!r}")
            return None
    elif isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{path}: expected a number, got {value!r}")
        return None
    if fld.kind == "float" and not math.isfinite(value):
        problems.append(f"{path}: must be finite")
        return None
    if fld.minimum is not None:
        if fld.exclusive and not value > fld.minimum:
            problems.append(f"{path}: must be > {fld.minimum}")
            return None
        if not fld.exclusive and not value >= fld.minimum:
            problems.append(f"{path}: must be >= {fld.minimum}")
            return None
    return float(value) if fld.kind == "float" else int(value)


def _resolve_value(path, value, fld, problems):
    kind = fld.kind
    if kind in ("float", "int"):
        return _check_number(path, value, fld, problems)
    if kind == "str":
        if not isinstance(value, str):
            problems.append(f"{path}: expected a string, got {value!r}")
            return None
        if fld.choices and value not in fld.choices:
            problems.append(f"{path}: {value!r} is not one of {list(fld.choices)}")
            return None
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            problems.append(f"{path}: expected true/false, got {value!r}")
            return None
        return value
    if kind == "list_float":
        if not isinstance(value, list) or not value:
            problems.append(f"{path}: expected a non-empty list of numbers")
            return None
        out = [_check_number(f"{path}[{i}]", v, Field("float"), problems) for i, v in enumerate(value)]
        return out
    if kind == "list_str":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            problems.append(f"{path}: expected a list of strings")
            return None
        bad = [v for v in value if fld.choices and v not in fld.choices]
        if bad:
            problems.append(f"{path}: unknown entries {bad}; allowed {list(fld.choices)}")
            return None
        return list(value)
    if kind == "matrix":
        if (not isinstance(value, list) or not value
                or not all(isinstance(r, list) and len(r) == len(value[0]) for r in value)):
            problems.append(f"{path}: expected a rectangular list of lists")
            return None
        return [[_check_number(f"{path}[{i}][{j}]", v, Field("float"), problems) for j, v in enumerate(r)]
                for i, r in enumerate(value)]
    if kind == "table":
        if not isinstance(value, dict):
            problems.append(f"{path}: expected a table")
            return None
        return _resolve_table(path, value, GRID, problems)
    if kind == "components":
        if not isinstance(value, list) or not value or not all(isinstance(v, dict) for v in value):
            problems.append(f"{path}: expected an array of tables")
            return None
        return [_resolve_table(f"{path}[{i}]", v, COMPONENT, problems) for i, v in enumerate(value)]
    raise AssertionError(kind)


def _resolve_table(path, table, schema, problems):
    out = {}
    for key in table:
        if key not in schema:
            problems.append(f"{path}.{key}: unknown key")
    for key, fld in schema.items():
        name = key[:-3] if key.endswith("_hz") else key
        if key in table:
            val = _resolve_value(f"{path}.{key}", table[key], fld, problems)
            if val is not None and key.endswith("_hz"):
                val = _to_rad(val)
        elif fld.default is REQUIRED:
            problems.append(f"{path}.{key}: required key missing")
            val = None
        else:
            val = copy.deepcopy(fld.default)
        out[name] = val
    return out


def _to_rad(val):
    if isinstance(val, list):
        return [_to_rad(v) for v in val]
    return None if val is None else TWO_PI * val


@dataclass
class RunConfig:
    subcommand: str
    raw: dict
    values: dict
    digest: str
    source: str | None = None
    warnings: list = field(default_factory=list)

    def section(self, name):
        return self.values.get(name)

    def table(self):
        """Flattened ``(key, value)`` pairs of the resolved tree, sorted."""
        rows = []

        def walk(prefix, node):
            if isinstance(node, dict):
                for k in sorted(node):
                    walk(f"{prefix}.{k}" if prefix else k, node[k])
            elif isinstance(node, list) and node and isinstance(node[0], dict):
                for i, v in enumerate(node):
                    walk(f"{prefix}[{i}]", v)
            else:
                rows.append((prefix, node))

        walk("", self.values)
        return rows


def config_digest(raw) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None


def set_path(raw: dict, dotted: str, value):
    """Assign ``value`` at a dotted key path such as ``modes.0.lambda_hz``."""
    parts = dotted.split(".")
    node = raw
    for i, part in enumerate(parts[:-1]):
        nxt = parts[i + 1]
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(f"{dotted}: no element {part!r}") from None
        else:
            node = node.setdefault(part, [] if nxt.isdigit() else {})
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"{dotted}: no element {last!r}") from None
    else:
        node[last] = value


def validate(raw: dict, subcommand: str, *, strict=False, source=None) -> RunConfig:
    """Check ``raw`` against the schema of ``subcommand`` and resolve units.

    Raises
    ------
    ConfigError
        Listing every schema problem as ``key.path: reason``.
    RegimeError
        When ``strict`` and a regime ratio fails.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    required, optional = SUBCOMMANDS[subcommand]
    problems = []
    values = {}
    for name in raw:
        if name not in required and name not in optional:
            problems.append(f"{name}: section not used by '{subcommand}'")
    for name in required + optional:
        if name not in raw:
            if name in required:
                problems.append(f"{name}: required section missing")
                continue
            if name == "modes":
                values[name] = []
                continue
            raw_section = {}
        else:
            raw_section = raw[name]
        if name == "modes":
            if not isinstance(raw_section, list) or not all(isinstance(m, dict) for m in raw_section):
                problems.append("modes: expected an array of tables ([[modes]])")
                continue
            values[name] = [_resolve_table(f"modes[{i}]", m, SECTIONS["modes"], problems)
                            for i, m in enumerate(raw_section)]
            continue
        if not isinstance(raw_section, dict):
            problems.append(f"{name}: expected a table")
            continue
        values[name] = _resolve_table(name, raw_section, SECTIONS[name], problems)
    if not problems:
        _cross_checks(subcommand, values, problems)
    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(subcommand, raw, values, config_digest({"subcommand": subcommand, **raw}), source)
    _regime(cfg, strict)
    return cfg


def parse_config(path, subcommand, *, strict=False, overrides=()) -> RunConfig:
    raw = load_toml(path)
    for key, value in overrides:
        set_path(raw, key, value)
    return validate(raw, subcommand, strict=strict, source=str(path))


def _cross_checks(sub, v, problems):
    for gname in ("grid",):
        g = v.get(gname)
        if g is not None:
            _check_grid(gname, g, v, problems)
    nm = v.get("nonmarkov")
    if nm:
        for gname in ("rhp_grid", "blp_grid"):
            if nm[gname] is not None:
                _check_grid(f"nonmarkov.{gname}", nm[gname], v, problems)
    bath = v.get("bath")
    if bath and (bath["nbar"] is None) == (bath["hbar_beta_s"] is None):
        problems.append("bath: give exactly one of nbar, hbar_beta_s")
    sdv = v.get("sd")
    if sdv:
        if sdv["nbar"] is not None and sdv["hbar_beta_s"] is not None:
            problems.append("sd: give at most one of nbar, hbar_beta_s")
        if sdv["f_max"] <= sdv["f_min"]:
            problems.append("sd.f_max_hz: must exceed f_min_hz")
    sim = v.get("simulate")
    if sim and sim["initial"] == "explicit" and sim["initial_matrix"] is None:
        problems.append("simulate.initial_matrix: required when initial = 'explicit'")
    spd = v.get("spectral_density")
    if spd:
        kind = spd["kind"]
        need = {"lorentzian": ("components",), "flat": ("low", "high", "value"),
                "ohmic": ("alpha", "omega_c"), "tabulated": ("file",)}[kind]
        for key in need:
            if spd[key] is None:
                problems.append(f"spectral_density.{key}: required for kind = '{kind}'")
    lasers = v.get("lasers")
    if lasers and lasers["gamma_up_fraction"] > 1:
        problems.append("lasers.gamma_up_fraction: must be <= 1")
    if lasers and lasers["rabi_table"] is not None:
        rows = lasers["rabi_table"]
        if len(rows) != 2 or len(rows[0]) != 2:
            problems.append("lasers.rabi_table_hz: expected [[up, down], [up, down]] for two beams")
        if lasers["big_detuning"] is None:
            problems.append("lasers.big_detuning_hz: required with a Rabi table")


def _check_grid(name, g, v, problems):
    if (g["t_max_s"] is None) == (g["t_max_natural"] is None):
        problems.append(f"{name}: give exactly one of t_max_s, t_max_natural")
    elif g["t_max_natural"] is not None:
        spin = v.get("spin")
        if not spin or spin["delta"] == 0:
            problems.append(f"{name}.t_max_natural: needs a nonzero spin.delta_hz")


def grid_times(g, spin):
    t_max = g["t_max_s"] if g["t_max_s"] is not None else g["t_max_natural"] / abs(spin["delta"])
    return np.linspace(0.0, t_max, g["n_steps"] + 1)


def _regime(cfg: RunConfig, strict: bool):
    from .iontrap import regime_check

    reports = []
    for i, m in enumerate(cfg.values.get("modes") or []):
        if m["kappa"] > 0:
            nbar = m["nbar"] if m["nbar"] > 0 else None
            reports.append((f"modes[{i}]", regime_check(m["omega_m"], m["kappa"], nbar=nbar)))
    bath = cfg.values.get("bath")
    if bath:
        reports.append(("bath", regime_check(bath["omega_m"], bath["kappa"], nbar=bath["nbar"],
                                             hbar_beta=bath["hbar_beta_s"])))
    fails = []
    for where, rep in reports:
        for e in rep.entries:
            if e.status != "pass":
                msg = f"{where}: regime rule {e.name} = {e.ratio:.4g} ({e.status})"
                cfg.warnings.append(msg)
                if e.status == "fail":
                    fails.append(msg)
    if strict and fails:
        raise RegimeError(fails)


def build_objects(cfg: RunConfig):
    """Domain objects for the sections present; parameter errors become ConfigError."""
    try:
        return _build(cfg)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def _build(cfg):
    from . import correlation, iontrap, lindblad, spectral

    v = cfg.values
    out = {}
    if "spin" in v:
        out["spin"] = lindblad.SpinParams(v["spin"]["epsilon"], v["spin"]["delta"])
    if "modes" in v:
        out["modes"] = tuple(lindblad.ModeSpec(m["omega_m"], m["lambda"], m["kappa"], m["nbar"], m["n_max"])
                             for m in v["modes"])
    if "spin" in v and cfg.subcommand in ("simulate", "nonmarkov"):
        sim = v.get("simulate") or {}
        out["system"] = lindblad.SystemSpec(out["spin"], out.get("modes", ()),
                                            sim.get("spin_dephasing", 0.0),
                                            sim.get("max_dim", lindblad.DEFAULT_MAX_DIM))
    if "bath" in v:
        b = v["bath"]
        hb = b["hbar_beta_s"] if b["hbar_beta_s"] is not None else correlation.nbar_to_hbar_beta(b["nbar"], b["omega_m"])
        lam = b["lambda"] if b["lambda"] is not None else 1.0
        out["bath"] = correlation.BathParams(b["omega_m"], b["kappa"], hb, lam, b["n_matsubara"])
    if "spectral_density" in v:
        s = v["spectral_density"]
        if s["kind"] == "lorentzian":
            comps = [spectral.LorentzianComponent(c["lambda"], c["kappa"], c["omega_m"]) for c in s["components"]]
            out["target"] = spectral.TargetSpectralDensity.from_family("lorentzian", components=comps)
            out["composite"] = spectral.CompositeSpectralDensity(tuple(comps))
        elif s["kind"] == "flat":
            out["target"] = spectral.TargetSpectralDensity.from_family("flat", low=s["low"], high=s["high"],
                                                                       value=s["value"])
        elif s["kind"] == "ohmic":
            out["target"] = spectral.TargetSpectralDensity.from_family("ohmic", alpha=s["alpha"],
                                                                       omega_c=s["omega_c"], s=s["s"])
        else:
            path = Path(s["file"])
            if not path.is_absolute() and cfg.source:
                path = Path(cfg.source).parent / path
            try:
                data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
            except OSError as exc:
                raise ConfigError(f"spectral_density.file: {exc}") from None
            out["target"] = spectral.TargetSpectralDensity.from_samples(TWO_PI * data[:, 0], TWO_PI * data[:, 1])
    if "crystal" in v:
        c = v["crystal"]
        out["crystal"] = iontrap.TwoIonCrystal(c["mass_1_amu"], c["mass_2_amu"], c["omega_com_ref"],
                                               c["mass_ref_amu"])
    if "lasers" in v:
        la = v["lasers"]
        out["lasers"] = iontrap.RamanLasers(
            la["wavelength_m"], math.radians(la["geometry_angle_deg"]), la["omega_odf"],
            la["detuning_delta_m"], la["big_detuning"] if la["big_detuning"] is not None else math.inf,
            la["gamma"], la["rabi_0"])
    return out
