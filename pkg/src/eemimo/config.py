"""Experiment configuration files.

Plain ``key = value`` lines grouped under ``[profile]``, ``[scenario]`` and
``[experiment]``; ``#`` starts a comment. Every key has fixed units,
listed in :data:`KEYS`. Missing keys take the reference hardware values,
unknown keys are errors.

Example::

    [profile]
    P_FIX = 18        # W
    P_COD = 0.1       # W per Gbit/s
    noise = -96       # dBm over the whole band

    [experiment]
    scheme = zf
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .power import HardwareProfile, Scheme, dbm_to_watt
from .scenario import PropagationScenario

__all__ = [
    "ConfigError",
    "ExperimentSettings",
    "ExperimentConfig",
    "KEYS",
    "load_config",
    "loads_config",
    "save_config",
    "dumps_config",
]


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the line or key."""


def _watt_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w * 1000.0)


def _num(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


# (section, key) -> (attribute, parser, to internal, from internal, unit)
_ident = (lambda v: v, lambda v: v)
_per_gbit = (lambda v: v / 1e9, lambda v: v * 1e9)
_gflops = (lambda v: v * 1e9, lambda v: v / 1e9)
_dbm = (dbm_to_watt, _watt_to_dbm)
_log10 = (lambda v: 10.0**v, math.log10)

KEYS = {
    "profile": {
        "B": ("B", _num, *_ident, "Hz"),
        "U": ("U", _int, *_ident, "symbols"),
        "zeta_ul": ("zeta_ul", _num, *_ident, "fraction"),
        "zeta_dl": ("zeta_dl", _num, *_ident, "fraction"),
        "eta_ul": ("eta_ul", _num, *_ident, "fraction"),
        "eta_dl": ("eta_dl", _num, *_ident, "fraction"),
        "noise": ("noise_power", _num, *_dbm, "dBm"),
        "tau_ul": ("tau_ul", _num, *_ident, "pilot symbols per UE"),
        "tau_dl": ("tau_dl", _num, *_ident, "pilot symbols per UE"),
        "P_FIX": ("P_FIX", _num, *_ident, "W"),
        "P_SYN": ("P_SYN", _num, *_ident, "W"),
        "P_BS": ("P_BS", _num, *_ident, "W"),
        "P_UE": ("P_UE", _num, *_ident, "W"),
        "P_COD": ("P_COD", _num, *_per_gbit, "W per Gbit/s"),
        "P_DEC": ("P_DEC", _num, *_per_gbit, "W per Gbit/s"),
        "P_BT": ("P_BT", _num, *_per_gbit, "W per Gbit/s"),
        "L_BS": ("L_BS", _num, *_gflops, "Gflops/W"),
        "L_UE": ("L_UE", _num, *_gflops, "Gflops/W"),
        "Q": ("Q", _int, *_ident, "iterations"),
    },
    "scenario": {
        "geometry": ("geometry", str, *_ident, "disc|square"),
        "d_min": ("d_min", _num, *_ident, "m"),
        "d_max": ("d_max", _num, *_ident, "m"),
        "side": ("side", _num, *_ident, "m"),
        "kappa": ("kappa", _num, *_ident, "path-loss exponent"),
        "dbar_log10": ("dbar", _num, *_log10, "log10 of the path-loss constant"),
    },
    "experiment": {
        "scheme": ("scheme", str, *_ident, "zf|mrt|mmse"),
        "regime": ("regime", str, *_ident, "perfect|imperfect|multicell"),
        "reuse": ("reuse", _int, *_ident, "1|2|4"),
        "m_min": ("m_min", _int, *_ident, "antennas"),
        "m_max": ("m_max", _int, *_ident, "antennas"),
        "k_min": ("k_min", _int, *_ident, "users"),
        "k_max": ("k_max", _int, *_ident, "users"),
        "m_step": ("m_step", _int, *_ident, "antennas"),
        "k_step": ("k_step", _int, *_ident, "users"),
        "trials": ("trials", _int, *_ident, "blocks"),
        "seed": ("seed", _int, *_ident, ""),
        "point_m": ("point_m", _int, *_ident, "antennas (0 = ZF optimum)"),
        "point_k": ("point_k", _int, *_ident, "users (0 = ZF optimum)"),
        "point_rho": ("point_rho", _num, *_ident, "SINR parameter (0 = optimal)"),
        "out": ("out", str, *_ident, "directory"),
    },
}


@dataclass(frozen=True)
class ExperimentSettings:
    scheme: str = "zf"
    regime: str = "perfect"
    reuse: int = 1
    m_min: int = 1
    m_max: int = 400
    k_min: int = 1
    k_max: int = 300
    m_step: int = 1
    k_step: int = 1
    trials: int = 1000
    seed: int = 0
    point_m: int = 0
    point_k: int = 0
    point_rho: float = 0.0
    out: str = "results"

    def __post_init__(self):
        Scheme.parse(self.scheme)
        if self.regime not in ("perfect", "imperfect", "multicell"):
            raise ValueError(f"regime must be perfect, imperfect or multicell, got {self.regime!r}")
        if self.reuse not in (1, 2, 4):
            raise ValueError("reuse must be 1, 2 or 4")
        if not 1 <= self.m_min <= self.m_max or not 1 <= self.k_min <= self.k_max:
            raise ValueError("sweep ranges need 1 <= min <= max")
        if self.m_step < 1 or self.k_step < 1:
            raise ValueError("sweep steps must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.point_m < 0 or self.point_k < 0 or self.point_rho < 0:
            raise ValueError("point_m, point_k and point_rho must be >= 0")


_SCENARIO_DEFAULTS = {
    "geometry": "disc",
    "d_min": 35.0,
    "d_max": 250.0,
    "side": 500.0,
    "kappa": 3.76,
    "dbar": 10**-3.53,
}


@dataclass(frozen=True)
class ExperimentConfig:
    profile: HardwareProfile = field(default_factory=HardwareProfile)
    scenario: PropagationScenario = field(default_factory=PropagationScenario.disc)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)

    def square_scenario(self) -> PropagationScenario:
        """The configured geometry as square cells (for multi-cell runs)."""
        s = self.scenario
        if s.geometry == "square":
            return s
        return PropagationScenario.square(side=_SCENARIO_DEFAULTS["side"], d_min=s.d_min, kappa=s.kappa, dbar=s.dbar)


_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_SECTION = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]\s*$")


def _build(values: dict, origin: dict) -> ExperimentConfig:
    def where(sec, key):
        return origin.get((sec, key), f"key {key!r}")

    def make(sec, builder):
        try:
            return builder()
        except (TypeError, ValueError) as exc:
            keys = ", ".join(sorted(values[sec])) or "defaults"
            raise ConfigError(f"[{sec}] ({keys}): {exc}") from None

    prof = make("profile", lambda: HardwareProfile(**values["profile"]))

    sc = dict(_SCENARIO_DEFAULTS)
    sc.update(values["scenario"])
    geom = sc.pop("geometry")
    if geom == "disc":
        sc.pop("side")
        scen = make("scenario", lambda: PropagationScenario.disc(**sc))
    elif geom == "square":
        sc.pop("d_max")
        scen = make("scenario", lambda: PropagationScenario.square(**sc))
    else:
        raise ConfigError(f"{where('scenario', 'geometry')}: geometry must be disc or square, got {geom!r}")

    exp = make("experiment", lambda: ExperimentSettings(**values["experiment"]))
    if exp.regime == "multicell" and scen.geometry != "square":
        raise ConfigError(f"{where('experiment', 'regime')}: the multicell regime needs geometry = square")
    return ExperimentConfig(prof, scen, exp)


def loads_config(text: str, name: str = "<string>") -> ExperimentConfig:
    """Parse configuration text; see the module docstring for the format."""
    values = {sec: {} for sec in KEYS}
    origin = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        loc = f"{name}:{lineno}"
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            if section not in KEYS:
                raise ConfigError(f"{loc}: unknown section [{section}]")
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"{loc}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{loc}: key {m.group(1)!r} appears before any section header")
        key, sval = m.groups()
        spec = KEYS[section].get(key)
        if spec is None:
            raise ConfigError(f"{loc}: unknown key {key!r} in [{section}]")
        attr, parse, to_int, _, unit = spec
        if attr in values[section]:
            raise ConfigError(f"{loc}: duplicate key {key!r}")
        try:
            v = parse(sval)
            if isinstance(v, str):
                v = v.strip().strip("\"'")
            values[section][attr] = to_int(v)
        except (ValueError, OverflowError) as exc:
            raise ConfigError(f"{loc}: bad value for {key!r} ({unit}): {exc}") from None
        origin[(section, attr)] = f"{loc} ({key})"
    return _build(values, origin)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None
    return loads_config(text, str(p))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps_config(cfg: ExperimentConfig) -> str:
    """Serialize every key; ``loads_config(dumps_config(c)) == c``."""
    scen = cfg.scenario
    scen_vals = {
        "geometry": scen.geometry,
        "d_min": scen.d_min,
        "kappa": scen.kappa,
        "dbar": scen.dbar,
        "d_max": scen.d_max if scen.geometry == "disc" else None,
        "side": scen.side if scen.geometry == "square" else None,
    }
    sources = {
        "profile": lambda a: getattr(cfg.profile, a),
        "scenario": lambda a: scen_vals[a],
        "experiment": lambda a: getattr(cfg.experiment, a),
    }
    out = []
    for sec, keys in KEYS.items():
        out.append(f"[{sec}]")
        for key, (attr, _, _, from_int, unit) in keys.items():
            v = sources[sec](attr)
            if v is None:
                continue
            comment = f"  # {unit}" if unit else ""
            out.append(f"{key} = {_fmt(from_int(v))}{comment}")
        out.append("")
    return "\n".join(out)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


def with_overrides(cfg: ExperimentConfig, **experiment) -> ExperimentConfig:
    """Copy of ``cfg`` with some experiment settings replaced (None values ignored)."""
    changes = {k: v for k, v in experiment.items() if v is not None}
    if not changes:
        return cfg
    try:
        exp = replace(cfg.experiment, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if exp.regime == "multicell" and cfg.scenario.geometry != "square":
        return ExperimentConfig(cfg.profile, cfg.square_scenario(), exp)
    return ExperimentConfig(cfg.profile, cfg.scenario, exp)

