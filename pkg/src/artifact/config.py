"""Plain-text run configuration: ``[section]`` headers followed by ``key = value`` lines.

Every key is validated against :data:`SCHEMA`; unknown sections or keys and
malformed values raise :class:`ConfigError`.  Lists are comma separated and
``none`` disables optional entries.
"""

from __future__ import annotations

import configparser
from dataclasses import fields

from .boltzmann import KineticRunConfig
from .cns import CnsRunConfig
from .errors import ConfigError, InvalidParameterError
from .harness import SweepConfig

__all__ = ["SCHEMA", "load_config", "sweep_config", "kinetic_config", "cns_config", "render_schema"]


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _opt_float(s):
    return None if s.strip().lower() == "none" else float(s)


def _choice(*options):
    def parse(s):
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    parse.__doc__ = "|".join(options)
    return parse


_BACKEND = _choice("bgk", "hard-sphere")
_SCHEME = _choice("upwind", "muscl")
_SPLIT = _choice("strang", "lie")
_PROFILE = _choice("bump", "constant")
_DESIGN = _choice("lebedev26", "icosahedron")

# section -> key -> (parser, target field)
SCHEMA = {
    "sweep": {
        "eps": (_floats, "eps"),
        "kappa0": (float, "kappa0"),
        "T": (float, "T"),
        "resolutions": (_ints, "resolutions"),
        "backend": (_BACKEND, "backend"),
        "scheme": (_SCHEME, "scheme"),
        "splitting": (_SPLIT, "splitting"),
        "cfl": (float, "cfl"),
        "n_outputs": (int, "n_outputs"),
        "ell": (float, "ell"),
        "profile": (_PROFILE, "profile"),
        "workers": (int, "workers"),
    },
    "velocity": {"n": (int, "nv"), "vmax": (float, "vmax")},
    "cns": {"cfl": (float, "cns_cfl")},
    "full_q": {
        "eps": (_opt_float, "full_q_eps"),
        "nx": (int, "full_q_nx"),
        "design": (_DESIGN, "full_q_design"),
        "outputs": (int, "full_q_outputs"),
    },
    "kinetic": {
        "eps": (float, "eps"),
        "T": (float, "T"),
        "cfl": (float, "cfl"),
        "nx": (int, "nx"),
        "backend": (_BACKEND, "backend"),
        "scheme": (_SCHEME, "scheme"),
        "splitting": (_SPLIT, "splitting"),
        "kappa0": (float, "kappa0"),
        "profile": (_PROFILE, "profile"),
        "n_outputs": (int, "n_outputs"),
        "design": (_DESIGN, "design"),
    },
    "fluid": {
        "eps": (float, "eps"),
        "T": (float, "T"),
        "nx": (int, "nx"),
        "cfl": (float, "cfl"),
        "n_outputs": (int, "n_outputs"),
        "kappa0": (float, "kappa0"),
        "profile": (_PROFILE, "profile"),
        "transport": (_BACKEND, None),
    },
}


def load_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (T)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
    return cp


def _collect(cp, sections) -> dict:
    out = {}
    for section in sections:
        if not cp.has_section(section):
            continue
        for key, raw in cp[section].items():
            parse, target = SCHEMA[section][key]
            try:
                value = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
            out[target if target else key] = value
    return out


def _build(cls, values):
    names = {f.name for f in fields(cls)}
    try:
        return cls(**{k: v for k, v in values.items() if k in names})
    except (InvalidParameterError, TypeError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def sweep_config(cp) -> SweepConfig:
    return _build(SweepConfig, _collect(cp, ("sweep", "velocity", "cns", "full_q")))


def kinetic_config(cp) -> KineticRunConfig:
    if not cp.has_section("kinetic"):
        raise ConfigError("missing [kinetic] section")
    return _build(KineticRunConfig, _collect(cp, ("kinetic", "velocity")))


def cns_config(cp) -> tuple[CnsRunConfig, str]:
    """Fluid run settings and the transport-coefficient backend (``transport`` key, default bgk)."""
    if not cp.has_section("fluid"):
        raise ConfigError("missing [fluid] section")
    values = _collect(cp, ("fluid",))
    return _build(CnsRunConfig, values), values.get("transport", "bgk")


def render_schema() -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (parse, _) in keys.items():
            kind = parse.__doc__ if parse.__doc__ and "|" in parse.__doc__ else getattr(parse, "__name__", "value")
            lines.append(f"  {key} = <{kind.lstrip('_')}>")
    return "\n".join(lines)
