"""Strict INI-style experiment configuration.

Every section and key is declared in :data:`SCHEMA`; unknown names are errors
and all violations are collected before raising, so one run reports every
typo at once.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

KINDS = (
    "wigner_evolve",
    "schrodinger_reference",
    "relativistic_free",
    "imaginary_diffusion",
    "stochastic_ensemble",
    "compare",
)


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in text.replace(",", " ").split())


def _pow2(text):
    n = int(text)
    if n < 8 or n & (n - 1):
        raise ValueError(f"{n} is not a power of two >= 8 (spectral grids need power-of-two sizes)")
    return n


def _positive(text):
    x = float(text)
    if not x > 0:
        raise ValueError(f"{x} must be positive")
    return x


def _nonneg(text):
    x = float(text)
    if x < 0:
        raise ValueError(f"{x} must be non-negative")
    return x


def _count(text):
    n = int(text)
    if n < 0:
        raise ValueError(f"{n} must be non-negative")
    return n


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"{text!r} is not one of {', '.join(options)}")
        return text
    return parse


def _formats(text):
    items = tuple(text.replace(",", " ").split())
    bad = [x for x in items if x not in ("csv", "fields")]
    if bad:
        raise ValueError(f"unknown output formats {bad}; use csv and/or fields")
    return items


# section -> key -> (parser, required)
SCHEMA = {
    "experiment": {
        "kind": (_choice(*KINDS), True),
        "seed": (int, False),
    },
    "grid": {
        "q_min": (float, True), "q_max": (float, True), "n_q": (_pow2, True),
        "p_min": (float, True), "p_max": (float, True), "n_p": (_pow2, True),
    },
    "params": {
        "hbar": (_positive, True),
        "mass": (_nonneg, True),
        "c": (_positive, False),
    },
    "potential": {
        "kind": (_choice("constant", "linear", "harmonic", "polynomial", "gaussian_well"), True),
        "U0": (float, False), "a": (float, False), "k": (float, False),
        "coefficients": (_floats, False), "depth": (float, False), "width": (_positive, False),
    },
    "initial": {
        "q0": (float, True), "p0": (float, True),
        "sigma_q": (_positive, True), "sigma_p": (_positive, False),
    },
    "solver": {
        "dt": (float, False), "steps": (_count, False), "kernel": (_choice("exact", "truncated", "classical"), False),
        "order": (_count, False), "record_every": (int, False), "t": (float, False),
        "integrator_order": (int, False),
    },
    "noise": {
        "family": (_choice("none", "gaussian_white", "uniform"), True),
        "amplitude": (_nonneg, False), "correlation_time": (_nonneg, False),
    },
    "ensemble": {
        "count": (int, True), "closure_orders": (_ints, False),
        "bandwidth_q": (_positive, False), "bandwidth_p": (_positive, False),
    },
    "diffusion": {
        "sigma0": (_positive, True), "D": (_nonneg, False), "t_max": (_nonneg, True),
        "samples": (int, True), "k_values": (_floats, False),
    },
    "output": {
        "directory": (str, True), "formats": (_formats, False),
    },
}

REQUIRED_SECTIONS = {
    "wigner_evolve": ("grid", "params", "potential", "initial", "solver", "output"),
    "schrodinger_reference": ("grid", "params", "potential", "initial", "solver", "output"),
    "relativistic_free": ("grid", "params", "initial", "solver", "output"),
    "imaginary_diffusion": ("params", "diffusion", "output"),
    "stochastic_ensemble": ("grid", "params", "potential", "initial", "solver", "noise", "ensemble", "output"),
    "compare": ("grid", "params", "potential", "initial", "solver", "output"),
}

# Solver keys each kind cannot run without.
REQUIRED_SOLVER_KEYS = {
    "wigner_evolve": ("dt", "steps"),
    "schrodinger_reference": ("dt", "steps"),
    "relativistic_free": ("t",),
    "stochastic_ensemble": ("dt", "steps"),
    "compare": ("dt", "steps"),
}

POTENTIAL_KEYS = {
    "constant": ("U0",), "linear": ("a",), "harmonic": ("k",),
    "polynomial": ("coefficients",), "gaussian_well": ("depth", "width"),
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class ExperimentConfig:
    kind: str
    sections: dict
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def __getitem__(self, section):
        return self.sections[section]

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def seed(self) -> int:
        return self.get("experiment", "seed", 0)


def _reader():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    return cp


def parse_config(text: str) -> ExperimentConfig:
    cp = _reader()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from None
    problems = []
    sections = {}
    raw = {}
    for name in cp.sections():
        if name not in SCHEMA:
            problems.append(f"unknown section [{name}]")
            continue
        schema = SCHEMA[name]
        sections[name] = {}
        raw[name] = dict(cp[name])
        for key, value in cp[name].items():
            if key not in schema:
                problems.append(f"[{name}] unknown key {key!r}")
                continue
            try:
                sections[name][key] = schema[key][0](value.strip())
            except ValueError as exc:
                problems.append(f"[{name}] {key}: {exc}")
        for key, (_, required) in schema.items():
            if required and key not in cp[name]:
                problems.append(f"[{name}] missing required key {key!r}")
    kind = sections.get("experiment", {}).get("kind")
    if "experiment" not in sections:
        problems.append("missing section [experiment]")
    if kind is not None:
        for name in REQUIRED_SECTIONS[kind]:
            if name not in cp.sections():
                problems.append(f"experiment kind {kind!r} needs section [{name}]")
        for key in REQUIRED_SOLVER_KEYS.get(kind, ()):
            if "solver" in cp.sections() and key not in cp["solver"]:
                problems.append(f"[solver] missing required key {key!r} for {kind}")
        pot = sections.get("potential", {})
        for key in POTENTIAL_KEYS.get(pot.get("kind"), ()):
            if key not in pot and "potential" in cp.sections() and key not in cp["potential"]:
                problems.append(f"[potential] kind {pot['kind']!r} needs key {key!r}")
        if kind in ("relativistic_free",) and "params" in cp.sections() and "c" not in cp["params"]:
            problems.append("[params] missing required key 'c' for relativistic_free")
        mass = sections.get("params", {}).get("mass")
        if mass == 0 and kind != "relativistic_free":
            problems.append("[params] mass = 0 is only allowed for relativistic_free")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(kind, sections, raw)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c))`` reproduces ``c``."""
    lines = []
    for name in SCHEMA:
        if name not in cfg.sections:
            continue
        lines.append(f"[{name}]")
        for key in SCHEMA[name]:
            if key in cfg.sections[name]:
                lines.append(f"{key} = {_format_value(cfg.sections[name][key])}")
        lines.append("")
    return "\n".join(lines)


def _format_value(v):
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)
