"""Line-oriented run configuration.

::

    # comment
    [problem]
    f = "sin(t)+ln(1+x)+ln(1+y)"
    L = 10

    [solver]
    grid_n = 2001

Values are numbers or double-quoted strings. Keys are unique across all
sections, so each one doubles as a command-line flag. ``preset`` may also
appear before the first section header.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import comparison as cmp
from . import mnc, problem as prob
from .expr import ExprError, parse_expr


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Key:
    section: str
    kind: str  # expr, choice, int, float
    default: object = None
    variables: tuple = ()
    choices: tuple = ()
    doc: str = ""


MODES = ("picard", "pointwise-implicit")
RULES = ("trapezoid", "simpson")

SCHEMA = {
    # problem
    "f": Key("problem", "expr", None, ("t", "x", "y"), doc="outer map f(t, x, y); x is the inner integral, y the value"),
    "g": Key("problem", "expr", None, ("t", "s", "x"), doc="kernel g(t, s, x)"),
    "a": Key("problem", "expr", None, ("t",), doc="kernel bound factor a(t)"),
    "b": Key("problem", "expr", None, ("s",), doc="kernel bound factor b(s)"),
    "L": Key("problem", "float", 10.0, doc="truncation of the half-line"),
    "domain": Key("problem", "choice", "nonnegative", choices=prob.DOMAINS, doc="value range used for sampled balls"),
    # comparison
    "preset": Key("comparison", "choice", None, choices=tuple(cmp.PRESETS), doc="named parameter set"),
    "psi": Key("comparison", "expr", "ln(1+u)", ("u",), doc="control function"),
    "phi_big": Key("comparison", "expr", "u", ("u",), doc="dominating function"),
    "phi_density": Key("comparison", "expr", "1", ("gamma",), doc="density under the integral transform"),
    "check_domain": Key("comparison", "float", cmp.DEFAULT_U_MAX, doc="upper end of sampled u"),
    "check_points": Key("comparison", "int", cmp.DEFAULT_POINTS, doc="number of sampled u"),
    "n_max": Key("comparison", "int", cmp.DEFAULT_N_MAX, doc="iterations of psi for the decay check"),
    "decay_tol": Key("comparison", "float", cmp.DEFAULT_DECAY_TOL, doc="threshold for psi^n(t) -> 0"),
    # solver
    "grid_n": Key("solver", "int", 2001, doc="grid nodes"),
    "tol": Key("solver", "float", 1e-10, doc="stop when sup|x - Tx| <= tol"),
    "max_iter": Key("solver", "int", 200, doc="iteration limit"),
    "mode": Key("solver", "choice", "picard", choices=MODES, doc="iteration scheme"),
    "initial": Key("solver", "expr", "zero", ("t",), doc='initial iterate in t, or "zero"'),
    "rule": Key("solver", "choice", "trapezoid", choices=RULES, doc="quadrature rule"),
    # mnc
    "ensemble_size": Key("mnc", "int", mnc.DEFAULT_ENSEMBLE_SIZE, doc="random starting members"),
    "steps": Key("mnc", "int", mnc.DEFAULT_STEPS, doc="set iterations"),
    "hull_count": Key("mnc", "int", mnc.DEFAULT_HULL_COUNT, doc="members after each hull sample"),
    "seed": Key("mnc", "int", mnc.DEFAULT_SEED, doc="seed for members and hull weights"),
    "tail_fraction": Key("mnc", "float", mnc.DEFAULT_TAIL_FRACTION, doc="share of nodes standing in for t -> infinity"),
    # check
    "samples": Key("check", "int", prob.DEFAULT_SAMPLES, doc="low-discrepancy samples per sampled check"),
    "sample_seed": Key("check", "int", 0, doc="scramble seed for sampled checks"),
    "r_max": Key("check", "float", prob.DEFAULT_R_MAX, doc="largest radius tried for r0"),
    "r_resolution": Key("check", "int", prob.DEFAULT_R_RESOLUTION, doc="radii tried for r0"),
    "decay_threshold": Key("check", "float", prob.DEFAULT_DECAY_THRESHOLD, doc="largest admissible a(t) on the tail"),
    "probe_pairs": Key("check", "int", 100, doc="random pairs for the pointwise contraction probe; 0 disables it"),
}

SECTIONS = ("problem", "comparison", "solver", "mnc", "check")

_HEADER = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
_PAIR = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_NUMBER = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$")


@dataclass
class Config:
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, key):
        if key in self.values:
            return self.values[key]
        preset = self.values.get("preset")
        if preset is not None:
            if key in cmp.PRESETS[preset]:
                return cmp.PRESETS[preset][key]
            if preset == "example32" and key in cmp.EXAMPLE32_PROBLEM:
                return cmp.EXAMPLE32_PROBLEM[key]
        return SCHEMA[key].default

    def __getitem__(self, key):
        return self.get(key)

    def set(self, key, raw, line=None):
        """Set ``key`` from a raw string (a flag value, or a config value without quotes)."""
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line)
        self.values[key] = _convert(key, raw, line)
        self.lines[key] = line

    @property
    def has_problem(self) -> bool:
        return any(self.get(k) is not None for k in ("f", "g"))

    def problem(self):
        """The configured :class:`IntegralProblem`; raises ``ConfigError`` when incomplete."""
        if not self.has_problem:
            raise ConfigError("problem required: set f and g in [problem] or use preset = \"example32\"")
        for k in ("f", "g"):
            if self.get(k) is None:
                raise ConfigError(f"problem is missing {k}")
        return prob.IntegralProblem.from_strings(
            f=self.get("f"),
            g=self.get("g"),
            a=self.get("a"),
            b=self.get("b"),
            L=self.get("L"),
            triple=self.triple(),
            domain=self.get("domain"),
        )

    def triple(self):
        return cmp.ComparisonTriple.from_strings(
            psi=self.get("psi"),
            phi_big=self.get("phi_big"),
            phi_density=self.get("phi_density"),
            check_domain=self.get("check_domain"),
            check_points=self.get("check_points"),
            preset=self.get("preset"),
        )


def _convert(key, raw, line):
    spec = SCHEMA[key]
    if spec.kind == "expr":
        if key == "initial" and raw.strip() in ("zero", ""):
            return "zero"
        try:
            parse_expr(raw, spec.variables)
        except ExprError as err:
            raise ConfigError(f"{key}: {err}", line) from None
        return raw
    if spec.kind == "choice":
        if raw not in spec.choices:
            raise ConfigError(f"{key} must be one of {', '.join(spec.choices)}; got {raw!r}", line)
        return raw
    if not _NUMBER.match(raw.strip()):
        raise ConfigError(f"{key} expects a number, got {raw!r}", line)
    value = float(raw)
    if spec.kind == "int":
        if value != int(value):
            raise ConfigError(f"{key} expects an integer, got {raw!r}", line)
        return int(value)
    return value


def _strip_comment(text):
    quoted = False
    for i, ch in enumerate(text):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return text[:i]
    return text


def parse_config(text: str) -> Config:
    cfg = Config()
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line).strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        m = _PAIR.match(line)
        if not m:
            raise ConfigError(f"expected [section] or key = value, got {raw_line.strip()!r}", lineno)
        key, value = m.group(1), m.group(2).strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        expected = SCHEMA[key].section
        if section is None and key != "preset":
            raise ConfigError(f"key {key!r} appears before any section header", lineno)
        if section is not None and section != expected:
            raise ConfigError(f"key {key!r} belongs in [{expected}], not [{section}]", lineno)
        if key in cfg.lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {cfg.lines[key]}, again on line {lineno})", lineno)
        if value.startswith('"'):
            if len(value) < 2 or not value.endswith('"') or '"' in value[1:-1]:
                raise ConfigError(f"unterminated or malformed string for {key!r}", lineno)
            value = value[1:-1]
            if SCHEMA[key].kind in ("int", "float"):
                raise ConfigError(f"{key} expects a number, got a string", lineno)
        elif SCHEMA[key].kind in ("expr", "choice"):
            raise ConfigError(f"{key} expects a double-quoted string", lineno)
        cfg.set(key, value, lineno)
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from None
    return parse_config(text)
