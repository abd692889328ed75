"""Run configuration: key = value files, grid strings and the merged SweepConfig."""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


class UsageError(InputError):
    """Bad command line or configuration; maps to exit status 1."""


COMMANDS = ("bounds", "sweep-ratio", "sweep-chi", "sweep-distance", "polarizability",
            "oracle", "matsubara")

# every key accepted in a config file, with its default
DEFAULTS = {
    "command": None,
    "material": None,
    "chi0": None,
    "omega_p": None,
    "gamma": None,
    "table": None,
    "pec": False,
    "alpha_par": None,
    "alpha_perp": None,
    "ratio": None,
    "iso": False,
    "d": 100.0,
    "axis": "z",
    "ratios": "0:100:41",
    "chis": "1e-2:1e6:25(log)",
    "distances": "10:10000:31(log)",
    "axes": None,
    "semi": False,
    "eps": None,
    "temperature": None,
    "trials": 1000,
    "seed": 0,
    "tol": 1e-8,
    "output": None,
    "svg": None,
    "workers": None,
}

SECTIONS = ("material", "dipole", "grid", "quadrature", "output", "oracle", "run")

_BOOL = {"pec", "iso", "semi"}
_INT = {"trials", "seed", "workers"}
_FLOAT = {"chi0", "omega_p", "gamma", "alpha_par", "alpha_perp", "ratio", "d", "eps",
          "temperature", "tol"}

_GRID = re.compile(r"^\s*([^:]+):([^:]+):(\d+)\s*(\(log\))?\s*$")


@dataclass(frozen=True)
class Grid:
    lo: float
    hi: float
    count: int
    log: bool = False

    def values(self) -> np.ndarray:
        if self.log:
            return np.logspace(math.log10(self.lo), math.log10(self.hi), self.count)
        return np.linspace(self.lo, self.hi, self.count)


def parse_grid(text: str) -> Grid:
    """Parse ``min:max:count`` with an optional ``(log)`` suffix."""
    m = _GRID.match(str(text))
    if not m:
        raise UsageError(f"bad grid {text!r}; expected min:max:count or min:max:count(log)")
    try:
        lo, hi = float(m.group(1)), float(m.group(2))
    except ValueError:
        raise UsageError(f"bad grid bounds in {text!r}") from None
    count = int(m.group(3))
    log = m.group(4) is not None
    if count < 2:
        raise UsageError(f"grid {text!r} needs count >= 2")
    if not lo < hi:
        raise UsageError(f"grid {text!r} needs min < max")
    if log and lo <= 0:
        raise UsageError(f"log grid {text!r} needs min > 0")
    return Grid(lo, hi, count, log)


def parse_values(text: str) -> np.ndarray:
    """Grid string, or a comma-separated list of explicit values."""
    text = str(text)
    if ":" in text:
        return parse_grid(text).values()
    try:
        vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"bad value list {text!r}") from None
    if vals.size == 0:
        raise UsageError("empty value list")
    return vals


def _normalize_key(key):
    return key.strip().lower().replace("-", "_")


def _coerce(key, value):
    if value is None or not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if key in _BOOL:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if key in _INT:
            return int(text)
        if key in _FLOAT:
            return float(text)
    except ValueError:
        raise UsageError(f"invalid value for {key}: {value!r}") from None
    return text


def load_config(path) -> dict:
    """Read a ``key = value`` file with optional ``[section]`` headers.

    Keys may appear at top level or in any known section; each key may
    appear once in the whole file.  Unknown keys and sections are
    rejected.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    parser = configparser.ConfigParser(
        strict=True, interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",),
        delimiters=("=",), default_section="__defaults__",
    )
    parser.optionxform = _normalize_key
    try:
        parser.read_string("[run]\n" + text, source=str(path))
    except configparser.DuplicateOptionError as exc:
        # one line was prepended for the implicit [run] section
        raise UsageError(f"{path}:{exc.lineno - 1}: duplicate key {exc.option!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise UsageError(f"{path}: duplicate section [{exc.section}]") from None
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise UsageError(f"{path}: unknown section [{section}]; valid: {', '.join(SECTIONS)}")
        for key, value in parser.items(section):
            if key not in DEFAULTS:
                raise UsageError(
                    f"{path}: unknown key {key!r}; valid keys: {', '.join(sorted(DEFAULTS))}"
                )
            if key in out:
                raise UsageError(f"{path}: duplicate key {key!r}")
            out[key] = _coerce(key, value)
    return out


@dataclass(frozen=True)
class SweepConfig:
    command: str
    material: str = None
    chi0: float = None
    omega_p: float = None
    gamma: float = None
    table: str = None
    pec: bool = False
    alpha_par: float = None
    alpha_perp: float = None
    ratio: float = None
    iso: bool = False
    d: float = 100.0
    axis: str = "z"
    ratios: str = DEFAULTS["ratios"]
    chis: str = DEFAULTS["chis"]
    distances: str = DEFAULTS["distances"]
    axes: str = None
    semi: bool = False
    eps: float = None
    temperature: float = None
    trials: int = 1000
    seed: int = 0
    tol: float = 1e-8
    output: str = None
    svg: str = None
    workers: int = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; valid: {', '.join(COMMANDS)}")
        if not 1e-14 < self.tol < 1e-2:
            raise UsageError(f"tol must lie in (1e-14, 1e-2), got {self.tol}")
        if self.axis not in ("z", "x"):
            raise UsageError(f"axis must be z or x, got {self.axis!r}")
        grid_key = {"sweep-ratio": "ratios", "sweep-chi": "chis",
                    "sweep-distance": "distances"}.get(self.command)
        if grid_key:
            parse_values(getattr(self, grid_key))
        if not self.d > 0:
            raise UsageError(f"d must be > 0, got {self.d}")
        if self.trials is not None and self.trials < 1:
            raise UsageError("trials must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


def merge(file_values: dict, flag_values: dict) -> SweepConfig:
    """Defaults, then config file, then explicit flags (flags win)."""
    merged = dict(DEFAULTS)
    merged.update({k: v for k, v in file_values.items() if v is not None})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    merged = {k: v for k, v in merged.items() if k in DEFAULTS}
    if merged.get("command") is None:
        raise UsageError("no command given")
    for key in ("trials", "seed"):
        if merged[key] is None:
            merged[key] = DEFAULTS[key]
    return SweepConfig(**merged)
