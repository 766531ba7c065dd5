"""Run configuration: a line-oriented ``key = value`` format with ``[section]`` headers.

Keys are unique across sections, so a config may also be written without
headers.  Every value is validated before any computation starts, and
``resolved_text`` echoes all defaults for reproducibility.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import math
import operator
import re
from dataclasses import dataclass

import numpy as np

from .discretization import INIT_RULES, SCHEMES
from .errors import ParseError, ValidationError
from .spectral import Interval, ModeExpansion, Rectangle, SpectralDomain, make_domain, project, unit_mode
from .wavesolve import (ZERO_FORCING, FracWaveProblem, ModeForcing, constant_forcing, polynomial_forcing,
                        sine_forcing)

__all__ = ["RunConfig", "SECTIONS", "parse_config", "parse_number", "build_domain", "build_problem",
           "lambda_1_of"]

# section -> ordered (key, default text)
SECTIONS: dict[str, tuple[tuple[str, str], ...]] = {
    "domain": (("domain", "interval"), ("L", "pi"), ("Ly", "pi"), ("n_modes", "4"), ("modes", "")),
    "problem": (("s", "0.5"), ("gamma", "1.5"), ("T", "1")),
    "data": (("g", "mode:1"), ("h", "zero"), ("f", "zero")),
    "weight": (("beta", "0"), ("theta", "0")),
    "scheme": (("scheme", "L2"), ("levels", "6..12"), ("init_rule", "fractional_taylor"),
               ("manufactured", "true")),
    "output": (("x_points", "9"), ("t_points", "11"), ("y_points", "9"), ("y_max", "2")),
    "regularity": (("suite", "time"), ("rho", "auto"), ("expect", "auto"), ("q", "3"), ("sigma", "0"),
                   ("nu", "0"), ("ell_max", "4")),
    "run": (("seed", "42"), ("out", "fracwave_out")),
}
_KEY_SECTION = {key: sec for sec, items in SECTIONS.items() for key, _ in items}
_ROOT = "__root__"

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e}


def parse_number(text: str) -> float:
    """Float literal or arithmetic expression in numbers, ``pi`` and ``e``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ValueError(text)

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError):
        raise ValueError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


@dataclass(frozen=True)
class RunConfig:
    domain: str
    L: float
    Ly: float
    n_modes: int
    modes: tuple[int, ...] | None
    s: float
    gamma: float
    T: float
    g: str
    h: str
    f: str
    beta: float
    theta: float
    scheme: str
    levels: tuple[int, ...]
    init_rule: str
    manufactured: bool
    x_points: int
    t_points: int
    y_points: int
    y_max: float
    suite: str
    rho: float | None
    expect: str
    q: int
    sigma: float
    nu: float
    ell_max: int
    seed: int
    out: str
    raw: dict

    @property
    def resolved_text(self) -> str:
        lines = []
        for sec, items in SECTIONS.items():
            lines.append(f"[{sec}]")
            lines.extend(f"{key} = {self.raw[key]}" for key, _ in items)
            lines.append("")
        return "\n".join(lines)

    @property
    def config_hash(self) -> str:
        """Digest of every resolved setting except the output directory."""
        text = "\n".join(f"{key}={self.raw[key]}" for key in sorted(self.raw) if key != "out")
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def replace(self, **changes) -> RunConfig:
        """Apply overrides given as text values and revalidate."""
        raw = dict(self.raw)
        for key, value in changes.items():
            if key not in _KEY_SECTION:
                raise ValidationError(f"unknown key {key!r}")
            raw[key] = str(value)
        return _validate(raw, {})


def _key_lines(text: str) -> dict[str, int]:
    """Line number of every ``key = value`` line."""
    pattern = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")
    found = {}
    for i, line in enumerate(text.splitlines(), start=1):
        m = pattern.match(line)
        if m:
            found.setdefault(m.group(1), i)
    return found


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration."""
    if not isinstance(text, str):
        raise ParseError("config must be text")
    lines = text.splitlines()
    first = next((ln.strip() for ln in lines if ln.strip() and not ln.strip().startswith(("#", ";"))), "")
    offset = 0
    body = text
    if not first.startswith("["):
        body = f"[{_ROOT}]\n" + text
        offset = 1
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), strict=True,
                                       empty_lines_in_values=False, default_section="\x00")
    parser.optionxform = str
    try:
        parser.read_string(body)
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", (exc.lineno or offset) - offset) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", (exc.lineno or offset) - offset) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - offset if exc.errors else None
        raise ParseError("expected 'key = value'", lineno) from None
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0]) from None
    where = _key_lines(text)
    raw: dict[str, str] = {}
    for sec in parser.sections():
        if sec != _ROOT and sec not in SECTIONS:
            line = next((i for i, ln in enumerate(lines, 1) if ln.strip() == f"[{sec}]"), None)
            raise ParseError(f"unknown section [{sec}]", line)
        for key, value in parser.items(sec):
            home = _KEY_SECTION.get(key)
            if home is None:
                raise ParseError(f"unknown key {key!r}", where.get(key))
            if sec != _ROOT and sec != home:
                raise ParseError(f"key {key!r} belongs in section [{home}]", where.get(key))
            if key in raw:
                raise ParseError(f"duplicate key {key!r}", where.get(key))
            raw[key] = value.strip()
    for sec, items in SECTIONS.items():
        for key, default in items:
            raw.setdefault(key, default)
    return _validate(raw, where)


def _levels(text: str) -> tuple[int, ...]:
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if m:
        return tuple(range(int(m.group(1)), int(m.group(2)) + 1))
    return tuple(int(v) for v in text.split(","))


def _validate(raw: dict[str, str], where: dict[str, int]) -> RunConfig:
    def num(key: str) -> float:
        try:
            return parse_number(raw[key])
        except ValueError as exc:
            raise ParseError(f"{key}: {exc}", where.get(key)) from None

    def integer(key: str) -> int:
        v = num(key)
        if v != int(v):
            raise ValidationError(f"{key} must be an integer")
        return int(v)

    def boolean(key: str) -> bool:
        v = raw[key].strip().lower()
        if v in ("true", "yes", "1", "on"):
            return True
        if v in ("false", "no", "0", "off"):
            return False
        raise ParseError(f"{key}: expected true or false", where.get(key))

    domain = raw["domain"].strip().lower()
    if domain not in ("interval", "rectangle"):
        raise ValidationError("domain must be 'interval' or 'rectangle'")
    L, Ly = num("L"), num("Ly")
    if not (L > 0 and Ly > 0):
        raise ValidationError("domain lengths must be positive")
    n_modes = integer("n_modes")
    if not (1 <= n_modes <= 4096):
        raise ValidationError("n_modes must lie in 1..4096")
    modes = None
    if raw["modes"].strip():
        if domain != "interval":
            raise ValidationError("modes is only available for interval domains")
        try:
            modes = tuple(int(v) for v in raw["modes"].split(","))
        except ValueError:
            raise ParseError("modes: expected comma separated integers", where.get("modes")) from None
        if len(modes) != n_modes or len(set(modes)) != n_modes or min(modes) < 1:
            raise ValidationError("modes must list n_modes distinct positive integers")
    s, gamma, T = num("s"), num("gamma"), num("T")
    if not 0.0 < s < 1.0:
        raise ValidationError("s must lie in (0,1)")
    if not 1.0 < gamma <= 2.0:
        raise ValidationError("gamma must lie in (1,2]")
    if not T > 0.0:
        raise ValidationError("T must be positive")
    beta, theta = num("beta"), num("theta")
    lam1 = lambda_1_of(domain, L, Ly, modes)
    if theta < 0.0:
        raise ValidationError("theta must be >= 0")
    if theta >= 2.0 * math.sqrt(lam1):
        raise ValidationError(f"theta must be < 2*sqrt(lambda_1) = {2.0 * math.sqrt(lam1):.6g}")
    if theta > 0.95 * 2.0 * math.sqrt(lam1):
        raise ValidationError("theta must be < 2*sqrt(lambda_1) (enforced as theta <= 0.95*2*sqrt(lambda_1))")
    if beta <= -1.0 - 4.0 * s:
        raise ValidationError("beta must exceed -1-4s")
    scheme = raw["scheme"].strip()
    if scheme not in SCHEMES:
        raise ValidationError(f"scheme must be one of {', '.join(SCHEMES)}")
    try:
        levels = _levels(raw["levels"])
    except ValueError:
        raise ParseError("levels: expected 'a..b' or a comma separated list", where.get("levels")) from None
    if len(levels) < 3 or len(set(levels)) != len(levels) or min(levels) < 1 or max(levels) > 20:
        raise ValidationError("levels needs at least three distinct exponents in 1..20")
    init_rule = raw["init_rule"].strip()
    if init_rule not in INIT_RULES:
        raise ValidationError(f"init_rule must be one of {', '.join(sorted(INIT_RULES))}")
    manufactured = boolean("manufactured")
    if manufactured and gamma == 2.0:
        raise ValidationError("the L2 convergence study requires gamma < 2")
    x_points, t_points, y_points = integer("x_points"), integer("t_points"), integer("y_points")
    if min(x_points, t_points, y_points) < 1 or max(x_points, t_points, y_points) > 10000:
        raise ValidationError("x_points, t_points and y_points must lie in 1..10000")
    y_max = num("y_max")
    if not y_max > 0.0:
        raise ValidationError("y_max must be positive")
    suite = raw["suite"].strip()
    if suite not in ("time", "space", "spacetime"):
        raise ValidationError("suite must be time, space or spacetime")
    rho = None if raw["rho"].strip() == "auto" else num("rho")
    expect = raw["expect"].strip()
    if expect not in ("auto", "finite", "diverge"):
        raise ValidationError("expect must be auto, finite or diverge")
    q = integer("q")
    if q not in (0, 1, 2, 3):
        raise ValidationError("q must lie in 0..3")
    sigma, nu = num("sigma"), num("nu")
    if not 0.0 <= sigma < s:
        raise ValidationError("sigma must satisfy 0 <= sigma < s")
    if not 0.0 <= nu < 1.0 + s:
        raise ValidationError("nu must satisfy 0 <= nu < 1+s")
    ell_max = integer("ell_max")
    if not 0 <= ell_max <= 4:
        raise ValidationError("ell_max must lie in 0..4")
    seed = integer("seed")
    if seed < 0:
        raise ValidationError("seed must be nonnegative")
    out = raw["out"].strip()
    if not out:
        raise ValidationError("out must name a directory")
    for key in ("g", "h"):
        _check_data(key, raw[key], domain, n_modes)
    _parse_forcing(raw["f"], n_modes)
    return RunConfig(domain, L, Ly, n_modes, modes, s, gamma, T, raw["g"].strip(), raw["h"].strip(),
                     raw["f"].strip(), beta, theta, scheme, levels, init_rule, manufactured, x_points,
                     t_points, y_points, y_max, suite, rho, expect, q, sigma, nu, ell_max, seed, out,
                     dict(raw))


def lambda_1_of(domain: str, L: float, Ly: float, modes: tuple[int, ...] | None) -> float:
    if domain == "interval":
        k = 1 if modes is None else min(modes)
        return (k * math.pi / L) ** 2
    return math.pi ** 2 * (1.0 / L ** 2 + 1.0 / Ly ** 2)


# ---------------------------------------------------------------- data presets

def _data_spec(text: str) -> tuple[str, tuple]:
    """Split a g/h preset into (kind, params); ValueError when malformed."""
    kind, _, rest = text.strip().partition(":")
    if kind == "zero" and not rest:
        return kind, ()
    if kind == "mode":
        parts = rest.split(":")
        if len(parts) > 2:
            raise ValueError(text)
        return kind, (int(parts[0]), parse_number(parts[1]) if len(parts) == 2 else 1.0)
    if kind == "bump":
        return kind, (parse_number(rest) if rest else 1.0,)
    if kind == "coeffs":
        return kind, tuple(parse_number(v) for v in rest.split(","))
    raise ValueError(text)


def _check_data(key: str, text: str, domain: str, n_modes: int) -> None:
    try:
        kind, params = _data_spec(text)
    except ValueError:
        raise ValidationError(
            f"{key}: malformed preset {text!r} (use zero, mode:K[:A], bump[:A], coeffs:c1,...)") from None
    if kind == "mode" and not 1 <= params[0] <= n_modes:
        raise ValidationError(f"{key}: mode index must lie in 1..n_modes")
    if kind == "bump" and domain != "interval":
        raise ValidationError(f"{key}: the bump preset needs an interval domain")
    if kind == "coeffs" and len(params) != n_modes:
        raise ValidationError(f"{key}: coeffs needs n_modes values")


def _profile(text: str) -> ModeForcing:
    kind, _, rest = text.partition(":")
    args = [parse_number(v) for v in rest.split(",")] if rest else []
    if kind == "const" and len(args) == 1:
        return constant_forcing(args[0])
    if kind == "sine" and 1 <= len(args) <= 3:
        return sine_forcing(*args)
    if kind == "poly" and args:
        return polynomial_forcing(args)
    raise ValueError(text)


def _parse_forcing(text: str, n_modes: int) -> tuple[ModeForcing, ...] | None:
    """``zero`` or ``;``-separated ``K:profile`` / ``all:profile`` entries."""
    text = text.strip()
    if text == "zero":
        return None
    modes = [ZERO_FORCING] * n_modes
    for entry in text.split(";"):
        target, _, prof = entry.strip().partition(":")
        try:
            fk = _profile(prof)
        except ValueError:
            raise ValidationError(
                f"f: malformed profile {prof!r} (use const:c, sine:a[,omega[,phase]], poly:c0,c1,...)") from None
        if target == "all":
            modes = [fk] * n_modes
            continue
        try:
            k = int(target)
        except ValueError:
            raise ValidationError(f"f: entry {entry!r} must start with a mode index or 'all'") from None
        if not 1 <= k <= n_modes:
            raise ValidationError("f: mode index must lie in 1..n_modes")
        modes[k - 1] = fk
    return tuple(modes)


def build_domain(cfg: RunConfig) -> SpectralDomain:
    if cfg.domain == "interval":
        return make_domain(Interval(cfg.L, cfg.modes), cfg.n_modes)
    return make_domain(Rectangle(cfg.L, cfg.Ly), cfg.n_modes)


def _expansion(text: str, domain: SpectralDomain, L: float) -> ModeExpansion:
    kind, params = _data_spec(text)
    if kind == "zero":
        return ModeExpansion.zeros(domain)
    if kind == "mode":
        return unit_mode(domain, params[0]).scaled(params[1])
    if kind == "bump":
        amp = params[0]
        return project(domain, lambda x: amp * x * (L - x))
    return ModeExpansion(domain, np.array(params))


def build_problem(cfg: RunConfig, domain: SpectralDomain | None = None) -> FracWaveProblem:
    dom = build_domain(cfg) if domain is None else domain
    return FracWaveProblem(dom, cfg.s, cfg.gamma, cfg.T, _expansion(cfg.g, dom, cfg.L),
                           _expansion(cfg.h, dom, cfg.L), _parse_forcing(cfg.f, cfg.n_modes))

