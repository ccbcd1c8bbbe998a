"""Run configuration: flat INI-style files with strict key checking.

Unknown sections or keys are hard errors; every value is parsed and range
checked up front so that a typo cannot silently change an experiment.
Lengths accept ``pi`` multiples (``2pi``, ``pi``, plain numbers).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .errors import ConfigError

MODEL_KINDS = ("allen-cahn", "cahn-hilliard", "mbe-no-slope",
               "ternary-cahn-hilliard", "navier-stokes")
SCHEME_KINDS = ("classic-cn", "combined-cn", "combined-bdf2",
                "combined-bdfk", "ns-be")
INITIAL_KINDS = ("random", "constant", "cosine", "taylor-green", "bubbles",
                 "ramp-random")

_SCHEMA = {
    "model": {"kind", "mobility", "epsilon", "lambda", "sigma", "nu"},
    "grid": {"dims", "n", "length", "paper_n"},
    "scheme": {"kind", "k", "dt", "t_final", "tol", "max_iter", "bracket",
               "tol_e", "dealias"},
    "scheme2": {"kind", "k", "dt", "t_final", "tol", "max_iter", "bracket",
                "tol_e", "dealias"},
    "initial": {"kind", "seed", "offset", "amplitude", "value", "variant",
                "radius", "x1", "x2", "y"},
    "output": {"directory", "series_stride", "snapshot_stride"},
}
_REQUIRED_SECTIONS = ("model", "grid", "scheme", "initial")


def _parse_length_token(token):
    token = token.strip().lower()
    if token.endswith("pi"):
        head = token[:-2].strip()
        factor = 1.0 if head in ("", "+") else (-1.0 if head == "-" else float(head))
        return factor * math.pi
    return float(token)


def _parse_floats(text, count=None, allow_pi=False):
    parts = text.replace(",", " ").split()
    vals = [(_parse_length_token(p) if allow_pi else float(p)) for p in parts]
    if count is not None:
        if len(vals) == 1:
            vals = vals * count
        if len(vals) != count:
            raise ConfigError(f"expected {count} values, got {text!r}")
    return vals


@dataclass
class ModelBlock:
    kind: str = "allen-cahn"
    mobility: float = 1.0
    epsilon: float = 1.0
    lam: float = 0.0
    sigma: tuple = (1.0, 1.0, 1.0)
    nu: float = 0.1


@dataclass
class GridBlock:
    dims: int = 2
    n: tuple = (64, 64)
    length: tuple = (2.0 * math.pi, 2.0 * math.pi)
    paper_n: tuple | None = None


@dataclass
class SchemeBlock:
    kind: str = "combined-cn"
    k: int = 3
    dt: float = 0.1
    t_final: float = 1.0
    tol: float = 1e-12
    max_iter: int = 50
    bracket: float = 2.0
    tol_e: float | None = None  # None = auto scale
    dealias: bool = False


@dataclass
class InitialBlock:
    kind: str = "random"
    seed: int = 42
    offset: float = 0.0
    amplitude: float = 1.0
    value: float = 0.0
    variant: str = "unit"
    radius: float = 0.35
    x1: float = 1.37
    x2: float = 0.63
    y: float = 1.0


@dataclass
class OutputBlock:
    directory: str = "out"
    series_stride: int = 1
    snapshot_stride: int = 0


@dataclass
class RunConfig:
    model: ModelBlock = dc_field(default_factory=ModelBlock)
    grid: GridBlock = dc_field(default_factory=GridBlock)
    scheme: SchemeBlock = dc_field(default_factory=SchemeBlock)
    scheme2: SchemeBlock | None = None
    initial: InitialBlock = dc_field(default_factory=InitialBlock)
    output: OutputBlock = dc_field(default_factory=OutputBlock)


def _get(parser, section, key, default, convert):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return convert(raw)
    except (ValueError, ConfigError) as err:
        raise ConfigError(f"bad value for [{section}] {key} = {raw!r}: {err}")


def _to_bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _parse_scheme(parser, section):
    blk = SchemeBlock()
    blk.kind = _get(parser, section, "kind", blk.kind, str.strip)
    if blk.kind not in SCHEME_KINDS:
        raise ConfigError(f"unknown scheme kind {blk.kind!r}")
    blk.k = _get(parser, section, "k", blk.k, int)
    blk.dt = _get(parser, section, "dt", blk.dt, float)
    blk.t_final = _get(parser, section, "t_final", blk.t_final, float)
    blk.tol = _get(parser, section, "tol", blk.tol, float)
    blk.max_iter = _get(parser, section, "max_iter", blk.max_iter, int)
    blk.bracket = _get(parser, section, "bracket", blk.bracket, float)

    def tol_e(raw):
        return None if raw.strip().lower() == "auto" else float(raw)

    blk.tol_e = _get(parser, section, "tol_e", blk.tol_e, tol_e)
    blk.dealias = _get(parser, section, "dealias", blk.dealias, _to_bool)
    if blk.dt <= 0.0:
        raise ConfigError("dt must be positive")
    if blk.t_final < blk.dt:
        raise ConfigError("t_final must be at least dt")
    return blk


def parse_config(text):
    """Parse and validate a configuration string."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}")

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    for section in _REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    cfg = RunConfig()

    blk = cfg.model
    blk.kind = _get(parser, "model", "kind", blk.kind, str.strip)
    if blk.kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {blk.kind!r}")
    blk.mobility = _get(parser, "model", "mobility", blk.mobility, float)
    blk.epsilon = _get(parser, "model", "epsilon", blk.epsilon, float)
    blk.lam = _get(parser, "model", "lambda", blk.lam, float)
    blk.sigma = _get(parser, "model", "sigma", blk.sigma,
                     lambda raw: tuple(_parse_floats(raw, 3)))
    blk.nu = _get(parser, "model", "nu", blk.nu, float)

    g = cfg.grid
    g.dims = _get(parser, "grid", "dims", g.dims, int)
    if g.dims not in (1, 2, 3):
        raise ConfigError("dims must be 1, 2 or 3")
    g.n = _get(parser, "grid", "n", (64,) * g.dims,
               lambda raw: tuple(int(v) for v in _parse_floats(raw, g.dims)))
    g.length = _get(parser, "grid", "length", (2.0 * math.pi,) * g.dims,
                    lambda raw: tuple(_parse_floats(raw, g.dims, allow_pi=True)))
    g.paper_n = _get(parser, "grid", "paper_n", None,
                     lambda raw: tuple(int(v) for v in _parse_floats(raw, g.dims)))

    cfg.scheme = _parse_scheme(parser, "scheme")
    if parser.has_section("scheme2"):
        cfg.scheme2 = _parse_scheme(parser, "scheme2")

    i = cfg.initial
    i.kind = _get(parser, "initial", "kind", i.kind, str.strip)
    if i.kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial-condition preset {i.kind!r}")
    i.seed = _get(parser, "initial", "seed", i.seed, int)
    i.offset = _get(parser, "initial", "offset", i.offset, float)
    i.amplitude = _get(parser, "initial", "amplitude", i.amplitude, float)
    i.value = _get(parser, "initial", "value", i.value, float)
    i.variant = _get(parser, "initial", "variant", i.variant, str.strip)
    if i.variant not in ("unit", "pi"):
        raise ConfigError("variant must be 'unit' or 'pi'")
    i.radius = _get(parser, "initial", "radius", i.radius, float)
    i.x1 = _get(parser, "initial", "x1", i.x1, float)
    i.x2 = _get(parser, "initial", "x2", i.x2, float)
    i.y = _get(parser, "initial", "y", i.y, float)

    o = cfg.output
    o.directory = _get(parser, "output", "directory", o.directory, str.strip)
    o.series_stride = _get(parser, "output", "series_stride", o.series_stride, int)
    o.snapshot_stride = _get(parser, "output", "snapshot_stride",
                             o.snapshot_stride, int)
    if o.series_stride < 1:
        raise ConfigError("series_stride must be >= 1")
    if o.snapshot_stride < 0:
        raise ConfigError("snapshot_stride must be >= 0")

    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg):
    model, scheme = cfg.model, cfg.scheme
    if model.kind == "navier-stokes":
        if scheme.kind != "ns-be":
            raise ConfigError("the flow model requires scheme kind 'ns-be'")
        if cfg.grid.dims != 2:
            raise ConfigError("the flow model is 2D only")
        if model.nu <= 0.0:
            raise ConfigError("nu must be positive")
    else:
        if scheme.kind == "ns-be":
            raise ConfigError("scheme 'ns-be' requires the flow model")
    if model.kind == "ternary-cahn-hilliard" and scheme.kind != "combined-cn":
        raise ConfigError("the ternary model only supports 'combined-cn'")
    if scheme.kind == "combined-bdfk" and scheme.k not in (1, 2, 3, 4):
        raise ConfigError("k must be in 1..4")
    if model.kind == "ternary-cahn-hilliard" and cfg.initial.kind in ("cosine",
                                                                      "taylor-green"):
        raise ConfigError("that initial preset is single-field only")


def load_config(source):
    """Load a config from a path or from ``preset:NAME``."""
    if isinstance(source, Path) or not str(source).startswith("preset:"):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return parse_config(path.read_text())
    from .presets import preset_text

    return parse_config(preset_text(str(source)[len("preset:"):]))
