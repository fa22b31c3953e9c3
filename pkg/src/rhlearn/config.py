"""
Experiment configuration files.

The format is one ``key = value`` per line with dotted section prefixes::

    # third-order unstable benchmark
    plant.kind = linear_sec6a
    plant.z0 = 0.1 0.1 -10
    lifting.m = 4
    estimator.N_bar = 8
    rhc.N = 20
    rhc.Q = 100
    rhc.R = 10000
    rhc.Q_N = 100
    rhc.eps_c1 = 1000
    run.T = 41

Vectors are whitespace separated; matrices separate rows with ``;``.
``estimator.restore_margin = 0`` selects the smallest controllable blend.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import RhlearnError

__all__ = [
    "ConfigError",
    "ParseError",
    "ValidationError",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "PLANT_KINDS",
]

PLANT_KINDS = ("linear_sec6a", "robot_arm", "linear")


class ConfigError(RhlearnError, ValueError):
    def __init__(self, message, key=None, line=None, source="<config>"):
        self.key = key
        self.line = line
        self.source = source
        where = source if line is None else f"{source}:{line}"
        prefix = f"{where}: {key}: " if key else f"{where}: "
        super().__init__(prefix + message)


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    plant_kind: str = "linear_sec6a"
    plant_F: tuple = None
    plant_G: tuple = None
    plant_H: tuple = None
    z0: tuple = None
    m: int = 4
    N_bar: int = 8
    lam_max: float = 0.5
    restore_margin: float = 1e-6
    theta0: object = "canonical"
    N: int = 20
    Q: float = 100.0
    R: float = 10000.0
    Q_N: float = 100.0
    alpha: float = 1.0
    eps_c0: float = 1.0
    eps_c1: float = 1000.0
    T: int = 41
    output: str = "out"
    # line numbers of keys as read, for error attribution
    lines: dict = field(default_factory=dict, compare=False, repr=False)


# key -> (field name, kind)
_KEYS = {
    "plant.kind": ("plant_kind", "str"),
    "plant.F": ("plant_F", "matrix"),
    "plant.G": ("plant_G", "matrix"),
    "plant.H": ("plant_H", "matrix"),
    "plant.z0": ("z0", "vector"),
    "lifting.m": ("m", "int"),
    "estimator.N_bar": ("N_bar", "int"),
    "estimator.lambda_max": ("lam_max", "float"),
    "estimator.restore_margin": ("restore_margin", "float"),
    "estimator.theta0": ("theta0", "theta"),
    "rhc.N": ("N", "int"),
    "rhc.Q": ("Q", "float"),
    "rhc.R": ("R", "float"),
    "rhc.Q_N": ("Q_N", "float"),
    "rhc.alpha": ("alpha", "float"),
    "rhc.eps_c0": ("eps_c0", "float"),
    "rhc.eps_c1": ("eps_c1", "float"),
    "run.T": ("T", "int"),
    "output.path": ("output", "str"),
}
_FIELD_TO_KEY = {v[0]: k for k, v in _KEYS.items()}

_PLANT_DEFAULTS = {
    "linear_sec6a": dict(z0=(0.1, 0.1, -10.0)),
    "robot_arm": dict(z0=(5.0, -5.0, 1.0)),
}


def _fmt(x):
    x = float(x)
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _parse_float(text):
    x = float(text)
    if not math.isfinite(x):
        raise ValueError(f"non-finite number {text!r}")
    return x


def _convert(kind, text):
    if kind == "str":
        return text
    if kind == "int":
        return int(text)
    if kind == "float":
        return _parse_float(text)
    if kind == "vector":
        return tuple(_parse_float(t) for t in text.split())
    if kind == "matrix":
        rows = [tuple(_parse_float(t) for t in row.split()) for row in text.split(";")]
        if len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ValueError("matrix rows must be non-empty and of equal length")
        return tuple(rows)
    if kind == "theta":
        if text == "canonical":
            return text
        return tuple(_parse_float(t) for t in text.split())
    raise AssertionError(kind)


def parse_config(text, source="<config>"):
    """Parse and validate an experiment configuration.

    Raises
    ------
    ParseError
        Malformed line, unknown or repeated key, unparsable value.
    ValidationError
        A value violates a positivity or dimension rule.
    """
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line=lineno, source=source)
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in _KEYS:
            raise ParseError("unknown key", key=key, line=lineno, source=source)
        if key in lines:
            raise ParseError(f"repeated key (first set on line {lines[key]})",
                             key=key, line=lineno, source=source)
        name, kind = _KEYS[key]
        try:
            values[name] = _convert(kind, val)
        except ValueError as exc:
            raise ParseError(str(exc), key=key, line=lineno, source=source) from None
        lines[key] = lineno
    cfg = ExperimentConfig(**values, lines=lines)
    kind_defaults = _PLANT_DEFAULTS.get(cfg.plant_kind, {})
    if cfg.z0 is None and "z0" in kind_defaults:
        cfg = replace(cfg, z0=kind_defaults["z0"])
    validate(cfg, source)
    return cfg


def _plant_dims(cfg):
    if cfg.plant_kind == "linear_sec6a":
        return 3, 1, 1
    if cfg.plant_kind == "robot_arm":
        return 3, 3, 1
    F, G, H = (np.array(M) for M in (cfg.plant_F, cfg.plant_G, cfg.plant_H))
    return F.shape[0], H.shape[0], G.shape[1]


def validate(cfg, source="<config>"):
    def fail(name, msg):
        key = _FIELD_TO_KEY[name]
        raise ValidationError(msg, key=key, line=cfg.lines.get(key), source=source)

    if cfg.plant_kind not in PLANT_KINDS:
        fail("plant_kind", f"must be one of {', '.join(PLANT_KINDS)}")
    if cfg.plant_kind == "linear":
        for name in ("plant_F", "plant_G", "plant_H"):
            if getattr(cfg, name) is None:
                fail(name, "required for a custom linear plant")
        F, G, H = (np.array(M) for M in (cfg.plant_F, cfg.plant_G, cfg.plant_H))
        if F.shape[0] != F.shape[1]:
            fail("plant_F", "must be square")
        if G.shape[0] != F.shape[0]:
            fail("plant_G", "row count must match F")
        if H.shape[1] != F.shape[0]:
            fail("plant_H", "column count must match F")
    n, p, q = _plant_dims(cfg)
    if cfg.z0 is None:
        fail("z0", "initial state is required")
    if len(cfg.z0) != n:
        fail("z0", f"must have {n} entries")
    if cfg.m < 1:
        fail("m", "must be at least 1")
    if cfg.N_bar < 1:
        fail("N_bar", "must be at least 1")
    if not 0.0 < cfg.lam_max < 1.0:
        fail("lam_max", "must lie in (0, 1)")
    if cfg.restore_margin < 0:
        fail("restore_margin", "must be nonnegative")
    for name in ("Q", "R", "Q_N", "alpha", "eps_c0"):
        if getattr(cfg, name) <= 0:
            fail(name, "must be positive")
    if cfg.eps_c1 < 0:
        fail("eps_c1", "must be nonnegative")
    n_aug = cfg.m * p + (cfg.m - 1) * q
    if cfg.N < n_aug:
        fail("N", f"horizon must be at least the augmented state dimension {n_aug}")
    if cfg.N < cfg.m:
        fail("N", "horizon must be at least m")
    if cfg.T < 1:
        fail("T", "must be at least 1")
    if cfg.m * q > cfg.m * p:
        fail("m", "lifted input dimension exceeds lifted state dimension")
    if cfg.theta0 != "canonical":
        nl, ql = cfg.m * p, cfg.m * q
        if len(cfg.theta0) != nl * (nl + ql):
            fail("theta0", f"must be 'canonical' or {nl * (nl + ql)} numbers")


def serialize_config(cfg):
    """Inverse of :func:`parse_config` (comments and layout are not kept)."""
    out = []
    for f in fields(cfg):
        if f.name == "lines":
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        key = _FIELD_TO_KEY[f.name]
        kind = _KEYS[key][1]
        if kind == "matrix":
            text = "; ".join(" ".join(_fmt(x) for x in row) for row in value)
        elif kind == "vector" or (kind == "theta" and value != "canonical"):
            text = " ".join(_fmt(x) for x in value)
        elif kind in ("float",):
            text = _fmt(value)
        else:
            text = str(value)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))
