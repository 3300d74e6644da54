"""Flat dotted-key experiment configuration.

One ``key = value`` pair per line, ``#`` starts a comment, lists are comma
separated and strings may be quoted::

    params.alpha = 1.5
    params.delta = 0
    noise.kind = white
    coeffs.b = "0.5*sin(u)"
    speed.rho = 0.25
"""

from dataclasses import dataclass, fields, replace

from .errors import (FracSHEError, Inconclusive, IntegrabilityFail, ParseError,
                     ValidationError)
from .expr import LIPSCHITZ_BOUND
from .fields import coefficients
from .grid import GridSpec
from .kernel import validate_params
from .noise import SpectralMeasure, check_integrability
from .speed import validate_speed


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: tuple = (1.5,)
    delta: tuple = (0.0,)
    L: float = 16.0
    n: int = 256
    T: float = 1.0
    n_t: int = 64
    noise_kind: str = "white"
    noise_beta: float = None
    noise_table: str = None
    b: str = "0"
    sigma: str = "1"
    lipschitz_bound: float = LIPSCHITZ_BOUND
    eta: float = 1.0
    rho: float = 0.25
    site: float = 0.0
    levels: tuple = (1.0,)
    eps: tuple = (1e-2,)
    replicas: int = 1000
    seed: int = 0
    n_cells: int = None
    window: tuple = (-1.0, 1.0)
    beta1: float = 0.2
    beta2: float = 0.2

    # derived objects, built on demand
    @property
    def params(self):
        return validate_params(self.alpha, self.delta)

    @property
    def grid(self):
        return GridSpec(self.L, self.n, self.T, self.n_t, len(self.alpha))

    @property
    def mu(self):
        d = len(self.alpha)
        if self.noise_kind == "white":
            return SpectralMeasure.white(d)
        if self.noise_kind == "riesz":
            return SpectralMeasure.riesz(self.noise_beta, d)
        if self.noise_kind == "tabulated":
            return SpectralMeasure.from_csv(self.noise_table, d)
        raise ValidationError(f"unknown noise kind {self.noise_kind!r}", "noise.kind")

    @property
    def coeffs(self):
        return coefficients(self.b, self.sigma, self.lipschitz_bound)

    @property
    def speed(self):
        return validate_speed(self.rho)

    def with_(self, **kw):
        return replace(self, **kw)


# key -> (attribute, kind)
KEYS = {
    "params.alpha": ("alpha", "floats"),
    "params.delta": ("delta", "floats"),
    "grid.L": ("L", "float"),
    "grid.n": ("n", "int"),
    "grid.T": ("T", "float"),
    "grid.n_t": ("n_t", "int"),
    "noise.kind": ("noise_kind", "str"),
    "noise.beta": ("noise_beta", "float"),
    "noise.table": ("noise_table", "str"),
    "coeffs.b": ("b", "str"),
    "coeffs.sigma": ("sigma", "str"),
    "coeffs.bound": ("lipschitz_bound", "float"),
    "eta": ("eta", "float"),
    "speed.rho": ("rho", "float"),
    "probe.site": ("site", "float"),
    "levels": ("levels", "floats"),
    "eps": ("eps", "floats"),
    "replicas": ("replicas", "int"),
    "seed": ("seed", "int"),
    "control.n_cells": ("n_cells", "int"),
    "holder.window": ("window", "floats"),
    "holder.beta1": ("beta1", "float"),
    "holder.beta2": ("beta2", "float"),
}
_ATTR = {attr: key for key, (attr, _) in KEYS.items()}


def _convert(raw, kind, line, col):
    try:
        if kind == "str":
            if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
                return raw[1:-1]
            return raw
        if kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError
            return int(v)
        if kind == "float":
            return float(raw)
        return tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ParseError(f"cannot read {raw!r} as {kind}", line, col) from None


def read_pairs(text):
    """Raw ``{key: value}`` mapping with line/column errors."""
    out = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0] if "#" in line and not _quoted_hash(line) else line
        if not body.strip():
            continue
        if "=" not in body:
            raise ParseError("expected 'key = value'", ln, len(body) - len(body.lstrip()) + 1)
        key, val = body.split("=", 1)
        k = key.strip()
        if k not in KEYS:
            raise ParseError(f"unknown key {k!r}", ln, len(key) - len(key.lstrip()) + 1)
        if k in out:
            raise ParseError(f"duplicate key {k!r}", ln, 1)
        col = len(key) + 2 + len(val) - len(val.lstrip())
        out[k] = (val.strip(), ln, col)
    return out


def _quoted_hash(line):
    i = line.index("#")
    return line[:i].count('"') % 2 == 1 or line[:i].count("'") % 2 == 1


def parse_config(text, validate=True):
    """Parse and (by default) validate a configuration.

    Raises
    ------
    ParseError
        On malformed lines, with line and column.
    ValidationError
        Listing every violated condition; ``violations`` holds
        ``(condition, message)`` pairs.
    """
    kw = {}
    for k, (raw, ln, col) in read_pairs(text).items():
        attr, kind = KEYS[k]
        kw[attr] = _convert(raw, kind, ln, col)
    cfg = ExperimentConfig(**kw)
    if validate:
        check_config(cfg)
    return cfg


def violations(cfg):
    """List of ``(condition, message)`` for every failed check."""
    out = []

    def attempt(fn):
        try:
            return fn()
        except ValidationError as e:
            out.append((e.condition, str(e)))
        except (FracSHEError, ValueError) as e:
            out.append((type(e).__name__, str(e)))
        return None

    if len(cfg.alpha) != len(cfg.delta):
        out.append(("dimension", "params.alpha and params.delta differ in length"))
        return out
    params = attempt(lambda: cfg.params)
    attempt(lambda: cfg.grid)
    mu = attempt(lambda: cfg.mu)
    attempt(lambda: cfg.coeffs)
    attempt(lambda: cfg.speed)
    if params is not None and mu is not None:
        try:
            res = check_integrability(mu, params, cfg.eta)
            if not res.finite:
                out.append(("(H_eta^alpha)", f"int mu / (1 + S_alpha)^eta diverges for "
                                             f"eta={cfg.eta}"))
        except Inconclusive as e:
            out.append(("(H_eta^alpha)", f"inconclusive: {e}"))
        except ValueError as e:
            out.append(("(H_eta^alpha)", str(e)))
    if cfg.replicas < 1:
        out.append(("replicas", "replicas must be positive"))
    if cfg.n_cells is not None and (cfg.n_cells < 1 or cfg.n_t % cfg.n_cells):
        out.append(("control.n_cells", "n_cells must divide grid.n_t"))
    if any(e <= 0 for e in cfg.eps):
        out.append(("eps", "eps values must be positive"))
    return out


def check_config(cfg):
    bad = violations(cfg)
    if bad:
        msg = "; ".join(f"[{c}] {m}" for c, m in bad)
        err = IntegrabilityFail(msg) if bad[0][0] == "(H_eta^alpha)" else ValidationError(msg, bad[0][0])
        err.violations = bad
        raise err
    return cfg


def _fmt(v):
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg):
    """Text that :func:`parse_config` maps back to ``cfg``; unset optional keys are omitted."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{_ATTR[f.name]} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


DEFAULT_CONFIG = """\
# standard configuration for the command line and the verify suite
params.alpha = 1.5
params.delta = 0.3
grid.L = 16
grid.n = 256
grid.T = 1
grid.n_t = 64
noise.kind = white
coeffs.b = "0.5*sin(u)"
coeffs.sigma = "1 + 0.25*cos(u)"
eta = 1
speed.rho = 0.25
probe.site = 0
levels = 1
eps = 0.01
replicas = 2000
seed = 0
control.n_cells = 16
holder.window = -1, 1
holder.beta1 = 0.15
holder.beta2 = 0.2
"""


def default_config():
    return parse_config(DEFAULT_CONFIG)
