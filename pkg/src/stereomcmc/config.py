"""Experiment configuration: INI files with sections, validated field by field.

A minimal file::

    [meta]
    schema_version = 1

    [target]
    kind = student_t
    d = 10
    dof = 10

    [sampler]
    kind = srw

    [run]
    length = 10000

Vectors (``mean``, ``variance``, ``shift``, ``mu0``, ``start``) accept a
single number, broadcast to length d, or a comma-separated list of d numbers.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1
TARGET_KINDS = ("gaussian", "student_t")
SAMPLER_KINDS = ("srw", "sss", "sbps", "hmc")


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass
class ExperimentConfig:
    target_kind: str
    d: int
    dof: float | None = None
    mean: np.ndarray | None = None
    variance: np.ndarray | None = None
    shift: np.ndarray | None = None
    scale: float | None = None
    sampler: str = "srw"
    h: float | None = None
    lambda_ref: float = 1.0
    delta: float = 0.01
    tau_w: float = 0.1
    n_grid: int = 16
    safety: float = 1.5
    step_size: float = 0.1
    n_leapfrog: int = 10
    thin: int = 1
    adapt: bool = False
    beta: float = 1.0
    rule: str = "poly"
    c: float = 1.0
    unit: float = 100.0
    r: float = 1e-3
    R: float = 1e6
    n_epochs: int = 10
    mu0: np.ndarray | None = None
    sigma0_scale: float | None = None
    start: str | np.ndarray = "equator"
    length: float | None = None
    seed: int = 0
    out: str = "run_out"
    time_budget: float | None = None
    clip: float = 10.0
    source: dict = field(default_factory=dict)


# documented defaults, echoed by ``--help``
DEFAULTS_HELP = """\
config sections and defaults:
  [meta]        schema_version = 1 (required)
  [target]      kind = gaussian | student_t (required); d (required);
                dof (student_t, required); mean = 0, variance = 1 (gaussian);
                shift, scale (optional affine wrap)
  [sampler]     kind = srw | sss | sbps | hmc (required); h = 0.1/d;
                lambda_ref = 1; delta = 0.01; tau_w = 0.1; n_grid = 16;
                safety = 1.5; step_size = 0.1; n_leapfrog = 10; thin = 1
  [adaptation]  enabled = false; beta = 1; rule = poly | pow2; c = 1;
                unit = 100; r = 1e-3; R = 1e6; n_epochs = 10
  [init]        mu0 = 0; sigma0_scale = d; start = equator | center | <vector>
  [run]         length (steps, or time for sbps; required unless adapting);
                seed = 0; out = run_out; time_budget (seconds); clip = 10

environment:
  STEREO_THREADS  worker processes for replicate studies (default 1)
"""

_KNOWN = {
    "meta": {"schema_version"},
    "target": {"kind", "d", "dof", "mean", "variance", "shift", "scale"},
    "sampler": {"kind", "h", "lambda_ref", "delta", "tau_w", "n_grid", "safety", "step_size",
                "n_leapfrog", "thin"},
    "adaptation": {"enabled", "beta", "rule", "c", "unit", "r", "R", "n_epochs"},
    "init": {"mu0", "sigma0_scale", "start"},
    "run": {"length", "seed", "out", "time_budget", "clip"},
}


class _Reader:
    def __init__(self, parser):
        self.p = parser

    def raw(self, sec, key):
        if not self.p.has_section(sec):
            return None
        v = self.p[sec].get(key)
        if v is None or v.strip() == "":
            return None
        return v.strip()

    def required(self, sec, key):
        v = self.raw(sec, key)
        if v is None:
            raise ConfigError(f"missing required field [{sec}] {key}")
        return v

    def number(self, sec, key, default=None, kind=float, positive=False, min_value=None):
        v = self.raw(sec, key)
        if v is None:
            return default
        try:
            out = kind(v)
        except ValueError:
            raise ConfigError(f"[{sec}] {key} must be a{'n integer' if kind is int else ' number'}, got {v!r}") from None
        if kind is float and not np.isfinite(out):
            raise ConfigError(f"[{sec}] {key} must be finite, got {v!r}")
        if positive and not out > 0:
            raise ConfigError(f"[{sec}] {key} must be positive, got {v!r}")
        if min_value is not None and out < min_value:
            raise ConfigError(f"[{sec}] {key} must be >= {min_value}, got {v!r}")
        return out

    def boolean(self, sec, key, default=False):
        v = self.raw(sec, key)
        if v is None:
            return default
        low = v.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{sec}] {key} must be true or false, got {v!r}")

    def choice(self, sec, key, options, default=None):
        v = self.raw(sec, key)
        if v is None:
            if default is None:
                raise ConfigError(f"missing required field [{sec}] {key}")
            return default
        if v not in options:
            raise ConfigError(f"[{sec}] {key} must be one of {', '.join(options)}; got {v!r}")
        return v

    def vector(self, sec, key, d, default=None, positive=False):
        v = self.raw(sec, key)
        if v is None:
            return None if default is None else np.full(d, float(default))
        return parse_vector(v, d, f"[{sec}] {key}", positive)


def parse_vector(text, d, label, positive=False):
    try:
        vals = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise ConfigError(f"{label} must be a number or a comma-separated list, got {text!r}") from None
    if len(vals) == 1:
        vals = np.full(d, vals[0])
    if len(vals) != d:
        raise ConfigError(f"{label} has {len(vals)} entries but d = {d}")
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"{label} must be finite")
    if positive and np.any(vals <= 0):
        raise ConfigError(f"{label} must be positive")
    return vals


def parse_config(text: str, source="<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse {source}: {err}") from None
    for sec in parser.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        for key in parser[sec]:
            if key not in _KNOWN[sec]:
                raise ConfigError(f"unknown field [{sec}] {key}")
    rd = _Reader(parser)
    version = rd.number("meta", "schema_version", kind=int)
    if version is None:
        raise ConfigError("missing required field [meta] schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (this build reads {SCHEMA_VERSION})")

    kind = rd.choice("target", "kind", TARGET_KINDS)
    d = rd.number("target", "d", kind=int, min_value=1)
    if d is None:
        raise ConfigError("missing required field [target] d")
    cfg = ExperimentConfig(target_kind=kind, d=d)
    if kind == "student_t":
        cfg.dof = rd.number("target", "dof", positive=True)
        if cfg.dof is None:
            raise ConfigError("missing required field [target] dof (needed for student_t)")
    else:
        cfg.mean = rd.vector("target", "mean", d, default=0.0)
        cfg.variance = rd.vector("target", "variance", d, default=1.0, positive=True)
    cfg.shift = rd.vector("target", "shift", d)
    cfg.scale = rd.number("target", "scale", positive=True)

    cfg.sampler = rd.choice("sampler", "kind", SAMPLER_KINDS)
    cfg.h = rd.number("sampler", "h", positive=True)
    cfg.lambda_ref = rd.number("sampler", "lambda_ref", 1.0, min_value=0.0)
    cfg.delta = rd.number("sampler", "delta", 0.01, positive=True)
    cfg.tau_w = rd.number("sampler", "tau_w", 0.1, positive=True)
    cfg.n_grid = rd.number("sampler", "n_grid", 16, kind=int, min_value=2)
    cfg.safety = rd.number("sampler", "safety", 1.5, min_value=1.0)
    cfg.step_size = rd.number("sampler", "step_size", 0.1, positive=True)
    cfg.n_leapfrog = rd.number("sampler", "n_leapfrog", 10, kind=int, min_value=1)
    cfg.thin = rd.number("sampler", "thin", 1, kind=int, min_value=1)

    cfg.adapt = rd.boolean("adaptation", "enabled", False)
    cfg.beta = rd.number("adaptation", "beta", 1.0, positive=True)
    cfg.rule = rd.choice("adaptation", "rule", ("poly", "pow2"), "poly")
    cfg.c = rd.number("adaptation", "c", 1.0, min_value=1.0)
    cfg.unit = rd.number("adaptation", "unit", 100.0, positive=True)
    cfg.r = rd.number("adaptation", "r", 1e-3, positive=True)
    cfg.R = rd.number("adaptation", "R", 1e6, positive=True)
    if not cfg.r < cfg.R:
        raise ConfigError("[adaptation] r must be smaller than R")
    cfg.n_epochs = rd.number("adaptation", "n_epochs", 10, kind=int, min_value=1)
    if cfg.adapt and cfg.sampler == "hmc":
        raise ConfigError("[adaptation] enabled = true is not available for the hmc sampler")

    cfg.mu0 = rd.vector("init", "mu0", d, default=0.0)
    cfg.sigma0_scale = rd.number("init", "sigma0_scale", float(d), positive=True)
    start = rd.raw("init", "start") or "equator"
    cfg.start = start if start in ("equator", "center") else parse_vector(start, d, "[init] start")

    cfg.length = rd.number("run", "length", positive=True)
    if cfg.length is None and not cfg.adapt:
        raise ConfigError("missing required field [run] length (needed when adaptation is disabled)")
    cfg.seed = rd.number("run", "seed", 0, kind=int, min_value=0)
    cfg.out = rd.raw("run", "out") or "run_out"
    cfg.time_budget = rd.number("run", "time_budget", positive=True)
    cfg.clip = rd.number("run", "clip", 10.0, positive=True)
    cfg.source = {sec: dict(parser[sec]) for sec in parser.sections()}
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config(text, source=str(path))


# --------------------------------------------------------------------- presets

def _heavy_tail(sampler, d, mu0, extra, epochs, unit):
    return f"""
[meta]
schema_version = 1
[target]
kind = student_t
d = {d}
dof = 2
[sampler]
kind = {sampler}
{extra}
[adaptation]
enabled = true
beta = 1
rule = poly
unit = {unit}
R = 1e8
n_epochs = {epochs}
[init]
mu0 = {mu0}
start = equator
[run]
time_budget = 1800
out = {sampler}_heavy_tail
"""


PRESETS = {
    "paper-fig7-scaled": (
        "adaptive SRW on a t(2) target, d=50, mu0=100, start on the equator, h=0.1/d",
        _heavy_tail("srw", 50, 100, "thin = 10", 30, 1000),
        _heavy_tail("srw", 200, 1000, "thin = 50", 60, 5000),
    ),
    "paper-sss-scaled": (
        "adaptive SSS on the same far-start t(2) target",
        _heavy_tail("sss", 50, 100, "", 40, 200),
        _heavy_tail("sss", 200, 1000, "thin = 5", 60, 500),
    ),
    "paper-sbps-scaled": (
        "adaptive SBPS (lambda_ref=1, delta=0.05) on the same far-start t(2) target",
        _heavy_tail("sbps", 50, 100, "lambda_ref = 1\ndelta = 0.05", 40, 10),
        _heavy_tail("sbps", 200, 1000, "lambda_ref = 1\ndelta = 0.05", 60, 20),
    ),
    "paper-hmc-scaled": (
        "HMC baseline (step 0.1, 10 leapfrog steps) from x0 = mu0 * 1 on the t(2) target",
        """
[meta]
schema_version = 1
[target]
kind = student_t
d = 50
dof = 2
[sampler]
kind = hmc
step_size = 0.1
n_leapfrog = 10
thin = 10
[init]
mu0 = 100
start = center
[run]
length = 100000
time_budget = 1800
out = hmc_heavy_tail
""",
        """
[meta]
schema_version = 1
[target]
kind = student_t
d = 200
dof = 2
[sampler]
kind = hmc
step_size = 0.1
n_leapfrog = 10
thin = 100
[init]
mu0 = 1000
start = center
[run]
length = 1000000
time_budget = 1800
out = hmc_heavy_tail
""",
    ),
    "uniform-srw": (
        "non-adaptive SRW on t(dof=d), d=10, gamma=(0, dI): pi_gamma is uniform on the sphere",
        """
[meta]
schema_version = 1
[target]
kind = student_t
d = 10
dof = 10
[sampler]
kind = srw
h = 1.0
[init]
start = center
[run]
length = 10000
out = uniform_srw
""",
        None,
    ),
    "gaussian-sbps": (
        "non-adaptive SBPS on N(0, I_5) with gamma=(0, 5I)",
        """
[meta]
schema_version = 1
[target]
kind = gaussian
d = 5
[sampler]
kind = sbps
[init]
start = center
[run]
length = 1000
out = gaussian_sbps
""",
        None,
    ),
}


def preset_config(name, full=False) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; see 'presets list'")
    _, scaled, big = PRESETS[name]
    if full:
        if big is None:
            raise ConfigError(f"preset {name!r} has no full-scale variant")
        return parse_config(big, source=f"preset:{name}:full")
    return parse_config(scaled, source=f"preset:{name}")
