"""Stereographic bouncy particle sampler.

The particle moves along great circles of S^d at unit speed.  Bounces arrive
as an inhomogeneous Poisson process with rate ``max(0, -v . grad log pi_gamma)``
and are simulated by thinning against piecewise-constant bounds.  Each bound
covers a lookahead window of ``tau_w`` radians and equals ``safety`` times the
largest rate seen on an ``n_grid``-point grid over that window.  A candidate
whose rate exceeds its bound is still accepted and counted as a violation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Precondition,
    SingularityError,
    geodesic,
    renormalize_phase,
    sample_tangent_uniform,
    sp_forward,
    tangent_gradient,
    ambient_gradient,
)
from .targets import TargetModel
from .trace import KIND_CODES, Trace

log = logging.getLogger(__name__)


@dataclass
class SbpsConfig:
    lambda_ref: float = 1.0
    tau_w: float = 0.1
    n_grid: int = 16
    safety: float = 1.5
    delta: float = 0.01

    def __post_init__(self):
        if self.lambda_ref < 0:
            raise ValueError("lambda_ref must be non-negative")
        if not (self.tau_w > 0 and self.delta > 0):
            raise ValueError("tau_w and delta must be positive")
        if self.n_grid < 2:
            raise ValueError("n_grid must be at least 2")
        if self.safety < 1:
            raise ValueError("safety factor must be >= 1")


@dataclass
class EventRecord:
    time: float
    kind: str
    z: np.ndarray
    v: np.ndarray


@dataclass
class ThinningStats:
    proposals: int = 0
    accepted: int = 0
    violations: int = 0
    rate_evals: int = 0
    max_violation_ratio: float = 0.0
    violation_log: list = field(default_factory=list)

    @property
    def violation_fraction(self):
        return self.violations / self.proposals if self.proposals else 0.0


class ZeroGradientError(ValueError):
    """Reflection requested where the tangent gradient vanishes."""


def _directional(p, target, z, v):
    # v is tangent, so v . ambient_gradient equals v . tangent_gradient
    g = ambient_gradient(p, target, z)
    return np.einsum("...i,...i->...", v, g)


def bounce_rate(z, v, p: Precondition, target: TargetModel):
    """``max(0, -v . grad log pi_gamma(z))``; accepts batched (z, v)."""
    return np.maximum(0.0, -_directional(p, target, z, v))


def reflect(z, v, p: Precondition, target: TargetModel):
    """Reflect v in the hyperplane orthogonal to the tangent gradient at z."""
    g = tangent_gradient(p, target, z)
    gg = g @ g
    if not gg > 1e-24:
        raise ZeroGradientError("tangent gradient vanishes; reflection undefined")
    return v - (2.0 * (v @ g) / gg) * g


def _safe_rates(z0, v0, ts, p, target):
    zs, vs = geodesic(z0, v0, ts)
    try:
        return bounce_rate(zs, vs, p, target), None
    except SingularityError:
        rates = np.empty(len(ts))
        for i, t in enumerate(ts):
            try:
                rates[i] = bounce_rate(zs[i], vs[i], p, target)
            except SingularityError:
                return rates[:i], float(ts[i - 1]) if i else float(ts[0])
        return rates, None


def first_bounce_time(z, v, cfg: SbpsConfig, p, target, rng, horizon=math.inf, stats=None):
    """Sample the first bounce time of the flow from (z, v), up to ``horizon``.

    Returns ``(tau, kind)`` with kind ``"bounce"``, ``"pole"`` (the flow runs
    into the projection guard at tau) or ``"none"`` (no bounce before horizon).
    """
    if stats is None:
        stats = ThinningStats()
    a = 0.0
    while a < horizon:
        b = min(a + cfg.tau_w, horizon)
        grid = np.linspace(a, b, cfg.n_grid)
        rates, pole_t = _safe_rates(z, v, grid, p, target)
        stats.rate_evals += len(rates)
        if pole_t is not None:
            # stop at the last grid point that projected cleanly
            b = pole_t
        bound = cfg.safety * float(rates.max()) if len(rates) else 0.0
        t = a
        if bound > 0:
            while True:
                t += rng.exponential(1.0 / bound)
                if t >= b:
                    break
                zt, vt = geodesic(z, v, t)
                r = float(bounce_rate(zt, vt, p, target))
                stats.rate_evals += 1
                stats.proposals += 1
                if r > bound:
                    stats.violations += 1
                    ratio = r / bound
                    stats.max_violation_ratio = max(stats.max_violation_ratio, ratio)
                    stats.violation_log.append((t, ratio))
                    log.debug("thinning bound violated at t=%.4g, rate/bound=%.3g", t, ratio)
                    stats.accepted += 1
                    return t, "bounce"
                if rng.random() * bound < r:
                    stats.accepted += 1
                    return t, "bounce"
        if pole_t is not None:
            return b, "pole"
        a = b
    return math.inf, "none"


def next_event_time(z, v, cfg: SbpsConfig, p, target, rng, horizon=math.inf, stats=None):
    """Time and kind of the next event from (z, v).

    kind is ``"refresh"``, ``"bounce"``, ``"pole"``, or ``"horizon"`` when no
    event occurs before ``horizon``.
    """
    tau_ref = rng.exponential(1.0 / cfg.lambda_ref) if cfg.lambda_ref > 0 else math.inf
    limit = min(tau_ref, horizon)
    tau_b, kind = first_bounce_time(z, v, cfg, p, target, rng, horizon=limit, stats=stats)
    if kind != "none":
        return tau_b, kind
    if tau_ref <= horizon:
        return tau_ref, "refresh"
    return horizon, "horizon"


@dataclass
class SbpsResult:
    events: list
    skeleton: Trace
    stats: ThinningStats
    z: np.ndarray
    v: np.ndarray
    counts: dict


def sbps_run(z0, v0, duration, cfg: SbpsConfig, p: Precondition, target: TargetModel, rng,
             epoch=0, t0=0.0, store_phase=False, record_events=True, log_every=None):
    """Simulate the SBPS for ``duration`` time units from phase (z0, v0).

    The skeleton holds the state at times ``t0 + k * delta`` for
    ``0 <= k * delta < duration``.
    """
    if not duration > 0:
        raise ValueError("duration must be positive")
    z, v = renormalize_phase(np.asarray(z0, float), np.asarray(v0, float))
    d = p.d
    delta = cfg.delta
    n_skel = int(math.ceil(duration / delta - 1e-12))
    sk_t = np.arange(n_skel) * delta
    sk_x = np.empty((n_skel, d))
    sk_lat = np.empty(n_skel)
    sk_z = np.empty((n_skel, d + 1)) if store_phase else None
    sk_v = np.empty((n_skel, d + 1)) if store_phase else None
    events = []
    stats = ThinningStats()
    counts = {"bounce": 0, "refresh": 0, "pole": 0, "zero_gradient": 0}
    s = 0.0
    j = 0
    while s < duration:
        tau, kind = next_event_time(z, v, cfg, p, target, rng, horizon=duration - s, stats=stats)
        end = s + tau
        j_end = n_skel if kind == "horizon" else min(n_skel, int(math.ceil(end / delta - 1e-12)))
        if j_end > j:
            zs, vs = geodesic(z, v, sk_t[j:j_end] - s)
            try:
                sk_x[j:j_end] = sp_forward(p, zs)
            except SingularityError:
                sk_x[j:j_end] = np.nan
            sk_lat[j:j_end] = zs[:, -1]
            if store_phase:
                sk_z[j:j_end] = zs
                sk_v[j:j_end] = vs
            j = j_end
        if kind == "horizon":
            z, v = geodesic(z, v, tau)
            z, v = renormalize_phase(z, v)
            s = duration
            break
        z, v = geodesic(z, v, tau)
        z, v = renormalize_phase(z, v)
        s = end
        if kind == "bounce":
            try:
                v = reflect(z, v, p, target)
            except ZeroGradientError:
                counts["zero_gradient"] += 1
                kind = "refresh"
                v = sample_tangent_uniform(z, rng)
        else:
            if kind == "pole":
                log.warning("SBPS flow reached the pole guard at t=%.6g; refreshing velocity", t0 + s)
            v = sample_tangent_uniform(z, rng)
        z, v = renormalize_phase(z, v)
        counts[kind] += 1
        if record_events:
            events.append(EventRecord(t0 + s, kind, z.copy(), v.copy()))
        if log_every and sum(counts.values()) % log_every == 0:
            log.info("t=%.4g events=%s lat=%.4f", t0 + s, counts, z[-1])
    skeleton = Trace(
        t=t0 + sk_t,
        x=sk_x,
        latitude=sk_lat,
        kind=np.full(n_skel, KIND_CODES["skeleton"], dtype=np.uint8),
        epoch=epoch,
        z=sk_z,
        v=sk_v,
    )
    skeleton.info.update(duration=duration, **counts,
                         proposals=stats.proposals, violations=stats.violations,
                         violation_fraction=stats.violation_fraction)
    return SbpsResult(events, skeleton, stats, z, v, counts)


def path_integral_estimator(skeleton, f):
    """Riemann-sum estimate of ``(1/t) * integral f(X_s) ds`` over a uniform skeleton."""
    x = skeleton.x if isinstance(skeleton, Trace) else np.asarray(skeleton)
    if len(x) == 0:
        raise ValueError("empty skeleton")
    vals = np.asarray(f(x), dtype=float)
    return float(np.mean(vals))
