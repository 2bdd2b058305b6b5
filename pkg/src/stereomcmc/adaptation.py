"""Adapting-increasingly-rarely (AIR) control of the projection parameters.

The sampler runs with fixed parameters for epochs of polynomially growing
length.  After each epoch the location and scale are re-estimated from the
latest half of the epochs, the scale is stretched so that the latest epoch
sits on the equator, and everything is projected back to a compact set.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Precondition, sample_tangent_uniform, sp_inverse
from .sbps import SbpsConfig, sbps_run
from .srw import ChainState, SrwConfig, srw_run
from .sss import sss_run

log = logging.getLogger(__name__)

SAMPLERS = ("srw", "sss", "sbps")


@dataclass
class EpochSchedule:
    """Lags between adaptations.

    ``poly``: ``t_k = max(1, round(c * k**beta))``.
    ``pow2``: ``t_k`` is the smallest power of two >= ``k**beta``.

    Each lag is multiplied by ``unit`` (steps, or time units for the SBPS).
    """

    beta: float = 1.0
    rule: str = "poly"
    c: float = 1.0
    unit: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.rule not in ("poly", "pow2"):
            raise ValueError(f"unknown schedule rule {self.rule!r}")
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if not self.unit > 0:
            raise ValueError("unit must be positive")

    def lag(self, k: int) -> int:
        """Lag ``t_k`` in schedule units; ``t_0 = 0``."""
        if k <= 0:
            return 0
        if self.rule == "poly":
            return max(1, int(round(self.c * k**self.beta)))
        target = k**self.beta
        lag = 1
        while lag < target:
            lag *= 2
        return lag

    def lags(self, n: int):
        return [self.lag(k) for k in range(1, n + 1)]

    def times(self, n: int):
        """Adaptation times ``T_0 = 0, ..., T_n`` in schedule units."""
        return np.concatenate([[0], np.cumsum(self.lags(n))]).astype(np.int64)

    def epoch_length(self, k: int) -> float:
        return self.lag(k) * self.unit


@dataclass
class ParamBounds:
    """Compact set ``|mu| <= R``, eig(sigma) in ``[r^2, R^2]``, h and lambda in ``[r, R]``."""

    r: float = 1e-3
    R: float = 1e6

    def __post_init__(self):
        if not (0 < self.r < self.R):
            raise ValueError("require 0 < r < R")

    def clip_scalar(self, value):
        return float(min(max(value, self.r), self.R))

    def contains(self, mu, sigma, scalars=(), rtol=1e-9):
        eig = np.linalg.eigvalsh(sigma)
        ok = np.linalg.norm(mu) <= self.R * (1 + rtol)
        ok &= eig.min() >= self.r**2 * (1 - rtol) and eig.max() <= self.R**2 * (1 + rtol)
        for s in scalars:
            ok &= self.r * (1 - rtol) <= s <= self.R * (1 + rtol)
        return bool(ok)


class EpochBuffer:
    """Per-epoch sample matrices; estimation uses the latest ceil(k/2) epochs."""

    def __init__(self):
        self._epochs = deque()
        self.n_epochs = 0

    def add(self, epoch: int, x):
        x = np.asarray(x, dtype=float)
        self._epochs.append((epoch, x))
        self.n_epochs += 1
        keep = math.ceil(self.n_epochs / 2)
        # the window never shrinks, so epochs older than it can be dropped
        while len(self._epochs) > keep:
            self._epochs.popleft()

    def window(self):
        keep = math.ceil(self.n_epochs / 2)
        return list(self._epochs)[-keep:] if keep else []

    def window_samples(self):
        parts = [x for _, x in self.window() if len(x)]
        if not parts:
            return np.empty((0, 0))
        return np.concatenate(parts)

    def latest(self):
        return self._epochs[-1][1] if self._epochs else np.empty((0, 0))

    def total_samples(self):
        return sum(len(x) for _, x in self.window())


def ridge(sigma, d):
    """Add ``1e-8 * trace/d`` (plus an absolute 1e-12 floor) to the diagonal."""
    lam = 1e-8 * np.trace(sigma) / d + 1e-12
    return sigma + lam * np.eye(d)


def equator_rescale(mu_hat, sigma_hat, latest_epoch_samples):
    """Scale sigma so the median squared Mahalanobis norm of the latest epoch is 1.

    A point with Mahalanobis norm 1 projects onto the equator, so after the
    rescale the latest epoch's median latitude is 0.
    """
    latest = np.asarray(latest_epoch_samples, dtype=float)
    if latest.ndim != 2 or len(latest) == 0:
        raise ValueError("latest epoch is empty")
    p = Precondition(mu_hat, 0.5 * (sigma_hat + sigma_hat.T))
    u = p.whiten(latest)
    m = float(np.median(np.einsum("ij,ij->i", u, u)))
    return max(m, 1e-12) * sigma_hat


def estimate_parameters(buffer: EpochBuffer, d: int, previous=None, rescale=True):
    """Empirical mean and ``d`` times the covariance over the estimation window.

    Returns ``previous`` unchanged when fewer than ``d + 2`` samples are held.
    """
    xs = buffer.window_samples()
    if len(xs) < d + 2 or not np.all(np.isfinite(xs)):
        if previous is None:
            raise ValueError("not enough samples and no previous parameters")
        return previous
    mu_hat = xs.mean(axis=0)
    diff = xs - mu_hat
    sigma_hat = d * (diff.T @ diff) / len(xs)
    sigma_hat = 0.5 * (sigma_hat + sigma_hat.T)
    if rescale:
        sigma_hat = equator_rescale(mu_hat, ridge(sigma_hat, d), buffer.latest())
    return mu_hat, ridge(sigma_hat, d)


def project_to_bounds(mu, sigma, bounds: ParamBounds):
    """Radially clip mu to norm R and clamp the spectrum of sigma into [r^2, R^2]."""
    mu = np.asarray(mu, dtype=float).copy()
    norm = np.linalg.norm(mu)
    if norm > bounds.R:
        mu *= bounds.R / norm
        # rounding can leave the norm one ulp above R
        while np.linalg.norm(mu) > bounds.R:
            mu *= np.nextafter(1.0, 0.0)
    sigma = 0.5 * (np.asarray(sigma, dtype=float) + np.asarray(sigma, dtype=float).T)
    w, q = np.linalg.eigh(sigma)
    wc = np.clip(w, bounds.r**2, bounds.R**2)
    if np.array_equal(wc, w):
        return mu, sigma
    out = (q * wc) @ q.T
    return mu, 0.5 * (out + out.T)


@dataclass
class EpochParams:
    epoch: int
    precondition: Precondition
    h: float | None = None
    lambda_ref: float | None = None
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def mu_norm(self):
        return float(np.linalg.norm(self.precondition.mu))

    def sigma_eigs(self):
        return np.linalg.eigvalsh(self.precondition.sigma)


@dataclass
class AirResult:
    traces: list
    history: list
    events: list
    x: np.ndarray


class AdaptationAbort(RuntimeError):
    def __init__(self, msg, bundle):
        super().__init__(msg)
        self.bundle = bundle


def air_run(sampler, target, x0, gamma0: Precondition, schedule: EpochSchedule,
            bounds: ParamBounds, n_epochs: int, rng, h=None, sbps_cfg: SbpsConfig | None = None,
            adapt=True, adapt_h=False, thin=1, estimator=None, time_budget=None,
            store_events=False, on_epoch=None):
    """Run an AIR sampler for ``n_epochs`` epochs.

    Epoch ``k`` (0-based) runs ``schedule.epoch_length(k + 1)`` steps (or time
    units for the SBPS) under ``history[k]``; then parameters are re-estimated
    and ``history[k + 1]`` is appended.  The last Euclidean point is carried
    across each parameter change and re-projected onto the new sphere.

    Args:
        estimator: optional ``f(buffer, d, previous) -> (mu, sigma)`` replacing
            :func:`estimate_parameters`.
        adapt_h: SRW only; multiply h by ``exp(acceptance - 0.234)`` after each
            epoch.  Off by default and not used by the acceptance tests.
        time_budget: wall-clock seconds after which no further epochs start.
    """
    if sampler not in SAMPLERS:
        raise ValueError(f"sampler must be one of {SAMPLERS}")
    d = target.d
    if estimator is None:
        estimator = estimate_parameters
    mu0, sig0 = project_to_bounds(gamma0.mu, gamma0.sigma, bounds)
    p = gamma0 if (np.array_equal(mu0, gamma0.mu) and np.array_equal(sig0, gamma0.sigma)) else Precondition(mu0, sig0)
    h = bounds.clip_scalar(0.1 / d if h is None else h) if sampler == "srw" else None
    if sampler == "sbps":
        sbps_cfg = sbps_cfg or SbpsConfig()
        lam = bounds.clip_scalar(sbps_cfg.lambda_ref)
        if lam != sbps_cfg.lambda_ref:
            sbps_cfg = SbpsConfig(lam, sbps_cfg.tau_w, sbps_cfg.n_grid, sbps_cfg.safety, sbps_cfg.delta)
    else:
        lam = None

    history = [EpochParams(0, p, h, lam)]
    traces, events = [], []
    buffer = EpochBuffer()
    x = np.asarray(x0, dtype=float)
    state = ChainState.from_x(p, target, x)
    v = sample_tangent_uniform(state.z, rng) if sampler == "sbps" else None
    t_clock = 0.0
    started = time.perf_counter()

    for k in range(n_epochs):
        if time_budget is not None and time.perf_counter() - started > time_budget:
            log.info("time budget reached after %d epochs", k)
            break
        length = schedule.epoch_length(k + 1)
        tick = time.perf_counter()
        try:
            if sampler == "srw":
                steps = max(1, int(round(length)))
                tr, state = srw_run(state, steps, SrwConfig(p, target, h), rng, thin=thin, epoch=k, t0=t_clock)
                t_clock += steps
            elif sampler == "sss":
                steps = max(1, int(round(length)))
                tr, state = sss_run(state, steps, p, target, rng, thin=thin, epoch=k, t0=t_clock)
                t_clock += steps
            else:
                res = sbps_run(state.z, v, length, sbps_cfg, p, target, rng, epoch=k, t0=t_clock,
                               record_events=store_events)
                tr = res.skeleton
                tr.info["thinning"] = res.stats
                if store_events:
                    events.extend(res.events)
                state = ChainState.from_z(p, target, res.z)
                v = res.v
                t_clock += length
        except Exception as err:
            bundle = {"epoch": k, "mu": p.mu.copy(), "sigma": p.sigma.copy(),
                      "x": state.x.copy(), "z": state.z.copy(), "error": repr(err)}
            raise AdaptationAbort(f"sampler failed in epoch {k}: {err}", bundle) from err
        history[-1].wall_time = time.perf_counter() - tick
        history[-1].info.update(tr.info)
        traces.append(tr)
        finite = tr.x[np.all(np.isfinite(tr.x), axis=1)]
        buffer.add(k, finite)

        if adapt:
            mu_new, sig_new = estimator(buffer, d, (p.mu, p.sigma))
            mu_new, sig_new = project_to_bounds(mu_new, sig_new, bounds)
            p_new = Precondition(mu_new, sig_new)
        else:
            p_new = p
        if adapt and adapt_h and sampler == "srw":
            # optional, off by default: nudge h toward 0.234 acceptance
            acc = tr.info.get("acceptance_rate", 0.234)
            h = bounds.clip_scalar(h * math.exp(acc - 0.234))
        if not p_new.same_as(p):
            x = state.x
            state = ChainState.from_x(p_new, target, x)
            if sampler == "sbps":
                v = sample_tangent_uniform(state.z, rng)
        p = p_new
        history.append(EpochParams(k + 1, p, h, lam))
        if on_epoch is not None:
            on_epoch(k, history[-1], tr)
        log.info("epoch %d: len=%g |mu|=%.4g tr(sigma)=%.4g lat=%.3f", k, length,
                 history[-1].mu_norm, np.trace(p.sigma), state.z[-1])

    return AirResult(traces, history, events, state.x.copy())
