"""Canonical experiments shared by the CLI verifiers and the acceptance tests.

Each experiment is a plain function of a seed so replicates can be farmed
out to worker processes and reduced in seed order.
"""

from __future__ import annotations

import functools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError
from .adaptation import EpochSchedule, ParamBounds, air_run
from .diagnostics import (
    CltReport,
    clip,
    clt_replicate_test,
    loglog_slope,
    wlln_rate_exponent,
)
from .geometry import Precondition
from .hmc import HmcConfig, hmc_run
from .rng import make_rng
from .sbps import SbpsConfig
from .srw import ChainState, SrwConfig, srw_run
from .targets import CountingTarget, gaussian_target, student_t_target
from .trace import concat_traces


def thread_cap(default=1):
    """Worker count from ``STEREO_THREADS`` (falls back to ``default``)."""
    raw = os.environ.get("STEREO_THREADS")
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"STEREO_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("STEREO_THREADS must be >= 1")
    return n


def replicate_map(fn, seeds, threads=None):
    """Ordered map over seeds, in worker processes when more than one thread is allowed.

    The output order is the seed order whatever the worker count, so any
    reduction over it is deterministic.
    """
    seeds = list(seeds)
    threads = thread_cap() if threads is None else threads
    if threads <= 1 or len(seeds) <= 1:
        return [fn(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seeds, chunksize=max(1, len(seeds) // (4 * threads))))


# ---------------------------------------------------------------- uniform case

UNIFORM_D = 10
UNIFORM_H = 1.0


def uniform_setup(d=UNIFORM_D):
    """Student t with dof = d under gamma = (0, d I), where pi_gamma is uniform."""
    return student_t_target(float(d), d), Precondition.isotropic(d)


def uniform_srw_x1(seed, n_steps=2**14, d=UNIFORM_D, h=UNIFORM_H, adaptive=False,
                   beta=2.0, unit=100.0):
    """First coordinate of a uniform-case SRW run (non-adaptive or AIR)."""
    target, p = uniform_setup(d)
    rng = make_rng(seed)
    x0 = p.color(rng.standard_normal(d))
    if not adaptive:
        tr, _ = srw_run(ChainState.from_x(p, target, x0), n_steps, SrwConfig(p, target, h), rng)
        return tr.x1.copy()
    sched = EpochSchedule(beta=beta, rule="poly", unit=unit)
    n_epochs = int(np.searchsorted(sched.times(200) * unit, n_steps)) + 1
    res = air_run("srw", target, x0, p, sched, ParamBounds(), n_epochs, rng, h=h)
    return concat_traces(res.traces).x1[:n_steps].copy()


def gaussian_air_x1(seed, n_steps=5000, d=5, h=0.5, beta=2.0, unit=100.0):
    """First coordinate of an AIR SRW run on N(0, I_d) started from gamma = (0, I)."""
    target = gaussian_target(np.zeros(d))
    rng = make_rng(seed)
    sched = EpochSchedule(beta=beta, rule="poly", unit=unit)
    n_epochs = int(np.searchsorted(sched.times(200) * unit, n_steps)) + 1
    res = air_run("srw", target, rng.standard_normal(d), Precondition.isotropic(d, 1.0), sched,
                  ParamBounds(), n_epochs, rng, h=h)
    return concat_traces(res.traces).x1[:n_steps].copy()


@dataclass
class WllnReport:
    ns: list
    variances: list
    slope: float
    bound: float

    @property
    def passed(self):
        return self.slope <= self.bound

    def summary(self):
        return f"WLLN: slope={self.slope:.3f} bound={self.bound:.3f}"


def wlln_check(samples, ns, beta=None, slack=0.15, bound=10.0):
    """Log-log slope of the across-replicate variance of prefix means of clipped values."""
    f = clip(np.asarray(samples, dtype=float), bound)
    variances = [float(np.var(f[:, :n].mean(axis=1), ddof=1)) for n in ns]
    rate = 1.0 if beta is None else wlln_rate_exponent(beta)
    return WllnReport(list(ns), variances, loglog_slope(ns, variances), -rate + slack)


@dataclass
class CltStudy:
    label: str
    clt: CltReport
    wlln: WllnReport
    seconds: float
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.clt.passed and self.wlln.passed


def uniform_clt_study(adaptive, n_replicates=200, t=10_000, ns=tuple(2**k for k in range(10, 15)),
                      beta=2.0, seed0=0, alpha=1e-3, threads=None):
    """CLT (Anderson-Darling) and WLLN (variance slope) checks on the uniform-case SRW."""
    tick = time.perf_counter()
    n_steps = max(t, max(ns))
    fn = functools.partial(uniform_srw_x1, n_steps=n_steps, adaptive=adaptive, beta=beta)
    seeds = [seed0 + i for i in range(n_replicates)]
    samples = np.array(replicate_map(fn, seeds, threads))
    clt = clt_replicate_test(lambda i: samples[i], n_replicates, f=clip, truth=0.0, t=t,
                             seeds=range(n_replicates), beta=beta if adaptive else None, alpha=alpha)
    wlln = wlln_check(samples, ns, beta if adaptive else None)
    label = f"AIR SRW (beta={beta:g})" if adaptive else "non-adaptive SRW"
    return CltStudy(label, clt, wlln, time.perf_counter() - tick)


# ----------------------------------------------------------- heavy-tailed study

@dataclass
class HeavyTailSetup:
    """Scaled version of the far-start heavy-tailed study."""

    d: int = 50
    dof: float = 2.0
    mu0: float = 100.0
    n_epochs: int = 40
    unit_steps: float = 200.0
    unit_time: float = 10.0
    sbps_delta: float = 0.05
    R: float = 1e8

    @classmethod
    def full(cls):
        return cls(d=200, mu0=1000.0, n_epochs=60, unit_steps=500.0, unit_time=20.0)


def equator_start(mu0, d, rng):
    """``mu0 + sqrt(d) u`` for a random unit u: a point on the equator of (mu0, d I)."""
    u = rng.standard_normal(d)
    return mu0 + np.sqrt(d) * u / np.linalg.norm(u)


def heavy_tail_air(sampler, seed, setup: HeavyTailSetup | None = None, time_budget=1800.0,
                   on_epoch=None, store_events=False):
    """Adaptive run on the far-start t target. Returns ``(AirResult, CountingTarget, seconds)``."""
    setup = setup or HeavyTailSetup()
    d = setup.d
    target = CountingTarget(student_t_target(setup.dof, d))
    mu0 = np.full(d, setup.mu0)
    p0 = Precondition(mu0, d * np.eye(d))
    rng = make_rng(seed)
    x0 = equator_start(mu0, d, rng)
    unit = setup.unit_time if sampler == "sbps" else setup.unit_steps
    sched = EpochSchedule(beta=1.0, rule="poly", unit=unit)
    tick = time.perf_counter()
    res = air_run(sampler, target, x0, p0, sched, ParamBounds(1e-3, setup.R), setup.n_epochs, rng,
                  sbps_cfg=SbpsConfig(delta=setup.sbps_delta), time_budget=time_budget,
                  on_epoch=on_epoch, store_events=store_events)
    return res, target, time.perf_counter() - tick


def excursion_then_recovery(latitudes, high=0.9, recovered=0.5):
    """True when the latitude passes ``high`` and later falls back below ``recovered``."""
    lat = np.asarray(latitudes, dtype=float)
    above = np.flatnonzero(lat > high)
    if len(above) == 0:
        return False
    return bool(np.any(lat[above[0]:] < recovered))


HMC_BASELINE = HmcConfig(step_size=0.1, n_leapfrog=10)


def hmc_far_start(seed, setup: HeavyTailSetup | None = None, time_budget=None, max_evals=None,
                  cfg: HmcConfig = HMC_BASELINE, thin=10):
    """HMC from ``x0 = mu0 * 1`` on the heavy-tailed target under a wall-clock or evaluation budget.

    Returns a dict with the minimum and final ``|x| / |x0|`` along the path.
    """
    setup = setup or HeavyTailSetup()
    d = setup.d
    if time_budget is None and max_evals is None:
        raise ValueError("give a time_budget or max_evals")
    target = CountingTarget(student_t_target(setup.dof, d))
    x0 = np.full(d, setup.mu0)
    # each transition costs n_leapfrog + 1 gradients and 2 densities
    per_step = cfg.n_leapfrog + 3
    n_steps = 10**9 if max_evals is None else max(1, int(max_evals) // per_step)
    tick = time.perf_counter()
    tr, x = hmc_run(x0, n_steps, cfg, target, make_rng(seed), thin=thin, time_budget=time_budget)
    norms = np.linalg.norm(tr.x, axis=1) / np.linalg.norm(x0)
    return {
        "seed": seed,
        "steps": tr.info["steps"],
        "evals": target.total_evals,
        "acceptance_rate": tr.info["acceptance_rate"],
        "min_ratio": float(norms.min()) if len(norms) else 1.0,
        "final_ratio": float(np.linalg.norm(x) / np.linalg.norm(x0)),
        "seconds": time.perf_counter() - tick,
        "trace": tr,
    }
