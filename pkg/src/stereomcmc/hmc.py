"""Plain HMC (unit mass, fixed leapfrog count) used as a Euclidean baseline."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .trace import KIND_CODES, Trace


@dataclass
class HmcConfig:
    step_size: float = 0.1
    n_leapfrog: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.step_size) and self.step_size > 0):
            raise ValueError("step_size must be a positive finite number")
        if int(self.n_leapfrog) != self.n_leapfrog or self.n_leapfrog < 1:
            raise ValueError("n_leapfrog must be an integer >= 1")


def leapfrog(x, p, grad, step_size, n_steps):
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    p += 0.5 * step_size * grad(x)
    for i in range(n_steps):
        x += step_size * p
        if i < n_steps - 1:
            p += step_size * grad(x)
    p += 0.5 * step_size * grad(x)
    return x, p


def hamiltonian(x, p, target):
    return -float(target.log_density(x)) + 0.5 * float(p @ p)


def hmc_step(x, cfg: HmcConfig, target, rng):
    """One HMC transition. Returns ``(x, accepted, delta_h)``."""
    p0 = rng.standard_normal(x.shape[0])
    with np.errstate(all="ignore"):
        x1, p1 = leapfrog(x, p0, target.log_gradient, cfg.step_size, cfg.n_leapfrog)
        dh = hamiltonian(x1, p1, target) - hamiltonian(x, p0, target)
    u = rng.random()
    if not np.isfinite(dh):
        return x, False, dh
    if np.log(u) < -dh:
        return x1, True, dh
    return x, False, dh


def hmc_run(x0, n_steps, cfg: HmcConfig, target, rng, thin=1, time_budget=None):
    x = np.asarray(x0, dtype=float)
    d = x.shape[0]
    n_rec = n_steps // thin
    xs = np.empty((n_rec, d))
    kinds = np.empty(n_rec, dtype=np.uint8)
    n_acc = 0
    start = time.perf_counter()
    j = 0
    done = 0
    for i in range(n_steps):
        x, acc, _ = hmc_step(x, cfg, target, rng)
        n_acc += acc
        done += 1
        if (i + 1) % thin == 0:
            xs[j] = x
            kinds[j] = KIND_CODES["accept"] if acc else KIND_CODES["reject"]
            j += 1
        if time_budget is not None and time.perf_counter() - start > time_budget:
            break
    tr = Trace(
        t=thin * np.arange(1, j + 1, dtype=float),
        x=xs[:j],
        latitude=np.full(j, np.nan),
        kind=kinds[:j],
    )
    tr.info.update(steps=done, accepted=n_acc, acceptance_rate=n_acc / max(done, 1))
    return tr, x
