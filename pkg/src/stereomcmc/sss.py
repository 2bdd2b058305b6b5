"""Stereographic slice sampler: a geodesic slice step with angular shrinkage.

The slice level is kept in log space (``log pi_gamma(z) + log U``) so the
density is never exponentiated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Precondition, SingularityError, log_pi_gamma_and_x, sample_tangent_uniform
from .srw import ChainState
from .targets import TargetModel
from .trace import KIND_CODES, Trace

TWO_PI = 2.0 * np.pi


class ShrinkError(RuntimeError):
    """Shrinkage failed to find a point above the level within the cap."""

    def __init__(self, msg, z, level, theta_min, theta_max, iterations):
        super().__init__(msg)
        self.z = z
        self.level = level
        self.theta_min = theta_min
        self.theta_max = theta_max
        self.iterations = iterations


@dataclass
class ShrinkState:
    theta: float
    theta_min: float
    theta_max: float
    iterations: int = 1

    @classmethod
    def start(cls, rng):
        theta = rng.uniform(0.0, TWO_PI)
        return cls(theta, theta - TWO_PI, theta)

    def reject(self, rng):
        """Shrink the bracket past the rejected angle and draw a new one."""
        if self.theta < 0:
            self.theta_min = self.theta
        else:
            self.theta_max = self.theta
        self.theta = rng.uniform(self.theta_min, self.theta_max)
        self.iterations += 1


def shrink(z, v, t_log, logdens, rng, max_iter=1_000_000):
    """Sample a point on the geodesic through (z, v) with ``logdens > t_log``.

    Returns:
        ``(z_new, iterations, value)`` where ``value = logdens(z_new)``.
    """
    st = ShrinkState.start(rng)
    while True:
        zp = z * np.cos(st.theta) + v * np.sin(st.theta)
        val = logdens(zp)
        if val > t_log:
            return zp, st.iterations, val
        if st.iterations >= max_iter:
            raise ShrinkError(
                f"shrinkage exceeded {max_iter} iterations",
                z, t_log, st.theta_min, st.theta_max, st.iterations,
            )
        st.reject(rng)


def _logdens_with_x(p, target):
    cache = {}

    def logdens(zp):
        try:
            val, x = log_pi_gamma_and_x(p, target, zp)
        except SingularityError:
            return -np.inf
        cache["x"] = x
        return float(val)

    return logdens, cache


def sss_step(state: ChainState, p: Precondition, target: TargetModel, rng, max_iter=1_000_000):
    """One slice-sampler transition. Returns ``(state, iterations)``."""
    t_log = state.logp + np.log(rng.random())
    v = sample_tangent_uniform(state.z, rng)
    logdens, cache = _logdens_with_x(p, target)
    zp, iters, val = shrink(state.z, v, t_log, logdens, rng, max_iter=max_iter)
    return ChainState(zp, cache["x"], val), iters


def sss_run(state: ChainState, n_steps: int, p: Precondition, target: TargetModel, rng,
            thin=1, epoch=0, t0=0, max_iter=1_000_000):
    d = target.d
    n_rec = n_steps // thin
    xs = np.empty((n_rec, d))
    lats = np.empty(n_rec)
    iters = np.empty(n_rec, dtype=np.int64)
    total_iters = 0
    j = 0
    for i in range(n_steps):
        state, it = sss_step(state, p, target, rng, max_iter=max_iter)
        total_iters += it
        if (i + 1) % thin == 0:
            xs[j] = state.x
            lats[j] = state.z[-1]
            iters[j] = it
            j += 1
    tr = Trace(
        t=t0 + thin * np.arange(1, n_rec + 1, dtype=float),
        x=xs,
        latitude=lats,
        kind=np.full(n_rec, KIND_CODES["accept"], dtype=np.uint8),
        epoch=epoch,
    )
    tr.extras["iterations"] = iters
    tr.info.update(steps=n_steps, shrink_iterations=total_iters,
                   mean_iterations=total_iters / max(n_steps, 1))
    return tr, state
