"""Stereographic random walk: tangent Gaussian step, renormalize, Metropolis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Precondition, SingularityError, log_pi_gamma_and_x, sp_inverse
from .targets import TargetModel
from .trace import KIND_CODES, Trace


@dataclass
class SrwConfig:
    precondition: Precondition
    target: TargetModel
    h: float | None = None

    def __post_init__(self):
        if self.h is None:
            self.h = 0.1 / self.target.d
        if not self.h > 0:
            raise ValueError("h must be positive")


@dataclass
class ChainState:
    """Current sphere point, its projection and its log pi_gamma."""

    z: np.ndarray
    x: np.ndarray
    logp: float

    @classmethod
    def from_x(cls, p, target, x):
        z = sp_inverse(p, np.asarray(x, dtype=float))
        logp, _ = log_pi_gamma_and_x(p, target, z)
        return cls(z, np.asarray(x, dtype=float).copy(), float(logp))

    @classmethod
    def from_z(cls, p, target, z):
        logp, x = log_pi_gamma_and_x(p, target, z)
        return cls(np.asarray(z, dtype=float).copy(), x, float(logp))


def srw_propose(z, h, rng):
    dz = h * rng.standard_normal(z.shape[0])
    dz -= (dz @ z) * z
    w = z + dz
    n = np.sqrt(w @ w)
    # |z + dz| >= 1 since dz is orthogonal to z; the guard is belt and braces
    while n < 1e-12:
        dz = h * rng.standard_normal(z.shape[0])
        dz -= (dz @ z) * z
        w = z + dz
        n = np.sqrt(w @ w)
    return w / n


def srw_step(state: ChainState, cfg: SrwConfig, rng):
    """One Metropolis step. Returns ``(state, accepted, accept_prob)``.

    Proposals within the pole guard are rejected outright.
    """
    zp = srw_propose(state.z, cfg.h, rng)
    try:
        logp, xp = log_pi_gamma_and_x(cfg.precondition, cfg.target, zp)
    except SingularityError:
        rng.random()
        return state, False, 0.0
    log_ratio = logp - state.logp
    alpha = 1.0 if log_ratio >= 0 else float(np.exp(log_ratio))
    if rng.random() < alpha:
        return ChainState(zp, xp, float(logp)), True, alpha
    return state, False, alpha


def srw_run(state: ChainState, n_steps: int, cfg: SrwConfig, rng, thin=1, epoch=0, t0=0):
    """Run ``n_steps`` SRW steps, recording every ``thin``-th post-step state."""
    d = cfg.target.d
    n_rec = n_steps // thin
    xs = np.empty((n_rec, d))
    lats = np.empty(n_rec)
    kinds = np.empty(n_rec, dtype=np.uint8)
    alphas = np.empty(n_rec)
    n_acc = 0
    n_pole = 0
    j = 0
    for i in range(n_steps):
        zp = srw_propose(state.z, cfg.h, rng)
        try:
            logp, xp = log_pi_gamma_and_x(cfg.precondition, cfg.target, zp)
            log_ratio = logp - state.logp
            alpha = 1.0 if log_ratio >= 0 else float(np.exp(log_ratio))
        except SingularityError:
            n_pole += 1
            alpha = 0.0
        u = rng.random()
        accepted = u < alpha
        if accepted:
            state = ChainState(zp, xp, float(logp))
            n_acc += 1
        if (i + 1) % thin == 0:
            xs[j] = state.x
            lats[j] = state.z[-1]
            kinds[j] = KIND_CODES["accept"] if accepted else KIND_CODES["reject"]
            alphas[j] = alpha
            j += 1
    tr = Trace(
        t=t0 + thin * np.arange(1, n_rec + 1, dtype=float),
        x=xs,
        latitude=lats,
        kind=kinds,
        epoch=epoch,
    )
    tr.extras["accept_prob"] = alphas
    tr.info.update(steps=n_steps, accepted=n_acc, pole_rejects=n_pole,
                   acceptance_rate=n_acc / max(n_steps, 1))
    return tr, state
