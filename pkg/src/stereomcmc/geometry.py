"""Preconditioned stereographic projection between R^d and the unit sphere S^d.

A point z on S^d (a vector of length d+1) maps to

    x = sigma_half @ (z[:d] / (1 - z[d])) + mu

and the North pole N = (0, ..., 0, 1) is the image of infinity.  All maps
accept a leading batch dimension.

The induced log-density on the sphere drops the ``-0.5 * log|Sigma|`` term.
Values computed under two different preconditions are therefore NOT
comparable; only differences at a fixed precondition are meaningful.
"""

from __future__ import annotations

import numpy as np

POLE_TOL = 1e-14
EIG_FLOOR = 1e-12


class SingularityError(ValueError):
    """Raised when a sphere point is too close to the North pole to project."""


def _sym_sqrt(sigma):
    sigma = np.asarray(sigma, dtype=float)
    w, q = np.linalg.eigh(0.5 * (sigma + sigma.T))
    w = np.maximum(w, EIG_FLOOR)
    root = np.sqrt(w)
    half = (q * root) @ q.T
    half_inv = (q / root) @ q.T
    return 0.5 * (half + half.T), 0.5 * (half_inv + half_inv.T)


class Precondition:
    """Location/scale parameter ``gamma = (mu, sigma)`` of the projection.

    The principal symmetric square root of ``sigma`` and its inverse are
    computed once at construction (eigenvalues floored at 1e-12).
    """

    __slots__ = ("mu", "sigma", "sigma_half", "sigma_half_inv", "d", "_iso")

    def __init__(self, mu, sigma):
        mu = np.atleast_1d(np.asarray(mu, dtype=float)).copy()
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float)).copy()
        d = mu.shape[0]
        if sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {sigma.shape}")
        if not np.all(np.isfinite(sigma)) or not np.all(np.isfinite(mu)):
            raise ValueError("mu and sigma must be finite")
        scale = max(np.max(np.abs(sigma)), 1e-300)
        if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise ValueError("sigma must be positive definite")
        self.mu = mu
        self.sigma = sigma
        self.sigma_half, self.sigma_half_inv = _sym_sqrt(sigma)
        self.d = d
        # isotropic sigma lets the projections skip the matvec
        diag = sigma[0, 0]
        self._iso = np.sqrt(diag) if np.array_equal(sigma, diag * np.eye(d)) else None
        for arr in (self.mu, self.sigma, self.sigma_half, self.sigma_half_inv):
            arr.flags.writeable = False

    @classmethod
    def isotropic(cls, d, scale=None, mu=None):
        """``Precondition(mu, scale * I_d)``; defaults to ``(0, d * I_d)``."""
        scale = float(d) if scale is None else float(scale)
        mu = np.zeros(d) if mu is None else np.broadcast_to(np.asarray(mu, float), (d,))
        return cls(mu, scale * np.eye(d))

    def same_as(self, other):
        return (
            other is self
            or (
                isinstance(other, Precondition)
                and np.array_equal(self.mu, other.mu)
                and np.array_equal(self.sigma, other.sigma)
            )
        )

    def whiten(self, x):
        """``sigma_half_inv @ (x - mu)`` over the last axis."""
        diff = np.asarray(x, dtype=float) - self.mu
        if self._iso is not None:
            return diff / self._iso
        return diff @ self.sigma_half_inv

    def color(self, u):
        """``sigma_half @ u + mu`` over the last axis."""
        if self._iso is not None:
            return u * self._iso + self.mu
        return u @ self.sigma_half + self.mu

    def __repr__(self):
        return f"Precondition(d={self.d}, |mu|={np.linalg.norm(self.mu):.4g}, tr(sigma)={np.trace(self.sigma):.4g})"


def one_minus_latitude(z):
    """``1 - z[d]`` computed without cancellation near the North pole.

    For unit z, ``1 - z_{d+1} = |z_{1:d}|^2 / (1 + z_{d+1})``, which keeps full
    relative precision when ``z_{d+1}`` is close to 1.
    """
    z = np.asarray(z, dtype=float)
    lat = z[..., -1]
    head = z[..., :-1]
    sq = np.einsum("...i,...i->...", head, head)
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = sq / (1.0 + lat)
    return np.where(lat > 0, stable, 1.0 - lat)


def _check_pole(om):
    if np.any(om < POLE_TOL):
        raise SingularityError(f"point within {POLE_TOL:g} of the North pole (1 - z_d+1 = {np.min(om):.3g})")


def sp_forward(p: Precondition, z):
    """Map sphere point(s) z to R^d.

    Raises:
        SingularityError: if ``1 - z_{d+1} < 1e-14``.
    """
    z = np.asarray(z, dtype=float)
    om = one_minus_latitude(z)
    _check_pole(om)
    xt = z[..., :-1] / om[..., None]
    return p.color(xt)


def sp_inverse(p: Precondition, x):
    """Map point(s) x in R^d to the unit sphere S^d."""
    u = p.whiten(x)
    sq = np.einsum("...i,...i->...", u, u)
    denom = sq + 1.0
    head = 2.0 * u / denom[..., None]
    lat = (sq - 1.0) / denom
    return np.concatenate([head, lat[..., None]], axis=-1)


def log_pi_gamma(p: Precondition, target, z):
    """Log of the density induced on S^d, up to a gamma-dependent constant.

    Returns ``log pi(x) - d * log(1 - z_{d+1})`` with ``x = sp_forward(p, z)``.
    """
    om = one_minus_latitude(z)
    _check_pole(om)
    x = p.color(np.asarray(z, dtype=float)[..., :-1] / om[..., None])
    return target.log_density(x) - p.d * np.log(om)


def log_pi_gamma_and_x(p: Precondition, target, z):
    """Like :func:`log_pi_gamma` but also returns the projected point x."""
    z = np.asarray(z, dtype=float)
    om = one_minus_latitude(z)
    _check_pole(om)
    x = p.color(z[..., :-1] / om[..., None])
    return target.log_density(x) - p.d * np.log(om), x


def ambient_gradient(p: Precondition, target, z):
    """Gradient of ``log_pi_gamma`` w.r.t. the ambient R^{d+1} coordinates of z.

    The ambient extension is the one defined by the projection formula with z
    not constrained to the sphere; only its tangent part is intrinsic.
    """
    z = np.asarray(z, dtype=float)
    om = one_minus_latitude(z)
    _check_pole(om)
    head = z[..., :-1]
    x = p.color(head / om[..., None])
    gx = target.log_gradient(x)
    if p._iso is not None:
        w = gx * p._iso
    else:
        w = gx @ p.sigma_half
    g_head = w / om[..., None]
    g_lat = np.einsum("...i,...i->...", w, head) / om**2 + p.d / om
    return np.concatenate([g_head, g_lat[..., None]], axis=-1)


def tangent_project(z, g):
    """Remove the component of g along z: ``g - (z . g) z``."""
    zg = np.einsum("...i,...i->...", z, g)
    return g - zg[..., None] * z


def tangent_gradient(p: Precondition, target, z):
    """Riemannian gradient of ``log_pi_gamma`` on the sphere at z."""
    z = np.asarray(z, dtype=float)
    return tangent_project(z, ambient_gradient(p, target, z))


def sample_tangent_uniform(z, rng):
    """Draw v uniformly from the unit sphere of the tangent space at z."""
    z = np.asarray(z, dtype=float)
    while True:
        g = rng.standard_normal(z.shape[-1])
        g -= (g @ z) * z
        n = np.sqrt(g @ g)
        if n >= 1e-12:
            return g / n


def geodesic(z0, v0, t):
    """Flow ``(z0, v0)`` along the great circle for angle/time t.

    ``t`` may be an array, in which case the outputs gain a leading axis.
    """
    z0 = np.asarray(z0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    t = np.asarray(t, dtype=float)
    c = np.cos(t)[..., None]
    s = np.sin(t)[..., None]
    return z0 * c + v0 * s, v0 * c - z0 * s


def renormalize_phase(z, v):
    """Re-orthonormalize a phase pair to remove accumulated rounding."""
    z = z / np.sqrt(z @ z)
    v = v - (v @ z) * z
    return z, v / np.sqrt(v @ v)


def south_pole(d):
    z = np.zeros(d + 1)
    z[-1] = -1.0
    return z
