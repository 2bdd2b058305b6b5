"""Target densities on R^d, unnormalized, with analytic log-gradients.

Every model works over the last axis, so ``log_density`` on an ``(n, d)``
array returns ``(n,)`` and ``log_gradient`` returns ``(n, d)``.
"""

from __future__ import annotations

import numpy as np


class TargetModel:
    """Base class for targets. Subclasses override the two log methods."""

    name = "target"
    has_gradient = True

    def __init__(self, d: int):
        if int(d) != d or d < 1:
            raise ValueError(f"dimension must be a positive integer, got {d!r}")
        self.d = int(d)

    def log_density(self, x):
        raise NotImplementedError

    def log_gradient(self, x):
        raise NotImplementedError(f"{self.name} does not provide gradients")

    def __repr__(self):
        return f"{type(self).__name__}(d={self.d})"


class GaussianTarget(TargetModel):
    """N(mean, cov) with cov given as None (identity), a diagonal, or a matrix.

    Unlike the other targets the log density is normalized; the constant is
    computed once and costs nothing per evaluation.
    """

    name = "gaussian"

    def __init__(self, mean, cov=None):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        super().__init__(mean.shape[0])
        self.mean = mean
        d = self.d
        if cov is None:
            self._kind = "identity"
            self.cov = np.eye(d)
        else:
            cov = np.asarray(cov, dtype=float)
            if cov.ndim == 1:
                if cov.shape != (d,) or np.any(cov <= 0) or not np.all(np.isfinite(cov)):
                    raise ValueError("diagonal covariance must be positive with length d")
                self._kind = "diag"
                self._inv_diag = 1.0 / cov
                self.cov = np.diag(cov)
            elif cov.ndim == 2:
                if cov.shape != (d, d) or not np.allclose(cov, cov.T, rtol=1e-12, atol=0):
                    raise ValueError("covariance must be a symmetric d x d matrix")
                try:
                    np.linalg.cholesky(cov)
                except np.linalg.LinAlgError as err:
                    raise ValueError("covariance is not positive definite") from err
                self._kind = "full"
                self._prec = np.linalg.inv(cov)
                self._prec = 0.5 * (self._prec + self._prec.T)
                self.cov = cov
            else:
                raise ValueError("cov must be None, 1-D or 2-D")
        _, logdet = np.linalg.slogdet(self.cov)
        self.log_norm = -0.5 * (d * np.log(2.0 * np.pi) + logdet)

    def _prec_apply(self, diff):
        if self._kind == "identity":
            return diff
        if self._kind == "diag":
            return diff * self._inv_diag
        return diff @ self._prec

    def log_density(self, x):
        diff = np.asarray(x, dtype=float) - self.mean
        return self.log_norm - 0.5 * np.einsum("...i,...i->...", diff, self._prec_apply(diff))

    def log_gradient(self, x):
        return -self._prec_apply(np.asarray(x, dtype=float) - self.mean)


class StudentTTarget(TargetModel):
    """Centered spherical multivariate t with ``dof`` degrees of freedom."""

    name = "student_t"

    def __init__(self, dof: float, d: int):
        super().__init__(d)
        if not dof > 0:
            raise ValueError("dof must be positive")
        self.dof = float(dof)
        self._power = 0.5 * (self.dof + self.d)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        sq = np.einsum("...i,...i->...", x, x)
        return -self._power * np.log1p(sq / self.dof)

    def log_gradient(self, x):
        x = np.asarray(x, dtype=float)
        sq = np.einsum("...i,...i->...", x, x)
        return (-2.0 * self._power / (self.dof + sq))[..., None] * x


class AffineTarget(TargetModel):
    """Law of ``shift + linear @ X`` for X distributed as ``base``."""

    name = "affine"

    def __init__(self, base: TargetModel, shift=None, linear=None):
        super().__init__(base.d)
        self.base = base
        self.shift = np.zeros(self.d) if shift is None else np.asarray(shift, dtype=float)
        self.linear = np.eye(self.d) if linear is None else np.asarray(linear, dtype=float)
        if self.shift.shape != (self.d,) or self.linear.shape != (self.d, self.d):
            raise ValueError("shift must have length d and linear must be d x d")
        self._inv = np.linalg.inv(self.linear)
        self.has_gradient = base.has_gradient
        self.name = f"affine({base.name})"

    def _pull(self, x):
        return (np.asarray(x, dtype=float) - self.shift) @ self._inv.T

    def log_density(self, x):
        return self.base.log_density(self._pull(x))

    def log_gradient(self, x):
        return self.base.log_gradient(self._pull(x)) @ self._inv


class CountingTarget(TargetModel):
    """Wraps a target and counts point evaluations (a batch of n counts n).

    Used to put samplers on an equal-work footing in comparisons.
    """

    def __init__(self, base: TargetModel):
        super().__init__(base.d)
        self.base = base
        self.name = base.name
        self.has_gradient = base.has_gradient
        self.density_evals = 0
        self.gradient_evals = 0

    @staticmethod
    def _rows(x):
        shape = np.shape(x)
        return int(np.prod(shape[:-1])) if len(shape) > 1 else 1

    def log_density(self, x):
        self.density_evals += self._rows(x)
        return self.base.log_density(x)

    def log_gradient(self, x):
        self.gradient_evals += self._rows(x)
        return self.base.log_gradient(x)

    @property
    def total_evals(self):
        return self.density_evals + self.gradient_evals


def gaussian_target(mean, cov=None) -> GaussianTarget:
    return GaussianTarget(mean, cov)


def student_t_target(dof: float, d: int) -> StudentTTarget:
    return StudentTTarget(dof, d)


def affine_wrap(base: TargetModel, shift=None, linear=None) -> AffineTarget:
    """Shift and linearly transform a target; mean becomes ``shift + linear @ mean``."""
    return AffineTarget(base, shift, linear)
