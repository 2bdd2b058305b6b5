"""Binned pi_gamma on the circle (d = 1) for kernel invariance checks."""

import numpy as np

from stereomcmc.geometry import Precondition, SingularityError, log_pi_gamma

N_BINS = 64


def angle_bins(z):
    phi = np.mod(np.arctan2(z[..., 0], z[..., 1]), 2 * np.pi)
    return np.minimum((phi / (2 * np.pi) * N_BINS).astype(int), N_BINS - 1)


def binned_pi(target, p: Precondition, per_bin=400):
    phi = (np.arange(N_BINS * per_bin) + 0.5) / (N_BINS * per_bin) * 2 * np.pi
    z = np.stack([np.sin(phi), np.cos(phi)], axis=1)
    vals = np.full(len(phi), -np.inf)
    for i in range(len(phi)):
        try:
            vals[i] = log_pi_gamma(p, target, z[i])
        except SingularityError:
            pass
    w = np.exp(vals - vals.max()).reshape(N_BINS, per_bin).sum(axis=1)
    return w / w.sum()


def invariance_tv(zs, pi_b):
    """TV between pi_b and pi_b pushed through the empirical bin-transition matrix."""
    b = angle_bins(zs)
    counts = np.zeros((N_BINS, N_BINS))
    np.add.at(counts, (b[:-1], b[1:]), 1)
    rows = counts.sum(axis=1, keepdims=True)
    F = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    return 0.5 * float(np.abs(pi_b @ F - pi_b).sum())
