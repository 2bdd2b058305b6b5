"""Split-chain regeneration laboratory on finite-state Doeblin chains.

For a kernel ``P`` with ``P^T(x, .) >= eps * nu(.)`` for every x, the split
T-skeleton carries a flag ``Y_n ~ Bernoulli(eps)`` drawn independently of the
path.  Given ``Y_n = 1`` the next endpoint is drawn from ``nu``; otherwise
from the residual kernel ``eta = (P^T - eps * nu) / (1 - eps)``.  Only the
segment endpoints are simulated; path interiors between endpoints are not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats


class NotMinorisableError(ValueError):
    """No column of ``P^T`` is bounded away from zero across all rows."""


@dataclass
class FiniteKernel:
    P: np.ndarray
    T_pow: int = 1

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("P must be row-stochastic")
        if self.T_pow < 1:
            raise ValueError("T_pow must be >= 1")
        self.P = P

    @property
    def n_states(self):
        return self.P.shape[0]

    @property
    def PT(self):
        return np.linalg.matrix_power(self.P, self.T_pow)

    def stationary(self):
        """Left Perron eigenvector of ``P^T``, normalized to sum to one."""
        w, vl = np.linalg.eig(self.PT.T)
        i = np.argmin(np.abs(w - 1.0))
        pi = np.real(vl[:, i])
        return pi / pi.sum()


@dataclass
class Minorisation:
    epsilon: float
    nu: np.ndarray
    eta: np.ndarray | None = None

    def __post_init__(self):
        if not (0 < self.epsilon <= 1):
            raise ValueError("epsilon must be in (0, 1]")
        self.nu = np.asarray(self.nu, dtype=float)


def extract_minorisation(kernel: FiniteKernel) -> Minorisation:
    """Maximal entrywise minorisation: ``eps * nu(y) = min_x P^T(x, y)``."""
    PT = kernel.PT
    col_min = PT.min(axis=0)
    eps = float(col_min.sum())
    if eps <= 0:
        raise NotMinorisableError("P^T has no column that is positive in every row")
    nu = col_min / eps
    m = Minorisation(min(eps, 1.0), nu)
    m.eta = residual_kernel(kernel, m)
    return m


def residual_kernel(kernel: FiniteKernel, m: Minorisation):
    """``(P^T - eps * nu) / (1 - eps)``; for eps = 1 the rows are set to nu."""
    PT = kernel.PT
    if m.epsilon >= 1.0 - 1e-15:
        return np.tile(m.nu, (kernel.n_states, 1))
    eta = (PT - m.epsilon * m.nu[None, :]) / (1.0 - m.epsilon)
    if eta.min() < -1e-12:
        raise ValueError("residual kernel has negative entries; (eps, nu) is not a minorisation")
    eta = np.maximum(eta, 0.0)
    return eta / eta.sum(axis=1, keepdims=True)


@dataclass
class SplitState:
    phi_endpoint: int
    y: int


class _Sampler:
    """Inverse-CDF draws from ``nu`` and the rows of ``eta``."""

    def __init__(self, m: Minorisation, eta):
        self.nu_cdf = np.cumsum(m.nu)
        self.eta_cdf = np.cumsum(eta, axis=1)
        self.n = len(m.nu)

    def draw(self, cdf, u):
        return min(int(np.searchsorted(cdf, u, side="right")), self.n - 1)


def split_step(s: SplitState, kernel: FiniteKernel, m: Minorisation, rng) -> SplitState:
    eta = m.eta if m.eta is not None else residual_kernel(kernel, m)
    if s.y == 1:
        nxt = rng.choice(kernel.n_states, p=m.nu)
    else:
        nxt = rng.choice(kernel.n_states, p=eta[s.phi_endpoint])
    y = int(rng.random() < m.epsilon)
    return SplitState(int(nxt), y)


def simulate_split_chain(kernel: FiniteKernel, m: Minorisation, n_steps: int, rng, x0=None,
                         kernels=None, switch_times=None):
    """Simulate ``n_steps`` split-chain transitions.

    Returns ``(states, ys)`` of length ``n_steps + 1``: endpoint ``states[n]``
    and flag ``ys[n]``.  ``Y_0 ~ Bernoulli(eps)`` and ``x0`` defaults to a
    draw from ``nu``.

    ``kernels`` / ``switch_times`` optionally swap the residual kernel during
    the run (all kernels must share ``(eps, nu)``): kernel ``kernels[j]`` is
    used from step ``switch_times[j]`` on.
    """
    eta_list = [m.eta if m.eta is not None else residual_kernel(kernel, m)]
    if kernels is not None:
        eta_list = [residual_kernel(K, m) for K in kernels]
        switch_times = list(switch_times)
    samplers = [_Sampler(m, eta) for eta in eta_list]
    ys = (rng.random(n_steps + 1) < m.epsilon).astype(np.int8)
    us = rng.random(n_steps + 1)
    states = np.empty(n_steps + 1, dtype=np.int64)
    sp = samplers[0]
    states[0] = sp.draw(sp.nu_cdf, us[0]) if x0 is None else int(x0)
    nu_cdf = sp.nu_cdf
    which = 0
    eta_cdf = sp.eta_cdf
    n_states = sp.n
    search = np.searchsorted
    for n in range(n_steps):
        if kernels is not None and which + 1 < len(samplers) and n >= switch_times[which + 1]:
            which += 1
            eta_cdf = samplers[which].eta_cdf
        cdf = nu_cdf if ys[n] else eta_cdf[states[n]]
        k = search(cdf, us[n + 1], side="right")
        states[n + 1] = k if k < n_states else n_states - 1
    return states, ys


def geometric_interarrivals(ys):
    idx = np.flatnonzero(ys)
    return np.diff(idx)


@dataclass
class Report:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)

    def lines(self):
        out = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for k, v in self.values.items():
            out.append(f"  {k} = {v}")
        return out

    def __str__(self):
        return "\n".join(self.lines())


def marginal_identity_error(kernel: FiniteKernel, m: Minorisation):
    eta = m.eta if m.eta is not None else residual_kernel(kernel, m)
    recon = m.epsilon * m.nu[None, :] + (1 - m.epsilon) * eta
    return float(np.max(np.abs(recon - kernel.PT)))


def verify_return_times(kernel: FiniteKernel, m: Minorisation, n_steps: int, rng, alpha=1e-3,
                        max_arrivals=None):
    """Inter-arrival times of ``{Y = 1}`` against Geometric(eps) plus lag independence."""
    if n_steps < 100_000:
        raise ValueError("run length must be at least 1e5 steps")
    _, ys = simulate_split_chain(kernel, m, n_steps, rng)
    gaps = geometric_interarrivals(ys)
    if max_arrivals is not None:
        gaps = gaps[:max_arrivals]
    eps = m.epsilon
    n = len(gaps)
    mean = float(gaps.mean())
    mean_sd = np.sqrt((1 - eps) / eps**2 / n)
    # randomized PIT makes KS exact for a discrete law
    u = rng.random(n)
    cdf_hi = stats.geom.cdf(gaps, eps)
    cdf_lo = stats.geom.cdf(gaps - 1, eps)
    ks = stats.kstest(cdf_lo + u * (cdf_hi - cdf_lo), "uniform")
    kmax = max(1, int(np.quantile(gaps, 0.99)))
    edges = np.arange(1, kmax + 1)
    obs = np.array([np.sum(gaps == k) for k in edges] + [np.sum(gaps > kmax)])
    probs = np.append(stats.geom.pmf(edges, eps), stats.geom.sf(kmax, eps))
    exp = probs * n
    keep = exp >= 5
    obs_c = np.append(obs[keep], obs[~keep].sum())
    exp_c = np.append(exp[keep], exp[~keep].sum())
    if exp_c[-1] == 0:
        obs_c, exp_c = obs_c[:-1], exp_c[:-1]
    chi = stats.chisquare(obs_c, exp_c * obs_c.sum() / exp_c.sum())
    ac1 = _autocorr(gaps, 1)
    ac2 = _autocorr(gaps, 2)
    lim = 3.0 / np.sqrt(n)
    passed = (
        abs(mean - 1 / eps) <= 3 * mean_sd
        and ks.pvalue > alpha
        and chi.pvalue > alpha
        and abs(ac1) <= lim
        and abs(ac2) <= lim
    )
    return Report("return_times", bool(passed), {
        "n_interarrivals": n, "mean": mean, "expected_mean": 1 / eps,
        "ks_pvalue": float(ks.pvalue), "chi2_pvalue": float(chi.pvalue),
        "lag1_autocorr": ac1, "lag2_autocorr": ac2, "autocorr_limit": lim,
    })


def _autocorr(a, lag):
    a = np.asarray(a, dtype=float) - np.mean(a)
    return float(np.dot(a[:-lag], a[lag:]) / np.dot(a, a))


def renewal_series(m: Minorisation, tol=1e-12):
    """``eps * sum_{n>=1} (1-eps)^(n-1) nu eta^(n-1)``, truncated once the weight < tol."""
    eps = m.epsilon
    term = m.nu.copy()
    total = np.zeros_like(term)
    weight = 1.0
    n = 0
    while True:
        total += weight * term
        n += 1
        weight *= 1 - eps
        if weight < tol or eps >= 1:
            break
        term = term @ m.eta
    return eps * total, n


def verify_renewal_stationarity(kernel: FiniteKernel, m: Minorisation, rng=None, n_regen=10_000,
                                tol=1e-9, tv_tol=0.02):
    """Renewal series vs the stationary vector, plus the law at renewal times."""
    series, n_terms = renewal_series(m)
    pi = kernel.stationary()
    err = float(np.max(np.abs(series - pi)))
    values = {"series_max_abs_error": err, "terms": n_terms}
    passed = err < tol
    if rng is not None:
        n_steps = int(1.3 * n_regen / m.epsilon) + 100
        states, ys = simulate_split_chain(kernel, m, n_steps, rng)
        idx = np.flatnonzero(ys)[1:]
        emp = np.bincount(states[idx], minlength=kernel.n_states) / len(idx)
        tv = 0.5 * float(np.abs(emp - pi).sum())
        values.update(renewal_samples=len(idx), renewal_tv=tv)
        passed = passed and tv < tv_tol
    return Report("renewal_stationarity", bool(passed), values)


def _contingency_pvalue(a, b, n_states):
    table = np.zeros((n_states, n_states))
    np.add.at(table, (a, b), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table)[1])


def verify_atom_independence(kernel: FiniteKernel, m: Minorisation, n_steps: int, rng, alpha=1e-3,
                             tv_tol=0.02, control: FiniteKernel | None = None):
    """Regeneration structure of the split chain.

    Conditional on ``Y_n = 1`` the endpoints at n and n+2 must be independent
    (chi-squared contingency) and the endpoint at n+1 must be distributed as
    nu.  Lag-1 dependence is measured but not asserted.  The positive control
    runs a sticky chain and requires unconditional lag-1 and lag-2
    dependence to be detected.
    """
    states, ys = simulate_split_chain(kernel, m, n_steps, rng)
    n = kernel.n_states
    idx = np.flatnonzero(ys[:-2])
    p_lag2 = _contingency_pvalue(states[idx], states[idx + 2], n)
    p_lag1 = _contingency_pvalue(states[idx], states[idx + 1], n)
    emp_nu = np.bincount(states[idx + 1], minlength=n) / len(idx)
    tv_nu = 0.5 * float(np.abs(emp_nu - m.nu).sum())
    values = {"regenerations": len(idx), "lag2_conditional_pvalue": p_lag2,
              "lag1_conditional_pvalue": p_lag1, "nu_tv": tv_nu}
    passed = p_lag2 > alpha and tv_nu < tv_tol
    if control is not None:
        mc = extract_minorisation(control)
        cs, _ = simulate_split_chain(control, mc, min(n_steps, 200_000), rng)
        pc1 = _contingency_pvalue(cs[:-1], cs[1:], control.n_states)
        pc2 = _contingency_pvalue(cs[:-2], cs[2:], control.n_states)
        values.update(control_lag1_pvalue=pc1, control_lag2_pvalue=pc2)
        passed = passed and pc1 < alpha and pc2 < alpha
    return Report("atom_independence", bool(passed), values)


def random_doeblin_kernel(n_states, rng, floor=0.02, T_pow=1):
    """Random row-stochastic matrix whose entries are all at least ``floor``."""
    P = rng.dirichlet(np.ones(n_states), size=n_states)
    P = floor + (1 - n_states * floor) * P
    return FiniteKernel(P / P.sum(axis=1, keepdims=True), T_pow)


def sticky_kernel(n_states, stay=0.9):
    P = np.full((n_states, n_states), (1 - stay) / (n_states - 1))
    np.fill_diagonal(P, stay)
    return FiniteKernel(P)


def air_split_chain_means(kernels, m: Minorisation, f, schedule, n_total, n_reps, rng, checkpoints):
    """Running means of ``f`` on an AIR chain that alternates kernels per epoch.

    Epoch k uses ``kernels[k % len(kernels)]``; epochs have the schedule's
    lags.  Returns an array ``(n_reps, len(checkpoints))`` of ``f_hat_n``.
    """
    lags = []
    total = 0
    k = 1
    while total < n_total:
        lag = int(schedule.epoch_length(k))
        lags.append(lag)
        total += lag
        k += 1
    starts = np.concatenate([[0], np.cumsum(lags)[:-1]])
    order = [kernels[i % len(kernels)] for i in range(len(lags))]
    f = np.asarray(f, dtype=float)
    out = np.empty((n_reps, len(checkpoints)))
    cps = np.asarray(checkpoints)
    for r in range(n_reps):
        states, _ = simulate_split_chain(kernels[0], m, n_total, rng, kernels=order, switch_times=starts)
        csum = np.cumsum(f[states[1:]])
        out[r] = csum[cps - 1] / cps
    return out
