import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stereomcmc.geometry import (
    Precondition,
    SingularityError,
    ambient_gradient,
    geodesic,
    log_pi_gamma,
    one_minus_latitude,
    renormalize_phase,
    sample_tangent_uniform,
    south_pole,
    sp_forward,
    sp_inverse,
    tangent_gradient,
)
from stereomcmc.rng import make_rng
from stereomcmc.targets import gaussian_target, student_t_target
from stereomcmc.verify import geodesic_drift, gradient_fd_error, roundtrip_errors


def random_sphere(rng, d, n=None):
    shape = (d + 1,) if n is None else (n, d + 1)
    z = rng.standard_normal(shape)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


# ---------------------------------------------------------------- Precondition

def test_sigma_half_squares_to_sigma():
    rng = make_rng(1)
    a = rng.standard_normal((6, 6))
    sigma = a @ a.T + 0.1 * np.eye(6)
    p = Precondition(np.zeros(6), sigma)
    rel = np.linalg.norm(p.sigma_half @ p.sigma_half - sigma) / np.linalg.norm(sigma)
    assert rel < 1e-10
    assert np.allclose(p.sigma_half, p.sigma_half.T, atol=0, rtol=1e-14)
    assert np.allclose(p.sigma_half @ p.sigma_half_inv, np.eye(6), atol=1e-10)


def test_precondition_rejects_bad_sigma():
    with pytest.raises(ValueError):
        Precondition(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        Precondition(np.zeros(2), np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        Precondition(np.zeros(3), np.eye(2))


def test_isotropic_shortcut_matches_general_path():
    rng = make_rng(2)
    p_iso = Precondition.isotropic(4, 3.0, np.arange(4.0))
    p_gen = Precondition(np.arange(4.0), 3.0 * np.eye(4) + 0.0)
    x = rng.standard_normal((50, 4))
    assert np.allclose(sp_inverse(p_iso, x), sp_inverse(p_gen, x), atol=1e-14)


# ------------------------------------------------------------- forward/inverse

def test_south_pole_maps_to_mu():
    d = 4
    p = Precondition.isotropic(d, 1.0)
    assert np.allclose(sp_forward(p, south_pole(d)), 0.0, atol=0)


def test_equator_point_maps_to_mu_plus_e1():
    m = np.array([1.0, -2.0, 0.5])
    p = Precondition(m, np.eye(3))
    z = np.array([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(sp_forward(p, z), m + np.array([1.0, 0, 0]), atol=1e-15)


def test_forward_matches_scalar_loop_oracle():
    rng = make_rng(3)
    d = 4
    sigma = np.diag(np.arange(1.0, d + 1))
    mu = rng.standard_normal(d)
    p = Precondition(mu, sigma)
    for _ in range(20):
        z = random_sphere(rng, d)
        if z[-1] > 0.9:
            continue
        x_ref = []
        for i in range(d):
            x_ref.append(math.sqrt(sigma[i, i]) * z[i] / (1.0 - z[d]) + mu[i])
        assert np.allclose(sp_forward(p, z), x_ref, rtol=1e-12, atol=1e-12)


def test_inverse_of_mu_is_south_pole():
    p = Precondition(np.array([3.0, 4.0]), np.diag([2.0, 5.0]))
    assert np.allclose(sp_inverse(p, p.mu), south_pole(2), atol=0)


def test_unit_whitened_norm_lands_on_equator():
    rng = make_rng(4)
    p = Precondition(np.ones(5), np.diag([1.0, 2, 3, 4, 5]))
    u = rng.standard_normal(5)
    u /= np.linalg.norm(u)
    z = sp_inverse(p, p.color(u))
    assert abs(z[-1]) < 1e-12


def test_roundtrip_d10_thousand_points():
    rng = make_rng(5)
    p = Precondition(rng.standard_normal(10), np.diag(rng.uniform(0.5, 3.0, 10)))
    x = 4 * rng.standard_normal((1000, 10))
    back = sp_forward(p, sp_inverse(p, x))
    rel = np.linalg.norm(back - x, axis=1) / np.maximum(1, np.linalg.norm(x, axis=1))
    assert rel.max() < 1e-10
    assert np.allclose(np.linalg.norm(sp_inverse(p, x), axis=1), 1.0, atol=1e-12)


def test_latitude_formula_for_d_identity():
    rng = make_rng(6)
    d = 7
    p = Precondition.isotropic(d)
    x = 3 * rng.standard_normal((200, d))
    r = np.sum(x * x, axis=1) / d
    assert np.allclose(sp_inverse(p, x)[:, -1], (r - 1) / (r + 1), atol=1e-12, rtol=0)


def test_pole_guard_raises():
    d = 3
    p = Precondition.isotropic(d, 1.0)
    pole = np.zeros(d + 1)
    pole[-1] = 1.0
    with pytest.raises(SingularityError):
        sp_forward(p, pole)
    near = np.zeros(d + 1)
    near[0] = 1e-8
    near[-1] = math.sqrt(1 - 1e-16)
    with pytest.raises(SingularityError):
        sp_forward(p, near)


def test_one_minus_latitude_is_accurate_near_pole():
    eps = 1e-9
    z = np.array([math.sqrt(2 * eps - eps * eps), 1 - eps])
    assert abs(one_minus_latitude(z) - eps) / eps < 1e-6


@settings(max_examples=40, deadline=None)
@given(d=st.sampled_from([1, 2, 10, 200]), seed=st.integers(0, 2**31 - 1))
def test_roundtrip_property(d, seed):
    ex, ez = roundtrip_errors(d, make_rng(seed), n=50)
    assert ex < 1e-10 and ez < 1e-10


# ------------------------------------------------------------------ densities

def test_uniform_case_log_density_is_constant():
    d = 6
    p = Precondition.isotropic(d)
    target = student_t_target(float(d), d)
    z = random_sphere(make_rng(7), d, 1000)
    z = z[z[:, -1] < 0.999]
    vals = log_pi_gamma(p, target, z)
    assert vals.max() - vals.min() < 1e-8


def test_gaussian_south_pole_value():
    d = 3
    p = Precondition.isotropic(d, 1.0)
    target = gaussian_target(np.zeros(d))
    val = log_pi_gamma(p, target, south_pole(d))
    assert val == pytest.approx(target.log_density(np.zeros(d)) - d * math.log(2.0), abs=1e-14)


def test_log_density_matches_jacobian_form():
    rng = make_rng(8)
    d = 4
    p = Precondition(rng.standard_normal(d), np.diag([1.0, 2.0, 0.5, 3.0]))
    target = gaussian_target(np.ones(d))
    z = random_sphere(rng, d, 300)
    z = z[z[:, -1] < 0.95]
    x = sp_forward(p, z)
    u = p.whiten(x)
    alt = target.log_density(x) + d * np.log1p(np.sum(u * u, axis=1))
    diff = log_pi_gamma(p, target, z) - alt
    assert np.ptp(diff) < 1e-9


# ------------------------------------------------------------------ gradients

def test_uniform_case_gradient_vanishes():
    d = 5
    p = Precondition.isotropic(d)
    target = student_t_target(float(d), d)
    for z in random_sphere(make_rng(9), d, 50):
        if z[-1] < 0.99:
            assert np.linalg.norm(tangent_gradient(p, target, z)) < 1e-8


def test_tangent_gradient_fd_and_orthogonal():
    rng = make_rng(10)
    for d in (1, 2, 10, 200):
        fd, orth = gradient_fd_error(d, rng)
        assert fd < 1e-4
        assert orth < 1e-9


def test_batched_gradient_matches_single():
    rng = make_rng(11)
    d = 3
    p = Precondition(rng.standard_normal(d), np.diag([1.0, 2.0, 4.0]))
    target = gaussian_target(np.zeros(d))
    z = random_sphere(rng, d, 10)
    batch = ambient_gradient(p, target, z)
    for i in range(10):
        assert np.allclose(batch[i], ambient_gradient(p, target, z[i]), atol=1e-13)


# -------------------------------------------------------------------- tangent

def test_tangent_velocity_is_orthonormal():
    rng = make_rng(12)
    for _ in range(100):
        z = random_sphere(rng, 6)
        v = sample_tangent_uniform(z, rng)
        assert abs(np.linalg.norm(v) - 1) < 1e-10
        assert abs(z @ v) < 1e-10


def test_tangent_velocity_d1_directions_balanced():
    rng = make_rng(13)
    z = np.array([0.6, 0.8])
    tangent = np.array([-0.8, 0.6])
    signs = np.array([np.sign(sample_tangent_uniform(z, rng) @ tangent) for _ in range(10_000)])
    assert abs(np.mean(signs > 0) - 0.5) < 0.02


def test_tangent_velocity_d2_mean_zero():
    rng = make_rng(14)
    z = south_pole(2)
    v = np.array([sample_tangent_uniform(z, rng) for _ in range(10_000)])
    sd = v.std(axis=0)
    assert np.all(np.abs(v.mean(axis=0)) <= 3 * np.maximum(sd, 1e-12) / 100)


# ------------------------------------------------------------------- geodesic

def test_geodesic_special_times():
    rng = make_rng(15)
    z = random_sphere(rng, 3)
    v = sample_tangent_uniform(z, rng)
    z0, v0 = geodesic(z, v, 0.0)
    assert np.allclose(z0, z, atol=0) and np.allclose(v0, v, atol=0)
    z1, v1 = geodesic(z, v, 2 * np.pi)
    assert np.allclose(z1, z, atol=1e-10) and np.allclose(v1, v, atol=1e-10)
    z2, v2 = geodesic(z, v, np.pi / 2)
    assert np.allclose(z2, v, atol=1e-12) and np.allclose(v2, -z, atol=1e-12)


def test_geodesic_composition():
    rng = make_rng(16)
    z = random_sphere(rng, 4)
    v = sample_tangent_uniform(z, rng)
    s, t = 0.7, 2.3
    za, va = geodesic(*geodesic(z, v, s), t)
    zb, vb = geodesic(z, v, s + t)
    assert np.allclose(za, zb, atol=1e-10) and np.allclose(va, vb, atol=1e-10)


def test_geodesic_batched_times():
    rng = make_rng(17)
    z = random_sphere(rng, 2)
    v = sample_tangent_uniform(z, rng)
    ts = np.linspace(0, 3, 7)
    zs, vs = geodesic(z, v, ts)
    assert zs.shape == (7, 3)
    for i, t in enumerate(ts):
        zi, vi = geodesic(z, v, t)
        assert np.allclose(zs[i], zi) and np.allclose(vs[i], vi)


def test_geodesic_drift_after_many_steps():
    rng = make_rng(18)
    for d in (1, 2, 10, 200):
        assert geodesic_drift(d, rng) < 1e-10


def test_renormalize_phase_restores_invariants():
    z = np.array([1.0 + 1e-6, 0.0, 1e-7])
    v = np.array([1e-5, 1.0, 0.0])
    z2, v2 = renormalize_phase(z, v)
    assert abs(z2 @ z2 - 1) < 1e-15 and abs(v2 @ v2 - 1) < 1e-15 and abs(z2 @ v2) < 1e-15
