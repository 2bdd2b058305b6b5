import math

import numpy as np
import pytest

from stereomcmc.geometry import Precondition, log_pi_gamma
from stereomcmc.rng import make_rng
from stereomcmc.targets import CountingTarget, affine_wrap, gaussian_target, student_t_target


def fd_gradient(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_standard_normal_log_density_at_zero():
    t = gaussian_target(np.zeros(1))
    assert t.log_density(np.zeros(1)) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)


def test_gaussian_gradient_zero_at_mean():
    m = np.array([1.0, -2.0, 3.0])
    t = gaussian_target(m, np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(t.log_gradient(m), 0.0, atol=0)


def test_gaussian_diag_matches_scalar_loop():
    rng = make_rng(1)
    m = rng.standard_normal(3)
    var = np.array([0.5, 2.0, 4.0])
    t = gaussian_target(m, var)
    for _ in range(10):
        x = rng.standard_normal(3)
        ref = 0.0
        for i in range(3):
            ref += -0.5 * (x[i] - m[i]) ** 2 / var[i] - 0.5 * math.log(2 * math.pi * var[i])
        assert t.log_density(x) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_gaussian_full_cov_and_rejects_non_spd():
    rng = make_rng(2)
    a = rng.standard_normal((4, 4))
    cov = a @ a.T + np.eye(4)
    t = gaussian_target(np.zeros(4), cov)
    x = rng.standard_normal(4)
    ref = -0.5 * x @ np.linalg.solve(cov, x) - 0.5 * np.linalg.slogdet(2 * np.pi * cov)[1]
    assert t.log_density(x) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        gaussian_target(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        gaussian_target(np.zeros(2), np.array([1.0, -1.0]))


def test_student_t_log_ratio_against_closed_form():
    rng = make_rng(3)
    d = 6
    t = student_t_target(float(d), d)
    for _ in range(10):
        x1, x2 = 3 * rng.standard_normal(d), 3 * rng.standard_normal(d)
        got = t.log_density(x1) - t.log_density(x2)
        ref = -d * (math.log(d + x1 @ x1) - math.log(d + x2 @ x2))
        assert got == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_student_t_gradient_zero_at_origin():
    t = student_t_target(2.0, 5)
    assert np.allclose(t.log_gradient(np.zeros(5)), 0.0, atol=0)


@pytest.mark.parametrize("d", [1, 5, 50])
def test_gradients_match_finite_differences(d):
    rng = make_rng(4 + d)
    targets = [
        gaussian_target(rng.standard_normal(d), rng.uniform(0.5, 2, d)),
        student_t_target(2.0, d),
        affine_wrap(student_t_target(3.0, d), rng.standard_normal(d), np.eye(d) + 0.1 * rng.standard_normal((d, d))),
    ]
    for t in targets:
        for _ in range(5):
            x = 2 * rng.standard_normal(d)
            g = t.log_gradient(x)
            fd = fd_gradient(t.log_density, x)
            assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_batched_evaluation_shapes():
    t = student_t_target(2.0, 3)
    x = np.ones((4, 3))
    assert t.log_density(x).shape == (4,)
    assert t.log_gradient(x).shape == (4, 3)


def test_affine_wrap_moves_mean():
    base = gaussian_target(np.zeros(2))
    shift = np.array([5.0, -1.0])
    lin = np.array([[2.0, 0.0], [1.0, 1.0]])
    t = affine_wrap(base, shift, lin)
    assert np.allclose(t.log_gradient(shift), 0.0, atol=1e-14)
    # density of shift + L X equals base density pulled back, up to the Jacobian constant
    rng = make_rng(5)
    x1, x2 = rng.standard_normal(2), rng.standard_normal(2)
    pull = lambda x: np.linalg.solve(lin, x - shift)
    assert t.log_density(x1) - t.log_density(x2) == pytest.approx(
        base.log_density(pull(x1)) - base.log_density(pull(x2)), rel=1e-12)


def test_uniform_case_cross_module():
    d = 9
    t = student_t_target(float(d), d)
    p = Precondition.isotropic(d)
    rng = make_rng(6)
    z = rng.standard_normal((500, d + 1))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z = z[z[:, -1] < 0.99]
    assert np.ptp(log_pi_gamma(p, t, z)) < 1e-8


def test_counting_target_counts_rows():
    t = CountingTarget(gaussian_target(np.zeros(3)))
    t.log_density(np.zeros(3))
    t.log_density(np.zeros((5, 3)))
    t.log_gradient(np.zeros((2, 4, 3)))
    assert t.density_evals == 6 and t.gradient_evals == 8 and t.total_evals == 14


def test_invalid_parameters():
    with pytest.raises(ValueError):
        student_t_target(0.0, 2)
    with pytest.raises(ValueError):
        student_t_target(1.0, 0)
