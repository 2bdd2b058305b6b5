import numpy as np
import pytest

from stereomcmc.geometry import Precondition, sample_tangent_uniform, sp_inverse, tangent_gradient
from stereomcmc.rng import make_rng
from stereomcmc.sbps import (
    SbpsConfig,
    ThinningStats,
    bounce_rate,
    first_bounce_time,
    next_event_time,
    path_integral_estimator,
    reflect,
    sbps_run,
)
from stereomcmc.targets import gaussian_target, student_t_target
from stereomcmc.verify import circle_bounce_oracle, sbps_invariants


def _phase(p, rng, x):
    z = sp_inverse(p, x)
    return z, sample_tangent_uniform(z, rng)


def test_config_validation():
    with pytest.raises(ValueError):
        SbpsConfig(lambda_ref=-1)
    with pytest.raises(ValueError):
        SbpsConfig(tau_w=0)
    with pytest.raises(ValueError):
        SbpsConfig(n_grid=1)
    with pytest.raises(ValueError):
        SbpsConfig(safety=0.5)


def test_reflect_is_tangent_involution_and_flips_rate():
    d = 4
    rng = make_rng(0)
    target = gaussian_target(np.ones(d))
    p = Precondition.isotropic(d)
    for _ in range(50):
        z, v = _phase(p, rng, 2 * rng.standard_normal(d))
        w = reflect(z, v, p, target)
        assert abs(w @ w - 1) < 1e-12 and abs(w @ z) < 1e-12
        assert np.allclose(reflect(z, w, p, target), v, atol=1e-12)
        g = tangent_gradient(p, target, z)
        assert w @ g == pytest.approx(-(v @ g), abs=1e-12)
        # at most one of the two directions has a positive rate
        assert min(bounce_rate(z, v, p, target), bounce_rate(z, w, p, target)) <= 1e-12


def test_uniform_case_never_bounces():
    d = 5
    target = student_t_target(float(d), d)
    p = Precondition.isotropic(d)
    rng = make_rng(1)
    z, v = _phase(p, rng, np.ones(d))
    res = sbps_run(z, v, 50.0, SbpsConfig(lambda_ref=1.0), p, target, rng)
    assert res.counts["bounce"] == 0
    assert res.counts["refresh"] > 0
    assert all(ev.kind == "refresh" for ev in res.events)


def test_first_bounce_law_matches_quadrature_short():
    # the full 1e4-draw version runs in the acceptance suite
    out = circle_bounce_oracle(n_draws=1500, seed=3)
    assert out["ks_pvalue"] > 1e-3
    assert out["kinds"] == ["bounce"]


def test_skeleton_grid_and_duration():
    d = 2
    target = gaussian_target(np.zeros(d))
    p = Precondition.isotropic(d)
    rng = make_rng(2)
    z, v = _phase(p, rng, np.zeros(d) + 0.1)
    res = sbps_run(z, v, 10.0, SbpsConfig(delta=0.5), p, target, rng, t0=3.0)
    assert np.allclose(res.skeleton.t, 3.0 + 0.5 * np.arange(20))
    assert res.events == sorted(res.events, key=lambda e: e.time)
    assert all(3.0 < ev.time < 13.0 for ev in res.events)
    with pytest.raises(ValueError):
        sbps_run(z, v, 0.0, SbpsConfig(), p, target, rng)


def test_next_event_respects_horizon():
    d = 3
    target = student_t_target(float(d), d)
    p = Precondition.isotropic(d)
    rng = make_rng(4)
    z, v = _phase(p, rng, np.ones(d))
    tau, kind = next_event_time(z, v, SbpsConfig(lambda_ref=0.0), p, target, rng, horizon=2.0)
    assert (tau, kind) == (2.0, "horizon")


def test_first_bounce_counts_proposals():
    d = 2
    target = gaussian_target(np.zeros(d))
    p = Precondition.isotropic(d)
    rng = make_rng(5)
    stats = ThinningStats()
    for _ in range(100):
        z, v = _phase(p, rng, 2 * rng.standard_normal(d))
        tau, kind = first_bounce_time(z, v, SbpsConfig(), p, target, rng, horizon=20.0, stats=stats)
        assert kind in ("bounce", "none") and tau > 0
    assert stats.accepted <= stats.proposals
    assert stats.violation_fraction < 0.01


def test_invariants_short_run():
    out = sbps_invariants(seed=1, duration=100.0, d=3)
    assert out["norm_err"] < 1e-8 and out["dot_err"] < 1e-8
    assert out["involution_err"] < 1e-9 and out["post_bounce_rate"] < 1e-9
    assert out["bounces"] > 0


def test_path_integral_estimator():
    d = 2
    target = gaussian_target(np.zeros(d))
    p = Precondition.isotropic(d)
    rng = make_rng(6)
    z, v = _phase(p, rng, np.zeros(d) + 0.1)
    res = sbps_run(z, v, 3000.0, SbpsConfig(delta=0.1), p, target, rng)
    m = path_integral_estimator(res.skeleton, lambda x: x[:, 0] ** 2)
    assert m == pytest.approx(1.0, abs=0.15)
    with pytest.raises(ValueError):
        path_integral_estimator(np.empty((0, 2)), lambda x: x[:, 0])


def test_same_seed_same_events():
    d = 2
    target = gaussian_target(np.zeros(d))
    p = Precondition.isotropic(d)
    z, v = _phase(p, make_rng(0), np.ones(d))
    a = sbps_run(z, v, 20.0, SbpsConfig(), p, target, make_rng(9))
    b = sbps_run(z, v, 20.0, SbpsConfig(), p, target, make_rng(9))
    assert [e.time for e in a.events] == [e.time for e in b.events]
    assert np.all(np.isfinite(a.skeleton.x))


def test_rate_max_identity():
    d = 3
    rng = make_rng(10)
    target = gaussian_target(rng.standard_normal(d))
    p = Precondition.isotropic(d)
    for _ in range(50):
        z, v = _phase(p, rng, 2 * rng.standard_normal(d))
        g = tangent_gradient(p, target, z)
        both = bounce_rate(z, v, p, target) + bounce_rate(z, -v, p, target)
        assert both == pytest.approx(abs(v @ g), abs=1e-9)


def test_estimator_examples():
    d = 4
    target = student_t_target(float(d), d)
    p = Precondition.isotropic(d)
    rng = make_rng(11)
    z, v = _phase(p, rng, np.ones(d))
    res = sbps_run(z, v, 2000.0, SbpsConfig(delta=0.1), p, target, rng, record_events=False)
    assert path_integral_estimator(res.skeleton, lambda x: np.ones(len(x))) == 1.0
    lat = res.skeleton.latitude
    # refresh-only dynamics on the uniform sphere: latitude mean 0 up to batch-means error
    from stereomcmc.diagnostics import batch_means

    bm = batch_means(lat)
    assert abs(bm.estimate) < 4 * bm.std_error


def test_halving_delta_is_consistent():
    from stereomcmc.diagnostics import batch_means

    d = 2
    target = gaussian_target(np.zeros(d))
    p = Precondition.isotropic(d)
    z, v = _phase(p, make_rng(12), np.full(d, 0.1))
    coarse = sbps_run(z, v, 2000.0, SbpsConfig(delta=0.2), p, target, make_rng(13), record_events=False)
    fine = sbps_run(z, v, 2000.0, SbpsConfig(delta=0.1), p, target, make_rng(13), record_events=False)
    f = lambda x: x[:, 0] ** 2
    a = path_integral_estimator(coarse.skeleton, f)
    b = path_integral_estimator(fine.skeleton, f)
    se = batch_means(f(fine.skeleton.x)).std_error
    assert abs(a - b) < se
