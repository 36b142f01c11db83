import math

import numpy as np
import pytest

import erdob
from erdob import controller as ctl
from erdob import linalg
from erdob.plant import builtin_scenario


def test_tracking_error_zero():
    x = np.array([1.0, 2.0])
    assert np.array_equal(ctl.tracking_error(x, x), np.zeros(2))


def test_tracking_error_example1_start():
    scenario = builtin_scenario("example1")
    e = ctl.tracking_error(np.zeros(2), scenario.reference.x_d(0.0))
    assert np.array_equal(e, np.array([0.0, -4.0]))


def test_tracking_error_linearity():
    rng = np.random.default_rng(51)
    x = rng.normal(size=3)
    xd = rng.normal(size=3)
    delta = rng.normal(size=3)
    got = ctl.tracking_error(x + delta, xd) - ctl.tracking_error(x, xd)
    assert np.abs(got - delta).max() < 1e-15


def test_tracking_error_dimension_check():
    with pytest.raises(ValueError):
        ctl.tracking_error(np.zeros(2), np.zeros(3))


def test_sliding_surface_at_start_equals_error():
    e = np.array([0.4, -0.1])
    assert np.array_equal(ctl.sliding_surface(e, np.zeros(2)), e)


def test_sliding_surface_constant_error_integral():
    e = np.array([1.0])
    e_I = np.zeros(1)
    h = 1e-4
    for k in range(int(1.0 / h)):
        e_I = linalg.rk4_step(lambda t, v: ctl.switching_sign(e), k * h, e_I, h)
    sigma = ctl.sliding_surface(e, e_I)
    assert abs(sigma[0] - 2.0) < 1e-6


def test_adaptive_gain_limits():
    eb = np.array([0.5, 0.5])
    assert ctl.adaptive_gain(0.1, 1.0, eb, 1e9, 1.0) == pytest.approx(0.1)
    assert ctl.adaptive_gain(0.1, 1.0, np.zeros(2), 0.0, 1.0) == pytest.approx(0.1)


def test_adaptive_gain_arithmetic():
    eb = np.array([2.0, 0.0])
    got = ctl.adaptive_gain(0.1, 1.0, eb, 0.5, 4.0)
    assert got == pytest.approx(0.1 + 2.0 * math.exp(-2.0), rel=1e-12)


def test_switching_sign_conventions():
    v = np.array([-0.2, 0.0, 3.0])
    assert np.array_equal(ctl.switching_sign(v), np.array([-1.0, 0.0, 1.0]))
    smooth = ctl.switching_sign(v, boundary_layer=0.1)
    assert np.abs(smooth - np.tanh(v / 0.1)).max() == 0.0


def test_itsmc_explicit_form_identity_input_map():
    plant = builtin_scenario("example1").plant
    rng = np.random.default_rng(52)
    x = rng.normal(size=2)
    xd_dot = rng.normal(size=2)
    e_x = rng.normal(size=2)
    sigma = rng.normal(size=2)
    eps_T_hat = rng.normal(size=2)
    k = 0.7
    got = ctl.itsmc_control(plant, x, xd_dot, e_x, sigma, eps_T_hat, k)
    want = (-plant.f(x) + xd_dot - eps_T_hat
            - np.sign(e_x) - k * np.sign(sigma))
    assert np.abs(got - want).max() < 1e-14


def test_itsmc_gain_linearity():
    plant = builtin_scenario("example1").plant
    rng = np.random.default_rng(53)
    args = (rng.normal(size=2), rng.normal(size=2), rng.normal(size=2),
            rng.normal(size=2), rng.normal(size=2))
    k = 0.4
    u1 = ctl.itsmc_control(plant, *args, k)
    u2 = ctl.itsmc_control(plant, *args, 2.0 * k)
    sigma = args[3]
    assert np.abs((u2 - u1) + k * np.sign(sigma)).max() < 1e-14


def test_itsmc_preserves_perfect_tracking():
    plant = builtin_scenario("example1").plant
    scenario = builtin_scenario("example1")
    t = 1.3
    x = scenario.reference.x_d(t)
    xd_dot = scenario.reference.xd_dot(t)
    eps_T = np.array([0.2, -0.6])
    u = ctl.itsmc_control(plant, x, xd_dot, np.zeros(2), np.zeros(2), eps_T, 0.5)
    xdot = plant.rhs(x, u, eps_T)
    assert np.abs(xdot - xd_dot).max() < 1e-13


def test_pre_rich_perfect_estimate_keeps_reference_rate():
    plant = builtin_scenario("example1").plant
    scenario = builtin_scenario("example1")
    t = 0.4
    x = scenario.reference.x_d(t)
    xd_dot = scenario.reference.xd_dot(t)
    eps_T = np.array([1.0, 0.0])
    u = ctl.pre_rich_control(plant, x, xd_dot, np.zeros(2), eps_T, hslash=5.0)
    xdot = plant.rhs(x, u, eps_T)
    assert np.abs(xdot - xd_dot).max() < 1e-13


def test_pre_rich_pure_decay_without_estimation_error():
    # square input map, exact disturbance knowledge: de/dt = -hslash e
    plant = builtin_scenario("example1").plant
    scenario = builtin_scenario("example1")
    hslash = 5.0
    h = 1e-3
    e = np.array([1.0, -0.5])
    eps_T = np.array([0.3, 0.1])
    for k in range(1000):
        t = k * h

        def rhs(tt, ev):
            x = scenario.reference.x_d(tt) + ev
            u = ctl.pre_rich_control(plant, x, scenario.reference.xd_dot(tt), ev, eps_T, hslash)
            return plant.rhs(x, u, eps_T) - scenario.reference.xd_dot(tt)

        e = linalg.rk4_step(rhs, t, e, h)
    want = math.exp(-hslash) * np.array([1.0, -0.5])
    assert np.abs(e - want).max() < 1e-6


def test_config_requires_admissible_gain():
    plant = builtin_scenario("example2").plant
    with pytest.raises(ValueError, match=r"k1 >= \|\|F\|\|\*\|\|D\|\|"):
        ctl.ControllerConfig(k1=0.5).resolve_k1(plant)
    floor = linalg.spectral_norm(plant.dist_pinv) * linalg.spectral_norm(plant.dist_map)
    assert ctl.ControllerConfig().resolve_k1(plant) == pytest.approx(floor)


def test_gain_floor_along_run(ex1_replay_30):
    trace, _ = ex1_replay_30
    assert np.all(trace.k_gain >= trace.config.k0 - 1e-12)


def test_gain_envelope_decays_after_switch(ex1_replay_30):
    trace, _ = ex1_replay_30
    k0 = trace.config.k0
    t_sw = trace.switch_time
    run_max = np.maximum.accumulate(np.linalg.norm(trace.eps_bar, axis=1))
    after = trace.t >= t_sw + 1.0
    envelope = run_max[after] * np.exp(-trace.lam1[after] * (trace.t[after] - t_sw))
    excess = trace.k_gain[after] - k0
    assert np.all(excess <= envelope + 1e-12)
    assert np.all(np.diff(envelope) <= 1e-12)


@pytest.mark.parametrize(
    "fixture_name",
    [
        "ex1_replay_30",
        pytest.param(
            "ex2_replay_30",
            marks=pytest.mark.xfail(
                strict=True,
                reason="second disturbance channel drives the unactuated position "
                       "kinematics, so two surface components are uncontrollable",
            ),
        ),
    ],
)
def test_finite_time_reaching_and_containment(fixture_name, request):
    trace, _ = request.getfixturevalue(fixture_name)
    met = erdob.metrics(trace)
    assert met.reach_time is not None
    assert met.reach_time < trace.t[-1] - 5.0
    after = trace.t >= met.reach_time
    assert trace.sigma_norm[after].max() < 2e-2


def test_sliding_phase_error_slope():
    # force a switch while the tracking error is still large: a slow
    # collection-phase gain keeps the error big until richness, and a large
    # floor gain makes the surface reach zero while the error is nonzero,
    # leaving a clean unit-slope decay segment to measure
    cfg = erdob.SimConfig(
        scenario="example1", t_end=8.0, mode="replay",
        t0=0.5, hslash=0.3, k0=3.0, x0=np.array([2.0, -3.0]),
    )
    trace = erdob.run(cfg)
    met = erdob.metrics(trace)
    assert met.reach_time is not None
    start = int(round((met.reach_time + 0.05) / trace.step))
    for i in range(2):
        err = np.abs(trace.e_x[start:, i])
        inside = np.flatnonzero(err < 0.02)
        assert inside.size > 0
        stop = inside[0]
        if stop < 200:      # already inside the band at reaching
            continue
        seg = err[:stop]
        tseg = trace.t[start:start + stop]
        slope = (seg[0] - seg[-1]) / (tseg[-1] - tseg[0])
        assert slope >= 0.9
        # once inside the band, it stays inside
        assert err[stop:].max() < 0.02 + 1e-6
