import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlwave.experiments import SolitaryWave, blowup_initial_data, solitary_initial_data
from nlwave.grid_ops import Grid, GridSequence
from nlwave.integrator import (
    BLOWUP,
    COMPLETED,
    UNDERFLOW,
    IntegratorConfig,
    detect_blowup,
    integrate,
    step_rk4,
)
from nlwave.kernels import KernelWeights, kernel_exponential, kernel_triangular
from nlwave.semidiscrete import Problem, SystemState, nonlinearity_linear, nonlinearity_quadratic

zero = lambda x: 0 * x


def scalar_problem(b0=-2.0, v0=1.0, w0=0.5):
    # single point: v'' = b0 v, an oscillator with frequency sqrt(-b0)
    grid = Grid(1.0, 0, 0)
    w = KernelWeights(1.0, 1, [0.0, b0, 0.0])
    return Problem(w, nonlinearity_linear(), grid, GridSequence(grid, [v0]), GridSequence(grid, [w0]))


def oscillator(t, b0=-2.0, v0=1.0, w0=0.5):
    om = math.sqrt(-b0)
    return (v0 * math.cos(om * t) + w0 / om * math.sin(om * t),
            -v0 * om * math.sin(om * t) + w0 * math.cos(om * t))


def solitary_problem(h=0.5, domain=(-30, 30)):
    phi, psi = solitary_initial_data(SolitaryWave.from_speed())
    return Problem.build(kernel_exponential(), nonlinearity_quadratic(), Grid.from_interval(h, *domain), phi, psi)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(method="euler"), dict(method="rk4_fixed"), dict(rel_tol=0), dict(abs_tol=-1),
        dict(t_end=0), dict(blowup_threshold=0), dict(min_step=0), dict(dt=-0.1),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)


class TestStepRK4:
    def test_zero_state(self):
        p = Problem.build(kernel_exponential(), nonlinearity_quadratic(), Grid.symmetric(0.5, 10), zero, zero)
        s = step_rk4(p, p.initial_state(), 0.1)
        assert s.t == 0.1 and not np.any(s.as_vector())

    @pytest.mark.parametrize("dt", [0.1, 0.05, 0.025])
    def test_local_error_fifth_order(self, dt):
        p = scalar_problem()
        s = step_rk4(p, p.initial_state(), dt)
        v, w = oscillator(dt)
        # classical RK4 local error on this oscillator: (om dt)^5/120 times the amplitude
        amp = math.hypot(1.0, 0.5 / math.sqrt(2))
        bound = amp * (math.sqrt(2) * dt) ** 5 / 120 * 1.01
        assert abs(s.v[0] - v) <= bound and abs(s.w[0] - w) <= math.sqrt(2) * bound

    def test_reversibility(self):
        p = solitary_problem(h=1.0)
        s0 = p.initial_state()
        errs = []
        for dt in (0.2, 0.1):
            s1 = step_rk4(p, s0, dt)
            flipped = SystemState(0.0, s1.v, s1.w.with_values(-s1.w.values))
            s2 = step_rk4(p, flipped, dt)
            back = np.concatenate((s2.v.values, -s2.w.values))
            errs.append(np.max(np.abs(back - s0.as_vector())))
        assert errs[1] < errs[0] / 2 ** 4.5

    def test_rejects_nonpositive_dt(self):
        p = scalar_problem()
        with pytest.raises(ValueError):
            step_rk4(p, p.initial_state(), 0.0)


class TestDetectBlowup:
    def test_bounded(self):
        assert detect_blowup([(0.0, 1.0), (1.0, 2.0)], 1e6) is None

    def test_synthetic_pole(self):
        T = 2.0
        trace = [(t, 1 / (T - t)) for t in np.linspace(0, 1.9999999, 50)]
        est = detect_blowup(trace, 1e6, evaluate=lambda t: 1 / (T - t) if t < T else math.inf)
        assert abs(est - (T - 1e-6)) <= 1e-5

    def test_nonfinite_counts_as_crossing(self):
        assert detect_blowup([(0.0, 1.0), (1.0, math.inf)], 1e8) == 1.0

    def test_log_interpolation(self):
        est = detect_blowup([(0.0, 1e2), (1.0, 1e6)], 1e4)
        assert est == pytest.approx(0.5)


class TestIntegrate:
    def test_zero_data(self):
        p = Problem.build(kernel_triangular(), nonlinearity_quadratic(), Grid.symmetric(0.5, 8), zero, zero)
        out = integrate(p, IntegratorConfig(t_end=3.0))
        assert out.status == COMPLETED and out.blowup_time_estimate is None
        assert not np.any(out.final_state.as_vector())

    def test_oscillator_adaptive(self):
        p = scalar_problem()
        out = integrate(p, IntegratorConfig(t_end=10.0, rel_tol=1e-10, abs_tol=1e-10))
        v, w = oscillator(10.0)
        assert out.final_state.t == 10.0
        assert abs(out.final_state.v[0] - v) < 1e-8 and abs(out.final_state.w[0] - w) < 1e-8

    def test_trace_increasing_and_snapshots(self):
        p = solitary_problem(h=1.0)
        out = integrate(p, IntegratorConfig(t_end=4.0, trace_samples=40), t_eval=[1.0, 2.5])
        assert np.all(np.diff(out.trace_t) > 0)
        assert len(out.trace_t) >= 40
        assert set(out.snapshots) >= {1.0, 2.5}
        assert out.snapshots[2.5].t == 2.5

    def test_deterministic(self):
        p = solitary_problem(h=1.0)
        a = integrate(p, IntegratorConfig(t_end=3.0))
        b = integrate(p, IntegratorConfig(t_end=3.0))
        np.testing.assert_array_equal(a.final_state.as_vector(), b.final_state.as_vector())
        np.testing.assert_array_equal(a.trace_linf, b.trace_linf)

    def test_adaptive_matches_fixed(self):
        p = solitary_problem(h=0.5)
        a = integrate(p, IntegratorConfig(t_end=5.0))
        f = integrate(p, IntegratorConfig(method="rk4_fixed", dt=0.005, t_end=5.0))
        assert np.max(np.abs(a.final_state.v.values - f.final_state.v.values)) < 1e-7

    @pytest.mark.parametrize("h", [0.5, 0.1, 0.02])
    def test_no_spatial_stability_limit(self, h):
        p = solitary_problem(h=h, domain=(-20, 20))
        out = integrate(p, IntegratorConfig(method="rk4_fixed", dt=0.01, t_end=1.0))
        assert out.status == COMPLETED
        assert np.max(np.abs(out.final_state.v.values)) < 2.0

    def test_blowup_exp(self):
        phi, psi = blowup_initial_data()
        p = Problem.build(kernel_exponential(), nonlinearity_quadratic(), Grid.from_interval(0.1, -10, 10), phi, psi)
        out = integrate(p, IntegratorConfig(t_end=10.0))
        assert out.status == BLOWUP
        assert out.blowup_time_estimate == pytest.approx(1.804484, rel=0.01)
        assert out.final_state.t <= out.blowup_time_estimate + 1e-6

    def test_underflow_reported(self):
        phi, psi = blowup_initial_data()
        p = Problem.build(kernel_exponential(), nonlinearity_quadratic(), Grid.from_interval(0.1, -10, 10), phi, psi)
        out = integrate(p, IntegratorConfig(t_end=10.0, blowup_threshold=1e300, min_step=1e-4))
        assert out.status == UNDERFLOW
        assert out.blowup_time_estimate is not None

    def test_rk4_temporal_order(self):
        p = solitary_problem(h=0.5)
        T = 2.0

        def run(dt):
            return integrate(p, IntegratorConfig(method="rk4_fixed", dt=dt, t_end=T)).final_state.v.values

        ref = run(0.025 / 8)
        e1 = np.max(np.abs(run(0.05) - ref))
        e2 = np.max(np.abs(run(0.025) - ref))
        assert e1 / e2 >= 2 ** 3.5


@given(st.floats(0.01, 0.5), st.floats(-3, 3), st.floats(-3, 3))
def test_oscillator_energy_drift_small(dt, v0, w0):
    p = scalar_problem(v0=v0, w0=w0)
    s = p.initial_state()
    for _ in range(10):
        s = step_rk4(p, s, dt)
    energy = lambda st_: st_.w[0] ** 2 + 2 * st_.v[0] ** 2
    e0 = w0 ** 2 + 2 * v0 ** 2
    assert abs(energy(s) - e0) <= 10 * (math.sqrt(2) * dt) ** 5 * (e0 + 1e-12) + 1e-12
