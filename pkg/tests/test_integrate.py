import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmoscope.integrate import (IntegrationError, IntegratorConfig, as_system,
                                default_horizon, default_initial_state, find_equilibrium,
                                integrate, trajectory_from_samples, transient_strip)
from mmoscope.local import lambda_sh_numeric
from mmoscope.model import KoperParams, ModelError, NormalFormParams, PhiSpec

# frozen from tools/derive_oracles.py (scipy fsolve / solve_ivp, no package code)
ORACLE_K22_EQ = -1.37508017
ORACLE_K22_EIGS = (-266.42, -2.8356, -6.4498e-3)
ORACLE_RELAX_PERIOD_K54 = 1.3564131503776165

ACCEPTANCE_POINTS = [(-2.2, 1.5), (-3.6, 1.5), (-4.4, 1.5), (-5.4, 1.5),
                     (-4.5, 2.0), (-4.0, 0.0), (-4.5, 0.0)]


def normal(mu=0.0, phi=None, eps=0.01, delta=0.01):
    return NormalFormParams(0.75, -0.25, 1.0, -2.0, mu, eps, delta,
                            PhiSpec.koper() if phi is None else phi)


@pytest.fixture(scope="module")
def steady_run():
    kp = KoperParams(-2.2, 1.5, 0.01, 0.01)
    return integrate(kp, default_initial_state(kp), (0.0, default_horizon(kp)))


@pytest.fixture(scope="module")
def relaxation_run():
    kp = KoperParams(-5.4, 1.5, 0.01, 0.01)
    return kp, transient_strip(integrate(kp, default_initial_state(kp), (0.0, 400.0)))


class TestConfig:
    @pytest.mark.parametrize("kw", [{"rel_tol": 0.0}, {"abs_tol": -1.0},
                                    {"min_step": 2.0, "max_step": 1.0}, {"stride": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)

    def test_defaults(self):
        cfg = IntegratorConfig()
        assert (cfg.rel_tol, cfg.abs_tol) == (1e-8, 1e-10)


class TestIntegrate:
    def test_steady_state_converges(self, steady_run):
        assert steady_run.terminal_speed() <= 1e-8
        np.testing.assert_allclose(steady_run.y[-1], ORACLE_K22_EQ, atol=1e-6)

    def test_time_strictly_increasing_and_finite(self, steady_run):
        assert np.all(np.diff(steady_run.t) > 0)
        assert np.all(np.isfinite(steady_run.y))

    def test_equilibrium_is_left_alone(self):
        tr = integrate(normal(phi=PhiSpec()), [0.0, 0.0, 0.0], (0.0, 100.0))
        assert np.max(np.abs(tr.y)) == 0.0

    @pytest.mark.parametrize("k,lam", ACCEPTANCE_POINTS)
    def test_self_convergence_over_a_fixed_horizon(self, k, lam):
        # restarted every time unit so the sup-norm is taken on a shared grid;
        # horizons past a few canard passages amplify differences exponentially
        kp = KoperParams(k, lam, 0.01, 0.01)
        rtol = 1e-8
        a = b = default_initial_state(kp)
        worst = 0.0
        for t0 in range(20):
            a = integrate(kp, a, (t0, t0 + 1.0), IntegratorConfig(rel_tol=rtol)).y[-1]
            b = integrate(kp, b, (t0, t0 + 1.0), IntegratorConfig(rel_tol=rtol / 10)).y[-1]
            worst = max(worst, float(np.max(np.abs(a - b))))
        assert worst <= 50 * rtol

    def test_halving_tolerance_changes_terminal_state_little(self):
        kp = KoperParams(-4.4, 1.5, 0.01, 0.01)
        s0 = default_initial_state(kp)
        a = integrate(kp, s0, (0.0, 10.0), IntegratorConfig(rel_tol=1e-8)).y[-1]
        b = integrate(kp, s0, (0.0, 10.0), IntegratorConfig(rel_tol=5e-9)).y[-1]
        assert np.max(np.abs(a - b)) <= 10 * 1e-8

    def test_deterministic(self):
        kp = KoperParams(-4.4, 1.5, 0.01, 0.01)
        s0 = default_initial_state(kp)
        a = integrate(kp, s0, (0.0, 30.0))
        b = integrate(kp, s0, (0.0, 30.0))
        np.testing.assert_array_equal(a.t, b.t)
        np.testing.assert_array_equal(a.y, b.y)

    def test_max_steps_keeps_partial_trajectory(self):
        kp = KoperParams(-4.4, 1.5, 0.01, 0.01)
        with pytest.raises(IntegrationError, match="max_steps") as ei:
            integrate(kp, default_initial_state(kp), (0.0, 100.0),
                      IntegratorConfig(max_steps=50))
        assert ei.value.partial is not None
        assert np.all(np.isfinite(ei.value.last_state))
        assert ei.value.partial.t[-1] < 100.0

    def test_bad_initial_state(self):
        with pytest.raises(ModelError):
            integrate(normal(), [0.0, np.nan, 0.0], (0.0, 1.0))

    def test_bad_span(self):
        with pytest.raises(ValueError):
            integrate(normal(), [0.0, 0.0, 0.0], (1.0, 1.0))

    def test_non_affine_phi_runs_uncompiled(self):
        p = normal(mu=0.2, phi=PhiSpec(func=lambda x, y, z: -y - z + 0.0 * x * x))
        sys_ = as_system(p)
        assert not sys_.compiled
        ref = integrate(normal(mu=0.2), [-1.0, 0.5, 0.1], (0.0, 2.0))
        tr = integrate(sys_, [-1.0, 0.5, 0.1], (0.0, 2.0))
        np.testing.assert_allclose(tr.y[-1], ref.y[-1], atol=1e-12)


class TestEvents:
    def test_extrema_are_stationary_to_1e_10_in_time(self, relaxation_run):
        kp, tr = relaxation_run
        sys_ = tr.system
        for s in tr.extrema_y:
            f = sys_.f(s)
            xdd = sys_.J(s)[0] @ f
            assert abs(f[0] / xdd) <= 1e-10

    def test_relaxation_period_against_oracle(self, relaxation_run):
        # same protocol as the oracle: start, horizon, downward section, last 9 periods
        kp, _ = relaxation_run
        tr = integrate(kp, [-2.0, 0.1, -0.6], (0.0, 400.0), section=0.0)
        te = tr.section_t[tr.section_dir == -1]
        assert np.mean(np.diff(te[-10:])) == pytest.approx(ORACLE_RELAX_PERIOD_K54, rel=1e-7)

    def test_two_extrema_per_relaxation_period(self, relaxation_run):
        _, tr = relaxation_run
        assert np.all(np.diff(tr.extrema_kind) != 0)
        assert len(tr.extrema_t) / (tr.span / ORACLE_RELAX_PERIOD_K54) == pytest.approx(2, abs=0.1)

    def test_section_crossings_alternate(self, relaxation_run):
        kp, _ = relaxation_run
        tr = integrate(kp, default_initial_state(kp), (0.0, 20.0), section=0.0)
        assert len(tr.section_t) > 10
        assert np.all(np.diff(tr.section_dir) != 0)
        np.testing.assert_allclose(tr.section_y[:, 0], 0.0, atol=1e-9)


class TestFromSamples:
    def test_sine_extrema(self):
        t = np.linspace(0.0, 4 * np.pi, 4001)[:-1]
        y = np.column_stack([np.sin(t), np.cos(t), np.zeros_like(t)])
        tr = trajectory_from_samples(normal(), t, y)
        np.testing.assert_allclose(tr.extrema_t, [np.pi / 2, 3 * np.pi / 2, 5 * np.pi / 2,
                                                  7 * np.pi / 2], atol=1e-6)
        assert list(tr.extrema_kind) == [1, -1, 1, -1]

    def test_monotone_has_no_extrema(self):
        t = np.linspace(0.0, 5.0, 50)
        y = np.column_stack([np.exp(-t), t, t])
        assert len(trajectory_from_samples(normal(), t, y).extrema_t) == 0

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            trajectory_from_samples(normal(), np.arange(3.0), np.zeros((3, 2)))

    def test_round_trip_of_a_simulated_run(self, relaxation_run):
        _, tr = relaxation_run
        back = trajectory_from_samples(tr.system, tr.t, tr.y)
        assert len(back.extrema_t) == len(tr.extrema_t)
        np.testing.assert_allclose(back.extrema_t, tr.extrema_t, atol=1e-3)


class TestEquilibrium:
    def test_steady_state_oracle(self):
        rep = find_equilibrium(KoperParams(-2.2, 1.5, 0.01, 0.01), [-1.0, -1.0, -1.0])
        assert rep.stable and rep.residual <= 1e-12
        np.testing.assert_allclose(rep.location, ORACLE_K22_EQ, atol=1e-8)
        np.testing.assert_allclose(sorted(rep.eigenvalues.real), sorted(ORACLE_K22_EIGS),
                                   rtol=1e-4)

    def test_normal_form_origin(self):
        rep = find_equilibrium(normal(), [0.1, 0.1, 0.1])
        np.testing.assert_allclose(rep.location, 0.0, atol=1e-12)

    @pytest.mark.parametrize("eps_hat", [0.01, 0.005, 0.0025])
    def test_hopf_locus_real_part_is_order_eps(self, eps_hat):
        # at lambda = -(2 + k) the critical pair is O(eps_hat) off the axis in fast time
        kp = KoperParams(-4.4, 2.4, eps_hat, 0.01)
        rep = find_equilibrium(kp, [-1.0, -1.0, -1.0])
        pair = rep.eigenvalues[np.abs(rep.eigenvalues.imag) > 0]
        assert len(pair) == 2
        assert abs(pair[0].real) * eps_hat <= 2 * eps_hat

    def test_pair_crosses_at_the_numeric_hopf_value(self):
        kp = KoperParams(-4.4, 0.0, 0.01, 0.01)
        lam = lambda_sh_numeric(kp)
        rep = find_equilibrium(kp.replace(lam=lam), [-1.0, -1.0, -1.0])
        pair = rep.eigenvalues[np.abs(rep.eigenvalues.imag) > 0]
        assert abs(pair[0].real) <= 1e-6

    def test_singular_jacobian_reports_residual(self):
        # phi = 0 leaves the z row empty; mu != 0 also leaves no equilibrium
        with pytest.raises(ModelError, match="singular Jacobian, residual"):
            find_equilibrium(normal(mu=0.3, phi=PhiSpec()), [0.1, 0.0, 0.0])

    def test_divergence_reports_residual(self):
        with pytest.raises(ModelError, match="diverged, residual"):
            find_equilibrium(KoperParams(-4.4, 1.5, 0.01, 0.01), [3.0, 5.0, -4.0], max_iter=2)


class TestTransientStrip:
    @pytest.fixture
    def tr(self):
        return integrate(normal(mu=0.1), [-1.0, normal().F(-1.0), 0.1], (0.0, 10.0))

    def test_zero_drop_returns_input(self, tr):
        assert transient_strip(tr, 0.0) is tr

    def test_full_drop_is_an_error(self, tr):
        with pytest.raises(ValueError, match="empty tail"):
            transient_strip(tr, 1.0)

    def test_default_drops_thirty_percent(self, tr):
        out = transient_strip(tr)
        assert out.t[0] >= 3.0
        # the first kept sample is the first step end past the cut
        assert out.span == pytest.approx(0.7 * tr.span, abs=np.max(np.diff(tr.t)))

    def test_absolute_time(self, tr):
        assert transient_strip(tr, time=4.0).t[0] >= 4.0

    @settings(max_examples=20)
    @given(st.floats(0.01, 0.95))
    def test_fraction_property(self, f):
        tr = integrate(normal(mu=0.1), [-1.0, normal().F(-1.0), 0.1], (0.0, 10.0))
        out = transient_strip(tr, f)
        assert out.t[0] >= f * 10.0 and out.t[-1] == tr.t[-1]
