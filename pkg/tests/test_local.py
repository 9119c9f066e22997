import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmoscope.local import (HopfType, LocalAnalysisError, canard_coefficient, entry_exit,
                            hopf_criticality, jacobian_eigenvalues, lambda_sh,
                            lambda_sh_numeric, landmarks, m2_abscissa, mu_sh, reflect,
                            sector_exit)
from mmoscope.model import KoperParams, NormalFormParams, PhiSpec, koper_to_normal_form

# frozen from tools/derive_oracles.py (scipy brentq / quad, no package code)
ORACLE_K4_X_DH = 0.0033389074849297933
ORACLE_K4_X_DN = (-0.06770782520313136, 0.06547694874158734)
ORACLE_EXIT_PHI0 = {1e-3: 0.004339242046892533, 2e-2: 0.023473594485901347}
ORACLE_LAMBDA_SH_FULL_K44 = 2.3853425524167173


def nf(k, lam=0.0, eps_hat=0.01):
    return koper_to_normal_form(KoperParams(k, lam, eps_hat))


def const_flow(mu=0.5):
    return nf(-4.0).replace(phi=PhiSpec(), mu=mu)


class TestEigenvalues:
    def test_eps_zero_collapses_to_fast_derivative(self):
        p = nf(-4.0).replace(eps=0.0)
        ev = jacobian_eigenvalues(p, -1.0)
        assert sorted([ev.nu1.real, ev.nu2.real]) == pytest.approx([-2.25, 0.0])

    def test_discriminant_vanishes_at_numeric_nodes(self):
        p = nf(-4.0)
        lm = landmarks(p, "minus", "numeric")
        for x in (lm.x_DN_minus, lm.x_DN_plus):
            assert abs(jacobian_eigenvalues(p, x).discriminant) <= 1e-6

    def test_trace_zero_near_leading_order_hopf(self):
        p = nf(-4.0)
        x = -p.beta * p.eps / (2 * p.f2)
        assert abs(jacobian_eigenvalues(p, x).trace) <= 10 * p.eps**2


class TestLandmarks:
    def test_numeric_against_oracle(self):
        lm = landmarks(nf(-4.0), "minus", "numeric")
        assert lm.x_DH == pytest.approx(ORACLE_K4_X_DH, abs=1e-12)
        assert (lm.x_DN_minus, lm.x_DN_plus) == pytest.approx(ORACLE_K4_X_DN, abs=1e-12)

    def test_z_dh_leading_order_value(self):
        assert landmarks(nf(-4.0), "minus", "asymptotic").z_DH == pytest.approx(1 / 300)

    def test_asymptotic_nodes_close_to_numeric(self):
        p = nf(-4.0)
        a, n = landmarks(p, "minus", "asymptotic"), landmarks(p, "minus", "numeric")
        # next correction is O(eps^(3/2)) in x
        assert abs(a.x_DN_minus - n.x_DN_minus) <= 5 * p.eps**1.5 / p.f2**2
        assert abs(a.x_DN_plus - n.x_DN_plus) <= 5 * p.eps**1.5 / p.f2**2

    def test_hopf_error_is_second_order(self):
        errs = []
        for eh in (0.01, 0.005):
            p = nf(-4.4, 1.5, eh)
            errs.append(abs(landmarks(p, mode="numeric").x_DH - landmarks(p, mode="asymptotic").x_DH))
        assert 3.0 <= errs[0] / errs[1] <= 5.0

    def test_canard_offset_vanishes_at_k_minus_4(self):
        assert canard_coefficient(nf(-4.0)) == 0.0
        lm = landmarks(nf(-4.0), "minus", "numeric")
        assert lm.z_CN == lm.z_DH

    @pytest.mark.parametrize("mode", ["numeric", "asymptotic"])
    def test_collapse_as_eps_vanishes(self, mode):
        lm = landmarks(nf(-4.5, 0.0, 1e-8), "minus", mode)
        assert max(abs(lm.x_DH), abs(lm.z_DH), abs(lm.z_CN)) < 1e-6

    def test_plus_side_mirrors_minus_on_koper(self):
        p = nf(-4.5, 1.5)
        lm, lp = landmarks(p, "minus"), landmarks(p, "plus")
        xm = 2.0
        assert lp.x_DH == pytest.approx(xm - lm.x_DH, abs=1e-12)
        assert lp.z_DH == pytest.approx(p.G(xm) - lm.z_DH, abs=1e-12)

    def test_intervals_are_ordered(self):
        lm = landmarks(nf(-4.5))
        lo, hi = lm.interval_spiral
        assert lo < hi == lm.interval_canard[0] <= lm.interval_canard[1]

    def test_bad_side(self):
        with pytest.raises(ValueError):
            landmarks(nf(-4.5), "middle")


class TestHopf:
    @pytest.mark.parametrize("k,kind", [(-4.5, HopfType.SUPERCRITICAL),
                                        (-4.0, HopfType.DEGENERATE),
                                        (-3.6, HopfType.SUBCRITICAL)])
    def test_criticality(self, k, kind):
        assert hopf_criticality(nf(k)) is kind

    def test_singular_mu_values(self):
        assert mu_sh(nf(-4.0), "minus") == 0.0
        assert mu_sh(nf(-4.0), "plus") == pytest.approx(1.0)

    def test_corrected_mu_is_order_eps(self):
        p = nf(-4.4)
        assert abs(mu_sh(p, "minus", "eps_corrected")) <= 3 * p.eps

    def test_lambda_sh_closed_form(self):
        assert lambda_sh(KoperParams(-4.4, 0.0, 0.01)) == pytest.approx(2.4 - 4.4 * 0.01 / 3)
        assert lambda_sh(KoperParams(-2.0, 0.0, 0.0)) == 0.0

    def test_lambda_sh_against_full_equilibrium_oracle(self):
        kp = KoperParams(-4.4, 0.0, 0.01)
        assert abs(lambda_sh(kp) - ORACLE_LAMBDA_SH_FULL_K44) <= 0.01**2
        assert lambda_sh_numeric(kp) == pytest.approx(ORACLE_LAMBDA_SH_FULL_K44, abs=1e-8)

    @given(st.floats(-8, -0.5), st.floats(0, 0.05))
    def test_lambda_sh_odd_in_side(self, k, eh):
        kp = KoperParams(k, 0.0, eh)
        assert lambda_sh(kp, "plus") == -lambda_sh(kp, "minus")


class TestEntryExit:
    def test_zero_length(self):
        p = const_flow()
        x = landmarks(p).x_DH
        r = entry_exit(p, x)
        assert r.x_out == x

    @pytest.mark.parametrize("d", sorted(ORACLE_EXIT_PHI0))
    def test_constant_flow_against_oracle(self, d):
        p = const_flow()
        x = landmarks(p).x_DH
        assert entry_exit(p, x - d).x_out == pytest.approx(ORACLE_EXIT_PHI0[d], abs=1e-10)

    @given(st.floats(1e-6, 1e-3))
    def test_constant_flow_is_symmetric_about_hopf(self, d):
        p = const_flow()
        x = landmarks(p).x_DH
        r = entry_exit(p, x - d)
        # the cubic term breaks symmetry at second order in d
        assert abs((r.x_out - x) - d) <= 0.5 * d**2 + 1e-10

    def test_nodal_entry_overshoot_vanishes_with_eps(self):
        # x_out < x_DN+ + o(1): the overshoot past the far node shrinks with eps
        excess = []
        for eh in (0.04, 0.01, 0.0025, 0.000625):
            p = nf(-4.0, 0.0, eh).replace(phi=PhiSpec(), mu=0.5)
            excess.append(entry_exit(p, -0.3).x_out - landmarks(p).x_DN_plus)
        assert all(b < a for a, b in zip(excess, excess[1:]))
        assert excess[-1] < excess[0] / 5

    def test_entry_beyond_hopf(self):
        p = const_flow()
        with pytest.raises(LocalAnalysisError):
            entry_exit(p, landmarks(p).x_DH + 0.01)

    def test_slow_flow_vanishing(self):
        p = nf(-4.4, 1.5)
        # the Koper slow flow mu - F - G vanishes near the origin for mu ~ 0
        q = p.replace(mu=1e-4)
        with pytest.raises(LocalAnalysisError, match="slow flow vanishes on path"):
            entry_exit(q, -0.3)

    def test_plus_side_mirror(self):
        p = const_flow()
        xm = 2.0
        xl = landmarks(p).x_DH
        lo = entry_exit(p, xl - 1e-3).x_out
        q = reflect(reflect(p))
        assert q == p
        hi = entry_exit(p, xm - (xl - 1e-3), side="plus").x_out
        # phi = 0 keeps mu + phi constant on both sides, up to its sign
        assert xm - hi == pytest.approx(lo, abs=1e-12)


class TestSectorExit:
    def test_equals_hopf_level_at_k_minus_4(self):
        p = nf(-4.0)
        assert sector_exit(p) == landmarks(p).z_DH

    def test_equals_canard_plane(self):
        p = nf(-4.5)
        assert sector_exit(p) == landmarks(p).z_CN

    def test_vanishes_with_eps(self):
        assert abs(sector_exit(nf(-4.5, 0.0, 1e-9))) < 1e-7


@given(st.floats(-1e-3, 1e-3))
def test_m2_abscissa_inverts_g(z):
    p = nf(-4.5)
    x = m2_abscissa(p, z, 0.0)
    assert p.G(x) == pytest.approx(z, abs=1e-14)


def test_reflect_is_an_involution():
    p = nf(-4.5, 1.5)
    q = reflect(reflect(p))
    assert q.mu == p.mu and q.phi == p.phi


def test_reflected_phi_vanishes_at_the_reflected_origin():
    p = nf(-4.0, 0.0)
    q = reflect(p)
    assert q.slow(0.0, 0.0, 0.0) == pytest.approx(-p.slow(2.0, p.F(2.0), p.G(2.0)))
    assert isinstance(q, NormalFormParams)
    assert np.isfinite(q.mu)
