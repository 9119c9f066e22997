import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmoscope.geometry import (BranchStability, Config, CubicF, CubicG, FoldPointSide,
                               GeometryError, branch_stability, classify_relative_config,
                               drift_endpoints, fold_lines, fold_point_side,
                               folded_singularities, geometry_report, m2_fold_points,
                               singular_cycle)
from mmoscope.model import KoperParams, NormalFormParams, PhiSpec, koper_to_normal_form


def nf(k, lam=0.0):
    return koper_to_normal_form(KoperParams(k, lam))


def generic(f2=0.75, f3=-0.25, alpha=1.0, beta=-2.0):
    return NormalFormParams(f2, f3, alpha, beta, 0.0, 0.01, 0.01, PhiSpec.koper())


f2s = st.floats(0.1, 3.0)
f3s = st.floats(-3.0, -0.1)
ks = st.floats(-9.0, -0.5)


class TestCubics:
    @given(f2s, f3s)
    def test_fold_invariants(self, f2, f3):
        F = CubicF(f2, f3)
        assert F(0.0) == 0.0 and F.deriv(0.0) == 0.0
        assert F.deriv(F.x_fold) == pytest.approx(0.0, abs=1e-12 * max(1, f2**2 / abs(f3)))

    @given(f2s, f3s, st.floats(-2, 2), st.floats(-3, 3))
    def test_g_vanishes_at_origin(self, f2, f3, a, b):
        assert CubicG(a, b, CubicF(f2, f3))(0.0) == 0.0


class TestFolds:
    def test_upper_fold_at_k_minus_4(self):
        assert fold_lines(nf(-4.0))[1] == pytest.approx((2.0, 1.0))

    def test_upper_fold_at_k_minus_6(self):
        assert fold_lines(nf(-6.0))[1] == pytest.approx((2.0, 2 / 3))

    @given(f2s, f3s)
    def test_lower_fold_is_z_axis(self, f2, f3):
        assert fold_lines(generic(f2, f3))[0] == (0.0, 0.0)

    @given(ks)
    def test_folded_singularity_plus_on_koper(self, k):
        qm, qp = folded_singularities(nf(k))
        np.testing.assert_array_equal(qm.location, 0.0)
        a = abs(k)
        np.testing.assert_allclose(qp.location, [2.0, 4 / a, 2 - 8 / a], atol=1e-12)

    def test_singularities_level_at_k_minus_4(self):
        assert folded_singularities(nf(-4.0))[1].z == pytest.approx(0.0, abs=1e-15)


class TestFoldPoints:
    def test_two_points_at_minus_4_5_on_repelling_sheet(self):
        fp = m2_fold_points(nf(-4.5))
        xs = sorted(pt[0] for pt in fp.points)
        assert fp.count == 2
        assert xs == pytest.approx([0.5, 1.5], abs=1e-12)

    def test_double_point_at_minus_6(self):
        fp = m2_fold_points(nf(-6.0))
        assert fp.count == 1 and fp.discriminant == 0.0
        assert fp.points[0][0] == pytest.approx(1.0, abs=1e-12)

    def test_none_beyond_minus_6(self):
        assert m2_fold_points(nf(-7.0)).count == 0

    def test_beta_zero_has_none(self):
        assert m2_fold_points(generic(beta=0.0)).count == 0

    @given(f2s, f3s, st.floats(0.1, 3), st.floats(-3, -0.1))
    def test_points_satisfy_their_defining_equations(self, f2, f3, a, b):
        p = generic(f2, f3, a, b)
        fp = m2_fold_points(p)
        assert fp.count == (2 if fp.discriminant > 0 else (1 if fp.discriminant == 0 else 0))
        for x, y, z in fp.points:
            assert y == pytest.approx(p.F(x), abs=1e-12)
            assert z == pytest.approx(p.G(x), abs=1e-12)
            assert p.dG(x) == pytest.approx(0.0, abs=1e-9 * max(1.0, abs(a)))


class TestBranches:
    def test_koper_outer_attracting(self):
        assert branch_stability(nf(-4.5)) is BranchStability.ATTRACTING_OUTER

    def test_mirror_outer_repelling(self):
        assert branch_stability(generic(beta=2.0, alpha=-1.0)) is BranchStability.REPELLING_OUTER

    def test_beta_zero_is_an_error(self):
        with pytest.raises(GeometryError):
            branch_stability(generic(beta=0.0))

    def test_koper_points_on_repelling_sheet(self):
        assert fold_point_side(nf(-4.5)) is FoldPointSide.BOTH_ON_SR

    def test_alpha_zero_points_on_fold_lines(self):
        assert fold_point_side(generic(alpha=0.0)) is FoldPointSide.ON_FOLD_LINES

    def test_positive_alpha_beta(self):
        p = generic(alpha=1.0, beta=1.0)
        assert m2_fold_points(p).discriminant > 0
        assert fold_point_side(p) is FoldPointSide.ON_SA_MINUS_PLUS


class TestRelativeConfig:
    @pytest.mark.parametrize("k,kind", [(-4.5, Config.REMOTE), (-4.0, Config.ALIGNED),
                                        (-3.6, Config.CONNECTED)])
    def test_koper_trichotomy(self, k, kind):
        assert classify_relative_config(nf(k)).kind is kind

    @given(ks)
    def test_range_test_agrees_with_algebraic_ratio(self, k):
        rc = classify_relative_config(nf(k))
        assert rc.kind is rc.algebraic

    @given(f2s, f3s, st.floats(0.05, 3), st.floats(-3, -0.05))
    def test_routes_agree_on_generic_parameters(self, f2, f3, a, b):
        p = generic(f2, f3, a, b)
        rc = classify_relative_config(p)
        ratio, crit = a / b, 2 * f2**2 / (9 * f3)
        if abs(ratio - crit) > 1e-6:
            assert rc.kind is rc.algebraic

    def test_witnesses_of_a_remote_pair(self):
        rc = classify_relative_config(nf(-4.5))
        assert not (rc.minus_plane_meets_plus and rc.plus_plane_meets_minus)

    def test_witnesses_of_a_connected_pair(self):
        rc = classify_relative_config(nf(-3.6))
        assert rc.minus_plane_meets_plus and rc.plus_plane_meets_minus


class TestSingularCycle:
    def test_aligned_cycle_lies_in_one_plane(self):
        segs = singular_cycle(nf(-4.0))
        assert {s.scale for s in segs} == {"fast", "intermediate"}
        assert all(np.all(s.points[:, 2] == 0.0) for s in segs)

    def test_remote_family_member(self):
        segs = singular_cycle(nf(-4.5), z_level=0.1)
        assert all(np.allclose(s.points[:, 2], 0.1) for s in segs)
        assert {s.scale for s in segs} == {"fast", "intermediate"}

    def test_remote_level_outside_family(self):
        with pytest.raises(GeometryError):
            singular_cycle(nf(-4.5), z_level=0.3)

    def test_connected_cycle_is_three_scale_and_closed(self):
        segs = singular_cycle(nf(-3.6))
        assert "slow" in {s.scale for s in segs}
        for a, b in zip(segs, segs[1:] + segs[:1]):
            np.testing.assert_allclose(a.end, b.start, atol=1e-9)

    @pytest.mark.parametrize("k", [-4.0, -4.5])
    def test_planar_cycles_close(self, k):
        segs = singular_cycle(nf(k))
        for a, b in zip(segs, segs[1:] + segs[:1]):
            np.testing.assert_allclose(a.end, b.start, atol=1e-12)


def test_drift_endpoints_koper():
    assert drift_endpoints(nf(-4.5)) == pytest.approx((2.0, -1.0, 3.0))


def test_report_serialises():
    d = geometry_report(nf(-4.5)).as_dict()
    assert d["relative_config"]["kind"] == "Remote"
    assert d["m2_fold_points"]["count"] == 2
    assert math.isclose(geometry_report(nf(-4.5)).width, 2.0)
