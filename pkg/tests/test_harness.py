import csv
import json
import math

import pytest

from mmoscope.drift import lambda_r
from mmoscope.harness import (DIAGRAM_COLUMNS, FAILED, GridSpec, PointResult, SweepResult,
                              boundary_curves, emit_diagram, sweep_hh, sweep_koper)
from mmoscope.integrate import IntegratorConfig
from mmoscope.local import lambda_sh
from mmoscope.model import HHParams, KoperParams

# short horizons keep these runs at a few seconds; labels are not asserted on them
SMALL = dict(eps_hat=0.01, delta=0.01, horizon=400.0)


class TestGridSpec:
    def test_axes_include_both_ends(self):
        g = GridSpec(-5.5, -2.5, 0.25, -3.0, 3.0, 0.5)
        assert len(g.k_values) == 13 and len(g.lam_values) == 13
        assert g.k_values[-1] == -2.5 and g.lam_values[0] == -3.0
        assert len(g.points()) == 169

    @pytest.mark.parametrize("args", [
        (-5.0, -4.0, 0.0, -1.0, 1.0, 0.5),
        (-5.0, -4.0, 0.5, -1.0, 1.0, -0.5),
        (-4.0, -5.0, 0.5, -1.0, 1.0, 0.5),
        (-5.0, -4.0, 0.5, 1.0, -1.0, 0.5),
        (-1.0, 0.5, 0.5, -1.0, 1.0, 0.5),
    ])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            GridSpec(*args)


class TestOverlays:
    def test_sampled_at_grid_k(self):
        g = GridSpec(-5.0, -3.0, 0.5, 0.0, 0.0, 1.0)
        b = boundary_curves(g.k_values)
        assert b["k"] == list(g.k_values)
        assert b["divider_k"] == -4.0

    def test_values(self):
        b = boundary_curves([-4.5, -3.5])
        assert b["lambda_sh_minus"][0] == lambda_sh(KoperParams(-4.5, 0.0, 0.01))
        assert b["lambda_r_minus"][0] == lambda_r(KoperParams(-4.5, 0.0, 0.01))
        assert math.isnan(b["lambda_r_minus"][1])
        assert b["lambda_sh_plus"] == [-v for v in b["lambda_sh_minus"]]


class TestEmitDiagram:
    def test_empty_sweep_is_header_only(self, tmp_path):
        res = SweepResult(None, [], boundary_curves([]))
        path, side = emit_diagram(res, tmp_path / "d.csv")
        assert path.read_text().splitlines() == [",".join(DIAGRAM_COLUMNS)]
        assert json.loads(side.read_text())["failures"] == []

    def test_one_point_one_row(self, tmp_path):
        g = GridSpec(-4.5, -4.5, 0.1, 0.0, 0.0, 0.1, **SMALL)
        res = sweep_koper(g, workers=1)
        path, side = emit_diagram(res, tmp_path / "d.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == list(DIAGRAM_COLUMNS) and len(rows) == 2
        assert float(rows[1][0]) == -4.5 and float(rows[1][1]) == 0.0
        over = json.loads(side.read_text())
        assert over["k"] == [-4.5]

    def test_nan_overlays_become_null(self, tmp_path):
        res = SweepResult(None, [], boundary_curves([-3.5]))
        _, side = emit_diagram(res, tmp_path / "d.csv")
        assert json.loads(side.read_text())["lambda_r_minus"] == [None]

    def test_failures_listed(self, tmp_path):
        res = SweepResult(None, [PointResult(-4.5, 0.0, FAILED, "", 0.1, "boom")], {})
        path, side = emit_diagram(res, tmp_path / "d.csv")
        assert list(csv.reader(path.open()))[1][2] == FAILED
        assert json.loads(side.read_text())["failures"][0]["error"] == "boom"


@pytest.fixture(scope="module")
def small_grid():
    return GridSpec(-4.6, -4.2, 0.4, -1.0, 1.0, 1.0, **SMALL)


class TestSweep:
    def test_every_point_has_one_record(self, small_grid):
        res = sweep_koper(small_grid, workers=1)
        assert [(p.k, p.lam) for p in res.points] == small_grid.points()

    def test_deterministic(self, small_grid, tmp_path):
        a = emit_diagram(sweep_koper(small_grid, workers=1), tmp_path / "a.csv")[0]
        b = emit_diagram(sweep_koper(small_grid, workers=1), tmp_path / "b.csv")[0]
        assert a.read_text() == b.read_text()

    def test_parallel_matches_serial(self, small_grid):
        s = sweep_koper(small_grid, workers=1)
        p = sweep_koper(small_grid, workers=2)
        assert [(r.k, r.lam, r.regime, r.farey) for r in s.points] == \
               [(r.k, r.lam, r.regime, r.farey) for r in p.points]

    def test_point_failure_is_recorded(self):
        g = GridSpec(-4.5, -4.5, 0.1, 0.0, 0.0, 0.1, eps_hat=0.01, delta=0.01,
                     integrator=IntegratorConfig(max_steps=10), horizon=100.0)
        res = sweep_koper(g, workers=1)
        assert res.points[0].regime == FAILED and "max_steps" in res.points[0].error


class TestSweepHH:
    def test_labels_per_current(self):
        res = sweep_hh([27.0, 30.0], HHParams(0.0), horizon=600.0, workers=1)
        assert [r.current for r in res] == [27.0, 30.0]
        assert all(r.error is None for r in res)

    def test_failure_recorded(self):
        res = sweep_hh([27.0], HHParams(0.0), cfg=IntegratorConfig(max_steps=5),
                       horizon=100.0, workers=1)
        assert res[0].regime == FAILED


# ------------------------------------------------------------ coarse diagram


@pytest.fixture(scope="module")
def coarse():
    """13 x 13 grid over k in [-5.5, -2.5], lambda in [-3, 3]."""
    return sweep_koper(GridSpec(-5.5, -2.5, 0.25, -3.0, 3.0, 0.5))


def _wedge(k, lam):
    return abs(lam) < lambda_sh(KoperParams(k, 0.0, 0.01))


@pytest.mark.slow
class TestCoarseDiagram:
    def test_no_failures(self, coarse):
        assert [p for p in coarse.points if p.error] == []

    def test_steady_outside_the_wedge(self, coarse):
        for p in coarse.points:
            if abs(p.lam) > lambda_sh(KoperParams(p.k, 0.0, 0.01)):
                assert p.regime == "SteadyState", (p.k, p.lam, p.regime)

    def test_divider_consistency(self, coarse):
        for p in coarse.points:
            if not _wedge(p.k, p.lam):
                continue
            if p.k < -4.1:
                assert p.regime != "MmoDouble", (p.k, p.lam, p.farey)
            if p.k > -3.9:
                assert not p.regime.startswith("MmoSingle"), (p.k, p.lam, p.farey)

    def test_relaxation_beyond_lambda_r(self, coarse):
        # remote side, inside the wedge, away from lambda_r by more than 5 delta
        for p in coarse.points:
            if p.k < -4.1 and _wedge(p.k, p.lam):
                lr = lambda_r(KoperParams(p.k, 0.0, 0.01))
                if abs(p.lam) < lr - 0.05:
                    assert p.regime.startswith("Relaxation"), (p.k, p.lam, p.farey)
                elif abs(p.lam) > lr + 0.05:
                    assert p.regime.startswith("Mmo"), (p.k, p.lam, p.farey)

    def test_symmetric_in_lambda(self, coarse):
        from mmoscope.classify import Regime, mirror_label
        lab = coarse.labels()
        for (k, lam), r in lab.items():
            assert lab[(k, -lam)] == mirror_label(Regime(r)).value, (k, lam)
