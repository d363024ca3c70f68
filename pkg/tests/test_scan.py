import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ceitcool import scan as scan_mod
from ceitcool.model import Axis, ParameterError, SystemParams, mhz
from ceitcool.rates import rates_resolvent
from ceitcool.scan import (
    CSV_COLUMNS,
    ScanAxis,
    ScanError,
    ScanGrid,
    classify,
    default_workers,
    dressed_line_table,
    near_dressed_lines,
    preset,
    roughness,
    run_scan,
    sidecar,
    to_csv,
)


def small_grid(nx=7, ny=5, axes=("z", "y")):
    return ScanGrid(ScanAxis("delta_pc", -0.8, 0.8, nx), ScanAxis("delta_la", 15.5, 16.5, ny),
                    SystemParams(), axes)


@pytest.fixture(scope="module")
def small():
    return run_scan(small_grid(), workers=1)


# -- grid ---------------------------------------------------------------------

def test_axis_parse():
    ax = ScanAxis.parse("delta_pc:-1:1:11")
    assert (ax.name, ax.lo_mhz, ax.hi_mhz, ax.n) == ("delta_pc", -1.0, 1.0, 11)
    assert ScanAxis.parse(ax.spec()) == ax
    for bad in ("delta_pc:-1:1", "delta_xx:-1:1:5", "delta_pc:a:1:5", "delta_pc:-1:1:1",
                "delta_pc:-1:inf:5"):
        with pytest.raises(ParameterError):
            ScanAxis.parse(bad)


def test_grid_validation():
    x = ScanAxis("delta_pc", -1, 1, 3)
    with pytest.raises(ParameterError):
        ScanGrid(x, x)
    with pytest.raises(ParameterError):
        ScanGrid(x, ScanAxis("delta_pa", 15, 17, 3))
    with pytest.raises(ParameterError):
        ScanGrid(x, ScanAxis("delta_la", 15, 17, 3), axes=())


def test_presets_echo_geometry():
    for name in ("fig2a", "fig3a"):
        g = preset(name, 5, SystemParams(kx0=0.1, delta_ca=mhz(10.0)))
        assert g.fixed.kx0 == np.pi / 4
        assert g.fixed.delta_ca == mhz(16.0)
        assert g.describe()["preset"] == name
    with pytest.raises(ParameterError):
        preset("fig9")


def test_fig2a_covers_control_cavity_range():
    g = preset("fig2a", 10)
    d_lc = g.y.values_mhz - 16.0
    assert d_lc[0] == pytest.approx(-25.0) and d_lc[-1] == pytest.approx(20.0)


# -- evaluation ---------------------------------------------------------------

def test_grid_points_equal_single_calls(small):
    g = small.grid
    for i in range(g.y.n):
        for j in range(g.x.n):
            p = g.params_at(i, j)
            for axis in (Axis.Z, Axis.Y):
                r = rates_resolvent(p, axis)
                assert small.gamma[axis][i, j] == r.a_minus - r.a_plus
                assert small.rate_result(i, j, axis).a_plus == r.a_plus


def test_degenerate_row_grid_bit_identical():
    g = ScanGrid(ScanAxis("delta_pc", -3.0, 3.0, 13), ScanAxis("delta_la", 16.0, 16.0, 2))
    res = run_scan(g, workers=1)
    for j, x in enumerate(g.x.values):
        r = rates_resolvent(SystemParams().with_detunings(delta_pc=x, delta_la=mhz(16.0)), "z")
        assert res.gamma[Axis.Z][0, j] == r.a_minus - r.a_plus
        assert res.gamma[Axis.Z][1, j] == res.gamma[Axis.Z][0, j]


def test_worker_count_does_not_change_output(small):
    csv1 = to_csv(small)
    csv4 = to_csv(run_scan(small_grid(), workers=4, rows_per_tile=1))
    assert csv1 == csv4
    assert csv1.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(csv1.splitlines()) == 1 + 35


def test_analytic_agreement_on_eit_line():
    res = run_scan(preset("fig3a", 21), workers=1)
    assert res.provenance["n_on_eit_line"] >= 15
    assert res.provenance["max_analytic_rel_dev"] < 1e-8


def _boom(grid, start, stop):
    if start >= 2:
        raise RuntimeError("tile exploded")
    return _ORIGINAL(grid, start, stop)


_ORIGINAL = scan_mod._evaluate_rows


def test_worker_failure_reports_missing_tiles(monkeypatch):
    monkeypatch.setattr(scan_mod, "_evaluate_rows", _boom)
    with pytest.raises(ScanError) as err:
        run_scan(small_grid(), workers=2, rows_per_tile=2)
    assert err.value.incomplete == [(2, 4), (4, 5)]
    assert "tile exploded" in str(err.value)


def test_default_workers(monkeypatch):
    monkeypatch.setenv("CEITCOOL_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("CEITCOOL_WORKERS", "zero")
    with pytest.raises(ParameterError):
        default_workers()
    with pytest.raises(ParameterError):
        run_scan(small_grid(), workers=0)


# -- classification -----------------------------------------------------------

def test_classification_matches_signs(small):
    gz, gy = small.gamma[Axis.Z], small.gamma[Axis.Y]
    z_only = classify(small, "z_only")
    veto = classify(small, "z_and_y_veto")
    assert np.all((z_only == "cooling") == (gz > 0))
    assert np.all((veto == "cooling") == ((gz > 0) & (gy >= 0)))
    assert np.all(small.classification == veto)


def test_all_cooling_grid(small):
    forced = dataclasses.replace(small, gamma={Axis.Z: np.ones_like(small.gamma[Axis.Z]),
                                               Axis.Y: np.zeros_like(small.gamma[Axis.Y])})
    assert np.all(classify(forced, "z_only") == "cooling")
    # a vanishing Y rate never vetoes
    assert np.all(classify(forced, "z_and_y_veto") == classify(forced, "z_only"))


def test_divergent_points_are_flagged(small):
    gz = small.gamma[Axis.Z].copy()
    gz[0, 0] = np.nan
    forced = dataclasses.replace(small, gamma={**small.gamma, Axis.Z: gz})
    assert classify(forced)[0, 0] == "divergent"


def test_veto_needs_y():
    res = run_scan(small_grid(3, 2, axes=("z",)), workers=1)
    with pytest.raises(ParameterError):
        classify(res, "z_and_y_veto")
    with pytest.raises(ParameterError):
        classify(res, "majority")


# -- map structure ------------------------------------------------------------

@pytest.fixture(scope="module")
def fig2a():
    return run_scan(preset("fig2a", 61), workers=1)


def test_fig2a_best_cooling_tracks_red_sidebands(fig2a):
    omega = fig2a.grid.fixed.omega_z
    x = fig2a.grid.x.values
    step = x[1] - x[0]
    for i in range(fig2a.grid.y.n):
        j = int(np.nanargmax(fig2a.gamma[Axis.Z][i]))
        red = fig2a.dressed_omega[i, j] - omega
        k = int(np.argmin(np.abs(red - x[j])))
        assert abs(red[k] - x[j]) <= fig2a.dressed_width[i, j, k] + step


def test_fig2a_smooth_away_from_lines(fig2a):
    lines = near_dressed_lines(fig2a, margin=mhz(2.0))
    assert not lines.all()
    assert roughness(fig2a, exclude=lines) < roughness(fig2a)


def test_dressed_line_table(fig2a):
    table = dressed_line_table(fig2a)
    assert len(table) == fig2a.grid.y.n
    assert all(len(r["omega_mhz"]) == 3 for r in table)


def test_sidecar_has_provenance(small):
    body = json.loads(sidecar(small, {"policy": "z_and_y_veto"}))
    assert body["grid"]["x"] == small.grid.x.spec()
    assert body["grid"]["fixed"]["kx0_rad"] == small.grid.fixed.kx0
    assert sum(body["class_counts"].values()) == 35
    assert body["code"].startswith("ceitcool")


@given(st.floats(-0.9, 0.9), st.floats(15.1, 16.9))
@settings(max_examples=20, deadline=None)
def test_params_at_places_lasers(x, y):
    g = ScanGrid(ScanAxis("delta_pc", x, x + 0.1, 2), ScanAxis("delta_la", y, y + 0.1, 2))
    p = g.params_at(0, 0)
    assert p.delta_pc == pytest.approx(mhz(x))
    assert p.delta_la == pytest.approx(mhz(y))
    assert p.delta_ca == SystemParams().delta_ca
