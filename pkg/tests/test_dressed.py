import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ceitcool.dressed import (
    dressed_matrix,
    dressed_states,
    dressed_sweep,
    excitation_spectrum,
    sideband_resonance_frequencies,
)
from ceitcool.model import SystemParams, mhz, to_mhz
from ceitcool.rates import rates_resolvent

P0 = SystemParams()


@st.composite
def params(draw):
    f = st.floats(-30.0, 30.0)
    return SystemParams.from_mhz(
        g_mhz=draw(st.floats(0.1, 8.0)), omega_l_mhz=draw(st.floats(0.1, 8.0)),
        gamma_mhz=draw(st.floats(0.1, 5.0)), kappa_mhz=draw(st.floats(0.1, 5.0)),
        delta_ca_mhz=draw(f), delta_la_mhz=draw(f), kx0_rad=draw(st.floats(0.0, 1.4)))


@given(params())
@settings(max_examples=300, deadline=None)
def test_linewidths_sum_and_normalisation(p):
    states = dressed_states(p)
    assert len(states) == 3
    assert {s.label for s in states} == {"plus", "circ", "minus"}
    assert all(s.linewidth >= -1e-12 for s in states)
    total = sum(s.linewidth for s in states)
    assert math.isclose(total, p.gamma + p.kappa, rel_tol=1e-10)
    for s in states:
        assert abs(np.linalg.norm(s.vector) - 1) < 1e-12
    freqs = [s.omega for s in states]
    assert freqs == sorted(freqs, reverse=True)
    assert math.isclose(sum(s.eigenvalue for s in states).real,
                        np.trace(dressed_matrix(p)).real, rel_tol=1e-10, abs_tol=1e-9)


def test_decoupled_raman_state_without_control():
    p = P0.replace(omega_l=0.0).with_detunings(delta_lc=mhz(3.0))
    states = dressed_states(p)
    raman = max(states, key=lambda s: s.weights["g1,0"])
    assert raman.linewidth == 0.0
    # probe frame: omega_j - delta_PC is the probe-frame eigenvalue -delta_PL
    assert raman.omega - p.delta_pc == pytest.approx(-p.delta_pl, abs=1e-12)


def test_far_detuned_polaritons_have_little_raman_weight():
    for d_lc in (-40.0, 40.0):
        p = P0.with_detunings(delta_lc=mhz(d_lc))
        for s in dressed_states(p):
            if s.label in ("plus", "minus"):
                assert s.weights["g1,0"] < 0.05


def test_sweep_branch_tracking_is_smooth():
    sweep = dressed_sweep(P0.with_detunings(delta_lc=mhz(d)) for d in np.linspace(-25, 20, 451))
    ok = ~sweep.exceptional
    assert np.all(sweep.min_overlap[ok] > 0.9)
    np.testing.assert_allclose(sweep.linewidth.sum(axis=1), P0.gamma + P0.kappa, rtol=1e-10)


def test_dark_state_in_spectrum():
    grid = np.union1d(np.linspace(mhz(0.0), mhz(32.0), 321), [P0.delta_la])
    pe = np.array([s.p_e for s in excitation_spectrum(P0, grid)])
    assert grid[np.argmin(pe)] == P0.delta_la
    assert pe.min() < 1e-10 * pe.max()


@given(st.floats(5.0, 25.0), st.floats(0.5, 6.0))
@settings(max_examples=50, deadline=None)
def test_dark_state_location(delta_ca, omega_l):
    p = P0.replace(delta_ca=mhz(delta_ca), delta_la=mhz(delta_ca), omega_l=mhz(omega_l))
    grid = p.delta_la + mhz(1.0) * np.linspace(-5, 5, 201)
    pe = np.array([s.p_e for s in excitation_spectrum(p, grid)])
    assert abs(grid[np.argmin(pe)] - p.delta_la) <= (grid[1] - grid[0]) / 2 + 1e-12


def test_empty_cavity_lorentzian():
    p = P0.replace(g=0.0, omega_l=0.0)
    delta = mhz(1.0) * np.linspace(-2, 2, 41)
    pts = excitation_spectrum(p, p.delta_ca + delta)
    trans = np.array([s.transmission for s in pts])
    np.testing.assert_allclose(trans, p.kappa**2 / (p.kappa**2 + delta**2), rtol=1e-12)


def test_spectrum_scales_with_probe_power():
    grid = np.linspace(mhz(10.0), mhz(20.0), 21)
    a = excitation_spectrum(P0, grid)
    b = excitation_spectrum(P0.replace(omega_p=3 * P0.omega_p), grid)
    for x, y in zip(a, b):
        assert y.p_e == pytest.approx(9 * x.p_e, rel=1e-12, abs=1e-300)
        assert y.n_cav == pytest.approx(9 * x.n_cav, rel=1e-12)


def test_two_level_transmission_drop_is_order_half():
    p = P0.replace(omega_l=0.0)
    t = excitation_spectrum(p, [p.delta_ca])[0].transmission
    assert 0.25 <= 1 - t <= 1.0


def test_sideband_frequencies():
    for label, red, blue in sideband_resonance_frequencies(P0, 0.0):
        assert red == blue
    w = P0.omega_z
    p = P0.replace(omega_l=0.0, delta_ca=mhz(200.0), delta_la=mhz(200.0))
    cavity_like = max(dressed_states(p), key=lambda s: s.weights["g2,1"])
    row = next(r for r in sideband_resonance_frequencies(p, w) if r[0] == cavity_like.label)
    # dispersive limit: cavity line pulled by g~^2 / Delta_CA
    shift = p.g_eff**2 / p.delta_ca
    assert row[1] == pytest.approx(shift - w, abs=1e-3 * w)


def test_blue_side_of_plus_heats():
    plus = next(s for s in dressed_states(P0) if s.label == "plus")
    assert rates_resolvent(P0.with_detunings(delta_pc=plus.omega + P0.omega_z), "z").cooling_rate < 0
    for d in np.linspace(1.0, 8.0, 15):
        assert d > to_mhz(plus.omega)
        assert rates_resolvent(P0.with_detunings(delta_pc=mhz(d)), "z").cooling_rate < 0
