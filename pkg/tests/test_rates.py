import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ceitcool.dressed import dressed_states
from ceitcool.model import Axis, ParameterError, SystemParams, mhz
from ceitcool.rates import (
    EITConditionError,
    carrier_amplitudes,
    cooling_summary,
    effective_eit_parameters,
    rates_ceit_analytic,
    rates_free_space_eit,
    rates_resolvent,
)

P0 = SystemParams()


@st.composite
def params(draw, on_line=False):
    d_lc = draw(st.floats(-25.0, 25.0))
    d_pl = 0.0 if on_line else draw(st.floats(-5.0, 5.0))
    p = SystemParams.from_mhz(
        g_mhz=draw(st.floats(0.5, 6.0)), omega_l_mhz=draw(st.floats(0.3, 6.0)),
        gamma_mhz=draw(st.floats(0.3, 5.0)), kappa_mhz=draw(st.floats(0.1, 3.0)),
        delta_ca_mhz=draw(st.floats(-20.0, 20.0)), kx0_rad=draw(st.floats(0.1, 1.4)))
    return p.with_detunings(delta_lc=mhz(d_lc), delta_pc=mhz(d_lc + d_pl))


# -- cooling_summary ----------------------------------------------------------

def test_cooling_summary_examples():
    assert cooling_summary(0.0, 2.0) == (2.0, 0.0)
    assert cooling_summary(1.5, 1.5) == (0.0, None)
    assert cooling_summary(1.0, 3.0) == (2.0, 0.5)
    gamma, m = cooling_summary(3.0, 1.0)
    assert gamma == -2.0 and m is None
    with pytest.raises(ParameterError):
        cooling_summary(-1.0, 1.0)


# -- carrier amplitudes -------------------------------------------------------

def test_carrier_examples():
    assert np.all(carrier_amplitudes(P0.replace(omega_p=0.0)).vector == 0)
    assert abs(carrier_amplitudes(P0).excited) < 1e-12
    empty = P0.replace(g=0.0, omega_l=0.0).with_detunings(delta_pc=mhz(0.3))
    want = (empty.omega_p / 2) ** 2 / (empty.delta_pc**2 + empty.kappa**2)
    assert abs(carrier_amplitudes(empty).cavity) ** 2 == pytest.approx(want, rel=1e-12)


@given(params(), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_carrier_linear_in_probe(p, s):
    a = carrier_amplitudes(p).vector
    b = carrier_amplitudes(p.replace(omega_p=s * p.omega_p)).vector
    np.testing.assert_allclose(b, s * a, rtol=1e-10, atol=1e-300)


# -- resolvent rates ----------------------------------------------------------

@given(params(), st.sampled_from(["z", "y"]))
@settings(max_examples=300, deadline=None)
def test_channel_structure(p, axis):
    r = rates_resolvent(p, axis)
    if r.divergent:
        return
    ch = r.channels
    assert ch["diffusion"] >= 0
    assert all(v[0] >= 0 and v[1] >= 0 for k, v in ch.items() if k != "diffusion")
    plus = ch["diffusion"] + ch["atomic"][0] + ch["cavity"][0]
    minus = ch["diffusion"] + ch["atomic"][1] + ch["cavity"][1]
    assert r.a_plus == pytest.approx(plus, rel=1e-14)
    assert r.a_minus == pytest.approx(minus, rel=1e-14)
    assert r.cooling_rate == r.a_minus - r.a_plus
    if r.cooling_rate > 0:
        assert r.m_st == r.a_plus / r.cooling_rate
    else:
        assert r.m_st is None


def test_diffusion_vanishes_only_on_eit_line():
    assert rates_resolvent(P0, "z").channels["diffusion"] == 0.0
    off = P0.with_detunings(delta_pa=P0.delta_la + mhz(0.1))
    assert rates_resolvent(off, "z").channels["diffusion"] > 0


def test_plus_sidebands_signs():
    w = P0.omega_z
    plus = next(s for s in dressed_states(P0) if s.label == "plus")
    assert rates_resolvent(P0.with_detunings(delta_pc=plus.omega - w), "z").cooling_rate > 0
    assert rates_resolvent(P0.with_detunings(delta_pc=plus.omega + w), "z").cooling_rate < 0


@given(params(), st.sampled_from(["z", "y"]))
@settings(max_examples=100, deadline=None)
def test_eta_squared_scaling(p, axis):
    # doubling eta at fixed trap frequency: four times the recoil frequency
    omega = p.trap_frequency(axis)
    a = rates_resolvent(p, axis, omega)
    b = rates_resolvent(p.replace(omega_rec=4 * p.omega_rec), axis, omega)
    if a.divergent:
        return
    assert b.a_plus == pytest.approx(4 * a.a_plus, rel=1e-12, abs=1e-300)
    assert b.a_minus == pytest.approx(4 * a.a_minus, rel=1e-12, abs=1e-300)


@given(params(), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_probe_power_scaling(p, s):
    a = rates_resolvent(p, "z")
    b = rates_resolvent(p.replace(omega_p=s * p.omega_p), "z")
    if a.divergent:
        return
    assert b.a_plus == pytest.approx(s**2 * a.a_plus, rel=1e-10, abs=1e-300)
    assert b.a_minus == pytest.approx(s**2 * a.a_minus, rel=1e-10, abs=1e-300)


@given(params(on_line=True))
@settings(max_examples=300, deadline=None)
def test_resolvent_equals_closed_form_on_eit_line(p):
    a = rates_resolvent(p, "z")
    b = rates_ceit_analytic(p)
    assert a.a_plus == pytest.approx(b.a_plus, rel=1e-8)
    assert a.a_minus == pytest.approx(b.a_minus, rel=1e-8)


def _enhancement(p, s):
    on = rates_resolvent(p.with_detunings(delta_pc=s.omega - p.omega_z), "z")
    off = rates_resolvent(p.with_detunings(delta_pc=s.omega - p.omega_z + 10 * s.linewidth), "z")
    return on.a_minus / off.a_minus


def test_sideband_resonance_enhancement():
    checked = 0
    for d_lc in (-25, -20, -10, -5, 5, 10, 20):
        p = P0.with_detunings(delta_lc=mhz(d_lc))
        states = dressed_states(p)
        for s in states:
            others = [o for o in states if o is not s]
            if min(abs(s.omega - o.omega) for o in others) <= 10 * s.linewidth:
                continue
            # the comparison point must not sit on the wing of a broader line
            probe = s.omega + 10 * s.linewidth
            if any(abs(probe - o.omega) < 4 * o.linewidth for o in others):
                continue
            assert _enhancement(p, s) > 5
            checked += 1
    assert checked >= 10


def test_enhancement_masked_by_broad_neighbour():
    # a narrow Raman-like line whose +10 gamma_j comparison point lands on |->
    p = P0.with_detunings(delta_lc=mhz(-20.0))
    circ = next(s for s in dressed_states(p) if s.label == "circ")
    minus = next(s for s in dressed_states(p) if s.label == "minus")
    assert abs(circ.omega + 10 * circ.linewidth - minus.omega) < minus.linewidth
    assert _enhancement(p, circ) < 5


def test_rate_json_in_per_ms():
    r = rates_resolvent(P0, "z")
    js = r.to_json()
    assert js["a_plus"] == pytest.approx(r.a_plus * 1e3)
    assert js["gamma_rate"] == pytest.approx(r.cooling_rate * 1e3)
    assert js["method"] == "resolvent" and js["axis"] == "z"


# -- closed form --------------------------------------------------------------

def test_closed_form_trivial_limits():
    r = rates_ceit_analytic(P0.replace(omega_p=0.0))
    assert r.a_plus == r.a_minus == 0.0
    r = rates_ceit_analytic(P0.replace(kx0=0.0))
    assert r.a_plus == r.a_minus == 0.0


def test_closed_form_rejects_off_line():
    with pytest.raises(EITConditionError, match="EIT resonance condition violated"):
        rates_ceit_analytic(P0.with_detunings(delta_pc=mhz(1.0)))


def test_closed_form_default_occupation_band():
    r = rates_ceit_analytic(P0)
    assert 0.03 <= r.m_st <= 0.3
    assert r.m_st == pytest.approx(0.23526896766169178, rel=1e-9)


# -- effective EIT parameters -------------------------------------------------

def test_effective_parameters_without_cavity():
    p = P0.replace(g=0.0)
    assert effective_eit_parameters(p) == (p.omega_l, p.gamma)


def test_effective_parameters_bad_cavity_limit():
    c = 2.0
    kappa = mhz(1e5)
    g = math.sqrt(c * kappa * P0.gamma) / math.cos(P0.kx0)
    _, gamma_prime = effective_eit_parameters(P0.replace(kappa=kappa, g=g))
    assert gamma_prime == pytest.approx(P0.gamma * (c + 1), rel=1e-6)


def test_effective_parameters_defaults():
    assert P0.cooperativity == pytest.approx(6.2, abs=0.05)
    _, gamma_prime = effective_eit_parameters(P0)
    assert gamma_prime / P0.gamma == pytest.approx(5.98, abs=0.02)


def test_effective_parameters_need_control_on_cavity():
    with pytest.raises(ParameterError):
        effective_eit_parameters(P0.with_detunings(delta_lc=mhz(1.0)))


# -- free space ---------------------------------------------------------------

def test_free_space_dark_line_has_no_diffusion():
    assert rates_free_space_eit(P0, P0.omega_y).channels["diffusion"] == 0.0


def test_free_space_best_cooling_at_light_shift_matching():
    w = P0.omega_y
    ds = np.linspace(1.0, 15.0, 281)
    am = [rates_free_space_eit(P0.replace(delta_la=mhz(d), delta_pa=mhz(d)), w).a_minus for d in ds]
    # bright state shifted onto the red sideband: (sqrt(D^2 + W^2) - D) / 2 = omega
    want = (P0.omega_l**2 / (4 * w) - w) / mhz(1.0)
    assert abs(ds[int(np.argmax(am))] - want) <= 0.1


@pytest.mark.parametrize("detuning", [-5.0, -1.0, 1.0, 5.0])
def test_free_space_two_level_doppler_sign(detuning):
    p = P0.replace(omega_l=0.0, delta_pa=mhz(detuning))
    r = rates_free_space_eit(p, P0.omega_y, control_projection=0.0, probe_projection=1.0)
    assert (r.cooling_rate > 0) == (detuning < 0)


def test_free_space_limit_of_cavity_formula():
    p = P0.replace(kx0=math.pi / 2).with_detunings(delta_pc=mhz(0.3), delta_lc=mhz(0.3))
    cav = rates_ceit_analytic(p)
    drive = p.omega_p * p.g * math.sin(p.kx0) / math.hypot(p.delta_pc, p.kappa)
    free = rates_free_space_eit(p.replace(omega_p=drive), p.omega_z)
    assert cav.a_plus == pytest.approx(free.a_plus, rel=1e-10)
    assert cav.a_minus == pytest.approx(free.a_minus, rel=1e-10)


def test_axis_parse_errors():
    with pytest.raises(ParameterError):
        rates_resolvent(P0, "x")
    assert rates_resolvent(P0, Axis.Y).axis is Axis.Y
