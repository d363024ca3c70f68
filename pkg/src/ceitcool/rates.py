"""Heating and cooling rates A+/A- in the Lamb-Dicke regime.

The resolvent route works for any detunings: the probe prepares the
first-order carrier amplitudes ``c``, the mechanical coupling ``W`` scatters
them into the sideband manifold shifted by -/+ one trap quantum, and the
sideband amplitudes decay through the atom (``2 gamma``) or the cavity
(``2 kappa``).  Recoil of spontaneously emitted photons adds a diffusion term
equal for heating and cooling::

    c_-/+    = (+/-omega - H1)^-1 W c
    A_+/-    = 2 gamma D + 2 gamma |<e|c_+/->|^2 + 2 kappa |<cav|c_+/->|^2
    D        = alpha eta^2 |<e|c>|^2

On the three-photon resonance line this reproduces the closed CEIT formula
(:func:`rates_ceit_analytic`) identically.

All rates are in 1/us.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._linalg import solve_checked
from .model import (
    B_CAV,
    B_E,
    B_G1,
    LAMB_DICKE_LIMIT,
    Axis,
    LambDickeWarning,
    ParameterError,
    SystemParams,
    build_mech_coupling,
    excitation_block,
    lamb_dicke,
)

EIT_TOLERANCE = 1e-9

PER_MS = 1e3  # 1/us -> 1/ms


class EITConditionError(ValueError):
    """The closed-form CEIT rates were requested off the resonance line."""


def cooling_summary(a_plus: float, a_minus: float) -> tuple[float, float | None]:
    """Cooling rate A- - A+ and, if it is positive, the stationary occupation."""
    if a_plus < 0 or a_minus < 0:
        raise ParameterError("rates must be non-negative")
    gamma = a_minus - a_plus
    if gamma > 0:
        return gamma, a_plus / gamma
    return gamma, None


@dataclass(frozen=True)
class RateResult:
    a_plus: float
    a_minus: float
    # "diffusion" maps to a single rate, every other channel to (plus, minus)
    channels: dict
    axis: Axis
    method: str
    divergent: bool = False
    cooling_rate: float = field(init=False)
    m_st: float | None = field(init=False)

    def __post_init__(self):
        if self.divergent:
            gamma, m_st = math.nan, None
        else:
            gamma, m_st = cooling_summary(self.a_plus, self.a_minus)
        object.__setattr__(self, "cooling_rate", gamma)
        object.__setattr__(self, "m_st", m_st)

    @classmethod
    def diverged(cls, axis: Axis, method: str) -> "RateResult":
        return cls(math.nan, math.nan, {}, axis, method, divergent=True)

    def to_json(self) -> dict:
        """JSON-ready dict; rates converted to 1/ms."""
        def ms(x):
            return None if x is None or not math.isfinite(x) else x * PER_MS

        channels = {}
        for name, value in self.channels.items():
            if isinstance(value, tuple):
                channels[name] = {"plus": ms(value[0]), "minus": ms(value[1])}
            else:
                channels[name] = ms(value)
        return {
            "a_plus": ms(self.a_plus),
            "a_minus": ms(self.a_minus),
            "gamma_rate": ms(self.cooling_rate),
            "m_st": self.m_st,
            "channels": channels,
            "method": self.method,
            "axis": self.axis.value,
            "divergent": self.divergent,
            "units": "1/ms",
        }


@dataclass(frozen=True)
class CarrierAmplitudes:
    vector: np.ndarray  # over (|g1,0>, |g2,1>, |e,0>)
    divergent: bool = False

    @property
    def g1(self) -> complex:
        return complex(self.vector[B_G1])

    @property
    def cavity(self) -> complex:
        return complex(self.vector[B_CAV])

    @property
    def excited(self) -> complex:
        return complex(self.vector[B_E])


def carrier_amplitudes(params: SystemParams) -> CarrierAmplitudes:
    """First-order steady-state amplitudes c = -H1^-1 (Omega_P/2) u_cav."""
    src = np.zeros(3, dtype=complex)
    src[B_CAV] = params.omega_p / 2
    c, divergent = solve_checked(-excitation_block(params), src)
    return CarrierAmplitudes(c, divergent)


def _eta(params: SystemParams, omega: float) -> float:
    if not omega > 0:
        raise ParameterError("trap frequency must be positive")
    eta = lamb_dicke(omega, params.omega_rec)
    if eta >= LAMB_DICKE_LIMIT:
        warnings.warn(f"eta = {eta:.3f}: outside the Lamb-Dicke regime",
                      LambDickeWarning, stacklevel=3)
    return eta


def _scatter(h, source, omega, decay):
    """Sideband amplitudes and per-channel rates.

    ``decay`` maps channel name -> (block index, amplitude decay rate).
    Returns ``None`` if either sideband resolvent is singular.
    """
    eye = np.eye(h.shape[0])
    c_minus, div_m = solve_checked(omega * eye - h, source)
    c_plus, div_p = solve_checked(-omega * eye - h, source)
    if div_m or div_p:
        return None
    return {
        name: (2 * rate * abs(c_plus[idx]) ** 2, 2 * rate * abs(c_minus[idx]) ** 2)
        for name, (idx, rate) in decay.items()
    }


def _assemble(diffusion, channels, axis, method) -> RateResult:
    a_plus = diffusion + sum(v[0] for v in channels.values())
    a_minus = diffusion + sum(v[1] for v in channels.values())
    return RateResult(a_plus, a_minus, {"diffusion": diffusion, **channels}, axis, method)


def rates_resolvent(params: SystemParams, axis: Axis | str = Axis.Z,
                    omega: float | None = None) -> RateResult:
    """Lamb-Dicke rates along ``axis`` from second-order resolvent theory.

    ``omega`` defaults to the trap frequency of ``axis``; the Lamb-Dicke
    parameter follows from it and the recoil frequency.
    """
    axis = Axis.parse(axis)
    if omega is None:
        omega = params.trap_frequency(axis)
    eta = _eta(params, omega)
    carrier = carrier_amplitudes(params)
    if carrier.divergent:
        return RateResult.diverged(axis, "resolvent")
    h1 = excitation_block(params)
    w = build_mech_coupling(params, axis, eta=eta).block()
    channels = _scatter(h1, w @ carrier.vector, omega, {
        "atomic": (B_E, params.gamma),
        "cavity": (B_CAV, params.kappa),
    })
    if channels is None:
        return RateResult.diverged(axis, "resolvent")
    diffusion = 2 * params.gamma * params.alpha(axis) * eta**2 * abs(carrier.excited) ** 2
    return _assemble(diffusion, channels, axis, "resolvent")


def on_eit_line(params: SystemParams) -> bool:
    scale = max(1.0, abs(params.delta_pa), abs(params.delta_la))
    return abs(params.delta_pl) <= EIT_TOLERANCE * scale


def rates_ceit_analytic(params: SystemParams, omega: float | None = None) -> RateResult:
    """Closed-form cavity-axis rates on the three-photon resonance line."""
    if not on_eit_line(params):
        raise EITConditionError(
            "EIT resonance condition violated: delta_PL = "
            f"{params.delta_pl / (2 * math.pi):.6g} MHz (must be 0)")
    p = params
    if omega is None:
        omega = p.omega_z
    eta = _eta(p, omega)
    d = p.delta_pc
    pref = ((p.omega_p**2 / 2) / (d**2 + p.kappa**2)
            * eta**2 * math.sin(p.kx0) ** 2 * p.g**2 * p.gamma)

    def rate(sign):
        c_pm = p.cooperativity * p.kappa**2 / (p.kappa**2 + (d - sign * omega) ** 2)
        shift = (p.omega_l**2 / (4 * omega) - omega + sign * p.delta_la
                 + p.gamma / p.kappa * c_pm * (omega - sign * d))
        return pref * (1 + c_pm) / (p.gamma**2 * (1 + c_pm) ** 2 + shift**2)

    a_plus, a_minus = rate(+1), rate(-1)
    return RateResult(a_plus, a_minus, {"diffusion": 0.0, "scattering": (a_plus, a_minus)},
                      Axis.Z, "ceit_analytic")


def effective_eit_parameters(params: SystemParams,
                             omega: float | None = None) -> tuple[float, float]:
    """Cavity-modified control Rabi frequency and atomic linewidth.

    Valid for a control laser tuned to the cavity (delta_LA == delta_CA).
    Returns ``(omega_eff, gamma_prime)``.
    """
    p = params
    if abs(p.delta_lc) > EIT_TOLERANCE * max(1.0, abs(p.delta_ca)):
        raise ParameterError("effective EIT parameters need delta_LA == delta_CA")
    if omega is None:
        omega = p.omega_z
    gamma_prime = p.gamma * (p.cooperativity * p.kappa**2 / (p.kappa**2 + omega**2) + 1)
    omega_eff = math.sqrt(p.omega_l**2 + 4 * omega**2 * (gamma_prime - p.gamma) / p.kappa)
    return omega_eff, gamma_prime


def rates_free_space_eit(params: SystemParams, omega: float | None = None, *,
                         axis: Axis | str = Axis.Y, control_projection: float = 1.0,
                         probe_projection: float = 0.0) -> RateResult:
    """EIT cooling of a three-level atom without cavity.

    The probe drives |g2> <-> |e> directly with Rabi frequency ``omega_p``;
    the cavity parameters are ignored.  Mechanical coupling comes from the
    running-wave phase gradients of the control (and optionally the probe)
    projected on ``axis``.
    """
    axis = Axis.parse(axis)
    p = params
    if omega is None:
        omega = p.trap_frequency(axis)
    eta = _eta(p, omega)
    # block order (g1, e)
    h = np.array([[-p.delta_pl, p.omega_l / 2],
                  [p.omega_l / 2, -p.delta_pa - 1j * p.gamma]], dtype=complex)
    c, divergent = solve_checked(-h, np.array([0.0, p.omega_p / 2], dtype=complex))
    if divergent:
        return RateResult.diverged(axis, "free_space_eit")
    k = 1j * eta * control_projection * p.omega_l / 2
    w = np.array([[0.0, -k], [k, 0.0]], dtype=complex)
    source = w @ c
    source[1] += 1j * eta * probe_projection * p.omega_p / 2
    channels = _scatter(h, source, omega, {"atomic": (1, p.gamma)})
    if channels is None:
        return RateResult.diverged(axis, "free_space_eit")
    diffusion = 2 * p.gamma * p.alpha(axis) * eta**2 * abs(c[1]) ** 2
    return _assemble(diffusion, channels, axis, "free_space_eit")
