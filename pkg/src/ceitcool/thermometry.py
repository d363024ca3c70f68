"""Occupation numbers and temperatures from sideband spectroscopy.

Temperatures are in microkelvin, trap frequencies angular in rad/us.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants
from scipy.integrate import trapezoid

from .model import ParameterError, mhz

# hbar * (1 rad/us) / k_B in microkelvin
HBAR_OVER_KB_UK = constants.hbar * 1e6 / constants.k * 1e6


def quantum_temperature(omega: float) -> float:
    """hbar omega / k_B in uK."""
    return HBAR_OVER_KB_UK * omega


def mean_from_temperature(temperature_uk: float, omega: float) -> float:
    if temperature_uk <= 0:
        return 0.0
    return 1.0 / math.expm1(quantum_temperature(omega) / temperature_uk)


def temperature_from_mean(mean_m: float, omega: float) -> float:
    if mean_m < 0:
        raise ParameterError("mean occupation must be >= 0")
    if mean_m == 0:
        return 0.0
    return quantum_temperature(omega) / math.log1p(1.0 / mean_m)


@dataclass(frozen=True)
class ThermalState:
    omega: float
    mean_m: float
    cutoff: int = 400
    p: np.ndarray = field(init=False, repr=False)
    temperature_uk: float = field(init=False)

    def __post_init__(self):
        if self.mean_m < 0:
            raise ParameterError("mean occupation must be >= 0")
        if self.omega <= 0:
            raise ParameterError("trap frequency must be positive")
        m = np.arange(self.cutoff + 1)
        if self.mean_m == 0:
            p = (m == 0).astype(float)
        else:
            ratio = self.mean_m / (1 + self.mean_m)
            p = (1 - ratio) * ratio**m
        object.__setattr__(self, "p", p / p.sum())
        object.__setattr__(self, "temperature_uk", temperature_from_mean(self.mean_m, self.omega))

    @classmethod
    def from_temperature(cls, omega: float, temperature_uk: float, cutoff: int = 400):
        return cls(omega, mean_from_temperature(temperature_uk, omega), cutoff)

    @property
    def p0(self) -> float:
        return float(self.p[0])


def mean_occ_from_sideband_ratio(r: float) -> float:
    """<m> from the red/blue sideband weight ratio r = <m>/(<m>+1)."""
    if not 0 <= r < 1:
        raise ParameterError("sideband ratio must satisfy 0 <= r < 1 for a thermal state")
    return r / (1 - r)


def ground_state_from_passage(p_transfer: float, efficiency: float = 1.0) -> float:
    """Ground-state population from an adiabatic passage on m -> m-1.

    The passage transfers every m >= 1 population with ``efficiency`` and
    leaves m = 0 untouched.
    """
    if not 0 <= p_transfer <= 1:
        raise ParameterError("transfer probability must lie in [0, 1]")
    if not 0 < efficiency <= 1:
        raise ParameterError("passage efficiency must lie in (0, 1]")
    if p_transfer > efficiency:
        raise ParameterError("transfer probability exceeds the passage efficiency")
    return 1.0 - p_transfer / efficiency


def temperature_from_p0(p0: float, omega: float) -> float:
    """Temperature (uK) of the thermal state with ground-state population p0."""
    if not 0 < p0 < 1:
        raise ParameterError("p0 must lie strictly between 0 and 1")
    return quantum_temperature(omega) / -math.log1p(-p0)


@dataclass(frozen=True)
class PulseModel:
    """Square microwave pulse probing the motional sidebands.

    ``rabi`` is the carrier Rabi frequency (angular), ``duration`` in us.
    Sideband couplings follow the first-order Lamb-Dicke scaling
    eta sqrt(m) (and eta^2 sqrt(m(m-1))/2 for the second sidebands).
    """

    rabi: float = mhz(0.002)
    duration: float = 50.0
    eta: float = 0.083
    carrier_offset: float = mhz(-1.0)
    second_order: bool = True


@dataclass(frozen=True)
class SidebandSpectrum:
    detuning: np.ndarray  # angular
    p_transfer: np.ndarray
    pulse: PulseModel
    omega: float
    # per-transition contributions: "carrier", "red1", "blue1", "red2", "blue2"
    components: dict = field(default_factory=dict, repr=False)


def rabi_lineshape(coupling, detuning, duration):
    """Transfer probability of a square pulse, broadcast over arrays."""
    coupling = np.asarray(coupling, dtype=float)
    detuning = np.asarray(detuning, dtype=float)
    gen = np.sqrt(coupling**2 + detuning**2)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(gen > 0, coupling**2 / np.where(gen > 0, gen, 1) ** 2, 0.0)
    return p * np.sin(gen * duration / 2) ** 2


def synth_sideband_spectrum(state: ThermalState, pulse: PulseModel | None = None,
                            detuning=None) -> SidebandSpectrum:
    """Model microwave spectrum of a thermal state.

    Each motional level m contributes the carrier and the m -> m-1, m+1
    (and m-2, m+2) transitions, weighted by its thermal population.
    """
    pulse = pulse or PulseModel()
    w = state.omega
    if detuning is None:
        detuning = pulse.carrier_offset + np.linspace(-3 * w, 3 * w, 1201)
    det = np.asarray(detuning, dtype=float) - pulse.carrier_offset
    m = np.arange(len(state.p))[:, None]
    p = state.p[:, None]
    eta = pulse.eta
    transitions = {
        "carrier": (pulse.rabi * np.ones_like(m, dtype=float), 0.0),
        "red1": (pulse.rabi * eta * np.sqrt(m), -w),
        "blue1": (pulse.rabi * eta * np.sqrt(m + 1), w),
    }
    if pulse.second_order:
        transitions["red2"] = (pulse.rabi * eta**2 * np.sqrt(m * np.maximum(m - 1, 0)) / 2, -2 * w)
        transitions["blue2"] = (pulse.rabi * eta**2 * np.sqrt((m + 1) * (m + 2)) / 2, 2 * w)
    components = {}
    for name, (coupling, centre) in transitions.items():
        components[name] = np.sum(p * rabi_lineshape(coupling, det[None, :] - centre,
                                                     pulse.duration), axis=0)
    total = np.clip(sum(components.values()), 0.0, 1.0)
    return SidebandSpectrum(np.asarray(detuning, dtype=float), total, pulse, w, components)


def sideband_ratio(spectrum: SidebandSpectrum) -> float:
    """Red/blue first-sideband area ratio.

    Uses the per-transition components when present, otherwise integrates
    the total over windows of half-width omega/2 around carrier -/+ omega.
    The window estimate includes the carrier's off-resonant wings and so
    overestimates r for cold states with weak sidebands.
    """
    x = spectrum.detuning
    if "red1" in spectrum.components:
        red = trapezoid(spectrum.components["red1"], x)
        blue = trapezoid(spectrum.components["blue1"], x)
        return float(red / blue)
    w = spectrum.omega
    rel = x - spectrum.pulse.carrier_offset
    red_win = np.abs(rel + w) < w / 2
    blue_win = np.abs(rel - w) < w / 2
    red = trapezoid(spectrum.p_transfer[red_win], x[red_win])
    blue = trapezoid(spectrum.p_transfer[blue_win], x[blue_win])
    return float(red / blue)
