"""Physical parameters and internal operators of the driven atom-cavity system.

Units: every frequency and rate held by :class:`SystemParams` is angular, in
rad/us, and times are in us.  Linear frequencies in MHz (the way experimental
values are usually quoted, ``2*pi x MHz``) are converted at the boundary by
:func:`mhz` / :func:`to_mhz`.

Internal basis (index order used by all 4x4 operators)::

    0: |g2, 0>   ground state, empty cavity
    1: |g1, 0>   other hyperfine ground state (Raman partner)
    2: |e, 0>    excited atom
    3: |g2, 1>   one cavity photon

The single-excitation block (everything but |g2, 0>) is handled in the order
``(|g1,0>, |g2,1>, |e,0>)``; see :data:`BLOCK`.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

TWO_PI = 2.0 * math.pi

G2_0, G1_0, E_0, G2_1 = range(4)
BASIS_LABELS = ("g2,0", "g1,0", "e,0", "g2,1")

# indices of the single-excitation block inside the 4-level basis
BLOCK = (G1_0, G2_1, E_0)
B_G1, B_CAV, B_E = range(3)

LAMB_DICKE_LIMIT = 0.3

CS133_MASS = 132.905451933 * constants.atomic_mass
CS_D2_WAVELENGTH = 852.34727582e-9  # m


class ParameterError(ValueError):
    """Invalid physical parameters or arguments."""


class LambDickeWarning(UserWarning):
    """Lamb-Dicke parameter too large for the perturbative rate theory."""


class Axis(str, enum.Enum):
    Z = "z"  # cavity axis
    Y = "y"  # control-laser / dipole-trap axis

    @classmethod
    def parse(cls, value: "Axis | str") -> "Axis":
        if isinstance(value, Axis):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown axis {value!r}, expected 'z' or 'y'") from None


def mhz(f: float) -> float:
    """Linear frequency in MHz -> angular frequency in rad/us."""
    return TWO_PI * f


def to_mhz(w: float) -> float:
    """Angular frequency in rad/us -> linear frequency in MHz."""
    return w / TWO_PI


def recoil_frequency(mass: float = CS133_MASS, wavelength: float = CS_D2_WAVELENGTH) -> float:
    """Angular recoil frequency hbar k^2 / 2m in rad/us."""
    k = TWO_PI / wavelength
    return constants.hbar * k**2 / (2.0 * mass) * 1e-6


def lamb_dicke(omega_trap: float, omega_rec: float) -> float:
    """eta = sqrt(omega_rec / omega_trap)."""
    if not (omega_trap > 0 and omega_rec > 0):
        raise ParameterError("trap and recoil frequencies must be positive")
    return math.sqrt(omega_rec / omega_trap)


# keys of the flat parameter file, value unit in the key suffix
PARAM_FILE_KEYS = {
    "g_mhz": "g",
    "omega_l_mhz": "omega_l",
    "omega_p_mhz": "omega_p",
    "gamma_mhz": "gamma",
    "kappa_mhz": "kappa",
    "delta_ca_mhz": "delta_ca",
    "delta_la_mhz": "delta_la",
    "delta_pa_mhz": "delta_pa",
    "omega_z_mhz": "omega_z",
    "omega_y_mhz": "omega_y",
    "omega_rec_mhz": "omega_rec",
    "kx0_rad": "kx0",
    "beta1": "beta1",
    "alpha_z": "alpha_z",
    "alpha_y": "alpha_y",
}

_ANGULAR_FIELDS = (
    "g", "omega_l", "omega_p", "gamma", "kappa", "delta_ca", "delta_la",
    "delta_pa", "omega_z", "omega_y", "omega_rec",
)


@dataclass(frozen=True)
class SystemParams:
    """All physical inputs of the model, angular frequencies in rad/us.

    ``gamma`` and ``kappa`` are amplitude (HWHM) decay rates, so excited-state
    population and intracavity intensity decay at ``2*gamma`` and ``2*kappa``.
    ``kx0`` is the trap-centre offset from a cavity-field antinode in radians.
    """

    g: float = mhz(3.6)
    omega_l: float = mhz(2.8)
    omega_p: float = mhz(0.23)
    gamma: float = mhz(2.6)
    kappa: float = mhz(0.40)
    delta_ca: float = mhz(16.0)
    delta_la: float = mhz(16.0)
    delta_pa: float = mhz(16.0)
    omega_z: float = mhz(0.2)
    omega_y: float = mhz(0.3)
    omega_rec: float = field(default_factory=recoil_frequency)
    kx0: float = math.pi / 4
    beta1: float = 0.5
    beta2: float = 0.5
    alpha_z: float = 0.4
    alpha_y: float = 0.4

    def __post_init__(self):
        for name in dataclasses.fields(self):
            value = getattr(self, name.name)
            if not math.isfinite(value):
                raise ParameterError(f"{name.name} must be finite, got {value!r}")
        for name in ("gamma", "kappa", "omega_z", "omega_y", "omega_rec"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        for name in ("g", "omega_l", "omega_p", "alpha_z", "alpha_y"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")
        if self.beta1 < 0 or self.beta2 < 0 or abs(self.beta1 + self.beta2 - 1.0) > 1e-12:
            raise ParameterError("branching fractions must be >= 0 and sum to 1")
        for axis in Axis:
            eta = self.eta(axis)
            if eta >= LAMB_DICKE_LIMIT:
                warnings.warn(
                    f"Lamb-Dicke parameter along {axis.value} is {eta:.3f} >= "
                    f"{LAMB_DICKE_LIMIT}; rate theory not valid",
                    LambDickeWarning,
                    stacklevel=3,
                )

    # -- construction -----------------------------------------------------

    @classmethod
    def from_mhz(cls, **kwargs) -> "SystemParams":
        """Build from linear MHz values; keys as in the parameter file.

        ``delta_pc_mhz`` is also accepted and sets the probe detuning
        relative to the cavity.  ``beta2`` follows from ``beta1``.
        """
        kwargs = dict(kwargs)
        delta_pc = kwargs.pop("delta_pc_mhz", None)
        out = {}
        for key, value in kwargs.items():
            if key not in PARAM_FILE_KEYS:
                raise ParameterError(f"unknown parameter key {key!r}")
            name = PARAM_FILE_KEYS[key]
            out[name] = mhz(float(value)) if name in _ANGULAR_FIELDS else float(value)
        if "beta1" in out:
            out["beta2"] = 1.0 - out["beta1"]
        params = cls(**out)
        if delta_pc is not None:
            if "delta_pa" in out:
                raise ParameterError("give either delta_pa_mhz or delta_pc_mhz, not both")
            params = params.with_detunings(delta_pc=mhz(float(delta_pc)))
        return params

    def to_mhz_dict(self) -> dict:
        """Parameter-file representation (inverse of :meth:`from_mhz`)."""
        out = {}
        for key, name in PARAM_FILE_KEYS.items():
            value = getattr(self, name)
            out[key] = to_mhz(value) if name in _ANGULAR_FIELDS else value
        return out

    def replace(self, **changes) -> "SystemParams":
        if "beta1" in changes and "beta2" not in changes:
            changes["beta2"] = 1.0 - changes["beta1"]
        return dataclasses.replace(self, **changes)

    def with_detunings(self, *, delta_pc=None, delta_la=None, delta_pa=None,
                       delta_lc=None) -> "SystemParams":
        """Move the lasers keeping the cavity fixed (all angular)."""
        changes = {}
        if delta_lc is not None:
            if delta_la is not None:
                raise ParameterError("delta_la and delta_lc both given")
            delta_la = self.delta_ca + delta_lc
        if delta_la is not None:
            changes["delta_la"] = delta_la
        if delta_pc is not None:
            if delta_pa is not None:
                raise ParameterError("delta_pa and delta_pc both given")
            delta_pa = self.delta_ca + delta_pc
        if delta_pa is not None:
            changes["delta_pa"] = delta_pa
        return dataclasses.replace(self, **changes)

    # -- derived quantities ----------------------------------------------

    @property
    def delta_pc(self) -> float:
        return self.delta_pa - self.delta_ca

    @property
    def delta_pl(self) -> float:
        return self.delta_pa - self.delta_la

    @property
    def delta_lc(self) -> float:
        return self.delta_la - self.delta_ca

    @property
    def g_eff(self) -> float:
        """Position-reduced coupling g cos(k x0)."""
        return self.g * math.cos(self.kx0)

    @property
    def cooperativity(self) -> float:
        return self.g_eff**2 / (self.kappa * self.gamma)

    def trap_frequency(self, axis: Axis | str) -> float:
        return self.omega_z if Axis.parse(axis) is Axis.Z else self.omega_y

    def eta(self, axis: Axis | str) -> float:
        return lamb_dicke(self.trap_frequency(axis), self.omega_rec)

    def alpha(self, axis: Axis | str) -> float:
        return self.alpha_z if Axis.parse(axis) is Axis.Z else self.alpha_y

    @property
    def lamb_dicke_ok(self) -> bool:
        return all(self.eta(a) < LAMB_DICKE_LIMIT for a in Axis)


def default_params() -> SystemParams:
    return SystemParams()


@dataclass(frozen=True)
class InternalOperator:
    """A 4x4 operator on the internal basis with a tag saying what it is.

    ``label`` is one of ``"hamiltonian"``, ``"drive"``, ``"mech:z"``,
    ``"mech:y"`` or ``"decay:<channel>"``.
    """

    matrix: np.ndarray
    label: str

    def block(self) -> np.ndarray:
        """Restriction to the single-excitation block, order (g1, g2+1, e)."""
        idx = np.array(BLOCK)
        return self.matrix[np.ix_(idx, idx)]


def _ket_bra(i: int, j: int) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[i, j] = 1.0
    return m


def build_effective_hamiltonian(params: SystemParams) -> InternalOperator:
    """Non-Hermitian rotating-frame Hamiltonian without the probe drive."""
    p = params
    h = np.zeros((4, 4), dtype=complex)
    h[G1_0, G1_0] = -p.delta_pl
    h[E_0, E_0] = -p.delta_pa - 1j * p.gamma
    h[G2_1, G2_1] = -p.delta_pc - 1j * p.kappa
    h[G1_0, E_0] = h[E_0, G1_0] = p.omega_l / 2
    h[G2_1, E_0] = h[E_0, G2_1] = p.g_eff
    return InternalOperator(h, "hamiltonian")


def build_drive(params: SystemParams) -> InternalOperator:
    """Weak probe through the cavity: |g2,0> <-> |g2,1> with Omega_P / 2."""
    d = (params.omega_p / 2) * (_ket_bra(G2_0, G2_1) + _ket_bra(G2_1, G2_0))
    return InternalOperator(d, "drive")


def build_mech_coupling(params: SystemParams, axis: Axis | str,
                        eta: float | None = None) -> InternalOperator:
    """Linear Lamb-Dicke coupling, to be multiplied by the position b + b^dagger.

    Z: gradient of the cavity mode function at the trap centre.
    Y: phase gradient of the running-wave control laser.
    ``eta`` defaults to the value set by the trap frequency of ``axis``.
    """
    axis = Axis.parse(axis)
    if eta is None:
        eta = params.eta(axis)
    if axis is Axis.Z:
        amp = -eta * params.g * math.sin(params.kx0)
        w = amp * (_ket_bra(E_0, G2_1) + _ket_bra(G2_1, E_0))
    else:
        amp = 1j * eta * params.omega_l / 2
        w = amp * (_ket_bra(E_0, G1_0) - _ket_bra(G1_0, E_0))
    return InternalOperator(w, f"mech:{axis.value}")


def build_decay_channels(params: SystemParams) -> list[InternalOperator]:
    """Jump operators (rates folded in) for cavity loss and spontaneous decay."""
    p = params
    return [
        InternalOperator(math.sqrt(2 * p.kappa) * _ket_bra(G2_0, G2_1), "decay:cavity"),
        InternalOperator(math.sqrt(2 * p.gamma * p.beta2) * _ket_bra(G2_0, E_0), "decay:atom->g2"),
        InternalOperator(math.sqrt(2 * p.gamma * p.beta1) * _ket_bra(G1_0, E_0), "decay:atom->g1"),
    ]


def excitation_block(params: SystemParams) -> np.ndarray:
    """3x3 single-excitation block of the effective Hamiltonian (g1, g2+1, e)."""
    return build_effective_hamiltonian(params).block()


def intracavity_photon_number(params: SystemParams, with_atom: bool = False) -> float:
    """Weak-drive mean intracavity photon number."""
    if not with_atom:
        return (params.omega_p / 2) ** 2 / (params.kappa**2 + params.delta_pc**2)
    from .rates import carrier_amplitudes

    amps = carrier_amplitudes(params)
    return float(abs(amps.cavity) ** 2)
