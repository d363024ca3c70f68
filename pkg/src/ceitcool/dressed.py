"""Dressed states of the control-driven atom-cavity system and probe spectra.

Dressed-state frequencies are quoted in the probe-cavity detuning convention:
a weak probe at ``delta_pc == omega_j`` is resonant with state ``j``.  In the
probe rotating frame the eigenvalue of the excitation block is then
``omega_j - delta_pc``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._linalg import solve_checked
from .model import B_CAV, B_E, B_G1, SystemParams, excitation_block

LABELS = ("plus", "circ", "minus")
# eigenvectors this parallel are treated as coalesced
EXCEPTIONAL_OVERLAP = 1.0 - 1e-6


@dataclass(frozen=True)
class DressedState:
    label: str
    omega: float  # rad/us, delta_pc convention
    linewidth: float  # HWHM, rad/us
    vector: np.ndarray  # over (|g1,0>, |g2,1>, |e,0>), unit norm
    exceptional: bool = False
    coalesced_with: str | None = None

    @property
    def eigenvalue(self) -> complex:
        return complex(self.omega, -self.linewidth)

    @property
    def weights(self) -> dict:
        p = np.abs(self.vector) ** 2
        return {"g1,0": float(p[B_G1]), "g2,1": float(p[B_CAV]), "e,0": float(p[B_E])}


@dataclass(frozen=True)
class SpectrumPoint:
    delta_pa: float
    p_e: float
    n_cav: float
    transmission: float
    divergent: bool = False


def dressed_matrix(params: SystemParams) -> np.ndarray:
    """Excitation block shifted to the probe-independent (delta_pc) frame."""
    return excitation_block(params) + params.delta_pc * np.eye(3)


def _exceptional_pairs(vecs: np.ndarray) -> dict[int, int]:
    pairs = {}
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(np.vdot(vecs[:, i], vecs[:, j])) > EXCEPTIONAL_OVERLAP:
                pairs[i] = j
                pairs[j] = i
    return pairs


def _assemble(vals, vecs, order) -> list[DressedState]:
    """Build states; ``order[k]`` is the eigen-index carrying ``LABELS[k]``."""
    pairs = _exceptional_pairs(vecs)
    label_of = {idx: LABELS[k] for k, idx in enumerate(order)}
    states = []
    for k, idx in enumerate(order):
        partner = pairs.get(idx)
        states.append(DressedState(
            label=LABELS[k],
            omega=float(vals[idx].real),
            linewidth=float(-vals[idx].imag),
            vector=vecs[:, idx],
            exceptional=partner is not None,
            coalesced_with=label_of[partner] if partner is not None else None,
        ))
    return states


def _character_order(vals, vecs) -> list[int]:
    """circ = most |g1,0>-like state, plus/minus = upper/lower of the rest."""
    circ = int(np.argmax(np.abs(vecs[B_G1, :]) ** 2))
    rest = sorted((i for i in range(3) if i != circ), key=lambda i: -vals[i].real)
    return [rest[0], circ, rest[1]]


def _eig(params: SystemParams):
    vals, vecs = np.linalg.eig(dressed_matrix(params))
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    return vals, vecs


def dressed_states(params: SystemParams) -> list[DressedState]:
    """The three dressed states, sorted by descending frequency.

    Labels are assigned by character (see :func:`_character_order`); use
    :func:`dressed_sweep` to follow branches continuously across a sweep.
    """
    vals, vecs = _eig(params)
    states = _assemble(vals, vecs, _character_order(vals, vecs))
    return sorted(states, key=lambda s: -s.omega)


@dataclass(frozen=True)
class DressedSweep:
    omega: np.ndarray  # (npoints, 3) in LABELS order
    linewidth: np.ndarray
    min_overlap: np.ndarray  # (npoints,) smallest step overlap, 1 at the start
    exceptional: np.ndarray  # (npoints,) bool


def dressed_sweep(params_list) -> DressedSweep:
    """Track dressed-state branches by maximal eigenvector overlap.

    The first point is labelled by character; each later point inherits the
    labels of the previous point through a best-overlap assignment.
    """
    params_list = list(params_list)
    n = len(params_list)
    omega = np.empty((n, 3))
    width = np.empty((n, 3))
    min_overlap = np.ones(n)
    exceptional = np.zeros(n, dtype=bool)
    prev = None
    for k, p in enumerate(params_list):
        vals, vecs = _eig(p)
        if prev is None:
            order = _character_order(vals, vecs)
        else:
            overlap = np.abs(prev.conj().T @ vecs)  # [label, new index]
            _, order = linear_sum_assignment(-overlap)
            order = list(order)
            min_overlap[k] = min(overlap[i, order[i]] for i in range(3))
        exceptional[k] = bool(_exceptional_pairs(vecs))
        omega[k] = vals[order].real
        width[k] = -vals[order].imag
        prev = vecs[:, order]
    return DressedSweep(omega, width, min_overlap, exceptional)


def _unit_drive_amplitudes(params: SystemParams) -> tuple[np.ndarray, bool]:
    """Steady-state amplitudes per unit drive amplitude (Omega_P/2 -> 1)."""
    u = np.zeros(3, dtype=complex)
    u[B_CAV] = 1.0
    return solve_checked(-excitation_block(params), u)


def excitation_spectrum(params: SystemParams, delta_pa_grid) -> list[SpectrumPoint]:
    """Weak-probe excitation and transmission spectrum versus probe detuning.

    Transmission is normalised to the empty cavity on resonance.
    """
    drive = params.omega_p / 2
    points = []
    for delta_pa in np.asarray(delta_pa_grid, dtype=float):
        p = params.with_detunings(delta_pa=float(delta_pa))
        c, divergent = _unit_drive_amplitudes(p)
        if divergent:
            points.append(SpectrumPoint(float(delta_pa), np.inf, np.inf, np.inf, True))
            continue
        cav = abs(c[B_CAV]) ** 2
        points.append(SpectrumPoint(
            delta_pa=float(delta_pa),
            p_e=float(drive**2 * abs(c[B_E]) ** 2),
            n_cav=float(drive**2 * cav),
            transmission=float(cav * params.kappa**2),
        ))
    return points


def sideband_resonance_frequencies(params: SystemParams, omega: float):
    """(label, red, blue) probe-cavity detunings of each dressed-state sideband."""
    return [(s.label, s.omega - omega, s.omega + omega) for s in dressed_states(params)]
