"""Lindblad master equation for the four internal states plus one trapped mode.

This is the brute-force reference the rate theory is checked against: no
adiabatic elimination, no perturbation theory in the drive.  Motion enters
through the position operator ``x = b + b^dagger`` of a truncated oscillator,
expanded to ``ld_order`` in the Lamb-Dicke parameter.

Density matrices are vectorised column-major (``vec(A rho B) =
(B^T kron A) vec(rho)``), Hilbert space ordering is internal (x) phonon.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import curve_fit

from .model import (
    E_0,
    LAMB_DICKE_LIMIT,
    G1_0,
    G2_0,
    G2_1,
    Axis,
    ParameterError,
    SystemParams,
    build_decay_channels,
    build_drive,
    build_effective_hamiltonian,
    build_mech_coupling,
)
from .rates import RateResult, rates_resolvent
from .thermometry import temperature_from_mean

log = logging.getLogger(__name__)

INTEGRATORS = ("adaptive_rk", "expm_krylov")
RECOIL_MODELS = ("projected_kicks", "none")

# fit residual (rms, relative to the swing of <m>) below which a fit is trusted
FIT_RESIDUAL_LIMIT = 2e-2
CUTOFF_RERUN_LIMIT = 1e-4
CUTOFF_PHYSICAL_LIMIT = 1e-3


class OracleError(RuntimeError):
    """Oracle configuration or numerical failure."""


class DegenerateSteadyStateError(OracleError):
    def __init__(self, dimension: int, exact: bool = True):
        self.dimension = dimension
        bound = "" if exact else ">= "
        super().__init__(f"steady-state manifold is degenerate: kernel dimension {bound}{dimension}")


@dataclass(frozen=True)
class OracleConfig:
    n_max: int = 12
    ld_order: int = 1
    axis: Axis = Axis.Z
    integrator: str = "expm_krylov"
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    t_final: float | None = None  # us; None -> from the rate-theory estimate
    sample_dt: float | None = None  # us; None -> t_final / n_samples
    recoil_model: str = "projected_kicks"
    n_samples: int = 120
    dim_cap: int = 400  # Hilbert-space dimension limit

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis.parse(self.axis))
        if self.n_max < 3:
            raise ParameterError("n_max must be >= 3")
        if self.ld_order not in (1, 2):
            raise ParameterError("ld_order must be 1 or 2")
        if self.integrator not in INTEGRATORS:
            raise ParameterError(f"integrator must be one of {INTEGRATORS}")
        if self.recoil_model not in RECOIL_MODELS:
            raise ParameterError(f"recoil_model must be one of {RECOIL_MODELS}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ParameterError("tolerances must be positive")
        if self.n_samples < 10:
            raise ParameterError("need at least 10 samples")
        if self.t_final is not None and self.sample_dt is not None:
            if self.t_final < 10 * self.sample_dt:
                raise ParameterError("t_final must be at least 10 sample_dt")

    @property
    def hilbert_dim(self) -> int:
        return 4 * (self.n_max + 1)


@dataclass(frozen=True)
class Liouvillian:
    matrix: sp.csr_matrix
    n_phonon: int
    params: SystemParams
    config: OracleConfig

    @property
    def hilbert_dim(self) -> int:
        return 4 * self.n_phonon


# -- operators -------------------------------------------------------------

def _ladder(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n)), 1, shape=(n, n), format="csr", dtype=complex)


def _proj(i: int, j: int) -> sp.csr_matrix:
    return sp.csr_matrix(([1.0 + 0j], ([i], [j])), shape=(4, 4))


def _kron(a, b) -> sp.csr_matrix:
    return sp.kron(a, b, format="csr")


def _expansion(x: sp.csr_matrix, phase: complex, order: int) -> sp.csr_matrix:
    """exp(phase * x) to the given order in x."""
    n = x.shape[0]
    out = sp.identity(n, dtype=complex, format="csr") + phase * x
    if order >= 2:
        out = out + (phase**2 / 2) * (x @ x)
    return out


def _hamiltonian_and_jumps(params: SystemParams, cfg: OracleConfig):
    p = params
    n = cfg.n_max + 1
    axis = cfg.axis
    omega = p.trap_frequency(axis)
    eta = p.eta(axis)
    b = _ladder(n)
    x = b + b.getH()
    eye_ph = sp.identity(n, dtype=complex, format="csr")
    num = (b.getH() @ b).tocsr()

    internal = sp.csr_matrix(np.diag([0.0, -p.delta_pl, -p.delta_pa, -p.delta_pc]).astype(complex))
    drive = (p.omega_p / 2) * (_proj(G2_0, G2_1) + _proj(G2_1, G2_0))
    h = _kron(internal + drive, eye_ph) + omega * _kron(sp.identity(4, format="csr"), num)

    cav = _proj(E_0, G2_1)
    ctl = _proj(E_0, G1_0)
    if axis is Axis.Z:
        # g cos(k x0 + eta x) expanded around the trap centre
        s, c = math.sin(p.kx0), math.cos(p.kx0)
        mode = c * eye_ph - s * eta * x
        if cfg.ld_order >= 2:
            mode = mode - (c * eta**2 / 2) * (x @ x)
        coupling = p.g * _kron(cav, mode)
        coupling = coupling + coupling.getH()
        control = (p.omega_l / 2) * _kron(ctl, eye_ph)
        control = control + control.getH()
    else:
        coupling = p.g_eff * _kron(cav, eye_ph)
        coupling = coupling + coupling.getH()
        control = (p.omega_l / 2) * _kron(ctl, _expansion(x, 1j * eta, cfg.ld_order))
        control = control + control.getH()
    h = (h + coupling + control).tocsr()

    jumps = [math.sqrt(2 * p.kappa) * _kron(_proj(G2_0, G2_1), eye_ph)]
    for target, beta in ((G2_0, p.beta2), (G1_0, p.beta1)):
        if beta == 0:
            continue
        sigma = _proj(target, E_0)
        if cfg.recoil_model == "none":
            jumps.append(math.sqrt(2 * p.gamma * beta) * _kron(sigma, eye_ph))
            continue
        # two emission directions along +/- axis, weight sqrt(alpha) each
        u = math.sqrt(p.alpha(axis)) * eta
        for sign in (1, -1):
            kick = _expansion(x, 1j * sign * u, cfg.ld_order)
            jumps.append(math.sqrt(p.gamma * beta) * _kron(sigma, kick))
    return h, jumps


def _spre(a, eye):
    return sp.kron(eye, a, format="csr")


def _spost(a, eye):
    return sp.kron(a.T, eye, format="csr")


def build_liouvillian(params: SystemParams, cfg: OracleConfig | None = None) -> Liouvillian:
    cfg = cfg or OracleConfig()
    if cfg.hilbert_dim > cfg.dim_cap:
        raise ParameterError(
            f"Hilbert dimension {cfg.hilbert_dim} exceeds cap {cfg.dim_cap}; lower n_max")
    h, jumps = _hamiltonian_and_jumps(params, cfg)
    dim = h.shape[0]
    eye = sp.identity(dim, dtype=complex, format="csr")
    lv = -1j * (_spre(h, eye) - _spost(h, eye))
    for j in jumps:
        jd = j.getH().tocsr()
        jdj = (jd @ j).tocsr()
        lv = lv + sp.kron(j.conj(), j, format="csr") - 0.5 * _spre(jdj, eye) - 0.5 * _spost(jdj, eye)
    lv = lv.tocsr()
    lv.eliminate_zeros()
    return Liouvillian(lv, cfg.n_max + 1, params, cfg)


# -- states and observables ------------------------------------------------

def thermal_distribution(mean: float, n: int) -> np.ndarray:
    """Geometric distribution with the given mean, truncated to n levels."""
    if mean < 0:
        raise ParameterError("mean occupation must be >= 0")
    if mean == 0:
        p = np.zeros(n)
        p[0] = 1.0
        return p
    ratio = mean / (1 + mean)
    p = ratio ** np.arange(n)
    return p / p.sum()


def initial_state(n_phonon: int, m0: float = 0.0, kind: str = "thermal") -> np.ndarray:
    """|g2,0><g2,0| times a diagonal phonon state (thermal or Fock)."""
    if kind == "fock":
        if m0 != int(m0) or not 0 <= m0 < n_phonon:
            raise ParameterError("Fock initial state needs an integer 0 <= m0 <= n_max")
        pops = np.zeros(n_phonon)
        pops[int(m0)] = 1.0
    elif kind == "thermal":
        pops = thermal_distribution(m0, n_phonon)
    else:
        raise ParameterError(f"unknown initial state kind {kind!r}")
    rho = np.zeros((4 * n_phonon, 4 * n_phonon), dtype=complex)
    rho[:n_phonon, :n_phonon] = np.diag(pops)  # G2_0 block is first
    return rho


def _unvec(y: np.ndarray, dim: int) -> np.ndarray:
    return y.reshape((dim, dim), order="F")


def _vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def phonon_distribution(rho: np.ndarray, n_phonon: int) -> np.ndarray:
    diag = np.real(np.diag(rho)).reshape(4, n_phonon)
    return diag.sum(axis=0)


def _observables(rho: np.ndarray, n_phonon: int):
    diag = np.real(np.diag(rho)).reshape(4, n_phonon)
    pm = diag.sum(axis=0)
    return (
        float(pm @ np.arange(n_phonon)),
        float(abs(np.trace(rho) - 1.0)),
        float(diag[E_0].sum()),
        float(diag[G2_1].sum()),
        float(pm[-1]),
    )


def _check_density_matrix(rho: np.ndarray, tol: float = 1e-8):
    if abs(np.trace(rho) - 1) > tol:
        raise ParameterError("initial state must have unit trace")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ParameterError("initial state must be Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -tol:
        raise ParameterError("initial state must be positive semidefinite")


# -- time evolution -----------------------------------------------------------

@dataclass(frozen=True)
class OracleRun:
    config: OracleConfig
    t: np.ndarray  # us
    m_mean: np.ndarray
    trace_err: np.ndarray
    p_e: np.ndarray
    n_cav: np.ndarray
    min_eig: np.ndarray  # smallest eigenvalue of rho at each sample
    cutoff_population: float  # max over the run
    gamma_fit: float  # 1/us
    m_ss: float
    m0_fit: float
    fit_residual: float
    converged: bool
    diagnostics: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "gamma_fit_per_ms": self.gamma_fit * 1e3,
            "m_ss": self.m_ss,
            "residual": self.fit_residual,
            "converged": self.converged,
            "n_max": self.config.n_max,
            "cutoff_population": self.cutoff_population,
            "diagnostics": list(self.diagnostics),
        }


def _exp_model(t, m_ss, m0, rate):
    return m_ss + (m0 - m_ss) * np.exp(-rate * t)


def fit_exponential(t: np.ndarray, m: np.ndarray, rate_guess: float):
    """Least-squares fit of m(t) = m_ss + (m0 - m_ss) exp(-rate t).

    Returns ``(rate, m_ss, m0, residual)`` with the residual as rms error
    relative to the total swing of ``m``; ``rate`` is NaN if the fit fails.
    """
    swing = max(np.ptp(m), 1e-12)
    if not (math.isfinite(rate_guess) and rate_guess != 0):
        rate_guess = 3.0 / max(t[-1], 1e-12)
    decay = math.exp(-rate_guess * t[-1]) if rate_guess * t[-1] > -50 else 0.0
    ss_guess = (m[-1] - m[0] * decay) / (1 - decay) if decay != 1 else m[-1]
    try:
        popt, _ = curve_fit(_exp_model, t, m, p0=[ss_guess, m[0], rate_guess], maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        log.warning("exponential fit failed: %s", exc)
        return math.nan, math.nan, math.nan, math.inf
    resid = m - _exp_model(t, *popt)
    return float(popt[2]), float(popt[0]), float(popt[1]), float(np.sqrt(np.mean(resid**2)) / swing)


def default_time_grid(params: SystemParams, cfg: OracleConfig, m0: float = 0.0):
    """Sampling times set by the rate-theory estimate of the cooling rate.

    Cooling: 5 / Gamma.  Heating: stop when the predicted <m> reaches a
    quarter of the cutoff so truncation does not bend the curve.
    """
    est = rates_resolvent(params, cfg.axis)
    t_final = cfg.t_final
    if t_final is None:
        rate = est.cooling_rate
        if est.divergent or not math.isfinite(rate) or rate == 0:
            t_final = 1000.0
        elif rate > 0:
            t_final = 5.0 / rate
        else:
            target = cfg.n_max / 4
            a = est.a_plus / -rate
            t_final = math.log((target + a) / (m0 + a)) / -rate if target > m0 else 1.0 / -rate
    dt = cfg.sample_dt if cfg.sample_dt is not None else t_final / cfg.n_samples
    if t_final < 10 * dt:
        raise ParameterError("t_final must be at least 10 sample_dt")
    n = int(round(t_final / dt))
    return np.linspace(0.0, n * dt, n + 1), est


# Liouville-space size up to which a dense one-step propagator is formed
DENSE_PROPAGATOR_LIMIT = 6000


def _expm_trajectory(mat, y0: np.ndarray, t: np.ndarray) -> np.ndarray:
    """exp(L t_k) y0 on the sample grid; ``y0`` may hold several columns.

    Uniform grids reuse one dense propagator exp(L dt): the phonon
    coherences oscillate at the trap frequency with almost no damping, which
    makes Krylov methods slow over the hundreds of trap periods of a
    cooling run, while a single dense exponential is cheap at these sizes.
    """
    out = np.empty((len(t),) + y0.shape, dtype=complex)
    out[0] = y0
    steps = np.diff(t)
    if len(steps) == 0:
        return out
    uniform = np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
    if uniform and mat.shape[0] <= DENSE_PROPAGATOR_LIMIT:
        prop = scipy.linalg.expm(mat.toarray() * steps[0])
        for k in range(1, len(t)):
            out[k] = prop @ out[k - 1]
        return out
    for k, dt in enumerate(steps, start=1):
        out[k] = spla.expm_multiply(mat * dt, out[k - 1])
    return out


def _propagate(lv: Liouvillian, y0: np.ndarray, t: np.ndarray, cfg: OracleConfig) -> np.ndarray:
    mat = lv.matrix
    t = np.asarray(t, dtype=float)
    if cfg.integrator == "expm_krylov":
        return _expm_trajectory(mat, y0, t)
    # stiff system (ns internal vs ms motional scales): implicit Radau IIA,
    # which scipy only runs on real vectors
    re, im = mat.real.tocsr(), mat.imag.tocsr()
    real_mat = sp.bmat([[re, -im], [im, re]], format="csc")
    size = len(y0)
    sol = solve_ivp(lambda _, y: real_mat @ y, (t[0], t[-1]), np.concatenate([y0.real, y0.imag]),
                    method="Radau", t_eval=t, jac=real_mat, rtol=cfg.rel_tol, atol=cfg.abs_tol)
    if not sol.success:
        raise OracleError(f"integration failed: {sol.message}")
    return (sol.y[:size] + 1j * sol.y[size:]).T


def evolve(lv: Liouvillian, rho0: np.ndarray, cfg: OracleConfig | None = None,
           t: np.ndarray | None = None) -> OracleRun:
    """Integrate the master equation and fit the motional relaxation."""
    cfg = cfg or lv.config
    _check_density_matrix(rho0)
    dim = lv.hilbert_dim
    n = lv.n_phonon
    m_start = float(phonon_distribution(rho0, n) @ np.arange(n))
    if t is None:
        t, est = default_time_grid(lv.params, cfg, m_start)
        rate_guess = est.cooling_rate
    else:
        t = np.asarray(t, dtype=float)
        rate_guess = rates_resolvent(lv.params, cfg.axis).cooling_rate
    ys = _propagate(lv, _vec(rho0), t, cfg)

    cols = {k: np.empty(len(t)) for k in ("m", "trace", "pe", "ncav", "cut", "mineig")}
    for k, y in enumerate(ys):
        rho = _unvec(y, dim)
        m, tr, pe, nc, cut = _observables(rho, n)
        cols["m"][k], cols["trace"][k], cols["pe"][k] = m, tr, pe
        cols["ncav"][k], cols["cut"][k] = nc, cut
        cols["mineig"][k] = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]

    diagnostics = []
    if np.max(cols["trace"]) > 1e-8:
        diagnostics.append(f"trace drift {np.max(cols['trace']):.2e}")
    if np.min(cols["mineig"]) < -1e-8:
        diagnostics.append(f"negative eigenvalue {np.min(cols['mineig']):.2e}")
    rate, m_ss, m0, resid = fit_exponential(t, cols["m"], rate_guess)
    cutoff = float(np.max(cols["cut"]))
    converged = math.isfinite(rate) and resid < FIT_RESIDUAL_LIMIT
    if not converged:
        diagnostics.append(f"fit residual {resid:.2e}")
    if cutoff > CUTOFF_RERUN_LIMIT:
        converged = False
        diagnostics.append(f"population {cutoff:.2e} at cutoff n_max={cfg.n_max}: rerun with larger n_max")
    return OracleRun(cfg, t, cols["m"], cols["trace"], cols["pe"], cols["ncav"], cols["mineig"],
                     cutoff, rate, m_ss, m0, resid, converged, diagnostics)


@dataclass(frozen=True)
class PairedRun:
    """Two trajectories from Fock states m_low < m_high under one propagator."""

    t: np.ndarray
    m_low: np.ndarray
    m_high: np.ndarray
    a_plus_fit: float  # 1/us
    a_minus_fit: float
    fit_residual: float  # rms over both trajectories, absolute in <m>
    max_cutoff_population: float

    @property
    def gamma_fit(self) -> float:
        return self.a_minus_fit - self.a_plus_fit

    @property
    def m_ss(self) -> float | None:
        g = self.gamma_fit
        return self.a_plus_fit / g if g > 0 else None


def _chain_generator(a_plus: float, a_minus: float, n: int) -> np.ndarray:
    m = np.arange(n, dtype=float)
    gen = np.zeros((n, n))
    gen[np.arange(1, n), np.arange(n - 1)] = (m[:-1] + 1) * a_plus
    gen[np.arange(n - 1), np.arange(1, n)] = m[1:] * a_minus
    return gen - np.diag(gen.sum(axis=0))


def chain_mean_trajectory(a_plus: float, a_minus: float, p0: np.ndarray,
                          t: np.ndarray) -> np.ndarray:
    """<m(t)> of the birth-death chain truncated to len(p0) levels (reflecting top)."""
    n = len(p0)
    gen = _chain_generator(a_plus, a_minus, n)
    levels = np.arange(n)
    return np.array([levels @ (scipy.linalg.expm(gen * tk) @ p0) for tk in t])


def paired_relaxation(lv: Liouvillian, cfg: OracleConfig | None = None, m_low: int = 0,
                      m_high: int = 3, t: np.ndarray | None = None) -> PairedRun:
    """Sideband rates from two oracle trajectories and a truncated-chain fit.

    Both Fock-state runs are fitted at once with the birth-death chain cut
    at the same n_max, so the phonon cutoff is modelled rather than
    ignored.  Two starting points separate A+ from A-, which a single
    trajectory at a heating point does not: it barely bends before it
    reaches the cutoff.
    """
    from scipy.optimize import least_squares

    cfg = cfg or lv.config
    n = lv.n_phonon
    if not 0 <= m_low < m_high < n:
        raise ParameterError("need 0 <= m_low < m_high <= n_max")
    if t is None:
        t, est = default_time_grid(lv.params, cfg, float(m_high))
    else:
        est = rates_resolvent(lv.params, cfg.axis)
    t = np.asarray(t, dtype=float)
    y0 = np.stack([_vec(initial_state(n, m_low, "fock")), _vec(initial_state(n, m_high, "fock"))],
                  axis=1)
    if cfg.integrator == "expm_krylov":
        ys = _expm_trajectory(lv.matrix, y0, t)
    else:
        ys = np.stack([_propagate(lv, y0[:, c], t, cfg) for c in range(2)], axis=2)
    dim = lv.hilbert_dim
    obs = np.array([[_observables(_unvec(ys[k, :, c], dim), n) for c in range(2)]
                    for k in range(len(t))])
    m = obs[:, :, 0]
    starts = [np.eye(n)[m_low], np.eye(n)[m_high]]

    def residual(log_rates):
        ap, am = np.exp(log_rates)
        return np.concatenate([chain_mean_trajectory(ap, am, p0, t) - m[:, c]
                               for c, p0 in enumerate(starts)])

    guess = [est.a_plus, est.a_minus] if not est.divergent else [1e-3, 1e-3]
    guess = np.log(np.maximum(guess, 1e-9))
    sol = least_squares(residual, guess, x_scale=1.0, xtol=1e-12, ftol=1e-12)
    ap, am = np.exp(sol.x)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    return PairedRun(t, m[:, 0], m[:, 1], float(ap), float(am), rms, float(obs[:, :, 4].max()))


def run_oracle(params: SystemParams, cfg: OracleConfig | None = None, m0: float = 0.0,
               initial: str = "thermal") -> OracleRun:
    cfg = cfg or OracleConfig()
    lv = build_liouvillian(params, cfg)
    return evolve(lv, initial_state(lv.n_phonon, m0, initial), cfg)


# -- steady state -------------------------------------------------------------

@dataclass(frozen=True)
class SteadyState:
    rho: np.ndarray
    phonon: np.ndarray  # marginal p_m
    mean_m: float
    temperature_uk: float | None  # from the mean occupation, thermal assumption
    cutoff_population: float
    physical: bool
    method: str


def _zero_tolerance(mat) -> float:
    return 1e-9 * max(1.0, spla.norm(mat, 1))


def kernel_dimension(lv: Liouvillian, k: int = 8) -> tuple[int, bool]:
    """Number of (numerically) zero eigenvalues and whether it is exact.

    Dense for small systems; otherwise shift-invert Arnoldi around zero,
    which can only resolve up to ``k`` eigenvalues.
    """
    mat = lv.matrix
    tol = _zero_tolerance(mat)
    size = mat.shape[0]
    if size <= 1200:
        vals = scipy.linalg.eigvals(mat.toarray())
        return int(np.sum(np.abs(vals) < tol)), True
    k = min(k, size - 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = spla.eigs(mat.tocsc(), k=k, sigma=-tol, which="LM", return_eigenvectors=False)
    count = int(np.sum(np.abs(vals) < tol))
    return count, count < k


def steady_state(lv: Liouvillian, check_kernel: bool = True) -> SteadyState:
    """Trace-one null vector of the Liouvillian.

    Solved directly with the trace condition replacing one equation; falls
    back to long-time integration if the sparse solve is inaccurate.
    """
    mat = lv.matrix
    dim = lv.hilbert_dim
    n = lv.n_phonon
    if check_kernel:
        kdim, exact = kernel_dimension(lv)
        if kdim != 1:
            raise DegenerateSteadyStateError(kdim, exact)
    trace_row = _vec(np.eye(dim)).conj()
    a = mat.tolil()
    a[0, :] = trace_row
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    method = "null_space"
    try:
        y = spla.spsolve(a.tocsc(), rhs)
        ok = np.all(np.isfinite(y)) and np.linalg.norm(mat @ y) < 1e-8 * max(1.0, spla.norm(mat, 1))
    except RuntimeError:
        ok = False
    if not ok:
        method = "long_time"
        rho0 = initial_state(n)
        cfg = lv.config
        t = np.array([0.0, 50.0 / max(abs(rates_resolvent(lv.params, cfg.axis).cooling_rate), 1e-6)])
        y = _propagate(lv, _vec(rho0), t, cfg)[-1]
    rho = _unvec(y, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    pm = phonon_distribution(rho, n)
    mean = float(pm @ np.arange(n))
    cutoff = float(pm[-1])
    omega = lv.params.trap_frequency(lv.config.axis)
    temp = temperature_from_mean(mean, omega) if mean > 0 else 0.0
    return SteadyState(rho, pm, mean, temp, cutoff, cutoff < CUTOFF_PHYSICAL_LIMIT, method)


# -- saturated Lamb-Dicke rates ---------------------------------------------

def _internal_liouvillian(params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Liouvillian of the motionless four-level system and its steady state."""
    h = build_effective_hamiltonian(params).matrix
    h = 0.5 * (h + h.conj().T) + build_drive(params).matrix  # decay goes in the jumps
    eye = np.eye(4)
    lv = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op in build_decay_channels(params):
        j = op.matrix
        jdj = j.conj().T @ j
        lv += np.kron(j.conj(), j) - 0.5 * np.kron(eye, jdj) - 0.5 * np.kron(jdj.T, eye)
    a = lv.copy()
    a[0, :] = _vec(eye).conj()
    rhs = np.zeros(16, dtype=complex)
    rhs[0] = 1.0
    rho = np.linalg.solve(a, rhs).reshape((4, 4), order="F")
    return lv, 0.5 * (rho + rho.conj().T)


def lamb_dicke_rates(params: SystemParams, axis: Axis | str = Axis.Z) -> RateResult:
    """Rates to second order in eta but to all orders in the probe.

    Sideband rates are the fluctuation spectrum of the mechanical coupling
    operator F in the driven internal steady state,
    A-/+ = 2 Re Tr[F (-L0 -/+ i omega)^-1 (F - <F>) rho], plus recoil
    diffusion 2 gamma alpha eta^2 P_e.  For a weak probe this reduces to
    :func:`~ceitcool.rates.rates_resolvent` on the dark line, or anywhere
    if ``beta1 = 0``.  Two effects separate them otherwise, both present in
    the Lindblad oracle and absent from the amplitude picture: saturation
    of the ground state at finite probe power, and incoherent refilling of
    |g1> by spontaneous decay, which matters off the dark line at any
    probe power.
    """
    axis = Axis.parse(axis)
    p = params
    omega = p.trap_frequency(axis)
    eta = p.eta(axis)
    if eta >= LAMB_DICKE_LIMIT:
        warnings.warn(f"eta = {eta:.3f}: outside the Lamb-Dicke regime", stacklevel=2)
    lv, rho = _internal_liouvillian(p)
    f = build_mech_coupling(p, axis).matrix
    mean_f = np.trace(f @ rho)
    src = _vec((f - mean_f * np.eye(4)) @ rho)
    f_row = _vec(f.T)  # Tr[F X] = vec(F^T) . vec(X)

    def spectrum(nu):
        x = np.linalg.solve(-lv - 1j * nu * np.eye(16), src)
        return 2 * float(np.real(f_row @ x))

    a_minus, a_plus = spectrum(omega), spectrum(-omega)
    diffusion = 2 * p.gamma * p.alpha(axis) * eta**2 * float(rho[E_0, E_0].real)
    return RateResult(a_plus + diffusion, a_minus + diffusion,
                      {"diffusion": diffusion, "scattering": (a_plus, a_minus)},
                      axis, "lamb_dicke_me")


# -- rate-equation reference ---------------------------------------------------

def birth_death_stationary(a_plus: float, a_minus: float, cutoff: int = 200) -> np.ndarray:
    """Stationary distribution of the phonon birth-death chain.

    Up-rate (m+1) A+, down-rate m A-; solved as the null vector of the
    truncated generator, not through detailed balance.
    """
    n = cutoff + 1
    m = np.arange(n, dtype=float)
    up = (m[:-1] + 1) * a_plus
    down = m[1:] * a_minus
    gen = np.zeros((n, n))
    gen[np.arange(1, n), np.arange(n - 1)] = up  # m -> m+1
    gen[np.arange(n - 1), np.arange(1, n)] = down  # m -> m-1
    gen -= np.diag(gen.sum(axis=0))
    gen[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return np.linalg.solve(gen, rhs)
