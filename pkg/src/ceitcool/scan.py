"""Cooling maps over two detuning axes.

A grid point is a pair of laser detunings applied to a fixed baseline; the
cavity never moves.  Points are independent, so the grid is cut into row
blocks that worker processes evaluate; blocks are merged by row index,
which makes the output identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dressed import dressed_states
from .model import Axis, ParameterError, SystemParams, mhz, to_mhz
from .rates import PER_MS, on_eit_line, rates_ceit_analytic, rates_resolvent

log = logging.getLogger(__name__)

AXIS_NAMES = ("delta_pc", "delta_la", "delta_pa")
POLICIES = ("z_only", "z_and_y_veto")
CLASSES = ("cooling", "heating", "divergent")
CSV_COLUMNS = ("x_mhz", "y_mhz", "gamma_z_per_ms", "m_st_z", "gamma_y_per_ms", "class")
ROWS_PER_TILE = 8


class ScanError(RuntimeError):
    """Some tiles of a scan did not complete."""

    def __init__(self, incomplete: list[tuple[int, int]], cause: str):
        self.incomplete = incomplete
        tiles = ", ".join(f"rows {a}-{b - 1}" for a, b in incomplete)
        super().__init__(f"scan incomplete ({cause}); missing tiles: {tiles}")


@dataclass(frozen=True)
class ScanAxis:
    name: str
    lo_mhz: float
    hi_mhz: float
    n: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ParameterError(f"scan axis must be one of {AXIS_NAMES}, got {self.name!r}")
        if not (math.isfinite(self.lo_mhz) and math.isfinite(self.hi_mhz)):
            raise ParameterError(f"range of {self.name} must be finite")
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f"{self.name} needs at least 2 points")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def parse(cls, text: str) -> "ScanAxis":
        """From ``name:lo:hi:n`` with lo/hi in MHz."""
        parts = text.split(":")
        if len(parts) != 4:
            raise ParameterError(f"axis spec {text!r} is not name:lo:hi:n")
        name, lo, hi, n = parts
        try:
            return cls(name, float(lo), float(hi), int(n))
        except ValueError as exc:
            raise ParameterError(f"axis spec {text!r}: {exc}") from None

    @property
    def values_mhz(self) -> np.ndarray:
        return np.linspace(self.lo_mhz, self.hi_mhz, self.n)

    @property
    def values(self) -> np.ndarray:
        return mhz(1.0) * self.values_mhz

    def spec(self) -> str:
        return f"{self.name}:{self.lo_mhz!r}:{self.hi_mhz!r}:{self.n}"


@dataclass(frozen=True)
class ScanGrid:
    x: ScanAxis
    y: ScanAxis
    fixed: SystemParams = field(default_factory=SystemParams)
    axes: tuple = (Axis.Z,)
    preset: str | None = None

    def __post_init__(self):
        if self.x.name == self.y.name:
            raise ParameterError("x and y must scan different parameters")
        if {self.x.name, self.y.name} == {"delta_pc", "delta_pa"}:
            raise ParameterError("delta_pc and delta_pa both set the probe; pick one")
        axes = tuple(sorted({Axis.parse(a) for a in self.axes}, key=lambda a: a.value != "z"))
        if not axes:
            raise ParameterError("at least one axis must be computed")
        object.__setattr__(self, "axes", axes)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.y.n, self.x.n)

    def params_at(self, i: int, j: int) -> SystemParams:
        """Parameters at row ``i`` (y) and column ``j`` (x)."""
        return self.fixed.with_detunings(**{self.x.name: float(self.x.values[j]),
                                            self.y.name: float(self.y.values[i])})

    def describe(self) -> dict:
        return {
            "x": self.x.spec(),
            "y": self.y.spec(),
            "axes": [a.value for a in self.axes],
            "preset": self.preset,
            "fixed": self.fixed.to_mhz_dict(),
        }


PRESETS = {
    # probe-cavity detuning against control-atom detuning, delta_LC in [-25, 20]
    "fig2a": dict(x=("delta_pc", -30.0, 15.0), y=("delta_la", -9.0, 36.0), axes=("z",)),
    # the small box around the three-photon resonance
    "fig3a": dict(x=("delta_pc", -1.0, 1.0), y=("delta_la", 15.0, 17.0), axes=("z", "y")),
}
PRESET_KX0 = math.pi / 4
PRESET_DELTA_CA_MHZ = 16.0


def preset(name: str, n: int = 100, fixed: SystemParams | None = None) -> ScanGrid:
    """Figure preset on an n x n grid; the geometry is forced to the preset's."""
    if name not in PRESETS:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    spec = PRESETS[name]
    base = (fixed or SystemParams()).replace(kx0=PRESET_KX0, delta_ca=mhz(PRESET_DELTA_CA_MHZ))
    return ScanGrid(ScanAxis(*spec["x"], n), ScanAxis(*spec["y"], n), base, spec["axes"], name)


@dataclass
class ScanResult:
    grid: ScanGrid
    # (ny, nx) arrays in 1/us; NaN where divergent or not computed
    gamma: dict
    a_plus: dict
    a_minus: dict
    m_st: dict  # NaN where Gamma <= 0
    channels: dict  # axis -> channel -> array (ny, nx) or (ny, nx, 2)
    divergent: np.ndarray  # (ny, nx) bool, any requested axis
    dressed_omega: np.ndarray  # (ny, nx, 3), rad/us, descending
    dressed_width: np.ndarray
    analytic_gamma_z: np.ndarray  # closed form on the EIT line, NaN elsewhere
    provenance: dict = field(default_factory=dict)

    @property
    def classification(self) -> np.ndarray:
        policy = "z_and_y_veto" if Axis.Y in self.grid.axes else "z_only"
        return classify(self, policy)

    def rate_result(self, i: int, j: int, axis: Axis | str = Axis.Z):
        """Rebuild the RateResult of one point."""
        from .rates import RateResult

        axis = Axis.parse(axis)
        if axis not in self.gamma:
            raise ParameterError(f"axis {axis.value} was not computed")
        if np.isnan(self.a_plus[axis][i, j]):
            return RateResult.diverged(axis, "resolvent")
        chans = {}
        for name, arr in self.channels[axis].items():
            v = arr[i, j]
            chans[name] = float(v) if np.ndim(v) == 0 else (float(v[0]), float(v[1]))
        return RateResult(float(self.a_plus[axis][i, j]), float(self.a_minus[axis][i, j]),
                          chans, axis, "resolvent")


def classify(result: ScanResult, policy: str = "z_only") -> np.ndarray:
    """Label grid: cooling, heating or divergent.

    ``z_and_y_veto`` keeps a point as cooling only if it is cooled along Z
    and not heated along Y.
    """
    if policy not in POLICIES:
        raise ParameterError(f"policy must be one of {POLICIES}")
    if Axis.Z not in result.gamma:
        raise ParameterError("classification needs the Z axis")
    gz = result.gamma[Axis.Z]
    bad = np.isnan(gz)
    cooling = gz > 0
    if policy == "z_and_y_veto":
        if Axis.Y not in result.gamma:
            raise ParameterError("z_and_y_veto needs Y-axis rates in the scan")
        gy = result.gamma[Axis.Y]
        bad = bad | np.isnan(gy)
        cooling = cooling & (gy >= 0)
    labels = np.where(cooling, "cooling", "heating").astype(object)
    labels[bad] = "divergent"
    return labels


# -- evaluation ------------------------------------------------------------

_Z_CHANNELS = ("diffusion", "atomic", "cavity")


def _evaluate_rows(grid: ScanGrid, start: int, stop: int) -> dict:
    nx = grid.x.n
    rows = stop - start
    out = {"start": start, "stop": stop}
    for axis in grid.axes:
        tag = axis.value
        for key in ("a_plus", "a_minus"):
            out[f"{key}:{tag}"] = np.full((rows, nx), np.nan)
        out[f"diffusion:{tag}"] = np.full((rows, nx), np.nan)
        for ch in _Z_CHANNELS[1:]:
            out[f"{ch}:{tag}"] = np.full((rows, nx, 2), np.nan)
    out["d_omega"] = np.empty((rows, nx, 3))
    out["d_width"] = np.empty((rows, nx, 3))
    out["analytic"] = np.full((rows, nx), np.nan)
    for r in range(rows):
        for j in range(nx):
            p = grid.params_at(start + r, j)
            for axis in grid.axes:
                res = rates_resolvent(p, axis)
                if res.divergent:
                    continue
                tag = axis.value
                out[f"a_plus:{tag}"][r, j] = res.a_plus
                out[f"a_minus:{tag}"][r, j] = res.a_minus
                out[f"diffusion:{tag}"][r, j] = res.channels["diffusion"]
                for ch in _Z_CHANNELS[1:]:
                    out[f"{ch}:{tag}"][r, j] = res.channels[ch]
            if Axis.Z in grid.axes and on_eit_line(p):
                out["analytic"][r, j] = rates_ceit_analytic(p).cooling_rate
            states = dressed_states(p)
            out["d_omega"][r, j] = [s.omega for s in states]
            out["d_width"][r, j] = [s.linewidth for s in states]
    return out


def _tiles(ny: int, rows_per_tile: int) -> list[tuple[int, int]]:
    return [(a, min(a + rows_per_tile, ny)) for a in range(0, ny, rows_per_tile)]


def default_workers() -> int:
    """Worker count from ``CEITCOOL_WORKERS``, else 1."""
    value = os.environ.get("CEITCOOL_WORKERS", "1")
    try:
        n = int(value)
    except ValueError:
        raise ParameterError(f"CEITCOOL_WORKERS must be an integer, got {value!r}") from None
    if n < 1:
        raise ParameterError("CEITCOOL_WORKERS must be >= 1")
    return n


def run_scan(grid: ScanGrid, workers: int | None = None,
             rows_per_tile: int = ROWS_PER_TILE) -> ScanResult:
    """Evaluate the resolvent rates (and dressed states) on every grid point."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    ny, nx = grid.shape
    tiles = _tiles(ny, rows_per_tile)
    blocks: dict[int, dict] = {}
    if workers == 1:
        for a, b in tiles:
            blocks[a] = _evaluate_rows(grid, a, b)
    else:
        failure = None
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_evaluate_rows, grid, a, b): (a, b) for a, b in tiles}
            for fut in as_completed(futures):
                try:
                    blocks[futures[fut][0]] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported below with the tile list
                    failure = failure or repr(exc)
                    log.error("tile %s failed: %r", futures[fut], exc)
        if failure is not None:
            raise ScanError([t for t in tiles if t[0] not in blocks], failure)
    return _merge(grid, [blocks[a] for a, _ in tiles])


def _merge(grid: ScanGrid, blocks: list[dict]) -> ScanResult:
    def cat(key):
        return np.concatenate([b[key] for b in blocks], axis=0)

    gamma, a_plus, a_minus, m_st, channels = {}, {}, {}, {}, {}
    divergent = np.zeros(grid.shape, dtype=bool)
    for axis in grid.axes:
        tag = axis.value
        ap, am = cat(f"a_plus:{tag}"), cat(f"a_minus:{tag}")
        g = am - ap
        a_plus[axis], a_minus[axis], gamma[axis] = ap, am, g
        with np.errstate(divide="ignore", invalid="ignore"):
            m_st[axis] = np.where(g > 0, ap / g, np.nan)
        channels[axis] = {ch: cat(f"{ch}:{tag}") for ch in _Z_CHANNELS}
        divergent |= np.isnan(g)
    analytic = cat("analytic")
    result = ScanResult(grid, gamma, a_plus, a_minus, m_st, channels, divergent,
                        cat("d_omega"), cat("d_width"), analytic)
    result.provenance = {
        "code": f"ceitcool {__version__}",
        "grid": grid.describe(),
        "n_divergent": int(divergent.sum()),
        "n_on_eit_line": int(np.isfinite(analytic).sum()),
        "max_analytic_rel_dev": _analytic_deviation(result),
        "units": {"gamma": "1/ms", "frequency": "MHz"},
    }
    return result


def _analytic_deviation(result: ScanResult) -> float | None:
    mask = np.isfinite(result.analytic_gamma_z) & np.isfinite(result.gamma[Axis.Z]) \
        if Axis.Z in result.gamma else np.zeros(result.grid.shape, dtype=bool)
    if not mask.any():
        return None
    a = result.analytic_gamma_z[mask]
    r = result.gamma[Axis.Z][mask]
    scale = np.maximum(np.abs(a), np.max(np.abs(a)) * 1e-12)
    return float(np.max(np.abs(a - r) / scale))


# -- diagnostics -----------------------------------------------------------

def near_dressed_lines(result: ScanResult, margin: float, omega: float | None = None) -> np.ndarray:
    """Mask of points within ``margin`` (rad/us) of a dressed-state sideband line.

    Only meaningful when x is the probe detuning delta_pc.
    """
    if result.grid.x.name != "delta_pc":
        raise ParameterError("dressed-state lines are defined against delta_pc")
    if omega is None:
        omega = result.grid.fixed.omega_z
    x = result.grid.x.values[None, :, None]
    d = result.dressed_omega
    dist = np.minimum.reduce([np.abs(x - d), np.abs(x - d + omega), np.abs(x - d - omega)])
    return (dist < margin).any(axis=2)


def roughness(result: ScanResult, axis: Axis | str = Axis.Z, exclude=None) -> float:
    """Largest |Gamma| jump (1/us) between neighbouring points outside ``exclude``."""
    g = result.gamma[Axis.parse(axis)]
    bad = np.isnan(g) if exclude is None else (np.isnan(g) | exclude)
    worst = 0.0
    for ax in (0, 1):
        diff = np.abs(np.diff(g, axis=ax))
        keep = ~(np.delete(bad, -1, axis=ax) | np.delete(bad, 0, axis=ax))
        if keep.any():
            worst = max(worst, float(diff[keep].max()))
    return worst


# -- output ----------------------------------------------------------------

def _fmt(v) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def to_csv(result: ScanResult) -> str:
    """CSV text; row-major over (y, x), floats written with repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    xs, ys = result.grid.x.values_mhz, result.grid.y.values_mhz
    gz = result.gamma.get(Axis.Z)
    mz = result.m_st.get(Axis.Z)
    gy = result.gamma.get(Axis.Y)
    labels = result.classification
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            w.writerow([
                _fmt(xv), _fmt(yv),
                _fmt(gz[i, j] * PER_MS) if gz is not None else "",
                _fmt(mz[i, j]) if mz is not None else "",
                _fmt(gy[i, j] * PER_MS) if gy is not None else "",
                labels[i, j],
            ])
    return buf.getvalue()


def sidecar(result: ScanResult, extra: dict | None = None) -> str:
    labels = result.classification
    counts = {c: int((labels == c).sum()) for c in CLASSES}
    body = {**result.provenance, "class_counts": counts, **(extra or {})}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def dressed_line_table(result: ScanResult) -> list[dict]:
    """Dressed frequencies (MHz) per y row, for overlaying on a map."""
    rows = []
    for i, yv in enumerate(result.grid.y.values_mhz):
        rows.append({"y_mhz": float(yv),
                     "omega_mhz": [to_mhz(w) for w in result.dressed_omega[i, 0]],
                     "width_mhz": [to_mhz(w) for w in result.dressed_width[i, 0]]})
    return rows
