"""Command-line front end.

Every subcommand resolves a full parameter set (defaults, then ``--config``,
then individual flags) and echoes it in its output.  Exit codes: 0 success,
1 computation error (JSON diagnostic on stderr), 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import shlex
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .dressed import dressed_states, excitation_spectrum
from .model import (
    PARAM_FILE_KEYS,
    Axis,
    ParameterError,
    SystemParams,
    intracavity_photon_number,
    mhz,
    to_mhz,
)
from .oracle import (
    OracleConfig,
    OracleError,
    build_liouvillian,
    evolve,
    initial_state,
    steady_state,
)
from .rates import (
    EITConditionError,
    rates_ceit_analytic,
    rates_free_space_eit,
    rates_resolvent,
)
from .scan import (
    POLICIES,
    PRESETS,
    ScanAxis,
    ScanError,
    ScanGrid,
    classify,
    default_workers,
    preset,
    run_scan,
    sidecar,
    to_csv,
)
from .thermometry import (
    PulseModel,
    ThermalState,
    ground_state_from_passage,
    mean_occ_from_sideband_ratio,
    sideband_ratio,
    synth_sideband_spectrum,
    temperature_from_p0,
)

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2

# flag -> (parameter-file key, help)
_PARAM_FLAGS = {
    "--g-mhz": ("g_mhz", "vacuum Rabi frequency g/2pi at the antinode (MHz)"),
    "--omega-l-mhz": ("omega_l_mhz", "control Rabi frequency/2pi (MHz)"),
    "--omega-p-mhz": ("omega_p_mhz", "probe drive strength/2pi (MHz)"),
    "--gamma-mhz": ("gamma_mhz", "atomic dipole decay rate gamma/2pi, HWHM (MHz)"),
    "--kappa-mhz": ("kappa_mhz", "cavity field decay rate kappa/2pi, HWHM (MHz)"),
    "--delta-ca-mhz": ("delta_ca_mhz", "cavity-atom detuning/2pi (MHz)"),
    "--delta-la-mhz": ("delta_la_mhz", "control-atom detuning/2pi (MHz)"),
    "--delta-pa-mhz": ("delta_pa_mhz", "probe-atom detuning/2pi (MHz)"),
    "--omega-z-mhz": ("omega_z_mhz", "trap frequency/2pi along the cavity axis (MHz)"),
    "--omega-y-mhz": ("omega_y_mhz", "trap frequency/2pi along the control axis (MHz)"),
    "--omega-rec-mhz": ("omega_rec_mhz", "recoil frequency/2pi (MHz)"),
    "--kx0-rad": ("kx0_rad", "trap offset from the cavity antinode, k x0 (rad)"),
    "--beta1": ("beta1", "branching fraction of |e> decay into |g1> (beta2 = 1 - beta1)"),
    "--alpha-z": ("alpha_z", "recoil dipole-pattern factor along the cavity axis"),
    "--alpha-y": ("alpha_y", "recoil dipole-pattern factor along the control axis"),
}


class ComputationError(RuntimeError):
    """Raised by handlers for results that exist but are unusable (divergent)."""


# -- parameters --------------------------------------------------------------

def load_config(path: str | Path) -> dict:
    """Flat parameter file: JSON object or ``key = value`` lines."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ParameterError(f"config {path}: expected a JSON object")
    else:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string("[params]\n" + text)
        except configparser.Error as exc:
            raise ParameterError(f"config {path}: {exc}") from None
        data = dict(parser["params"])
    allowed = set(PARAM_FILE_KEYS) | {"delta_pc_mhz", "delta_lc_mhz"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ParameterError(f"config {path}: unknown keys {unknown}")
    out = {}
    for key, value in data.items():
        try:
            out[key] = float(value)
        except (TypeError, ValueError):
            raise ParameterError(f"config {path}: {key} must be a number, got {value!r}") from None
    return out


def resolve_params(args: argparse.Namespace) -> SystemParams:
    values = load_config(args.config) if args.config else {}
    for flag, (key, _) in _PARAM_FLAGS.items():
        v = getattr(args, _dest(flag))
        if v is not None:
            values[key] = v
    for key in ("delta_pc_mhz", "delta_lc_mhz"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    delta_pc = values.pop("delta_pc_mhz", None)
    delta_lc = values.pop("delta_lc_mhz", None)
    if delta_pc is not None and "delta_pa_mhz" in values:
        raise ParameterError("--delta-pc-mhz and --delta-pa-mhz both set the probe; give one")
    if delta_lc is not None and "delta_la_mhz" in values:
        raise ParameterError("--delta-lc-mhz and --delta-la-mhz both set the control; give one")
    params = SystemParams.from_mhz(**values)
    if delta_lc is not None:
        params = params.with_detunings(delta_lc=mhz(delta_lc))
    if delta_pc is not None:
        params = params.with_detunings(delta_pc=mhz(delta_pc))
    return params


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def params_summary(p: SystemParams) -> dict:
    return {
        **p.to_mhz_dict(),
        "beta2": p.beta2,
        "derived": {
            "delta_pc_mhz": to_mhz(p.delta_pc),
            "delta_pl_mhz": to_mhz(p.delta_pl),
            "delta_lc_mhz": to_mhz(p.delta_lc),
            "g_eff_mhz": to_mhz(p.g_eff),
            "cooperativity": p.cooperativity,
            "eta_z": p.eta(Axis.Z),
            "eta_y": p.eta(Axis.Y),
            "lamb_dicke_ok": p.lamb_dicke_ok,
            "empty_cavity_photons": intracavity_photon_number(p),
        },
    }


# -- output ------------------------------------------------------------------

def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Axis):
        return obj.value
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def _clean(obj):
    """NaN/inf -> None so the JSON stays standard."""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    elif isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, default=_json_default, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Emitter:
    """Routes a result to stdout or a file, with provenance attached."""

    def __init__(self, args, provenance: dict):
        self.out = getattr(args, "out", None)
        self.fmt = getattr(args, "format", "json")
        self.provenance = provenance

    def json(self, body: dict) -> None:
        text = dumps({**body, "provenance": self.provenance})
        self._write(text)

    def csv(self, header, rows, summary: dict | None = None) -> None:
        text = _csv_text(header, rows)
        meta = {**(summary or {}), "provenance": self.provenance}
        if self.out:
            atomic_write(self.out, text)
            atomic_write(Path(self.out).with_suffix(".json"), dumps(meta))
        else:
            sys.stdout.write("# " + json.dumps(_clean(meta), default=_json_default) + "\n" + text)

    def table(self, body: dict, header, rows) -> None:
        if self.fmt == "csv":
            self.csv(header, rows, {k: v for k, v in body.items() if k != "rows"})
        else:
            self.json(body)

    def _write(self, text: str) -> None:
        if self.out:
            atomic_write(self.out, text)
        else:
            sys.stdout.write(text)


# -- handlers ----------------------------------------------------------------

def cmd_params(args, p, emit):
    emit.json({"params": params_summary(p)})


def cmd_dressed(args, p, emit):
    omega = mhz(args.omega_mhz) if args.omega_mhz is not None else p.omega_z
    states = dressed_states(p)
    rows = []
    body = {"states": [], "trap_omega_mhz": to_mhz(omega)}
    for s in states:
        w = s.weights
        body["states"].append({
            "label": s.label,
            "omega_mhz": to_mhz(s.omega),
            "linewidth_mhz": to_mhz(s.linewidth),
            "weights": w,
            "red_sideband_delta_pc_mhz": to_mhz(s.omega - omega),
            "blue_sideband_delta_pc_mhz": to_mhz(s.omega + omega),
            "exceptional": s.exceptional,
            "coalesced_with": s.coalesced_with,
        })
        rows.append([s.label, to_mhz(s.omega), to_mhz(s.linewidth),
                     w["g1,0"], w["g2,1"], w["e,0"]])
    emit.table(body, ["label", "omega_mhz", "linewidth_mhz", "w_g1", "w_cav", "w_e"], rows)


def cmd_spectrum(args, p, emit):
    if args.n < 2:
        raise ParameterError("--n must be >= 2")
    grid = mhz(1.0) * np.linspace(args.from_mhz, args.to_mhz, args.n)
    pts = excitation_spectrum(p, grid)
    rows = [[to_mhz(s.delta_pa), s.p_e, s.n_cav, s.transmission] for s in pts]
    body = {"points": [dict(zip(("delta_pa_mhz", "p_e", "n_cav", "transmission"), r))
                       for r in rows],
            "n_divergent": sum(s.divergent for s in pts)}
    emit.table(body, ["delta_pa_mhz", "p_e", "n_cav", "transmission"], rows)


def cmd_rates(args, p, emit):
    omega = mhz(args.omega_mhz) if args.omega_mhz is not None else None
    if args.method == "resolvent":
        res = rates_resolvent(p, args.axis, omega)
    elif args.method == "ceit":
        if Axis.parse(args.axis) is not Axis.Z:
            raise ParameterError("--method ceit is defined for --axis z only")
        res = rates_ceit_analytic(p, omega)
    else:
        res = rates_free_space_eit(p, omega, axis=args.axis,
                                   control_projection=args.control_projection,
                                   probe_projection=args.probe_projection)
    if res.divergent:
        raise ComputationError("divergent resolvent: a dressed state with zero linewidth "
                               "is resonant with a motional sideband")
    emit.json({"rates": res.to_json()})


def _scan_grid(args, p) -> ScanGrid:
    if args.preset:
        if args.x or args.y:
            raise ParameterError("--preset cannot be combined with --x/--y")
        grid = preset(args.preset, args.n, p)
        if args.axes:
            grid = ScanGrid(grid.x, grid.y, grid.fixed, _axes(args.axes), grid.preset)
        return grid
    if not (args.x and args.y):
        raise ParameterError("give --preset or both --x and --y")
    return ScanGrid(ScanAxis.parse(args.x), ScanAxis.parse(args.y), p, _axes(args.axes or "z"))


def _axes(text: str) -> tuple:
    try:
        return tuple(Axis.parse(a.strip()) for a in text.split(",") if a.strip())
    except ValueError as exc:
        raise ParameterError(f"--axes: {exc}") from None


def cmd_scan(args, p, emit):
    grid = _scan_grid(args, p)
    workers = args.workers if args.workers is not None else default_workers()
    result = run_scan(grid, workers)
    policy = args.policy or ("z_and_y_veto" if Axis.Y in grid.axes else "z_only")
    labels = classify(result, policy)
    extra = {"policy": policy,
             "policy_counts": {c: int((labels == c).sum()) for c in ("cooling", "heating", "divergent")},
             "provenance": emit.provenance}
    if args.format == "json":
        emit.json({"scan": json.loads(sidecar(result, {"policy": policy})),
                   "csv": to_csv(result).splitlines()})
        return
    text = to_csv(result)
    if args.out:
        atomic_write(args.out, text)
        atomic_write(Path(args.out).with_suffix(".json"), sidecar(result, extra))
    else:
        sys.stdout.write(text)


def cmd_oracle(args, p, emit):
    cfg = OracleConfig(n_max=args.n_max, ld_order=args.ld_order, axis=args.axis,
                       integrator=args.integrator, t_final=args.t_final_us,
                       sample_dt=args.sample_dt_us, recoil_model=args.recoil_model,
                       n_samples=args.n_samples)
    lv = build_liouvillian(p, cfg)
    run = evolve(lv, initial_state(lv.n_phonon, args.m0, args.initial), cfg)
    summary = run.summary()
    rate = rates_resolvent(p, cfg.axis)
    summary["rate_theory"] = {"gamma_per_ms": rate.cooling_rate * 1e3, "m_st": rate.m_st}
    if args.steady:
        ss = steady_state(lv)
        summary["steady_state"] = {"mean_m": ss.mean_m, "temperature_uk": ss.temperature_uk,
                                   "cutoff_population": ss.cutoff_population,
                                   "physical": ss.physical, "method": ss.method}
    if args.format == "csv":
        rows = zip(run.t, run.m_mean, run.trace_err, run.p_e, run.n_cav)
        emit.csv(["t_us", "m_mean", "trace_err", "p_e", "n_cav"], rows, summary)
    else:
        emit.json({"oracle": summary,
                   "trajectory": {"t_us": run.t, "m_mean": run.m_mean, "trace_err": run.trace_err,
                                  "p_e": run.p_e, "n_cav": run.n_cav}})


def cmd_thermometry(args, p, emit):
    if args.mode == "ratio":
        m = mean_occ_from_sideband_ratio(args.r)
        body = {"ratio": args.r, "mean_m": m}
        if args.omega_mhz is not None:
            body["temperature_uk"] = ThermalState(mhz(args.omega_mhz), m).temperature_uk
        emit.json({"thermometry": body})
    elif args.mode == "passage":
        p0 = ground_state_from_passage(args.p, args.efficiency)
        body = {"p_transfer": args.p, "efficiency": args.efficiency, "p0": p0}
        if args.omega_mhz is not None:
            body["temperature_uk"] = temperature_from_p0(p0, mhz(args.omega_mhz)) if p0 < 1 else 0.0
            body["mean_m"] = (1 - p0) / p0
        emit.json({"thermometry": body})
    else:
        omega = mhz(args.omega_mhz) if args.omega_mhz is not None else p.omega_y
        pulse = PulseModel(rabi=mhz(args.rabi_mhz), duration=args.duration_us,
                           eta=args.eta if args.eta is not None else p.eta(Axis.Y),
                           carrier_offset=mhz(args.carrier_mhz))
        spec = synth_sideband_spectrum(ThermalState(omega, args.mean_m), pulse)
        r = sideband_ratio(spec)
        summary = {"mean_m": args.mean_m, "red_blue_ratio": r,
                   "mean_m_from_ratio": mean_occ_from_sideband_ratio(r) if r < 1 else None}
        rows = zip(spec.detuning / mhz(1.0), spec.p_transfer)
        emit.csv(["delta_mw_mhz", "p_transfer"], rows, summary)


HANDLERS = {
    "params": cmd_params,
    "dressed": cmd_dressed,
    "spectrum": cmd_spectrum,
    "rates": cmd_rates,
    "scan": cmd_scan,
    "oracle": cmd_oracle,
    "thermometry": cmd_thermometry,
}


# -- parser ------------------------------------------------------------------

def _param_parent() -> argparse.ArgumentParser:
    par = argparse.ArgumentParser(add_help=False)
    g = par.add_argument_group("system parameters (frequencies linear, in MHz)")
    g.add_argument("--config", metavar="PATH",
                   help="parameter file (JSON or key = value lines); flags override it")
    g.add_argument("--defaults", action="store_true",
                   help="start from the built-in experimental values (always the base)")
    for flag, (_, text) in _PARAM_FLAGS.items():
        g.add_argument(flag, type=float, metavar="X", help=text)
    g.add_argument("--delta-pc-mhz", dest="delta_pc_mhz", type=float, metavar="X",
                   help="probe-cavity detuning/2pi (MHz); alternative to --delta-pa-mhz")
    g.add_argument("--delta-lc-mhz", dest="delta_lc_mhz", type=float, metavar="X",
                   help="control-cavity detuning/2pi (MHz); alternative to --delta-la-mhz")
    return par


def _out_parent(formats=("json", "csv"), default="json") -> argparse.ArgumentParser:
    par = argparse.ArgumentParser(add_help=False)
    par.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    par.add_argument("--format", choices=formats, default=default, help="output format")
    return par


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ceitcool", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ceitcool {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    prm = _param_parent()

    sub.add_parser("params", parents=[prm, _out_parent(("json",))],
                   help="print the resolved parameter set")

    s = sub.add_parser("dressed", parents=[prm, _out_parent()], help="dressed states")
    s.add_argument("--omega-mhz", type=float, metavar="X",
                   help="trap frequency/2pi for the sideband lines (MHz; default omega_z)")

    s = sub.add_parser("spectrum", parents=[prm, _out_parent(default="csv")],
                       help="weak-probe excitation spectrum versus probe-atom detuning")
    s.add_argument("--from-mhz", type=float, default=0.0, metavar="X",
                   help="first probe-atom detuning/2pi (MHz)")
    s.add_argument("--to-mhz", type=float, default=32.0, metavar="X",
                   help="last probe-atom detuning/2pi (MHz)")
    s.add_argument("--n", type=int, default=641, help="number of points")

    s = sub.add_parser("rates", parents=[prm, _out_parent(("json",))],
                       help="heating and cooling rates at one point")
    s.add_argument("--method", choices=("resolvent", "ceit", "free_space"), default="resolvent")
    s.add_argument("--axis", choices=("z", "y"), default="z")
    s.add_argument("--omega-mhz", type=float, metavar="X",
                   help="trap frequency/2pi (MHz; default that of --axis)")
    s.add_argument("--control-projection", type=float, default=1.0,
                   help="free_space: control wave-vector projection on the axis")
    s.add_argument("--probe-projection", type=float, default=0.0,
                   help="free_space: probe wave-vector projection on the axis")

    s = sub.add_parser("scan", parents=[prm, _out_parent(default="csv")],
                       help="2-D cooling map")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--n", type=int, default=100, help="points per axis for --preset")
    s.add_argument("--x", metavar="NAME:LO:HI:N",
                   help="x axis, NAME in delta_pc|delta_la|delta_pa, LO/HI in MHz")
    s.add_argument("--y", metavar="NAME:LO:HI:N", help="y axis, same form as --x")
    s.add_argument("--axes", metavar="z,y", help="motional axes to compute (default z)")
    s.add_argument("--policy", choices=POLICIES, help="classification policy for the summary")
    s.add_argument("--workers", type=int,
                   help="worker processes (default: $CEITCOOL_WORKERS or 1)")

    s = sub.add_parser("oracle", parents=[prm, _out_parent()],
                       help="Lindblad master-equation run with rate fit")
    s.add_argument("--n-max", type=int, default=12, help="phonon cutoff")
    s.add_argument("--ld-order", type=int, choices=(1, 2), default=1)
    s.add_argument("--axis", choices=("z", "y"), default="z")
    s.add_argument("--integrator", choices=("adaptive_rk", "expm_krylov"), default="expm_krylov")
    s.add_argument("--recoil-model", choices=("projected_kicks", "none"), default="projected_kicks")
    s.add_argument("--m0", type=float, default=2.0, help="initial mean phonon number")
    s.add_argument("--initial", choices=("fock", "thermal"), default="fock")
    s.add_argument("--t-final-us", type=float, help="run length (us; default 5/Gamma)")
    s.add_argument("--sample-dt-us", type=float, help="sampling interval (us)")
    s.add_argument("--n-samples", type=int, default=120)
    s.add_argument("--steady", action="store_true", help="also solve for the steady state")

    s = sub.add_parser("thermometry", parents=[prm], help="sideband thermometry")
    tsub = s.add_subparsers(dest="mode", required=True, metavar="MODE")
    t = tsub.add_parser("ratio", parents=[_out_parent(("json",))],
                        help="<m> from a red/blue sideband ratio")
    t.add_argument("--r", type=float, required=True, help="red/blue sideband weight ratio")
    t.add_argument("--omega-mhz", type=float, metavar="X", help="trap frequency/2pi (MHz)")
    t = tsub.add_parser("passage", parents=[_out_parent(("json",))],
                        help="ground-state population from an adiabatic passage")
    t.add_argument("--p", type=float, required=True, help="transfer probability on m -> m-1")
    t.add_argument("--efficiency", type=float, default=1.0, help="passage efficiency for m >= 1")
    t.add_argument("--omega-mhz", type=float, metavar="X", help="trap frequency/2pi (MHz)")
    t = tsub.add_parser("spectrum", parents=[_out_parent(("csv",), "csv")],
                        help="synthetic microwave sideband spectrum")
    t.add_argument("--mean-m", type=float, required=True, help="thermal mean phonon number")
    t.add_argument("--omega-mhz", type=float, metavar="X",
                   help="trap frequency/2pi (MHz; default omega_y)")
    t.add_argument("--rabi-mhz", type=float, default=0.002, metavar="X",
                   help="carrier Rabi frequency/2pi (MHz)")
    t.add_argument("--duration-us", type=float, default=50.0, help="pulse length (us)")
    t.add_argument("--eta", type=float, help="Lamb-Dicke parameter (default eta_y)")
    t.add_argument("--carrier-mhz", type=float, default=-1.0, metavar="X",
                   help="carrier offset/2pi (MHz)")
    return ap


def _error(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        params = resolve_params(args)
        provenance = {"command": "ceitcool " + shlex.join(argv), "code": f"ceitcool {__version__}",
                      "params": params.to_mhz_dict()}
        HANDLERS[args.command](args, params, Emitter(args, provenance))
    except ParameterError as exc:
        sys.stderr.write(f"ceitcool {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"ceitcool {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except EITConditionError as exc:
        _error("EITConditionError", str(exc))
        return EXIT_COMPUTE
    except ScanError as exc:
        _error("ScanError", str(exc), incomplete=[list(t) for t in exc.incomplete])
        return EXIT_COMPUTE
    except (ComputationError, OracleError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
