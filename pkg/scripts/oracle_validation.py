"""Rate theory against the Lindblad master equation on a standard point set.

For each point prints the cooling rate and stationary occupation from the
weak-probe resolvent theory, from the saturated Lamb-Dicke theory (exact
in the probe, second order in eta) and from a fit to the master-equation
evolution.  Heating points are fitted from two Fock-state starts at once.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from ceitcool.cli import atomic_write, dumps
from ceitcool.dressed import dressed_states
from ceitcool.model import Axis, SystemParams, mhz
from ceitcool.oracle import (
    OracleConfig,
    build_liouvillian,
    evolve,
    initial_state,
    lamb_dicke_rates,
    paired_relaxation,
)
from ceitcool.rates import rates_resolvent


def standard_points(eta, probe_scale, seed):
    base = SystemParams()
    base = base.replace(omega_rec=eta**2 * base.omega_z, omega_p=probe_scale * base.omega_p)
    w = base.omega_z
    far = base.with_detunings(delta_lc=mhz(-10.0))
    plus = next(s for s in dressed_states(far) if s.label == "plus")
    points = {
        "eit": base,
        "plus_red": far.with_detunings(delta_pc=plus.omega - w),
        "plus_blue": far.with_detunings(delta_pc=plus.omega + w),
        "dpl_omega": base.with_detunings(delta_pa=base.delta_la + w),
    }
    rng = np.random.default_rng(seed)
    while len(points) < 6:
        d_lc, d_pl = rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5)
        p = base.with_detunings(delta_lc=mhz(d_lc), delta_pc=mhz(d_lc + d_pl))
        r = rates_resolvent(p, Axis.Z)
        if r.m_st is not None and r.m_st < 1.0:
            points[f"random_{len(points) - 3}"] = p
    return points


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--probe-scale", type=float, default=1.0,
                    help="multiply the default probe strength")
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--seed", type=int, default=2013)
    ap.add_argument("--out", type=Path, default=Path("out/oracle_validation.json"))
    args = ap.parse_args()

    cfg = OracleConfig(n_max=args.n_max)
    table = {}
    for name, p in standard_points(args.eta, args.probe_scale, args.seed).items():
        theory = rates_resolvent(p, Axis.Z)
        saturated = lamb_dicke_rates(p, Axis.Z)
        lv = build_liouvillian(p, cfg)
        if theory.cooling_rate > 0:
            run = evolve(lv, initial_state(lv.n_phonon, 2, "fock"), cfg)
            oracle = {"gamma": run.gamma_fit, "m_ss": run.m_ss, "converged": run.converged}
        else:
            pair = paired_relaxation(lv, cfg)
            oracle = {"gamma": pair.gamma_fit, "m_ss": pair.m_ss,
                      "cutoff_population": pair.max_cutoff_population}
        row = {
            "params_mhz": p.to_mhz_dict(),
            "resolvent": {"gamma": theory.cooling_rate, "m_st": theory.m_st},
            "saturated": {"gamma": saturated.cooling_rate, "m_st": saturated.m_st},
            "oracle": oracle,
        }
        table[name] = row

        def fmt(m):
            return "   -  " if m is None else f"{m:6.3f}"

        print(f"{name:10s} Gamma/ms resolvent {theory.cooling_rate * 1e3:7.3f}  "
              f"saturated {saturated.cooling_rate * 1e3:7.3f}  oracle {oracle['gamma'] * 1e3:7.3f} | "
              f"m {fmt(theory.m_st)} {fmt(saturated.m_st)} {fmt(oracle['m_ss'])}", flush=True)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write(args.out, dumps({"eta": args.eta, "probe_scale": args.probe_scale,
                                  "n_max": args.n_max, "points": table}))
    print(f"written to {args.out}")


if __name__ == "__main__":
    main()
