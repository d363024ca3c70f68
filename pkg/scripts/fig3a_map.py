"""Cooling along the cavity and heating along the control beam near the EIT line.

Prints, for a few control-cavity detunings, the cooling stripes along the
probe-control detuning and which of them survive the Y-heating veto.
"""

import argparse
from pathlib import Path

import numpy as np

from ceitcool.cli import atomic_write
from ceitcool.model import Axis, to_mhz
from ceitcool.scan import classify, preset, run_scan, sidecar, to_csv


def stripes(mask, x):
    """Contiguous runs of True in mask as (start, stop) x values."""
    runs, start = [], None
    for k, flag in enumerate(mask):
        if flag and start is None:
            start = k
        if start is not None and (not flag or k == len(mask) - 1):
            stop = k if flag else k - 1
            runs.append((x[start], x[stop]))
            start = None
    return runs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=101, help="points per axis")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", type=Path, default=Path("out/fig3a"))
    args = ap.parse_args()

    result = run_scan(preset("fig3a", args.n), args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    atomic_write(args.out / "map.csv", to_csv(result))
    atomic_write(args.out / "map.json", sidecar(result))

    grid = result.grid
    z_only = classify(result, "z_only")
    veto = classify(result, "z_and_y_veto")
    d_ca = to_mhz(grid.fixed.delta_ca)
    print(f"omega_z = {to_mhz(grid.fixed.omega_z)} MHz, omega_DT = omega_y = "
          f"{to_mhz(grid.fixed.omega_y)} MHz")
    for d_lc in (-0.6, -0.3, 0.0, 0.3, 0.6):
        i = int(np.argmin(np.abs(grid.y.values_mhz - (d_ca + d_lc))))
        d_pl = grid.x.values_mhz - (grid.y.values_mhz[i] - d_ca)
        gy = result.gamma[Axis.Y][i]
        worst = d_pl[np.argmin(gy)]
        z_runs = ", ".join(f"[{a:+.2f}, {b:+.2f}]" for a, b in stripes(z_only[i] == "cooling", d_pl))
        v_runs = ", ".join(f"[{a:+.2f}, {b:+.2f}]" for a, b in stripes(veto[i] == "cooling", d_pl))
        print(f"dLC {d_lc:+.1f} MHz: Z cooling at dPL {z_runs or 'none'}; "
              f"after Y veto {v_runs or 'none'}; strongest Y heating at dPL {worst:+.2f}")
    print(f"written to {args.out}/")


if __name__ == "__main__":
    main()
