#!/usr/bin/env python3
"""Guard-threshold sweep at desk scale: L_orb, P_b1, P_b2 against g.

Produces one CSV per retrial intensity, mirroring the three-curve figure
layout.  Uses the exponential-service reduction of the cellular instance at
c = 10 so the whole grid solves in seconds.
"""

import argparse
import csv
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from retrialq import solve_stationary, stability_check
from retrialq.measures import performance_report
from retrialq.models import BmapSpec, MmppSpec, PhSpec, SystemConfig


def instance(lam_o, lam_h, lam_r, c, g):
    b1 = BmapSpec((lam_o * np.array([[-11.0, 2.0], [5.0, -20.0]]),
                   lam_o * np.array([[8.0, 1.0], [3.0, 12.0]])))
    b2 = BmapSpec((lam_h * np.array([[-3.0, 0.0], [1.0, -2.0]]),
                   lam_h * np.array([[1.0, 2.0], [0.0, 1.0]])))
    mm = MmppSpec(lam_r * np.array([[-15.0, 3.0], [4.0, -19.0]]),
                  lam_r * np.array([12.0, 15.0]))
    ph = PhSpec(np.array([1.0]), np.array([[-8.12883435582822]]))
    return SystemConfig(bmap1=b1, bmap2=b2, mmpp=mm, service=ph,
                        c=c, g=g, n_max=3000)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="sweep_out")
    ap.add_argument("--c", type=int, default=10)
    args = ap.parse_args()
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for lam_r in (0.5, 1.0, 2.0):
        rows = []
        for g in range(1, args.c):
            cfg = instance(2.0, 2.0, lam_r, args.c, g)
            rep = stability_check(cfg)
            if not rep.stable:
                rows.append((g, "", "", "", rep.rho))
                continue
            perf = performance_report(solve_stationary(cfg))
            rows.append((g, perf.l_orbit, perf.p_block_1,
                         perf.p_block_2, rep.rho))
        path = out_dir / f"guard_sweep_lr{lam_r:g}.csv"
        with open(path, "w", newline="\n") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["g", "L_orb", "P_b1", "P_b2", "rho"])
            wr.writerows(rows)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
