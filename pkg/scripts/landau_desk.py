"""Desk-scale 2D Landau runs with per-step diagnostics.

Runs the Maxwell (BKW) and Coulomb cases at a reduced grid, writes one CSV
per case and prints conservation drifts and the dissipation summary.

    python scripts/landau_desk.py --M 24 --outdir out
"""

import argparse
from pathlib import Path

import numpy as np

from dgparticle.scenarios import ScenarioConfig, run

CASES = {
    "landau_maxwell": dict(dt=0.01 / 8, t_start=0.0, t_end=1.0),
    "landau_coulomb": dict(dt=0.05, t_start=0.0, t_end=2.0),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--M", type=int, default=24)
    parser.add_argument("--outdir", default="out")
    parser.add_argument("--cases", nargs="+", default=list(CASES))
    args = parser.parse_args()

    for name in args.cases:
        out = Path(args.outdir) / f"{name}_M{args.M}.csv"
        cfg = ScenarioConfig.for_scenario(name, cells_per_dim=args.M, diag_every=1, output=str(out),
                                          **CASES[name])
        rep = run(cfg)
        first = rep.records[0]
        dp = max(float(np.max(np.abs(r.momentum - first.momentum))) for r in rep.records)
        dk = max(abs(r.kinetic_energy - first.kinetic_energy) / first.kinetic_energy for r in rep.records)
        diss = [r.dissipation_rate for r in rep.records[1:]]
        fisher = [r.fisher for r in rep.records[1:]]
        print(f"{name}: {len(rep.iterations)} steps in {rep.wall_time:.0f}s, "
              f"iterations mean {rep.mean_iterations:.2f} max {rep.max_iterations}")
        print(f"  momentum drift {dp:.2e}, kinetic drift {dk:.2e}")
        print(f"  dissipation {diss[0]:.4e} -> {diss[-1]:.4e} (min {min(diss):.3e}), "
              f"fisher {fisher[0]:.4e} -> {fisher[-1]:.4e}")
        if rep.errors:
            print("  errors at t_end: " + ", ".join(f"{k}={v:.3e}" for k, v in rep.errors.items()))
        print(f"  wrote {out}")


if __name__ == "__main__":
    main()
