"""Fixed-point iteration statistics for the 1D scenarios.

Prints mean and max Picard iterations per resolution next to reference
values where available.

    python scripts/iteration_tables.py --M 60 80 100
"""

import argparse

from dgparticle.scenarios import ScenarioConfig, run

# (mean, max) at M = 60 and 100
REFERENCE = {
    "heat": {60: (11.10, 22), 100: (15.84, 61)},
    "porous_medium": {60: (6.00, 6), 100: (7.56, 9)},
    "linear_fp": {60: (7.18, 16), 100: (9.52, 34)},
    "nonlocal_fp": {60: (7.18, 16), 100: (9.52, 34)},
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--M", type=int, nargs="+", default=[60, 80, 100])
    parser.add_argument("--scenarios", nargs="+", default=list(REFERENCE))
    args = parser.parse_args()

    print(f"{'scenario':<14} {'M':>4} {'mean':>7} {'max':>4} {'ref mean':>9} {'ref max':>8} {'Linf':>10}")
    for name in args.scenarios:
        for M in args.M:
            rep = run(ScenarioConfig.for_scenario(name, cells_per_dim=M))
            ref = REFERENCE.get(name, {}).get(M)
            ref_txt = f"{ref[0]:>9.2f} {ref[1]:>8d}" if ref else f"{'-':>9} {'-':>8}"
            print(f"{name:<14} {M:>4} {rep.mean_iterations:>7.2f} {rep.max_iterations:>4d} {ref_txt} "
                  f"{rep.errors['linf']:>10.3e}")


if __name__ == "__main__":
    main()
