"""Error table and fitted orders for one scenario over several resolutions.

    python scripts/convergence_study.py heat --M 60 70 80 90 100 --out out/heat_convergence.csv
"""

import argparse
from pathlib import Path

from dgparticle.scenarios import ScenarioConfig, converge


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("scenario")
    parser.add_argument("--M", type=int, nargs="+", default=[60, 70, 80, 90, 100])
    parser.add_argument("--t-end", type=float, help="override the scenario's final time")
    parser.add_argument("--out", help="CSV path for the table")
    args = parser.parse_args()

    overrides = {} if args.t_end is None else {"t_end": args.t_end}
    table = converge(ScenarioConfig.for_scenario(args.scenario, **overrides), args.M)

    lines = ["M,h,l1,l2,linf,mean_iterations,max_iterations"]
    for r in table["rows"]:
        lines.append(f"{r['M']},{r['h']!r},{r['l1']!r},{r['l2']!r},{r['linf']!r},"
                     f"{r['mean_iterations']!r},{r['max_iterations']}")
    print("\n".join(lines))
    for key, slope in table["orders"].items():
        print(f"order {key}: {slope:.3f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
