"""Command line entry point: ``run``, ``converge`` and ``check`` subcommands.

Exit codes: 0 success, 1 a check failed, 2 configuration or runtime error.
Set ``DGPARTICLE_THREADS`` to evaluate row blocks on several threads; results
do not depend on it.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, ConvergenceError, NumericalDomainError
from .scenarios import check, converge, load_config, run

log = logging.getLogger("dgparticle")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2


def _parse_m_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty --M list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgparticle", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario and write per-step diagnostics as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="CSV path (overrides the config's 'output')")

    p = sub.add_parser("converge", help="error table and fitted orders over several M")
    p.add_argument("--config", required=True)
    p.add_argument("--M", type=_parse_m_list, required=True, help="e.g. 60,70,80,90,100")
    p.add_argument("--output", help="optional CSV path for the error table")

    p = sub.add_parser("check", help="run the invariant suites at reduced scale")
    p.add_argument("--config", required=True)
    return parser


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.output:
        cfg.output = args.output

    def progress(rec):
        if rec.step % 50 == 0:
            log.info("step %d t=%.4f iterations=%d", rec.step, rec.time, rec.solver_iterations)

    report = run(cfg, progress)
    print(f"scenario {cfg.scenario}: {len(report.iterations)} steps in {report.wall_time:.1f}s")
    print(f"fixed-point iterations: mean {report.mean_iterations:.2f}, max {report.max_iterations}")
    if report.errors:
        print("errors at t_end: " + ", ".join(f"{k}={v:.6e}" for k, v in report.errors.items()))
    if cfg.output:
        print(f"wrote {cfg.output}")
    return EXIT_OK


def _cmd_converge(args):
    cfg = load_config(args.config)
    table = converge(cfg, args.M)
    header = "M,h,l1,l2,linf,mean_iterations,max_iterations"
    lines = [header] + [
        f"{r['M']},{r['h']!r},{r['l1']!r},{r['l2']!r},{r['linf']!r},{r['mean_iterations']!r},{r['max_iterations']}"
        for r in table["rows"]
    ]
    print("\n".join(lines))
    for key, slope in table["orders"].items():
        print(f"order {key}: {slope:.3f}")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_check(args):
    cfg = load_config(args.config)
    results = check(cfg)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<14} {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "converge": _cmd_converge, "check": _cmd_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except ConvergenceError as exc:
        where = f" at step {exc.step}" if exc.step is not None else ""
        print(f"solver error{where}: {exc}", file=sys.stderr)
    except (NumericalDomainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
