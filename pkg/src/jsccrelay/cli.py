"""Command-line entry point: optimize the scheme set over an SNR sweep."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigurationError
from .experiment import emit_outputs, run_comparison, validation_suite
from .scenario import BOTH, P1, P2, Scenario, build_scenario, with_overrides

log = logging.getLogger("jsccrelay")


def _snr_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty SNR list")
    return values


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("need at least 2 draws")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jsccrelay",
        description="Optimize per-layer power splits of layered multicast over a relay network.",
    )
    p.add_argument("--config", metavar="PATH", help="scenario file (INI); defaults are used without it")
    p.add_argument("--snr", type=_snr_list, metavar="LIST_DB", help="comma-separated reference SNRs in dB")
    p.add_argument("--metric", choices=(P1, P2, BOTH), help="p1: mean EED, p2: worst-user EED")
    p.add_argument("--seed", type=_u64, help="seed for the Monte Carlo draws")
    p.add_argument("--mc-draws", type=_positive_int, metavar="N", help="channel draws inside the optimizer")
    p.add_argument("--schemes", help="comma-separated subset of scheme names")
    p.add_argument("--validate", action="store_true", help="run the simulator cross-checks first")
    p.add_argument("--out", metavar="DIR", default="results", help="output directory (default: results)")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero when a check fails or a point does not converge")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        scenario = build_scenario(args.config) if args.config else Scenario()
        if args.schemes is not None:
            names = [n.strip() for n in args.schemes.split(",") if n.strip()]
            if not names:
                raise ConfigurationError("invalid scenario fields: schemes (empty list)")
            scenario = with_overrides(scenario, schemes=tuple(scenario.scheme(n) for n in names))
        scenario = with_overrides(scenario, snr_db=args.snr, metric=args.metric,
                                  seed=args.seed, mc_draws=args.mc_draws)
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    failed = False
    if args.validate:
        for check in validation_suite(scenario, seed=scenario.seed):
            print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
            failed |= not check.passed

    results = run_comparison(scenario, workers=args.workers)
    for p in results:
        log.info("%s %+g dB %s: %.6f (%d iterations, gap %.2e)",
                 p.scheme, p.snr_db, p.metric, p.objective, p.gp.iterations, p.gp.gap)
        failed |= not p.gp.converged
    try:
        paths = emit_outputs(results, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 1 if (args.strict and failed) else 0


if __name__ == "__main__":
    sys.exit(main())
