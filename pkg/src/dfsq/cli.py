"""Command line entry point: ``dfsq {design,simulate,sweep,verify} --config run.json``.

Exit status is 0 on success, 1 when ``verify`` finds a failing check,
2 for configuration errors and 3 for numerical failures.
"""

import argparse
import csv
import logging
import os
import sys

from . import checks
from .compander import ConstructionError, ResolutionError, fmt, write_codebook
from .config import ConfigError, load
from .design import DesignProblem, DontCareRequired, design
from .distortion import DistortionReport
from .functions import DomainError
from .pipeline import SWEEP_HEADER, simulate, sweep_rows, total_resolution
from .rate import RateReport
from .rng import default_workers
from .sources import ConfigurationError

log = logging.getLogger("dfsq")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DESIGN_HEADER = ("variable", "regime", "R", "constant", "rate", "alpha", "log2_resolution",
                 "resolution", "h", "E_log2_gamma", "E_log2_lambda", "l1_norm", "D_hr")


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


def _problem(cfg, n=None):
    g = cfg.function(n)
    return g, cfg.source(g.n)


def cmd_design(cfg, args):
    g, src = _problem(cfg)
    rows = []
    first = None
    for R in cfg.rates:
        res = design(DesignProblem(src, g, cfg.regime, R, grid_size=cfg.grid_size,
                                   seed=args.seed))
        for w in res.warnings:
            log.warning("R=%g: %s", R, w)
        K = total_resolution(res, src, R, cfg.rate_method)
        ks = res.per_variable_resolutions(K)
        for j in range(res.n):
            alpha = res.alpha[j] if res.alpha is not None else float("nan")
            rows.append([j + 1, cfg.regime, R, res.constants[j], res.rates[j], alpha,
                         res.log_resolutions[j], ks[j], res.entropies[j], res.e_log_gamma[j],
                         res.e_log_lambda[j], res.l1_norms[j], res.predicted(R)])
        if first is None:
            first = res.quantizer(K)
    _write(os.path.join(args.out, "design.csv"), DESIGN_HEADER, rows)
    for j, q in enumerate(first.quantizers):
        write_codebook(os.path.join(args.out, f"codebook_{j + 1}.csv"), q)
    print(f"wrote design.csv and {len(first.quantizers)} codebook(s) to {args.out}")
    return EXIT_OK


def cmd_simulate(cfg, args):
    g, src = _problem(cfg)
    drows, rrows = [], []
    for R in cfg.rates:
        sim = simulate(g, src, cfg.regime, R, args.samples, args.seed, args.threads,
                       method=cfg.rate_method, grid_size=cfg.grid_size)
        drows.append(sim.distortion.row())
        rrows.append(sim.rate.row())
        for note in sim.notes:
            log.warning("R=%g: %s", R, note)
        print(f"R={R:g}  K={sim.quantizer.resolutions.tolist()}  "
              f"D_emp/D_hr={sim.distortion.ratio:.4f} +- {sim.distortion.ratio_stderr:.4f}")
    _write(os.path.join(args.out, "distortion.csv"), DistortionReport.HEADER, drows)
    _write(os.path.join(args.out, "rate.csv"), RateReport.HEADER, rrows)
    return EXIT_OK


def cmd_sweep(cfg, args):
    rows = []
    for n in cfg.n_values:
        g, src = _problem(cfg, n)
        rows += sweep_rows(g, src, cfg.regime, cfg.rates, args.samples, args.seed,
                           args.threads, cfg.simulate_sweep, cfg.rate_method,
                           grid_size=cfg.grid_size)
        print(f"{g.name} n={g.n}: {len(cfg.rates)} rate points")
    _write(os.path.join(args.out, "sweep.csv"), SWEEP_HEADER, rows)
    return EXIT_OK


def cmd_verify(cfg, args):
    g, src = _problem(cfg)
    results = checks.problem_checks(g, src, cfg.regime, cfg.rates[0], args.seed, cfg.grid_size)
    results += checks.property_suites(args.seed)
    for c in results:
        print(c.line())
    failed = sum(not c.passed for c in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECKS


COMMANDS = {"design": cmd_design, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "verify": cmd_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="dfsq", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo samples")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $DFSQ_THREADS or all cores)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.seed = cfg.seed if args.seed is None else args.seed
    args.samples = cfg.samples if args.samples is None else args.samples
    args.threads = args.threads or default_workers()
    args.out = args.out or cfg.output_dir
    os.makedirs(args.out, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ResolutionError, ConstructionError, DontCareRequired) as exc:
        module = type(exc).__module__
        print(f"numeric failure in {module}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
