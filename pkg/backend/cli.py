"""
Command-line front end for correlation-thresholding factor analysis.

  fit       run the full pipeline on a data CSV (--data) or a correlation CSV (--corr, needs --n)
  scan      propose structures without estimation (p may exceed n)
  bench     run a seeded simulation grid described by a JSON BenchSpec
  simulate  emit structure, parameters and optionally data for a SimConfig

JSON goes to standard output (or --out); logs go to standard error.
Indices are 0-based in all JSON output and 1-based in the human-readable log summary.
Exit codes: 0 ok, 2 input error, 3 no result, 4 numerical failure.
"""
import argparse
import json
import os
import sys

from dotenv import load_dotenv
from pydantic import ValidationError

# Ensure import path is correct
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

# Load Env
load_dotenv()

import logging

from backend.app import config
from backend.app.services.bench_engine import BenchSpec, run_bench
from backend.app.services.corr_service import sample_correlation
from backend.app.services.ct_engine import CtConfig, ct_fit, ct_scan, resolve_grid, scan_report
from backend.app.services.estimation_engine import implied_sigma
from backend.app.services.io_service import dumps, read_corr_csv, read_data_csv, write_matrix_csv
from backend.app.services.simulation_service import SimConfig, simulate
from backend.app.services.structure_service import FactorStructure, SingletonPolicy
from backend.app.utils.errors import CTError, InputError

logger = logging.getLogger("CLI")

# ==========================================
# 1. ARGUMENT PARSER
# ==========================================


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ct", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--log-level", default=None, help="Overrides CT_LOG_LEVEL")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--singletons", choices=[s.value for s in SingletonPolicy], default=SingletonPolicy.DROP.value)
        p.add_argument("--out", default=None, help="Write JSON here instead of standard output")

    fit = sub.add_parser("fit", help="Fit the CT model and select by BIC")
    src = fit.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="n x p data CSV")
    src.add_argument("--corr", help="p x p correlation CSV")
    fit.add_argument("--n", type=int, default=None, help="Sample size behind --corr")
    fit.add_argument("--kind", choices=["sample", "population"], default="sample")
    fit.add_argument("--grid", default="unique", help="'unique' or 'equi:m'")
    fit.add_argument("--no-null", action="store_true", help="Do not fit the d = 0 noise model")
    common(fit)

    scan = sub.add_parser("scan", help="Propose structures without estimation")
    src = scan.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="n x p data CSV")
    src.add_argument("--corr", help="p x p correlation CSV")
    scan.add_argument("--kind", choices=["sample", "population"], default="sample")
    scan.add_argument("--grid", default="equi:50")
    scan.add_argument("--truth", default=None, help="JSON FactorStructure to score candidates against")
    common(scan)

    bench = sub.add_parser("bench", help="Run a simulation benchmark")
    bench.add_argument("spec", help="JSON BenchSpec path")
    bench.add_argument("--tsv", default=None, help="Also write the per-cell aggregate table here")
    bench.add_argument("--workers", type=int, default=None)
    common(bench)

    sim = sub.add_parser("simulate", help="Generate a model (and data) from a SimConfig")
    sim.add_argument("--config", default=None, help="JSON SimConfig path; flags below override it")
    sim.add_argument("--d", type=int, default=None)
    sim.add_argument("--children", type=int, default=None)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--alpha", type=float, default=None)
    sim.add_argument("--beta", type=float, default=None)
    sim.add_argument("--scheme", choices=["alpha_study", "beta_study"], default=None)
    sim.add_argument("--data-out", default=None, help="Write the sampled n x p data CSV here")
    sim.add_argument("--corr-out", default=None, help="Write the implied correlation matrix CSV here")
    common(sim)
    return ap


# ==========================================
# 2. SUBCOMMANDS
# ==========================================

def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"Cannot read JSON from {path}: {e}")


def _load_matrix(args):
    if args.data:
        data = read_data_csv(args.data)
        return sample_correlation(data), data.shape[0]
    return read_corr_csv(args.corr, kind=args.kind), getattr(args, "n", None)


def _log_structure(label: str, S: FactorStructure):
    groups = "; ".join(f"F{j + 1}: " + " ".join(f"X{i + 1}" for i in ch) for j, ch in enumerate(S.child_sets()))
    logger.info(f"{label} d = {S.d} -> {groups or 'noise only'}")


def cmd_fit(args) -> dict:
    R, n = _load_matrix(args)
    if n is None:
        raise InputError("--corr requires --n.")
    cfg = CtConfig(grid=args.grid, singletons=args.singletons, fit_null=not args.no_null)
    result = ct_fit(R, n, cfg=cfg)
    _log_structure("Selected", result.selected.structure)
    out = result.to_dict()
    out["seed"] = args.seed
    return out


def cmd_scan(args) -> dict:
    R, _ = _load_matrix(args)
    truth = FactorStructure.from_dict(_load_json(args.truth)) if args.truth else None
    cfg = CtConfig(grid=args.grid, singletons=args.singletons)
    grid = resolve_grid(R, None, cfg)
    report = scan_report(ct_scan(R, grid, cfg), grid, truth)
    logger.info(f"Scan: {len(grid)} thresholds, {report['models']} distinct structures")
    return report


def cmd_bench(args) -> dict:
    payload = _load_json(args.spec)
    payload.setdefault("seed", args.seed)
    payload.setdefault("singletons", args.singletons)
    spec = BenchSpec.model_validate(payload)
    report = run_bench(spec, args.workers)
    if args.tsv:
        with open(args.tsv, "w", encoding="utf-8") as f:
            f.write(report.to_tsv())
    return report.to_dict()


def cmd_simulate(args) -> dict:
    payload = _load_json(args.config) if args.config else {}
    overrides = {
        "d": args.d,
        "children_per_factor": args.children,
        "n": args.n,
        "alpha": args.alpha,
        "beta": args.beta,
        "scheme": args.scheme,
    }
    payload.update({k: v for k, v in overrides.items() if v is not None})
    payload["seed"] = args.seed
    cfg = SimConfig.model_validate(payload)

    bundle = simulate(cfg, with_data=args.data_out is not None, with_heldout=False)
    sigma = implied_sigma(bundle.theta)
    if args.data_out:
        write_matrix_csv(args.data_out, bundle.data, header=[f"X{i + 1}" for i in range(cfg.p)])
    if args.corr_out:
        write_matrix_csv(args.corr_out, sigma.entries)
    _log_structure("Generated", bundle.structure)
    return {
        "config": cfg,
        "structure": bundle.structure.to_dict(),
        "theta": bundle.theta.to_dict(),
        "sigma": sigma.to_list(),
    }


COMMANDS = {"fit": cmd_fit, "scan": cmd_scan, "bench": cmd_bench, "simulate": cmd_simulate}


# ==========================================
# 3. ENTRY POINT
# ==========================================

def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config.configure_logging(args.log_level)
    try:
        result = COMMANDS[args.command](args)
    except CTError as e:
        logger.error(f"❌ {type(e).__name__}: {e.message}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return 2

    text = dumps(result)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
