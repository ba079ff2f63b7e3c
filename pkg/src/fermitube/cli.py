"""Command line driver.

Exit status: 0 when every check passes, 1 when a verification fails, 2 for
usage or configuration errors.  Each run writes ``summary.json`` (stable
for a fixed config and seed apart from its ``timestamp``), ``timing.json``
and one CSV per table into the output directory.
"""
import argparse
import csv
import datetime
import json
import os
import sys

import numpy as np

from . import __version__, config, experiments

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if np.isfinite(val) else repr(val)
    return obj


def _write_table(path, header, rows):
    if isinstance(rows, np.ndarray):
        np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])


def emit_report(results, out_dir, cfg, subcommand):
    """Write the JSON summary, timings and CSV tables; returns the summary dict."""
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []
    for res in results:
        for name, (header, rows) in sorted(res.tables.items()):
            fname = "criterion%s_%s.csv" % (res.key, name)
            _write_table(os.path.join(out_dir, fname), header, rows)
            artifacts.append(fname)
    passed = all(r.passed for r in results)
    summary = {
        "tool": "fermitube",
        "version": __version__,
        "subcommand": subcommand,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "status": "pass" if passed else "fail",
        "criteria": {r.key: r.summary() for r in results},
        "artifacts": artifacts,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    timing = {r.key: {"seconds": r.runtime, "limit": r.limit} for r in results}
    with open(os.path.join(out_dir, "timing.json"), "w") as fh:
        json.dump(timing, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run(subcommand, cfg, threads=1):
    """Run the checks of one subcommand and return their results in criterion order."""
    keys = sorted(experiments.CRITERIA, key=int) if subcommand == "report" \
        else experiments.SUBCOMMANDS[subcommand]
    results = []
    for key in keys:
        fn = experiments.CRITERIA[key]
        if key in ("7", "8"):
            results.append(fn(cfg, workers=threads))
        else:
            results.append(fn(cfg))
    return results


def build_parser():
    parser = argparse.ArgumentParser(prog="fermitube",
                                     description="Deformed Fermi-tube metrics: curvature, "
                                                 "Jacobi fields and cone checks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration (see print-defaults)")
    common.add_argument("--out", default="fermitube-out", help="output directory")
    common.add_argument("--seed", type=int, help="override the configured RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid scans")
    helps = {
        "verify-deformation": "bump certificates, central curvature table, non-Anosov witness",
        "scan-curvature": "sectional curvature scans for both deformations",
        "cone-check": "angle-rate identity and cone invariance",
        "lyapunov": "finite-time Lyapunov spectra",
        "oracle-suite": "finite-difference and closed-form oracle comparisons",
        "report": "every check, aggregated",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    sub.add_parser("print-defaults", help="print the default configuration as JSON")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "print-defaults":
        json.dump(_jsonable(config.ExperimentConfig().to_dict()), sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_PASS
    if args.threads < 1:
        parser.error("--threads must be positive")
    if args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    try:
        cfg = config.load(args.config) if args.config else config.ExperimentConfig()
        if args.seed is not None:
            cfg.seed = args.seed
    except config.ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    results = run(args.command, cfg, args.threads)
    summary = emit_report(results, args.out, cfg, args.command)
    for res in results:
        line = "criterion %-2s %-4s %s" % (res.key, "PASS" if res.passed else "FAIL", res.title)
        print(line)
        if not res.passed and res.witness is not None:
            print("  witness: %s" % json.dumps(_jsonable(res.witness)), file=sys.stderr)
    print("status: %s (%s)" % (summary["status"], os.path.join(args.out, "summary.json")))
    return EXIT_PASS if summary["status"] == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
