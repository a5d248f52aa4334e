"""Batch driver.

Verbs:
  run <config.json> ...     execute pipelines (exit 0 iff all checks pass)
  compare <runA> <runB> --mode {scalar-decay,trajectory-diff,duhamel-vs-stepper}
  suite <name>              run a named acceptance suite
  generate <config.json>    emit initial data only

Exit codes: 0 success, 2 configuration error, 3 flow degeneration,
4 check failure.
"""

import argparse
import concurrent.futures
import glob
import os
import sys

import numpy as np

from .config import ExperimentConfig
from .errors import (
    ConfigurationError,
    FlowDegenerationError,
    HorizonError,
    TorusFlowError,
)
from .stats import fit_loglog

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATION = 3
EXIT_CHECK = 4

_DEGENERATE_GAP = 1e-12


def _load_config(path, seed_override=None, out=None):
    cfg = ExperimentConfig.from_json(path)
    if seed_override is not None:
        gen = dict(cfg.generator)
        gen["seed"] = int(seed_override)
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "generator": gen})
    if out is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "outputs": out})
    return cfg


def _run_one(args_tuple):
    path, seed_override, out, verbose = args_tuple
    from .pipeline import run_pipeline

    cfg = _load_config(path, seed_override, out)
    res = run_pipeline(cfg, verbose=verbose)
    return res.passed, [(c.name, c.passed, c.detail) for c in res.checks], cfg.name


def cmd_run(args):
    jobs = max(args.jobs, 1)
    work = [(p, args.seed_override, args.out, args.verbose) for p in args.config]
    if jobs > 1 and len(work) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one, work))
    else:
        results = [_run_one(w) for w in work]
    all_ok = True
    for passed, checks, name in results:
        status = "PASS" if passed else "FAIL"
        print(f"run {name}: {status}")
        for cname, cok, detail in checks:
            print(f"  [{cname}] {'pass' if cok else 'FAIL'}: {detail}")
        all_ok &= passed
    return EXIT_OK if all_ok else EXIT_CHECK


def _load_run_dir(path):
    from .gfbio import read_metric

    snaps = {}
    for f in glob.glob(os.path.join(path, "snapshot_*.gfb")):
        t = float(os.path.basename(f)[len("snapshot_"):-len(".gfb")])
        snaps[round(t, 9)] = read_metric(f)
    if not snaps:
        raise ConfigurationError(f"{path}: no snapshot_*.gfb files")
    return snaps


def cmd_compare(args):
    from .geometry import scalar_curvature

    a = _load_run_dir(args.run_a)
    b = _load_run_dir(args.run_b)
    common = sorted(set(a) & set(b))
    common = [t for t in common if t > 0]
    if len(common) < 3:
        raise ConfigurationError("runs share fewer than 3 positive snapshot times")
    g0 = a[common[0]]
    if b[common[0]].grid != g0.grid:
        raise ConfigurationError("runs use different grids")
    grid = g0.grid
    if args.mode in ("trajectory-diff", "duhamel-vs-stepper"):
        print(f"mode {args.mode}: max-norm metric gap per snapshot")
        for t in common:
            gap = float(np.max(np.abs(a[t].data - b[t].data)))
            print(f"  t={t:g}  gap={gap:.6e}")
        return EXIT_OK
    if args.mode == "scalar-decay":
        center = np.full(grid.dim, 0.5 * grid.period)
        d = grid.distance_flat(grid.coords(), center)
        gaps = []
        for t in common:
            mask = d <= args.radius_c * t ** args.beta
            if not np.any(mask):
                mask = d <= d.min() + 1e-12
            ra = scalar_curvature(a[t])
            rb = scalar_curvature(b[t])
            gaps.append(float(np.max(np.abs(ra - rb)[mask])))
            print(f"  t={t:g}  sup-ball |R_a - R_b| = {gaps[-1]:.6e}")
        if max(gaps) < _DEGENERATE_GAP:
            print("slope fit: degenerate (gaps at numerical zero); flagged, not fitted")
            return EXIT_OK
        slope, lo, hi, _ = fit_loglog(common, [max(g, 1e-300) for g in gaps])
        print(f"fitted decay exponent: {slope:.4f}  (95% band [{lo:.4f}, {hi:.4f}])")
        return EXIT_OK
    raise ConfigurationError(f"unknown compare mode {args.mode!r}")


def cmd_suite(args):
    from .suites import SUITES

    if args.name not in SUITES:
        print(f"unknown suite {args.name!r}; available: {', '.join(sorted(SUITES))}")
        return EXIT_CONFIG
    result = SUITES[args.name]()
    status = "PASS" if result["passed"] else "FAIL"
    print(f'{{"suite": "{args.name}", "passed": {str(result["passed"]).lower()}, '
          f'"detail": "{result["detail"]}"}}')
    print(f"suite {args.name}: {status}")
    return EXIT_OK if result["passed"] else EXIT_CHECK


def cmd_generate(args):
    from .fields import flat_metric  # noqa: F401  (validates import chain)
    from .generators import generate_metric, provenance
    from .gfbio import write_gfb, write_provenance

    cfg = _load_config(args.config, args.seed_override, args.out)
    grid = cfg.grid_spec()
    spec = cfg.generator_spec()
    g0 = generate_metric(spec, grid)
    out = os.path.join(cfg.outputs, cfg.name)
    os.makedirs(out, exist_ok=True)
    write_gfb(os.path.join(out, "initial.gfb"), g0)
    write_provenance(os.path.join(out, "initial.provenance.json"),
                     provenance(spec, grid, g0))
    cfg.to_json(os.path.join(out, "config.json"))
    print(f"wrote {out}/initial.gfb")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="torusflow", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    pr = sub.add_parser("run", help="execute experiment configs")
    pr.add_argument("config", nargs="+")
    pr.add_argument("--jobs", type=int, default=1)
    pr.add_argument("--out", default=None)
    pr.add_argument("--seed-override", type=int, default=None)
    pr.add_argument("--verbose", action="store_true")
    pr.set_defaults(func=cmd_run)

    pc = sub.add_parser("compare", help="compare two run directories")
    pc.add_argument("run_a")
    pc.add_argument("run_b")
    pc.add_argument("--mode", required=True,
                    choices=("scalar-decay", "trajectory-diff", "duhamel-vs-stepper"))
    pc.add_argument("--beta", type=float, default=0.4)
    pc.add_argument("--radius-c", type=float, default=1.0)
    pc.add_argument("--verbose", action="store_true")
    pc.set_defaults(func=cmd_compare)

    ps = sub.add_parser("suite", help="run a named acceptance suite")
    ps.add_argument("name")
    ps.add_argument("--verbose", action="store_true")
    ps.set_defaults(func=cmd_suite)

    pg = sub.add_parser("generate", help="emit initial data only")
    pg.add_argument("config")
    pg.add_argument("--out", default=None)
    pg.add_argument("--seed-override", type=int, default=None)
    pg.add_argument("--verbose", action="store_true")
    pg.set_defaults(func=cmd_generate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FlowDegenerationError, HorizonError) as e:
        print(f"flow degeneration: {e}", file=sys.stderr)
        return EXIT_DEGENERATION
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TorusFlowError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
