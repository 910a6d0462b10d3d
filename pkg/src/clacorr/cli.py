"""Command-line interface.

Subcommands: simulate, estimate, benchmark, surface, ccc.
Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from clacorr import io
from clacorr.errors import ClaCorrError, ConfigError, DataError, NumericalError
from clacorr.estimators import estimate_cla, limit_ca, limit_voxel
from clacorr.evaluation import (
    cluster_region,
    concordance_ccc,
    error_surface,
    run_benchmark,
)
from clacorr.synthetic import build_covariance, sample_scenario

log = logging.getLogger("clacorr")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _pmap(fn, items, threads):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_pipeline(cfg: io.RunConfig) -> int:
    """Cluster every region once, then estimate every region pair.

    Writes clusters.csv, estimates.csv, cla_distribution.csv and heights.csv
    into ``cfg.out``.
    """
    if cfg.timeseries is None or cfg.parcellation is None:
        raise ConfigError("estimate needs both 'timeseries' and 'parcellation' in the config")
    regions = io.load_timeseries(cfg.timeseries, cfg.parcellation)
    labels = sorted(regions)
    clustered = _pmap(lambda lab: cluster_region(regions[lab], cfg.height_rule), labels, cfg.threads)
    clusterings = {lab: c for lab, (c, _) in zip(labels, clustered)}

    pairs = list(itertools.combinations(labels, 2))
    results = _pmap(lambda p: estimate_cla(regions[p[0]], regions[p[1]],
                                           clusterings[p[0]], clusterings[p[1]]),
                    pairs, cfg.threads)

    out = Path(cfg.out)
    io.write_csv(out / "clusters.csv", io.CLUSTERS_HEADER,
                 [(lab, vid, int(c)) for lab in labels
                  for vid, c in zip(clusterings[lab].voxel_ids, clusterings[lab].labels)])
    io.write_csv(out / "heights.csv", io.HEIGHTS_HEADER,
                 [(lab, float(clusterings[lab].cut_height), float(hm), clusterings[lab].n_clusters)
                  for lab, (_, hm) in zip(labels, clustered)])
    est_rows, dist_rows = [], []
    for (ra, rb), est in zip(pairs, results):
        values = {"ac": est.ac_point, "ca": est.ca_point, "cla": est.cla_point}
        est_rows += [(ra, rb, e.upper(), float(values[e])) for e in cfg.estimators]
        dist_rows += [(ra, rb, p, q, float(v)) for p, q, v in est.cluster_pair_estimates]
    io.write_csv(out / "estimates.csv", io.ESTIMATES_HEADER, est_rows)
    io.write_csv(out / "cla_distribution.csv", io.DISTRIBUTION_HEADER, dist_rows)
    log.info("estimated %d region pairs over %d regions -> %s", len(pairs), len(labels), out)
    return EXIT_OK


def cmd_simulate(cfg: io.RunConfig) -> int:
    spec = cfg.scenario
    _, params = build_covariance(spec)
    a, b = sample_scenario(spec, cfg.replicate)
    out = Path(cfg.out)
    io.save_timeseries(out / "timeseries.csv", [a, b], out / "parcellation.csv")
    pair = ("A", "B")
    io.write_csv(out / "ground_truth.csv", ("quantity", "value"), [
        ("rho", float(spec.rho)),
        ("limit_voxel", limit_voxel(params, pair)),
        ("limit_ca", limit_ca(params, pair)),
        ("sigma2_a", float(spec.sigma2_a)), ("sigma2_b", float(spec.sigma2_b)),
        ("gamma2_a", float(spec.gamma2_a)), ("gamma2_b", float(spec.gamma2_b)),
        ("replicate", cfg.replicate), ("seed", spec.seed),
    ])
    log.info("simulated %s replicate %d -> %s", spec.label, cfg.replicate, out)
    return EXIT_OK


BENCHMARK_HEADER = ("model", "n_a", "n_b", "n_times", "eta_minus_a", "eta_minus_b", "phi_a",
                    "phi_b", "sigma2_a", "sigma2_b", "gamma2_a", "gamma2_b", "rho", "seed",
                    "replicates", "method", "mse", "sd")


def cmd_benchmark(cfg: io.RunConfig) -> int:
    rows = []
    for spec in cfg.sweep_scenarios():
        results = run_benchmark(spec, cfg.estimators, cfg.height_rules, cfg.clusterings, cfg.threads)
        for res in results:
            s = res.scenario
            rows.append((s.model, s.n_a, s.n_b, s.n_times, float(s.eta_minus_a), float(s.eta_minus_b),
                         float(s.phi_a), float(s.phi_b), float(s.sigma2_a), float(s.sigma2_b),
                         float(s.gamma2_a), float(s.gamma2_b), float(s.rho), s.seed, s.replicates,
                         res.method, res.mse, res.sd))
            log.info("%s %s mse=%.3g sd=%.3g", s.label, res.method, res.mse, res.sd)
    io.write_csv(Path(cfg.out) / "benchmark.csv", BENCHMARK_HEADER, rows)
    return EXIT_OK


SURFACE_HEADER = ("h_a", "h_b", "error")
MARKERS_HEADER = ("marker", "h_a", "h_b", "error")


def cmd_surface(cfg: io.RunConfig) -> int:
    if cfg.timeseries is not None:
        regions = io.load_timeseries(cfg.timeseries, cfg.parcellation)
        labels = sorted(regions)
        ra = cfg.region_a or labels[0]
        rb = cfg.region_b or labels[1 if len(labels) > 1 else 0]
        if ra not in regions or rb not in regions:
            raise ConfigError(f"regions {ra!r}/{rb!r} not in the parcellation")
        if cfg.rho is None:
            raise ConfigError("surface on loaded data needs rho_true")
        a, b, rho = regions[ra], regions[rb], cfg.rho
    else:
        a, b = sample_scenario(cfg.scenario, cfg.replicate)
        rho = cfg.scenario.rho if cfg.rho is None else cfg.rho
    surf = error_surface(a, b, rho, n_grid=cfg.n_grid)
    out = Path(cfg.out)
    io.write_csv(out / "surface.csv", SURFACE_HEADER, list(surf.triples()))
    io.write_csv(out / "surface_markers.csv", MARKERS_HEADER,
                 [("h_max",) + tuple(map(float, surf.hmax_point)),
                  ("argmin",) + tuple(map(float, surf.argmin_point))])
    return EXIT_OK


def cmd_ccc(cfg: io.RunConfig, first: Path, second: Path) -> int:
    x = io.read_estimates(first)
    y = io.read_estimates(second)
    estimators = sorted({k[2] for k in x} | {k[2] for k in y})
    rows = []
    for est in estimators:
        keys = sorted(k for k in x if k[2] == est)
        missing = [k for k in keys if k not in y] + [k for k in y if k[2] == est and k not in x]
        if missing:
            raise DataError(f"estimator {est}: pair {missing[0][:2]} present in only one file")
        value = concordance_ccc([x[k] for k in keys], [y[k] for k in keys])
        rows.append((est, value))
        print(f"{est},{io.fmt(value)}")
    if cfg.out is not None:
        io.write_csv(Path(cfg.out) / "ccc.csv", ("estimator", "ccc"), rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value configuration file")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")
    common.add_argument("--height", help="cut-off rule: maxu, silhouette or fixed:<h>")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="clacorr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write a synthetic dataset")
    sub.add_parser("estimate", parents=[common], help="estimate inter-regional correlations")
    sub.add_parser("benchmark", parents=[common], help="MSE over simulated replicates")
    sub.add_parser("surface", parents=[common], help="error as a function of cut heights")
    p = sub.add_parser("ccc", parents=[common], help="concordance between two estimates.csv files")
    p.add_argument("first", type=Path)
    p.add_argument("second", type=Path)
    return parser


def _error_record(exc: Exception, code: int, out) -> None:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("ident", "row", "column", "min_eigenvalue"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    text = json.dumps(record, default=str, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = io.read_config(args.config) if args.config else {}
        base = args.config.parent if args.config else Path(".")
        cfg = io.RunConfig.from_mapping(raw, base, out=args.out, seed=args.seed,
                                        height=args.height, threads=args.threads)
        if args.out is None and "out" not in raw and args.command == "ccc":
            cfg.out = None
        handlers = {"simulate": cmd_simulate, "estimate": run_pipeline, "benchmark": cmd_benchmark,
                    "surface": cmd_surface}
        if args.command == "ccc":
            return cmd_ccc(cfg, args.first, args.second)
        return handlers[args.command](cfg)
    except ConfigError as exc:
        _error_record(exc, EXIT_USAGE, None)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        _error_record(exc, EXIT_DATA, getattr(args, "out", None))
        return EXIT_DATA
    except NumericalError as exc:
        _error_record(exc, EXIT_NUMERIC, getattr(args, "out", None))
        return EXIT_NUMERIC
    except ClaCorrError as exc:
        _error_record(exc, EXIT_DATA, getattr(args, "out", None))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
