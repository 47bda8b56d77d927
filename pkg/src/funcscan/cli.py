"""Command line front end: scan a dataset, run the power study, benchmark.

Outputs are machine-readable (JSON for scans and benchmarks, CSV for
studies), schema-versioned, and carry the run manifest so any result
can be reproduced from the file alone.  Progress goes to stderr; data
goes only to files or stdout.  Exit codes: 0 success, 2 validation
problem, 3 degenerate data.

Every flag with a value can also be set through an environment
variable named FUNCSCAN_<FLAG> (dashes become underscores, upper case);
explicit flags win over the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .bench import benchmark_npfss
from .errors import DegenerateDataError, ValidationError
from .fdata import read_curves_csv
from .geometry import enumerate_candidates, read_sites_csv, resolve_site_indices
from .indices import METHODS
from .scan import run_scan
from . import simulate as sim

SCHEMA_VERSION = 1
ENV_PREFIX = "FUNCSCAN_"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DEGENERATE = 3

# Built-in defaults, overridable by environment, config file, then flags.
_DEFAULTS = {
    "method": "all",
    "seed": 0,
    "level": 0.05,
    "max_fraction": 0.5,
    "overlap": "none",
    "threads": 1,
    "perms_scan": 999,
    "perms_sim": 199,
    "replicates": 100,
    "full_replicates": 1000,
    "full_perms": 999,
    "repetitions": 5,
    "times": 101,
    "distribution": "gaussian",
    "shift": "delta1",
    "alphas": "default",
}

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in _TRUTHY:
        return True
    if low in _FALSY:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


class _Resolver:
    """flag > config file > environment > built-in default."""

    def __init__(self, args: argparse.Namespace, config: dict | None = None):
        self.args = args
        self.config = config or {}

    def get(self, name: str, default, cast):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return cast(self.config[name])
        env = os.environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            return cast(env)
        return default

    def flag(self, name: str) -> bool:
        return bool(self.get(name, False, _parse_bool))


def _read_config(path: str) -> dict:
    """Flat key=value study configuration; # starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{lineno}: expected key=value, got {line!r}"
                )
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _write_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(out, text)


def _figure_path(out: str | None, what: str) -> str:
    if out is None:
        raise ValidationError(f"--figures needs --out to place the {what} image")
    stem, _ = os.path.splitext(out)
    return stem + ".png"


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _split_choices(raw: str, allowed: tuple[str, ...], what: str) -> list[str]:
    if raw == "all":
        return list(allowed)
    picked = [item.strip() for item in raw.split(",") if item.strip()]
    for item in picked:
        if item not in allowed:
            raise ValidationError(
                f"unknown {what} {item!r}; expected one of {allowed} or 'all'"
            )
    if not picked:
        raise ValidationError(f"no {what} selected")
    return picked


def cmd_scan(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    method = res.get("method", _DEFAULTS["method"], str)
    perms = res.get("perms", _DEFAULTS["perms_scan"], int)
    seed = res.get("seed", _DEFAULTS["seed"], int)
    level = res.get("level", _DEFAULTS["level"], float)
    max_fraction = res.get("max_fraction", _DEFAULTS["max_fraction"], float)
    overlap = res.get("overlap", _DEFAULTS["overlap"], str)
    threads = res.get("threads", _DEFAULTS["threads"], int)

    grid = read_sites_csv(args.sites)
    ds = read_curves_csv(args.curves).reindex(grid.ids)
    candidates = enumerate_candidates(grid, max_fraction=max_fraction)
    _progress(
        f"scan: {grid.n} sites, {ds.n_times} time points, "
        f"{len(candidates)} candidate windows, M={perms}"
    )

    t0 = time.perf_counter()
    results = run_scan(
        ds,
        candidates,
        method=method,
        n_permutations=perms,
        master_seed=seed,
        level=level,
        overlap=overlap,
        threads=threads,
        all_secondaries=args.all_secondaries,
        keep_null_maxima=False,
    )
    elapsed = time.perf_counter() - t0

    manifest = {
        "command": "scan",
        "sites": str(args.sites),
        "curves": str(args.curves),
        "method": method,
        "n_permutations": perms,
        "master_seed": seed,
        "level": level,
        "max_fraction": max_fraction,
        "overlap": overlap,
        "all_secondaries": bool(args.all_secondaries),
    }
    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifest": manifest,
        "results": {m: r.to_dict(grid) for m, r in results.items()},
    }
    if args.timings:
        payload["timings"] = {"scan_seconds": elapsed}
    _emit(_json_text(payload), args.out)

    if args.figures:
        from . import report

        fig_path = _figure_path(args.out, "scan")
        report.render_scan_figure(ds, grid, results, fig_path)
        _progress(f"figure written to {fig_path}")
    for m, r in results.items():
        _progress(
            f"{m}: statistic={r.statistic:.6g} p={r.p_value:.6g} "
            f"mlc_size={r.mlc.size} secondaries={len(r.secondaries)}"
        )
    return EXIT_OK


def _study_csv(rows: list[dict], manifest: dict) -> str:
    import io

    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    fields = ("schema_version",) + sim.CSV_FIELDS
    buf.write(",".join(fields) + "\n")
    for row in rows:
        full = {"schema_version": SCHEMA_VERSION, **row}
        buf.write(",".join(str(full[f]) for f in fields) + "\n")
    return buf.getvalue()


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _read_config(args.config) if args.config else {}
    res = _Resolver(args, config)

    method = res.get("method", _DEFAULTS["method"], str)
    methods = tuple(_split_choices(method, METHODS, "method"))
    distributions = _split_choices(
        res.get("distribution", _DEFAULTS["distribution"], str),
        sim.DISTRIBUTIONS,
        "distribution",
    )
    shifts = _split_choices(
        res.get("shift", _DEFAULTS["shift"], str), sim.SHIFT_FAMILIES, "shift"
    )
    full_scale = res.flag("full_scale")
    replicates = res.get(
        "replicates",
        _DEFAULTS["full_replicates"] if full_scale else _DEFAULTS["replicates"],
        int,
    )
    perms = res.get(
        "perms",
        _DEFAULTS["full_perms"] if full_scale else _DEFAULTS["perms_sim"],
        int,
    )
    seed = res.get("seed", _DEFAULTS["seed"], int)
    level = res.get("level", _DEFAULTS["level"], float)
    max_fraction = res.get("max_fraction", _DEFAULTS["max_fraction"], float)
    threads = res.get("threads", _DEFAULTS["threads"], int)
    alphas_raw = res.get("alphas", _DEFAULTS["alphas"], str)
    sites_path = res.get("sites", None, str)
    cluster_raw = res.get("cluster", None, str)

    if sites_path:
        grid = read_sites_csv(sites_path)
        if not cluster_raw:
            raise ValidationError("--cluster is required with custom --sites")
    else:
        grid = sim.default_site_grid()
    if cluster_raw:
        ids = [s.strip() for s in cluster_raw.split(",") if s.strip()]
        cluster = resolve_site_indices(grid, ids)
    else:
        cluster = sim.default_cluster_indices(grid)

    def alphas_for(shift: str) -> list[float]:
        if alphas_raw == "default":
            return list(sim.DEFAULT_ALPHA_GRIDS[shift])
        return [float(a) for a in alphas_raw.split(",") if a.strip()]

    manifest = {
        "command": "simulate",
        "methods": list(methods),
        "distributions": distributions,
        "shifts": shifts,
        "alphas": {s: alphas_for(s) for s in shifts},
        "replicates": replicates,
        "n_permutations": perms,
        "master_seed": seed,
        "level": level,
        "max_fraction": max_fraction,
        "sites": str(sites_path) if sites_path else "builtin:sites94",
        "cluster_ids": [grid.ids[i] for i in cluster],
    }

    rows: list[dict] = []
    cells = [
        (d, s, a) for d in distributions for s in shifts for a in alphas_for(s)
    ]
    for k, (dist, shift, alpha) in enumerate(cells, start=1):
        cfg = sim.SimulationConfig(
            distribution=dist,
            shift=shift,
            alpha=alpha,
            true_cluster=tuple(cluster),
            replicates=replicates,
            n_permutations=perms,
            master_seed=seed,
            level=level,
            max_fraction=max_fraction,
        )
        _progress(
            f"study cell {k}/{len(cells)}: {dist} {shift} alpha={alpha} "
            f"({replicates} replicates, M={perms})"
        )
        metrics = sim.run_power_study_multi(
            cfg, methods, site_grid=grid, threads=threads
        )
        rows.extend(sim.study_rows(cfg, metrics))

    _emit(_study_csv(rows, manifest), args.out)
    if args.figures:
        from . import report

        fig_path = _figure_path(args.out, "study")
        report.render_study_figure(rows, fig_path)
        _progress(f"figure written to {fig_path}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    seed = res.get("seed", _DEFAULTS["seed"], int)
    repetitions = res.get("repetitions", _DEFAULTS["repetitions"], int)
    max_fraction = res.get("max_fraction", _DEFAULTS["max_fraction"], float)

    if args.sites or args.curves:
        if not (args.sites and args.curves):
            raise ValidationError("bench needs both --sites and --curves, or neither")
        grid = read_sites_csv(args.sites)
        ds = read_curves_csv(args.curves).reindex(grid.ids)
        source = {"sites": str(args.sites), "curves": str(args.curves)}
    else:
        n_times = res.get("times", _DEFAULTS["times"], int)
        grid = sim.default_site_grid()
        cfg = sim.SimulationConfig(
            alpha=0.0,
            time_grid=tuple(sim.default_time_grid(n_times)),
            master_seed=seed,
        )
        ds = sim.generate_dataset(cfg, 0, site_ids=grid.ids)
        source = {"generated": {"n_times": n_times, "master_seed": seed}}

    candidates = enumerate_candidates(grid, max_fraction=max_fraction)
    _progress(
        f"bench: {grid.n} sites, {ds.n_times} time points, "
        f"{len(candidates)} windows, {repetitions} repetitions"
    )
    report = benchmark_npfss(ds, candidates, repetitions=repetitions)

    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifest": {
            "command": "bench",
            **source,
            "repetitions": repetitions,
            "max_fraction": max_fraction,
        },
        "report": report.to_dict(),
    }
    _emit(_json_text(payload), args.out)
    for line in report.summary_lines():
        _progress(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funcscan",
        description="Spatial cluster detection for functional data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, scan_like: bool) -> None:
        p.add_argument("--method", choices=(*METHODS, "all"),
                       help="index to scan with (default all)")
        p.add_argument("--perms", type=int, metavar="M",
                       help="Monte-Carlo permutations")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--level", type=float,
                       help="significance level (default 0.05)")
        p.add_argument("--max-fraction", dest="max_fraction", type=float,
                       help="largest window size as a fraction of n (default 0.5)")
        p.add_argument("--threads", type=int,
                       help="worker threads; output is identical for any value")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--figures", action="store_true", default=False,
                       help="also render a PNG next to --out")
        if scan_like:
            p.add_argument("--overlap", choices=("none", "partial"),
                           help="secondary-cluster overlap policy (default none)")

    p_scan = sub.add_parser("scan", help="scan one dataset for clusters")
    p_scan.add_argument("--sites", required=True, help="sites CSV (id,x,y)")
    p_scan.add_argument("--curves", required=True,
                        help="curves CSV (id,t_0.0,...)")
    common(p_scan, scan_like=True)
    p_scan.add_argument("--all-secondaries", dest="all_secondaries",
                        action="store_true", default=False,
                        help="report every non-overlapping secondary, "
                             "significant or not")
    p_scan.add_argument("--timings", action="store_true", default=False,
                        help="include wall-clock timings in the JSON "
                             "(makes output run-dependent)")
    p_scan.set_defaults(func=cmd_scan)

    p_sim = sub.add_parser("simulate", help="run the power study")
    common(p_sim, scan_like=False)
    p_sim.add_argument("--distribution",
                       help="gaussian,student4,chisq4 or 'all' (default gaussian)")
    p_sim.add_argument("--shift",
                       help="delta1,delta2,delta3 or 'all' (default delta1)")
    p_sim.add_argument("--alphas",
                       help="comma-separated intensities, or 'default' for "
                            "the per-shift grid")
    p_sim.add_argument("--replicates", type=int,
                       help="datasets per cell (default 100)")
    p_sim.add_argument("--sites", help="custom sites CSV (default built-in 94)")
    p_sim.add_argument("--cluster",
                       help="comma-separated site ids of the true cluster "
                            "(required with --sites)")
    p_sim.add_argument("--config",
                       help="key=value file; flags override its entries")
    p_sim.add_argument("--full-scale", dest="full_scale", action="store_true",
                       default=None,
                       help="1000 replicates and M=999 (long run)")
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("bench", help="time naive vs fast NPFSS")
    p_bench.add_argument("--sites", help="sites CSV; omit to generate data")
    p_bench.add_argument("--curves", help="curves CSV; omit to generate data")
    p_bench.add_argument("--times", type=int,
                         help="time points for generated data (default 101)")
    p_bench.add_argument("--repetitions", type=int,
                         help="timed repetitions per phase (default 5)")
    p_bench.add_argument("--seed", type=int, help="generator seed (default 0)")
    p_bench.add_argument("--max-fraction", dest="max_fraction", type=float)
    p_bench.add_argument("--out", help="output file (default stdout)")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateDataError as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
