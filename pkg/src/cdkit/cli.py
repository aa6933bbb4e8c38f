"""Command-line surface: CSV data and JSON configs in, reports out.

Every subcommand prints one JSON object to stdout that embeds the fully
resolved options (defaults included), so a run can be reproduced from its own
output.  Bad inputs exit 2 with a one-line diagnostic; numeric failures from
the library exit 1 with the originating error.
"""

import argparse
import csv
import json
import sys

import numpy as np

from .cd_core import (
    cd_quantile,
    central_interval,
    load_cd_csv,
    save_cd_csv,
)
from .compare import (
    SquaredError,
    bahadur_slopes,
    default_risk,
    dominance_mc,
    dominance_to_json,
    dump_slopes,
    mc_dispersion,
    risk,
)
from .constructors import (
    DataSample,
    PairedSample,
    exponential_rate_cd,
    fisher_z_corr_cd,
    normal_mean_cd,
    normal_variance_cd,
)
from .errors import CdkitError, ConfigError, PairingError, ParameterDomainError
from .inference import NullRegion, cd_mean, cd_median, cd_mode, support_report
from .multivariate import (
    DepthSpec,
    central_region_test,
    centrality,
    centrality_fn,
    depth,
    load_cloud_csv,
    project,
)
from .simlab import (
    calibrate,
    dump_u_values,
    generator_from_config,
    generator_to_config,
    report_to_json,
)

_LEVELS = (0.90, 0.95, 0.99)


# ---------------------------------------------------------------------------
# input plumbing

def _read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ConfigError(f"{path}: empty data file")
    start = 0
    try:
        [float(cell) for cell in rows[0]]
    except ValueError:
        start = 1  # header row
    width = len(rows[start]) if start < len(rows) else 0
    if width == 0 or any(len(row) != width for row in rows[start:]):
        raise ConfigError(f"{path}: rows must all have the same column count")
    return np.array([[float(cell) for cell in row] for row in rows[start:]])


def _parse_sigma(text: str):
    if text == "unknown":
        return None
    if text.startswith("known="):
        value = float(text[len("known="):])
        if not value > 0.0:
            raise ConfigError("--sigma known value must be positive")
        return value
    raise ConfigError(f"--sigma must be 'unknown' or 'known=<value>', got {text!r}")


def _parse_vector(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommand handlers

def _point_estimates(cd) -> dict:
    return {"median": cd_median(cd), "mean": cd_mean(cd), "mode": cd_mode(cd)}


def _cmd_construct(args) -> dict:
    sigma = _parse_sigma(args.sigma)
    if args.model != "normal-mean" and args.sigma != "unknown":
        raise ConfigError("--sigma applies to the normal-mean model only")
    data = _read_matrix(args.data)
    if args.model == "correlation":
        if data.shape[1] != 2:
            raise ConfigError("correlation model needs a two-column data file")
        cd = fisher_z_corr_cd(PairedSample(data))
    else:
        if data.shape[1] != 1:
            raise ConfigError(f"{args.model} model needs a one-column data file")
        sample = DataSample(data[:, 0])
        if args.model == "normal-mean":
            cd = normal_mean_cd(sample, sigma=sigma)
        elif args.model == "normal-variance":
            cd = normal_variance_cd(sample)
        else:
            cd = exponential_rate_cd(sample)
    save_cd_csv(cd, args.out)
    # summarize what was written, so estimates match any later reload exactly
    back = load_cd_csv(args.out)
    return {
        "command": "construct",
        "config": {"model": args.model, "sigma": args.sigma, "data": args.data,
                   "out": args.out},
        "cd_file": args.out,
        "estimates": _point_estimates(back),
        "intervals": {f"{lv:.2f}": list(central_interval(back, lv)) for lv in _LEVELS},
    }


def _cmd_estimate(args) -> dict:
    cd = load_cd_csv(args.cd)
    return {
        "command": "estimate",
        "config": {"cd": args.cd},
        "estimates": _point_estimates(cd),
    }


def _cmd_test(args) -> dict:
    cd = load_cd_csv(args.cd)
    region = NullRegion.from_json(args.region)
    return {
        "command": "test",
        "config": {"cd": args.cd, "region": json.loads(args.region)},
        "report": support_report(cd, region).to_dict(),
    }


def _cmd_calibrate(args) -> dict:
    with open(args.config) as fh:
        obj = json.load(fh)
    gen = generator_from_config(obj)
    reps = int(obj.get("reps", 1000))
    levels = tuple(float(lv) for lv in obj.get("levels", (0.5, 0.9, 0.95, 0.99)))
    report = calibrate(gen, reps, levels)
    body = json.loads(report_to_json(report))
    body.pop("u_values", None)  # the raw array ships via --u-values only
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(json.dumps(body, sort_keys=True))
    if args.u_values:
        dump_u_values(report, args.u_values)
    return {
        "command": "calibrate",
        "config": {"config_file": args.config, "generator": generator_to_config(gen),
                   "reps": reps, "levels": list(levels), "out": args.out,
                   "u_values": args.u_values},
        "report": body,
    }


def _cmd_compare(args) -> dict:
    with open(args.config1) as fh:
        gen1 = generator_from_config(json.load(fh))
    with open(args.config2) as fh:
        gen2 = generator_from_config(json.load(fh))
    theta0 = gen1.theta0 if args.theta0 is None else float(args.theta0)
    eps = _parse_vector(args.eps)
    report = dominance_mc(gen1, gen2, theta0, eps, args.reps)
    dominance_path = f"{args.out_prefix}-dominance.json"
    with open(dominance_path, "w") as fh:
        fh.write(dominance_to_json(report))
    disp = [mc_dispersion(g, SquaredError, args.reps) for g in (gen1, gen2)]
    scale_cd = gen1.replicate(0)
    scale = max(float(cd_quantile(scale_cd, 0.75) - cd_quantile(scale_cd, 0.25)), 1e-6)
    spec = default_risk(theta0, scale)
    risks = [risk(g, spec, args.reps) for g in (gen1, gen2)]
    slope_paths = []
    for tag, gen in (("1", gen1), ("2", gen2)):
        cd = gen.replicate(0)
        rows = [(gen.n, e, *bahadur_slopes(cd, theta0, e, gen.n)) for e in eps]
        path = f"{args.out_prefix}-slopes-{tag}.csv"
        dump_slopes(path, rows)
        slope_paths.append(path)
    return {
        "command": "compare",
        "config": {"config1": args.config1, "config2": args.config2,
                   "theta0": theta0, "eps": eps, "reps": args.reps,
                   "out_prefix": args.out_prefix},
        "verdict": report.verdict,
        "dispersion": {f"gen{i + 1}": {"mean": d.mean, "se": d.se}
                       for i, d in enumerate(disp)},
        "risk": {f"gen{i + 1}": {"mean": r.mean, "se": r.se}
                 for i, r in enumerate(risks)},
        "artifacts": [dominance_path, *slope_paths],
    }


def _mv_config(args, **extra) -> dict:
    base = {"cloud": args.cloud, "kind": args.kind, "directions": args.directions}
    base.update(extra)
    return base


def _depth_spec(args) -> DepthSpec:
    return DepthSpec(args.kind, directions=args.directions)


def _cmd_mv(args) -> dict:
    mcd = load_cloud_csv(args.cloud)
    if args.action == "project":
        axis = _parse_vector(args.axis)
        cd = project(mcd, axis)
        if args.out:
            save_cd_csv(cd, args.out)
        return {
            "command": "mv", "action": "project",
            "config": {"cloud": args.cloud, "axis": axis, "out": args.out},
            "estimates": {"median": cd_median(cd)},
            "intervals": {f"{lv:.2f}": list(central_interval(cd, lv))
                          for lv in _LEVELS},
        }
    point = _parse_vector(args.point)
    if args.action == "depth":
        value = depth(_depth_spec(args), mcd.cloud, point)
        return {"command": "mv", "action": "depth",
                "config": _mv_config(args, point=point), "depth": value}
    cf = centrality_fn(_depth_spec(args), mcd.cloud)
    if args.action == "centrality":
        return {"command": "mv", "action": "centrality",
                "config": _mv_config(args, point=point),
                "centrality": centrality(cf, point)}
    inside = central_region_test(cf, args.level, point)
    return {"command": "mv", "action": "coverage",
            "config": _mv_config(args, point=point, level=args.level),
            "centrality": centrality(cf, point), "inside": inside}


# ---------------------------------------------------------------------------
# parser and dispatch

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdkit", description="Confidence distribution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a CD from a data file")
    p.add_argument("--model", required=True,
                   choices=["normal-mean", "normal-variance", "correlation",
                            "exponential-rate"])
    p.add_argument("--sigma", default="unknown",
                   help="'unknown' or 'known=<value>' (normal-mean only)")
    p.add_argument("--data", required=True, help="CSV of observations")
    p.add_argument("--out", default="cd.csv", help="CD file to write")
    p.set_defaults(handler=_cmd_construct)

    p = sub.add_parser("estimate", help="point estimates from a CD file")
    p.add_argument("--cd", required=True)
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("test", help="support of a null region under a CD")
    p.add_argument("--cd", required=True)
    p.add_argument("--region", required=True,
                   help='JSON like {"intervals": [[null, 0.8], [1.25, null]]}')
    p.set_defaults(handler=_cmd_test)

    p = sub.add_parser("calibrate", help="uniformity and coverage experiment")
    p.add_argument("--config", required=True, help="generator config JSON file")
    p.add_argument("--out", default=None, help="write the report JSON here too")
    p.add_argument("--u-values", default=None, help="CSV of per-replicate u values")
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("compare", help="paired precision comparison of two generators")
    p.add_argument("--config1", required=True)
    p.add_argument("--config2", required=True)
    p.add_argument("--theta0", default=None, type=float,
                   help="defaults to generator 1's theta0")
    p.add_argument("--eps", default="0.1,0.5", help="comma-separated eps grid")
    p.add_argument("--reps", default=2000, type=int)
    p.add_argument("--out-prefix", default="compare")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("mv", help="multivariate cloud operations")
    p.add_argument("action", choices=["project", "depth", "centrality", "coverage"])
    p.add_argument("--cloud", required=True, help="cloud CSV file")
    p.add_argument("--axis", default=None, help="projection vector (project)")
    p.add_argument("--point", default=None, help="query point (depth/centrality/coverage)")
    p.add_argument("--kind", default="mahalanobis", choices=["mahalanobis", "tukey"])
    p.add_argument("--directions", default=360, type=int)
    p.add_argument("--level", default=0.9, type=float, help="region level (coverage)")
    p.add_argument("--out", default=None, help="projected CD file (project)")
    p.set_defaults(handler=_cmd_mv)
    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "mv":
        if args.action == "project" and args.axis is None:
            print("config error: mv project needs --axis", file=sys.stderr)
            return 2
        if args.action != "project" and args.point is None:
            print(f"config error: mv {args.action} needs --point", file=sys.stderr)
            return 2
    try:
        payload = args.handler(args)
    except (ConfigError, PairingError, ParameterDomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CdkitError as exc:
        # numeric failure inside the library; keep its name for the caller
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(payload, sort_keys=True))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
