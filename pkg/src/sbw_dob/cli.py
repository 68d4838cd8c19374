"""Command-line front end.

Exit codes: 0 success, 1 runtime failure or divergence, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import analysis, config, dynamics, simulation
from .errors import ConfigError, DivergenceError, FilterDegenerateError
from .numerics import observability

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

METRIC_UNITS = {
    "delay_s": "s",
    "rmse_pct": "%",
    "mae_pct": "%",
    "rmse_passive_pct": "%",
    "mae_passive_pct": "%",
    "bp_omega_sw_hf": "(rad/s)^2",
    "bp_omega_sw_total": "(rad/s)^2",
    "amp_phi_sw_act": "rad",
    "hp_power_share_act": "-",
}


def _load(args):
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return config.load(args.config, overrides)


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _print_metrics(metrics):
    for k, v in metrics.items():
        print(f"  {k:<20s} {v:>14.6g} {METRIC_UNITS.get(k, '')}")


def _write_metrics(metrics, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value", "unit"])
        for k, v in metrics.items():
            w.writerow([k, f"{v:.17g}", METRIC_UNITS.get(k, "")])


def cmd_simulate(args):
    cfg = _load(args)
    trace = simulation.run_scenario(cfg)
    csv_path, meta_path = simulation.persist_trace(trace, _out_path(args, f"{args.name}.csv"), cfg)
    print(f"wrote {csv_path}")
    print(f"wrote {meta_path}")
    print(f"rows: {len(trace)}  model: {cfg.model}  filter: {cfg.filter}  "
          f"rejection: {'on' if cfg.rejection else 'off'}  seed: {cfg.seed}")
    _print_metrics(analysis.scenario_metrics(trace, cfg))
    return EXIT_OK


def cmd_metrics(args):
    cfg = _load(args)
    if args.trace:
        trace = simulation.load_trace(args.trace)
    else:
        trace = simulation.run_scenario(cfg)
    metrics = analysis.scenario_metrics(trace, cfg)
    _print_metrics(metrics)
    if args.out:
        path = _out_path(args, f"{args.name}_metrics.csv")
        _write_metrics(metrics, path)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_bode(args):
    cfg = _load(args)
    welch = analysis.WelchConfig(nperseg=cfg.welch_nperseg, overlap=cfg.welch_overlap, fs=1.0 / cfg.T_s)
    points, _ = simulation.run_bode(cfg, welch, self_test=args.self_test)
    tag = "self" if args.self_test else cfg.filter
    path = analysis.write_bode_csv(points, _out_path(args, f"{args.name}_{tag}.csv"))
    print(f"wrote {path}")
    mag7, ph7 = analysis.interp_bode(points, 7.0)
    print(f"magnitude at 7 Hz: {mag7:.3f} dB")
    print(f"phase at 7 Hz: {ph7:.2f} deg")
    print(f"usable bandwidth (|mag| <= 3 dB, lag <= 90 deg): {analysis.usable_bandwidth(points):.2f} Hz")
    return EXIT_OK


def cmd_observability(args):
    cfg = _load(args)
    A5, _, C5 = dynamics.augmented_linear_matrices(cfg.hw)
    rep = observability(A5, C5)
    print(f"rank: {rep.rank} of {A5.shape[0]}")
    print("singular values: " + ", ".join(f"{s:.6g}" for s in rep.singular_values))
    print(f"condition number (2-norm): {rep.condition_2norm:.6g}")
    return EXIT_OK


def _sweep_one(job):
    idx, flat, out_dir, name = job
    try:
        cfg = config.from_flat(flat)
        trace = simulation.run_scenario(cfg)
        paths = simulation.persist_trace(trace, os.path.join(out_dir, f"{name}_{idx:03d}.csv"), cfg)
        m = analysis.scenario_metrics(trace, cfg)
        return idx, "ok", m, config.config_hash(cfg), paths
    except (DivergenceError, FilterDegenerateError, ConfigError, ArithmeticError) as exc:
        return idx, f"failed: {exc}", {}, "", ()


def cmd_sweep(args):
    values_raw = [v for v in (args.values or "").split(",") if v.strip()]
    if not values_raw:
        print("error: sweep needs at least one value (--values)", file=sys.stderr)
        return EXIT_USAGE
    base = config.loads(open(args.config).read())
    for item in args.override or []:
        k, v = config.parse_override(item)
        base[k] = v
    if args.seed is not None:
        base["seed"] = args.seed
    if args.key not in config.DEFAULTS:
        raise ConfigError("unknown sweep key", key=args.key)
    jobs = []
    for i, raw in enumerate(values_raw):
        flat = dict(base)
        flat[args.key] = config.parse_override(f"{args.key}={raw}")[1]
        config.from_flat(flat)  # validate up front so usage errors exit 2
        jobs.append((i, flat, args.out, args.name))
    os.makedirs(args.out, exist_ok=True)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = sorted(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    metric_keys = list(METRIC_UNITS)
    summary = _out_path(args, f"{args.name}_summary.csv")
    failed = False
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", args.key, "status", *metric_keys, "config_hash", "trace"])
        for (idx, status, m, h, paths), raw in zip(results, values_raw):
            failed |= status != "ok"
            vals = [f"{m[k]:.17g}" if k in m else "" for k in metric_keys]
            w.writerow([idx, raw.strip(), status, *vals, h, paths[0] if paths else ""])
            for p in paths:
                print(f"wrote {p}")
            if status != "ok":
                print(f"run {idx} ({args.key}={raw.strip()}): {status}", file=sys.stderr)
    print(f"wrote {summary}")
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_defaults(args):
    text = config.dumps(simulation.ScenarioConfig())
    if args.out_file:
        with open(args.out_file, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out_file}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sbw-dob", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="out"):
        sp.add_argument("-c", "--config", required=True, help="scenario config file")
        sp.add_argument("-o", "--out", default=out_default, help="output directory")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--name", default="trace", help="output file stem")

    sp = sub.add_parser("simulate", help="run one scenario and write its trace")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bode", help="chirp identification of the torque estimator")
    common(sp)
    sp.set_defaults(name="bode")
    sp.add_argument("--self-test", action="store_true", help="identify output := input")
    sp.set_defaults(func=cmd_bode)

    sp = sub.add_parser("observability", help="rank/condition of the extended linear model")
    common(sp)
    sp.set_defaults(func=cmd_observability)

    sp = sub.add_parser("metrics", help="print metrics for a config (or an existing trace)")
    common(sp, out_default=None)
    sp.add_argument("--trace", help="evaluate this trace CSV instead of simulating")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("sweep", help="run one scenario per value of a config key")
    common(sp)
    sp.set_defaults(name="sweep")
    sp.add_argument("--key", required=True, help="dotted config key to sweep")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("defaults", help="print the default config")
    sp.add_argument("-o", "--out-file", help="write to this file instead of stdout")
    sp.set_defaults(func=cmd_defaults)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is not None and not os.path.isfile(args.config):
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FilterDegenerateError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
