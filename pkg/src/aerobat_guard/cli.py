"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 divergence.
"""
import argparse
import dataclasses
import pathlib
import subprocess
import sys
import time

from aerobat_guard import control, harness, metrics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _fail(msg, code):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _scenario_for(args):
    if args.scenario is None and args.preset is None:
        raise harness.ScenarioError("scenario", "give a scenario file or --preset")
    if args.scenario is None:
        sc = harness.preset_scenario(args.preset)
    else:
        sc = harness.load_scenario(args.scenario)
        if args.preset is not None:
            sc = sc.replace(controller=dataclasses.replace(sc.controller, preset=args.preset, position_gains=None))
    if args.seed is not None:
        sc = sc.replace(seed=args.seed)
    if args.duration is not None:
        sc = sc.replace(duration=args.duration)
    return sc.validate()


def cmd_run(args):
    try:
        sc = _scenario_for(args)
    except (harness.ScenarioError, OSError) as e:
        return _fail(str(e), EXIT_CONFIG)
    out = pathlib.Path(args.out or f"{sc.name}.csv")
    t0 = time.perf_counter()
    try:
        log = harness.run(sc)
    except harness.DivergenceError as e:
        return _fail(str(e), EXIT_DIVERGED)
    elapsed = time.perf_counter() - t0
    out.parent.mkdir(parents=True, exist_ok=True)
    harness.write_log(out, log)
    print(f"{sc.name}: {len(log.rows)} rows -> {out} ({elapsed:.1f} s wall)")
    if log.diverged:
        return _fail(f"run diverged: {log.reason} (partial log written)", EXIT_DIVERGED)
    rep = metrics.analyze_positions(log.positions(), sc.setpoint, scale=args.scale, label=sc.name)
    print(metrics.format_table([rep]))
    return EXIT_OK


def cmd_analyze(args):
    reports = []
    diverged = False
    for path in args.logs:
        try:
            log = harness.read_log(path)
        except (OSError, ValueError) as e:
            return _fail(str(e), EXIT_CONFIG)
        diverged |= log.diverged
        reports.append(metrics.analyze_positions(log.positions(), log.setpoints()[0], scale=args.scale,
                                                 label=pathlib.Path(path).stem))
    print(metrics.format_table(metrics.rank(reports) if args.rank else reports))
    if args.csv:
        pathlib.Path(args.csv).write_text(metrics.reports_to_csv(reports), encoding="utf-8")
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_presets_list(args):
    print(f"{'preset':<8} {'axis':<4} {'kp':>8} {'ki':>8} {'kd':>8}")
    for name, rows in control.GAIN_PRESETS.items():
        for axis, (kp, ki, kd) in zip("xyz", rows):
            print(f"{name:<8} {axis:<4} {kp:8.3f} {ki:8.3f} {kd:8.3f}")
    return EXIT_OK


def cmd_presets_rank(args):
    reports = []
    for name in control.GAIN_PRESETS:
        sc = harness.preset_scenario(name, duration=args.duration, seed=args.seed)
        log = harness.run(sc)
        if log.diverged:
            return _fail(f"{name} diverged: {log.reason}", EXIT_DIVERGED)
        reports.append(metrics.analyze_positions(log.positions(), sc.setpoint, scale=args.scale, label=name))
    print(metrics.format_table(metrics.rank(reports)))
    return EXIT_OK


def cmd_verify(args):
    suite = pathlib.Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    if not suite.exists():
        return _fail(f"acceptance suite not found at {suite} (verify needs a source checkout)", EXIT_CONFIG)
    return subprocess.call([sys.executable, "-m", "pytest", str(suite), "-q", "-s", "-p", "no:cacheprovider"])


def build_parser():
    p = argparse.ArgumentParser(prog="aerobat-guard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write a CSV log")
    r.add_argument("scenario", nargs="?", help="scenario YAML file")
    r.add_argument("--preset", choices=sorted(control.GAIN_PRESETS), help="gain preset (alone: shared preset scenario)")
    r.add_argument("--seed", type=int)
    r.add_argument("--duration", type=float, help="simulated seconds")
    r.add_argument("--out", help="log path (default <scenario name>.csv)")
    r.add_argument("--scale", type=float, default=100.0, help="metric units per metre (default 100)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="error metrics of one or more logs")
    a.add_argument("logs", nargs="+")
    a.add_argument("--scale", type=float, default=100.0, help="metric units per metre (default 100)")
    a.add_argument("--csv", help="also write the report as CSV")
    a.add_argument("--rank", action="store_true", help="sort best score first")
    a.set_defaults(func=cmd_analyze)

    pr = sub.add_parser("presets", help="gain presets")
    psub = pr.add_subparsers(dest="action", required=True)
    psub.add_parser("list", help="print the preset gain tables").set_defaults(func=cmd_presets_list)
    rk = psub.add_parser("rank", help="run every preset on the shared scenario and rank them")
    rk.add_argument("--duration", type=float, default=10.0)
    rk.add_argument("--seed", type=int, default=0)
    rk.add_argument("--scale", type=float, default=100.0)
    rk.set_defaults(func=cmd_presets_rank)

    sub.add_parser("verify", help="run the acceptance suite").set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
