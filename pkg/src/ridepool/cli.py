"""Command line front end: gen-net, run, sweep, report.

Output directory resolution, in order: ``--out`` flag, the ``RIDEPOOL_OUT``
environment variable, then ``./out/<scenario name>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import metrics, network
from .config import AXES, ConfigError, load_config
from .sim import run_scenario

log = logging.getLogger(__name__)

ENV_OUT = "RIDEPOOL_OUT"


def resolve_out_dir(flag_value, default_name: str) -> str:
    if flag_value:
        return flag_value
    env = os.environ.get(ENV_OUT)
    if env:
        return env
    return os.path.join("out", default_name)


def _parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def _axis_values(axis: str, raw: str) -> list:
    cast = int if axis in ("search_level", "fleet_size") else float
    try:
        return [cast(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad --values for axis {axis}: {raw!r}") from exc


def cmd_gen_net(args) -> int:
    net = network.generate_grid(args.rows, args.cols, args.cell_m, args.speed)
    path = args.out or f"grid_{args.rows}x{args.cols}.txt"
    network.write_network(net, path)
    print(f"wrote {path}: {len(net.node_ids)} nodes, {len(net.links)} links")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config, overrides=_parse_overrides(args.set))
    result = run_scenario(cfg)
    out_dir = resolve_out_dir(args.out, cfg.name)
    ind = metrics.write_run_outputs(out_dir, result)
    served = ind["served"]
    total = ind["n_shared"]
    sr = f"{ind['SR']:.1f}%" if ind["SR"] is not None else "n/a"
    print(f"{cfg.name}: served {served}/{total} shared requests (SR {sr}) "
          f"in {result.end_s:.0f} simulated seconds; outputs in {out_dir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, overrides=_parse_overrides(args.set))
    values = _axis_values(args.axis, args.values)
    if not values:
        raise ConfigError("--values must list at least one value")
    cells = metrics.run_sweep(cfg, args.axis, values, args.seeds,
                              parallel=not args.serial)
    out_dir = resolve_out_dir(args.out, f"{cfg.name}-{args.axis}")
    metrics.write_sweep_outputs(out_dir, args.axis, cells)
    print(f"{len(cells)} runs ({len(values)} values x {args.seeds} seeds); "
          f"outputs in {out_dir}")
    return 0


def cmd_report(args) -> int:
    summary_path = os.path.join(args.dir, "summary.csv")
    header, rows = metrics.load_summary(summary_path)
    if header != metrics.SUMMARY_HEADER:
        raise ConfigError(f"{summary_path} has an unexpected header")
    axis = _find_axis(args.dir, rows)
    agg_header, agg_rows = metrics.aggregate_from_summary(rows, axis)
    metrics.write_csv(os.path.join(args.dir, "aggregate.csv"),
                      agg_header, agg_rows)
    metrics.plot_aggregate(args.dir, axis, agg_header, agg_rows)
    _print_table(agg_header, agg_rows)
    return 0


def _find_axis(out_dir, rows) -> str:
    meta_path = os.path.join(out_dir, "sweep_meta.json")
    if os.path.exists(meta_path):
        import json
        with open(meta_path) as fh:
            return json.load(fh)["axis"]
    for axis in AXES:
        idx = metrics.SUMMARY_HEADER.index(metrics.AXIS_COLUMN[axis])
        if len({r[idx] for r in rows}) > 1:
            return axis
    return "search_level"


def _print_table(header, rows):
    cols = [header] + rows
    widths = [max(len(str(row[i])) for row in cols) for i in range(len(header))]
    for row in cols:
        print("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ridepool",
        description="Shared-ridehailing matching simulator: centralized or "
                    "intersection-distributed dispatch on road networks.")
    p.add_argument("--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-net", help="generate a grid road network file")
    gsub = g.add_subparsers(dest="shape", required=True)
    grid = gsub.add_parser("grid", help="rows x cols Manhattan grid")
    grid.add_argument("rows", type=int)
    grid.add_argument("cols", type=int)
    grid.add_argument("cell_m", type=float, help="link length in meters")
    grid.add_argument("speed", type=float, help="free-flow speed in m/s")
    grid.add_argument("--out", help="output path (default grid_RxC.txt)")
    grid.set_defaults(func=cmd_gen_net)

    r = sub.add_parser("run", help="simulate one scenario config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over an axis of values")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--values", required=True,
                   help="comma-separated axis values")
    s.add_argument("--seeds", type=int, default=1,
                   help="number of seeds per value (0..n-1)")
    s.add_argument("--out", help="output directory")
    s.add_argument("--serial", action="store_true",
                   help="disable parallel cell execution")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="aggregate and plot a sweep directory")
    rep.add_argument("dir")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, network.NetworkFormatError,
            metrics.SweepError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
