"""Service indicators, scenario sweeps, and output files.

One run yields one indicator row: service rate (percent of shared requests
served), vehicle-km per shared vehicle, mean detour and waiting minutes over
served riders, mean in-motion travel minutes over all vehicles (private
traffic included), distance-weighted mean speed, assignments per shared
vehicle, and dispatcher compute per matching epoch.

Compute time appears in two forms. ``summary.csv`` and ``epochs.csv`` carry a
*modeled* time — the deterministic operation count of the matching work
(travel-time queries + enumerated pairs + assignment-matrix operations)
scaled by a fixed seconds-per-operation constant — so reruns of the same
config and seed are byte-identical. Measured wall-clock times stay on the
in-memory epoch records and in ``run_summary.json`` for inspection; they are
hardware noise as far as the pinned CSVs are concerned.

Sweep cells are independent runs (one per axis value per seed) and may
execute in a process pool; rows are assembled in (value, seed) order
regardless of completion order.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import demand
from .config import ScenarioConfig, axis_field
from .sim import RunResult, run_scenario

log = logging.getLogger(__name__)

# Seconds charged per unit of matching work in the modeled compute columns.
MODEL_SECONDS_PER_UNIT = 2e-6

SUMMARY_HEADER = [
    "scenario", "mode", "search_level", "fleet_size", "share",
    "flexibility_s", "seed", "SR", "VKT_km", "DT_min", "WT_min", "TTT_min",
    "TS_kmh", "NoA", "compute_max_s", "compute_mean_s",
]

EPOCH_HEADER = [
    "scenario", "mode", "search_level", "seed", "epoch", "t", "pending",
    "expired", "assigned", "proposals", "accepted", "agents",
    "users_considered", "vehicles_considered", "candidate_max",
    "compute_max_s", "compute_mean_s", "compute_total_s",
]

INDICATOR_KEYS = ["SR", "VKT_km", "DT_min", "WT_min", "TTT_min", "TS_kmh",
                  "NoA", "compute_max_s", "compute_mean_s"]


class SweepError(RuntimeError):
    pass


def _mean(values) -> float | None:
    return float(np.mean(values)) if values else None


def compute_indicators(result: RunResult) -> dict:
    """Indicator row for one finished run; undefined entries are None.

    WT/DT are undefined when nothing was served, per-vehicle figures when the
    fleet is empty; None lands in the CSV as an empty cell rather than a fake
    zero.
    """
    shared = [r for r in result.riders if r.shared]
    served = [r for r in shared if r.dropoff_time is not None]
    expired = [r for r in shared if r.status == demand.EXPIRED]

    sr = 100.0 * len(served) / len(shared) if shared else None
    wt = _mean([r.pickup_time - r.request_time for r in served])
    dt = _mean([(r.dropoff_time - r.pickup_time)
                - (r.latest_arrival - r.latest_departure) for r in served])

    fleet = result.fleet
    vkt = (sum(v.odometer_m for v in fleet) / 1000.0 / len(fleet)
           if fleet else None)
    noa = (sum(v.n_assignments for v in fleet) / len(fleet)
           if fleet else None)

    everyone = list(fleet) + list(result.private)
    ttt = _mean([v.moving_s for v in everyone])
    total_km = sum(v.odometer_m for v in everyone) / 1000.0
    total_h = sum(v.moving_s for v in everyone) / 3600.0
    ts = total_km / total_h if total_h > 0 else None

    units_max = [e.units_max for e in result.epochs]
    units_mean = [e.units_mean for e in result.epochs]
    walls_max = [e.wall_max_s for e in result.epochs]
    walls_mean = [e.wall_mean_s for e in result.epochs]

    return {
        "SR": sr,
        "VKT_km": vkt,
        "DT_min": dt / 60.0 if dt is not None else None,
        "WT_min": wt / 60.0 if wt is not None else None,
        "TTT_min": ttt / 60.0 if ttt is not None else None,
        "TS_kmh": ts,
        "NoA": noa,
        "compute_max_s": (max(units_max) * MODEL_SECONDS_PER_UNIT
                          if units_max else None),
        "compute_mean_s": (float(np.mean(units_mean)) * MODEL_SECONDS_PER_UNIT
                           if units_mean else None),
        # diagnostics, not part of the pinned summary row
        "served": len(served),
        "expired": len(expired),
        "n_shared": len(shared),
        "n_private": len(result.private),
        "n_epochs": len(result.epochs),
        "n_messages": len(result.messages),
        "n_violations": sum(1 for e in result.events
                            if e.kind.startswith("violation")),
        "wall_compute_max_s": max(walls_max) if walls_max else None,
        "wall_compute_mean_s": _mean(walls_mean),
        "wall_run_s": result.wall_s,
        "sim_end_s": result.end_s,
    }


# -- formatting ------------------------------------------------------------

def _fmt_cfg(value) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _fmt_ind(key: str, value) -> str:
    if value is None:
        return ""
    if key.startswith("compute"):
        return f"{value:.6f}"
    return f"{value:.4f}"


def summary_row(cfg: ScenarioConfig, ind: dict) -> list:
    row = [cfg.name, cfg.mode, str(cfg.search_level), str(cfg.fleet_size),
           _fmt_cfg(cfg.share), _fmt_cfg(cfg.flexibility_s), str(cfg.seed)]
    row += [_fmt_ind(k, ind.get(k)) for k in SUMMARY_HEADER[7:]]
    return row


def epoch_rows(cfg: ScenarioConfig, result: RunResult) -> list:
    rows = []
    for e in result.epochs:
        rows.append([
            cfg.name, cfg.mode, str(cfg.search_level), str(cfg.seed),
            str(e.epoch), _fmt_cfg(e.t), str(e.pending), str(e.expired),
            str(e.assigned), str(e.n_proposals), str(e.n_accepted),
            str(e.n_agents), str(e.users_considered),
            str(e.vehicles_considered), str(e.candidate_max),
            f"{e.units_max * MODEL_SECONDS_PER_UNIT:.6f}",
            f"{e.units_mean * MODEL_SECONDS_PER_UNIT:.6f}",
            f"{e.units_total * MODEL_SECONDS_PER_UNIT:.6f}",
        ])
    return rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_events(path, result: RunResult):
    """JSONL trace: simulation events plus dispatch messages, time ordered.

    At equal timestamps message records sort before events: queries,
    proposals, and decisions all happen within the matching step, before any
    commitment takes effect in the world.
    """
    lines = []
    for i, m in enumerate(result.messages):
        lines.append((m.t, 0, i, {"t": m.t, "kind": "message", "mtype": m.mtype,
                                  "sender": m.sender, "receiver": m.receiver,
                                  "epoch": m.epoch}))
    for i, e in enumerate(result.events):
        rec = {"t": e.t, "kind": e.kind, "vehicle": e.vehicle, "user": e.user,
               "node": e.node, "link": e.link}
        if e.value is not None:
            rec["value"] = e.value
        lines.append((e.t, 1, i, rec))
    lines.sort(key=lambda x: (x[0], x[1], x[2]))
    with open(path, "w") as fh:
        for _, _, _, rec in lines:
            fh.write(json.dumps(rec) + "\n")


def write_run_outputs(out_dir, result: RunResult) -> dict:
    """events.jsonl, epochs.csv, one-row summary.csv, run_summary.json."""
    os.makedirs(out_dir, exist_ok=True)
    ind = compute_indicators(result)
    cfg = result.cfg
    write_events(os.path.join(out_dir, "events.jsonl"), result)
    write_csv(os.path.join(out_dir, "epochs.csv"), EPOCH_HEADER,
              epoch_rows(cfg, result))
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER,
              [summary_row(cfg, ind)])
    diag = {k: ind[k] for k in sorted(ind) if ind[k] is not None}
    diag["config"] = cfg.to_dict()
    with open(os.path.join(out_dir, "run_summary.json"), "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return ind


# -- sweeps ------------------------------------------------------------------

def sweep_configs(base: ScenarioConfig, axis: str, values, seeds: int) -> list:
    field_name = axis_field(axis)
    out = []
    for value in values:
        for seed in range(seeds):
            name = f"{base.name}-{axis}-{_fmt_cfg(value)}-s{seed}"
            out.append(replace(base, **{field_name: value, "seed": seed,
                                        "name": name}))
    return out


def _sweep_cell(cfg_dict: dict) -> tuple:
    cfg = ScenarioConfig.from_dict(cfg_dict)
    result = run_scenario(cfg)
    return (compute_indicators(result),
            epoch_rows(cfg, result))


def run_sweep(base: ScenarioConfig, axis: str, values, seeds: int,
              parallel: bool = True) -> list:
    """Run the axis × seeds grid; returns [(cfg, indicators, epoch rows)].

    Any failing cell aborts the sweep with the offending config echoed in the
    error. Results are ordered by (value position, seed) no matter how the
    pool schedules them.
    """
    cfgs = sweep_configs(base, axis, values, seeds)
    outputs = [None] * len(cfgs)
    if parallel and len(cfgs) > 1:
        with ProcessPoolExecutor() as pool:
            futures = {i: pool.submit(_sweep_cell, cfg.to_dict())
                       for i, cfg in enumerate(cfgs)}
            for i, fut in futures.items():
                try:
                    outputs[i] = fut.result()
                except Exception as exc:
                    raise SweepError(
                        f"sweep cell failed: {cfgs[i].to_dict()!r}") from exc
    else:
        for i, cfg in enumerate(cfgs):
            try:
                outputs[i] = _sweep_cell(cfg.to_dict())
            except Exception as exc:
                raise SweepError(
                    f"sweep cell failed: {cfg.to_dict()!r}") from exc
    return [(cfg, ind, erows) for cfg, (ind, erows) in zip(cfgs, outputs)]


AXIS_COLUMN = {"search_level": "search_level", "fleet_size": "fleet_size",
               "share": "share", "flexibility": "flexibility_s"}


def aggregate_from_summary(summary_rows, axis: str) -> tuple:
    """Per-axis-value mean and population-stddev columns for each indicator."""
    gi = SUMMARY_HEADER.index(AXIS_COLUMN[axis])
    ind_idx = [(k, SUMMARY_HEADER.index(k)) for k in INDICATOR_KEYS]
    header = ["axis", "value", "n"]
    for key in INDICATOR_KEYS:
        header += [f"{key}_mean", f"{key}_std"]
    groups, order = {}, []
    for r in summary_rows:
        value = r[gi]
        if value not in groups:
            groups[value] = []
            order.append(value)
        groups[value].append(r)
    rows = []
    for value in order:
        grp = groups[value]
        row = [axis, value, str(len(grp))]
        for key, idx in ind_idx:
            vals = [float(r[idx]) for r in grp if r[idx] != ""]
            if vals:
                row += [_fmt_ind(key, float(np.mean(vals))),
                        _fmt_ind(key, float(np.std(vals)))]
            else:
                row += ["", ""]
        rows.append(row)
    return header, rows


def write_sweep_outputs(out_dir, axis: str, cells) -> None:
    """summary.csv (a row per cell), epochs.csv, aggregate.csv, plots."""
    os.makedirs(out_dir, exist_ok=True)
    summary = [summary_row(cfg, ind) for cfg, ind, _ in cells]
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER, summary)
    all_epochs = [row for _, _, erows in cells for row in erows]
    write_csv(os.path.join(out_dir, "epochs.csv"), EPOCH_HEADER, all_epochs)
    header, rows = aggregate_from_summary(summary, axis)
    write_csv(os.path.join(out_dir, "aggregate.csv"), header, rows)
    with open(os.path.join(out_dir, "sweep_meta.json"), "w") as fh:
        json.dump({"axis": axis}, fh)
        fh.write("\n")
    plot_aggregate(out_dir, axis, header, rows)


def plot_aggregate(out_dir, axis: str, agg_header, agg_rows) -> list:
    """One PNG per indicator: mean vs axis value with a stddev band."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    values = [row[1] for row in agg_rows]
    x = np.arange(len(values))
    for key in INDICATOR_KEYS:
        mi = agg_header.index(f"{key}_mean")
        si = agg_header.index(f"{key}_std")
        means, stds, xs = [], [], []
        for i, row in enumerate(agg_rows):
            if row[mi] == "":
                continue
            xs.append(x[i])
            means.append(float(row[mi]))
            stds.append(float(row[si]))
        if not xs:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3)
        ax.set_xticks(x)
        ax.set_xticklabels(values)
        ax.set_xlabel(axis)
        ax.set_ylabel(key)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = os.path.join(out_dir, f"plot_{key}.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written


def load_summary(path) -> tuple:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows
