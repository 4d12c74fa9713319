"""Aggregation of run artifacts into summary tables and plot-ready CSVs."""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict

import numpy as np


class ReportError(ValueError):
    pass


def _load_run(run_dir):
    report_path = os.path.join(run_dir, "report.json")
    config_path = os.path.join(run_dir, "config.json")
    if not os.path.isfile(report_path):
        raise ReportError(f"{run_dir}: missing report.json")
    with open(report_path) as fh:
        report = json.load(fh)
    config = None
    if os.path.isfile(config_path):
        with open(config_path) as fh:
            config = json.load(fh)
    return report, config


def _config_fingerprint(config):
    """Config identity ignoring per-run fields (seed, output paths, method)."""
    if config is None:
        return None
    cfg = dict(config.get("config", config))
    for key in ("seed", "out_dir", "growth_method"):
        cfg.pop(key, None)
    return json.dumps(cfg, sort_keys=True)


def aggregate_runs(run_dirs):
    """Mean +- std of final accuracy and cost per (method, density).

    Refuses to aggregate runs whose configs differ beyond seed and method.
    """
    rows = defaultdict(list)
    fingerprint = None
    for run_dir in run_dirs:
        report, config = _load_run(run_dir)
        fp = _config_fingerprint(config)
        if fp is not None:
            if fingerprint is None:
                fingerprint = fp
            elif fp != fingerprint:
                raise ReportError(
                    f"{run_dir}: config differs from other runs; not aggregating")
        density = report.get("stopping_density",
                             report.get("final_density", report.get("density")))
        key = (report["method"], round(float(density), 4))
        rows[key].append((report.get("final_val_acc"),
                          report.get("relative_cost")))
    table = []
    for (method, density), vals in sorted(rows.items()):
        accs = np.array([v[0] for v in vals], dtype=float)
        costs = np.array([v[1] for v in vals], dtype=float)
        table.append({
            "method": method,
            "density": density,
            "n_runs": len(vals),
            "acc_mean": float(accs.mean()),
            "acc_std": float(accs.std(ddof=1)) if len(vals) > 1 else "",
            "cost_mean": float(costs.mean()),
            "cost_std": float(costs.std(ddof=1)) if len(vals) > 1 else "",
        })
    return table


def topology_table(run_dirs):
    """Concatenate per-density topology rows across runs, tagged by method."""
    rows = []
    for run_dir in run_dirs:
        report, _config = _load_run(run_dir)
        topo_path = os.path.join(run_dir, "topology.csv")
        if not os.path.isfile(topo_path):
            continue
        with open(topo_path) as fh:
            for rec in csv.DictReader(fh):
                rec["method"] = report["method"]
                rec["seed"] = report.get("seed")
                rows.append(rec)
    return rows


def write_summary(run_dirs, out_path, topology_out=None):
    table = aggregate_runs(run_dirs)
    fields = ["method", "density", "n_runs", "acc_mean", "acc_std",
              "cost_mean", "cost_std"]
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(table)
    if topology_out:
        rows = topology_table(run_dirs)
        if rows:
            fields = ["method", "seed", "density", "total_pwmp",
                      "global_tau_core", "avg_tau_core_ratio"]
            with open(topology_out, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=fields)
                writer.writeheader()
                writer.writerows(rows)
    return table
