"""Orchestration: iterative rough-train/grow loop with the plateau
stopping rule, the extensive final training phase, and the iterative
magnitude-pruning comparison harness.  Writes all run artifacts."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_to_dict
from .data import (Dataset, load_idx, load_cifar_binary, synth_classification,
                   synth_structured_images)
from .growth import (growth_amount, grow_score_biased, grow_score_deterministic,
                     grow_random, grow_gradient)
from .model import ConfigError
from .pathscore import topology_record
from .seedinit import initialize, imp_c_step
from .snapshot import save_snapshot
from .stopping import DensityTrace, fit_logistic
from .train import (SGD, RoughTrainPolicy, CostLedger, rough_train,
                    train_epochs, evaluate, flops_estimate)

METRICS_FIELDS = ["step", "rho", "train_loss", "val_loss", "val_acc", "cum_flops"]
TOPOLOGY_FIELDS = ["density", "total_pwmp", "global_tau_core", "avg_tau_core_ratio"]


def build_dataset(cfg: ExperimentConfig, seed) -> Dataset:
    ds = cfg.dataset
    if ds.seed is not None:
        seed = ds.seed
    rng = np.random.default_rng(seed)
    if ds.kind == "synth":
        data = synth_classification(ds.n, ds.dims, ds.classes, ds.separation, rng)
    elif ds.kind == "synth-images":
        data = synth_structured_images(ds.n, ds.classes, rng, noise=ds.noise,
                                       patch=ds.patch)
    elif ds.kind == "idx":
        data = load_idx(ds.path, ds.labels_path)
    elif ds.kind == "cifar":
        data = load_cifar_binary(ds.path, subsample=ds.subsample, seed=seed)
        data.x = data.x.reshape(len(data.x), -1)  # MLP pipelines flatten
    else:
        raise ConfigError(f"unknown dataset kind {ds.kind!r}")
    return data.split(val_fraction=ds.val_fraction, seed=seed)


def _lr_schedule(cfg, steps_per_epoch):
    spec = cfg.optimizer
    if not spec.lr_decay_milestones:
        return None
    milestones = [m * steps_per_epoch for m in spec.lr_decay_milestones]

    def schedule(step):
        lr = spec.lr
        for m in milestones:
            if step >= m:
                lr *= spec.lr_decay_factor
        return lr

    return schedule


def _write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _prepare_outdir(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        payload = {"version": __version__, "config": config_to_dict(cfg)}
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grow(method, net, m, rng, data, batch_size, seed):
    if method == "pwmpr":
        return grow_score_biased(net, m, rng, seed=seed)
    if method == "pwmp":
        return grow_score_deterministic(net, m)
    if method == "rg":
        return grow_random(net, m, rng, seed=seed)
    if method == "gg":
        xtr, ytr = data.train
        sel = rng.choice(len(xtr), size=min(batch_size, len(xtr)), replace=False)
        return grow_gradient(net, m, xtr[sel], ytr[sel])
    raise ConfigError(f"unknown growth method {method!r}")


def run_growth_pipeline(cfg: ExperimentConfig, out_dir) -> dict:
    """Init -> {rough-train; trace; fit; grow} -> extensive train.

    Writes metrics.csv, topology.csv, events.jsonl, seed/final snapshots,
    and report.json under out_dir; returns the report dict.
    """
    cfg.validate()
    _prepare_outdir(cfg, out_dir)
    rng = np.random.default_rng(cfg.seed)
    data = build_dataset(cfg, cfg.seed)
    net = initialize(cfg.init.method, cfg.arch, cfg.init.rho_init, rng)
    save_snapshot(net, os.path.join(out_dir, "seed.snapshot"))

    n_train = len(data.train[0])
    dense_flops = flops_estimate(net, n_train * cfg.optimizer.extensive_epochs,
                                 phase="train", dense=True)
    ledger = CostLedger(dense_extensive_flops=dense_flops)
    policy = RoughTrainPolicy(mode=cfg.rough.mode, epochs=cfg.rough.epochs,
                              patience=cfg.rough.patience,
                              max_epochs=cfg.rough.max_epochs)
    optimizer = SGD(lr=cfg.optimizer.lr, momentum=cfg.optimizer.momentum)
    trace = DensityTrace()
    metrics = []
    topo_rows = []
    events = []
    n_prunable = net.prunable_count()
    step = 0
    stopped_by = "density_cap"
    fit = None

    while True:
        val_acc, _epochs, step = rough_train(
            net, data, policy, optimizer, rng,
            batch_size=cfg.optimizer.batch_size, ledger=ledger,
            metrics=metrics, step_offset=step)
        rho = net.density()
        trace.append(rho, val_acc)
        topo_rows.append(topology_record(net, cfg.stopping.tau))
        fit = fit_logistic(trace, threshold=cfg.stopping.plateau_threshold,
                           mode=cfg.stopping.plateau_mode,
                           min_points=cfg.stopping.min_points)
        if fit is not None and fit.rho_hat is not None and rho >= fit.rho_hat:
            stopped_by = "plateau"
            break
        if rho >= cfg.stopping.density_cap:
            break
        _drho, m = growth_amount(rho, cfg.gamma, n_prunable,
                                 cap=cfg.stopping.density_cap)
        if m == 0:
            break
        event = _grow(cfg.growth_method, net, m, rng, data,
                      cfg.optimizer.batch_size, cfg.seed)
        events.append(event.to_dict())

    # extensive training at the discovered density
    lr_schedule = _lr_schedule(cfg, max(1, n_train // cfg.optimizer.batch_size))
    train_epochs(net, data, optimizer, cfg.optimizer.extensive_epochs, rng,
                 batch_size=cfg.optimizer.batch_size, ledger=ledger,
                 lr_schedule=lr_schedule, metrics=metrics, step_offset=step)
    val_loss, val_acc = evaluate(net, *data.val)

    save_snapshot(net, os.path.join(out_dir, "final.snapshot"))
    _write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_FIELDS, metrics)
    _write_csv(os.path.join(out_dir, "topology.csv"), TOPOLOGY_FIELDS, topo_rows)
    with open(os.path.join(out_dir, "events.jsonl"), "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")
    report = {
        "method": cfg.growth_method,
        "seed": cfg.seed,
        "stopping_density": net.density(),
        "stopped_by": stopped_by,
        "plateau_density": fit.rho_hat if fit else None,
        "final_val_acc": val_acc,
        "final_val_loss": val_loss,
        "relative_cost": ledger.relative(),
        "growth_steps": len(events),
        "avg_tau_core_ratio": topo_rows[-1]["avg_tau_core_ratio"],
        "version": __version__,
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def run_imp_c(cfg: ExperimentConfig, out_dir, target_density) -> dict:
    """Dense-to-sparse magnitude pruning with continued training.

    Each cycle trains the full extensive budget, then prunes the smallest
    active weights globally; cost accumulates every cycle.
    """
    cfg.validate()
    _prepare_outdir(cfg, out_dir)
    rng = np.random.default_rng(cfg.seed)
    data = build_dataset(cfg, cfg.seed)
    net = initialize("uniform-random", cfg.arch, 1.0, rng)

    n_train = len(data.train[0])
    dense_flops = flops_estimate(net, n_train * cfg.optimizer.extensive_epochs,
                                 phase="train", dense=True)
    ledger = CostLedger(dense_extensive_flops=dense_flops)
    optimizer = SGD(lr=cfg.optimizer.lr, momentum=cfg.optimizer.momentum)
    metrics = []
    cycles = []
    step = 0
    while True:
        _hist, step = train_epochs(net, data, optimizer,
                                   cfg.optimizer.extensive_epochs, rng,
                                   batch_size=cfg.optimizer.batch_size,
                                   ledger=ledger, metrics=metrics,
                                   step_offset=step)
        _vl, acc = evaluate(net, *data.val)
        cycles.append({"density": net.density(), "val_acc": acc,
                       "relative_cost": ledger.relative()})
        if net.density() <= target_density:
            break
        imp_c_step(net, cfg.prune_ratio)

    save_snapshot(net, os.path.join(out_dir, "final.snapshot"))
    _write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_FIELDS, metrics)
    report = {
        "method": "imp-c",
        "seed": cfg.seed,
        "target_density": target_density,
        "cycles": cycles,
        "final_density": net.density(),
        "final_val_acc": cycles[-1]["val_acc"],
        "relative_cost": ledger.relative(),
        "version": __version__,
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def run_static_baseline(cfg: ExperimentConfig, out_dir, density,
                        match_flops=None) -> dict:
    """Train a fixed-density walk-initialized network (no growth).

    When ``match_flops`` is given, the epoch count is scaled so the total
    training FLOPs match that budget; otherwise the extensive budget runs.
    """
    cfg.validate()
    _prepare_outdir(cfg, out_dir)
    rng = np.random.default_rng(cfg.seed)
    data = build_dataset(cfg, cfg.seed)
    net = initialize(cfg.init.method, cfg.arch, density, rng)
    n_train = len(data.train[0])
    dense_flops = flops_estimate(net, n_train * cfg.optimizer.extensive_epochs,
                                 phase="train", dense=True)
    ledger = CostLedger(dense_extensive_flops=dense_flops)
    per_epoch = flops_estimate(net, n_train, phase="train")
    if match_flops is not None:
        epochs = max(1, int(round(match_flops / per_epoch)))
    else:
        epochs = cfg.optimizer.extensive_epochs
    optimizer = SGD(lr=cfg.optimizer.lr, momentum=cfg.optimizer.momentum)
    metrics = []
    train_epochs(net, data, optimizer, epochs, rng,
                 batch_size=cfg.optimizer.batch_size, ledger=ledger,
                 metrics=metrics)
    _vl, acc = evaluate(net, *data.val)
    save_snapshot(net, os.path.join(out_dir, "final.snapshot"))
    _write_csv(os.path.join(out_dir, "metrics.csv"), METRICS_FIELDS, metrics)
    report = {
        "method": "phew-static",
        "seed": cfg.seed,
        "density": net.density(),
        "epochs": epochs,
        "final_val_acc": acc,
        "relative_cost": ledger.relative(),
        "cumulative_flops": ledger.cumulative_flops,
        "version": __version__,
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
