"""Run loop, per-phase timing, scaling metrics, and CSV reports.

One step of the cycle is deposit, smooth, solve, gather, collide, move,
resort, migrate. The harness thread orchestrates; every parallel piece of
work goes through the scheduler, and the domain always runs decomposed
(worker_count = 1 is a single range), so the single-worker and multi-worker
code paths are the same code.

When field_solve is off (the charge-neutral benchmark scenario) the smooth
and solve phases are skipped outright: their timers stay exactly 0.0 and the
field is identically zero. Deposit and gather still run; they are part of
the measured cycle.
"""

import csv
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .collisions import CollisionTally, Roles, collision_phase, step_stream_key
from .core import init_plasma, store_total
from .decomposition import (
    exchange_guard_density,
    migrate_particles,
    partition_grid,
    split_store,
)
from .errors import EngineError
from .fields import (
    compute_efield,
    deposit_partials_range,
    gather_field,
    smooth_density,
    solve_poisson,
    stitch_rho,
)
from .layout_lab import convert_layout, kernel_range
from .mover import accel_nodes_for_species, resort_collect, submit_move_tasks
from .scheduler import Scheduler
from . import backends

__all__ = [
    "PHASE_KEYS",
    "RunMetrics",
    "ScalingReport",
    "compute_parallel_efficiency",
    "compute_speedup",
    "run_simulation",
    "strong_scaling_sweep",
    "weak_scaling_sweep",
    "write_diagnostics_csv",
    "write_metrics_csv",
    "write_scaling_csv",
]

PHASE_KEYS = (
    "deposit", "smooth", "solve", "gather", "collide", "mover",
    "resort", "migrate",
)

_DEPOSIT_QUEUE = 8  # species move queues use 0..3


@dataclass
class RunMetrics:
    """Result record of one run: timers, per-step diagnostics, descriptor."""

    phase_seconds: dict
    diagnostics: list
    config_hash: str
    worker_count: int
    layout: str
    backend: str
    tally: CollisionTally


@dataclass
class ScalingReport:
    mode: str
    rows: list
    metrics: list = field(default_factory=list)


def _diag_row(step: int, stores: list, names: list, tally: CollisionTally) -> dict:
    row = {"step": step}
    for isp, name in enumerate(names):
        row[f"total_{name}"] = sum(store_total(s, isp) for s in stores)
    row["elastic"] = tally.elastic
    row["excitation"] = tally.excitation
    row["ionization"] = tally.ionization
    row["suppressed"] = tally.suppressed
    return row


def _worker_density_piece(store, consts):
    """Open-segment node density of one worker (guard nodes unsummed)."""
    for isp in range(store.nsp):
        store.check_sorted(isp)
    left, right = deposit_partials_range(store, consts, 0, store.grid.nc)
    return stitch_rho(left, right, periodic=False)


def run_simulation(config, on_step=None) -> RunMetrics:
    """Execute n_steps of the cycle; returns timers and diagnostics.

    Deterministic contract: for a fixed config+seed, the per-step
    diagnostics and density history are bitwise independent of
    worker_count, grainsize, layout, and backend. `on_step(step, state)`
    receives rho, e_field, the per-worker stores, and the step tally after
    each completed step (for oracles; not part of the CSV surface).
    """
    config.validate()
    grid = config.grid
    consts = config.consts
    names = [sp.name for sp in config.species]
    periodic = config.boundary == "periodic"

    store = init_plasma(config)
    partition = partition_grid(grid.nc, config.worker_count)
    stores = split_store(store, partition)
    del store

    roles = rates = None
    if config.collisions is not None and config.collisions.enabled:
        c = config.collisions
        roles = Roles(
            config.species_index(c.electron),
            config.species_index(c.neutral),
            config.species_index(c.ion),
        )
        rates = c.rates

    phase = {k: 0.0 for k in PHASE_KEYS}
    tally_sum = CollisionTally()
    diagnostics = [_diag_row(0, stores, names, CollisionTally())]
    zeros_nodes = np.zeros(grid.nc + 1)
    w_count = partition.worker_count
    w_lo = [lo for lo, _ in partition.ranges]

    with Scheduler(config.worker_count) as sched:
        t_run = time.perf_counter()
        for step in range(1, config.n_steps + 1):
            step_tally = CollisionTally()
            current = "deposit"
            try:
                # deposit: local open segments, then fixed-order seam stitch
                t0 = time.perf_counter()
                pieces = [None] * w_count
                if w_count == 1:
                    pieces[0] = _worker_density_piece(stores[0], consts)
                else:
                    for w in range(w_count):
                        def body(w=w):
                            pieces[w] = _worker_density_piece(stores[w], consts)
                        sched.submit_work(body, queue=_DEPOSIT_QUEUE, tag="deposit")
                    sched.wait([_DEPOSIT_QUEUE])
                rho = exchange_guard_density(pieces, partition, periodic)
                phase["deposit"] += time.perf_counter() - t0

                if config.field_solve:
                    current = "smooth"
                    t0 = time.perf_counter()
                    if config.smoothing_passes > 0:
                        rho = smooth_density(rho, config.smoothing_passes)
                    phase["smooth"] += time.perf_counter() - t0

                    current = "solve"
                    t0 = time.perf_counter()
                    phi = solve_poisson(
                        rho, grid, consts, config.boundary,
                        config.phi_left, config.phi_right,
                    )
                    e_field = compute_efield(phi, grid, config.boundary)
                    phase["solve"] += time.perf_counter() - t0
                else:
                    e_field = zeros_nodes

                current = "gather"
                t0 = time.perf_counter()
                for w in range(w_count):
                    lo, hi = partition.ranges[w]
                    gather_field(e_field[lo : hi + 1], stores[w], stores[w].grid)
                phase["gather"] += time.perf_counter() - t0

                if roles is not None:
                    current = "collide"
                    t0 = time.perf_counter()
                    step_key = step_stream_key(config.seed, step)
                    for w in range(w_count):
                        step_tally.merge(collision_phase(
                            stores[w], rates, consts, roles, step_key,
                            scheduler=sched, grainsize=config.grainsize,
                            global_offset=w_lo[w],
                        ))
                    phase["collide"] += time.perf_counter() - t0

                current = "mover"
                t0 = time.perf_counter()
                if config.layout == "cell_sorted":
                    queues = set()
                    for w in range(w_count):
                        lo, hi = partition.ranges[w]
                        accel = accel_nodes_for_species(
                            stores[w], e_field[lo : hi + 1], consts
                        )
                        queues |= submit_move_tasks(
                            sched, stores[w], accel, config.grainsize
                        )
                    if queues:
                        sched.wait(sorted(queues))
                else:
                    # Layout study path: run the fused kernel on the
                    # alternative layout; conversions are counted as mover
                    # time since they exist only for this mode.
                    for w in range(w_count):
                        lo, hi = partition.ranges[w]
                        lstore = convert_layout(stores[w], config.layout)
                        accel = accel_nodes_for_species(
                            lstore, e_field[lo : hi + 1], consts
                        )
                        sched.parallel_for_blocks(
                            (0, hi - lo), config.grainsize,
                            lambda blo, bhi: kernel_range(lstore, accel, blo, bhi),
                            tag="move",
                        )
                        stores[w] = convert_layout(lstore, "cell_sorted")
                phase["mover"] += time.perf_counter() - t0

                current = "resort"
                t0 = time.perf_counter()
                collected = [
                    resort_collect(stores[w], lo=w_lo[w], nc_global=grid.nc)
                    for w in range(w_count)
                ]
                phase["resort"] += time.perf_counter() - t0

                current = "migrate"
                t0 = time.perf_counter()
                migrate_particles(stores, partition, collected, periodic)
                phase["migrate"] += time.perf_counter() - t0
            except EngineError as exc:
                raise type(exc)(f"step {step}, phase {current}: {exc}") from exc

            tally_sum.merge(step_tally)
            diagnostics.append(_diag_row(step, stores, names, step_tally))
            if on_step is not None:
                on_step(step, {
                    "rho": rho,
                    "e_field": e_field,
                    "stores": stores,
                    "partition": partition,
                    "tally": step_tally,
                })
        phase["total"] = (
            time.perf_counter() - t_run if config.n_steps > 0 else 0.0
        )

        metrics = RunMetrics(
            phase_seconds=phase,
            diagnostics=diagnostics,
            config_hash=config.config_hash(),
            worker_count=config.worker_count,
            layout=config.layout,
            backend=backends.BACKEND,
            tally=tally_sum,
        )
        if config.out_dir is not None:
            os.makedirs(config.out_dir, exist_ok=True)
            write_diagnostics_csv(
                diagnostics, names, os.path.join(config.out_dir, "diagnostics.csv")
            )
            write_metrics_csv(phase, os.path.join(config.out_dir, "metrics.csv"))
            sched.write_trace_csv(os.path.join(config.out_dir, "trace.csv"))
    return metrics


def compute_speedup(t1: float, tn: float) -> float:
    """Wall-clock gain t1/tn of the n-worker run over the reference."""
    if t1 <= 0.0 or tn <= 0.0:
        raise ValueError("times must be positive")
    return t1 / tn


def compute_parallel_efficiency(speedup: float, workers: int) -> float:
    """Resource utilization in percent: 100 * speedup / workers."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return 100.0 * speedup / workers


def strong_scaling_sweep(config, worker_counts) -> ScalingReport:
    """Same problem, same seed, varying worker count.

    The physics diagnostics must be identical across rows (decomposition
    transparency); the sweep enforces that and fails loudly on a mismatch.
    Speedup is referenced to the 1-worker row when present, else the first.
    """
    runs = []
    for w in worker_counts:
        cfg = replace(config, worker_count=w, out_dir=None)
        runs.append(run_simulation(cfg))
    for r in runs[1:]:
        if r.diagnostics != runs[0].diagnostics:
            raise EngineError(
                "diagnostics differ across worker counts; decomposition "
                "transparency is broken"
            )
    ref = list(worker_counts).index(1) if 1 in worker_counts else 0
    t1 = runs[ref].phase_seconds["total"]
    rows = []
    for w, r in zip(worker_counts, runs):
        s = compute_speedup(t1, r.phase_seconds["total"])
        rows.append({
            "workers": w,
            "t_total": r.phase_seconds["total"],
            "t_mover": r.phase_seconds["mover"],
            "speedup": s,
            "pe_percent": compute_parallel_efficiency(s, w),
        })
    return ScalingReport("strong", rows, runs)


def weak_scaling_sweep(config, worker_counts) -> ScalingReport:
    """Problem size grows with workers (nc scales, per-worker cells fixed).

    Reference time is the base-size single-worker run. Speedup here is the
    weak-scaling efficiency ratio T(1)/T(n) (1.0 = perfect), and pe_percent
    is that ratio in percent.
    """
    runs = {}
    for w in worker_counts:
        cfg = replace(config.scaled_for_workers(w), out_dir=None)
        runs[w] = run_simulation(cfg)
    if 1 in runs:
        t1 = runs[1].phase_seconds["total"]
    else:
        base = replace(config.scaled_for_workers(1), out_dir=None)
        t1 = run_simulation(base).phase_seconds["total"]
    rows = []
    for w in worker_counts:
        r = runs[w]
        ratio = compute_speedup(t1, r.phase_seconds["total"])
        rows.append({
            "workers": w,
            "t_total": r.phase_seconds["total"],
            "t_mover": r.phase_seconds["mover"],
            "speedup": ratio,
            "pe_percent": 100.0 * ratio,
        })
    return ScalingReport("weak", rows, [runs[w] for w in worker_counts])


def write_diagnostics_csv(diagnostics: list, names: list, path):
    cols = ["step"] + [f"total_{n}" for n in names] + [
        "elastic", "excitation", "ionization", "suppressed",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in diagnostics:
            w.writerow([row[c] for c in cols])


def write_metrics_csv(phase_seconds: dict, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase", "seconds"])
        for key in PHASE_KEYS + ("total",):
            w.writerow([key, f"{phase_seconds.get(key, 0.0):.9f}"])


def write_scaling_csv(report: ScalingReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["workers", "t_total", "t_mover", "speedup", "pe"])
        for r in report.rows:
            w.writerow([
                r["workers"], f"{r['t_total']:.9f}", f"{r['t_mover']:.9f}",
                f"{r['speedup']:.6f}", f"{r['pe_percent']:.4f}",
            ])
