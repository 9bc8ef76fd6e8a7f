"""Mover-kernel variants over alternative particle memory layouts.

Three layouts of the same particle population:

- cell_sorted: the engine's native packed store (per-cell segments with
  free space inside one flat array per field);
- vector_of_structs: per cell, one contiguous array of particle structs;
- array_of_structs: one global struct array in cell-major order, cells
  addressed by prefix-sum starts.

All kernels run the same fused arithmetic sequence (one-sided gather,
velocity add, position add, transverse add) in the same per-particle order,
so trajectories agree bitwise across layouts; every timing difference is a
memory-layout effect, which is the point of the benchmark. Timings are
reported, never asserted: the report header records the motivating locality
claim as context only.
"""

import csv
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backends
from .core import CellSortedStore, Grid1D
from .errors import ConfigError
from .mover import accel_nodes_for_species
from .rng import STREAM_BENCH, derive, stream, uniforms

__all__ = [
    "AoSStore",
    "LayoutVariant",
    "LAYOUT_SELECTORS",
    "VoSStore",
    "bench_backends",
    "bench_layouts",
    "convert_layout",
    "kernel_range",
    "mover_kernel",
    "particle_dtype",
    "table_view",
    "write_bench_csv",
]

LAYOUT_SELECTORS = ("cell_sorted", "vector_of_structs", "array_of_structs")

_WARMUP = 2


@dataclass(frozen=True)
class LayoutVariant:
    selector: str

    def __post_init__(self):
        if self.selector not in LAYOUT_SELECTORS:
            raise ConfigError(
                f"layout must be one of {LAYOUT_SELECTORS}, got {self.selector!r}"
            )


def particle_dtype(names) -> np.dtype:
    return np.dtype([(n, "<f8") for n in names])


def table_view(rec: np.ndarray) -> np.ndarray:
    """(n, nfields) float64 view of a packed all-float64 struct array."""
    nf = len(rec.dtype.names)
    return rec.view(np.float64).reshape(len(rec), nf)


@dataclass
class VoSStore:
    """Per-cell struct arrays; cells[isp][j] holds cell j's particles."""

    grid: Grid1D
    species: list
    weights: list
    cells: list

    def field_names(self, isp: int) -> tuple:
        return self.cells[isp][0].dtype.names

    def counts(self, isp: int) -> np.ndarray:
        return np.array([len(c) for c in self.cells[isp]], dtype=np.int64)

    def total(self, isp: int) -> int:
        return sum(len(c) for c in self.cells[isp])


@dataclass
class AoSStore:
    """One cell-major struct array per species; starts has nc+1 entries."""

    grid: Grid1D
    species: list
    weights: list
    tables: list
    starts: list

    def field_names(self, isp: int) -> tuple:
        return self.tables[isp].dtype.names

    def counts(self, isp: int) -> np.ndarray:
        return np.diff(self.starts[isp])

    def total(self, isp: int) -> int:
        return len(self.tables[isp])


def _to_vos(cs: CellSortedStore) -> VoSStore:
    cells = []
    for isp in range(cs.nsp):
        dt = particle_dtype(cs.field_names(isp))
        data = cs.data(isp)
        per_cell = []
        for j in range(cs.grid.nc):
            sl = cs.cell_slice(isp, j)
            rec = np.zeros(sl.stop - sl.start, dtype=dt)
            for name in dt.names:
                rec[name] = data[name][sl]
            per_cell.append(rec)
        cells.append(per_cell)
    return VoSStore(cs.grid, list(cs.species), list(cs.weights), cells)


def _to_aos(cs: CellSortedStore) -> AoSStore:
    tables, starts = [], []
    for isp in range(cs.nsp):
        dt = particle_dtype(cs.field_names(isp))
        counts = cs.counts(isp)
        idx = cs.live_indices(isp)
        rec = np.zeros(idx.size, dtype=dt)
        data = cs.data(isp)
        for name in dt.names:
            rec[name] = data[name][idx]
        tables.append(rec)
        starts.append(np.concatenate(([0], np.cumsum(counts))).astype(np.int64))
    return AoSStore(cs.grid, list(cs.species), list(cs.weights), tables, starts)


def _to_cell_sorted(lstore) -> CellSortedStore:
    cs = CellSortedStore(lstore.grid, lstore.species, initial_cap=1)
    cs.weights = list(lstore.weights)
    for isp in range(cs.nsp):
        counts = lstore.counts(isp)
        caps = np.maximum(counts, 1)
        offs = CellSortedStore._offsets_from(caps)
        cs._counts[isp] = counts.copy()
        cs._caps[isp] = caps
        cs._offs[isp] = offs
        names = lstore.field_names(isp)
        total = int(caps.sum())
        cs._data[isp] = {n: np.zeros(total, dtype=np.float64) for n in names}
        idx = cs.live_indices(isp)
        if isinstance(lstore, AoSStore):
            table = lstore.tables[isp]
        else:
            table = np.concatenate(lstore.cells[isp])
        for name in names:
            cs._data[isp][name][idx] = table[name]
    return cs


def convert_layout(store, target):
    """Lossless conversion between the three layouts (any input, any target).

    The particle multiset, per-cell membership, and within-cell slot order
    are preserved exactly; AoS output is contiguous in cell-major order.
    """
    sel = target.selector if isinstance(target, LayoutVariant) else target
    LayoutVariant(sel)
    cs = store if isinstance(store, CellSortedStore) else _to_cell_sorted(store)
    if sel == "cell_sorted":
        return cs.clone() if cs is store else cs
    if sel == "vector_of_structs":
        return _to_vos(cs)
    return _to_aos(cs)


def kernel_range(lstore, accel: list, lo: int, hi: int, kernels=backends):
    """Fused move over cells [lo, hi) for every active species."""
    for isp, sp in enumerate(lstore.species):
        if not sp.active_mover:
            continue
        fnstep = float(sp.nstep)
        a_sp = accel[isp]
        if isinstance(lstore, CellSortedStore):
            data = lstore.data(isp)
            kernels.fused_move(
                a_sp[lo : hi + 1] if a_sp is not None else None,
                data["x"], data["vx"], data["vy"], data.get("yp"),
                lstore.offsets(isp)[lo:hi], lstore.counts(isp)[lo:hi], fnstep,
            )
        elif isinstance(lstore, VoSStore):
            has_yp = "yp" in lstore.field_names(isp)
            has_accel = a_sp is not None
            for j in range(lo, hi):
                rec = lstore.cells[isp][j]
                if len(rec) == 0:
                    continue
                aj = float(a_sp[j]) if has_accel else 0.0
                aj1 = float(a_sp[j + 1]) if has_accel else 0.0
                kernels.fused_move_table(
                    table_view(rec), aj, aj1, fnstep, has_accel, has_yp
                )
        else:
            has_yp = "yp" in lstore.field_names(isp)
            has_accel = a_sp is not None
            a_blk = a_sp[lo : hi + 1] if has_accel else np.zeros(1)
            starts = lstore.starts[isp]
            counts = np.diff(starts)
            kernels.fused_move_aos(
                table_view(lstore.tables[isp]),
                starts[lo:hi], counts[lo:hi], a_blk, fnstep, has_accel, has_yp,
            )


def mover_kernel(lstore, e_field, consts):
    """Gather + velocity push + position push, fused, over the whole store."""
    accel = accel_nodes_for_species(lstore, e_field, consts)
    kernel_range(lstore, accel, 0, lstore.grid.nc)


def _bench_store(grid, species, weights, per_cell_counts, seed) -> CellSortedStore:
    """Synthetic resorted store with a prescribed per-cell population."""
    cap = max(int(per_cell_counts.max()), 1)
    store = CellSortedStore(grid, species, initial_cap=cap)
    store.weights = list(weights)
    for isp in range(store.nsp):
        store.counts(isp)[:] = per_cell_counts
        idx = store.live_indices(isp)
        key = stream(seed, STREAM_BENCH, isp)
        n = idx.size
        ctr = np.arange(4 * n, dtype=np.int64).reshape(4, n)
        data = store.data(isp)
        data["x"][idx] = uniforms(np.uint64(key), ctr[0])
        data["vx"][idx] = 0.2 * (uniforms(np.uint64(key), ctr[1]) - 0.5)
        data["vy"][idx] = 0.2 * (uniforms(np.uint64(key), ctr[2]) - 0.5)
        data["vz"][idx] = 0.2 * (uniforms(np.uint64(key), ctr[3]) - 0.5)
    return store


def _scenario_counts(nc: int, ppc0: int):
    """Per-cell particle counts for the benchmark scenarios."""
    uniform = np.full(nc, ppc0, dtype=np.int64)
    hot = max(nc // 10, 1)
    skewed = np.full(nc, max(ppc0 // 9, 1), dtype=np.int64)
    skewed[:hot] = 9 * ppc0
    return [("uniform", uniform), ("skewed_90_10", skewed)]


def _time_reps(repetitions, make_state, run):
    """Median/IQR nanoseconds over repetitions, with warmup discarded."""
    times = []
    for rep in range(repetitions + _WARMUP):
        state = make_state()
        t0 = time.perf_counter_ns()
        run(state)
        t1 = time.perf_counter_ns()
        if rep >= _WARMUP:
            times.append(t1 - t0)
    med = float(np.median(times))
    iqr = float(np.percentile(times, 75) - np.percentile(times, 25))
    return med, iqr


def bench_layouts(config, repetitions: int = 5, workers: int = 1,
                  grainsize: Optional[int] = None, scheduler=None) -> list:
    """Time the fused mover kernel per layout and ppc scenario.

    Returns one row dict per (layout, scenario); see write_bench_csv for the
    column contract. With workers > 1 the kernel is block-partitioned
    through the scheduler, otherwise it runs single-threaded.
    """
    if repetitions < 3:
        raise ConfigError("repetitions must be >= 3")
    grid = config.grid
    gs = grainsize or config.grainsize
    e_field = 1e3 * np.sin(
        2.0 * np.pi * np.arange(grid.nc + 1, dtype=np.float64) / grid.nc
    )
    own_sched = None
    if workers > 1 and scheduler is None:
        from .scheduler import Scheduler

        scheduler = own_sched = Scheduler(workers)
    rows = []
    try:
        for scen, counts in _scenario_counts(grid.nc, config.ppc0):
            base = _bench_store(
                grid, config.species, [1.0] * len(config.species), counts,
                config.seed,
            )
            npart = sum(
                base.total(isp)
                for isp, sp in enumerate(config.species)
                if sp.active_mover
            )
            for sel in LAYOUT_SELECTORS:
                def make_state(sel=sel):
                    lstore = convert_layout(base, sel)
                    return lstore, accel_nodes_for_species(
                        lstore, e_field, config.consts
                    )

                def run(state):
                    lstore, accel = state
                    if workers > 1:
                        scheduler.parallel_for_blocks(
                            (0, grid.nc), gs,
                            lambda lo, hi: kernel_range(lstore, accel, lo, hi),
                            tag=f"bench:{sel}",
                        )
                    else:
                        kernel_range(lstore, accel, 0, grid.nc)

                med, iqr = _time_reps(repetitions, make_state, run)
                rows.append({
                    "layout": sel,
                    "scenario": scen,
                    "ppc_total": npart,
                    "ns_per_particle_median": med / npart,
                    "ns_per_particle_iqr": iqr / npart,
                })
    finally:
        if own_sched is not None:
            own_sched.shutdown()
    return rows


def bench_backends(config, repetitions: int = 5) -> list:
    """Time the fused mover kernel per backend on the uniform scenario."""
    if repetitions < 3:
        raise ConfigError("repetitions must be >= 3")
    grid = config.grid
    e_field = 1e3 * np.sin(
        2.0 * np.pi * np.arange(grid.nc + 1, dtype=np.float64) / grid.nc
    )
    counts = np.full(grid.nc, config.ppc0, dtype=np.int64)
    base = _bench_store(
        grid, config.species, [1.0] * len(config.species), counts, config.seed
    )
    npart = sum(
        base.total(isp)
        for isp, sp in enumerate(config.species)
        if sp.active_mover
    )
    rows = []
    for name in ("compiled", "pure"):
        try:
            kernels = backends.load_backend(name)
        except ImportError:
            continue
        def make_state():
            lstore = base.clone()
            return lstore, accel_nodes_for_species(lstore, e_field, config.consts)

        def run(state, kernels=kernels):
            lstore, accel = state
            kernel_range(lstore, accel, 0, grid.nc, kernels=kernels)

        med, iqr = _time_reps(repetitions, make_state, run)
        rows.append({
            "layout": name,
            "scenario": "uniform",
            "ppc_total": npart,
            "ns_per_particle_median": med / npart,
            "ns_per_particle_iqr": iqr / npart,
        })
    return rows


_BENCH_CONTEXT = (
    "# context: cell-sorted storage keeps the mover and collision passes "
    "cache-local; engine measurements behind this study reported up to ~5x "
    "over unsorted layouts. Timings below are informational, never asserted."
)


def write_bench_csv(rows: list, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_BENCH_CONTEXT + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([
            "layout", "scenario", "ppc_total",
            "ns_per_particle_median", "ns_per_particle_iqr",
        ])
        for r in rows:
            w.writerow([
                r["layout"], r["scenario"], r["ppc_total"],
                f"{r['ns_per_particle_median']:.3f}",
                f"{r['ns_per_particle_iqr']:.3f}",
            ])
