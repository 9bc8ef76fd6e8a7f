"""Rank-style domain decomposition over in-process message channels.

Each logical worker owns a contiguous cell range with its own cell-sorted
store; workers exchange only immutable messages (guard-node density
contributions, emigrant particle records). The seam summation order is
fixed, left neighbor first, so the stitched density is bitwise identical to
the single-domain deposit; migration commits replay a canonical
(destination cell, source cell, source slot) order so slot layouts, and
with them the slot-indexed collision streams, are identical for any worker
count.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import CellSortedStore, Grid1D
from .errors import CflViolation, ConfigError
from .mover import Movers, commit_incomers, resort_collect

__all__ = [
    "MigrationMsg",
    "MigrationTally",
    "Partition",
    "collect_and_migrate",
    "exchange_guard_density",
    "merge_stores",
    "migrate_particles",
    "partition_grid",
    "split_store",
]


@dataclass(frozen=True)
class Partition:
    """Contiguous balanced cell ranges covering [0, nc)."""

    worker_count: int
    nc: int
    ranges: tuple

    def __post_init__(self):
        if len(self.ranges) != self.worker_count:
            raise ConfigError("one range per worker required")
        prev = 0
        sizes = []
        for lo, hi in self.ranges:
            if lo != prev or hi <= lo:
                raise ConfigError("ranges must be contiguous and non-empty")
            sizes.append(hi - lo)
            prev = hi
        if prev != self.nc:
            raise ConfigError("ranges must cover all cells")
        if max(sizes) - min(sizes) > 1:
            raise ConfigError("range sizes must differ by at most one cell")

    @property
    def bounds(self) -> np.ndarray:
        """Range starts plus final nc; owner(j) = searchsorted(right)-1."""
        return np.array([lo for lo, _ in self.ranges] + [self.nc], dtype=np.int64)

    def owner_of(self, cells) -> np.ndarray:
        return np.searchsorted(self.bounds, np.asarray(cells), side="right") - 1


def partition_grid(nc: int, workers: int) -> Partition:
    """Split [0, nc) into `workers` contiguous ranges, sizes differing <= 1."""
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if workers > nc:
        raise ConfigError(f"workers ({workers}) must not exceed cells ({nc})")
    base, rem = divmod(nc, workers)
    ranges = []
    lo = 0
    for w in range(workers):
        hi = lo + base + (1 if w < rem else 0)
        ranges.append((lo, hi))
        lo = hi
    return Partition(workers, nc, tuple(ranges))


@dataclass(frozen=True)
class MigrationMsg:
    """Emigrant batch for one destination worker and species.

    Positions are already normalized to the destination cell; source worker
    adjacency (or the periodic wrap pair) is the CFL contract.
    """

    dest_worker: int
    src_worker: int
    isp: int
    movers: Movers


@dataclass
class MigrationTally:
    sent: int = 0
    received: int = 0
    by_species: dict = field(default_factory=dict)


def split_store(store: CellSortedStore, partition: Partition) -> list:
    """Per-worker stores over the partition ranges, contents copied bitwise.

    Cell capacities are carried over, so each local packed slab is a verbatim
    slice of the global one (free space included).
    """
    out = []
    for lo, hi in partition.ranges:
        grid = store.grid
        local_grid = Grid1D(hi - lo, (hi - lo) * grid.dx_m, grid.dx_m)
        local = CellSortedStore(local_grid, store.species, initial_cap=1)
        local.weights = list(store.weights)
        for isp in range(store.nsp):
            caps = store.caps(isp)[lo:hi].copy()
            offs = CellSortedStore._offsets_from(caps)
            base = int(store.offsets(isp)[lo])
            total = int(caps.sum())
            local._counts[isp] = store.counts(isp)[lo:hi].copy()
            local._caps[isp] = caps
            local._offs[isp] = offs
            local._data[isp] = {
                n: arr[base : base + total].copy()
                for n, arr in store.data(isp).items()
            }
        out.append(local)
    return out


def merge_stores(stores: list, partition: Partition, grid: Grid1D) -> CellSortedStore:
    """Reassemble a single-domain store from per-worker pieces (oracle aid)."""
    merged = CellSortedStore(grid, stores[0].species, initial_cap=1)
    merged.weights = list(stores[0].weights)
    for isp in range(merged.nsp):
        caps = np.concatenate([s.caps(isp) for s in stores])
        merged._counts[isp] = np.concatenate([s.counts(isp) for s in stores])
        merged._caps[isp] = caps
        merged._offs[isp] = CellSortedStore._offsets_from(caps)
        merged._data[isp] = {
            n: np.concatenate([s.data(isp)[n] for s in stores])
            for n in stores[0].field_names(isp)
        }
    return merged


def exchange_guard_density(pieces: list, partition: Partition,
                           periodic: bool = True) -> np.ndarray:
    """Stitch per-worker node densities into the global rho.

    Each piece spans the worker's nodes [lo, hi] (hi shared with the right
    neighbor), deposited locally as an open segment. Shared nodes take the
    left neighbor's contribution first, which reproduces the single-domain
    summation order bitwise; under periodic wrap node 0 likewise takes the
    last worker's tail first, then worker 0's head.
    """
    nc = partition.nc
    rho = np.zeros(nc + 1, dtype=np.float64)
    for w, (lo, hi) in enumerate(partition.ranges):
        piece = pieces[w]
        if len(piece) != hi - lo + 1:
            raise ValueError(f"piece {w} has {len(piece)} nodes, want {hi - lo + 1}")
        rho[lo + 1 : hi] = piece[1:-1]
    for w in range(partition.worker_count - 1):
        hi = partition.ranges[w][1]
        rho[hi] = pieces[w][-1] + pieces[w + 1][0]
    if periodic:
        rho[0] = pieces[-1][-1] + pieces[0][0]
        rho[nc] = rho[0]
    else:
        # Wall nodes own half a cell; doubled exactly as deposit_charge does.
        rho[0] = 2.0 * pieces[0][0]
        rho[nc] = 2.0 * pieces[-1][-1]
    return rho


def migrate_particles(stores: list, partition: Partition, collected: list,
                      periodic: bool = True) -> MigrationTally:
    """Deliver collected emigrants to their destination workers and insert.

    `collected[w]` is the resort_collect output of worker w with global
    destinations. Local transfers and immigrants are committed together in
    the canonical order, so the resulting slot layout matches a
    single-domain resort exactly.
    """
    w_count = partition.worker_count
    bounds = partition.bounds
    tally = MigrationTally()
    inbox = [[] for _ in range(w_count)]

    for w in range(w_count):
        for movers in collected[w]:
            if movers.count == 0:
                continue
            owner = np.searchsorted(bounds, movers.dest_cell, side="right") - 1
            for dw in np.unique(owner):
                dwi = int(dw)
                sel = owner == dwi
                sub = Movers(
                    movers.isp,
                    movers.dest_cell[sel],
                    movers.src_cell[sel],
                    movers.src_slot[sel],
                    {n: movers.fields[n][sel] for n in movers.fields},
                )
                if dwi != w:
                    adjacent = abs(dwi - w) == 1 or (
                        periodic and {dwi, w} == {0, w_count - 1}
                    )
                    if not adjacent:
                        raise CflViolation(
                            f"emigrants from worker {w} target non-adjacent "
                            f"worker {dwi}"
                        )
                    tally.sent += sub.count
                    spc = tally.by_species
                    spc[movers.isp] = spc.get(movers.isp, 0) + sub.count
                inbox[dwi].append(MigrationMsg(dwi, w, movers.isp, sub))

    for dw in range(w_count):
        lo = partition.ranges[dw][0]
        by_isp = {}
        for msg in inbox[dw]:
            by_isp.setdefault(msg.isp, []).append(msg.movers)
            if msg.src_worker != dw:
                tally.received += msg.movers.count
        for isp in sorted(by_isp):
            commit_incomers(stores[dw], Movers.concat(by_isp[isp]), lo=lo)
    return tally


def collect_and_migrate(stores: list, partition: Partition,
                        periodic: bool = True) -> MigrationTally:
    """Full decomposed resort: collect per worker, ship, commit."""
    collected = [
        resort_collect(stores[w], lo=lo, nc_global=partition.nc)
        for w, (lo, _) in enumerate(partition.ranges)
    ]
    return migrate_particles(stores, partition, collected, periodic=periodic)
