"""Domain types shared by every module: grid, species, particle store.

The particle store implements "natural sorting": per species, particles live
in per-cell array segments with per-cell free space, so spatial neighbors are
memory neighbors and a cell crossing is a removal from one segment plus an
append to another.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import ELEMENTARY_CHARGE, EPSILON_0
from .errors import ContractViolation, InitError
from .rng import STREAM_INIT, derive_vec, stream, uniforms, uniforms_open

__all__ = [
    "CellSortedStore",
    "Grid1D",
    "PhysicalConstants",
    "SpeciesDef",
    "init_plasma",
    "store_total",
    "stores_equal",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D mesh of nc cells spanning length_m meters."""

    nc: int
    length_m: float
    dx_m: float

    def __post_init__(self):
        if self.nc < 2:
            raise ValueError(f"nc must be >= 2, got {self.nc}")
        if self.dx_m <= 0.0:
            raise ValueError("dx_m must be positive")
        if abs(self.dx_m * self.nc - self.length_m) > 1e-12 * abs(self.length_m):
            raise ValueError(
                f"inconsistent grid: dx_m*nc = {self.dx_m * self.nc!r} "
                f"!= length_m = {self.length_m!r}"
            )

    @classmethod
    def from_cells(cls, nc: int, length_m: float) -> "Grid1D":
        return cls(nc=nc, length_m=length_m, dx_m=length_m / nc)


@dataclass(frozen=True)
class SpeciesDef:
    """Physical and bookkeeping parameters of one particle species.

    nstep is the subcycle displacement multiplier: the position update is
    x += nstep * vx per mover call. active_mover gates whether the species
    participates in the mover at all; track_transverse enables the transverse
    position (yp) update.
    """

    name: str
    charge_c: float
    mass_kg: float
    nstep: int = 1
    active_mover: bool = True
    track_transverse: bool = False
    charged: bool = field(default=None)  # derived from charge_c unless given

    def __post_init__(self):
        if self.charged is None:
            object.__setattr__(self, "charged", self.charge_c != 0.0)
        if self.mass_kg <= 0.0:
            raise ValueError(f"species {self.name!r}: mass_kg must be positive")
        if self.nstep < 1:
            raise ValueError(f"species {self.name!r}: nstep must be >= 1")
        if self.charged != (self.charge_c != 0.0):
            raise ValueError(
                f"species {self.name!r}: charged flag contradicts charge_c"
            )


@dataclass(frozen=True)
class PhysicalConstants:
    """Run-wide constants: vacuum permittivity and the base time step."""

    dt_s: float
    epsilon0: float = EPSILON_0

    def __post_init__(self):
        if self.epsilon0 <= 0.0 or self.dt_s <= 0.0:
            raise ValueError("epsilon0 and dt_s must be positive")


# Per-particle float fields. yp is allocated only for track_transverse species.
_BASE_FIELDS = ("x", "vx", "vy", "vz")


class CellSortedStore:
    """Cell-sorted particle storage for a species list on one grid.

    Per species, all per-particle fields are single packed float64 arrays
    addressed through per-cell (offset, count, capacity) triples. Particles of
    cell j occupy slots [off[j], off[j]+count[j]); the remaining slots up to
    off[j]+cap[j] are free space, kept zeroed.

    Positions are cell-relative in [0,1) in units of dx; velocities are in
    units of dx per base time step.

    Concurrency: disjoint cells may be mutated concurrently in place, but any
    operation that can reallocate (append beyond capacity) or that touches two
    cells must be serialized by the caller.
    """

    def __init__(self, grid: Grid1D, species, initial_cap: int = 4):
        self.grid = grid
        self.species = list(species)
        self.weights = [1.0] * len(self.species)  # macro particles per m^2
        self._counts = []
        self._caps = []
        self._offs = []
        self._data = []
        for sp in self.species:
            cap0 = max(int(initial_cap), 1)
            caps = np.full(grid.nc, cap0, dtype=np.int64)
            self._counts.append(np.zeros(grid.nc, dtype=np.int64))
            self._caps.append(caps)
            self._offs.append(self._offsets_from(caps))
            names = _BASE_FIELDS + (("yp",) if sp.track_transverse else ())
            total = cap0 * grid.nc
            self._data.append({k: np.zeros(total, dtype=np.float64) for k in names})

    @staticmethod
    def _offsets_from(caps: np.ndarray) -> np.ndarray:
        offs = np.zeros(len(caps), dtype=np.int64)
        np.cumsum(caps[:-1], out=offs[1:])
        return offs

    # -- accessors ---------------------------------------------------------

    @property
    def nsp(self) -> int:
        return len(self.species)

    def counts(self, isp: int) -> np.ndarray:
        return self._counts[isp]

    def offsets(self, isp: int) -> np.ndarray:
        return self._offs[isp]

    def caps(self, isp: int) -> np.ndarray:
        return self._caps[isp]

    def data(self, isp: int) -> dict:
        return self._data[isp]

    def field_names(self, isp: int) -> tuple:
        return tuple(self._data[isp].keys())

    def total(self, isp: int) -> int:
        return int(self._counts[isp].sum())

    def cell_slice(self, isp: int, j: int) -> slice:
        off = self._offs[isp][j]
        return slice(int(off), int(off + self._counts[isp][j]))

    def live_indices(self, isp: int, lo: int = 0, hi: int = None) -> np.ndarray:
        """Packed-array indices of live slots for cells [lo, hi), cell-major."""
        if hi is None:
            hi = self.grid.nc
        counts = self._counts[isp][lo:hi]
        offs = self._offs[isp][lo:hi]
        n = int(counts.sum())
        if n == 0:
            return np.empty(0, dtype=np.int64)
        starts = np.repeat(offs, counts)
        within = np.arange(n, dtype=np.int64) - np.repeat(
            np.concatenate(([0], np.cumsum(counts[:-1]))), counts
        )
        return starts + within

    def cell_of_live(self, isp: int, lo: int = 0, hi: int = None) -> np.ndarray:
        """Cell index of each live slot, aligned with live_indices."""
        if hi is None:
            hi = self.grid.nc
        counts = self._counts[isp][lo:hi]
        return np.repeat(np.arange(lo, hi, dtype=np.int64), counts)

    # -- mutation ----------------------------------------------------------

    def append(self, isp: int, j: int, record: dict) -> int:
        """Insert one particle into cell j; returns its slot index."""
        if self._counts[isp][j] == self._caps[isp][j]:
            self._grow(isp, j)
        slot = int(self._counts[isp][j])
        base = int(self._offs[isp][j])
        data = self._data[isp]
        for name in data:
            data[name][base + slot] = record.get(name, 0.0)
        self._counts[isp][j] = slot + 1
        return slot

    def swap_remove(self, isp: int, j: int, slot: int) -> dict:
        """Remove the particle at (j, slot), filling the hole from the end."""
        count = int(self._counts[isp][j])
        if not 0 <= slot < count:
            raise IndexError(f"slot {slot} out of range for cell {j} ({count})")
        base = int(self._offs[isp][j])
        data = self._data[isp]
        record = {}
        last = base + count - 1
        for name, arr in data.items():
            record[name] = float(arr[base + slot])
            arr[base + slot] = arr[last]
            arr[last] = 0.0  # keep free space zeroed
        self._counts[isp][j] = count - 1
        return record

    def _grow(self, isp: int, j: int):
        """Double cell j's capacity; rebuilds the species' packed arrays."""
        caps = self._caps[isp]
        new_caps = caps.copy()
        new_caps[j] = max(2 * caps[j], 4)
        new_offs = self._offsets_from(new_caps)
        counts = self._counts[isp]
        total = int(new_caps.sum())
        old = self._data[isp]
        new = {k: np.zeros(total, dtype=np.float64) for k in old}
        for name, arr in old.items():
            dst = new[name]
            for c in range(self.grid.nc):
                n = counts[c]
                if n:
                    dst[new_offs[c] : new_offs[c] + n] = arr[
                        self._offs[isp][c] : self._offs[isp][c] + n
                    ]
        self._caps[isp] = new_caps
        self._offs[isp] = new_offs
        self._data[isp] = new

    def reserve(self, isp: int, j: int, extra: int):
        """Ensure cell j can take `extra` more particles without growing."""
        while self._counts[isp][j] + extra > self._caps[isp][j]:
            self._grow(isp, j)

    def clone(self) -> "CellSortedStore":
        other = CellSortedStore(self.grid, self.species, initial_cap=1)
        other.weights = list(self.weights)
        other._counts = [a.copy() for a in self._counts]
        other._caps = [a.copy() for a in self._caps]
        other._offs = [a.copy() for a in self._offs]
        other._data = [{k: v.copy() for k, v in d.items()} for d in self._data]
        return other

    def check_sorted(self, isp: int):
        """Raise unless every live x lies in [0, 1)."""
        idx = self.live_indices(isp)
        x = self._data[isp]["x"][idx]
        if idx.size and (np.any(x < 0.0) or np.any(x >= 1.0)):
            raise ContractViolation(
                f"store not resorted: species {self.species[isp].name!r} has "
                "positions outside [0,1)"
            )


def store_total(store: CellSortedStore, isp: int) -> int:
    """Total particle count of one species across all cells."""
    if not 0 <= isp < store.nsp:
        raise IndexError(f"species index {isp} out of range")
    return store.total(isp)


def stores_equal(a: CellSortedStore, b: CellSortedStore) -> bool:
    """Bitwise equality of live content (counts and per-particle fields)."""
    if a.nsp != b.nsp:
        return False
    for isp in range(a.nsp):
        if not np.array_equal(a.counts(isp), b.counts(isp)):
            return False
        if a.field_names(isp) != b.field_names(isp):
            return False
        ia, ib = a.live_indices(isp), b.live_indices(isp)
        for name in a.field_names(isp):
            va = a.data(isp)[name][ia].view(np.uint64)
            vb = b.data(isp)[name][ib].view(np.uint64)
            if not np.array_equal(va, vb):
                return False
    return True


def init_plasma(config) -> CellSortedStore:
    """Load a uniform plasma: ppc0 particles per cell per species.

    Positions are uniform in [0,1) within each cell; velocity components are
    Maxwellian with the configured temperature, converted to grid units
    (std = sqrt(k_B T / m) * dt / dx; temperatures in eV, so k_B T = T_ev e).
    Each (species, cell) pair draws from its own counter-based stream, which
    makes the result bitwise reproducible for a fixed seed regardless of how
    the work is later decomposed.
    """
    config.validate()
    grid = config.grid
    ppc0 = config.ppc0
    cap0 = max(int(math.ceil(config.slack * ppc0)), ppc0, 4)

    # Allocation guard, checked before touching memory.
    budget = config.max_store_mb * 1024 * 1024
    running = 0
    for sp in config.species:
        nfields = len(_BASE_FIELDS) + (1 if sp.track_transverse else 0)
        running += grid.nc * cap0 * nfields * 8 + grid.nc * 3 * 8
        if running > budget:
            raise InitError(
                f"species {sp.name!r}: initial allocation exceeds the "
                f"{config.max_store_mb} MB store cap"
            )

    store = CellSortedStore(grid, config.species, initial_cap=cap0)
    cells = np.arange(grid.nc, dtype=np.int64)
    slot = np.tile(np.arange(ppc0, dtype=np.int64), grid.nc)

    for isp, sp in enumerate(config.species):
        store.weights[isp] = config.densities_m3[isp] * grid.dx_m / ppc0
        key = stream(config.seed, STREAM_INIT, isp)
        cell_keys = derive_vec(np.uint64(key), cells)
        pkeys = np.repeat(cell_keys, ppc0)

        x = uniforms(pkeys, slot)
        # Two Box-Muller pairs per particle at counters ppc0 + 4*slot ... +3.
        # This is init-time-only shared NumPy code; hot paths avoid cos/sin/log.
        base = ppc0 + 4 * slot
        t_ev = config.temperatures_ev[isp]
        std = math.sqrt(t_ev * ELEMENTARY_CHARGE / sp.mass_kg) * (
            config.consts.dt_s / grid.dx_m
        )
        r1 = np.sqrt(-2.0 * np.log(uniforms_open(pkeys, base)))
        ang1 = (2.0 * math.pi) * uniforms(pkeys, base + 1)
        r2 = np.sqrt(-2.0 * np.log(uniforms_open(pkeys, base + 2)))
        ang2 = (2.0 * math.pi) * uniforms(pkeys, base + 3)
        vx = std * (r1 * np.cos(ang1))
        vy = std * (r1 * np.sin(ang1))
        vz = std * (r2 * np.cos(ang2))

        target = np.repeat(store.offsets(isp), ppc0) + slot
        data = store.data(isp)
        data["x"][target] = x
        data["vx"][target] = vx
        data["vy"][target] = vy
        data["vz"][target] = vz
        store.counts(isp)[:] = ppc0
    return store
