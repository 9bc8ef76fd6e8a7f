"""Monte Carlo electron-neutral collisions: elastic, excitation, ionization.

Constant rate coefficients stand in for energy-dependent cross sections; the
verification target (exponential neutral depletion) depends only on the
ionization coefficient. Per electron and substep, one uniform draw is
partitioned across [0,P_el), [P_el,P_el+P_ex), [..,+P_ion), remainder no
collision, with P_k = 1 - exp(-n R_k dt). A step-split guard halves dt (2^k
substeps, thresholds refrozen from live neutral counts) until the summed
probability is below 0.1, keeping the partition valid.

Determinism: every (cell, step, substep) owns a private counter-based stream;
selection draws are indexed by electron slot and each event draws partner and
scatter directions from its own substream, so one cell's rejection loops can
never shift another's numbers. Newborn electrons and ions are buffered and
committed after the (possibly parallel) selection passes, in ascending cell
and event order: they do not collide in the step they are born, and array
growth never races with in-place cell updates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import ELEMENTARY_CHARGE
from .core import CellSortedStore, PhysicalConstants
from .rng import STREAM_COLLIDE, derive, derive_vec, stream, uniform, uniforms

__all__ = [
    "CollisionRates",
    "CollisionTally",
    "Roles",
    "collide_block",
    "collide_cell",
    "collision_phase",
    "commit_pending",
]

# Substream purposes within one event.
_PARTNER = 0
_DIR_SCATTER = 1
_DIR_EJECTED = 2

_GUARD = 0.1  # summed per-substep probability must stay below this


@dataclass(frozen=True)
class CollisionRates:
    """Constant rate coefficients (m^3/s) and the excitation energy cost."""

    rate_elastic_m3s: float = 0.0
    rate_excitation_m3s: float = 0.0
    rate_ionization_m3s: float = 0.0
    excitation_threshold_ev: float = 0.0

    def __post_init__(self):
        for name in (
            "rate_elastic_m3s",
            "rate_excitation_m3s",
            "rate_ionization_m3s",
            "excitation_threshold_ev",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class CollisionTally:
    elastic: int = 0
    excitation: int = 0
    ionization: int = 0
    suppressed: int = 0

    def merge(self, other: "CollisionTally"):
        self.elastic += other.elastic
        self.excitation += other.excitation
        self.ionization += other.ionization
        self.suppressed += other.suppressed

    def total_events(self) -> int:
        return self.elastic + self.excitation + self.ionization


@dataclass(frozen=True)
class Roles:
    """Species indices playing the electron / neutral target / ion product."""

    electron: int
    neutral: int
    ion: int


def step_stream_key(seed: int, step: int) -> int:
    return stream(seed, STREAM_COLLIDE, step)


def _unit_vector(dir_key: int):
    """Isotropic unit vector by rejection (sqrt only, no trig)."""
    t = 0
    while True:
        u = 2.0 * uniform(dir_key, 2 * t) - 1.0
        v = 2.0 * uniform(dir_key, 2 * t + 1) - 1.0
        s = u * u + v * v
        if s < 1.0:
            break
        t += 1
    factor = 2.0 * math.sqrt(1.0 - s)
    return u * factor, v * factor, 1.0 - 2.0 * s


def _apply_event(
    store: CellSortedStore,
    roles: Roles,
    rates: CollisionRates,
    consts: PhysicalConstants,
    j: int,
    slot: int,
    kind: int,
    ev_key: int,
    pending: list,
    tally: CollisionTally,
):
    """Apply one selected process to electron (j, slot); cell-local."""
    isp_e = roles.electron
    data_e = store.data(isp_e)
    base = int(store.offsets(isp_e)[j])
    i = base + slot
    sp_e = store.species[isp_e]
    dx_over_dt = store.grid.dx_m / consts.dt_s

    vx, vy, vz = data_e["vx"][i], data_e["vy"][i], data_e["vz"][i]
    speed = math.sqrt(vx * vx + vy * vy + vz * vz)

    if kind == 1:  # elastic: new direction, same speed
        ux, uy, uz = _unit_vector(derive(ev_key, _DIR_SCATTER))
        data_e["vx"][i] = speed * ux
        data_e["vy"][i] = speed * uy
        data_e["vz"][i] = speed * uz
        tally.elastic += 1
        return

    if kind == 2:  # excitation: threshold removed (floor 0), re-randomized
        v_si = speed * dx_over_dt
        ke = 0.5 * sp_e.mass_kg * v_si * v_si
        ke = max(ke - rates.excitation_threshold_ev * ELEMENTARY_CHARGE, 0.0)
        new_speed = math.sqrt(2.0 * ke / sp_e.mass_kg) / dx_over_dt
        ux, uy, uz = _unit_vector(derive(ev_key, _DIR_SCATTER))
        data_e["vx"][i] = new_speed * ux
        data_e["vy"][i] = new_speed * uy
        data_e["vz"][i] = new_speed * uz
        tally.excitation += 1
        return

    # kind == 3: ionization. Convert one neutral to an ion (velocity
    # inherited) and split the incident kinetic energy equally between the
    # incident and the ejected electron, isotropic directions.
    nn = int(store.counts(roles.neutral)[j])
    if nn == 0:
        tally.suppressed += 1
        return
    pick = int(uniform(derive(ev_key, _PARTNER), 0) * nn)
    if pick >= nn:
        pick = nn - 1
    neutral = store.swap_remove(roles.neutral, j, pick)

    v_si = speed * dx_over_dt
    ke_half = 0.25 * sp_e.mass_kg * v_si * v_si  # half of 0.5 m v^2
    share_speed = math.sqrt(2.0 * ke_half / sp_e.mass_kg) / dx_over_dt

    ux, uy, uz = _unit_vector(derive(ev_key, _DIR_SCATTER))
    data_e["vx"][i] = share_speed * ux
    data_e["vy"][i] = share_speed * uy
    data_e["vz"][i] = share_speed * uz

    ion_rec = {"x": neutral["x"], "vx": neutral["vx"], "vy": neutral["vy"], "vz": neutral["vz"]}
    if "yp" in store.field_names(roles.ion):
        ion_rec["yp"] = neutral.get("yp", 0.0)
    pending.append((j, roles.ion, ion_rec))

    ex, ey, ez = _unit_vector(derive(ev_key, _DIR_EJECTED))
    e_rec = {
        "x": float(data_e["x"][i]),
        "vx": share_speed * ex,
        "vy": share_speed * ey,
        "vz": share_speed * ez,
    }
    if "yp" in store.field_names(isp_e):
        e_rec["yp"] = float(data_e["yp"][i])
    pending.append((j, isp_e, e_rec))
    tally.ionization += 1


def _probabilities(rates: CollisionRates, n_den, dt: float):
    p_el = -np.expm1(-(n_den * rates.rate_elastic_m3s) * dt)
    p_ex = -np.expm1(-(n_den * rates.rate_excitation_m3s) * dt)
    p_io = -np.expm1(-(n_den * rates.rate_ionization_m3s) * dt)
    return p_el, p_ex, p_io


def _select_and_apply(
    store, roles, rates, consts, j, sub_key, p_el, p_ex, p_io, pending, tally
):
    """One selection pass over cell j's electrons at frozen thresholds."""
    ne = int(store.counts(roles.electron)[j])
    if ne == 0:
        return
    sel_key = derive(sub_key, 0)
    ev_base = derive(sub_key, 1)
    u = uniforms(np.uint64(sel_key), np.arange(ne, dtype=np.int64))
    t1 = p_el
    t2 = p_el + p_ex
    t3 = t2 + p_io
    for slot in np.nonzero(u < t3)[0]:
        us = u[slot]
        kind = 1 if us < t1 else (2 if us < t2 else 3)
        _apply_event(
            store, roles, rates, consts, j, int(slot), kind,
            derive(ev_base, int(slot)), pending, tally,
        )


def collide_block(
    store: CellSortedStore,
    rates: CollisionRates,
    consts: PhysicalConstants,
    roles: Roles,
    step_key: int,
    lo: int,
    hi: int,
    global_offset: int = 0,
):
    """Collision pass over local cells [lo, hi); returns (tally, pending).

    Pending newborns (ascending cell, event order) must be committed with
    commit_pending after all blocks of the store have run. Only cell-local
    in-place state is touched here, so disjoint blocks may run concurrently.
    """
    tally = CollisionTally()
    pending = []
    isp_n = roles.neutral
    dt = consts.dt_s
    w_over_dx = store.weights[isp_n] / store.grid.dx_m
    counts_e = store.counts(roles.electron)
    counts_n = store.counts(isp_n)

    cells = np.arange(lo, hi, dtype=np.int64)
    cell_keys = derive_vec(
        np.uint64(step_key), (cells + global_offset).astype(np.uint64)
    )

    n_den = counts_n[lo:hi] * w_over_dx
    p_el, p_ex, p_io = _probabilities(rates, n_den, dt)
    sum3 = p_el + p_ex + p_io

    for k in range(hi - lo):
        j = lo + k
        if counts_e[j] == 0:
            continue
        if sum3[k] < _GUARD:
            sub_key = derive(int(cell_keys[k]), 0)
            _select_and_apply(
                store, roles, rates, consts, j, sub_key,
                float(p_el[k]), float(p_ex[k]), float(p_io[k]), pending, tally,
            )
            continue
        # Guard: halve dt until the summed probability is small enough,
        # then run 2^m substeps with thresholds refrozen from live counts.
        m = 0
        while True:
            m += 1
            dt_sub = dt / float(2**m)
            nd = float(counts_n[j]) * w_over_dx
            pe, px, pi = _probabilities(rates, nd, dt_sub)
            if float(pe + px + pi) < _GUARD:
                break
        for s in range(2**m):
            nd = float(counts_n[j]) * w_over_dx
            pe, px, pi = _probabilities(rates, nd, dt / float(2**m))
            _select_and_apply(
                store, roles, rates, consts, j, derive(int(cell_keys[k]), s),
                float(pe), float(px), float(pi), pending, tally,
            )
    return tally, pending


def commit_pending(store: CellSortedStore, pending: list):
    """Insert buffered newborns (already in ascending cell, event order)."""
    for j, isp, rec in pending:
        store.append(isp, j, rec)


def collide_cell(
    j: int,
    store: CellSortedStore,
    rates: CollisionRates,
    consts: PhysicalConstants,
    step_key: int,
    roles: Roles,
    global_offset: int = 0,
) -> CollisionTally:
    """Standalone single-cell collision pass (commits its newborns)."""
    tally, pending = collide_block(
        store, rates, consts, roles, step_key, j, j + 1, global_offset
    )
    commit_pending(store, pending)
    return tally


def collision_phase(
    store: CellSortedStore,
    rates: CollisionRates,
    consts: PhysicalConstants,
    roles: Roles,
    step_key: int,
    scheduler=None,
    grainsize: int = 64,
    global_offset: int = 0,
) -> CollisionTally:
    """Collisions over all cells, parallelized over cell blocks.

    Deterministic for a fixed seed regardless of worker count: each cell
    draws only from its own stream and newborn commits are replayed in
    ascending cell, event order.
    """
    nc = store.grid.nc
    blocks = [(blo, min(blo + grainsize, nc)) for blo in range(0, nc, grainsize)]
    results = [None] * len(blocks)

    if scheduler is None or len(blocks) == 1:
        for b, (blo, bhi) in enumerate(blocks):
            results[b] = collide_block(
                store, rates, consts, roles, step_key, blo, bhi, global_offset
            )
    else:
        handles = []
        for b, (blo, bhi) in enumerate(blocks):

            def body(b=b, blo=blo, bhi=bhi):
                results[b] = collide_block(
                    store, rates, consts, roles, step_key, blo, bhi, global_offset
                )

            handles.append(scheduler.submit_work(body, queue=0, tag="collide"))
        scheduler.wait([0])

    tally = CollisionTally()
    for b in range(len(blocks)):
        t, pending = results[b]
        tally.merge(t)
        commit_pending(store, pending)
    return tally
