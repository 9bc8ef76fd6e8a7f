"""Shared builders: reference configs and randomized particle stores."""

import numpy as np

from picmc.collisions import CollisionRates
from picmc.config import CollisionSetup, RunConfig
from picmc.constants import DEUTERIUM_MASS, ELECTRON_MASS, ELEMENTARY_CHARGE
from picmc.core import CellSortedStore, Grid1D, PhysicalConstants, SpeciesDef


def table_species():
    """Three-species reference setup: electrons, ions, tracked neutrals."""
    return [
        SpeciesDef("e", -ELEMENTARY_CHARGE, ELECTRON_MASS),
        SpeciesDef("D+", ELEMENTARY_CHARGE, DEUTERIUM_MASS - ELECTRON_MASS),
        SpeciesDef("D", 0.0, DEUTERIUM_MASS, track_transverse=True),
    ]


def table_collisions(rate_elastic=2.5e-11, rate_excitation=2.5e-12,
                     rate_ionization=2.5e-11, threshold_ev=10.2):
    """Rates sized so n*R_ion*dt = 1e-3 at 1e21 m^-3 and dt = 4e-14 s."""
    return CollisionSetup(
        enabled=True, electron="e", neutral="D", ion="D+",
        rates=CollisionRates(
            rate_elastic_m3s=rate_elastic,
            rate_excitation_m3s=rate_excitation,
            rate_ionization_m3s=rate_ionization,
            excitation_threshold_ev=threshold_ev,
        ),
    )


def make_config(nc=64, ppc0=4, n_steps=10, seed=20260819, species=None,
                temperatures_ev=None, densities_m3=None, dx_m=1e-5,
                dt_s=4e-14, worker_count=1, grainsize=16,
                layout="cell_sorted", boundary="periodic", field_solve=False,
                smoothing_passes=0, collisions=None, out_dir=None, slack=1.5):
    if species is None:
        species = table_species()
    if temperatures_ev is None:
        temperatures_ev = [20.0, 20.0, 1.0][: len(species)]
    if densities_m3 is None:
        densities_m3 = [1e21] * len(species)
    cfg = RunConfig(
        grid=Grid1D.from_cells(nc, nc * dx_m),
        consts=PhysicalConstants(dt_s=dt_s),
        species=species,
        temperatures_ev=list(temperatures_ev),
        densities_m3=list(densities_m3),
        ppc0=ppc0,
        n_steps=n_steps,
        seed=seed,
        worker_count=worker_count,
        grainsize=grainsize,
        layout=layout,
        boundary=boundary,
        field_solve=field_solve,
        smoothing_passes=smoothing_passes,
        slack=slack,
        collisions=collisions,
        out_dir=out_dir,
    )
    cfg.validate()
    return cfg


def uniform_store(nc=8, ppc=3, species=None, dx_m=1.0, seed=1, v_scale=0.25):
    """Store with ppc particles per cell and reproducible random content.

    Velocities are in grid units (cells per step), so v_scale bounds the
    per-step displacement.
    """
    if species is None:
        species = [SpeciesDef("s", 0.0, 1.0)]
    grid = Grid1D.from_cells(nc, nc * dx_m)
    store = CellSortedStore(grid, species, initial_cap=max(2 * ppc, 4))
    rng = np.random.default_rng(seed)
    for isp in range(store.nsp):
        store.counts(isp)[:] = ppc
        idx = store.live_indices(isp)
        data = store.data(isp)
        data["x"][idx] = rng.random(idx.size)
        for name in ("vx", "vy", "vz"):
            data[name][idx] = v_scale * rng.standard_normal(idx.size)
        if "yp" in data:
            data["yp"][idx] = rng.standard_normal(idx.size)
    return store


def bits_equal(a, b) -> bool:
    """Bitwise float comparison: distinguishes -0.0 and rejects NaN."""
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    b = np.ascontiguousarray(np.asarray(b, dtype=np.float64))
    return a.shape == b.shape and np.array_equal(
        a.view(np.uint64), b.view(np.uint64)
    )
