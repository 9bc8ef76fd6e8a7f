"""Domain types: grid and species invariants, store mechanics, plasma init."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picmc.constants import ELEMENTARY_CHARGE
from picmc.core import (
    CellSortedStore,
    Grid1D,
    PhysicalConstants,
    SpeciesDef,
    init_plasma,
    store_total,
    stores_equal,
)
from picmc.errors import ContractViolation, InitError

from conftest import bits_equal, make_config, uniform_store


# -- Grid1D / SpeciesDef / PhysicalConstants --------------------------------

def test_grid_invariants():
    g = Grid1D.from_cells(100, 1e-3)
    assert g.dx_m == pytest.approx(1e-5)
    with pytest.raises(ValueError):
        Grid1D.from_cells(1, 1.0)  # nc >= 2
    with pytest.raises(ValueError):
        Grid1D(nc=4, length_m=1.0, dx_m=0.3)  # dx*nc != length
    with pytest.raises(ValueError):
        Grid1D(nc=4, length_m=0.0, dx_m=0.0)


def test_species_invariants():
    sp = SpeciesDef("e", -ELEMENTARY_CHARGE, 9.109e-31)
    assert sp.charged and sp.nstep == 1 and sp.active_mover
    assert not SpeciesDef("n", 0.0, 1.0).charged
    with pytest.raises(ValueError):
        SpeciesDef("bad", 0.0, 0.0)
    with pytest.raises(ValueError):
        SpeciesDef("bad", 0.0, 1.0, nstep=0)
    with pytest.raises(ValueError):
        SpeciesDef("bad", 1.0, 1.0, charged=False)


def test_constants_positive():
    with pytest.raises(ValueError):
        PhysicalConstants(dt_s=0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(dt_s=1.0, epsilon0=-1.0)


# -- store mechanics ---------------------------------------------------------

def _empty_store(nc=4, cap=2, track=False):
    grid = Grid1D.from_cells(nc, float(nc))
    sp = SpeciesDef("s", 0.0, 1.0, track_transverse=track)
    return CellSortedStore(grid, [sp], initial_cap=cap)


def test_append_and_layout():
    store = _empty_store()
    slot = store.append(0, 1, {"x": 0.5, "vx": 1.0, "vy": 2.0, "vz": 3.0})
    assert slot == 0
    assert store.total(0) == 1
    base = store.offsets(0)[1]
    assert store.data(0)["x"][base] == 0.5
    assert store.data(0)["vz"][base] == 3.0
    # offsets are the prefix sums of capacities
    assert list(store.offsets(0)) == [0, 2, 4, 6]


def test_append_grows_capacity_by_doubling():
    store = _empty_store(cap=2)
    for k in range(5):
        store.append(0, 0, {"x": 0.1 * k, "vx": float(k)})
    assert store.counts(0)[0] == 5
    assert store.caps(0)[0] == 8  # 2 -> 4 -> 8
    assert store.caps(0)[1] == 2  # other cells untouched
    # content preserved across the rebuild, slot order intact
    sl = store.cell_slice(0, 0)
    assert list(store.data(0)["vx"][sl]) == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_free_space_stays_zeroed():
    store = _empty_store(cap=4)
    store.append(0, 2, {"x": 0.25, "vx": -1.0})
    store.append(0, 2, {"x": 0.75, "vx": +1.0})
    store.swap_remove(0, 2, 0)
    for name, arr in store.data(0).items():
        live = store.live_indices(0)
        dead = np.setdiff1d(np.arange(arr.size), live)
        assert np.all(arr[dead] == 0.0), name


def test_swap_remove_fills_hole_from_end():
    store = _empty_store(cap=4)
    for k in range(3):
        store.append(0, 1, {"x": 0.1 + 0.2 * k, "vx": float(k)})
    rec = store.swap_remove(0, 1, 0)
    assert rec["vx"] == 0.0
    sl = store.cell_slice(0, 1)
    # slot 0 now holds what was in slot 2; slot 1 unchanged
    assert list(store.data(0)["vx"][sl]) == [2.0, 1.0]
    with pytest.raises(IndexError):
        store.swap_remove(0, 1, 5)


def test_reserve_avoids_reallocation():
    store = _empty_store(cap=2)
    store.reserve(0, 3, 7)
    caps_before = store.caps(0).copy()
    data_before = store.data(0)["x"]
    for k in range(7):
        store.append(0, 3, {"x": 0.1, "vx": 0.0})
    assert np.array_equal(store.caps(0), caps_before)
    assert store.data(0)["x"] is data_before  # no rebuild happened


@settings(max_examples=50)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=9))
def test_live_indices_match_bruteforce(counts):
    grid = Grid1D.from_cells(len(counts), float(len(counts)))
    store = CellSortedStore(grid, [SpeciesDef("s", 0.0, 1.0)], initial_cap=6)
    store.counts(0)[:] = counts
    expect_idx, expect_cell = [], []
    for j, n in enumerate(counts):
        for s in range(n):
            expect_idx.append(store.offsets(0)[j] + s)
            expect_cell.append(j)
    assert list(store.live_indices(0)) == expect_idx
    assert list(store.cell_of_live(0)) == expect_cell


def test_live_indices_range_selection():
    store = uniform_store(nc=6, ppc=2)
    idx = store.live_indices(0, 2, 5)
    assert list(store.cell_of_live(0, 2, 5)) == [2, 2, 3, 3, 4, 4]
    assert idx.size == 6


def test_check_sorted_raises_on_out_of_range():
    store = uniform_store(nc=4, ppc=1)
    store.data(0)["x"][store.live_indices(0)[0]] = 1.5
    with pytest.raises(ContractViolation, match="resort"):
        store.check_sorted(0)


def test_clone_is_independent_and_equal():
    store = uniform_store(nc=5, ppc=3)
    other = store.clone()
    assert stores_equal(store, other)
    other.data(0)["vx"][other.live_indices(0)[0]] += 1.0
    assert not stores_equal(store, other)


def test_store_total_bounds():
    store = uniform_store(nc=3, ppc=2)
    assert store_total(store, 0) == 6
    with pytest.raises(IndexError):
        store_total(store, 1)


# -- init_plasma -------------------------------------------------------------

def test_init_populates_every_cell():
    cfg = make_config(nc=16, ppc0=5)
    store = init_plasma(cfg)
    for isp in range(store.nsp):
        assert np.all(store.counts(isp) == 5)
        x = store.data(isp)["x"][store.live_indices(isp)]
        assert np.all((x >= 0.0) & (x < 1.0))


def test_init_weights_follow_density():
    cfg = make_config(nc=8, ppc0=4, densities_m3=[2e21, 1e21, 5e20])
    store = init_plasma(cfg)
    for isp, den in enumerate(cfg.densities_m3):
        assert store.weights[isp] == pytest.approx(den * cfg.grid.dx_m / 4)


def test_init_zero_temperature_gives_exact_zero_velocities():
    cfg = make_config(nc=8, ppc0=3, temperatures_ev=[0.0, 0.0, 0.0])
    store = init_plasma(cfg)
    for isp in range(store.nsp):
        data = store.data(isp)
        idx = store.live_indices(isp)
        for name in ("vx", "vy", "vz"):
            assert np.all(data[name][idx] == 0.0)


def test_init_is_bitwise_reproducible():
    a = init_plasma(make_config(nc=12, ppc0=4, seed=99))
    b = init_plasma(make_config(nc=12, ppc0=4, seed=99))
    assert stores_equal(a, b)
    c = init_plasma(make_config(nc=12, ppc0=4, seed=100))
    assert not stores_equal(a, c)


def test_init_transverse_field_only_when_tracked():
    cfg = make_config()
    store = init_plasma(cfg)
    assert "yp" not in store.field_names(0)  # electrons
    assert "yp" in store.field_names(2)      # tracked neutrals
    idx = store.live_indices(2)
    assert np.all(store.data(2)["yp"][idx] == 0.0)


def test_init_memory_budget_enforced():
    cfg = make_config(nc=64, ppc0=64)
    cfg.max_store_mb = 0
    with pytest.raises(InitError, match="store cap"):
        init_plasma(cfg)


def test_init_velocity_second_moment():
    """mean(vx^2) over 1e6 particles matches k_B T / m in grid units to 1%."""
    sp = [SpeciesDef("e", -ELEMENTARY_CHARGE, 9.1093837015e-31)]
    cfg = make_config(nc=2000, ppc0=500, species=sp, temperatures_ev=[20.0],
                      densities_m3=[1e21])
    store = init_plasma(cfg)
    idx = store.live_indices(0)
    assert idx.size == 1_000_000
    std = math.sqrt(20.0 * ELEMENTARY_CHARGE / sp[0].mass_kg) * (
        cfg.consts.dt_s / cfg.grid.dx_m
    )
    for name in ("vx", "vy", "vz"):
        v = store.data(0)[name][idx]
        assert np.mean(v * v) == pytest.approx(std * std, rel=0.01)
        # mean velocity ~ 0 within 5 sigma of the standard error
        assert abs(np.mean(v)) < 5.0 * std / math.sqrt(v.size)


def test_init_positions_uniform_within_cell():
    cfg = make_config(nc=200, ppc0=50)
    store = init_plasma(cfg)
    x = store.data(0)["x"][store.live_indices(0)]
    assert abs(np.mean(x) - 0.5) < 5.0 / math.sqrt(12.0 * x.size)


def test_stores_equal_detects_sign_of_zero():
    a = uniform_store(nc=3, ppc=1)
    b = a.clone()
    i = a.live_indices(0)[0]
    a.data(0)["vx"][i] = 0.0
    b.data(0)["vx"][i] = -0.0
    assert not stores_equal(a, b)
    assert not bits_equal(a.data(0)["vx"], b.data(0)["vx"])
