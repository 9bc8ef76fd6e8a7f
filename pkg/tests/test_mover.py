"""Push kernels, resort mechanics and move-phase task submission."""

import numpy as np
import pytest

from picmc.constants import ELEMENTARY_CHARGE, ELECTRON_MASS
from picmc.core import PhysicalConstants, SpeciesDef, stores_equal
from picmc.errors import CflViolation, ContractViolation
from picmc.fields import gather_field
from picmc.mover import (
    Movers,
    accel_nodes_for_species,
    commit_incomers,
    mover_phase,
    push_position,
    push_velocity,
    resort,
    resort_collect,
    submit_move_tasks,
    velocity_kick_coef,
)
from picmc.scheduler import Scheduler

from conftest import bits_equal, uniform_store

CONSTS = PhysicalConstants(dt_s=2e-12)
ELECTRON = SpeciesDef("e", -ELEMENTARY_CHARGE, ELECTRON_MASS)


def _electron_store(nc=12, ppc=5, seed=21):
    return uniform_store(nc=nc, ppc=ppc, species=[ELECTRON], seed=seed)


def test_velocity_kick_coef_formula():
    dx = 1e-5
    coef = velocity_kick_coef(ELECTRON, CONSTS, dx)
    q, m, dt = -ELEMENTARY_CHARGE, ELECTRON_MASS, CONSTS.dt_s
    assert coef == q * dt * dt / (m * dx)


def test_push_velocity_uniform_field_matches_fused_bitwise():
    a = _electron_store(seed=31)
    b = a.clone()
    e_field = np.full(a.grid.nc + 1, -250.0)

    e_p = gather_field(e_field, a, a.grid)
    push_velocity(a, 0, e_p[0], CONSTS)
    push_position(a, 0)

    accel = accel_nodes_for_species(b, e_field, CONSTS)
    with Scheduler(workers=1) as sched:
        mover_phase(b, e_field, CONSTS, sched, grainsize=b.grid.nc)
    assert stores_equal(a, b)
    assert accel[0] is not None


def test_push_composition_matches_fused_closely():
    """Separable gather/kick/push tracks the fused kernel to rounding.

    The fused kernel premultiplies the node field by the kick coefficient, so
    on a non-uniform field the two paths differ only in rounding.
    """
    a = _electron_store(seed=32)
    b = a.clone()
    rng = np.random.default_rng(7)
    e_field = 300.0 * rng.standard_normal(a.grid.nc + 1)

    e_p = gather_field(e_field, a, a.grid)
    push_velocity(a, 0, e_p[0], CONSTS)
    push_position(a, 0)
    with Scheduler(workers=1) as sched:
        mover_phase(b, e_field, CONSTS, sched, grainsize=4)

    for name in ("x", "vx"):
        np.testing.assert_allclose(
            a.data(0)[name], b.data(0)[name], rtol=1e-13, atol=1e-18
        )


def test_push_velocity_rejects_neutrals_and_bad_length():
    store = uniform_store(nc=4, ppc=2)  # neutral species
    with pytest.raises(ContractViolation, match="neutral"):
        push_velocity(store, 0, np.zeros(8), CONSTS)
    est = _electron_store(nc=4, ppc=2)
    with pytest.raises(ContractViolation, match="length"):
        push_velocity(est, 0, np.zeros(3), CONSTS)


def test_push_position_nstep_and_transverse():
    sp = SpeciesDef("n", 0.0, 1.0, nstep=3, track_transverse=True)
    store = uniform_store(nc=4, ppc=0, species=[sp])
    store.append(0, 1, {"x": 0.5, "vx": 0.0625, "vy": 2.0, "yp": 1.0})
    push_position(store, 0)
    sl = store.cell_slice(0, 1)
    assert store.data(0)["x"][sl][0] == 0.5 + 3 * 0.0625
    assert store.data(0)["yp"][sl][0] == 1.0 + 3 * 2.0
    assert store.data(0)["vx"][sl][0] == 0.0625  # no kick without a field


# -- resort ------------------------------------------------------------------

def _place(store, cell, x, vx=0.0):
    return store.append(0, cell, {"x": x, "vx": vx})


def test_resort_moves_to_left_neighbor_exact():
    store = uniform_store(nc=8, ppc=0)
    _place(store, 3, -0.25, vx=1.5)
    assert resort(store) == 1
    sl = store.cell_slice(0, 2)
    assert store.data(0)["x"][sl][0] == 0.75
    assert store.data(0)["vx"][sl][0] == 1.5
    assert store.counts(0)[3] == 0


def test_resort_periodic_wrap_both_ends():
    store = uniform_store(nc=8, ppc=0)
    _place(store, 0, -0.25)
    _place(store, 7, 1.25)
    resort(store)
    assert store.counts(0)[7] == 1 and store.counts(0)[0] == 1
    assert store.data(0)["x"][store.cell_slice(0, 7)][0] == 0.75
    assert store.data(0)["x"][store.cell_slice(0, 0)][0] == 0.25


def test_resort_non_dyadic_offset():
    store = uniform_store(nc=100, ppc=0)
    _place(store, 0, -0.3)
    resort(store)
    assert store.counts(0)[99] == 1
    x = store.data(0)["x"][store.cell_slice(0, 99)][0]
    assert x == pytest.approx(0.7, rel=1e-15)
    assert 0.0 <= x < 1.0


def test_resort_multi_cell_jump_and_integer_landing():
    store = uniform_store(nc=8, ppc=0)
    _place(store, 1, 2.0)
    _place(store, 2, 3.5)
    resort(store)
    assert store.data(0)["x"][store.cell_slice(0, 3)][0] == 0.0
    assert store.data(0)["x"][store.cell_slice(0, 5)][0] == 0.5


def test_resort_tiny_negative_carries_back():
    """x - floor(x) rounds to 1.0 for x = -1e-18; the carry lands it at the
    origin of its own cell rather than leaving x == 1.0 in the neighbor."""
    store = uniform_store(nc=8, ppc=0)
    _place(store, 4, -1e-18)
    resort(store)
    assert store.counts(0)[4] == 1
    assert store.data(0)["x"][store.cell_slice(0, 4)][0] == 0.0
    store.check_sorted(0)


def test_resort_rejects_domain_scale_jump():
    store = uniform_store(nc=8, ppc=0)
    _place(store, 0, 8.5)
    with pytest.raises(CflViolation, match="whole domain"):
        resort(store)


def test_resort_is_noop_on_sorted_store():
    store = uniform_store(nc=6, ppc=4, seed=3)
    before = store.clone()
    assert resort(store) == 0
    assert stores_equal(store, before)


def test_resort_conserves_totals_and_velocities():
    store = uniform_store(nc=16, ppc=6, seed=42, v_scale=1.7)
    total0 = store.total(0)
    vx0 = np.sort(store.data(0)["vx"][store.live_indices(0)])
    pos0 = np.sort(
        (store.cell_of_live(0) + store.data(0)["x"][store.live_indices(0)])
    )
    push_position(store, 0)
    glob = store.cell_of_live(0) + store.data(0)["x"][store.live_indices(0)]
    pos_expect = np.sort(glob % store.grid.nc)
    moved = resort(store)
    assert moved > 0
    assert store.total(0) == total0
    store.check_sorted(0)
    assert bits_equal(np.sort(store.data(0)["vx"][store.live_indices(0)]), vx0)
    pos1 = np.sort(
        store.cell_of_live(0) + store.data(0)["x"][store.live_indices(0)]
    )
    np.testing.assert_allclose(pos1, pos_expect, rtol=0.0, atol=1e-12)
    assert not np.array_equal(pos1, pos0)  # particles actually moved


def test_resort_collect_orders_by_source():
    store = uniform_store(nc=10, ppc=4, seed=17, v_scale=2.5)
    push_position(store, 0)
    movers = resort_collect(store)[0]
    assert movers.count > 3
    src = movers.src_cell
    assert np.all(np.diff(src) >= 0)
    same = np.diff(src) == 0
    assert np.all(np.diff(movers.src_slot)[same] > 0)


def test_commit_incomers_order_canonical():
    """Committing a row-permuted Movers gives the identical store."""
    a = uniform_store(nc=32, ppc=4, seed=23, v_scale=2.5)
    push_position(a, 0)
    b = a.clone()
    ma = resort_collect(a)[0]
    mb = resort_collect(b)[0]
    perm = np.random.default_rng(0).permutation(mb.count)
    shuffled = Movers(
        mb.isp,
        mb.dest_cell[perm],
        mb.src_cell[perm],
        mb.src_slot[perm],
        {n: v[perm] for n, v in mb.fields.items()},
    )
    commit_incomers(a, ma)
    commit_incomers(b, shuffled)
    assert stores_equal(a, b)


def test_movers_empty_and_concat():
    e = Movers.empty(0, ("x", "vx", "vy", "vz"))
    assert e.count == 0
    one = Movers(
        0,
        np.array([2], dtype=np.int64),
        np.array([1], dtype=np.int64),
        np.array([0], dtype=np.int64),
        {"x": np.array([0.5]), "vx": np.array([1.0]),
         "vy": np.array([0.0]), "vz": np.array([0.0])},
    )
    cat = Movers.concat([e, one, one])
    assert cat.count == 2
    assert list(cat.dest_cell) == [2, 2]
    assert list(cat.fields["x"]) == [0.5, 0.5]


def test_negative_zero_velocity_survives_neutral_push():
    """Neutral species skip the kick; adding 0.0 would flip -0.0 to +0.0."""
    store = uniform_store(nc=4, ppc=0)
    _place(store, 1, 0.5, vx=-0.0)
    push_position(store, 0)
    vx = store.data(0)["vx"][store.cell_slice(0, 1)][0]
    assert vx == 0.0 and np.signbit(vx)


def test_accel_nodes_skip_uncharged_and_inactive():
    frozen = SpeciesDef("f", ELEMENTARY_CHARGE, 1.0, active_mover=False)
    neutral = SpeciesDef("n", 0.0, 1.0)
    store = uniform_store(nc=4, ppc=1, species=[ELECTRON, frozen, neutral])
    e_field = np.ones(5)
    accel = accel_nodes_for_species(store, e_field, CONSTS)
    assert accel[0] is not None and accel[1] is None and accel[2] is None
    coef = velocity_kick_coef(ELECTRON, CONSTS, store.grid.dx_m)
    assert bits_equal(accel[0], coef * e_field)


def test_submit_move_tasks_queues_and_tags():
    frozen = SpeciesDef("hold", 0.0, 1.0, active_mover=False)
    species = [
        SpeciesDef("a", -ELEMENTARY_CHARGE, ELECTRON_MASS),
        SpeciesDef("b", 0.0, 1.0),
        frozen,
        SpeciesDef("d", 0.0, 2.0),
        SpeciesDef("e2", 0.0, 3.0),
    ]
    store = uniform_store(nc=10, ppc=2, species=species, seed=5)
    before = store.data(2)["x"].copy()
    accel = accel_nodes_for_species(store, np.zeros(11), CONSTS)
    with Scheduler(workers=2) as sched:
        queues = submit_move_tasks(sched, store, accel, grainsize=100,
                                   queue_offset=3)
        sched.wait(sorted(queues))
        events = [ev for ev in sched.trace() if ev.tag.startswith("move:")]
    # grainsize >= nc: exactly one task per active species
    assert sorted(ev.tag for ev in events) == [
        "move:a", "move:b", "move:d", "move:e2"
    ]
    assert queues == {3 + 0, 3 + 1, 3 + 3, 3 + 0 % 4}
    by_tag = {ev.tag: ev.queue for ev in events}
    assert by_tag["move:a"] == 3 and by_tag["move:b"] == 4
    assert by_tag["move:d"] == 6 and by_tag["move:e2"] == 3 + (4 % 4)
    # inactive species untouched
    assert bits_equal(store.data(2)["x"], before)


def test_mover_phase_parallel_matches_serial_bitwise():
    species = [ELECTRON, SpeciesDef("D", 0.0, 1.0, track_transverse=True)]
    a = uniform_store(nc=13, ppc=7, species=species, seed=9)
    b = a.clone()
    rng = np.random.default_rng(2)
    e_field = 1e2 * rng.standard_normal(14)
    with Scheduler(workers=1) as s1:
        mover_phase(a, e_field, CONSTS, s1, grainsize=13)
    with Scheduler(workers=4) as s4:
        mover_phase(b, e_field, CONSTS, s4, grainsize=3)
    assert stores_equal(a, b)
