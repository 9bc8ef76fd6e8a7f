"""Compiled and pure kernels must be interchangeable bit for bit."""

import numpy as np
import pytest

from picmc import backends

from conftest import bits_equal

pure = backends.load_backend("pure")
try:
    compiled = backends.load_backend("compiled")
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(
    compiled is None, reason="compiled extension not built"
)


def _packed(seed, nc=13, cap=7):
    """Packed arrays with per-cell free space, as the store lays them out."""
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, cap + 1, size=nc).astype(np.int64)
    caps = np.full(nc, cap, dtype=np.int64)
    offs = np.concatenate(([0], np.cumsum(caps[:-1]))).astype(np.int64)
    total = int(caps.sum())
    x = np.zeros(total)
    vx = np.zeros(total)
    vy = np.zeros(total)
    yp = np.zeros(total)
    for j in range(nc):
        n = counts[j]
        sl = slice(offs[j], offs[j] + n)
        x[sl] = rng.random(n)
        vx[sl] = rng.standard_normal(n) * 0.3
        vy[sl] = rng.standard_normal(n) * 0.3
        yp[sl] = rng.standard_normal(n)
    return x, vx, vy, yp, offs, counts


def test_backend_selector():
    assert backends.BACKEND in ("pure", "compiled")
    with pytest.raises(ValueError):
        backends.load_backend("nope")


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_deposit_partials_bitwise(seed):
    x, _, _, _, offs, counts = _packed(seed)
    lp, rp = pure.deposit_partials(x, offs, counts)
    lc, rc = compiled.deposit_partials(x, offs, counts)
    assert bits_equal(lp, lc) and bits_equal(rp, rc)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_gather_bitwise(seed):
    x, _, _, _, offs, counts = _packed(seed)
    nodes = np.random.default_rng(100 + seed).standard_normal(len(counts) + 1)
    assert bits_equal(
        pure.gather(nodes, x, offs, counts),
        compiled.gather(nodes, x, offs, counts),
    )


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("with_accel", [True, False])
@pytest.mark.parametrize("with_yp", [True, False])
def test_fused_move_bitwise(seed, with_accel, with_yp):
    x, vx, vy, yp, offs, counts = _packed(seed)
    accel = (
        np.random.default_rng(200 + seed).standard_normal(len(counts) + 1) * 0.1
        if with_accel else None
    )
    args_p = [x.copy(), vx.copy(), vy.copy(), yp.copy() if with_yp else None]
    args_c = [x.copy(), vx.copy(), vy.copy(), yp.copy() if with_yp else None]
    pure.fused_move(accel, *args_p, offs, counts, 2.0)
    compiled.fused_move(accel, *args_c, offs, counts, 2.0)
    for a, b in zip(args_p, args_c):
        if a is not None:
            assert bits_equal(a, b)


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("has_accel,has_yp", [(True, True), (True, False),
                                              (False, True)])
def test_fused_move_table_bitwise(seed, has_accel, has_yp):
    rng = np.random.default_rng(seed)
    nf = 5 if has_yp else 4
    tab = rng.standard_normal((17, nf)) * 0.4
    tab[:, 0] = rng.random(17)
    ta, tb = tab.copy(), tab.copy()
    pure.fused_move_table(ta, 0.03, -0.02, 1.0, has_accel, has_yp)
    compiled.fused_move_table(tb, 0.03, -0.02, 1.0, has_accel, has_yp)
    assert bits_equal(ta, tb)


@needs_compiled
@pytest.mark.parametrize("seed", range(3))
def test_fused_move_aos_bitwise(seed):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 6, size=9).astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    n = int(counts.sum())
    tab = rng.standard_normal((n, 5)) * 0.4
    tab[:, 0] = rng.random(n)
    accel = rng.standard_normal(10) * 0.1
    ta, tb = tab.copy(), tab.copy()
    pure.fused_move_aos(ta, starts[:-1], counts, accel, 1.0, True, True)
    compiled.fused_move_aos(tb, starts[:-1], counts, accel, 1.0, True, True)
    assert bits_equal(ta, tb)


@needs_compiled
def test_empty_inputs_agree():
    offs = np.zeros(4, dtype=np.int64)
    counts = np.zeros(4, dtype=np.int64)
    x = np.zeros(0)
    lp, rp = pure.deposit_partials(x, offs, counts)
    lc, rc = compiled.deposit_partials(x, offs, counts)
    assert bits_equal(lp, lc) and bits_equal(rp, rc)
    assert pure.gather(np.zeros(5), x, offs, counts).size == 0
    assert compiled.gather(np.zeros(5), x, offs, counts).size == 0


def test_backend_names():
    assert pure.BACKEND_NAME == "pure"
    if compiled is not None:
        assert compiled.BACKEND_NAME == "compiled"
