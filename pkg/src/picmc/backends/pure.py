"""Pure-NumPy hot kernels, the fallback backend.

Every function here has a compiled twin in _kernels.pyx with the same
signature and bitwise-identical results. Keeping them interchangeable pins
the arithmetic: element order is the cell-major live order, accumulation is
strictly sequential (np.add.at, never pairwise reductions), and the gather
uses the one-sided form a[j] + x*(a[j+1]-a[j]).
"""

import numpy as np

BACKEND_NAME = "pure"


def _live(offs: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Packed indices of live slots, cell-major (see CellSortedStore)."""
    n = int(counts.sum())
    if n == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(offs, counts)
    within = np.arange(n, dtype=np.int64) - np.repeat(
        np.concatenate(([0], np.cumsum(counts[:-1]))), counts
    )
    return starts + within


def deposit_partials(x, offs, counts):
    """Per-cell raw CIC sums: L[j] = sum(1-x), R[j] = sum(x), slot order."""
    nc = counts.shape[0]
    left = np.zeros(nc, dtype=np.float64)
    right = np.zeros(nc, dtype=np.float64)
    idx = _live(offs, counts)
    if idx.size:
        cells = np.repeat(np.arange(nc, dtype=np.int64), counts)
        xs = x[idx]
        # add.at accumulates in element order, matching the sequential C loop.
        np.add.at(left, cells, 1.0 - xs)
        np.add.at(right, cells, xs)
    return left, right


def gather(nodes, x, offs, counts):
    """Per-particle node interpolation a[j] + x*(a[j+1]-a[j]), live order."""
    idx = _live(offs, counts)
    cells = np.repeat(np.arange(counts.shape[0], dtype=np.int64), counts)
    xs = x[idx]
    aj = nodes[cells]
    return aj + xs * (nodes[cells + 1] - aj)


def fused_move(accel_nodes, x, vx, vy, yp, offs, counts, fnstep):
    """One fused gather+push step over live particles, in place.

    accel_nodes is the premultiplied per-node acceleration (grid units) or
    None for species that receive no velocity kick; yp is None unless the
    species tracks the transverse position.
    """
    idx = _live(offs, counts)
    if idx.size == 0:
        return
    xs = x[idx]
    if accel_nodes is not None:
        cells = np.repeat(np.arange(counts.shape[0], dtype=np.int64), counts)
        aj = accel_nodes[cells]
        atemp = aj + xs * (accel_nodes[cells + 1] - aj)
        v = vx[idx] + atemp
        vx[idx] = v
    else:
        v = vx[idx]
    x[idx] = xs + fnstep * v
    if yp is not None:
        yp[idx] += fnstep * vy[idx]


def fused_move_table(tab, aj, aj1, fnstep, has_accel, has_yp):
    """Fused move over one cell's table of particles (columns x,vx,vy,vz[,yp]).

    aj/aj1 are the cell's two node accelerations; the arithmetic sequence is
    identical to fused_move so layouts agree bitwise.
    """
    if tab.shape[0] == 0:
        return
    xs = tab[:, 0]
    if has_accel:
        atemp = aj + xs * (aj1 - aj)
        tab[:, 1] += atemp
    np.add(xs, fnstep * tab[:, 1], out=xs)
    if has_yp:
        tab[:, 4] += fnstep * tab[:, 2]


def fused_move_aos(tab, starts, counts, accel_nodes, fnstep, has_accel, has_yp):
    """Fused move over a cell-major contiguous table (array-of-structs)."""
    for j in range(counts.shape[0]):
        n = int(counts[j])
        if n == 0:
            continue
        s = int(starts[j])
        if has_accel:
            aj = float(accel_nodes[j])
            aj1 = float(accel_nodes[j + 1])
        else:
            aj = aj1 = 0.0
        fused_move_table(tab[s : s + n], aj, aj1, fnstep, has_accel, has_yp)
