"""Field pipeline: charge deposition, density smoothing, Poisson solve, E.

Node-centered arrays have nc+1 entries. Periodic runs treat nodes [0, nc) as
the unknowns and mirror node nc onto node 0 after deposit; Dirichlet runs use
all nc+1 nodes with fixed end potentials.

Deposition is built from per-cell partial sums (L[j] = sum of left weights,
R[j] = sum of right weights) combined as rho[g] = R[g-1] + L[g]. The domain
decomposition stitches worker boundaries with the same two-operand additions,
which is what makes decomposed deposits bitwise equal to single-domain ones.
"""

from dataclasses import dataclass

import numpy as np

from . import backends
from .core import CellSortedStore, Grid1D, PhysicalConstants

__all__ = [
    "FieldState",
    "compute_efield",
    "deposit_charge",
    "deposit_partials_range",
    "gather_field",
    "smooth_density",
    "solve_poisson",
    "stitch_rho",
]


@dataclass
class FieldState:
    """Charge density (C/m^3), potential (V), and field (V/m) on the nodes."""

    rho: np.ndarray
    phi: np.ndarray
    e_field: np.ndarray
    rho_mean_subtracted: float = 0.0  # periodic neutralizing background

    def __post_init__(self):
        n = len(self.rho)
        if len(self.phi) != n or len(self.e_field) != n:
            raise ValueError("rho, phi and e_field must share length nc+1")

    @classmethod
    def zeros(cls, nc: int) -> "FieldState":
        return cls(
            rho=np.zeros(nc + 1),
            phi=np.zeros(nc + 1),
            e_field=np.zeros(nc + 1),
        )


def deposit_partials_range(
    store: CellSortedStore, consts: PhysicalConstants, lo: int, hi: int
):
    """Weighted per-cell CIC partial sums over cells [lo, hi).

    Species are accumulated in index order; within a cell, slots are summed
    sequentially (backend contract). Neutral species contribute nothing.
    """
    nc = hi - lo
    left = np.zeros(nc)
    right = np.zeros(nc)
    dx = store.grid.dx_m
    for isp, sp in enumerate(store.species):
        if not sp.charged:
            continue
        coef = sp.charge_c * store.weights[isp] / dx
        lraw, rraw = backends.deposit_partials(
            store.data(isp)["x"],
            store.offsets(isp)[lo:hi],
            store.counts(isp)[lo:hi],
        )
        left += coef * lraw
        right += coef * rraw
    return left, right


def stitch_rho(left: np.ndarray, right: np.ndarray, periodic: bool) -> np.ndarray:
    """Node densities from per-cell partials: rho[g] = R[g-1] + L[g]."""
    nc = len(left)
    rho = np.empty(nc + 1)
    rho[1:nc] = right[: nc - 1] + left[1:]
    if periodic:
        rho[0] = right[nc - 1] + left[0]
        rho[nc] = rho[0]
    else:
        rho[0] = left[0]
        rho[nc] = right[nc - 1]
    return rho


def deposit_charge(
    store: CellSortedStore,
    grid: Grid1D,
    consts: PhysicalConstants,
    bc: str = "periodic",
) -> np.ndarray:
    """Cloud-in-cell charge deposition onto the nodes.

    A particle at offset x in cell j adds weight (1-x) to node j and x to
    node j+1, scaled by charge * macro-weight / dx. Raises if the store has
    positions outside [0,1) (resort contract).

    Non-periodic wall nodes own half a cell, so their density is doubled;
    the trapezoidal node sum (weight 1/2 at the walls) then equals the total
    deposited charge per unit area.
    """
    for isp in range(store.nsp):
        store.check_sorted(isp)
    left, right = deposit_partials_range(store, consts, 0, grid.nc)
    rho = stitch_rho(left, right, periodic=(bc == "periodic"))
    if bc != "periodic":
        rho[0] *= 2.0
        rho[grid.nc] *= 2.0
    return rho


def smooth_density(rho: np.ndarray, passes: int = 1) -> np.ndarray:
    """Binomial 1-2-1 filter with periodic wrap on nodes [0, nc).

    The 0.25/0.5 coefficients are exact powers of two, so the filter
    redistributes charge without multiplication error and preserves the node
    sum to rounding.
    """
    nc = len(rho) - 1
    core = rho[:nc].copy()
    for _ in range(passes):
        core = 0.25 * np.roll(core, 1) + 0.5 * core + 0.25 * np.roll(core, -1)
    out = np.empty_like(rho)
    out[:nc] = core
    out[nc] = core[0]
    return out


def _thomas_unit(rhs: np.ndarray) -> np.ndarray:
    """Direct solve of the tridiagonal system (1, -2, 1) x = rhs."""
    n = len(rhs)
    diag = np.empty(n)
    y = np.empty(n)
    diag[0] = -2.0
    y[0] = rhs[0]
    for i in range(1, n):
        m = 1.0 / diag[i - 1]
        diag[i] = -2.0 - m
        y[i] = rhs[i] - m * y[i - 1]
    x = np.empty(n)
    x[n - 1] = y[n - 1] / diag[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (y[i] - x[i + 1]) / diag[i]
    return x


def solve_poisson(
    rho: np.ndarray,
    grid: Grid1D,
    consts: PhysicalConstants,
    bc: str = "periodic",
    phi_left: float = 0.0,
    phi_right: float = 0.0,
) -> np.ndarray:
    """Exact direct solve of phi'' = -rho/eps0 on the discrete nodes.

    Discretization: (phi[j-1] - 2 phi[j] + phi[j+1])/dx^2 = -rho[j]/eps0.

    Periodic: the operator is singular (constant nullspace) and the classic
    rank-1 corner correction has a vanishing Sherman-Morrison denominator, so
    the mean of rho is subtracted (neutralizing background), one node is
    pinned as gauge, the remaining tridiagonal system is eliminated directly,
    and the result is shifted to mean(phi) = 0.
    """
    nc = grid.nc
    if nc < 3:
        raise ValueError(f"poisson solve needs nc >= 3, got {nc}")
    scale = grid.dx_m * grid.dx_m / consts.epsilon0

    if bc == "periodic":
        core = rho[:nc]
        mean = float(np.mean(core))
        rhs = -(core - mean) * scale
        # Gauge phi[0] = 0 and solve for nodes 1..nc-1; the dropped equation
        # at node 0 is the negative sum of the others, hence satisfied.
        phi = np.zeros(nc + 1)
        phi[1:nc] = _thomas_unit(rhs[1:nc])
        phi[nc] = phi[0]
        shift = float(np.mean(phi[:nc]))
        phi[: nc + 1] -= shift
        return phi

    if bc == "dirichlet":
        rhs = -rho[1:nc] * scale
        rhs[0] -= phi_left
        rhs[-1] -= phi_right
        phi = np.empty(nc + 1)
        phi[0] = phi_left
        phi[nc] = phi_right
        phi[1:nc] = _thomas_unit(rhs)
        return phi

    raise ValueError(f"unknown boundary condition {bc!r}")


def compute_efield(phi: np.ndarray, grid: Grid1D, bc: str = "periodic") -> np.ndarray:
    """E = -grad(phi): central differences, one-sided at Dirichlet walls."""
    nc = grid.nc
    two_dx = 2.0 * grid.dx_m
    e = np.empty(nc + 1)
    if bc == "periodic":
        core = phi[:nc]
        e[:nc] = (np.roll(core, 1) - np.roll(core, -1)) / two_dx
        e[nc] = e[0]
        return e
    e[1:nc] = (phi[: nc - 1] - phi[2:]) / two_dx
    e[0] = (3.0 * phi[0] - 4.0 * phi[1] + phi[2]) / two_dx
    e[nc] = -(3.0 * phi[nc] - 4.0 * phi[nc - 1] + phi[nc - 2]) / two_dx
    return e


def gather_field(e_field: np.ndarray, store: CellSortedStore, grid: Grid1D) -> dict:
    """Per-particle field E_p by CIC interpolation, per species.

    Returns {species index: array in live (cell-major, slot) order}. Uses the
    one-sided form E[j] + x*(E[j+1] - E[j]): same weights as deposition, and
    a uniform field gathers to the identical value for every particle.
    """
    out = {}
    for isp in range(store.nsp):
        out[isp] = backends.gather(
            e_field,
            store.data(isp)["x"],
            store.offsets(isp),
            store.counts(isp),
        )
    return out
