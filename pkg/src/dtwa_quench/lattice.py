"""Lattice geometry and power-law coupling matrices.

Sites live on an open-boundary rectangular grid with unit spacing. Site
coordinates are 1-based pairs (n_x, n_y) with 1 <= n_x <= nx and
1 <= n_y <= ny; the linear site order is row-major, so the 0-based array
index of (n_x, n_y) is (n_y - 1) * nx + (n_x - 1). Couplings decay as a
power law of the Euclidean distance, J_ij = J / |r_i - r_j|^alpha, with
J_ii = 0 and no distance cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LatticeSpec",
    "CouplingMatrix",
    "build_lattice",
    "site_index",
    "site_coords",
    "center_site",
    "axis_partners",
    "coupling_matrix",
    "effective_coupling",
    "write_coupling_csv",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Rectangular open-boundary lattice with unit spacing."""

    nx: int
    ny: int
    # positions[i] = (n_x, n_y) in lattice units, 1-based, row-major order
    positions: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric pairwise couplings J_ij = J / dist^alpha with zero diagonal.

    model is "ising" (only the zz part of the interaction acts) or
    "xy" (only the xx + yy part acts); the matrix values are shared.
    """

    model: str
    J: float
    alpha: float
    values: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]


def build_lattice(nx: int, ny: int) -> LatticeSpec:
    """Build an nx-by-ny lattice with row-major site order.

    Requires nx, ny >= 1 and nx * ny >= 2 (a single site has no pair
    interactions, so nothing downstream is defined for it).
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"lattice dimensions must be positive, got {nx}x{ny}")
    if nx * ny < 2:
        raise ValueError("lattice must contain at least 2 sites")
    xs = np.arange(1, nx + 1)
    ys = np.arange(1, ny + 1)
    positions = np.empty((nx * ny, 2), dtype=np.float64)
    positions[:, 0] = np.tile(xs, ny)
    positions[:, 1] = np.repeat(ys, nx)
    positions.setflags(write=False)
    return LatticeSpec(nx=nx, ny=ny, positions=positions)


def site_index(lattice: LatticeSpec, n_x: int, n_y: int) -> int:
    """0-based array index of the site at 1-based coordinates (n_x, n_y)."""
    if not (1 <= n_x <= lattice.nx and 1 <= n_y <= lattice.ny):
        raise ValueError(
            f"site ({n_x},{n_y}) outside {lattice.nx}x{lattice.ny} lattice"
        )
    return (n_y - 1) * lattice.nx + (n_x - 1)


def site_coords(lattice: LatticeSpec, index: int) -> tuple[int, int]:
    """1-based (n_x, n_y) coordinates of the site at a 0-based index."""
    if not (0 <= index < lattice.n_sites):
        raise ValueError(f"site index {index} out of range")
    return (index % lattice.nx + 1, index // lattice.nx + 1)


def center_site(lattice: LatticeSpec) -> int:
    """Index of the central site (lower-middle for even dimensions)."""
    return site_index(lattice, (lattice.nx + 1) // 2, (lattice.ny + 1) // 2)


def axis_partners(
    lattice: LatticeSpec, reference: int, axis: str, j_max: int | None = None
) -> tuple[int, ...]:
    """Site indices at separations j = 1, 2, ... from reference along +axis.

    Stops at the lattice edge; j_max truncates earlier. Raises if no
    partner exists in that direction.
    """
    n_x, n_y = site_coords(lattice, reference)
    if axis == "x":
        room = lattice.nx - n_x
        step = 1
    elif axis == "y":
        room = lattice.ny - n_y
        step = lattice.nx
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if j_max is not None:
        if j_max < 1:
            raise ValueError("j_max must be >= 1")
        room = min(room, j_max)
    if room < 1:
        raise ValueError(
            f"no sites along +{axis} from ({n_x},{n_y}) on a "
            f"{lattice.nx}x{lattice.ny} lattice"
        )
    return tuple(reference + step * j for j in range(1, room + 1))


def coupling_matrix(
    lattice: LatticeSpec, model: str, J: float = 1.0, alpha: float = 0.0
) -> CouplingMatrix:
    """Power-law couplings J_ij = J / |r_i - r_j|^alpha on the lattice."""
    if model not in ("ising", "xy"):
        raise ValueError(f"unknown model {model!r}, expected 'ising' or 'xy'")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    delta = lattice.positions[:, None, :] - lattice.positions[None, :, :]
    dist = np.sqrt((delta * delta).sum(axis=-1))
    with np.errstate(divide="ignore"):
        values = J / dist**alpha
    np.fill_diagonal(values, 0.0)
    values.setflags(write=False)
    return CouplingMatrix(model=model, J=J, alpha=alpha, values=values)


def effective_coupling(couplings: CouplingMatrix, center: int) -> float:
    """All-to-all coupling with the same total interaction on one spin.

    J_eff = (sum_{k != center} J_{center,k}) / (M - 1).
    """
    M = couplings.n_sites
    if not (0 <= center < M):
        raise ValueError(f"site index {center} out of range")
    return float(couplings.values[center].sum() / (M - 1))


def write_coupling_csv(path, couplings: CouplingMatrix) -> None:
    """Write the M x M coupling values as M rows of M decimal columns."""
    with open(path, "w") as f:
        for row in couplings.values:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
