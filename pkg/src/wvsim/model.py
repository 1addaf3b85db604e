"""Trap, disorder and interaction potentials, plus two-particle states.

Every PotentialField carries a descriptor sufficient to regenerate its
values bit-exactly (seeded construction), so run manifests can reference
potentials by descriptor alone.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, DegenerateStateError, DomainError, GridMismatchError, ResolutionError
from .grid import SpatialGrid, WavefunctionGrid, _require_same_grid


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Real potential energy samples on a grid, with provenance descriptor."""

    grid: SpatialGrid
    values: np.ndarray
    descriptor: dict

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.shape != self.grid.shape:
            raise GridMismatchError("potential shape does not match grid")
        if not np.all(np.isfinite(vals)):
            raise DomainError("potential contains NaN/Inf")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class DisorderSpec:
    """Seeded speckle disorder: signed Gaussian bumps scattered over the domain."""

    seed: int
    speckle_count: int = 40
    amplitude: float = 0.5
    correlation_length: float = 1.0
    symmetrize: bool = False

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("disorder amplitude must be >= 0")
        if self.speckle_count < 0:
            raise ConfigError("speckle_count must be >= 0")


def harmonic(grid: SpatialGrid, omega: float, center: float = 0.0, mass: float = 1.0) -> PotentialField:
    """Isotropic harmonic trap, V = sum_j m omega^2 (x_j - center)^2 / 2."""
    if omega <= 0:
        raise ConfigError("omega must be positive")
    values = np.zeros(grid.shape)
    for axis in range(grid.ndim):
        values = values + 0.5 * mass * omega**2 * (grid.mesh(axis) - center) ** 2
    desc = {"kind": "harmonic", "omega": float(omega), "center": float(center), "mass": float(mass)}
    return PotentialField(grid, values, desc)


def speckle_disorder(grid: SpatialGrid, spec: DisorderSpec) -> PotentialField:
    """Sum of seeded Gaussian speckles with signed uniform amplitudes.

    Bump centers are drawn uniformly over the domain interior (inset by
    one correlation length per edge); the same seed always regenerates a
    bit-identical field.
    """
    w = spec.correlation_length
    for dx in grid.dx:
        if w < 2.0 * dx:
            raise ResolutionError(f"correlation_length={w} below resolvable limit 2*dx={2.0 * dx}")
    rng = np.random.default_rng(spec.seed)
    values = np.zeros(grid.shape)
    for _ in range(spec.speckle_count):
        center = [rng.uniform(grid.x_min[a] + w, grid.x_max[a] - w) for a in range(grid.ndim)]
        amp = rng.uniform(-spec.amplitude, spec.amplitude)
        bump = np.zeros(grid.shape)
        for a in range(grid.ndim):
            bump = bump + (grid.mesh(a) - center[a]) ** 2
        values = values + amp * np.exp(-bump / (2.0 * w**2))
    if spec.symmetrize:
        values = even_symmetrized(values)
    desc = {"kind": "speckle", **asdict(spec)}
    return PotentialField(grid, values, desc)


def even_symmetrized(values: np.ndarray) -> np.ndarray:
    """Even part of a field under x -> -x on a periodic grid centered at 0."""
    mirrored = values
    for axis in range(values.ndim):
        n = values.shape[axis]
        idx = (n - np.arange(n)) % n
        mirrored = np.take(mirrored, idx, axis=axis)
    return 0.5 * (values + mirrored)


def soft_coulomb_value(separation, lam: float = 1.0, alpha: float = 1.0):
    """Soft-core Coulomb energy lambda / sqrt(separation^2 + alpha^2)."""
    return lam / np.sqrt(np.asarray(separation) ** 2 + alpha**2)


def soft_coulomb(grid: SpatialGrid, lam: float = 1.0, alpha: float = 1.0) -> PotentialField:
    """Two-particle soft-core Coulomb repulsion on a 2-axis grid."""
    if grid.ndim != 2:
        raise DomainError("soft_coulomb needs a 2-axis configuration grid")
    if alpha <= 0:
        raise ConfigError("softening alpha must be positive")
    values = soft_coulomb_value(grid.mesh(0) - grid.mesh(1), lam, alpha)
    desc = {"kind": "soft_coulomb", "lambda": float(lam), "alpha": float(alpha)}
    return PotentialField(grid, values, desc)


def constant(grid: SpatialGrid, value: float = 0.0) -> PotentialField:
    return PotentialField(grid, np.full(grid.shape, float(value)), {"kind": "constant", "value": float(value)})


def combine(fields: list[PotentialField]) -> PotentialField:
    """Exact sum of potential fields on a common grid."""
    if not fields:
        raise ConfigError("combine needs at least one field")
    g = fields[0].grid
    total = np.zeros(g.shape)
    for f in fields:
        _require_same_grid(g, f.grid)
        total = total + f.values
    return PotentialField(g, total, {"kind": "sum", "parts": [f.descriptor for f in fields]})


def lift_one_body(grid2d: SpatialGrid, one_body: PotentialField) -> PotentialField:
    """v(x1) + v(x2) on the configuration grid from a 1D one-body potential."""
    if grid2d.ndim != 2 or one_body.grid.ndim != 1:
        raise DomainError("lift_one_body maps a 1D potential onto a 2-axis grid")
    for axis in range(2):
        if (
            grid2d.n_points[axis] != one_body.grid.n_points[0]
            or grid2d.x_min[axis] != one_body.grid.x_min[0]
            or grid2d.x_max[axis] != one_body.grid.x_max[0]
        ):
            raise GridMismatchError("2D grid axes must replicate the 1D grid")
    v = one_body.values
    values = v[:, None] + v[None, :]
    return PotentialField(grid2d, values, {"kind": "lifted_one_body", "part": one_body.descriptor})


def regenerate(descriptor: dict, grid: SpatialGrid) -> PotentialField:
    """Rebuild a potential bit-exactly from its descriptor."""
    kind = descriptor.get("kind")
    if kind == "harmonic":
        return harmonic(grid, descriptor["omega"], descriptor["center"], descriptor["mass"])
    if kind == "speckle":
        spec = DisorderSpec(
            seed=descriptor["seed"],
            speckle_count=descriptor["speckle_count"],
            amplitude=descriptor["amplitude"],
            correlation_length=descriptor["correlation_length"],
            symmetrize=descriptor.get("symmetrize", False),
        )
        return speckle_disorder(grid, spec)
    if kind == "soft_coulomb":
        return soft_coulomb(grid, descriptor["lambda"], descriptor["alpha"])
    if kind == "constant":
        return constant(grid, descriptor["value"])
    if kind == "sum":
        return combine([regenerate(d, grid) for d in descriptor["parts"]])
    if kind == "lifted_one_body":
        one_body_grid = SpatialGrid.line(grid.n_points[0], grid.x_min[0], grid.x_max[0])
        return lift_one_body(grid, regenerate(descriptor["part"], one_body_grid))
    raise ConfigError(f"unknown potential descriptor kind {kind!r}")


def symmetrized_product(psi_a: WavefunctionGrid, psi_b: WavefunctionGrid, sign: int = +1) -> WavefunctionGrid:
    """Exchange-(anti)symmetrized two-particle state on the product grid.

    Psi(x1, x2) = N [psi_a(x1) psi_b(x2) + sign psi_b(x1) psi_a(x2)].
    The swap symmetry Psi(x1,x2) = sign * Psi(x2,x1) holds bit-exactly by
    construction. sign=-1 with psi_a == psi_b yields a null state and is
    rejected.
    """
    if sign not in (+1, -1):
        raise ConfigError("exchange sign must be +1 or -1")
    if psi_a.grid.ndim != 1:
        raise DomainError("symmetrized_product combines 1D states")
    _require_same_grid(psi_a.grid, psi_b.grid)
    g1 = psi_a.grid
    a, b = psi_a.amplitudes, psi_b.amplitudes
    values = np.outer(a, b) + sign * np.outer(b, a)
    grid2 = SpatialGrid(
        (g1.n_points[0], g1.n_points[0]),
        (g1.x_min[0], g1.x_min[0]),
        (g1.x_max[0], g1.x_max[0]),
    )
    norm2 = np.sum(np.abs(values) ** 2) * grid2.cell_volume
    if norm2 < 1e-24:
        raise DegenerateStateError("antisymmetrization of identical states gives a null state")
    return WavefunctionGrid(grid2, values / np.sqrt(norm2), psi_a.time_label)


def exchange_residue(psi: WavefunctionGrid, sign: int = +1) -> float:
    """Max |Psi(x1,x2) - sign*Psi(x2,x1)|, zero for exact exchange symmetry."""
    amp = psi.amplitudes
    return float(np.max(np.abs(amp - sign * amp.T)))
