"""Uniform periodic grids, complex wavefunctions and spectral operators.

Atomic units throughout (hbar = m_e = 1). Grids are uniform and periodic
with power-of-two point counts per axis, so Fourier differentiation is
exact for band-limited data and the dual momentum grid satisfies
dk = 2*pi/(n*dx). All integrals are Riemann sums, which on a periodic
grid coincide with the trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import (
    DomainError,
    GridMismatchError,
    HermiticityError,
    ResolutionError,
    UnsupportedOperatorError,
)

HBAR = 1.0

NORM_TOL = 1e-9
HERMITICITY_RAISE = 1e-8

_EXPECTATION_KINDS = ("position", "momentum", "kinetic", "potential", "hamiltonian")


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1D or 2D periodic grid over [x_min, x_max) per axis."""

    n_points: tuple[int, ...]
    x_min: tuple[float, ...]
    x_max: tuple[float, ...]

    def __post_init__(self):
        if len(self.n_points) not in (1, 2):
            raise DomainError("only 1- or 2-axis grids are supported")
        if not (len(self.n_points) == len(self.x_min) == len(self.x_max)):
            raise DomainError("n_points, x_min, x_max must have matching length")
        for n in self.n_points:
            if n < 8 or not _is_power_of_two(int(n)):
                raise ResolutionError(f"n_points must be a power of two >= 8, got {n}")
        for lo, hi in zip(self.x_min, self.x_max):
            if not hi > lo:
                raise DomainError(f"x_max must exceed x_min, got [{lo}, {hi}]")

    @classmethod
    def line(cls, n: int, lo: float, hi: float) -> "SpatialGrid":
        return cls((int(n),), (float(lo),), (float(hi),))

    @classmethod
    def square(cls, n: int, lo: float, hi: float) -> "SpatialGrid":
        return cls((int(n), int(n)), (float(lo), float(lo)), (float(hi), float(hi)))

    @property
    def ndim(self) -> int:
        return len(self.n_points)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n_points)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for n, lo, hi in zip(self.n_points, self.x_min, self.x_max))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def coords(self, axis: int = 0) -> np.ndarray:
        """Grid points along one axis (x_max itself is the periodic wrap point)."""
        n = self.n_points[axis]
        return self.x_min[axis] + self.dx[axis] * np.arange(n)

    def mesh(self, axis: int) -> np.ndarray:
        """Coordinates along `axis` broadcast to the full grid shape."""
        c = self.coords(axis)
        if self.ndim == 1:
            return c
        shape = [1] * self.ndim
        shape[axis] = len(c)
        return np.broadcast_to(c.reshape(shape), self.shape)

    def k(self, axis: int = 0) -> np.ndarray:
        """Dual (angular) wavenumbers in FFT order, spacing 2*pi/(n*dx)."""
        return 2.0 * np.pi * sfft.fftfreq(self.n_points[axis], d=self.dx[axis])

    def integrate(self, values: np.ndarray) -> complex | float:
        return values.sum() * self.cell_volume

    def momentum_dual(self) -> "SpatialGrid":
        """The fftshifted momentum-space grid paired with this one."""
        mins, maxs = [], []
        for axis in range(self.ndim):
            n = self.n_points[axis]
            dk = 2.0 * np.pi / (n * self.dx[axis])
            mins.append(-(n // 2) * dk)
            maxs.append((n - n // 2) * dk)
        return SpatialGrid(self.n_points, tuple(mins), tuple(maxs))


@dataclass(frozen=True, eq=False)
class WavefunctionGrid:
    """Complex amplitudes on a SpatialGrid, immutable after construction."""

    grid: SpatialGrid
    amplitudes: np.ndarray
    time_label: float = 0.0

    def __post_init__(self):
        amp = np.ascontiguousarray(np.asarray(self.amplitudes, dtype=np.complex128))
        if amp.shape != self.grid.shape:
            raise GridMismatchError(
                f"amplitude shape {amp.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(amp.view(np.float64))):
            raise DomainError("amplitudes contain NaN/Inf")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.density) * self.grid.cell_volume))

    def normalized(self) -> "WavefunctionGrid":
        n = self.norm()
        if n == 0.0 or not np.isfinite(n):
            raise DomainError("cannot normalize a null or non-finite state")
        return WavefunctionGrid(self.grid, self.amplitudes / n, self.time_label)

    def with_amplitudes(self, amplitudes: np.ndarray, time_label: float | None = None) -> "WavefunctionGrid":
        t = self.time_label if time_label is None else time_label
        return WavefunctionGrid(self.grid, amplitudes, t)

    def momentum_representation(self) -> "WavefunctionGrid":
        """Continuum-normalized momentum-space amplitudes on the dual grid.

        The result is fftshifted so its axes are monotonic, and it carries
        unit L2 norm whenever this state does (Parseval).
        """
        g = self.grid
        values = sfft.fftn(np.asarray(self.amplitudes))
        for axis in range(g.ndim):
            phase = np.exp(-1j * g.k(axis) * g.x_min[axis]) * (g.dx[axis] / np.sqrt(2.0 * np.pi * HBAR))
            shape = [1] * g.ndim
            shape[axis] = g.n_points[axis]
            values = values * phase.reshape(shape)
        values = sfft.fftshift(values)
        return WavefunctionGrid(g.momentum_dual(), values, self.time_label)


def same_grid(a: SpatialGrid, b: SpatialGrid) -> bool:
    return a == b


def _require_same_grid(a: SpatialGrid, b: SpatialGrid):
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def make_gaussian_packet(grid: SpatialGrid, x0: float, p0: float, sigma: float) -> WavefunctionGrid:
    """Normalized Gaussian wavepacket exp(-(x-x0)^2/(4 sigma^2) + i p0 x).

    sigma is the position-space standard deviation of |psi|^2. Preconditions:
    sigma must be resolvable (sigma >= 4 dx) and the packet must sit at least
    5 sigma away from both domain edges so the periodic images are negligible.
    """
    if grid.ndim != 1:
        raise DomainError("gaussian packets are built on 1D grids")
    dx = grid.dx[0]
    if sigma < 4.0 * dx:
        raise ResolutionError(f"sigma={sigma} below resolvable limit 4*dx={4.0 * dx}")
    if x0 - 5.0 * sigma < grid.x_min[0] or x0 + 5.0 * sigma > grid.x_max[0]:
        raise DomainError(
            f"packet at x0={x0} with sigma={sigma} clipped by domain "
            f"[{grid.x_min[0]}, {grid.x_max[0]}]"
        )
    x = grid.coords(0)
    psi = np.exp(-((x - x0) ** 2) / (4.0 * sigma**2) + 1j * p0 * x / HBAR)
    return WavefunctionGrid(grid, psi).normalized()


def make_plane_wave(grid: SpatialGrid, mode: int, axis: int = 0) -> WavefunctionGrid:
    """Normalized momentum eigenstate exp(i k x)/sqrt(L) with k = 2*pi*mode/L."""
    length = grid.x_max[axis] - grid.x_min[axis]
    k = 2.0 * np.pi * mode / length
    psi = np.exp(1j * k * grid.mesh(axis)) / np.sqrt(
        np.prod([grid.x_max[a] - grid.x_min[a] for a in range(grid.ndim)])
    )
    return WavefunctionGrid(grid, np.broadcast_to(psi, grid.shape).copy())


def superpose(states: list[WavefunctionGrid], weights=None) -> WavefunctionGrid:
    """Normalized linear combination of states on a common grid."""
    if not states:
        raise DomainError("superpose needs at least one state")
    g = states[0].grid
    total = np.zeros(g.shape, dtype=np.complex128)
    if weights is None:
        weights = [1.0] * len(states)
    for s, w in zip(states, weights):
        _require_same_grid(g, s.grid)
        total += w * s.amplitudes
    return WavefunctionGrid(g, total, states[0].time_label).normalized()


def spectral_derivative_array(values: np.ndarray, grid: SpatialGrid, axis: int = 0, order: int = 1) -> np.ndarray:
    """Fourier derivative of an arbitrary (complex or real) field on `grid`."""
    if axis < 0 or axis >= grid.ndim:
        raise DomainError(f"axis {axis} invalid for {grid.ndim}D grid")
    if order not in (1, 2):
        raise UnsupportedOperatorError("derivative order must be 1 or 2")
    vhat = sfft.fft(np.asarray(values, dtype=np.complex128), axis=axis)
    k = grid.k(axis)
    mult = (1j * k) if order == 1 else -(k**2)
    shape = [1] * np.ndim(values)
    shape[axis] = len(k)
    return sfft.ifft(vhat * mult.reshape(shape), axis=axis)


def spectral_derivative(psi: WavefunctionGrid, axis: int = 0, order: int = 1) -> np.ndarray:
    """Fourier derivative of the wavefunction along one axis."""
    return spectral_derivative_array(psi.amplitudes, psi.grid, axis=axis, order=order)


def inner_product(phi: WavefunctionGrid, psi: WavefunctionGrid) -> complex:
    """Sesquilinear <phi|psi> (conjugate-linear in the first argument)."""
    _require_same_grid(phi.grid, psi.grid)
    return complex(np.vdot(phi.amplitudes, psi.amplitudes) * phi.grid.cell_volume)


def _potential_values(potential, grid: SpatialGrid) -> np.ndarray:
    values = getattr(potential, "values", potential)
    pgrid = getattr(potential, "grid", None)
    if pgrid is not None:
        _require_same_grid(pgrid, grid)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.shape:
        raise GridMismatchError("potential shape does not match grid")
    return values


def _mass_tuple(mass, ndim: int) -> tuple[float, ...]:
    if np.isscalar(mass):
        return (float(mass),) * ndim
    mass = tuple(float(m) for m in mass)
    if len(mass) != ndim:
        raise DomainError("one mass per axis required")
    return mass


def _momentum_density(psi: WavefunctionGrid) -> np.ndarray:
    """|psi(k)|^2 in FFT order, normalized so sum * dk^d = 1 for unit states."""
    g = psi.grid
    vhat = sfft.fftn(np.asarray(psi.amplitudes))
    scale = g.cell_volume**2 / np.prod([2.0 * np.pi * HBAR / 1.0 for _ in range(g.ndim)])
    return np.abs(vhat) ** 2 * scale


def expectation(psi: WavefunctionGrid, kind: str, axis: int = 0, potential=None, mass=1.0) -> float:
    """Standard expectation value of a supported observable.

    kind: one of "position", "momentum", "kinetic" (per axis, see `axis`),
    "potential", "hamiltonian" (these need `potential`). Momentum and kinetic
    values come from the diagonal momentum-space weights; the equivalent
    position-space Hermitian form is evaluated alongside and its imaginary
    residue must stay below 1e-8 or a HermiticityError is raised.
    """
    if kind not in _EXPECTATION_KINDS:
        raise UnsupportedOperatorError(f"unsupported observable kind {kind!r}")
    g = psi.grid
    dV = g.cell_volume
    rho = psi.density

    if kind == "position":
        return float(np.sum(g.mesh(axis) * rho) * dV)
    if kind == "potential":
        v = _potential_values(potential, g)
        return float(np.sum(v * rho) * dV)

    masses = _mass_tuple(mass, g.ndim)
    if kind == "hamiltonian":
        total = expectation(psi, "potential", potential=potential) if potential is not None else 0.0
        for a in range(g.ndim):
            total += expectation(psi, "kinetic", axis=a, mass=masses)
        return float(total)

    # momentum / kinetic along a single axis
    nk = _momentum_density(psi)
    dk_volume = np.prod([2.0 * np.pi / (g.n_points[a] * g.dx[a]) for a in range(g.ndim)])
    k = g.k(axis)
    shape = [1] * g.ndim
    shape[axis] = len(k)
    kmesh = k.reshape(shape)
    if kind == "momentum":
        value = float(np.sum(HBAR * kmesh * nk) * dk_volume)
        applied = -1j * HBAR * spectral_derivative(psi, axis=axis, order=1)
    else:
        value = float(np.sum((HBAR * kmesh) ** 2 / (2.0 * masses[axis]) * nk) * dk_volume)
        applied = -(HBAR**2) / (2.0 * masses[axis]) * spectral_derivative(psi, axis=axis, order=2)

    cross = complex(np.vdot(psi.amplitudes, applied) * dV)
    residue = abs(cross.imag)
    if residue > HERMITICITY_RAISE:
        raise HermiticityError(
            f"imaginary residue {residue:.3e} of Hermitian form exceeds {HERMITICITY_RAISE:.0e}"
        )
    return value
