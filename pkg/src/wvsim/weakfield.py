"""Formal weak values and local-expectation fields computed from the state.

A weak value post-selected at x with delay tau is the amplitude ratio

    G_f(x, t, tau) = <x| U(tau) G |psi(t)> / <x| U(tau) |psi(t)>,

computed here by applying the operator spectrally, propagating numerator
and denominator states, and dividing pointwise. The tau -> 0 limit is the
local expectation field whose density-weighted average recovers <G>.

Fields are evaluated as amplitude ratios rather than through the polar
decomposition R, S: this avoids phase unwinding across branch cuts. Near
density nodes the ratio diverges, so every field carries a validity mask;
points with density below DENSITY_FLOOR_RATIO of the peak are masked and
their values zeroed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DisconnectedSupportWarning,
    FormulaDisagreementWarning,
    GridMismatchError,
    MaskError,
    UnsupportedBasisError,
    UnsupportedOperatorError,
)
from .grid import (
    HBAR,
    SpatialGrid,
    WavefunctionGrid,
    _mass_tuple,
    inner_product,
    spectral_derivative_array,
)
from .propagator import EvolutionConfig, propagate_batch

DENSITY_FLOOR_RATIO = 1e-12
MASK_WEIGHT_LIMIT = 1e-6

OPERATOR_TAGS = ("momentum", "kinetic", "position", "potential", "hamiltonian")


@dataclass(frozen=True, eq=False)
class WeakValueField:
    """Complex weak-value samples over post-selection coordinates."""

    grid: SpatialGrid
    values: np.ndarray
    mask: np.ndarray
    tau: float
    operator_tag: str
    axis: int = 0
    basis: str = "position"

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag


@dataclass(frozen=True, eq=False)
class BohmianFields:
    """Per-axis Bohmian/osmotic momentum and energy fields (tau = 0)."""

    grid: SpatialGrid
    p_B: tuple[np.ndarray, ...]
    p_O: tuple[np.ndarray, ...]
    Q: tuple[np.ndarray, ...]
    K_B: tuple[np.ndarray, ...]
    K_O: tuple[np.ndarray, ...]
    mask: np.ndarray


def density_mask(density: np.ndarray) -> np.ndarray:
    """Valid points: density at least DENSITY_FLOOR_RATIO of the peak."""
    peak = density.max()
    valid = density >= DENSITY_FLOOR_RATIO * peak
    if peak == 0.0 or not np.any(valid):
        raise MaskError("denominator density is below the floor everywhere")
    return valid


def masked_ratio(numerator: np.ndarray, denominator: np.ndarray):
    """Pointwise numerator/denominator with node masking; masked values zeroed."""
    mask = density_mask(np.abs(denominator) ** 2)
    out = np.zeros_like(numerator, dtype=np.complex128)
    np.divide(numerator, denominator, out=out, where=mask)
    return out, mask


def apply_operator(psi: WavefunctionGrid, op_tag: str, axis: int = 0,
                   cfg: EvolutionConfig | None = None) -> np.ndarray:
    """Amplitudes of G|psi> for a supported operator tag."""
    if op_tag not in OPERATOR_TAGS:
        raise UnsupportedOperatorError(f"unsupported operator tag {op_tag!r}")
    g = psi.grid
    masses = _mass_tuple(cfg.mass if cfg is not None else 1.0, g.ndim)
    if op_tag == "position":
        return g.mesh(axis) * psi.amplitudes
    if op_tag == "momentum":
        return -1j * HBAR * spectral_derivative_array(psi.amplitudes, g, axis=axis, order=1)
    if op_tag == "kinetic":
        d2 = spectral_derivative_array(psi.amplitudes, g, axis=axis, order=2)
        return -(HBAR**2) / (2.0 * masses[axis]) * d2
    if op_tag == "potential":
        if cfg is None or cfg.potential is None:
            raise UnsupportedOperatorError("operator tag 'potential' needs a potential in cfg")
        return cfg.potential.values * psi.amplitudes
    # hamiltonian
    total = np.zeros(g.shape, dtype=np.complex128)
    for a in range(g.ndim):
        total += apply_operator(psi, "kinetic", axis=a, cfg=cfg)
    if cfg is not None and cfg.potential is not None:
        total += cfg.potential.values * psi.amplitudes
    return total


def formal_weak_value(psi: WavefunctionGrid, op_tag: str, tau: float = 0.0,
                      cfg: EvolutionConfig | None = None, axis: int = 0) -> WeakValueField:
    """Position-post-selected weak value field of the tagged operator.

    The numerator state U(tau) G psi and denominator state U(tau) psi are
    propagated exactly (no weak-coupling truncation); tau = 0 bypasses the
    propagator. The boundary monitor is disarmed for this internal delay
    propagation since post-selection applies equally to delocalized states.
    """
    num = apply_operator(psi, op_tag, axis=axis, cfg=cfg)
    den = np.asarray(psi.amplitudes)
    if tau > 0.0:
        if cfg is None:
            raise UnsupportedOperatorError("tau > 0 requires an EvolutionConfig")
        run = cfg.disarmed()
        batch = propagate_batch(np.stack([num, den]), psi.grid, tau, run)
        num, den = batch[0], batch[1]
    values, mask = masked_ratio(num, den)
    return WeakValueField(psi.grid, values, mask, float(tau), op_tag, axis=axis)


def generalized_weak_value(psi: WavefunctionGrid, op_tag: str, postselect_basis: str,
                           tau: float = 0.0, cfg: EvolutionConfig | None = None,
                           axis: int = 0) -> WeakValueField:
    """Weak value post-selected in position or momentum.

    Position delegates to formal_weak_value (bit-identical). Momentum
    post-selection Fourier-transforms the propagated numerator and
    denominator states and forms the ratio on the dual grid.
    """
    if postselect_basis == "position":
        return formal_weak_value(psi, op_tag, tau=tau, cfg=cfg, axis=axis)
    if postselect_basis != "momentum":
        raise UnsupportedBasisError(f"unsupported post-selection basis {postselect_basis!r}")
    num = apply_operator(psi, op_tag, axis=axis, cfg=cfg)
    den = np.asarray(psi.amplitudes)
    if tau > 0.0:
        if cfg is None:
            raise UnsupportedOperatorError("tau > 0 requires an EvolutionConfig")
        batch = propagate_batch(np.stack([num, den]), psi.grid, tau, cfg.disarmed())
        num, den = batch[0], batch[1]
    num_p = WavefunctionGrid(psi.grid, num).momentum_representation()
    den_p = WavefunctionGrid(psi.grid, den).momentum_representation()
    values, mask = masked_ratio(num_p.amplitudes, den_p.amplitudes)
    return WeakValueField(num_p.grid, values, mask, float(tau), op_tag, axis=axis, basis="momentum")


def local_momentum(psi: WavefunctionGrid, axis: int = 0) -> WeakValueField:
    """Momentum local expectation -i hbar (d psi/dx_axis)/psi at tau = 0.

    Real part is the Bohmian momentum (phase gradient), imaginary part the
    osmotic momentum -(hbar/R) dR/dx.
    """
    return formal_weak_value(psi, "momentum", tau=0.0, axis=axis)


def kinetic_weak_value(psi: WavefunctionGrid, axis: int = 0, mass: float = 1.0) -> WeakValueField:
    """Kinetic-energy local expectation (-hbar^2/2m)(d^2 psi/dx^2)/psi."""
    masses = _mass_tuple(mass, psi.grid.ndim)
    num = -(HBAR**2) / (2.0 * masses[axis]) * spectral_derivative_array(
        psi.amplitudes, psi.grid, axis=axis, order=2
    )
    values, mask = masked_ratio(num, np.asarray(psi.amplitudes))
    return WeakValueField(psi.grid, values, mask, 0.0, "kinetic", axis=axis)


def bohmian_fields(psi: WavefunctionGrid, mass: float = 1.0) -> BohmianFields:
    """Bohmian momentum, osmotic momentum, quantum potential and the two
    kinetic-energy fields, per axis.

    The quantum potential is computed two independent ways: from the
    spectral second derivative of R = |psi| (the defining formula) and
    from the osmotic momentum via (hbar dp_O/dx - p_O^2)/2m evaluated with
    derivatives of psi itself. Disagreement beyond 1e-6 relative on
    unmasked points emits a FormulaDisagreementWarning; the R-based field
    is the one returned.
    """
    g = psi.grid
    masses = _mass_tuple(mass, g.ndim)
    amp = np.asarray(psi.amplitudes)
    mask = density_mask(np.abs(amp) ** 2)
    big_r = np.abs(amp)

    p_B, p_O, q_fields, k_b, k_o = [], [], [], [], []
    for axis in range(g.ndim):
        d1 = spectral_derivative_array(amp, g, axis=axis, order=1)
        d2 = spectral_derivative_array(amp, g, axis=axis, order=2)
        ratio1 = np.zeros_like(amp)
        np.divide(d1, amp, out=ratio1, where=mask)
        ratio2 = np.zeros_like(amp)
        np.divide(d2, amp, out=ratio2, where=mask)

        pb = HBAR * ratio1.imag
        po = -HBAR * ratio1.real
        pb[~mask] = 0.0
        po[~mask] = 0.0

        d2r = spectral_derivative_array(big_r, g, axis=axis, order=2).real
        q = np.zeros(g.shape)
        np.divide(d2r, big_r, out=q, where=mask)
        q *= -(HBAR**2) / (2.0 * masses[axis])

        # same quantity via psi-derivatives only: dp_O/dx from psi''/psi
        dpo = -HBAR * (ratio2.real - (ratio1**2).real)
        q_alt = (HBAR * dpo - po**2) / (2.0 * masses[axis])
        scale = np.max(np.abs(q[mask])) if np.any(mask) else 0.0
        if scale > 0:
            rel = np.max(np.abs((q - q_alt)[mask])) / scale
            if rel > 1e-6:
                warnings.warn(
                    f"quantum-potential formulas disagree by {rel:.3e} relative on axis {axis}",
                    FormulaDisagreementWarning,
                )

        p_B.append(pb)
        p_O.append(po)
        q_fields.append(q)
        k_b.append(pb**2 / (2.0 * masses[axis]))
        k_o.append(po**2 / (2.0 * masses[axis]))

    return BohmianFields(g, tuple(p_B), tuple(p_O), tuple(q_fields), tuple(k_b), tuple(k_o), mask)


def density_average(field: WeakValueField, psi: WavefunctionGrid) -> complex:
    """Density-weighted spatial average of a tau=0 field.

    Equals the standard expectation of the tagged operator; its imaginary
    part integrates to zero for Hermitian operators. Raises MaskError when
    masked points carry more than MASK_WEIGHT_LIMIT of the density.
    """
    state = psi.momentum_representation() if field.basis == "momentum" else psi
    if state.grid != field.grid:
        raise GridMismatchError("field grid does not match the state's post-selection grid")
    rho = state.density
    dV = state.grid.cell_volume
    masked_weight = float(np.sum(rho[~field.mask]) * dV)
    if masked_weight > MASK_WEIGHT_LIMIT:
        raise MaskError(f"masked density weight {masked_weight:.3e} exceeds {MASK_WEIGHT_LIMIT:.0e}")
    return complex(np.sum(rho[field.mask] * field.values[field.mask]) * dV)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    state: WavefunctionGrid
    phase: np.ndarray
    n_components: int
    fidelity: float | None = None


def reconstruct_wavefunction(p_B: np.ndarray, density: np.ndarray, grid: SpatialGrid,
                             truth: WavefunctionGrid | None = None) -> ReconstructionResult:
    """Rebuild psi = sqrt(density) exp(i S) from the Bohmian momentum field.

    The phase S is the cumulative trapezoid integral of p_B anchored at
    the left-most unmasked point (S = 0 there; the global phase is not
    identifiable). Masked gaps contribute nothing to the running integral
    (zero-order hold). If the density support splits into several disjoint
    components the relative phases between components are unidentifiable:
    a DisconnectedSupportWarning is emitted and the hold value is used.
    """
    if grid.ndim != 1:
        raise GridMismatchError("tomographic reconstruction is implemented for 1D grids")
    density = np.asarray(density, dtype=np.float64)
    p_B = np.asarray(p_B, dtype=np.float64)
    mask = density_mask(density)

    n_components = int(np.sum(np.diff(mask.astype(int)) == 1) + (1 if mask[0] else 0))
    if n_components > 1:
        warnings.warn(
            f"density support has {n_components} disjoint components; "
            "relative phases between components are not identifiable",
            DisconnectedSupportWarning,
        )

    dx = grid.dx[0]
    increments = np.zeros(grid.n_points[0])
    both = mask[1:] & mask[:-1]
    increments[1:][both] = 0.5 * (p_B[1:] + p_B[:-1])[both] * dx
    phase = np.cumsum(increments)
    anchor = int(np.argmax(mask))
    phase = phase - phase[anchor]

    state = WavefunctionGrid(grid, np.sqrt(density) * np.exp(1j * phase / HBAR))
    fidelity = None
    if truth is not None:
        fidelity = float(abs(inner_product(state, truth)))
    return ReconstructionResult(state, phase, n_components, fidelity)
