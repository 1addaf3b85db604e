"""Monte Carlo simulation of the weak-measurement laboratory protocol.

Each repetition couples the object to a calibrated Gaussian pointer via an
impulsive momentum-momentum interaction of strength gamma*T, reads out the
pointer position (real-part protocol) or pointer momentum (imaginary-part
protocol), collapses the object accordingly, waits a delay tau, and
strong-measures the object position. Conditional averages of the scaled
readouts over the post-selected ensembles estimate the real or imaginary
part of the formal weak value.

The sampling law is built from the untruncated entangled amplitude
psi(p) f(y - gamma T p); no weak-coupling expansion enters the simulator,
so empirical/formal agreement is a genuine check rather than a tautology.
Readouts are drawn on the ancilla grid (collapse at grid resolution) and
each repetition owns the counter-seeded stream default_rng([master_seed, k]),
which makes records reproducible and order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .errors import (
    BinningError,
    CalibrationError,
    ConfigError,
    InsufficientDataError,
    ResolutionError,
    SupportOverflowError,
)
from .grid import HBAR, SpatialGrid, WavefunctionGrid, spectral_derivative_array
from .propagator import EvolutionConfig, propagate_batch
from .weakfield import DENSITY_FLOOR_RATIO, WeakValueField, formal_weak_value

DEFAULT_MIN_BIN_COUNT = 20


@dataclass(frozen=True, eq=False)
class AncillaModel:
    """Calibrated Gaussian pointer f(y) with coupling parameters.

    sigma is the position spread of |f|^2; gamma and T set the impulsive
    coupling strength gamma*T (a pointer displacement per unit object
    momentum). Calibration invariants: <y> = 0, int y f f' dy = -1/2, and
    for momentum readout the pointer momentum variance hbar^2/(4 sigma^2).
    """

    sigma: float
    gamma: float
    T: float
    grid_y: SpatialGrid
    f: np.ndarray

    @property
    def gamma_t(self) -> float:
        return self.gamma * self.T

    def pointer_amplitude(self, y) -> np.ndarray:
        """Rest wavepacket evaluated at arbitrary (shifted) positions."""
        return (2.0 * np.pi * self.sigma**2) ** (-0.25) * np.exp(
            -np.asarray(y) ** 2 / (4.0 * self.sigma**2)
        )

    def momentum_variance(self) -> float:
        """Pointer momentum variance, computed from f by spectral quadrature."""
        df = spectral_derivative_array(self.f, self.grid_y, axis=0, order=1)
        return float(HBAR**2 * np.sum(np.abs(df) ** 2) * self.grid_y.cell_volume)


@dataclass(frozen=True, eq=False)
class ProtocolRecord:
    """Per-repetition readout pairs plus everything needed to re-run them."""

    p_w: np.ndarray
    x: np.ndarray
    seeds: np.ndarray
    M: int
    readout_kind: str
    tau: float
    bin_width: float
    grid: SpatialGrid
    master_seed: int
    estimator_scale: float
    support_ratio: float


@dataclass(frozen=True, eq=False)
class ConditionalEstimate:
    """Binned conditional means of the scaled readout with standard errors."""

    bin_centers: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    count: np.ndarray
    min_count: int

    @property
    def defined(self) -> np.ndarray:
        return self.count >= self.min_count


def make_ancilla(sigma: float, gamma: float, T: float, grid_y: SpatialGrid) -> AncillaModel:
    """Build and calibrate the Gaussian pointer state on its own grid."""
    if grid_y.ndim != 1:
        raise ConfigError("ancilla grid must be one dimensional")
    if sigma < 4.0 * grid_y.dx[0]:
        raise ResolutionError(f"pointer sigma={sigma} below resolvable limit 4*dy={4.0 * grid_y.dx[0]}")
    if gamma <= 0 or T <= 0:
        raise ConfigError("gamma and T must be positive")
    y = grid_y.coords(0)
    f = (2.0 * np.pi * sigma**2) ** (-0.25) * np.exp(-(y**2) / (4.0 * sigma**2))
    model = AncillaModel(float(sigma), float(gamma), float(T), grid_y, f)

    dy = grid_y.cell_volume
    dens = np.abs(f) ** 2
    norm = float(np.sum(dens) * dy)
    centroid = float(np.sum(y * dens) * dy)
    if abs(norm - 1.0) > 1e-9 or abs(centroid) > 1e-10:
        raise CalibrationError(f"pointer calibration failed: norm={norm}, <y>={centroid}")
    df = spectral_derivative_array(f, grid_y, axis=0, order=1)
    slope_moment = complex(np.sum(y * np.conj(f) * df) * dy)
    if abs(slope_moment - (-0.5)) > 1e-8:
        raise CalibrationError(f"pointer moment int y f f' dy = {slope_moment}, expected -1/2")
    return model


def _momentum_amplitudes(psi: WavefunctionGrid) -> np.ndarray:
    """Continuum-normalized psi(p) on the object's dual grid, FFT order."""
    g = psi.grid
    vhat = sfft.fft(np.asarray(psi.amplitudes))
    phase = np.exp(-1j * g.k(0) * g.x_min[0]) * (g.dx[0] / np.sqrt(2.0 * np.pi * HBAR))
    return vhat * phase


def _momentum_support_length(psi_p: np.ndarray, dk: float) -> float:
    dens = np.abs(psi_p) ** 2
    occupied = dens >= DENSITY_FLOOR_RATIO * dens.max()
    return float(np.count_nonzero(occupied) * dk)


def entangle(psi: WavefunctionGrid, ancilla: AncillaModel):
    """Exact post-interaction joint amplitude on the (p_s, y) product grid.

    Returns (p_values, y_values, joint) with joint[i, j] the amplitude at
    momentum p_i (fftshifted, monotonic) and pointer position y_j. Raises
    SupportOverflowError when the displaced pointer would leave the y-grid
    by less than a 5 sigma margin anywhere on the object's momentum support.
    """
    if psi.grid.ndim != 1:
        raise ConfigError("protocol runs couple 1D object states")
    gy = ancilla.grid_y
    p = sfft.fftshift(psi.grid.k(0)) * HBAR
    psi_p = sfft.fftshift(_momentum_amplitudes(psi))
    dens = np.abs(psi_p) ** 2
    occupied = dens >= DENSITY_FLOOR_RATIO * dens.max()
    shifts = ancilla.gamma_t * p[occupied]
    if shifts.size and (
        shifts.min() - 5.0 * ancilla.sigma < gy.x_min[0]
        or shifts.max() + 5.0 * ancilla.sigma > gy.x_max[0]
    ):
        raise SupportOverflowError(
            "displaced pointer leaves the ancilla grid: shift range "
            f"[{shifts.min():.4g}, {shifts.max():.4g}] with sigma={ancilla.sigma}"
        )
    y = gy.coords(0)
    joint = psi_p[:, None] * ancilla.pointer_amplitude(y[None, :] - ancilla.gamma_t * p[:, None])
    return p, y, joint


def _collapse_table(psi: WavefunctionGrid, ancilla: AncillaModel, tau: float,
                    cfg: EvolutionConfig, readout_kind: str):
    """Tabulate the protocol's sampling law over all discrete readouts.

    Returns (readout_values, readout_probs, conditional_x_density,
    collapsed_momentum_states, estimator_scale, support_ratio). Row r of
    conditional_x_density is the post-readout, tau-evolved position
    density given readout r. Works because the collapsed object state
    depends on the repetition only through the discrete readout value.
    """
    g = psi.grid
    gy = ancilla.grid_y
    gamma_t = ancilla.gamma_t
    psi_p = _momentum_amplitudes(psi)  # FFT order
    k = g.k(0)
    p = k * HBAR
    dk = 2.0 * np.pi / (g.n_points[0] * g.dx[0])
    support_ratio = gamma_t * _momentum_support_length(psi_p, dk) / ancilla.sigma

    if readout_kind == "position":
        # reuse entangle's margin check, then build collapse columns
        entangle(psi, ancilla)
        y = gy.coords(0)
        pointer = ancilla.pointer_amplitude(y[None, :] - gamma_t * p[:, None])
        joint = psi_p[:, None] * pointer  # (n_p, n_y)
        marginal = np.sum(np.abs(joint) ** 2, axis=0) * dk * gy.cell_volume
        readout_values = y / gamma_t
        collapsed_p = joint.T.copy()  # (n_y, n_p) rows: object state given y_j
        scale = 1.0
    elif readout_kind == "momentum":
        variance = ancilla.momentum_variance()
        if abs(variance - HBAR / 2.0) > 1e-8:
            raise CalibrationError(
                f"momentum readout needs a minimal-uncertainty pointer with "
                f"variance hbar/2; got {variance}"
            )
        pa = sfft.fftshift(gy.k(0)) * HBAR
        delta2 = variance
        f_tilde = (2.0 * np.pi * delta2) ** (-0.25) * np.exp(-(pa**2) / (4.0 * delta2))
        dpa = 2.0 * np.pi / (gy.n_points[0] * gy.dx[0])
        marginal = np.abs(f_tilde) ** 2 * dpa  # exact p_a marginal, psi-independent
        readout_values = pa
        collapsed_p = psi_p[None, :] * np.exp(-1j * gamma_t * p[None, :] * pa[:, None] / HBAR)
        scale = HBAR / (2.0 * gamma_t * delta2)
    else:
        raise ConfigError(f"unknown readout kind {readout_kind!r}")

    probs = marginal / marginal.sum()

    # back to position space: inverse of the continuum-normalized transform
    phase = np.exp(+1j * k * g.x_min[0]) / (g.dx[0] / np.sqrt(2.0 * np.pi * HBAR))
    collapsed_x = sfft.ifft(collapsed_p * phase[None, :], axis=1)
    norms = np.sqrt(np.sum(np.abs(collapsed_x) ** 2, axis=1) * g.cell_volume)
    norms[norms == 0.0] = 1.0
    collapsed_x = collapsed_x / norms[:, None]
    if tau > 0.0:
        collapsed_x = propagate_batch(collapsed_x, g, tau, cfg.disarmed())
    cond_density = np.abs(collapsed_x) ** 2 * g.cell_volume
    row_sums = cond_density.sum(axis=1, keepdims=True)
    row_sums[row_sums == 0.0] = 1.0
    cond_density = cond_density / row_sums
    return readout_values, probs, cond_density, collapsed_x, scale, support_ratio


def run_protocol(psi: WavefunctionGrid, ancilla: AncillaModel, tau: float,
                 cfg: EvolutionConfig, M: int, master_seed: int,
                 readout_kind: str = "position") -> ProtocolRecord:
    """Run M repetitions of the weak-measurement + post-selection protocol.

    Every repetition draws its readout from the exact joint marginal,
    collapses the object at grid resolution, evolves it for tau and draws
    the post-selection position from the exact conditional density. The
    record stores raw readouts: y/(gamma T) for position readout, the raw
    pointer momentum for momentum readout (its estimator scale is kept in
    the record and applied during conditional averaging).
    """
    if M < 0:
        raise ConfigError("M must be >= 0")
    g = psi.grid
    readout_values, probs, cond_density, _, scale, support_ratio = _collapse_table(
        psi, ancilla, tau, cfg, readout_kind
    )
    x_coords = g.coords(0)
    readout_cdf = np.cumsum(probs)
    readout_cdf[-1] = 1.0
    cond_cdf = np.cumsum(cond_density, axis=1)
    cond_cdf[:, -1] = 1.0

    p_w = np.empty(M)
    x_out = np.empty(M)
    seeds = np.arange(M, dtype=np.int64)
    for rep in range(M):
        rng = np.random.default_rng([master_seed, rep])
        u1, u2 = rng.random(2)
        j = int(np.searchsorted(readout_cdf, u1, side="left"))
        i = int(np.searchsorted(cond_cdf[j], u2, side="left"))
        p_w[rep] = readout_values[j]
        x_out[rep] = x_coords[i]

    return ProtocolRecord(
        p_w=p_w, x=x_out, seeds=seeds, M=int(M), readout_kind=readout_kind,
        tau=float(tau), bin_width=2.0 * g.dx[0], grid=g,
        master_seed=int(master_seed), estimator_scale=float(scale),
        support_ratio=float(support_ratio),
    )


def conditional_average(record: ProtocolRecord, bin_width: float | None = None,
                        min_count: int = DEFAULT_MIN_BIN_COUNT) -> ConditionalEstimate:
    """Histogram-binned conditional means of the scaled readout vs position.

    Bins cover the object domain; bins holding fewer than min_count samples
    are left undefined (NaN). Standard error is the sample std over
    sqrt(count).
    """
    if record.M == 0:
        raise InsufficientDataError("empty protocol record")
    width = record.bin_width if bin_width is None else float(bin_width)
    dx = record.grid.dx[0]
    if width < dx:
        raise BinningError(f"bin_width={width} is finer than the grid spacing {dx}")
    lo, hi = record.grid.x_min[0], record.grid.x_max[0]
    n_bins = int(np.ceil((hi - lo) / width))
    edges = lo + width * np.arange(n_bins + 1)
    idx = np.clip(np.floor((record.x - lo) / width).astype(int), 0, n_bins - 1)

    values = record.p_w * record.estimator_scale
    count = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=values, minlength=n_bins)
    sq_sums = np.bincount(idx, weights=values**2, minlength=n_bins)

    estimate = np.full(n_bins, np.nan)
    stderr = np.full(n_bins, np.nan)
    ok = count >= max(min_count, 2)
    mean = np.divide(sums, count, out=np.zeros(n_bins), where=count > 0)
    var = np.divide(sq_sums, count, out=np.zeros(n_bins), where=count > 0) - mean**2
    var = np.maximum(var, 0.0) * np.divide(count, np.maximum(count - 1, 1))
    estimate[ok] = mean[ok]
    stderr[ok] = np.sqrt(var[ok] / count[ok])
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ConditionalEstimate(centers, estimate, stderr, count, int(min_count))


def exact_conditional_mean(psi: WavefunctionGrid, ancilla: AncillaModel, tau: float,
                           cfg: EvolutionConfig, readout_kind: str = "position"):
    """Infinite-ensemble conditional mean E[scaled readout | x] on the grid.

    Computed from the same tabulated sampling law the Monte Carlo draws
    from, so it is the exact asymptotic limit of conditional_average.
    Returns (x, mean, marginal_x) with undefined entries NaN.
    """
    readout_values, probs, cond_density, _, scale, _ = _collapse_table(
        psi, ancilla, tau, cfg, readout_kind
    )
    joint = probs[:, None] * cond_density  # (readout, x)
    marginal_x = joint.sum(axis=0)
    num = (readout_values[:, None] * joint).sum(axis=0)
    mean = np.full(marginal_x.shape, np.nan)
    ok = marginal_x > 0
    mean[ok] = scale * num[ok] / marginal_x[ok]
    return psi.grid.coords(0), mean, marginal_x


def readout_fidelity(psi: WavefunctionGrid, ancilla: AncillaModel,
                     readout_kind: str = "position") -> float:
    """Marginal-weighted fidelity |<psi|psi_collapsed>|^2 of the post-readout state."""
    cfg = EvolutionConfig(dt=1.0, n_steps=0)
    _, probs, _, collapsed_x, _, _ = _collapse_table(psi, ancilla, 0.0, cfg, readout_kind)
    overlaps = np.abs(collapsed_x @ np.conj(psi.amplitudes) * psi.grid.cell_volume) ** 2
    return float(np.sum(probs * overlaps))


@dataclass(frozen=True, eq=False)
class BiasStudy:
    gamma_t: np.ndarray
    max_bias: np.ndarray
    mean_fidelity: np.ndarray
    slope: float


def bias_study(psi: WavefunctionGrid, ancillas: list[AncillaModel], tau: float,
               cfg: EvolutionConfig, readout_kind: str = "position",
               density_floor: float = 1e-4) -> BiasStudy:
    """Systematic bias of the conditional estimate vs the formal weak value.

    For each coupling strength the exact (infinite-M) conditional mean is
    compared pointwise with Re or Im of the formal weak value; the max
    absolute deviation over well-populated post-selection points (marginal
    above density_floor of its peak) is recorded together with the mean
    post-readout fidelity. The log-log slope of bias vs gamma*T is fitted
    across the supplied family.
    """
    if len(ancillas) < 2:
        raise ConfigError("bias study needs at least two coupling strengths")
    field: WeakValueField = formal_weak_value(psi, "momentum", tau=tau, cfg=cfg)
    truth = field.real if readout_kind == "position" else field.imag

    gamma_ts, biases, fidelities = [], [], []
    for anc in ancillas:
        xs, mean, marg = exact_conditional_mean(psi, anc, tau, cfg, readout_kind)
        sel = (marg > density_floor * marg.max()) & field.mask & np.isfinite(mean)
        bias = float(np.max(np.abs(mean[sel] - truth[sel])))
        gamma_ts.append(anc.gamma_t)
        biases.append(bias)
        fidelities.append(readout_fidelity(psi, anc, readout_kind))
    gamma_ts = np.asarray(gamma_ts)
    biases = np.asarray(biases)
    order = np.argsort(gamma_ts)
    gamma_ts, biases = gamma_ts[order], biases[order]
    fidelities = np.asarray(fidelities)[order]
    slope = float(np.polyfit(np.log(gamma_ts), np.log(np.maximum(biases, 1e-300)), 1)[0])
    return BiasStudy(gamma_ts, biases, fidelities, slope)


def record_to_columns(record: ProtocolRecord) -> dict[str, np.ndarray]:
    return {"k": np.arange(record.M), "seed": record.seeds, "p_w": record.p_w, "x": record.x}


def estimate_to_columns(est: ConditionalEstimate) -> dict[str, np.ndarray]:
    return {
        "bin_center": est.bin_centers,
        "estimate": est.estimate,
        "stderr": est.stderr,
        "count": est.count,
    }
