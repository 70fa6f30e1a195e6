"""Exact and approximate spectral propagation and overlap time series."""

from dataclasses import dataclass

import numpy as np

from . import csvio
from .errors import ContractViolation, DimensionError
from .spectral_core import WaveState, normalize

DIAGONAL = "diagonal"
FULL = "full"

# samples x terms evaluated per block when summing phases
_BLOCK_ELEMENTS = 1 << 22


def linear_grid(t_max, num, t_min=0.0):
    return np.linspace(t_min, t_max, int(num))


def log_grid(t_min, t_max, num):
    if t_min <= 0:
        raise ContractViolation("log grid needs t_min > 0")
    return np.geomspace(t_min, t_max, int(num))


@dataclass(frozen=True, eq=False)
class OverlapSeries:
    """Samples of ``<psi(T)|psi~(T)>`` and ``||psi~(T) - psi(T)||``."""

    times: np.ndarray
    overlap_re: np.ndarray
    overlap_im: np.ndarray
    deviation: np.ndarray

    def __len__(self):
        return self.times.size

    @property
    def overlap(self):
        return self.overlap_re + 1j * self.overlap_im

    @classmethod
    def from_overlap(cls, times, overlap):
        overlap = np.asarray(overlap, dtype=complex)
        dev = np.sqrt(np.maximum(0.0, 2.0 * (1.0 - overlap.real)))
        return cls(np.asarray(times, dtype=float), overlap.real.copy(), overlap.imag.copy(), dev)

    def rows(self):
        return zip(self.times, self.overlap_re, self.overlap_im, self.deviation)

    def to_csv(self, path):
        return csvio.write_csv(path, csvio.SERIES_HEADER, self.rows())

    @classmethod
    def from_csv(cls, path):
        cols = csvio.read_csv(path, csvio.SERIES_HEADER)
        f = lambda name: csvio.float_column(cols, name)  # noqa: E731
        return cls(f("time"), f("overlap_re"), f("overlap_im"), f("deviation"))


def _check_paired(pert, model):
    if pert.dim != model.dim:
        raise DimensionError(f"perturbed dim {pert.dim} != model dim {model.dim}")


def evolve_exact(model, T):
    """State at time ``T``: amplitudes ``c_mu exp(-i E_mu T / hbar)``."""
    phases = np.exp(-1j * model.energies * (T / model.hbar))
    return WaveState(model.coefficients * phases, T)


def evolve_approx(pert, model, T, mode=DIAGONAL):
    """Predicted state at time ``T`` expressed in the exact eigenbasis.

    In diagonal mode the amplitudes are ``c~_mu exp(-i E~_mu T / hbar)``. In
    full mode they are further mixed by ``(1 + R)``; the approximate
    eigenfunctions are not orthonormal, so that result is renormalized.
    """
    _check_paired(pert, model)
    if mode not in (DIAGONAL, FULL):
        raise ValueError(f"unknown mode {mode!r}")
    amps = pert.coefficients_approx * np.exp(-1j * pert.energies_approx * (T / model.hbar))
    if mode == FULL and pert.residuals is not None:
        amps = normalize(amps + pert.residuals @ amps).amplitudes
    return WaveState(amps, T)


def phase_sum(weights, frequencies, times):
    """``sum_mu w_mu exp(-i f_mu t)`` for every ``t``, phases recomputed per sample."""
    weights = np.asarray(weights, dtype=complex)
    frequencies = np.asarray(frequencies, dtype=float)
    times = np.asarray(times, dtype=float)
    out = np.empty(times.size, dtype=complex)
    step = max(1, _BLOCK_ELEMENTS // max(1, frequencies.size))
    for start in range(0, times.size, step):
        t = times[start:start + step]
        out[start:start + step] = np.exp(-1j * np.outer(t, frequencies)) @ weights
    return out


def overlap_series(model, pert, times, mode=DIAGONAL):
    """Sample ``<psi(T)|psi~(T)>`` on ``times`` and derive the deviation norm.

    Diagonal mode sums ``conj(c_mu) c~_mu exp(-i dE_mu T / hbar)`` directly
    from the energy errors, so the phase does not lose digits to large
    ``E_mu T``. Full mode propagates both states and mixes the approximate
    one through the residual matrix.
    """
    _check_paired(pert, model)
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0:
        raise DimensionError("empty time grid")
    if np.any(np.diff(times) <= 0):
        raise ContractViolation("times must be strictly increasing")
    if mode == DIAGONAL:
        w = np.conj(model.coefficients) * pert.coefficients_approx
        freq = (pert.energies_approx - model.energies) / model.hbar
        overlap = phase_sum(w, freq, times)
    elif mode == FULL:
        overlap = np.empty(times.size, dtype=complex)
        for k, t in enumerate(times):
            exact = evolve_exact(model, t)
            approx = evolve_approx(pert, model, t, FULL)
            overlap[k] = np.vdot(exact.amplitudes, approx.amplitudes)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return OverlapSeries.from_overlap(times, overlap)


def unitarity_check(model, state_a, state_b, times):
    """Max drift of ``<A(t)|B(t)>`` from its initial value under exact evolution.

    Both states are evolved with the energies of ``model``; their own
    amplitudes replace the model coefficients.
    """
    a = np.asarray(getattr(state_a, "amplitudes", state_a), dtype=complex)
    b = np.asarray(getattr(state_b, "amplitudes", state_b), dtype=complex)
    if a.size != model.dim or b.size != model.dim:
        raise DimensionError("states and model have different dimensions")
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ContractViolation("states must be normalized")
    times = np.asarray(times, dtype=float).reshape(-1)
    initial = np.vdot(a, b)
    phases = np.exp(-1j * np.outer(times, model.energies / model.hbar))
    at = phases * a
    bt = phases * b
    overlaps = np.einsum("ij,ij->i", np.conj(at), bt)
    return float(np.max(np.abs(overlaps - initial))) if times.size else 0.0
