"""Prediction horizon and residual overlap amplitude, theory and measurement."""

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import csvio
from .errors import ContractViolation, DimensionError, DomainError, InsufficientDataError
from .evolution import overlap_series
from .perturbation import energy_dispersion

# Distinguished "horizon never reached" / "infinite horizon" value.
NOT_REACHED = math.inf

DEFAULT_THRESHOLD = 0.1
DEFAULT_WINDOW = 16
MIN_TAIL_SAMPLES = 100


def predict_horizon_theory(dE, hbar=1.0):
    """``pi hbar / dE``; returns NOT_REACHED for an error-free spectrum."""
    if dE < 0 or not math.isfinite(dE):
        raise DomainError(f"dispersion must be a finite non-negative number, got {dE!r}")
    if dE == 0:
        return NOT_REACHED
    return math.pi * hbar / dE


def amplitude_theory(dim):
    if dim < 1:
        raise DimensionError("dim must be at least 1")
    return 1.0 / math.sqrt(2.0 * dim)


def cosine_model(deltaE, hbar, T):
    """Mean of ``cos(dE_mu T / hbar)`` over the errors; vectorized over ``T``."""
    deltaE = np.asarray(deltaE, dtype=float).reshape(-1)
    if deltaE.size == 0:
        raise DimensionError("need at least one energy error")
    T = np.asarray(T, dtype=float)
    values = np.cos(np.multiply.outer(T, deltaE) / hbar).mean(axis=-1)
    return float(values) if values.ndim == 0 else values


def detect_horizon(series, threshold=DEFAULT_THRESHOLD, dim=None, window=DEFAULT_WINDOW):
    """First sustained drop of ``Re<psi|psi~>`` below ``threshold``.

    A sample ``t_k`` qualifies when ``overlap_re[k] < threshold`` and the next
    ``window`` samples all stay below ``3 / sqrt(2 dim)``. ``window=0``
    disables the confirmation, which gives the plain first crossing (used
    for a single cosine, whose first crossing is monotone). Returns
    NOT_REACHED when no sample qualifies.
    """
    if not 0 < threshold < 1:
        raise ContractViolation("threshold must lie in (0, 1)")
    values = np.asarray(series.overlap_re)
    times = np.asarray(series.times)
    if window and values.size < window + 1:
        raise InsufficientDataError(
            f"series has {values.size} samples, confirmation window needs {window + 1}")
    if window and dim is None:
        raise ContractViolation("dim is required when the confirmation window is enabled")
    ceiling = 3.0 * amplitude_theory(dim) if window else None
    below = np.flatnonzero(values < threshold)
    for k in below:
        if not window:
            return float(times[k])
        tail = values[k + 1:k + 1 + window]
        if tail.size < window:
            break
        if np.all(tail < ceiling):
            return float(times[k])
    return NOT_REACHED


def measure_amplitude(series, t_min, t_max=None):
    """RMS of ``Re<psi|psi~>`` over samples with ``t_min <= t (<= t_max)``."""
    times = np.asarray(series.times)
    mask = times >= t_min
    if t_max is not None:
        mask &= times <= t_max
    tail = np.asarray(series.overlap_re)[mask]
    if tail.size < MIN_TAIL_SAMPLES:
        raise InsufficientDataError(
            f"{tail.size} samples after t_min={t_min}, need {MIN_TAIL_SAMPLES}")
    return float(np.sqrt(np.mean(tail**2)))


@dataclass(frozen=True)
class HorizonReport:
    t_p_theory: float
    t_p_empirical: float
    amplitude_theory: float
    amplitude_empirical: float
    threshold: float
    dim: int
    dE: float

    def row(self):
        return (self.dim, self.dE, self.threshold, self.t_p_theory, self.t_p_empirical,
                self.amplitude_theory, self.amplitude_empirical)

    def as_dict(self):
        return asdict(self)


def write_reports(path, reports):
    return csvio.write_csv(path, csvio.HORIZON_HEADER, [r.row() for r in reports])


def horizon_report(model, pert, threshold=DEFAULT_THRESHOLD, window=DEFAULT_WINDOW,
                   samples_per_tp=200, tail=(10.0, 100.0), tail_samples=4000):
    """Measure horizon and tail amplitude for one model/perturbation pair.

    The detection grid resolves ``T_p`` with ``samples_per_tp`` points over
    ``[0, 4 T_p]``; the amplitude is the RMS over ``tail`` (in units of
    ``T_p``) sampled at ``tail_samples`` points.
    """
    dE = energy_dispersion(model, pert)
    tp = predict_horizon_theory(dE, model.hbar)
    if not math.isfinite(tp):
        return HorizonReport(tp, NOT_REACHED, amplitude_theory(model.dim), 1.0,
                             threshold, model.dim, dE)
    head = overlap_series(model, pert, np.linspace(0.0, 4.0 * tp, 4 * samples_per_tp + 1))
    tp_emp = detect_horizon(head, threshold, dim=model.dim, window=window)
    tail_series = overlap_series(
        model, pert, np.linspace(tail[0] * tp, tail[1] * tp, tail_samples))
    amp = measure_amplitude(tail_series, tail[0] * tp)
    return HorizonReport(tp, tp_emp, amplitude_theory(model.dim), amp, threshold, model.dim, dE)
