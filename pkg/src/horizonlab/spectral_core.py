"""States and spectra represented by coefficients in the exact eigenbasis.

Spatial eigenfunctions never materialize: a state is its coefficient vector
over the eigenbasis index ``mu``, a spectrum is the list of eigenenergies plus
the expansion coefficients of the initial state.
"""

from dataclasses import dataclass

import numpy as np

from . import csvio
from .errors import ContractViolation, DegenerateInputError, DimensionError

CONSTRUCT_TOL = 1e-12
PRECONDITION_TOL = 1e-9


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Exact eigenenergies and initial-state coefficients of a stationary system.

    Parameters
    ----------
    energies : array_like of float
        Eigenenergies ``E_mu``.
    coefficients : array_like of complex
        ``c_mu``, the overlaps of the initial state with each eigenstate.
        Must be normalized to 1 within 1e-12.
    hbar : float
        Reduced Planck constant in the chosen units.
    """

    energies: np.ndarray
    coefficients: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        energies = _frozen(self.energies, float)
        coefficients = _frozen(self.coefficients, complex)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "hbar", float(self.hbar))
        if energies.size == 0:
            raise DimensionError("spectral model needs at least one term")
        if energies.size != coefficients.size:
            raise DimensionError(
                f"{energies.size} energies but {coefficients.size} coefficients")
        if not np.all(np.isfinite(energies)):
            raise ContractViolation("energies must be finite")
        if not self.hbar > 0:
            raise ContractViolation("hbar must be positive")
        norm2 = float(np.vdot(coefficients, coefficients).real)
        if abs(norm2 - 1.0) > CONSTRUCT_TOL:
            raise ContractViolation(f"coefficients not normalized: sum |c|^2 = {norm2!r}")

    @property
    def dim(self):
        return self.energies.size

    @classmethod
    def equal_coefficients(cls, energies, hbar=1.0):
        """Model whose initial state has every ``c_mu = 1/sqrt(dim)``."""
        energies = np.asarray(energies, dtype=float)
        if energies.size == 0:
            raise DimensionError("spectrum needs at least one level")
        c = np.full(energies.size, 1.0 / np.sqrt(energies.size), dtype=complex)
        return cls(energies, c, hbar)

    @classmethod
    def oscillator_ladder(cls, dim, omega=1.0, hbar=1.0, coefficients=None):
        energies = hbar * omega * (np.arange(dim) + 0.5)
        if coefficients is None:
            return cls.equal_coefficients(energies, hbar)
        return cls(energies, coefficients, hbar)

    def initial_state(self):
        return WaveState(self.coefficients, 0.0)

    def to_csv(self, path):
        rows = [(mu, e, c.real, c.imag)
                for mu, (e, c) in enumerate(zip(self.energies, self.coefficients))]
        return csvio.write_csv(path, csvio.SPECTRUM_HEADER, rows)

    @classmethod
    def from_csv(cls, path, hbar=1.0):
        cols = csvio.read_csv(path, csvio.SPECTRUM_HEADER)
        mu = csvio.float_column(cols, "mu").astype(int)
        order = np.argsort(mu, kind="stable")
        energies = csvio.float_column(cols, "energy")[order]
        c = (csvio.float_column(cols, "re_c") + 1j * csvio.float_column(cols, "im_c"))[order]
        return cls(energies, c, hbar)


@dataclass(frozen=True, eq=False)
class WaveState:
    """Eigenbasis amplitudes of a normalized pure state at a given time."""

    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        amps = _frozen(self.amplitudes, complex)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "time", float(self.time))
        if amps.size == 0:
            raise DimensionError("state needs at least one amplitude")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > CONSTRUCT_TOL:
            raise ContractViolation(f"state not normalized: norm^2 = {norm2!r}")

    @property
    def dim(self):
        return self.amplitudes.size

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


def _amplitudes(state):
    return state.amplitudes if isinstance(state, WaveState) else np.asarray(state, dtype=complex)


def inner_product(a, b):
    """Return ``<a|b> = sum_mu conj(a_mu) b_mu``."""
    va, vb = _amplitudes(a), _amplitudes(b)
    if va.shape != vb.shape:
        raise DimensionError(f"length mismatch: {va.size} vs {vb.size}")
    return complex(np.vdot(va, vb))


def deviation_norm(a, b):
    """Distance ``sqrt(2 (1 - Re<a|b>))`` between two normalized states.

    For normalized inputs this equals the Euclidean norm of ``a - b``.
    """
    va, vb = _amplitudes(a), _amplitudes(b)
    for name, v in (("a", va), ("b", vb)):
        n = np.linalg.norm(v)
        if abs(n - 1.0) > PRECONDITION_TOL:
            raise ContractViolation(f"state {name} is not normalized (norm {n!r})")
    overlap = inner_product(va, vb)
    return float(np.sqrt(max(0.0, 2.0 * (1.0 - overlap.real))))


def normalize(a):
    """Rescale amplitudes to unit norm. Accepts a WaveState or a raw vector."""
    if isinstance(a, WaveState):
        v, t = a.amplitudes, a.time
    else:
        v, t = np.asarray(a, dtype=complex).reshape(-1), 0.0
    if v.size == 0:
        raise DimensionError("cannot normalize an empty vector")
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise DegenerateInputError("cannot normalize a zero vector")
    return WaveState(v / n, t)
