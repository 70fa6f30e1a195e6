"""Approximate spectra built from an error budget.

The approximate eigenenergies are ``E_mu + dE_mu`` with ``dE_mu`` drawn from a
seeded distribution, the approximate coefficients are perturbed by at most
``dE_coeff`` per component, and optionally a residual matrix
``R[mu, nu] = <phi_mu|delta phi_nu>`` with ``|R| < epsilon`` is sampled.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import csvio
from .errors import ContractViolation, DimensionError


class ErrorKind(str, enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    FIXED = "fixed"


@dataclass(frozen=True)
class ErrorDistribution:
    """Distribution of eigenvalue errors.

    ``scale`` is the half-width for ``uniform``, the standard deviation for
    ``gaussian`` and the constant shift for ``fixed``.
    """

    kind: ErrorKind = ErrorKind.UNIFORM
    scale: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ErrorKind(self.kind))
        if not self.scale > 0:
            raise ContractViolation("error scale must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")

    @classmethod
    def uniform_with_dispersion(cls, dispersion, seed=0):
        """Uniform distribution whose standard deviation is ``dispersion``."""
        return cls(ErrorKind.UNIFORM, float(np.sqrt(3.0) * dispersion), seed)

    def sample(self, size, rng):
        if self.kind is ErrorKind.FIXED:
            return np.full(size, self.scale)
        if self.kind is ErrorKind.UNIFORM:
            return rng.uniform(-self.scale, self.scale, size)
        return rng.normal(0.0, self.scale, size)


@dataclass(frozen=True, eq=False)
class PerturbedSpectrum:
    energies_approx: np.ndarray
    coefficients_approx: np.ndarray
    residuals: np.ndarray | None
    epsilon: float
    energy_errors: np.ndarray

    @property
    def dim(self):
        return self.energies_approx.size

    def check_against(self, model):
        """Raise ContractViolation if the error-budget invariants fail."""
        if model.dim != self.dim:
            raise DimensionError(f"model dim {model.dim} != perturbed dim {self.dim}")
        dc = np.abs(self.coefficients_approx - model.coefficients)
        if self.epsilon > 0:
            if np.any(dc >= self.epsilon):
                raise ContractViolation("|delta c| >= epsilon")
            if self.residuals is not None and np.any(np.abs(self.residuals) >= self.epsilon):
                raise ContractViolation("|R| >= epsilon")
        elif np.any(dc > 0) or (self.residuals is not None and np.any(self.residuals != 0)):
            raise ContractViolation("non-zero coefficient error with epsilon = 0")

    def to_csv(self, path, model):
        rows = [
            (mu, e, ea, c.real, c.imag, ca.real, ca.imag)
            for mu, (e, ea, c, ca) in enumerate(zip(
                model.energies, self.energies_approx, model.coefficients,
                self.coefficients_approx))
        ]
        return csvio.write_csv(path, csvio.PERTURBED_HEADER, rows)


def exact_spectrum(model):
    """Zero-error PerturbedSpectrum paired with ``model``."""
    return PerturbedSpectrum(
        energies_approx=model.energies.copy(),
        coefficients_approx=model.coefficients.copy(),
        residuals=None,
        epsilon=0.0,
        energy_errors=np.zeros(model.dim),
    )


def _disk(rng, size, radius):
    # strictly inside the disk: sqrt(u) with u in [0, 1)
    r = radius * np.sqrt(rng.random(size))
    phase = rng.uniform(0.0, 2 * np.pi, size)
    return r * np.exp(1j * phase)


def sample_perturbed(model, dist, dE_coeff=0.0, residual_eps=None):
    """Draw an approximate spectrum for ``model``.

    Parameters
    ----------
    model : SpectralModel
    dist : ErrorDistribution
        Distribution of the eigenvalue errors ``dE_mu``, drawn independently.
    dE_coeff : float
        Bound on ``|c~_mu - c_mu|``. The perturbed coefficients are
        renormalized; the raw perturbation is shrunk until the bound still
        holds after renormalization.
    residual_eps : float, optional
        If given, sample the residual matrix ``R`` with ``|R| < residual_eps``.
        Otherwise ``residuals`` is None and propagation uses the diagonal
        approximation.

    The result is a deterministic function of ``dist.seed``.
    """
    if dE_coeff < 0:
        raise ContractViolation("dE_coeff must be non-negative")
    rng = np.random.default_rng(int(dist.seed))
    dim = model.dim
    dE = dist.sample(dim, rng)

    c = model.coefficients
    c_approx = c.copy()
    if dE_coeff > 0:
        raw = _disk(rng, dim, dE_coeff)
        while True:
            trial = c + raw
            trial = trial / np.linalg.norm(trial)
            if np.all(np.abs(trial - c) < dE_coeff):
                c_approx = trial
                break
            raw = 0.5 * raw

    residuals = None
    if residual_eps is not None:
        if residual_eps <= 0:
            raise ContractViolation("residual_eps must be positive")
        residuals = _disk(rng, (dim, dim), residual_eps)

    epsilon = max(float(dE_coeff), float(residual_eps or 0.0))
    return PerturbedSpectrum(
        energies_approx=model.energies + dE,
        coefficients_approx=c_approx,
        residuals=residuals,
        epsilon=epsilon,
        energy_errors=dE,
    )


def energy_dispersion(model, pert):
    """``|c_mu|^2``-weighted population standard deviation of the energy errors."""
    if model.dim == 0 or pert.dim == 0:
        raise DimensionError("empty spectrum")
    if model.dim != pert.dim:
        raise DimensionError(f"model dim {model.dim} != perturbed dim {pert.dim}")
    w = np.abs(model.coefficients) ** 2
    w = w / w.sum()
    dE = pert.energies_approx - model.energies
    mean = np.dot(w, dE)
    return float(np.sqrt(max(0.0, np.dot(w, (dE - mean) ** 2))))


@dataclass(frozen=True)
class RayleighError:
    delta_E: float
    bound: float
    epsilon: float
    eigenvalue: float

    def __float__(self):
        return self.delta_E


def rayleigh_energy_error(H, phi, delta_phi, tol=1e-10):
    """Eigenvalue shift produced by an eigenvector error.

    For an eigenpair ``H phi = E phi`` with ``|phi| = 1`` returns
    ``2 E Re<phi|dphi> + <dphi|H|dphi>``, which equals
    ``<phi+dphi|H|phi+dphi> - E`` identically, together with the bound
    ``2 |E| eps + eps^2 ||H||`` where ``eps = ||dphi||`` and ``||H||`` is the
    spectral norm.
    """
    H = np.asarray(H, dtype=float)
    v = np.asarray(phi.amplitudes if hasattr(phi, "amplitudes") else phi, dtype=complex)
    d = np.asarray(delta_phi, dtype=complex).reshape(-1)
    n = H.shape[0]
    if H.shape != (n, n) or v.size != n or d.size != n:
        raise DimensionError("H, phi and delta_phi dimensions disagree")
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ContractViolation("H must be symmetric")
    Hv = H @ v
    E = float(np.vdot(v, Hv).real / np.vdot(v, v).real)
    h_norm = float(np.linalg.norm(H, 2))
    if np.linalg.norm(Hv - E * v) > tol * max(1.0, h_norm):
        raise ContractViolation("phi is not an eigenvector of H")
    delta_E = 2.0 * E * np.vdot(v, d).real + np.vdot(d, H @ d).real
    eps = float(np.linalg.norm(d))
    return RayleighError(float(delta_E), 2 * abs(E) * eps + eps**2 * h_norm, eps, E)
