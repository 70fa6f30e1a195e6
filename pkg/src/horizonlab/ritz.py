"""Rayleigh-Ritz eigenvalues in truncated harmonic-oscillator bases.

Two model Hamiltonians are supported (units with mass 1):

* ``harmonic_1d``: ``p^2/2 + omega^2 q^2/2``, diagonal in its own basis.
* ``coupled_quartic_2d``: ``sum_k (p_k^2 + omega_k^2 q_k^2)/2 + lambda q_1^2 q_2^2``,
  in the product basis of the two uncoupled oscillators, ``D`` states per mode.

Matrix elements come from closed-form ladder-operator formulas; eigenvalues
come from a cyclic Jacobi rotation solver whose operations are charged to a
:class:`~horizonlab.ledger.CostLedger`.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (
    CapacityError,
    ContractViolation,
    ConvergenceError,
    DimensionError,
    InsufficientDataError,
    ReferenceQualityError,
)
from .ledger import HARDWARE_BITS, CostLedger

DEFAULT_TOL = 1e-12
DEFAULT_MAX_SWEEPS = 64
MEMORY_BUDGET = 2 << 30  # bytes for one dense matrix


class ModelKind(str, enum.Enum):
    HARMONIC_1D = "harmonic_1d"
    COUPLED_QUARTIC_2D = "coupled_quartic_2d"


@dataclass(frozen=True)
class ModelHamiltonian:
    kind: ModelKind
    omega: tuple = (1.0,)
    coupling: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        kind = ModelKind(self.kind)
        omega = self.omega
        if np.isscalar(omega):
            omega = (float(omega),)
        omega = tuple(float(w) for w in omega)
        modes = 1 if kind is ModelKind.HARMONIC_1D else 2
        if len(omega) == 1:
            omega = omega * modes
        if len(omega) != modes:
            raise ContractViolation(f"{kind.value} needs {modes} frequencies")
        if any(w <= 0 for w in omega) or self.hbar <= 0:
            raise ContractViolation("omega and hbar must be positive")
        if self.coupling < 0:
            raise ContractViolation("coupling must be non-negative")
        if kind is ModelKind.HARMONIC_1D and self.coupling != 0:
            raise ContractViolation("harmonic_1d has no coupling")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "coupling", float(self.coupling))
        object.__setattr__(self, "hbar", float(self.hbar))

    @classmethod
    def harmonic(cls, omega=1.0, hbar=1.0):
        return cls(ModelKind.HARMONIC_1D, (omega,), 0.0, hbar)

    @classmethod
    def coupled_quartic(cls, coupling, omega=1.0, hbar=1.0):
        return cls(ModelKind.COUPLED_QUARTIC_2D, omega, coupling, hbar)

    @property
    def modes(self):
        return len(self.omega)

    def matrix_dim(self, D):
        return D**self.modes

    def key(self):
        return {"model": self.kind.value, "omega": list(self.omega),
                "lambda": self.coupling, "hbar": self.hbar}


@dataclass
class RitzResult:
    basis_dim: int
    eigenvalues: np.ndarray
    matrix_dim: int
    op_count: CostLedger
    eigenvectors: np.ndarray | None = field(default=None, repr=False)


# -- matrix elements ---------------------------------------------------------

def _oscillator_diag(D, omega, hbar, ledger):
    """``hbar omega (n + 1/2)`` for n < D: one add and two muls per element."""
    ledger.charge(adds=D, muls=2 * D)
    return hbar * omega * (np.arange(D) + 0.5)


def _q2_ladder(D, omega, hbar, ledger):
    """Diagonal and second off-diagonal of ``q^2`` in the oscillator basis.

    ``<n|q^2|n> = (hbar/omega)(n + 1/2)`` and
    ``<n|q^2|n+2> = (hbar/(2 omega)) sqrt((n+1)(n+2))``.
    """
    n = np.arange(D, dtype=float)
    scale = hbar / omega
    off_n = n[:max(D - 2, 0)]
    ledger.charge(divs=1, adds=D, muls=D)
    ledger.charge(adds=2 * off_n.size, muls=2 * off_n.size, evals=off_n.size)
    diag = scale * (n + 0.5)
    off = 0.5 * scale * np.sqrt((off_n + 1.0) * (off_n + 2.0))
    return diag, off


def _banded(diag, off):
    Q = np.diag(diag)
    if off.size:
        idx = np.arange(off.size)
        Q[idx, idx + 2] = off
        Q[idx + 2, idx] = off
    return Q


def build_matrix(h, D, ledger=None, memory_budget=MEMORY_BUDGET):
    """Hamiltonian matrix in the truncated oscillator (product) basis.

    Basis index for the 2d model is ``n1 * D + n2``. The coupling block is the
    Kronecker product of two exactly symmetric ``q^2`` matrices, so the result
    is symmetric bit for bit without any symmetrization pass.
    """
    if int(D) < 1:
        raise DimensionError("basis size D must be at least 1")
    D = int(D)
    m = h.matrix_dim(D)
    if m * m * 8 > memory_budget:
        raise CapacityError(f"{m}x{m} matrix exceeds memory budget of {memory_budget} bytes")
    if ledger is None:
        ledger = CostLedger(HARDWARE_BITS)
    if h.kind is ModelKind.HARMONIC_1D:
        return np.diag(_oscillator_diag(D, h.omega[0], h.hbar, ledger))

    e1 = _oscillator_diag(D, h.omega[0], h.hbar, ledger)
    e2 = _oscillator_diag(D, h.omega[1], h.hbar, ledger)
    H = np.diag(np.add.outer(e1, e2).reshape(-1))
    ledger.charge(adds=m)
    if h.coupling == 0.0:
        return H
    Q1 = _banded(*_q2_ladder(D, h.omega[0], h.hbar, ledger))
    Q2 = _banded(*_q2_ladder(D, h.omega[1], h.hbar, ledger))
    V = np.kron(Q1, Q2)
    V *= h.coupling
    # each stored element of the upper triangle: Q1*Q2 and the lambda factor
    nnz_upper = int(np.count_nonzero(np.triu(V)))
    ledger.charge(muls=2 * nnz_upper, adds=m)
    return H + V


# -- cyclic Jacobi -----------------------------------------------------------

@njit(cache=True)
def _jacobi_kernel(a, v, tol_abs, max_sweeps):
    n = a.shape[0]
    rotations = 0
    checks = 0
    for _ in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = math.sqrt(2.0 * off)
        checks += 1
        if off < tol_abs:
            return rotations, checks, True
        if checks > max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    if k != p and k != q:
                        akp = a[k, p]
                        akq = a[k, q]
                        nkp = c * akp - s * akq
                        nkq = s * akp + c * akq
                        a[k, p] = nkp
                        a[p, k] = nkp
                        a[k, q] = nkq
                        a[q, k] = nkq
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
                rotations += 1
    return rotations, checks, False


def _charge_jacobi(ledger, m, rotations, checks):
    # initial Frobenius norm
    ledger.charge(adds=m * m, muls=m * m, evals=1)
    # off-diagonal norm once per sweep check
    pairs = m * (m - 1) // 2
    ledger.charge(adds=checks * pairs, muls=checks * (pairs + 1), evals=checks)
    # per rotation: angle, tangent, cosine, sine, diagonal update,
    # (m - 2) off-diagonal pairs and m eigenvector rows
    ledger.charge(
        adds=rotations * (6 + 2 * (m - 2) + 2 * m),
        muls=rotations * (6 + 4 * (m - 2) + 4 * m),
        divs=rotations * 3,
        evals=rotations * 2,
    )


def eigensolve(matrix, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS, ledger=None):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps visit pairs ``(p, q)`` in row order until the off-diagonal
    Frobenius norm drops below ``tol * ||matrix||_F``.

    Returns
    -------
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray
        Orthonormal columns matching ``eigenvalues``.
    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("matrix must be square")
    m = a.shape[0]
    if m == 0:
        raise DimensionError("empty matrix")
    scale = np.abs(a).max()
    if np.abs(a - a.T).max() > 1e-12 * max(scale, 1e-300):
        raise ContractViolation("matrix is not symmetric")
    if ledger is None:
        ledger = CostLedger(HARDWARE_BITS)
    if m == 1:
        return a.diagonal().copy(), np.ones((1, 1))
    v = np.eye(m)
    tol_abs = tol * np.linalg.norm(a)
    rotations, checks, converged = _jacobi_kernel(a, v, tol_abs, int(max_sweeps))
    _charge_jacobi(ledger, m, rotations, checks)
    if not converged:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    evals = a.diagonal().copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], v[:, order]


# -- Ritz driver -------------------------------------------------------------

def parity_blocks(h, D):
    """Index sets of the parity sectors; the coupling only connects n to n +- 2."""
    if h.kind is ModelKind.HARMONIC_1D:
        n = np.arange(D)
        return [np.flatnonzero(n % 2 == r) for r in (0, 1)]
    n1, n2 = np.divmod(np.arange(D * D), D)
    return [np.flatnonzero((n1 % 2 == r1) & (n2 % 2 == r2)) for r1 in (0, 1) for r2 in (0, 1)]


def ritz_solve(h, D, ledger=None, tol=DEFAULT_TOL, use_blocks=True, vectors=False,
               cache=None):
    """Ritz eigenvalues of ``h`` with ``D`` basis states per mode.

    Parity-sector reduction changes only the work done, not the spectrum.
    When ``cache`` is given (an object with ``get(key)`` / ``put(key, values,
    counts)``) a stored spectrum and its operation counts are reused.
    """
    if ledger is None:
        ledger = CostLedger(HARDWARE_BITS)
    D = int(D)
    key = None
    if cache is not None and not vectors:
        key = dict(h.key(), D=D, tol=tol, blocks=bool(use_blocks))
        hit = cache.get(key)
        if hit is not None:
            values, counts = hit
            ledger.charge_counts(counts)
            return RitzResult(D, values, h.matrix_dim(D), ledger)
    local = CostLedger(ledger.mantissa_bits, eval_weight=ledger.eval_weight)
    H = build_matrix(h, D, local)
    m = H.shape[0]
    if use_blocks:
        values = np.empty(m)
        vecs = np.zeros((m, m)) if vectors else None
        col = 0
        for idx in parity_blocks(h, D):
            if idx.size == 0:
                continue
            w, u = eigensolve(H[np.ix_(idx, idx)], tol=tol, ledger=local)
            values[col:col + idx.size] = w
            if vectors:
                vecs[idx, col:col + idx.size] = u
            col += idx.size
        order = np.argsort(values, kind="stable")
        values = values[order]
        if vectors:
            vecs = vecs[:, order]
    else:
        values, vecs = eigensolve(H, tol=tol, ledger=local)
    if key is not None:
        cache.put(key, values, local.counts())
    ledger.charge_counts(local.counts())
    return RitzResult(D, values, m, ledger, vecs if vectors else None)


def variational_upper_bound_check(h, D_small, D_large, levels=None, tol=1e-10):
    """True iff the lowest Ritz values do not increase from D_small to D_large.

    Truncated oscillator bases are nested, so Courant-Fischer requires every
    tracked level to be non-increasing.
    """
    if D_small > D_large:
        raise ContractViolation("trial spaces are not nested: D_small > D_large")
    small = ritz_solve(h, D_small).eigenvalues
    large = ritz_solve(h, D_large).eigenvalues
    k = small.size if levels is None else min(levels, small.size)
    scale = max(1.0, np.abs(small[:k]).max())
    return bool(np.all(large[:k] <= small[:k] + tol * scale))


# -- convergence study -------------------------------------------------------

@dataclass
class ConvergenceStudy:
    """Eigenvalue errors against a large-basis reference and their power-law fit.

    ``errors[i, mu]`` is the error of level ``mu`` at ``dims[i]``. The fit
    shares one slope across levels (separate intercepts) over the window
    ``fit_dims``; ``fitted_alpha`` is minus that slope.
    """

    model: ModelHamiltonian
    dims: np.ndarray
    errors: np.ndarray
    reference: np.ndarray
    reference_D: int
    fitted_alpha: float
    fit_r2: float
    fit_dims: np.ndarray
    log_intercepts: np.ndarray
    exact: bool = False

    def rows(self):
        for i, D in enumerate(self.dims):
            for mu in range(self.errors.shape[1]):
                yield int(D), mu, float(self.errors[i, mu])

    def summary_row(self):
        return (self.model.kind.value, self.model.coupling, self.fitted_alpha, self.fit_r2)

    def required_dim(self, dE, minimum=None):
        """Basis size per mode reaching accuracy ``dE`` by the fitted power law.

        Inverts ``error = C D^-alpha`` with the worst level's ``C``.
        """
        if minimum is None:
            minimum = max(1, math.ceil(math.sqrt(self.errors.shape[1])))
        if self.exact or not math.isfinite(self.fitted_alpha):
            return int(minimum)
        log_c = float(np.max(self.log_intercepts))
        D = math.exp((log_c - math.log(dE)) / self.fitted_alpha)
        return max(int(minimum), int(math.ceil(D - 1e-9)))


def _within_fit(x, Y):
    """Common slope of the columns of Y against x, with per-column intercepts."""
    xd = x - x.mean()
    Yd = Y - Y.mean(axis=0)
    sxx = float(np.sum(xd**2)) * Y.shape[1]
    slope = float(np.sum(xd[:, None] * Yd)) / sxx
    resid = Yd - slope * xd[:, None]
    ss_tot = float(np.sum(Yd**2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    intercepts = Y.mean(axis=0) - slope * x.mean()
    return slope, min(1.0, max(0.0, r2)), intercepts


def convergence_study(h, dims, levels, reference_D, tol=DEFAULT_TOL, cache=None,
                      exact_floor=1e-12):
    dims = np.array(sorted(int(d) for d in dims))
    if dims.size == 0 or np.any(np.diff(dims) <= 0):
        raise ContractViolation("dims must be strictly increasing")
    if reference_D <= dims.max():
        raise ContractViolation("reference_D must exceed every studied D")
    if h.matrix_dim(int(dims[0])) < levels:
        raise ContractViolation(f"smallest basis has fewer than {levels} states")
    reference = ritz_solve(h, reference_D, tol=tol, cache=cache).eigenvalues[:levels]
    errors = np.array([
        np.abs(ritz_solve(h, D, tol=tol, cache=cache).eigenvalues[:levels] - reference)
        for D in dims
    ])
    scale = max(1.0, float(np.abs(reference).max()))
    floor = exact_floor * scale
    # Ritz values decrease monotonically in nested spaces, so errors must too
    if np.any(np.diff(errors, axis=0) > floor):
        raise ReferenceQualityError("errors grow with D; reference not converged")

    fit_dims = dims[2:] if dims.size > 2 else dims
    if np.all(errors <= floor):
        return ConvergenceStudy(h, dims, errors, reference, reference_D, math.inf, 1.0,
                                fit_dims, np.full(levels, -math.inf), exact=True)
    if fit_dims.size < 2:
        raise InsufficientDataError("need at least two dims in the fit window")
    window = errors[dims.size - fit_dims.size:]
    live = np.all(window > floor, axis=0)
    if not np.any(live):
        raise InsufficientDataError("every level is converged to round-off in the fit window")
    slope, r2, intercepts = _within_fit(np.log(fit_dims), np.log(window[:, live]))
    log_c = np.full(levels, -math.inf)
    log_c[live] = intercepts
    return ConvergenceStudy(h, dims, errors, reference, reference_D, -slope, r2,
                            fit_dims, log_c)
