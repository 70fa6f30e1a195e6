"""Instrumented prediction-cost pipelines and scaling-law classification.

The cost of predicting a state at time ``T`` is measured in model bit
operations (see :mod:`horizonlab.ledger`). The required eigenvalue accuracy
follows from the horizon law ``dE = pi hbar / T``. Integrable spectra come
from a closed formula at ``n ~ -log2 dE`` bits; nonintegrable spectra come
from Ritz diagonalization at a basis size obtained by inverting the measured
convergence law. A cost curve is then classified as poly-logarithmic in
``T`` (compressible) or power law (incompressible).
"""

import enum
import math
import numbers
from dataclasses import dataclass, field

import numpy as np

from . import csvio, ritz
from .errors import ContractViolation, InsufficientDataError
from .ledger import MIN_BITS, CostLedger, Meter

# Both the r^2 gap and the winning exponent must clear these for a verdict.
R2_MARGIN = 0.02
MIN_EXPONENT = 0.1


# -- arithmetic expression graphs --------------------------------------------

class Expr:
    """Node of an arithmetic expression graph built with Python operators."""

    __slots__ = ("op", "args")

    def __init__(self, op, *args):
        self.op = op
        self.args = args

    @staticmethod
    def wrap(x):
        return x if isinstance(x, Expr) else Expr("const", x)

    def __add__(self, other):
        return Expr("add", self, Expr.wrap(other))

    def __radd__(self, other):
        return Expr("add", Expr.wrap(other), self)

    def __sub__(self, other):
        return Expr("sub", self, Expr.wrap(other))

    def __rsub__(self, other):
        return Expr("sub", Expr.wrap(other), self)

    def __mul__(self, other):
        return Expr("mul", self, Expr.wrap(other))

    def __rmul__(self, other):
        return Expr("mul", Expr.wrap(other), self)

    def __truediv__(self, other):
        return Expr("div", self, Expr.wrap(other))

    def __rtruediv__(self, other):
        return Expr("div", Expr.wrap(other), self)

    def __repr__(self):
        return f"Expr({self.op}, {', '.join(map(repr, self.args))})"


def const(x):
    return Expr("const", x)


def var(name):
    return Expr("var", name)


def call(fn, x):
    """Transcendental node: ``fn`` is one of sqrt, sin, cos, exp, log."""
    return Expr("fn", fn, Expr.wrap(x))


def precise_eval(program, n, ledger=None, env=None):
    """Evaluate an expression graph at ``n`` bits of precision.

    ``program`` is an :class:`Expr` or a sequence of them; shared sub-graphs
    are evaluated once. Returns ``(value, ledger)`` where ``value`` is an
    mpmath float (or a list for sequence input).
    """
    if n < MIN_BITS:
        raise ContractViolation(f"mantissa length must be at least {MIN_BITS} bits")
    if ledger is None:
        ledger = CostLedger(n)
    elif ledger.mantissa_bits != n:
        raise ContractViolation("ledger mantissa length differs from n")
    env = env or {}
    meter = Meter(ledger)
    memo = {}

    def ev(node):
        key = id(node)
        if key in memo:
            return memo[key]
        op = node.op
        if op == "const":
            out = meter.const(node.args[0])
        elif op == "var":
            out = meter.const(env[node.args[0]])
        elif op == "fn":
            out = meter.evaluate(node.args[0], ev(node.args[1]))
        else:
            a, b = ev(node.args[0]), ev(node.args[1])
            out = getattr(meter, op)(a, b)
        memo[key] = out
        return out

    if isinstance(program, Expr):
        return ev(program), ledger
    return [ev(p) for p in program], ledger


def integrable_spectrum_cost(N_levels, n, hbar=1.0, omega=1.0):
    """Closed-form oscillator spectrum ``E_N`` for ``N < N_levels`` at ``n`` bits.

    ``hbar * omega`` is formed once, then each level costs one addition and
    one multiplication. Returns ``(ledger, energies)``.
    """
    if N_levels < 1:
        raise ContractViolation("N_levels must be at least 1")
    quantum = const(hbar) * const(omega)
    program = [quantum * (const(k) + 0.5) for k in range(int(N_levels))]
    energies, ledger = precise_eval(program, n)
    return ledger, energies


# -- scaling fits ------------------------------------------------------------

class ModelKind(str, enum.Enum):
    POWER_LAW = "power_law"
    POLY_LOG = "poly_log"


class Classification(str, enum.Enum):
    COMPRESSIBLE = "compressible"
    INCOMPRESSIBLE = "incompressible"
    AMBIGUOUS = "ambiguous"


def linear_fit(x, y):
    """Least-squares slope, intercept and r^2 (1.0 for an exactly fitted flat line)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xd = x - x.mean()
    yd = y - y.mean()
    sxx = float(np.dot(xd, xd))
    slope = float(np.dot(xd, yd)) / sxx if sxx > 0 else 0.0
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float(np.dot(yd, yd))
    ss_res = float(np.sum((yd - slope * xd) ** 2))
    if ss_tot <= 1e-24 * max(1.0, float(np.dot(y, y))):
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, intercept, r2


@dataclass(frozen=True)
class ScalingFit:
    """Competing fits ``a T^p`` and ``a (log2 T)^q`` of a cost curve."""

    xs: tuple
    ys: tuple
    model_kind: ModelKind
    exponent: float
    r2: float
    classification: Classification
    power_exponent: float
    power_r2: float
    polylog_exponent: float
    polylog_r2: float

    def summary_row(self, system):
        return (system, self.model_kind.value, self.exponent, self.r2,
                self.classification.value)


def classify_scaling(xs, ys, min_decades=None):
    """Fit both scaling forms and apply the decision rule.

    The form with the larger r^2 wins; the verdict is ambiguous when the two
    r^2 differ by less than 0.02 or the winning exponent is below 0.1.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size or xs.size < 3:
        raise InsufficientDataError("need at least three (x, y) points")
    if np.any(xs <= 1) or np.any(ys <= 0):
        raise ContractViolation("scaling fits need x > 1 and y > 0")
    if min_decades is not None and math.log10(xs.max() / xs.min()) < min_decades - 1e-9:
        raise InsufficientDataError(f"x must span at least {min_decades} decades")
    ly = np.log(ys)
    p, _, r2_pow = linear_fit(np.log(xs), ly)
    q, _, r2_log = linear_fit(np.log(np.log2(xs)), ly)
    if r2_pow >= r2_log:
        kind, exponent, r2 = ModelKind.POWER_LAW, p, r2_pow
    else:
        kind, exponent, r2 = ModelKind.POLY_LOG, q, r2_log
    if abs(r2_pow - r2_log) < R2_MARGIN or exponent < MIN_EXPONENT:
        verdict = Classification.AMBIGUOUS
    elif kind is ModelKind.POWER_LAW:
        verdict = Classification.INCOMPRESSIBLE
    else:
        verdict = Classification.COMPRESSIBLE
    return ScalingFit(tuple(xs), tuple(ys), kind, exponent, r2, verdict, p, r2_pow, q, r2_log)


# -- prediction cost pipelines -----------------------------------------------

def bits_for_accuracy(scale, dE):
    """Mantissa bits to carry a value of magnitude ``scale`` to absolute accuracy ``dE``."""
    return max(MIN_BITS, math.ceil(math.log2(max(scale, dE) / dE) - 1e-12))


def ritz_spectrum_cost(h, D=None, dE=None, study=None, n_bits=None, cache=None):
    """Ledger of assembling and diagonalizing the Ritz matrix of ``h``.

    Either ``D`` is given, or it is derived from the accuracy ``dE`` through
    ``study.required_dim`` (the inverted convergence law). The solver runs in
    hardware double precision; operations are charged at ``n_bits``
    (default: bits needed for ``dE`` relative to the top tracked level, or 53).
    """
    if D is None:
        if dE is None or study is None:
            raise ContractViolation("give D, or dE together with a convergence study")
        D = study.required_dim(dE)
    if n_bits is None:
        if dE is not None and study is not None:
            n_bits = bits_for_accuracy(float(np.max(np.abs(study.reference))), dE)
        else:
            n_bits = ritz.HARDWARE_BITS
    ledger = CostLedger(n_bits)
    ritz.ritz_solve(h, D, ledger=ledger, cache=cache)
    return ledger


def cost_exponent(h, dims, n_bits=ritz.HARDWARE_BITS, cache=None):
    """Measured exponent beta of the Ritz cost ``~ D^beta`` (per-mode D)."""
    dims = np.asarray(dims, dtype=float)
    costs = [ritz_spectrum_cost(h, int(D), n_bits=n_bits, cache=cache).model_cost for D in dims]
    beta, _, r2 = linear_fit(np.log(dims), np.log(costs))
    return beta, r2, costs


@dataclass
class CostCurve:
    """Rows of a cost scan plus the fitted scaling verdict."""

    system: str
    rows: list
    fit: ScalingFit
    metadata: dict = field(default_factory=dict)

    def write(self, path):
        return csvio.write_csv(path, csvio.COST_SCAN_HEADER, self.rows)


# The pipelines realize upper bounds of specific algorithms; the minimal cost
# over all algorithms is not measurable.
UPPER_BOUND_NOTE = "costs are upper bounds realized by this pipeline, not algorithmic minima"

DEFAULT_STUDY = {"coupling": 0.1, "dims": (6, 8, 10, 12, 14), "levels": 10, "reference_D": 24}


def default_nonintegrable_study(cache=None):
    h = ritz.ModelHamiltonian.coupled_quartic(DEFAULT_STUDY["coupling"])
    return ritz.convergence_study(h, DEFAULT_STUDY["dims"], DEFAULT_STUDY["levels"],
                                  DEFAULT_STUDY["reference_D"], cache=cache)


def prediction_cost_curve(system_kind, T_values, hbar=1.0, n_levels=100, omega=1.0,
                          study=None, cache=None, min_decades=3):
    """Cost of predicting to each time in ``T_values`` and its scaling verdict.

    ``system_kind`` is ``"integrable"``, ``"nonintegrable"`` or a callable
    ``pipeline(T, dE) -> (n_bits, D, ledger)``.
    """
    T_values = np.asarray(sorted(float(t) for t in T_values))
    if T_values.size < 3 or math.log10(T_values.max() / T_values.min()) < min_decades - 1e-9:
        raise InsufficientDataError(f"T values must span at least {min_decades} decades")

    metadata = {"note": UPPER_BOUND_NOTE}
    if callable(system_kind):
        pipeline, name = system_kind, getattr(system_kind, "__name__", "custom")
    elif system_kind == "integrable":
        name = "integrable"
        scale = hbar * omega * (n_levels - 0.5)

        def pipeline(T, dE):
            n = bits_for_accuracy(scale, dE)
            return n, n_levels, integrable_spectrum_cost(n_levels, n, hbar, omega)[0]
    elif system_kind == "nonintegrable":
        name = "nonintegrable"
        if study is None:
            study = default_nonintegrable_study(cache)
        h = study.model
        scale = float(np.max(np.abs(study.reference)))
        metadata.update(alpha_hat=study.fitted_alpha, alpha_r2=study.fit_r2)
        counts = {}

        def pipeline(T, dE):
            D = study.required_dim(dE)
            n = bits_for_accuracy(scale, dE)
            if D not in counts:
                counts[D] = ritz_spectrum_cost(h, D, n_bits=n, cache=cache).counts()
            ledger = CostLedger(n)
            ledger.charge_counts(counts[D])
            return n, D, ledger
    else:
        raise ContractViolation(f"unknown system kind {system_kind!r}")

    rows = []
    for T in T_values:
        dE = math.pi * hbar / T
        n, D, ledger = pipeline(T, dE)
        if not isinstance(D, numbers.Integral):
            D = int(D)
        rows.append((T, dE, n, D, ledger.adds, ledger.muls, ledger.divs, ledger.model_cost))
    fit = classify_scaling(T_values, [r[-1] for r in rows])
    return CostCurve(name, rows, fit, metadata)
