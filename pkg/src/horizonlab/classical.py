"""Classical counterpart: trajectory divergence and mantissa-driven prediction cost.

Integrable exemplar: the rigid rotation map (and the free rotor, the standard
map at ``K = 0``). Chaotic exemplar: the Chirikov standard map

    p' = p + K sin(theta),   theta' = theta + p'  (mod 2 pi)
"""

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import csvio
from .costmeter import classify_scaling, linear_fit
from .errors import ContractViolation, DegenerateInputError, SaturationError
from .ledger import MIN_BITS, CostLedger, Meter

TWO_PI = 2.0 * math.pi
SATURATION = 0.1
TRANSIENT = 10
# execution precision cap when instrumenting a single map step
MAX_EXEC_BITS = 4096


class MapKind(str, enum.Enum):
    ROTATION = "rotation"
    STANDARD = "standard"


@dataclass(frozen=True)
class PhaseMap:
    """Map kind, its parameter (rotation number or kick K) and the current state."""

    kind: MapKind
    parameter: float
    theta: float = 0.0
    p: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MapKind(self.kind))
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)


def step(m):
    """One iteration of the map in double precision."""
    if m.kind is MapKind.ROTATION:
        return replace(m, theta=(m.theta + TWO_PI * m.parameter) % TWO_PI)
    p = m.p + m.parameter * math.sin(m.theta)
    return replace(m, theta=(m.theta + p) % TWO_PI, p=p)


def jacobian(m):
    """Derivative of one step with respect to ``(theta, p)``."""
    if m.kind is MapKind.ROTATION:
        return np.eye(2)
    kc = m.parameter * math.cos(m.theta)
    return np.array([[1.0 + kc, 1.0], [kc, 1.0]])


def tangent_lyapunov(m, steps=20000, transient=100):
    """Largest Lyapunov exponent per step from products of step Jacobians."""
    for _ in range(transient):
        m = step(m)
    v = np.array([1.0, 1.0]) / math.sqrt(2.0)
    total = 0.0
    for _ in range(steps):
        v = jacobian(m) @ v
        norm = math.hypot(v[0], v[1])
        total += math.log(norm)
        v /= norm
        m = step(m)
    return total / steps


class PreciseOrbit:
    """A map trajectory carried at ``meter.bits`` of precision with op accounting."""

    def __init__(self, m, meter, theta=None, p=None):
        self.kind = m.kind
        self.meter = meter
        self.param = meter.const(m.parameter)
        self.two_pi = meter.const(2) * meter.pi()
        self.theta = meter.const(m.theta if theta is None else theta)
        self.p = meter.const(m.p if p is None else p)
        if self.kind is MapKind.ROTATION:
            self.shift = meter.mul(self.two_pi, self.param)

    def advance(self):
        mt = self.meter
        if self.kind is MapKind.ROTATION:
            self.theta = mt.wrap(mt.add(self.theta, self.shift), self.two_pi)
        else:
            self.p = mt.add(self.p, mt.mul(self.param, mt.sin(self.theta)))
            self.theta = mt.wrap(mt.add(self.theta, self.p), self.two_pi)


def torus_separation(theta1, p1, theta2, p2, two_pi=TWO_PI):
    """Euclidean distance using the nearest winding image in theta."""
    dt = (theta1 - theta2) % two_pi
    if dt > two_pi / 2:
        dt = two_pi - dt
    return math.hypot(float(dt), float(p1 - p2))


class FitKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    POLYNOMIAL = "polynomial"


@dataclass
class DivergenceSeries:
    """Separation of two nearby trajectories and the growth law fitted to it.

    ``rate`` is the exponent ``lambda`` of an exponential fit or the degree of
    a polynomial fit; the fit covers steps from the transient cut up to the
    first saturated sample.
    """

    steps: np.ndarray
    separation: np.ndarray
    fit_kind: FitKind
    rate: float
    r2: float
    intercept: float
    window: tuple
    alternatives: dict = field(default_factory=dict)

    def log2_growth(self, T, delta0):
        """``log2 f(T)`` with ``f`` taken from the fitted law, relative to ``delta0``."""
        if self.fit_kind is FitKind.EXPONENTIAL:
            log_sep = self.intercept + self.rate * T
        else:
            log_sep = self.intercept + self.rate * math.log(T)
        return (log_sep - math.log(delta0)) / math.log(2.0)

    def to_csv(self, path):
        return csvio.write_csv(path, csvio.DIVERGENCE_HEADER, zip(self.steps, self.separation))


def divergence_growth(m, delta0, steps, n, direction=(1.0, 1.0)):
    """Evolve two trajectories ``delta0`` apart at ``n`` bits and fit their divergence.

    The initial offset points along ``direction``. Exponential
    (``log sep`` vs ``t``) and polynomial (``log sep`` vs ``log t``) laws are
    both fitted over ``[TRANSIENT, first sample >= SATURATION)``; the larger
    r^2 wins, ties going to the polynomial law.
    """
    if delta0 == 0:
        raise DegenerateInputError("zero initial separation: separation stays 0, no fit")
    if delta0 < 0:
        raise ContractViolation("delta0 must be positive")
    if n < MIN_BITS:
        raise ContractViolation(f"n must be at least {MIN_BITS}")
    if delta0 < 2.0 ** (-(n - 8)):
        raise SaturationError(
            f"delta0={delta0:g} is not resolved at {n} bits; raise n or increase delta0")
    meter = Meter(CostLedger(n))
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    a = PreciseOrbit(m, meter)
    b = PreciseOrbit(m, meter,
                     theta=meter.add(a.theta, meter.const(delta0 * d[0])),
                     p=meter.add(a.p, meter.const(delta0 * d[1])))
    two_pi = a.two_pi
    seps = np.empty(steps + 1)
    seps[0] = torus_separation(a.theta, a.p, b.theta, b.p, two_pi)
    for t in range(1, steps + 1):
        a.advance()
        b.advance()
        seps[t] = torus_separation(a.theta, a.p, b.theta, b.p, two_pi)

    saturated = np.flatnonzero(seps >= SATURATION)
    end = int(saturated[0]) if saturated.size else steps + 1
    if end < TRANSIENT + 3:
        raise SaturationError(
            f"separation saturates at step {end}; use a smaller delta0 or a higher n")
    if end < 2 * steps / 3:
        raise SaturationError(
            f"separation saturates at step {end} of {steps}, before 2/3 of the run; "
            "use a smaller delta0, a higher n, or fewer steps")

    t = np.arange(TRANSIENT, end, dtype=float)
    y = np.log(seps[TRANSIENT:end])
    if np.ptp(y) < 1e-9:
        # isometry: constant separation up to round-off
        lam, b_exp, r2_exp = 0.0, float(y.mean()), 1.0
        deg, b_pol, r2_pol = 0.0, float(y.mean()), 1.0
    else:
        lam, b_exp, r2_exp = linear_fit(t, y)
        deg, b_pol, r2_pol = linear_fit(np.log(t), y)
    alternatives = {"exponential": (lam, r2_exp), "polynomial": (deg, r2_pol)}
    steps_axis = np.arange(steps + 1)
    if r2_exp > r2_pol:
        return DivergenceSeries(steps_axis, seps, FitKind.EXPONENTIAL, lam, r2_exp, b_exp,
                                (TRANSIENT, end), alternatives)
    return DivergenceSeries(steps_axis, seps, FitKind.POLYNOMIAL, deg, r2_pol, b_pol,
                            (TRANSIENT, end), alternatives)


def required_mantissa(fT, delta):
    """``log2 f(T) - log2 delta``, floored at 8 bits."""
    if fT < 1 or delta <= 0:
        raise ContractViolation("need f(T) >= 1 and delta > 0")
    return max(float(MIN_BITS), math.log2(fT) - math.log2(delta))


def _mantissa_from_log2(log2_fT, delta):
    return max(float(MIN_BITS), max(0.0, log2_fT) - math.log2(delta))


def step_cost(m, n):
    """Ledger of one instrumented map step at ``n`` bits (counts do not depend on n)."""
    exec_bits = min(max(int(math.ceil(n)), MIN_BITS), MAX_EXEC_BITS)
    meter = Meter(CostLedger(exec_bits))
    orbit = PreciseOrbit(m, meter)
    before = meter.ledger.counts()
    orbit.advance()
    after = meter.ledger.counts()
    return {k: after[k] - before[k] for k in after}


@dataclass
class ClassicalCostResult:
    map_kind: str
    growth: DivergenceSeries
    rows: list
    mantissa_model: object
    measured: object
    alpha_model: float

    def write(self, path):
        return csvio.write_csv(path, csvio.CLASSICAL_COST_HEADER, self.rows)


DEFAULT_MAPS = {
    "chaotic": PhaseMap(MapKind.STANDARD, 7.0, 1.0, 0.0),
    "integrable": PhaseMap(MapKind.STANDARD, 0.0, 1.0, 0.5),
}


def classical_cost_curve(map_kind, T_values, delta, alpha_model=2.0, growth=None,
                         delta0=1e-60, growth_steps=None, n_growth=256, min_decades=3):
    """Prediction cost versus horizon ``T`` under two cost notions.

    ``mantissa_model`` charges ``n(T)**alpha_model`` with ``n(T)`` the mantissa
    needed for accuracy ``delta`` at time ``T``. ``measured`` charges ``T``
    instrumented map steps at ``n(T)`` bits. ``map_kind`` is ``"chaotic"``,
    ``"integrable"``, a :class:`PhaseMap`, or a callable ``T -> cost`` stub.
    """
    T_values = np.asarray(sorted(float(t) for t in T_values))
    if callable(map_kind):
        costs = [float(map_kind(T)) for T in T_values]
        fit = classify_scaling(T_values, costs, min_decades=min_decades)
        return ClassicalCostResult("stub", None, [], fit, fit, alpha_model)
    m = DEFAULT_MAPS[map_kind] if isinstance(map_kind, str) else map_kind
    name = map_kind if isinstance(map_kind, str) else m.kind.value
    if growth is None:
        if growth_steps is None:
            growth_steps = _default_growth_steps(m, delta0)
        growth = divergence_growth(m, delta0, growth_steps, n_growth)

    rows = []
    model_costs = []
    measured_costs = []
    for T in T_values:
        n = _mantissa_from_log2(growth.log2_growth(T, delta0), delta)
        bits = int(math.ceil(n))
        modeled = n**alpha_model
        counts = step_cost(m, bits)
        ledger = CostLedger(bits)
        ledger.charge_counts({k: v * int(round(T)) for k, v in counts.items()})
        model_costs.append(modeled)
        measured_costs.append(ledger.model_cost)
        rows.append((T, delta, bits, 1, 0, 0, 0, modeled, "mantissa_model"))
        rows.append((T, delta, bits, 1, ledger.adds, ledger.muls, ledger.divs,
                     ledger.model_cost, "measured"))
    model_fit = classify_scaling(T_values, model_costs, min_decades=min_decades)
    measured_fit = classify_scaling(T_values, measured_costs, min_decades=min_decades)
    return ClassicalCostResult(name, growth, rows, model_fit, measured_fit, alpha_model)


def _default_growth_steps(m, delta0):
    if m.kind is MapKind.STANDARD and m.parameter > 0:
        lam = max(0.5, tangent_lyapunov(m, steps=5000))
        # saturation after roughly log(SATURATION/delta0)/lam steps
        return int(math.log(SATURATION / delta0) / lam * 1.2)
    return 200
