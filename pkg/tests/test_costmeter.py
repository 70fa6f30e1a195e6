import math

import mpmath
import numpy as np
import pytest

from horizonlab.costmeter import (
    Classification, ModelKind, bits_for_accuracy, call, classify_scaling, const,
    integrable_spectrum_cost, linear_fit, precise_eval, prediction_cost_curve, var,
)
from horizonlab.errors import ContractViolation, DomainError, InsufficientDataError
from horizonlab.ledger import CostLedger, Meter


def test_ledger_cost_formula():
    led = CostLedger(10)
    led.charge(adds=3, muls=2, divs=1, evals=1)
    assert led.muls == 22
    assert led.model_cost == 3 * 10 + 23 * 100
    assert led.rebased(20).model_cost == 3 * 20 + 23 * 400


def test_merge_requires_same_bits():
    with pytest.raises(ContractViolation):
        CostLedger(10).merge(CostLedger(11))


def test_meter_precision_is_exact():
    m = Meter(CostLedger(24))
    third = m.div(m.const(1), m.const(3))
    assert third == mpmath.mpf(1) / 3 or abs(float(third) - 1 / 3) < 2**-23
    assert abs(float(third) - 1 / 3) > 2**-60
    with pytest.raises(DomainError):
        m.div(m.const(1), m.const(0))


def test_precise_eval_counts_and_shared_nodes():
    x = var("x")
    y = x * x
    prog = [y + 1, y - 1]
    (a, b), led = precise_eval(prog, 53, env={"x": 3.0})
    assert float(a) == 10.0 and float(b) == 8.0
    assert led.muls == 1 and led.adds == 2


def test_precise_eval_transcendental_weight():
    v, led = precise_eval(call("sin", const(0.5)), 64)
    assert float(v) == pytest.approx(math.sin(0.5))
    assert led.evals == 1 and led.muls == 20


def test_integrable_spectrum_cost():
    led, energies = integrable_spectrum_cost(5, 32, hbar=1.0, omega=2.0)
    np.testing.assert_allclose([float(e) for e in energies], 2 * (np.arange(5) + 0.5))
    assert led.muls == 1 + 5 and led.adds == 5


def test_linear_fit_exact_and_flat():
    s, b, r2 = linear_fit([1, 2, 3], [3, 5, 7])
    assert (s, b, r2) == pytest.approx((2, 1, 1))
    assert linear_fit([1, 2, 3], [4, 4, 4])[2] == 1.0


def test_classify_power_and_polylog():
    T = np.logspace(2, 10, 9)
    p = classify_scaling(T, 5 * T**0.7)
    assert p.model_kind is ModelKind.POWER_LAW
    assert p.classification is Classification.INCOMPRESSIBLE
    assert p.exponent == pytest.approx(0.7)
    q = classify_scaling(T, 3 * np.log2(T) ** 2)
    assert q.model_kind is ModelKind.POLY_LOG
    assert q.classification is Classification.COMPRESSIBLE


def test_classify_flat_is_ambiguous():
    T = np.logspace(2, 10, 9)
    assert classify_scaling(T, np.full(9, 7.0)).classification is Classification.AMBIGUOUS


def test_classify_contracts():
    with pytest.raises(InsufficientDataError):
        classify_scaling([10, 100], [1, 2])
    with pytest.raises(InsufficientDataError):
        classify_scaling([10, 20, 40], [1, 2, 3], min_decades=3)


def test_bits_for_accuracy():
    assert bits_for_accuracy(100.0, 1e-3) == math.ceil(math.log2(1e5))
    assert bits_for_accuracy(1.0, 0.5) == 8


def test_stub_pipeline():
    def pipeline(T, dE):
        n = math.ceil(4 * math.log2(T))
        led = CostLedger(n)
        led.charge(muls=10)
        return n, 1, led

    curve = prediction_cost_curve(pipeline, np.logspace(2, 12, 11))
    assert curve.fit.classification is Classification.COMPRESSIBLE
    with pytest.raises(InsufficientDataError):
        prediction_cost_curve(pipeline, [10.0, 20.0, 30.0])
