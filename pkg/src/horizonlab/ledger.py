"""Bit-operation accounting and adjustable-precision arithmetic.

Every arithmetic operation executed through a :class:`Meter` is charged to a
:class:`CostLedger` at the ledger's declared mantissa length ``n``: ``n`` per
addition or subtraction, ``n**2`` per multiplication or division. A
transcendental evaluation (sqrt, sin, exp, ...) is charged as a fixed number
of multiplications.
"""

from dataclasses import dataclass, field

import mpmath

from .errors import ContractViolation, DomainError

DEFAULT_EVAL_WEIGHT = 20
MIN_BITS = 8
HARDWARE_BITS = 53


@dataclass
class CostLedger:
    mantissa_bits: int
    adds: int = 0
    muls: int = 0
    divs: int = 0
    evals: int = 0
    eval_weight: int = field(default=DEFAULT_EVAL_WEIGHT, compare=False)

    def __post_init__(self):
        if int(self.mantissa_bits) < 1:
            raise ContractViolation("mantissa_bits must be positive")
        self.mantissa_bits = int(self.mantissa_bits)

    @property
    def model_cost(self):
        n = self.mantissa_bits
        return self.adds * n + (self.muls + self.divs) * n * n

    def charge(self, adds=0, muls=0, divs=0, evals=0):
        self.adds += int(adds)
        self.divs += int(divs)
        self.evals += int(evals)
        # a transcendental evaluation costs eval_weight multiplications
        self.muls += int(muls) + int(evals) * self.eval_weight

    def counts(self):
        return {"adds": self.adds, "muls": self.muls, "divs": self.divs, "evals": self.evals}

    def charge_counts(self, counts):
        """Add raw counters (as returned by :meth:`counts`) without re-weighting evals."""
        self.adds += int(counts["adds"])
        self.muls += int(counts["muls"])
        self.divs += int(counts["divs"])
        self.evals += int(counts["evals"])

    def merge(self, other):
        if other.mantissa_bits != self.mantissa_bits:
            raise ContractViolation("cannot merge ledgers with different mantissa lengths")
        self.charge_counts(other.counts())
        return self

    def rebased(self, mantissa_bits):
        """Same counters charged at a different mantissa length."""
        out = CostLedger(mantissa_bits, eval_weight=self.eval_weight)
        out.charge_counts(self.counts())
        return out

    def is_consistent(self):
        n = self.mantissa_bits
        return self.model_cost == self.adds * n + (self.muls + self.divs) * n * n


class Meter:
    """Arithmetic at ``ledger.mantissa_bits`` of working precision, with accounting.

    Values are mpmath floats rounded to exactly the declared precision, so the
    working precision equals the charged precision at any ``n``.
    """

    def __init__(self, ledger):
        if ledger.mantissa_bits < MIN_BITS:
            raise ContractViolation(f"mantissa length must be at least {MIN_BITS} bits")
        self.ledger = ledger
        self.ctx = mpmath.MPContext()
        self.ctx.prec = ledger.mantissa_bits

    @property
    def bits(self):
        return self.ledger.mantissa_bits

    def const(self, x):
        return self.ctx.mpf(x)

    def pi(self):
        return +self.ctx.pi

    def add(self, a, b):
        self.ledger.charge(adds=1)
        return self.ctx.fadd(a, b)

    def sub(self, a, b):
        self.ledger.charge(adds=1)
        return self.ctx.fsub(a, b)

    def mul(self, a, b):
        self.ledger.charge(muls=1)
        return self.ctx.fmul(a, b)

    def div(self, a, b):
        if b == 0:
            raise DomainError("division by zero")
        self.ledger.charge(divs=1)
        return self.ctx.fdiv(a, b)

    def neg(self, a):
        return -a

    def evaluate(self, name, a):
        fn = getattr(self.ctx, name)
        if name in ("sqrt", "log") and a < 0 or name == "log" and a == 0:
            raise DomainError(f"{name} of {a}")
        self.ledger.charge(evals=1)
        return fn(a)

    def sqrt(self, a):
        return self.evaluate("sqrt", a)

    def sin(self, a):
        return self.evaluate("sin", a)

    def cos(self, a):
        return self.evaluate("cos", a)

    def exp(self, a):
        return self.evaluate("exp", a)

    def wrap(self, x, period):
        """``x mod period`` as ``x - period * floor(x / period)``."""
        q = self.ctx.floor(self.div(x, period))
        return self.sub(x, self.mul(period, q))
