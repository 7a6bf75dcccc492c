"""Log-space combinatorics for the factorial-heavy series used throughout bosrec.

Every factorial ratio in the reconstruction sums is evaluated as a difference of
log-factorials with the sign carried separately; direct factorials overflow long
before the series depths we need (n + m up to ~60 and beyond).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TABLE_SIZE = 512


class TableSizeError(ValueError):
    """A factorial argument fell outside the precomputed table."""


@dataclass(frozen=True)
class LogFactorialTable:
    size: int = DEFAULT_TABLE_SIZE
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("table size must be positive")
        # math.log of the exact big integer is correctly rounded, unlike a cumsum of logs
        vals = np.array([math.log(math.factorial(n)) for n in range(self.size + 1)])
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __call__(self, n: int) -> float:
        if n < 0:
            raise ValueError(f"log_factorial of negative argument {n}")
        if n > self.size:
            raise TableSizeError(
                f"log_factorial({n}) exceeds table size {self.size}; "
                f"construct LogFactorialTable(size>={n})"
            )
        return float(self.values[n])


_default_table = LogFactorialTable()


def default_table() -> LogFactorialTable:
    return _default_table


def log_factorial(n: int, table: LogFactorialTable | None = None) -> float:
    """ln(n!) looked up from ``table`` (the shared 512-entry table by default)."""
    return (table or _default_table)(n)


def _inv_fact(n: int) -> Fraction:
    # empty-product convention: 1/(negative)! contributes zero
    if n < 0:
        return Fraction(0)
    return Fraction(1, math.factorial(n))


def vandermonde_check(a: int, b: int, d: int) -> tuple[Fraction, Fraction]:
    """Both sides of the inverse-factorial Vandermonde convolution, exactly.

    lhs = sum_{c=0..d} 1 / [c! (d-c)! (b-c)! (a-d-b+c)!]
    rhs = a! / [b! d! (a-b)! (a-d)!]
    """
    if min(a, b, d) < 0:
        raise ValueError(f"vandermonde_check needs non-negative arguments, got {(a, b, d)}")
    lhs = sum(
        (_inv_fact(c) * _inv_fact(d - c) * _inv_fact(b - c) * _inv_fact(a - d - (b - c))
         for c in range(d + 1)),
        Fraction(0),
    )
    if b > a or d > a:
        rhs = Fraction(0)
    else:
        rhs = Fraction(math.factorial(a)) * _inv_fact(b) * _inv_fact(d) * _inv_fact(a - b) * _inv_fact(a - d)
    return lhs, rhs


def hyp2f1_negint(m: int, n: int, q: int, table: LogFactorialTable | None = None) -> float:
    """2F1(-m, -n; -n-m-q; 1) = (n+q)! (m+q)! / [q! (n+m+q)!] for non-negative integers."""
    if min(m, n, q) < 0:
        raise ValueError(f"hyp2f1_negint needs non-negative integers, got {(m, n, q)}")
    lf = table or _default_table
    return math.exp(lf(n + q) + lf(m + q) - lf(q) - lf(n + m + q))


def hyp2f1_terminating_series(m: int, n: int, q: int) -> Fraction:
    """Term-by-term sum of 2F1(-m, -n; -n-m-q; 1) in exact rationals.

    The series stops at j = min(m, n) because a Pochhammer (-m)_j vanishes there,
    before the denominator (-n-m-q)_j can reach zero.
    """
    total = Fraction(0)
    term = Fraction(1)
    c = -n - m - q
    for j in range(min(m, n) + 1):
        total += term
        if j < min(m, n):
            term = term * (-m + j) * (-n + j) / ((c + j) * (j + 1))
    return total


def signed_logsum(terms: Iterable[tuple[int, float]]) -> float:
    """sum(sign * exp(log_magnitude)) with a max shift and exactly-rounded accumulation."""
    terms = list(terms)
    if not terms:
        return 0.0
    finite = [lm for _, lm in terms if lm != -math.inf]
    if not finite:
        return 0.0
    shift = max(finite)
    acc = math.fsum(s * math.exp(lm - shift) for s, lm in terms if lm != -math.inf)
    if acc == 0.0:
        return 0.0
    log_result = math.log(abs(acc)) + shift
    if log_result > 709.78:
        return math.copysign(math.inf, acc)
    return acc * math.exp(shift) if shift < 709 else math.copysign(math.exp(log_result), acc)


def complex_fsum(values: Sequence[complex]) -> complex:
    """Exactly-rounded sum of complex values (real and imaginary parts separately)."""
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def power0(base: float, exponent: int) -> float:
    # 0**0 == 1 is required for exact t=0 behaviour of the closed forms
    if exponent == 0:
        return 1.0
    return base ** exponent
