"""Closed-form dynamics of two bilinearly coupled damped oscillators.

Mode M1 starts in an arbitrary state, M2 and both baths in vacuum. The Heisenberg
solution then only enters through two complex envelopes,

    a_1(t) = f_1(t) a_1(0) + (terms annihilating the vacuum of M2 and the baths)
    a_2(t) = f_2(t) a_1(0) + ...

so that every normally-ordered moment at time t is a moment of the initial M1 state
scaled by powers of f_1, f_2. Joint and reduced density matrices follow.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import density as dm
from .density import DensityMatrix
from .numerics import default_table, power0
from .reconstruction import (
    CoherentProvider,
    MatrixMomentProvider,
    SMALL_TERM_RUN,
    ThermalProvider,
    TruncationError,
    TruncationPolicy,
)

# |x| t below this switches to the Taylor form of cosh and sinh(x t)/x
TAYLOR_THRESHOLD = 1e-4
# envelope magnitudes below this are rounding noise (|f| <= 1, absolute error ~1e-16)
ENVELOPE_ZERO = 1e-15


@dataclass(frozen=True)
class ModelParams:
    omega1: float
    omega2: float
    kappa1: float
    kappa2: float
    g: complex = 0.0

    def __post_init__(self):
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("omega1 and omega2 must be positive")
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("kappa1 and kappa2 must be non-negative")

    @property
    def real_g(self) -> float:
        """Coupling as a real number; the closed forms are only defined for real g >= 0."""
        g = complex(self.g)
        if g.imag != 0 or g.real < 0:
            raise ValueError(f"closed-form dynamics need real g >= 0, got g={self.g}")
        return g.real


@dataclass(frozen=True)
class LambdaPair:
    plus: complex
    minus: complex


@dataclass(frozen=True)
class Envelopes:
    f1: complex
    f2: complex
    t: float


def lambdas(p: ModelParams) -> LambdaPair:
    return LambdaPair(
        plus=complex((p.kappa1 + p.kappa2) / 4, (p.omega1 + p.omega2) / 2),
        minus=complex((p.kappa1 - p.kappa2) / 4, (p.omega1 - p.omega2) / 2),
    )


def envelopes(p: ModelParams, t: float, branch: int = 1) -> Envelopes:
    """f_1(t), f_2(t) with x = sqrt(lambda_-^2 - g^2) on the principal branch.

    ``branch=-1`` uses -x instead; the result is the same because only even
    functions of x appear. Near the exceptional point (|x| t small) cosh(x t) and
    sinh(x t)/x are replaced by their series through (x t)^4.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    g = p.real_g
    lam = lambdas(p)
    x = branch * cmath.sqrt(lam.minus ** 2 - g ** 2)
    xt = x * t
    if abs(xt) < TAYLOR_THRESHOLD:
        z = xt * xt
        ch = 1 + z / 2 + z * z / 24
        sh_over_x = t * (1 + z / 6 + z * z / 120)
    else:
        ch = cmath.cosh(xt)
        sh_over_x = cmath.sinh(xt) / x
    decay = cmath.exp(-lam.plus * t)
    return Envelopes(
        f1=decay * (ch - lam.minus * sh_over_x),
        f2=-decay * 1j * g * sh_over_x,
        t=t,
    )


def swap_modes(p: ModelParams) -> ModelParams:
    """Exchange the roles of M1 and M2 (frequencies and decay rates)."""
    return replace(p, omega1=p.omega2, omega2=p.omega1, kappa1=p.kappa2, kappa2=p.kappa1)


# ---------------------------------------------------------------------------
# initial states of M1


@dataclass(frozen=True)
class ArbitraryMatrix:
    rho: DensityMatrix

    def __post_init__(self):
        if self.rho.mode_count != 1:
            raise ValueError("initial M1 state must be single-mode")
        object.__setattr__(self, "_support", MatrixMomentProvider(self.rho).support_bound())

    def element(self, n: int, m: int) -> complex:
        c = self.rho.cutoffs[0]
        if n >= c or m >= c:
            return 0j
        return complex(self.rho.data[n, m])

    def support_bound(self) -> int | None:
        return self._support

    def provider(self):
        return MatrixMomentProvider(self.rho)

    def matrix(self, cutoff: int) -> DensityMatrix:
        out = np.zeros((cutoff, cutoff), dtype=complex)
        c = min(cutoff, self.rho.cutoffs[0])
        out[:c, :c] = self.rho.data[:c, :c]
        return DensityMatrix((cutoff,), out)


@dataclass(frozen=True)
class Coherent:
    alpha0: complex

    def element(self, n: int, m: int) -> complex:
        a = complex(self.alpha0)
        if a == 0:
            return 1.0 + 0j if n == m == 0 else 0j
        lf = default_table()
        mag = math.exp(-abs(a) ** 2 + (n + m) * math.log(abs(a)) - 0.5 * (lf(n) + lf(m)))
        return mag * cmath.exp(1j * (n - m) * cmath.phase(a))

    def support_bound(self) -> int | None:
        return 0 if self.alpha0 == 0 else None

    def provider(self):
        return CoherentProvider(self.alpha0)

    def matrix(self, cutoff: int) -> DensityMatrix:
        return dm.coherent(self.alpha0, cutoff)


@dataclass(frozen=True)
class Thermal:
    beta0: float

    def __post_init__(self):
        if not (self.beta0 > 0 and math.isfinite(self.beta0)):
            raise ValueError("beta0 must be finite and positive")

    def element(self, n: int, m: int) -> complex:
        if n != m:
            return 0j
        return complex(-math.expm1(-self.beta0) * math.exp(-self.beta0 * n))

    def support_bound(self) -> int | None:
        return None

    def provider(self):
        return ThermalProvider(self.beta0)

    def matrix(self, cutoff: int) -> DensityMatrix:
        return dm.thermal(self.beta0, cutoff)


InitialState = Union[ArbitraryMatrix, Coherent, Thermal]


def fock_state(n: int, cutoff: int | None = None) -> ArbitraryMatrix:
    return ArbitraryMatrix(dm.fock(n, cutoff or n + 1))


# ---------------------------------------------------------------------------
# density matrices


def _weighted_tail(init: InitialState, N: int, M: int, loss: float, policy: TruncationPolicy) -> complex:
    """sum_{j>=0} rho0_{N+j, M+j} sqrt((N+j)! (M+j)!) / j! * loss^j  (with 0^0 = 1)."""
    lf = default_table()
    bound = init.support_bound()
    log_loss = math.log(abs(loss)) if loss != 0 else -math.inf
    sign = -1.0 if loss < 0 else 1.0

    def term(j: int) -> complex:
        r = init.element(N + j, M + j)
        if r == 0:
            return 0j
        if j == 0:
            w = math.exp(0.5 * (lf(N) + lf(M)))
        elif loss == 0:
            return 0j
        else:
            w = sign ** j * math.exp(0.5 * (lf(N + j) + lf(M + j)) - lf(j) + j * log_loss)
        return w * r

    if bound is not None:
        terms = [term(j) for j in range(0, bound - max(N, M) + 1)]
        return complex(math.fsum(z.real for z in terms), math.fsum(z.imag for z in terms))

    terms = []
    running_max = 0.0
    small_run = 0
    mag = 0.0
    for j in range(policy.max_series_depth):
        z = term(j)
        terms.append(z)
        mag = abs(z)
        running_max = max(running_max, mag)
        if mag <= policy.term_tolerance * running_max:
            small_run += 1
            if small_run >= SMALL_TERM_RUN:
                return complex(math.fsum(z.real for z in terms), math.fsum(z.imag for z in terms))
        else:
            small_run = 0
    raise TruncationError(
        f"initial-state sum for ({N},{M}) not converged after {policy.max_series_depth} terms "
        f"(last term magnitude {mag:.3e})",
        last_term=mag,
    )


def _scaled_powers(f: complex, cutoff: int) -> np.ndarray:
    """f^n / sqrt(n!) for n < cutoff."""
    lf = default_table()
    return np.array([power0(f, n) * math.exp(-0.5 * lf(n)) for n in range(cutoff)], dtype=complex)


def _loss(env: Envelopes) -> float:
    return 1.0 - abs(env.f1) ** 2 - abs(env.f2) ** 2


def joint_element(p: ModelParams, init: InitialState, n1: int, m1: int, n2: int, m2: int,
                  t: float, policy: TruncationPolicy | None = None) -> complex:
    """<n1, n2| rho(t) |m1, m2> of the two-mode state.

    rho = f1^n1 f1*^m1 f2^n2 f2*^m2 / sqrt(n1! m1! n2! m2!)
          * sum_j rho0_{n1+n2+j, m1+m2+j} sqrt((n1+n2+j)! (m1+m2+j)!) / j! * (1 - |f1|^2 - |f2|^2)^j
    """
    if min(n1, m1, n2, m2) < 0:
        raise ValueError("Fock indices must be non-negative")
    policy = policy or TruncationPolicy()
    env = envelopes(p, t)
    tail = _weighted_tail(init, n1 + n2, m1 + m2, _loss(env), policy)
    if tail == 0:
        return 0j
    lf = default_table()
    pref = (power0(env.f1, n1) * power0(env.f1.conjugate(), m1)
            * power0(env.f2, n2) * power0(env.f2.conjugate(), m2)
            * math.exp(-0.5 * (lf(n1) + lf(m1) + lf(n2) + lf(m2))))
    return pref * tail


def _tail_table(init, size: int, loss: float, policy) -> np.ndarray:
    out = np.zeros((size, size), dtype=complex)
    for N in range(size):
        for M in range(N + 1):
            out[N, M] = _weighted_tail(init, N, M, loss, policy)
            out[M, N] = out[N, M].conjugate() if M != N else out[N, M].real
    return out


def _mirror_lower(data: np.ndarray) -> np.ndarray:
    lower = np.tril(data, -1)
    return lower + lower.conj().T + np.diag(np.real(np.diag(data)))


def joint_density(p: ModelParams, init: InitialState, cutoff1: int, cutoff2: int, t: float,
                  policy: TruncationPolicy | None = None) -> DensityMatrix:
    if cutoff1 < 1 or cutoff2 < 1:
        raise ValueError("cutoffs must be >= 1")
    policy = policy or TruncationPolicy()
    env = envelopes(p, t)
    G = _tail_table(init, cutoff1 + cutoff2 - 1, _loss(env), policy)
    s1 = _scaled_powers(env.f1, cutoff1)
    s2 = _scaled_powers(env.f2, cutoff2)
    # index (n1, n2, m1, m2)
    N = np.add.outer(np.arange(cutoff1), np.arange(cutoff2))
    amp = np.multiply.outer(s1, s2)
    data = (amp[:, :, None, None] * amp.conj()[None, None, :, :]
            * G[N[:, :, None, None], N[None, None, :, :]])
    dim = cutoff1 * cutoff2
    data = _mirror_lower(data.reshape(dim, dim))
    rho = DensityMatrix((cutoff1, cutoff2), data)
    rho.eps_trunc = max(0.0, 1.0 - rho.trace)
    return rho


def reduced_density(p: ModelParams, init: InitialState, mode: int, cutoff: int, t: float,
                    policy: TruncationPolicy | None = None) -> DensityMatrix:
    """Single-mode state of M1 (``mode=1``) or M2 (``mode=2``) from its own closed form."""
    if mode not in (1, 2):
        raise ValueError("mode must be 1 or 2")
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    policy = policy or TruncationPolicy()
    env = envelopes(p, t)
    f = env.f1 if mode == 1 else env.f2
    G = _tail_table(init, cutoff, 1.0 - abs(f) ** 2, policy)
    s = _scaled_powers(f, cutoff)
    data = _mirror_lower(np.outer(s, s.conj()) * G)
    rho = DensityMatrix((cutoff,), data)
    rho.eps_trunc = max(0.0, 1.0 - rho.trace)
    return rho


def coherent_amplitudes(p: ModelParams, alpha0: complex, t: float) -> tuple[complex, complex]:
    env = envelopes(p, t)
    return env.f1 * alpha0, env.f2 * alpha0


def thermal_beta(f: complex, beta0: float) -> float:
    """Scaled inverse temperature of a mode whose envelope is f; +inf for a vacuum mode."""
    if abs(f) < ENVELOPE_ZERO:
        return math.inf
    f2 = abs(f) ** 2
    return math.log((f2 + math.expm1(beta0)) / f2)


def thermal_betas(p: ModelParams, beta0: float, t: float) -> tuple[float, float]:
    if not beta0 > 0:
        raise ValueError("beta0 must be positive")
    env = envelopes(p, t)
    return thermal_beta(env.f1, beta0), thermal_beta(env.f2, beta0)


class TwoModeMomentProvider:
    """Normally-ordered two-mode moments at time t, for the generic reconstruction engine.

    <(a1^dag)^u1 a1^v1 (a2^dag)^u2 a2^v2>(t) = f1*^u1 f2*^u2 f1^v1 f2^v2 mu(u1+u2, v1+v2),
    with mu the moments of the initial M1 state (a1(t) and a2^dag(t) commute, so the
    product can be normally ordered in the initial operators before taking the
    vacuum expectation value of M2 and the baths).
    """

    def __init__(self, p: ModelParams, init: InitialState, t: float):
        self.env = envelopes(p, t)
        self.init = init
        self._mu = init.provider()

    def moment(self, u, v):
        u1, u2 = u
        v1, v2 = v
        f1, f2 = self.env.f1, self.env.f2
        mu = self._mu.moment((u1 + u2,), (v1 + v2,))
        if mu == 0:
            return 0j
        return (power0(f1.conjugate(), u1) * power0(f2.conjugate(), u2)
                * power0(f1, v1) * power0(f2, v2) * mu)

    def support_bound(self):
        return self._mu.support_bound()

    def mode_count(self):
        return 2
