"""Reference integrator: zero-temperature Lindblad equation in a truncated two-mode Fock basis.

    d rho/dt = -i [H, rho] + sum_j (L_j rho L_j^dag - 1/2 {L_j^dag L_j, rho})
    H = w1 a1^dag a1 + w2 a2^dag a2 + g a1^dag a2 + g* a2^dag a1,   L_j = sqrt(kappa_j) a_j

Used only as an independent check of the closed forms. Everything is dense. The
state is propagated on the smallest set of basis vectors that contains its initial
support and is closed under H, L_j and L_j^dag L_j; that set is exactly invariant
under the generator, so the restriction changes nothing but the cost (six states
instead of 144 for |2, 0> at cutoff 12).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import DensityMatrix


class TraceDriftError(RuntimeError):
    pass


def lowering(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def mode_operators(dim1: int, dim2: int) -> tuple[np.ndarray, np.ndarray]:
    """a1 = a (x) I and a2 = I (x) a; flat index n1 * dim2 + n2."""
    a1 = np.kron(lowering(dim1), np.eye(dim2))
    a2 = np.kron(np.eye(dim1), lowering(dim2))
    return a1, a2


def build_system(params, dim1: int, dim2: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Hamiltonian and jump operators sqrt(kappa_j) a_j (complex g allowed)."""
    if dim1 < 1 or dim2 < 1:
        raise ValueError("dimensions must be positive")
    a1, a2 = mode_operators(dim1, dim2)
    g = complex(params.g)
    H = (params.omega1 * a1.conj().T @ a1 + params.omega2 * a2.conj().T @ a2
         + g * a1.conj().T @ a2 + g.conjugate() * a2.conj().T @ a1)
    jumps = [math.sqrt(k) * a for k, a in ((params.kappa1, a1), (params.kappa2, a2)) if k > 0]
    return H, jumps


def lindblad_rhs(H: np.ndarray, jumps: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Plain textbook form, one matrix product per term."""
    out = -1j * (H @ rho - rho @ H)
    for L in jumps:
        Ld = L.conj().T
        LdL = Ld @ L
        out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


class _Generator:
    """Same right-hand side with the anti-commutator folded into an effective Hamiltonian."""

    def __init__(self, H, jumps):
        decay = sum((L.conj().T @ L for L in jumps), np.zeros_like(H))
        self.heff = H - 0.5j * decay
        self.heff_dag = self.heff.conj().T
        self.jumps = [(L, L.conj().T) for L in jumps]

    def __call__(self, rho):
        out = -1j * (self.heff @ rho - rho @ self.heff_dag)
        for L, Ld in self.jumps:
            out += L @ rho @ Ld
        return out


def invariant_support(H: np.ndarray, jumps: Sequence[np.ndarray], rho0: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Basis indices reachable from the support of rho0 under H, L_j and L_j^dag L_j."""
    links = np.abs(H) > tol
    links |= links.T
    for L in jumps:
        links |= np.abs(L) > tol
        ldl = np.abs(L.conj().T @ L) > tol
        links |= ldl | ldl.T
    seen = np.zeros(H.shape[0], dtype=bool)
    seen[np.nonzero(np.any(np.abs(rho0) > tol, axis=0) | np.any(np.abs(rho0) > tol, axis=1))[0]] = True
    frontier = np.nonzero(seen)[0]
    while frontier.size:
        reach = np.any(links[:, frontier], axis=1) & ~seen
        seen |= reach
        frontier = np.nonzero(reach)[0]
    return np.nonzero(seen)[0]


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[DensityMatrix] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"times": [float(t) for t in self.times], "states": [s.to_dict() for s in self.states]}


def integrate(H, jumps, rho0: DensityMatrix | np.ndarray, t_grid: Sequence[float], dt: float,
              restrict: bool = True, max_trace_drift: float = 1e-5) -> Trajectory:
    """Fixed-step RK4 from t = 0 with snapshots at ``t_grid`` (integer multiples of dt).

    The Hermitian part is re-imposed after every step. A trace drift above
    ``max_trace_drift`` raises :class:`TraceDriftError`.
    """
    H = np.asarray(H, dtype=complex)
    jumps = [np.asarray(L, dtype=complex) for L in jumps]
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and (np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0):
        raise ValueError("t_grid must be increasing and non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps_at = np.rint(t_grid / dt).astype(int)
    if np.any(np.abs(steps_at * dt - t_grid) > 1e-9 * np.maximum(1.0, t_grid)):
        raise ValueError("grid times must be integer multiples of dt")

    if isinstance(rho0, DensityMatrix):
        cutoffs = rho0.cutoffs
        full = rho0.data
    else:
        full = np.asarray(rho0, dtype=complex)
        cutoffs = (full.shape[0],)
    if full.shape != H.shape:
        raise ValueError(f"initial state shape {full.shape} does not match H {H.shape}")

    keep = invariant_support(H, jumps, full) if restrict else np.arange(H.shape[0])
    sub = np.ix_(keep, keep)
    f = _Generator(H[sub], [L[sub] for L in jumps])
    rho = full[sub].copy()
    tr0 = np.trace(rho).real

    traj = Trajectory(times=t_grid)
    step = 0
    for target, t in zip(steps_at, t_grid):
        while step < target:
            k1 = f(rho)
            k2 = f(rho + 0.5 * dt * k1)
            k3 = f(rho + 0.5 * dt * k2)
            k4 = f(rho + dt * k3)
            rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            rho = 0.5 * (rho + rho.conj().T)
            step += 1
        drift = abs(np.trace(rho).real - tr0)
        if drift > max_trace_drift:
            raise TraceDriftError(
                f"trace drifted by {drift:.2e} at t={t}; reduce dt (currently {dt}) or raise the cutoff"
            )
        snap = np.zeros_like(full)
        snap[sub] = rho
        traj.states.append(DensityMatrix(cutoffs, snap))
    return traj


def two_mode_initial(rho1: DensityMatrix, dims: tuple[int, int]) -> DensityMatrix:
    """rho1 (cut or padded to dims[0]) tensored with the vacuum of M2."""
    d1, d2 = dims
    data = np.zeros((d1, d1), dtype=complex)
    c = min(d1, rho1.cutoffs[0])
    data[:c, :c] = rho1.data[:c, :c]
    vac = np.zeros((d2, d2), dtype=complex)
    vac[0, 0] = 1.0
    return DensityMatrix((d1, d2), np.kron(data, vac))


def simulate(params, rho1: DensityMatrix, dims: tuple[int, int], t_grid: Sequence[float], dt: float,
             restrict: bool = True) -> Trajectory:
    """M1 in ``rho1``, M2 in vacuum, integrated on the dims[0] x dims[1] product basis."""
    H, jumps = build_system(params, *dims)
    return integrate(H, jumps, two_mode_initial(rho1, dims), t_grid, dt, restrict=restrict)
