"""Truncated Fock-basis density matrices and their JSON form."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

ENTRY_THRESHOLD = 1e-15


@dataclass
class DensityMatrix:
    """Dense density matrix on a product of truncated Fock spaces.

    ``data`` is indexed mode-1-major, i.e. the flat index of (n1, n2) is
    ``n1 * cutoffs[1] + n2``, which is the ``np.kron`` ordering.
    ``eps_trunc`` estimates the weight lost above the cutoffs.
    """

    cutoffs: tuple[int, ...]
    data: np.ndarray
    eps_trunc: float = 0.0
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.cutoffs = tuple(int(c) for c in self.cutoffs)
        dim = math.prod(self.cutoffs)
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (dim, dim):
            raise ValueError(f"data shape {self.data.shape} does not match cutoffs {self.cutoffs}")

    @property
    def mode_count(self) -> int:
        return len(self.cutoffs)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def flat_index(self, n: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(n), self.cutoffs))

    def entry(self, n: Sequence[int], m: Sequence[int]) -> complex:
        return complex(self.data[self.flat_index(n), self.flat_index(m)])

    def indices(self):
        return itertools.product(*(range(c) for c in self.cutoffs))

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.data @ self.data)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.data)).reshape(self.cutoffs)

    def partial_trace(self, keep: int) -> "DensityMatrix":
        """Reduce onto the single mode ``keep`` (0-based)."""
        c = self.cutoffs
        t = self.data.reshape(c + c)
        n = len(c)
        letters = "abcdefghijklmnopqrstuvwxyz"
        row = list(letters[:n])
        col = list(letters[n:2 * n])
        for j in range(n):
            if j != keep:
                col[j] = row[j]
        spec = "".join(row) + "".join(col) + "->" + row[keep] + col[keep]
        return DensityMatrix((c[keep],), np.einsum(spec, t), eps_trunc=self.eps_trunc)

    def kron(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(
            self.cutoffs + other.cutoffs,
            np.kron(self.data, other.data),
            eps_trunc=self.eps_trunc + other.eps_trunc,
        )

    def physicality(self) -> dict[str, float]:
        return {
            "hermiticity_error": self.hermiticity_error(),
            "trace": self.trace,
            "eps_trunc": self.eps_trunc,
            "min_eigenvalue": self.min_eigenvalue(),
        }

    def to_dict(self) -> dict[str, Any]:
        entries = []
        for n in self.indices():
            i = self.flat_index(n)
            for m in self.indices():
                z = self.data[i, self.flat_index(m)]
                if abs(z) < ENTRY_THRESHOLD:
                    continue
                entries.append({"n": list(n), "m": list(m), "re": float(z.real), "im": float(z.imag)})
        return {
            "mode_count": self.mode_count,
            "cutoffs": list(self.cutoffs),
            "entries": entries,
            "trace": self.trace,
            "eps_trunc": self.eps_trunc,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DensityMatrix":
        cutoffs = tuple(d["cutoffs"])
        if len(cutoffs) != d["mode_count"]:
            raise ValueError("mode_count does not match cutoffs")
        dim = math.prod(cutoffs)
        data = np.zeros((dim, dim), dtype=complex)
        for e in d["entries"]:
            i = np.ravel_multi_index(tuple(e["n"]), cutoffs)
            j = np.ravel_multi_index(tuple(e["m"]), cutoffs)
            data[i, j] = complex(e["re"], e["im"])
        return cls(cutoffs, data, eps_trunc=float(d.get("eps_trunc", 0.0)))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return cls.from_dict(json.loads(text))


# direct constructions, used as oracles and as initial states

def fock(n: int, cutoff: int) -> DensityMatrix:
    if not 0 <= n < cutoff:
        raise ValueError(f"Fock level {n} outside cutoff {cutoff}")
    data = np.zeros((cutoff, cutoff), dtype=complex)
    data[n, n] = 1.0
    return DensityMatrix((cutoff,), data)


def coherent(alpha: complex, cutoff: int) -> DensityMatrix:
    n = np.arange(cutoff)
    logf = np.array([math.lgamma(k + 1) for k in n])
    amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logf) * np.power(complex(alpha), n)
    data = np.outer(amp, amp.conj())
    return DensityMatrix((cutoff,), data, eps_trunc=max(0.0, 1.0 - float(np.sum(np.abs(amp) ** 2))))


def thermal(beta: float, cutoff: int) -> DensityMatrix:
    if math.isinf(beta):
        return fock(0, cutoff)
    n = np.arange(cutoff)
    p = -math.expm1(-beta) * np.exp(-beta * n)
    return DensityMatrix((cutoff,), np.diag(p).astype(complex), eps_trunc=math.exp(-beta * cutoff))


def random_density(max_level: int, cutoff: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random state supported on Fock levels 0..max_level (full rank unless ``rank`` is given)."""
    if max_level >= cutoff:
        raise ValueError("max_level must lie below the cutoff")
    support = max_level + 1
    rank = rank or support
    g = rng.normal(size=(support, rank)) + 1j * rng.normal(size=(support, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T) / np.trace(rho).real
    data = np.zeros((cutoff, cutoff), dtype=complex)
    data[:support, :support] = rho
    return DensityMatrix((cutoff,), data)


def max_deviation(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray) -> float:
    a = a.data if isinstance(a, DensityMatrix) else np.asarray(a)
    b = b.data if isinstance(b, DensityMatrix) else np.asarray(b)
    return float(np.max(np.abs(a - b)))


def _psd_sqrt(h: np.ndarray, rel_floor: float) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    top = max(float(w[-1]), 0.0)
    # round-off eigenvalues of order 1e-17 would contribute sqrt(1e-17) ~ 3e-9 each
    w = np.where(w > rel_floor * top, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray, rel_floor: float = 1e-14) -> float:
    """Uhlmann fidelity as (sum of singular values of sqrt(a) sqrt(b))^2.

    Singular values carry absolute error ~eps, unlike the eigenvalues of
    sqrt(a) b sqrt(a) whose square roots amplify round-off to ~1e-8. Eigenvalues
    of a or b below rel_floor * max are treated as zero, which can cost up to
    sum sqrt(p_i q_i) over the dropped levels (~1e-11 for steep thermal tails).
    """
    a = a.data if isinstance(a, DensityMatrix) else np.asarray(a, dtype=complex)
    b = b.data if isinstance(b, DensityMatrix) else np.asarray(b, dtype=complex)
    s = np.linalg.svd(_psd_sqrt(a, rel_floor) @ _psd_sqrt(b, rel_floor), compute_uv=False)
    return float(np.sum(s) ** 2)
