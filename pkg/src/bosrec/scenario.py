"""Scenario files and the runners behind the ``bosrec`` command.

A scenario is a flat ``key = value`` file with dotted section names::

    params.omega1 = 5.0
    params.g = 0.1
    initial.kind = fock
    initial.n = 2
    time.end = 30
    time.steps = 60
    cutoffs.mode1 = 12
    outputs = populations, purity

Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import density as dm
from .density import DensityMatrix
from .lindblad import simulate
from .model import (
    ArbitraryMatrix,
    Coherent,
    InitialState,
    ModelParams,
    Thermal,
    TwoModeMomentProvider,
    envelopes,
    joint_density,
    reduced_density,
    thermal_beta,
)
from .reconstruction import (
    CoherentProvider,
    FockProvider,
    MatrixMomentProvider,
    ThermalProvider,
    TruncationError,
    TruncationPolicy,
    VacuumProvider,
    reconstruct,
)

KNOWN_OUTPUTS = (
    "populations", "purity", "trace", "coherent_amplitudes", "thermal_betas", "envelopes", "elements",
)
INITIAL_KINDS = ("vacuum", "fock", "coherent", "thermal", "matrix", "random")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in raw:
            raise ConfigError(key, "duplicate key")
        raw[key] = value
    return raw


class _Reader:
    """Typed access to the raw mapping; remembers which keys were consumed."""

    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.used: set[str] = set()

    def has(self, key):
        return key in self.raw

    def get(self, key, conv, default=None, required=False):
        if key not in self.raw:
            if required:
                raise ConfigError(key, "missing required key")
            return default
        self.used.add(key)
        try:
            return conv(self.raw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"cannot parse {self.raw[key]!r} ({exc})") from None

    def unused(self):
        return sorted(set(self.raw) - self.used)


def _complex(s: str) -> complex:
    return complex(s.replace(" ", "").replace("i", "j"))


def _index_list(s: str) -> list[tuple[int, ...]]:
    out = []
    for chunk in s.split(";"):
        chunk = chunk.strip().strip("()")
        if chunk:
            out.append(tuple(int(x) for x in chunk.split(",")))
    return out


@dataclass
class OracleSettings:
    dims: tuple[int, int]
    dt: float


@dataclass
class ScenarioConfig:
    params: ModelParams | None
    initial: dict[str, Any]
    t_start: float = 0.0
    t_end: float = 1.0
    t_steps: int = 1
    cutoffs: tuple[int, int] = (8, 8)
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    oracle: OracleSettings | None = None
    outputs: tuple[str, ...] = ("populations",)
    elements: tuple[tuple[int, int, int, int], ...] = ()
    tolerance: float = 1e-4
    base_dir: Path = Path(".")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.t_steps + 1)

    def initial_state(self) -> InitialState:
        return build_initial(self.initial, self.base_dir)


def build_initial(spec: dict[str, Any], base_dir: Path = Path(".")) -> InitialState:
    kind = spec["kind"]
    if kind == "vacuum":
        return ArbitraryMatrix(dm.fock(0, 1))
    if kind == "fock":
        return ArbitraryMatrix(dm.fock(spec["n"], spec["n"] + 1))
    if kind == "coherent":
        return Coherent(spec["alpha"])
    if kind == "thermal":
        return Thermal(spec["beta"])
    if kind == "matrix":
        path = Path(spec["file"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            rho = DensityMatrix.from_json(path.read_text())
        except OSError as exc:
            raise ConfigError("initial.file", str(exc)) from None
        return ArbitraryMatrix(rho)
    if kind == "random":
        rng = np.random.default_rng(spec["seed"])
        return ArbitraryMatrix(dm.random_density(spec["max_level"], spec["max_level"] + 1, rng))
    raise ConfigError("initial.kind", f"unknown kind {kind!r}")


def load_config(text: str, base_dir: Path = Path("."), require_params: bool = True) -> ScenarioConfig:
    r = _Reader(parse_text(text))

    params = None
    if require_params or any(k.startswith("params.") for k in r.raw):
        try:
            g = r.get("params.g", _complex, 0.0)
            params = ModelParams(
                omega1=r.get("params.omega1", float, required=True),
                omega2=r.get("params.omega2", float, required=True),
                kappa1=r.get("params.kappa1", float, 0.0),
                kappa2=r.get("params.kappa2", float, 0.0),
                g=g.real if g.imag == 0 else g,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from None

    kind = r.get("initial.kind", str, required=True)
    if kind not in INITIAL_KINDS:
        raise ConfigError("initial.kind", f"must be one of {', '.join(INITIAL_KINDS)}")
    initial: dict[str, Any] = {"kind": kind}
    if kind == "fock":
        initial["n"] = r.get("initial.n", int, required=True)
        if initial["n"] < 0:
            raise ConfigError("initial.n", "must be >= 0")
    elif kind == "coherent":
        initial["alpha"] = r.get("initial.alpha", _complex, required=True)
    elif kind == "thermal":
        initial["beta"] = r.get("initial.beta", float, required=True)
        if not (initial["beta"] > 0 and math.isfinite(initial["beta"])):
            raise ConfigError("initial.beta", "must be finite and > 0")
    elif kind == "matrix":
        initial["file"] = r.get("initial.file", str, required=True)
    elif kind == "random":
        initial["max_level"] = r.get("initial.max_level", int, required=True)
        initial["seed"] = r.get("initial.seed", int, 0)

    cfg = ScenarioConfig(params=params, initial=initial, base_dir=base_dir)
    cfg.t_start = r.get("time.start", float, 0.0)
    cfg.t_end = r.get("time.end", float, 1.0)
    cfg.t_steps = r.get("time.steps", int, 1)
    if cfg.t_start < 0:
        raise ConfigError("time.start", "must be >= 0")
    if not cfg.t_end > cfg.t_start:
        raise ConfigError("time.end", "must exceed time.start")
    if cfg.t_steps < 1:
        raise ConfigError("time.steps", "must be >= 1")

    c1 = r.get("cutoffs.mode1", int, 8)
    c2 = r.get("cutoffs.mode2", int, c1)
    for key, c in (("cutoffs.mode1", c1), ("cutoffs.mode2", c2)):
        if c < 1:
            raise ConfigError(key, "must be >= 1")
    cfg.cutoffs = (c1, c2)

    try:
        cfg.policy = TruncationPolicy(
            max_series_depth=r.get("policy.max_series_depth", int, 64),
            term_tolerance=r.get("policy.term_tolerance", float, 1e-14),
        )
    except ValueError as exc:
        raise ConfigError("policy", str(exc)) from None

    if any(k.startswith("oracle.") for k in r.raw):
        d1 = r.get("oracle.dim1", int, c1)
        d2 = r.get("oracle.dim2", int, d1)
        dt = r.get("oracle.dt", float, 1e-3)
        if d1 < 1 or d2 < 1:
            raise ConfigError("oracle.dim1", "dimensions must be >= 1")
        if not dt > 0:
            raise ConfigError("oracle.dt", "must be > 0")
        cfg.oracle = OracleSettings((d1, d2), dt)

    outs = r.get("outputs", lambda s: tuple(x.strip() for x in s.split(",") if x.strip()), ("populations",))
    for o in outs:
        if o not in KNOWN_OUTPUTS:
            raise ConfigError("outputs", f"unknown observable {o!r}; known: {', '.join(KNOWN_OUTPUTS)}")
    cfg.outputs = tuple(outs)
    elems = r.get("outputs.elements", _index_list, [])
    for e in elems:
        if len(e) != 4 or min(e) < 0:
            raise ConfigError("outputs.elements", f"index {e} must be four non-negative ints n1,m1,n2,m2")
    cfg.elements = tuple(elems)
    if "elements" in cfg.outputs and not cfg.elements:
        raise ConfigError("outputs.elements", "required when outputs include 'elements'")
    cfg.tolerance = r.get("compare.tolerance", float, 1e-4)

    extra = r.unused()
    if extra:
        raise ConfigError(extra[0], "unknown key")
    return cfg


def load_config_file(path: str | os.PathLike, require_params: bool = True) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), str(exc)) from None
    return load_config(text, base_dir=path.parent, require_params=require_params)


# ---------------------------------------------------------------------------
# runners


@dataclass(frozen=True)
class Record:
    time: float
    observable: str
    index: tuple[int, ...]
    value: complex

    def sort_key(self):
        return (self.time, self.observable, self.index)


def max_workers() -> int:
    env = os.environ.get("BOSREC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("BOSREC_THREADS", f"not an integer: {env!r}") from None
    return os.cpu_count() or 1


def _map_times(fn, times: Iterable[float]):
    times = list(times)
    workers = min(max_workers(), len(times))
    if workers <= 1:
        return [fn(t) for t in times]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, times))


@dataclass
class Snapshot:
    time: float
    joint: DensityMatrix
    mode1: DensityMatrix
    mode2: DensityMatrix
    records: list[Record]


def _evaluate(cfg: ScenarioConfig, init: InitialState, t: float) -> Snapshot:
    p = cfg.params
    c1, c2 = cfg.cutoffs
    try:
        joint = joint_density(p, init, c1, c2, t, cfg.policy)
        r1 = reduced_density(p, init, 1, c1, t, cfg.policy)
        r2 = reduced_density(p, init, 2, c2, t, cfg.policy)
    except TruncationError as exc:
        exc.time = t
        raise
    env = envelopes(p, t)
    recs: list[Record] = []
    add = lambda name, idx, val: recs.append(Record(float(t), name, tuple(idx), complex(val)))
    for out in cfg.outputs:
        if out == "populations":
            pops = joint.populations()
            for n1 in range(c1):
                for n2 in range(c2):
                    add("population_joint", (n1, n2), pops[n1, n2])
            for n, pv in enumerate(np.real(np.diag(r1.data))):
                add("population_mode1", (n,), pv)
            for n, pv in enumerate(np.real(np.diag(r2.data))):
                add("population_mode2", (n,), pv)
        elif out == "purity":
            add("purity_joint", (), joint.purity())
            add("purity_mode1", (), r1.purity())
            add("purity_mode2", (), r2.purity())
        elif out == "trace":
            add("trace_joint", (), joint.trace)
            add("eps_trunc_joint", (), joint.eps_trunc)
        elif out == "envelopes":
            add("envelope_f1", (), env.f1)
            add("envelope_f2", (), env.f2)
        elif out == "coherent_amplitudes":
            if not isinstance(init, Coherent):
                raise ConfigError("outputs", "coherent_amplitudes needs initial.kind = coherent")
            add("coherent_alpha1", (), env.f1 * init.alpha0)
            add("coherent_alpha2", (), env.f2 * init.alpha0)
        elif out == "thermal_betas":
            if not isinstance(init, Thermal):
                raise ConfigError("outputs", "thermal_betas needs initial.kind = thermal")
            add("thermal_beta1", (), thermal_beta(env.f1, init.beta0))
            add("thermal_beta2", (), thermal_beta(env.f2, init.beta0))
        elif out == "elements":
            for n1, m1, n2, m2 in cfg.elements:
                if n1 >= c1 or m1 >= c1 or n2 >= c2 or m2 >= c2:
                    raise ConfigError("outputs.elements", f"index {(n1, m1, n2, m2)} outside cutoffs {cfg.cutoffs}")
                add("element", (n1, m1, n2, m2), joint.entry((n1, n2), (m1, m2)))
    recs.sort(key=Record.sort_key)
    return Snapshot(float(t), joint, r1, r2, recs)


def run_evolve(cfg: ScenarioConfig) -> list[Snapshot]:
    if cfg.params is None:
        raise ConfigError("params", "evolve needs model parameters")
    init = cfg.initial_state()
    return _map_times(lambda t: _evaluate(cfg, init, t), cfg.times)


@dataclass
class CompareReport:
    times: np.ndarray
    max_deviation: np.ndarray
    trace_deviation: np.ndarray
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.max_deviation <= self.tolerance))

    def records(self) -> list[Record]:
        out = []
        for t, d, tr in zip(self.times, self.max_deviation, self.trace_deviation):
            out.append(Record(float(t), "max_deviation", (), d))
            out.append(Record(float(t), "pass", (), 1.0 if d <= self.tolerance else 0.0))
            out.append(Record(float(t), "trace_deviation", (), tr))
        return out


def run_compare(cfg: ScenarioConfig, tolerance: float | None = None) -> CompareReport:
    if cfg.oracle is None:
        raise ConfigError("oracle", "compare needs oracle.dim1 / oracle.dim2 / oracle.dt")
    if cfg.params is None:
        raise ConfigError("params", "compare needs model parameters")
    init = cfg.initial_state()
    dims = cfg.oracle.dims
    times = cfg.times
    try:
        traj = simulate(cfg.params, init.matrix(dims[0]), dims, times, cfg.oracle.dt)
    except ValueError as exc:
        raise ConfigError("oracle.dt", str(exc)) from None

    def closed(t):
        try:
            return joint_density(cfg.params, init, dims[0], dims[1], t, cfg.policy)
        except TruncationError as exc:
            exc.time = t
            raise

    ours = _map_times(closed, times)
    dev = np.array([dm.max_deviation(a, b) for a, b in zip(ours, traj.states)])
    trd = np.array([abs(a.trace - b.trace) for a, b in zip(ours, traj.states)])
    return CompareReport(times, dev, trd, cfg.tolerance if tolerance is None else tolerance)


@dataclass
class SwapReport:
    time: float
    fidelity_mode2: float
    vacuum_deviation_mode1: float
    mode2: DensityMatrix
    target: DensityMatrix
    extras: dict[str, Any] = field(default_factory=dict)

    def records(self) -> list[Record]:
        recs = [
            Record(self.time, "fidelity_mode2", (), self.fidelity_mode2),
            Record(self.time, "vacuum_deviation_mode1", (), self.vacuum_deviation_mode1),
        ]
        for k, v in sorted(self.extras.items()):
            recs.append(Record(self.time, k, (), v))
        return sorted(recs, key=Record.sort_key)


def swap_time(p: ModelParams) -> float:
    return math.pi / (2 * p.real_g)


def run_swap_demo(cfg: ScenarioConfig) -> SwapReport:
    p = cfg.params
    if p is None:
        raise ConfigError("params", "swap-demo needs model parameters")
    if p.kappa1 != 0 or p.kappa2 != 0:
        raise ConfigError("params.kappa1", "swap needs lossless modes (kappa1 = kappa2 = 0)")
    if p.omega1 != p.omega2:
        raise ConfigError("params.omega2", "swap needs resonant modes (omega1 = omega2)")
    if not p.real_g > 0:
        raise ConfigError("params.g", "swap needs a coupling g > 0")
    init = cfg.initial_state()
    cutoff = max(cfg.cutoffs)
    t = swap_time(p)
    r1 = reduced_density(p, init, 1, cutoff, t, cfg.policy)
    r2 = reduced_density(p, init, 2, cutoff, t, cfg.policy)
    rho0 = init.matrix(cutoff).data
    n = np.arange(cutoff)
    phase = (-1j) ** n * np.exp(-1j * p.omega1 * n * t)
    target = DensityMatrix((cutoff,), rho0 * np.outer(phase, phase.conj()))
    vac = dm.fock(0, cutoff)
    extras: dict[str, Any] = {}
    env = envelopes(p, t)
    if isinstance(init, Coherent):
        extras["coherent_alpha2"] = env.f2 * init.alpha0
        extras["coherent_alpha1"] = env.f1 * init.alpha0
    if isinstance(init, Thermal):
        extras["thermal_beta1"] = thermal_beta(env.f1, init.beta0)
        extras["thermal_beta2"] = thermal_beta(env.f2, init.beta0)
    return SwapReport(
        time=t,
        fidelity_mode2=dm.fidelity(r2, target),
        vacuum_deviation_mode1=dm.max_deviation(r1, vac),
        mode2=r2,
        target=target,
        extras=extras,
    )


def provider_for(spec: dict[str, Any], base_dir: Path = Path(".")):
    kind = spec["kind"]
    if kind == "vacuum":
        return VacuumProvider()
    if kind == "fock":
        return FockProvider(spec["n"])
    if kind == "coherent":
        return CoherentProvider(spec["alpha"])
    if kind == "thermal":
        return ThermalProvider(spec["beta"])
    return MatrixMomentProvider(build_initial(spec, base_dir).rho)


def run_reconstruct(cfg: ScenarioConfig) -> tuple[DensityMatrix, DensityMatrix]:
    """Rebuild a single-mode test state from its moments; returns (reconstructed, direct)."""
    cutoff = cfg.cutoffs[0]
    rho = reconstruct(provider_for(cfg.initial, cfg.base_dir), (cutoff,), cfg.policy)
    return rho, cfg.initial_state().matrix(cutoff)


def run_reconstruct_two_mode(cfg: ScenarioConfig, t: float) -> DensityMatrix:
    """Joint state at time t rebuilt by the generic engine from Heisenberg-picture moments."""
    return reconstruct(TwoModeMomentProvider(cfg.params, cfg.initial_state(), t), cfg.cutoffs, cfg.policy)
