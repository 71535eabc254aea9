"""Estimators for the Fourier transform of the density of states (FDOS).

The target quantity on a uniform time grid is

    G(t) = norm * Tr_S[exp(-i H t)] / (|S| * sqrt(2*pi)),

with ``norm`` the state count of the traced space (2**n for the full
Hilbert space, binomial(n, M) for a fixed-particle-number subspace).  Three
routes are implemented:

* ``exact_fdos`` -- zero-noise sums over exact eigenvalues;
* ``dqc1_fdos`` -- one-clean-qubit readout: the ancilla probability is
  computed from the exact (sub)trace and then binomially sampled, which is
  statistically identical to simulating the purified 2n+1-qubit circuit
  (the purified circuit's gate counts are still reported for costing);
* ``sample_fdos`` -- random-initial-state Loschmidt echoes via Hadamard
  tests, with per-state shot reuse N_r and a 50/50 real/imaginary split.

Per-time-point randomness comes from Philox streams keyed by
(seed, stage, time index), so time points can be evaluated in any order or
concurrently with identical results.  Per-point means use numpy's pairwise
summation; accumulation error is far below shot noise at any tested scale.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .ansatz import HardwareEfficientAnsatz
from .evolve import PropagatorOracle, TrotterPlan, step_unitary, unitary_eig, \
    _matrix_power
from .hamlib import SubspaceIndex, subspace_index
from .qcore import QubitHamiltonian, StateVector
from .rng import keyed_rng

__all__ = [
    "ROOT_2PI",
    "TimeGrid",
    "FdosSignal",
    "SamplerSpec",
    "ShotPlan",
    "ExactEchoEngine",
    "TrotterEchoEngine",
    "exact_fdos",
    "enumerated_fdos",
    "sample_fdos",
    "dqc1_fdos",
    "hadamard_test",
    "dicke_state",
    "draw_initial_state",
    "write_signal",
    "read_signal",
]

ROOT_2PI = math.sqrt(2.0 * math.pi)

_SAMPLER_KINDS = ("bitflip", "euler", "haar", "layered", "hamming",
                  "dqc1-full", "dqc1-subspace")


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_t: int

    def __post_init__(self):
        if self.dt <= 0 or self.n_t < 1:
            raise ValueError("time grid needs dt > 0 and n_t >= 1")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    @property
    def t_max(self) -> float:
        return self.n_t * self.dt


@dataclass
class FdosSignal:
    """Complex G(t_k) samples plus per-point shot metadata.

    ``n_shots[k] == 0`` marks analytic (infinite-shot) values.  The signal
    stores only t >= 0; negative times follow from G(-t) = conj(G(t)).
    """

    grid: TimeGrid
    values: np.ndarray
    normalization: float
    sampler: str = "exact"
    seed: int | None = None
    n_shots: np.ndarray | None = None
    window: str = "none"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n_t,):
            raise ValueError("value count does not match the time grid")
        if self.n_shots is None:
            self.n_shots = np.zeros(self.grid.n_t, dtype=np.int64)
        self.n_shots = np.asarray(self.n_shots, dtype=np.int64)


@dataclass(frozen=True)
class SamplerSpec:
    """Random-initial-state family (or DQC1 readout) used by an estimator."""

    kind: str
    layers: int = 0
    M: int | None = None

    def __post_init__(self):
        if self.kind not in _SAMPLER_KINDS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.kind == "layered" and self.layers < 1:
            raise ValueError("layered sampler needs layers >= 1")
        if self.kind in ("hamming", "dqc1-subspace") and self.M is None:
            raise ValueError(f"{self.kind} sampler needs a particle number M")

    @property
    def id(self) -> str:
        if self.kind == "layered":
            return f"layered({self.layers})"
        if self.kind in ("hamming", "dqc1-subspace"):
            return f"{self.kind}({self.M})"
        return self.kind

    def space_size(self, n_qubits: int) -> int:
        if self.kind in ("hamming", "dqc1-subspace"):
            return math.comb(n_qubits, self.M)
        return 1 << n_qubits


@dataclass(frozen=True)
class ShotPlan:
    """Per-time-point budget N_s = N_r x N_psi (reuse x fresh states)."""

    n_shots: int
    n_reuse: int = 1
    analytic: bool = False

    def __post_init__(self):
        if self.n_shots < 1 or self.n_reuse < 1:
            raise ValueError("shot counts must be positive")
        if self.n_shots % self.n_reuse:
            raise ValueError("N_s must equal N_r * N_psi exactly")

    @property
    def n_states(self) -> int:
        return self.n_shots // self.n_reuse


# ---------------------------------------------------------------------------
# echo engines: analytic Loschmidt echoes under exact or Trotter dynamics
# ---------------------------------------------------------------------------

class ExactEchoEngine:
    """Echoes/traces from the eigendecomposition of H (or a subspace block)."""

    def __init__(self, ham: QubitHamiltonian,
                 subspace: SubspaceIndex | None = None):
        oracle = PropagatorOracle.from_hamiltonian(ham, subspace)
        self.n_qubits = ham.n_qubits
        self.subspace = subspace
        self.eigenvalues = oracle.eigenvalues
        self.eigenvectors = oracle.eigenvectors
        self._lut = subspace.position_lookup() if subspace is not None else None

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def _phase(self, k: int, t: float) -> np.ndarray:
        return np.exp(-1j * self.eigenvalues * t)

    def echoes_for_indices(self, indices: np.ndarray, k: int,
                           t: float) -> np.ndarray:
        rows = np.asarray(indices, dtype=np.int64)
        if self._lut is not None:
            rows = self._lut[rows]
            if np.any(rows < 0):
                raise ValueError("basis index outside the subspace")
        w = np.abs(self.eigenvectors[rows, :]) ** 2
        return w @ self._phase(k, t)

    def echoes_for_states(self, amps: np.ndarray, k: int,
                          t: float) -> np.ndarray:
        w = np.abs(amps @ self.eigenvectors.conj()) ** 2
        return w @ self._phase(k, t)

    def normalized_trace(self, k: int, t: float) -> complex:
        return complex(np.sum(self._phase(k, t)) / self.dim)


class TrotterEchoEngine:
    """Echoes/traces under a Trotter plan, via one unitary eigendecomposition.

    The plan's step must divide the signal grid spacing; echoes at t_k use
    the k-th power of the grid-step unitary.  Always operates on the full
    space (Trotterized dynamics leaks between particle-number blocks), but
    can trace over / restrict draws to a subspace.
    """

    def __init__(self, plan: TrotterPlan, grid: TimeGrid,
                 subspace: SubspaceIndex | None = None):
        ratio = grid.dt / plan.dt
        steps = int(round(ratio))
        if abs(ratio - steps) > 1e-9 or steps < 1:
            raise ValueError("grid spacing must be a multiple of the Trotter step")
        self.steps_per_sample = steps
        self.plan = plan
        self.n_qubits = plan.n_qubits
        self.subspace = subspace
        lam, v = unitary_eig(_matrix_power(step_unitary(plan), steps))
        self.lam, self.eigenvectors = lam, v
        if subspace is None:
            self._trace_weights = np.sum(np.abs(v) ** 2, axis=0)
            self._dim = 1 << plan.n_qubits
        else:
            self._trace_weights = np.sum(np.abs(v[subspace.indices, :]) ** 2,
                                         axis=0)
            self._dim = subspace.dimension

    @property
    def dim(self) -> int:
        return self._dim

    def _phase(self, k: int, t: float) -> np.ndarray:
        return self.lam ** k

    def echoes_for_indices(self, indices: np.ndarray, k: int,
                           t: float) -> np.ndarray:
        w = np.abs(self.eigenvectors[np.asarray(indices, dtype=np.int64), :]) ** 2
        return w @ self._phase(k, t)

    def echoes_for_states(self, amps: np.ndarray, k: int,
                          t: float) -> np.ndarray:
        w = np.abs(amps @ self.eigenvectors.conj()) ** 2
        return w @ self._phase(k, t)

    def normalized_trace(self, k: int, t: float) -> complex:
        return complex(self._trace_weights @ self._phase(k, t) / self._dim)


# ---------------------------------------------------------------------------
# exact estimators
# ---------------------------------------------------------------------------

def exact_fdos(source, grid: TimeGrid,
               subspace: SubspaceIndex | None = None) -> FdosSignal:
    """G(t_k) = sum_j exp(-i E_j t_k) / sqrt(2 pi), zero shot noise.

    ``source`` may be a QubitHamiltonian, an eigenvalue array, or an echo
    engine (whose normalized trace is used, e.g. for Trotterized signals).
    """
    if isinstance(source, QubitHamiltonian):
        from .hamlib import exact_spectrum
        evals = exact_spectrum(source, subspace)
        values = np.exp(-1j * np.outer(grid.times, evals)).sum(axis=1) / ROOT_2PI
        dim = len(evals)
    elif isinstance(source, np.ndarray):
        evals = source
        values = np.exp(-1j * np.outer(grid.times, evals)).sum(axis=1) / ROOT_2PI
        dim = len(evals)
    else:
        dim = source.dim
        values = np.array([source.normalized_trace(k, t) * dim / ROOT_2PI
                           for k, t in enumerate(grid.times)])
    return FdosSignal(grid, values, normalization=float(dim), sampler="exact")


def enumerated_fdos(engine, grid: TimeGrid,
                    indices: np.ndarray | None = None) -> FdosSignal:
    """Exhaustive average of analytic basis-state echoes (unbiasedness oracle)."""
    if indices is None:
        if engine.subspace is not None:
            indices = engine.subspace.indices
        else:
            indices = np.arange(1 << engine.n_qubits, dtype=np.int64)
    norm = len(indices)
    values = np.empty(grid.n_t, dtype=complex)
    for k, t in enumerate(grid.times):
        values[k] = np.mean(engine.echoes_for_indices(indices, k, t)) \
            * norm / ROOT_2PI
    return FdosSignal(grid, values, normalization=float(norm),
                      sampler="enumerated")


# ---------------------------------------------------------------------------
# Hadamard-test shot model
# ---------------------------------------------------------------------------

def hadamard_test(overlap: complex, part: str, shots: int | None,
                  rng: np.random.Generator) -> tuple[float, float]:
    """(estimate, p0_hat) of one Hadamard test with the given exact overlap.

    The ancilla-|0> probability is p0 = (1 + Re z)/2 for part='real'
    (W = H) and (1 + Im z)/2 for part='imag' (W = S^dag H); the estimate
    2*p0_hat - 1 is unbiased for Re z / Im z.  ``shots=None`` is analytic.
    """
    comp = overlap.real if part == "real" else overlap.imag
    p0 = 0.5 * (1.0 + comp)
    if shots is None:
        return comp, p0
    if shots < 1:
        raise ValueError("shots must be >= 1")
    hits = rng.binomial(shots, min(max(p0, 0.0), 1.0))
    p0_hat = hits / shots
    return 2.0 * p0_hat - 1.0, p0_hat


def _sampled_mean_overlap(echoes: np.ndarray, n_reuse: int,
                          rng: np.random.Generator) -> complex:
    """Mean estimated overlap across states with N_r shots each, split 50/50.

    For N_r == 1 the single shot alternates between the real and imaginary
    test across states; for odd N_r >= 3 the extra shot alternates likewise.
    """
    m = len(echoes)
    base = n_reuse // 2
    extra = n_reuse - 2 * base  # 0 or 1
    alt = (np.arange(m) % 2 == 0).astype(np.int64)
    n_re = base + extra * alt
    n_im = base + extra * (1 - alt)
    p_re = np.clip(0.5 * (1.0 + echoes.real), 0.0, 1.0)
    p_im = np.clip(0.5 * (1.0 + echoes.imag), 0.0, 1.0)
    hits_re = rng.binomial(n_re, p_re)
    hits_im = rng.binomial(n_im, p_im)
    tot_re, tot_im = int(n_re.sum()), int(n_im.sum())
    est_re = 2.0 * hits_re.sum() / tot_re - 1.0 if tot_re else 0.0
    est_im = 2.0 * hits_im.sum() / tot_im - 1.0 if tot_im else 0.0
    return complex(est_re, est_im)


# ---------------------------------------------------------------------------
# random-state samplers
# ---------------------------------------------------------------------------

def _draw_batch(sampler: SamplerSpec, n_qubits: int, count: int,
                rng: np.random.Generator,
                hamming_indices: np.ndarray | None):
    """(indices, states): exactly one of the two is not None."""
    if sampler.kind == "bitflip":
        return rng.integers(0, 1 << n_qubits, size=count), None
    if sampler.kind == "hamming":
        pos = rng.integers(0, len(hamming_indices), size=count)
        return hamming_indices[pos], None
    if sampler.kind == "haar":
        d = 1 << n_qubits
        v = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
        return None, v / np.linalg.norm(v, axis=1, keepdims=True)
    if sampler.kind == "euler":
        return None, _euler_product_states(n_qubits, count, rng)
    if sampler.kind == "layered":
        ans = HardwareEfficientAnsatz(n_qubits, sampler.layers)
        params = rng.uniform(0.0, 2.0 * np.pi, size=(count, ans.n_parameters))
        zeros = np.zeros((count, 1 << n_qubits), dtype=complex)
        zeros[:, 0] = 1.0
        return None, ans.apply_batch(zeros, params)
    raise ValueError(f"sampler {sampler.kind!r} does not draw initial states")


def _euler_product_states(n: int, count: int,
                          rng: np.random.Generator) -> np.ndarray:
    """exp(-i a X) exp(-i b Z) exp(-i c X)|0> per qubit, angles U[0, 2pi)."""
    th = rng.uniform(0.0, 2.0 * np.pi, size=(count, n, 3))
    v = np.zeros((count, n, 2), dtype=complex)
    v[..., 0] = 1.0
    for stage, axis in ((2, "X"), (1, "Z"), (0, "X")):
        a = th[..., stage]
        if axis == "X":
            new0 = np.cos(a) * v[..., 0] - 1j * np.sin(a) * v[..., 1]
            new1 = np.cos(a) * v[..., 1] - 1j * np.sin(a) * v[..., 0]
            v = np.stack([new0, new1], axis=-1)
        else:
            v = v * np.stack([np.exp(-1j * a), np.exp(1j * a)], axis=-1)
    out = v[:, n - 1, :]
    for q in range(n - 2, -1, -1):
        out = (out[:, :, None] * v[:, q, None, :]).reshape(count, -1)
    return out


def draw_initial_state(sampler: SamplerSpec, n_qubits: int,
                       rng: np.random.Generator) -> StateVector:
    """One random initial state per the sampler kind."""
    ham_idx = subspace_index(n_qubits, sampler.M).indices \
        if sampler.kind == "hamming" else None
    indices, states = _draw_batch(sampler, n_qubits, 1, rng, ham_idx)
    if indices is not None:
        return StateVector.basis(n_qubits, int(indices[0]))
    return StateVector(n_qubits, states[0])


def dicke_state(n: int, M: int) -> StateVector:
    """Uniform superposition of all weight-M computational basis states."""
    idx = subspace_index(n, M).indices
    amp = np.zeros(1 << n, dtype=complex)
    amp[idx] = 1.0 / math.sqrt(len(idx))
    return StateVector(n, amp)


# ---------------------------------------------------------------------------
# sampling estimators
# ---------------------------------------------------------------------------

def sample_fdos(engine, grid: TimeGrid, sampler: SamplerSpec,
                shot_plan: ShotPlan, seed: int = 0) -> FdosSignal:
    """Random-initial-state FDOS estimate; unbiased for exact_fdos."""
    if sampler.kind.startswith("dqc1"):
        raise ValueError("DQC1 readout is estimated by dqc1_fdos")
    n = engine.n_qubits
    norm = sampler.space_size(n)
    if engine.subspace is not None:
        if sampler.kind != "hamming" or sampler.M != engine.subspace.M:
            raise ValueError("sampler does not match the engine's subspace")
    hamming_indices = subspace_index(n, sampler.M).indices \
        if sampler.kind == "hamming" else None

    values = np.empty(grid.n_t, dtype=complex)
    for k, t in enumerate(grid.times):
        rng = keyed_rng(seed, "sample-fdos", k)
        indices, states = _draw_batch(sampler, n, shot_plan.n_states, rng,
                                      hamming_indices)
        if indices is not None:
            echoes = engine.echoes_for_indices(indices, k, t)
        else:
            echoes = engine.echoes_for_states(states, k, t)
        if shot_plan.analytic:
            mean_overlap = complex(np.mean(echoes))
        else:
            mean_overlap = _sampled_mean_overlap(echoes, shot_plan.n_reuse, rng)
        values[k] = norm * mean_overlap / ROOT_2PI
    shots = np.zeros(grid.n_t, dtype=np.int64) if shot_plan.analytic \
        else np.full(grid.n_t, shot_plan.n_shots, dtype=np.int64)
    return FdosSignal(grid, values, normalization=float(norm),
                      sampler=sampler.id, seed=seed, n_shots=shots,
                      provenance={"n_reuse": shot_plan.n_reuse,
                                  "analytic": shot_plan.analytic})


def dqc1_fdos(engine, grid: TimeGrid, shot_plan: ShotPlan,
              seed: int = 0) -> FdosSignal:
    """One-clean-qubit estimate from the exact (sub)trace plus binomial noise.

    Statistically identical to the purified-register circuit; the 2n+1-qubit
    circuit is never materialized, but its gate counts are reported in the
    provenance when the engine carries a Trotter plan.
    """
    dim = engine.dim
    sub = engine.subspace
    values = np.empty(grid.n_t, dtype=complex)
    shots_re = shot_plan.n_shots // 2
    shots_im = shot_plan.n_shots - shots_re
    for k, t in enumerate(grid.times):
        z = engine.normalized_trace(k, t)
        if shot_plan.analytic:
            values[k] = dim * z / ROOT_2PI
            continue
        rng = keyed_rng(seed, "dqc1-fdos", k)
        est_re, _ = hadamard_test(z, "real", shots_re, rng)
        est_im, _ = hadamard_test(z, "imag", shots_im, rng)
        values[k] = dim * complex(est_re, est_im) / ROOT_2PI
    shots = np.zeros(grid.n_t, dtype=np.int64) if shot_plan.analytic \
        else np.full(grid.n_t, shot_plan.n_shots, dtype=np.int64)
    n = engine.n_qubits
    prov: dict = {"purified_qubits": 2 * n + 1,
                  "prep_gates": (2 * n if sub is None
                                 else _dicke_prep_gate_count(n, sub.M))}
    plan = getattr(engine, "plan", None)
    if plan is not None:
        prov["controlled_gate_cost_per_sample_step"] = \
            plan.controlled_gate_cost(grid.dt)
    sampler = "dqc1-full" if sub is None else f"dqc1-subspace({sub.M})"
    return FdosSignal(grid, values, normalization=float(dim), sampler=sampler,
                      seed=seed, n_shots=shots, provenance=prov)


def _dicke_prep_gate_count(n: int, m: int) -> int:
    """Gate count of the standard deterministic Dicke preparation network.

    Split-and-cyclic-shift blocks: each contributes 2 CNOTs plus one (doubly)
    controlled rotation; the network uses sum_{k=m..n-1} min(k, m) blocks
    plus m initial flips.  States themselves are prepared directly as
    amplitude vectors; this count exists for circuit costing only.
    """
    blocks = sum(min(k, m) for k in range(1, n))
    return m + 3 * blocks


# ---------------------------------------------------------------------------
# CSV + JSON sidecar serialization
# ---------------------------------------------------------------------------

def write_signal(signal: FdosSignal, path: str | Path,
                 header_comment: str | None = None) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["t", "re", "im", "n_shots", "sampler", "seed"])
        seed = "" if signal.seed is None else signal.seed
        for t, v, s in zip(signal.grid.times, signal.values, signal.n_shots):
            w.writerow([f"{t:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}",
                        int(s), signal.sampler, seed])
    sidecar = {
        "grid": {"dt": signal.grid.dt, "n_t": signal.grid.n_t},
        "normalization": signal.normalization,
        "sampler": signal.sampler,
        "seed": signal.seed,
        "window": signal.window,
        "provenance": signal.provenance,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2,
                                                    sort_keys=True))


def read_signal(path: str | Path) -> FdosSignal:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    rows = []
    with path.open() as fh:
        for line in fh:
            if not line.startswith("#"):
                rows.append(line)
    rd = csv.DictReader(rows)
    vals, shots = [], []
    sampler, seed = "exact", None
    for rec in rd:
        vals.append(complex(float(rec["re"]), float(rec["im"])))
        shots.append(int(rec["n_shots"]))
        sampler = rec["sampler"]
        seed = int(rec["seed"]) if rec["seed"] else None
    grid = TimeGrid(dt=float(meta["grid"]["dt"]), n_t=int(meta["grid"]["n_t"]))
    return FdosSignal(grid, np.array(vals), float(meta["normalization"]),
                      sampler=sampler, seed=seed,
                      n_shots=np.array(shots, dtype=np.int64),
                      window=meta.get("window", "none"),
                      provenance=meta.get("provenance", {}))
