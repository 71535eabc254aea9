"""Variational recompilation of Trotterized dynamics.

Each step trains ansatz parameters so that U(theta_next)|psi> reproduces
V(dt) U(theta_t)|psi>, global phase included.  The objective is the energy
of H_comp = -sum_j Z_j on the compilation state:

* phase_sensitive: an ancilla in |+> controls the loop
  W = Psi^dag U(theta')^dag V U(theta_t) Psi, followed by H on the ancilla;
  the energy over the n+1 qubits reaches its floor -(n+1) iff W|0> = |0>
  exactly (phase included).
* phase_free: the loop state itself on n qubits; floor -n iff compilation
  holds up to a global phase.

Training uses covariance root finding: the vector of (symmetrized)
covariances between probe observables and the Z pivots vanishes exactly on
joint-Z eigenstates, and a damped least-squares step on it with a
parameter-shift Jacobian converges from the warm start theta' = theta_t.
Optimization is noiseless; hardware noise enters only when the trained
circuits are used to evaluate Loschmidt echoes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .ansatz import HardwareEfficientAnsatz
from .evolve import PropagatorOracle, TrotterPlan
from .fdos import ROOT_2PI, FdosSignal, ShotPlan, TimeGrid, hadamard_test
from .noisemodel import PauliLindbladSpec, lindblad_noisy_gates, noisy_overlap
from .qcore import (
    DensityMatrix,
    PauliString,
    QubitHamiltonian,
    StateVector,
)
from .rng import keyed_rng

__all__ = [
    "build_ansatz",
    "PrepCircuit",
    "random_product_prep",
    "CompilationObjective",
    "compilation_energy",
    "covar_vector",
    "recompile_step",
    "recompile_trajectory",
    "ParamTrajectory",
    "noisy_fidelity",
    "FidelityPair",
    "variational_fdos",
    "save_trajectory",
    "load_trajectory",
]


def build_ansatz(n: int, layers: int) -> HardwareEfficientAnsatz:
    return HardwareEfficientAnsatz(n, layers)


@dataclass(frozen=True)
class PrepCircuit:
    """Initial-state preparation as an explicit rotation list (invertible)."""

    n_qubits: int
    gates: tuple[tuple[PauliString, float], ...]

    def apply_array(self, psi: np.ndarray) -> np.ndarray:
        out = psi
        for p, a in self.gates:
            perm, coefs = p.action()
            out = math.cos(a) * out - 1j * math.sin(a) * (coefs * out[perm])
        return out

    def apply_dagger_array(self, psi: np.ndarray) -> np.ndarray:
        out = psi
        for p, a in reversed(self.gates):
            perm, coefs = p.action()
            out = math.cos(a) * out + 1j * math.sin(a) * (coefs * out[perm])
        return out

    def state(self) -> StateVector:
        zero = np.zeros(1 << self.n_qubits, dtype=complex)
        zero[0] = 1.0
        return StateVector(self.n_qubits, self.apply_array(zero))


def random_product_prep(n: int, rng: np.random.Generator) -> PrepCircuit:
    """Random single-qubit X-Z-X rotations (the euler initial-state family)."""
    gates = []
    for q in range(n):
        for axis in ("X", "Z", "X"):
            letters = ["I"] * n
            letters[q] = axis
            gates.append((PauliString(n, "".join(letters)),
                          float(rng.uniform(0.0, 2.0 * np.pi))))
    return PrepCircuit(n, tuple(gates))


# ---------------------------------------------------------------------------
# compilation objective
# ---------------------------------------------------------------------------

@dataclass
class CompilationObjective:
    """One recompilation problem: find theta' with U(theta')|psi> = V U(theta_t)|psi>."""

    ansatz: HardwareEfficientAnsatz
    prep: PrepCircuit
    step_gates: tuple  # one Trotter step V as a (PauliString, angle) list
    theta_t: np.ndarray
    mode: str = "phase_sensitive"

    def __post_init__(self):
        if self.mode not in ("phase_sensitive", "phase_free"):
            raise ValueError(f"unknown objective mode {self.mode!r}")
        self.theta_t = np.asarray(self.theta_t, dtype=float)
        n = self.ansatz.n_qubits
        # cache gate index arrays once; only angles vary during optimization
        self._actions = [p.action() for p, _ in
                         self.ansatz.gates(np.zeros(self.ansatz.n_parameters))]
        zero = np.zeros(1 << n, dtype=complex)
        zero[0] = 1.0
        psi = self.prep.apply_array(zero)
        target = self._apply_ansatz(psi, self.theta_t)
        for p, a in self.step_gates:
            perm, coefs = p.action()
            if p.is_identity:
                target = np.exp(-1j * a) * target
            else:
                target = math.cos(a) * target \
                    - 1j * math.sin(a) * (coefs * target[perm])
        self._psi = psi
        self._target = target  # V U(theta_t) Psi |0>
        self._prep_actions = [(p.action(), a) for p, a in self.prep.gates]

    def _apply_ansatz(self, psi: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return self.ansatz.apply_batch(psi[None, :], np.asarray(theta)[None, :])[0]

    @property
    def n_compilation_qubits(self) -> int:
        n = self.ansatz.n_qubits
        return n + 1 if self.mode == "phase_sensitive" else n

    @property
    def energy_floor(self) -> float:
        return -float(self.n_compilation_qubits)

    def loop_amplitudes_batch(self, thetas: np.ndarray) -> np.ndarray:
        """W|0> = Psi^dag U(theta)^dag V U(theta_t) Psi |0> per parameter row."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        out = np.repeat(self._target[None, :], thetas.shape[0], axis=0)
        for k in range(len(self._actions) - 1, -1, -1):
            perm, coefs = self._actions[k]
            ang = thetas[:, k][:, None]
            out = np.cos(ang) * out + 1j * np.sin(ang) * (coefs * out[:, perm])
        for (perm, coefs), a in reversed(self._prep_actions):
            out = math.cos(a) * out + 1j * math.sin(a) * (coefs * out[:, perm])
        return out

    def loop_amplitudes(self, theta: np.ndarray) -> np.ndarray:
        return self.loop_amplitudes_batch(theta)[0]

    def compilation_state_batch(self, thetas: np.ndarray) -> np.ndarray:
        w0 = self.loop_amplitudes_batch(thetas)
        if self.mode == "phase_free":
            return w0
        b, d = w0.shape
        joint = np.empty((b, 2 * d), dtype=complex)
        joint[:, :d] = 0.5 * w0      # ancilla |0> branch: (|0..0> + W|0..0>)/2
        joint[:, d:] = -0.5 * w0     # ancilla |1> branch: (|0..0> - W|0..0>)/2
        joint[:, 0] += 0.5
        joint[:, d] += 0.5
        return joint

    def compilation_state(self, theta: np.ndarray) -> np.ndarray:
        """The state the energy/covariances are evaluated on."""
        return self.compilation_state_batch(theta)[0]

    def energy_of_state(self, state: np.ndarray) -> float:
        m = self.n_compilation_qubits
        probs = np.abs(state) ** 2
        idx = np.arange(state.size, dtype=np.int64)
        e = 0.0
        for j in range(m):
            z = np.where((idx >> j) & 1, -1.0, 1.0)
            e -= float(probs @ z)
        return e

    def step_fidelity(self, theta: np.ndarray) -> float:
        """|<psi| U^dag(theta) V U(theta_t) |psi>|^2."""
        trial = self._apply_ansatz(self._psi, theta)
        return float(np.abs(np.vdot(trial, self._target)) ** 2)

    def pivots(self) -> list[PauliString]:
        """The H_comp terms: one Z per compilation qubit."""
        m = self.n_compilation_qubits
        out = []
        for j in range(m):
            letters = ["I"] * m
            letters[j] = "Z"
            out.append(PauliString(m, "".join(letters)))
        return out

    def probes(self, seed_parts: tuple = (),
               n_random: int = 8) -> list[PauliString]:
        """1-local X and Z plus randomly drawn 3-local strings."""
        m = self.n_compilation_qubits
        out = []
        for letter in ("X", "Z"):
            for j in range(m):
                letters = ["I"] * m
                letters[j] = letter
                out.append(PauliString(m, "".join(letters)))
        if m >= 3 and n_random > 0:
            rng = keyed_rng("covar-probes", *seed_parts)
            for _ in range(n_random):
                qs = rng.choice(m, size=3, replace=False)
                letters = ["I"] * m
                for q in qs:
                    letters[int(q)] = "XYZ"[int(rng.integers(0, 3))]
                out.append(PauliString(m, "".join(letters)))
        return out


def compilation_energy(obj: CompilationObjective, theta: np.ndarray) -> float:
    """<H_comp> on the compilation state; floor iff compilation is exact."""
    return obj.energy_of_state(obj.compilation_state(theta))


def covar_vector(state: StateVector | np.ndarray,
                 observables: Sequence[PauliString],
                 pivots: Sequence[PauliString] | None = None) -> np.ndarray:
    """Symmetrized covariances Re<O P> - <O><P> against the pivot set.

    With the default pivot set (every single-qubit Z) the vector vanishes
    iff the state is a joint eigenstate of all pivots, i.e. a computational
    basis state.
    """
    psi = state.amplitudes if isinstance(state, StateVector) else state
    n = psi.size.bit_length() - 1
    if pivots is None:
        pivots = []
        for j in range(n):
            letters = ["I"] * n
            letters[j] = "Z"
            pivots.append(PauliString(n, "".join(letters)))
    o_psi = np.stack([_pauli_apply(p, psi) for p in observables])
    p_psi = np.stack([_pauli_apply(p, psi) for p in pivots])
    o_exp = (o_psi @ psi.conj()).real
    p_exp = (p_psi @ psi.conj()).real
    cross = (o_psi.conj() @ p_psi.T).real
    return (cross - np.outer(o_exp, p_exp)).ravel()


def _pauli_apply(p: PauliString, psi: np.ndarray) -> np.ndarray:
    perm, coefs = p.action()
    return coefs * psi[perm]


def _energy_batch(states: np.ndarray, m: int) -> np.ndarray:
    """<-sum_j Z_j> per row of a batch of m-qubit states."""
    probs = np.abs(states) ** 2
    idx = np.arange(states.shape[1], dtype=np.int64)
    z_total = m - 2 * np.bitwise_count(idx).astype(np.int64)
    return -(probs @ z_total.astype(float))


# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------

_SHIFT = math.pi / 4  # exact derivative shift for exp(-i*theta*P) gates


class _CovarEvaluator:
    """Batched covariance vector and parameter-shift Jacobian."""

    def __init__(self, obj: CompilationObjective, probes, pivots):
        self.obj = obj
        self.o_actions = [p.action() for p in probes]
        self.p_actions = [p.action() for p in pivots]

    def _parts(self, thetas: np.ndarray):
        """(f, cross, o_exp, p_exp) for a batch of parameter rows."""
        psi = self.obj.compilation_state_batch(thetas)
        o_psi = np.stack([coefs * psi[:, perm]
                          for perm, coefs in self.o_actions])   # (o, b, d)
        p_psi = np.stack([coefs * psi[:, perm]
                          for perm, coefs in self.p_actions])   # (p, b, d)
        o_exp = np.einsum("bd,obd->bo", psi.conj(), o_psi).real
        p_exp = np.einsum("bd,pbd->bp", psi.conj(), p_psi).real
        cross = np.einsum("obd,pbd->bop", o_psi.conj(), p_psi).real
        f = cross - o_exp[:, :, None] * p_exp[:, None, :]
        return f.reshape(thetas.shape[0] if thetas.ndim == 2 else 1, -1), \
            cross, o_exp, p_exp

    def value(self, theta: np.ndarray):
        f, cross, o_exp, p_exp = self._parts(np.atleast_2d(theta))
        return f[0], (cross[0], o_exp[0], p_exp[0])

    def jacobian(self, theta: np.ndarray, center_parts) -> np.ndarray:
        cross0, o0, p0 = center_parts
        n_par = theta.size
        shifted = np.repeat(theta[None, :], 2 * n_par, axis=0)
        shifted[np.arange(n_par), np.arange(n_par)] += _SHIFT
        shifted[n_par + np.arange(n_par), np.arange(n_par)] -= _SHIFT
        _, cross, o_exp, p_exp = self._parts(shifted)
        d_cross = cross[:n_par] - cross[n_par:]        # (k, o, p)
        d_o = o_exp[:n_par] - o_exp[n_par:]            # (k, o)
        d_p = p_exp[:n_par] - p_exp[n_par:]            # (k, p)
        jac = (d_cross - d_o[:, :, None] * p0[None, None, :]
               - o0[None, :, None] * d_p[:, None, :])
        return jac.reshape(n_par, -1).T


def recompile_step(obj: CompilationObjective, theta_start: np.ndarray,
                   optimizer: str = "covar", max_iters: int = 100,
                   tol: float = 1e-7, probe_seed: tuple = (0,),
                   n_random_probes: int = 8) -> tuple[np.ndarray, list[dict]]:
    """Optimize theta for one step; returns (theta_next, per-iteration diagnostics)."""
    theta = np.asarray(theta_start, dtype=float).copy()
    probes = obj.probes(probe_seed, n_random=n_random_probes)
    pivots = obj.pivots()
    ev = _CovarEvaluator(obj, probes, pivots)
    diag: list[dict] = []

    def record(th, fnorm_sq):
        diag.append({"energy": compilation_energy(obj, th),
                     "f_norm_sq": fnorm_sq,
                     "step_fidelity": obj.step_fidelity(th)})

    if optimizer == "covar":
        mu = 1e-3
        f, parts = ev.value(theta)
        record(theta, float(f @ f))
        for _ in range(max_iters):
            if math.sqrt(f @ f) < tol or \
                    abs(diag[-1]["energy"] - obj.energy_floor) < tol:
                break
            jac = ev.jacobian(theta, parts)
            jtj = jac.T @ jac
            jtf = jac.T @ f
            accepted = False
            for _ in range(12):
                try:
                    delta = np.linalg.solve(
                        jtj + mu * np.diag(np.diag(jtj))
                        + 1e-12 * np.eye(jtj.shape[0]), -jtf)
                except np.linalg.LinAlgError:
                    mu *= 4.0
                    continue
                cand = theta + delta
                f_c, parts_c = ev.value(cand)
                if f_c @ f_c < f @ f:
                    theta, f, parts = cand, f_c, parts_c
                    mu = max(mu / 3.0, 1e-12)
                    accepted = True
                    break
                mu *= 4.0
            record(theta, float(f @ f))
            if not accepted:
                break
    elif optimizer == "gradient":
        lr = 0.1
        energy = compilation_energy(obj, theta)
        f, _ = ev.value(theta)
        record(theta, float(f @ f))
        for _ in range(max_iters):
            if abs(energy - obj.energy_floor) < tol:
                break
            n_par = theta.size
            shifted = np.repeat(theta[None, :], 2 * n_par, axis=0)
            shifted[np.arange(n_par), np.arange(n_par)] += _SHIFT
            shifted[n_par + np.arange(n_par), np.arange(n_par)] -= _SHIFT
            states = obj.compilation_state_batch(shifted)
            energies = _energy_batch(states, obj.n_compilation_qubits)
            grad = energies[:n_par] - energies[n_par:]
            step = lr
            for _ in range(20):
                cand = theta - step * grad
                e_cand = compilation_energy(obj, cand)
                if e_cand < energy:
                    theta, energy = cand, e_cand
                    break
                step /= 2.0
            else:
                break
            f, _ = ev.value(theta)
            record(theta, float(f @ f))
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if not np.all(np.isfinite(theta)) or not np.isfinite(diag[-1]["energy"]):
        raise RuntimeError(f"optimizer diverged: {diag[-1]}")
    return theta, diag


@dataclass
class ParamTrajectory:
    """Trained parameters per time step, with per-step diagnostics."""

    times: np.ndarray
    thetas: np.ndarray  # (n_steps + 1, n_params); row 0 is all zeros
    step_fidelities: np.ndarray
    objectives: np.ndarray
    cumulative_fidelities: np.ndarray
    seed: int = 0
    provenance: dict = field(default_factory=dict)


def recompile_trajectory(ham: QubitHamiltonian, prep: PrepCircuit, dt: float,
                         n_steps: int, ansatz: HardwareEfficientAnsatz,
                         optimizer: str = "covar", order: int = 2,
                         mode: str = "phase_sensitive", seed: int = 0,
                         max_iters: int = 100, tol: float = 1e-7,
                         oracle: PropagatorOracle | None = None
                         ) -> ParamTrajectory:
    """Chain recompile_step from theta = 0, tracking fidelity vs exact dynamics."""
    plan = TrotterPlan(ham, dt=dt, order=order)
    step_gates = plan.gates()
    n_par = ansatz.n_parameters
    thetas = np.zeros((n_steps + 1, n_par))
    step_f = np.ones(n_steps + 1)
    objs = np.zeros(n_steps + 1)
    cum_f = np.ones(n_steps + 1)
    if oracle is None:
        oracle = PropagatorOracle.from_hamiltonian(ham)
    psi0 = prep.state().amplitudes
    for s in range(1, n_steps + 1):
        obj = CompilationObjective(ansatz, prep, step_gates,
                                   theta_t=thetas[s - 1], mode=mode)
        theta, diag = recompile_step(obj, thetas[s - 1], optimizer=optimizer,
                                     max_iters=max_iters, tol=tol,
                                     probe_seed=(seed, s),
                                     )
        thetas[s] = theta
        step_f[s] = diag[-1]["step_fidelity"]
        objs[s] = diag[-1]["energy"]
        trial = ansatz.apply_batch(psi0[None, :], theta[None, :])[0]
        exact = oracle.evolve_array(psi0, s * dt)
        cum_f[s] = float(np.abs(np.vdot(exact, trial)) ** 2)
    return ParamTrajectory(times=np.arange(n_steps + 1) * dt, thetas=thetas,
                           step_fidelities=step_f, objectives=objs,
                           cumulative_fidelities=cum_f, seed=seed,
                           provenance={"dt": dt, "order": order, "mode": mode,
                                       "optimizer": optimizer})


class FidelityPair(NamedTuple):
    """The 1/d-prefactor definition next to the plain state overlap."""

    literal: float
    overlap: float


def noisy_fidelity(rho_ideal: DensityMatrix | np.ndarray,
                   rho_actual: DensityMatrix | np.ndarray) -> FidelityPair:
    """(1/d) Tr[rho rho'] and the companion overlap Tr[rho rho']."""
    a = rho_ideal.matrix if isinstance(rho_ideal, DensityMatrix) else rho_ideal
    b = rho_actual.matrix if isinstance(rho_actual, DensityMatrix) else rho_actual
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    overlap = float(np.real(np.trace(a @ b)))
    return FidelityPair(literal=overlap / a.shape[0], overlap=overlap)


def variational_fdos(trajectories: Sequence[ParamTrajectory],
                     preps: Sequence[PrepCircuit],
                     ansatz: HardwareEfficientAnsatz,
                     grid: TimeGrid,
                     noise: PauliLindbladSpec | None = None,
                     shot_plan: ShotPlan | None = None,
                     seed: int = 0) -> FdosSignal:
    """FDOS from Loschmidt echoes of the trained circuits.

    One trajectory per sampled initial state; echoes are Hadamard tests on
    the controlled ansatz (decomposed gate level), run through the
    Pauli-Lindblad density-matrix model when ``noise`` is given.
    """
    if len(trajectories) != len(preps):
        raise ValueError("one trajectory per initial state is required")
    n = ansatz.n_qubits
    d = 1 << n
    for tr in trajectories:
        if tr.thetas.shape[0] < grid.n_t:
            raise ValueError("trajectory shorter than the time grid")
        if not np.allclose(np.diff(tr.times[:2]), grid.dt):
            raise ValueError("trajectory step does not match the grid")
    values = np.empty(grid.n_t, dtype=complex)
    analytic = shot_plan is None or shot_plan.analytic
    for k in range(grid.n_t):
        rng = keyed_rng(seed, "vardyn-fdos", k)
        acc = 0.0 + 0.0j
        for s, (tr, prep) in enumerate(zip(trajectories, preps)):
            psi = prep.state().amplitudes
            theta = tr.thetas[k]
            if k == 0:
                z = 1.0 + 0.0j if noise is None else noisy_overlap(
                    lindblad_noisy_gates(ansatz.gates(theta), n, noise), psi)
            elif noise is None:
                trial = ansatz.apply_batch(psi[None, :], theta[None, :])[0]
                z = complex(np.vdot(psi, trial))
            else:
                gates = lindblad_noisy_gates(ansatz.gates(theta), n, noise)
                z = noisy_overlap(gates, psi)
            if analytic:
                acc += z
            else:
                sh_re = shot_plan.n_shots // 2
                sh_im = shot_plan.n_shots - sh_re
                est_re, _ = hadamard_test(z, "real", sh_re, rng)
                est_im, _ = hadamard_test(z, "imag", sh_im, rng)
                acc += complex(est_re, est_im)
        values[k] = d * acc / (len(trajectories) * ROOT_2PI)
    shots = np.zeros(grid.n_t, dtype=np.int64) if analytic \
        else np.full(grid.n_t, shot_plan.n_shots * len(trajectories),
                     dtype=np.int64)
    label = "variational" if noise is None \
        else f"variational[lambda0={noise.lambda0:g}]"
    return FdosSignal(grid, values, normalization=float(d), sampler=label,
                      seed=seed, n_shots=shots,
                      provenance={"n_states": len(trajectories)})


# ---------------------------------------------------------------------------
# trajectory files
# ---------------------------------------------------------------------------

def save_trajectory(tr: ParamTrajectory, path: str | Path) -> None:
    payload = {
        "times": tr.times.tolist(),
        "thetas": tr.thetas.tolist(),
        "step_fidelities": tr.step_fidelities.tolist(),
        "objectives": tr.objectives.tolist(),
        "cumulative_fidelities": tr.cumulative_fidelities.tolist(),
        "seed": tr.seed,
        "provenance": tr.provenance,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_trajectory(path: str | Path) -> ParamTrajectory:
    raw = json.loads(Path(path).read_text())
    return ParamTrajectory(
        times=np.array(raw["times"]),
        thetas=np.array(raw["thetas"]),
        step_fidelities=np.array(raw["step_fidelities"]),
        objectives=np.array(raw["objectives"]),
        cumulative_fidelities=np.array(raw["cumulative_fidelities"]),
        seed=int(raw["seed"]),
        provenance=raw.get("provenance", {}),
    )
