"""Exact and Trotterized time evolution plus unitary-fidelity diagnostics.

A :class:`TrotterPlan` expands a Pauli-sum Hamiltonian into an ordered gate
list per product-formula step.  Requested times are snapped to the nearest
multiple of the step (`snap`), since the Fourier machinery downstream needs
a uniform time grid anyway.

For long time series at n = 12 the repeated-matmul route is hopeless, so
`unitary_eig` diagonalizes the (normal) one-step unitary once via a Hermitian
combination of U + U^dag and (U - U^dag)/i, with near-degenerate clusters
fixed up by small Schur solves; traces of all powers then cost O(d) each.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .hamlib import SubspaceIndex, RescaleInfo
from .qcore import (
    PauliString,
    QubitHamiltonian,
    StateVector,
    apply_controlled_pauli_rotation,
    apply_pauli_rotation,
    controlled_rotation_gate_cost,
)

__all__ = [
    "TrotterPlan",
    "PropagatorOracle",
    "exact_evolve",
    "trotter_evolve",
    "controlled_trotter_evolve",
    "trotter_unitary_fidelity",
    "step_unitary",
    "unitary_eig",
    "trotter_trace_series",
    "trotter_fidelity_series",
]


@dataclass(frozen=True)
class TrotterPlan:
    """Product-formula plan: one gate list applied `n_steps(t)` times."""

    ham: QubitHamiltonian
    dt: float
    order: int = 1
    controlled: bool = False

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("only first- and second-order plans supported")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def n_qubits(self) -> int:
        return self.ham.n_qubits

    def gates(self) -> tuple[tuple[PauliString, float], ...]:
        """(bare Pauli, angle) pairs for one step, coefficient folded in."""
        first = tuple((PauliString(t.n_qubits, t.letters),
                       t.coefficient.real * self.dt) for t in self.ham.terms)
        if self.order == 1:
            return first
        half = tuple((p, a / 2) for p, a in first)
        return half + tuple(reversed(half))

    def snap(self, t: float) -> tuple[int, float, bool]:
        """(n_steps, snapped time, whether snapping moved t)."""
        n = int(round(t / self.dt))
        snapped = n * self.dt
        moved = abs(snapped - t) > 1e-9 * max(1.0, abs(t))
        return n, snapped, moved

    def gate_count(self, t: float) -> int:
        """Number of (controlled) Pauli rotations to reach time t."""
        n, _, _ = self.snap(t)
        return n * len(self.gates())

    def controlled_gate_cost(self, t: float) -> dict[str, int]:
        """Aggregate 1-/2-qubit gate counts after the standard decomposition."""
        n, _, _ = self.snap(t)
        total = {"cnot": 0, "single_qubit": 0, "controlled_rz": 0}
        for p, _ in self.gates():
            for k, v in controlled_rotation_gate_cost(p).items():
                total[k] += v
        return {k: n * v for k, v in total.items()}


@dataclass
class PropagatorOracle:
    """Eigendecomposition-backed exact propagator for H (or a subspace block)."""

    n_qubits: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    subspace: SubspaceIndex | None = None
    rescale: RescaleInfo | None = None

    @classmethod
    def from_hamiltonian(cls, ham: QubitHamiltonian,
                         subspace: SubspaceIndex | None = None,
                         rescale: RescaleInfo | None = None) -> "PropagatorOracle":
        from .hamlib import dense_matrix, subspace_matrix
        mat = subspace_matrix(ham, subspace) if subspace is not None \
            else dense_matrix(ham)
        evals, evecs = np.linalg.eigh(mat)
        return cls(ham.n_qubits, evals, evecs, subspace, rescale)

    @property
    def dimension(self) -> int:
        return len(self.eigenvalues)

    def evolve_array(self, psi: np.ndarray, t: float) -> np.ndarray:
        amp = self.eigenvectors.conj().T @ psi
        amp *= np.exp(-1j * self.eigenvalues * t)
        return self.eigenvectors @ amp

    def propagator(self, t: float) -> np.ndarray:
        return (self.eigenvectors * np.exp(-1j * self.eigenvalues * t)) \
            @ self.eigenvectors.conj().T


def exact_evolve(oracle: PropagatorOracle, state: StateVector,
                 t: float) -> StateVector:
    """exp(-i H t)|psi> from the eigen-oracle (full-space oracles only)."""
    if oracle.subspace is not None:
        raise ValueError("subspace oracles evolve block coordinates; "
                         "use evolve_array")
    if state.amplitudes.size != oracle.dimension:
        raise ValueError("state dimension does not match oracle")
    return StateVector(state.n_qubits, oracle.evolve_array(state.amplitudes, t))


def trotter_evolve(plan: TrotterPlan, state: StateVector, t: float) -> StateVector:
    """Apply n_steps(t) sequential product-formula steps (exactly unitary)."""
    if t < 0:
        raise ValueError("negative time; use conjugate symmetry instead")
    n, _, _ = plan.snap(t)
    gates = plan.gates()
    out = state
    for _ in range(n):
        for p, angle in gates:
            out = apply_pauli_rotation(out, p, angle)
    return out


def controlled_trotter_evolve(plan: TrotterPlan, joint_state: StateVector,
                              ancilla: int, t: float) -> StateVector:
    """Ancilla-|1> branch evolved, |0> branch untouched."""
    if not plan.controlled:
        raise ValueError("plan was not built for controlled evolution")
    n, _, _ = plan.snap(t)
    out = joint_state
    pad_gates = [(PauliString(joint_state.n_qubits,
                              _pad_letters(p.letters, ancilla,
                                           joint_state.n_qubits)), a)
                 for p, a in plan.gates()]
    for _ in range(n):
        for p, angle in pad_gates:
            out = apply_controlled_pauli_rotation(out, ancilla, p, angle)
    return out


def _pad_letters(letters: str, ancilla: int, n_joint: int) -> str:
    if len(letters) == n_joint:
        return letters
    if len(letters) != n_joint - 1 or ancilla != n_joint - 1:
        raise ValueError("controlled plans expect the ancilla as the top qubit")
    return letters + "I"


def trotter_unitary_fidelity(oracle: PropagatorOracle, plan: TrotterPlan,
                             t: float) -> complex:
    """(1/d) Tr[exp(+iHt) U_trotter(t)] via dense matrices (desk scale)."""
    d = oracle.dimension
    n, t_snap, _ = plan.snap(t)
    u = step_unitary(plan)
    u = np.linalg.matrix_power(u, n)
    m = oracle.eigenvectors.conj().T @ u @ oracle.eigenvectors
    return complex(np.sum(np.exp(1j * oracle.eigenvalues * t_snap)
                          * np.diag(m)) / d)


def step_unitary(plan: TrotterPlan) -> np.ndarray:
    """Dense matrix of a single Trotter step."""
    d = 1 << plan.n_qubits
    u = np.eye(d, dtype=complex)
    for p, angle in plan.gates():
        if p.is_identity:
            u *= np.exp(-1j * angle)
            continue
        perm, coefs = p.action()
        u = np.cos(angle) * u - 1j * np.sin(angle) * (coefs[:, None] * u[perm, :])
    return u


def _matrix_power(u: np.ndarray, k: int) -> np.ndarray:
    out = None
    base = u
    while k:
        if k & 1:
            out = base.copy() if out is None else out @ base
        k >>= 1
        if k:
            base = base @ base
    return np.eye(u.shape[0], dtype=complex) if out is None else out


def unitary_eig(u: np.ndarray, cluster_tol: float = 1e-6,
                offdiag_tol: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a unitary matrix with orthonormal eigenvectors.

    Diagonalizes the Hermitian combination a*(U+U^dag)/2 + b*(U-U^dag)/(2i)
    (cheap zheevd instead of a general zgeev), then resolves clusters that are
    near-degenerate in that combination with small dense Schur factorizations.
    Returns unit-modulus eigenvalues and a unitary eigenvector matrix.
    """
    a, b = np.cos(0.83), np.sin(0.83)
    herm = a * 0.5 * (u + u.conj().T) + b * (-0.5j) * (u - u.conj().T)
    w, v = np.linalg.eigh(herm)
    t = v.conj().T @ (u @ v)
    lam = np.diag(t).copy()
    # contiguous clusters in w can mix eigenvectors of u; fix them locally
    splits = np.nonzero(np.diff(w) > cluster_tol)[0] + 1
    for blk in np.split(np.arange(len(w)), splits):
        if len(blk) < 2:
            continue
        sl = slice(blk[0], blk[-1] + 1)
        tb, zb = scipy.linalg.schur(t[sl, sl], output="complex")
        v[:, sl] = v[:, sl] @ zb
        lam[sl] = np.diag(tb)
        t[sl, sl] = np.diag(np.diag(tb))
    resid = np.max(np.abs(t - np.diag(np.diag(t))))
    if resid > offdiag_tol:
        raise RuntimeError(
            f"unitary_eig residual {resid:.2e}; increase cluster_tol")
    return lam / np.abs(lam), v


def trotter_trace_series(plan: TrotterPlan, steps_per_sample: int,
                         n_samples: int,
                         subspace: SubspaceIndex | None = None,
                         precomputed: tuple[np.ndarray, np.ndarray] | None = None,
                         ) -> np.ndarray:
    """Tr_S[U_trotter(k * steps_per_sample * dt)] for k = 0..n_samples-1."""
    if precomputed is None:
        lam, v = unitary_eig(_matrix_power(step_unitary(plan), steps_per_sample))
    else:
        lam, v = precomputed
    if subspace is None:
        weights = np.sum(np.abs(v) ** 2, axis=0)
    else:
        weights = np.sum(np.abs(v[subspace.indices, :]) ** 2, axis=0)
    out = np.empty(n_samples, dtype=complex)
    p = np.ones_like(lam)
    for k in range(n_samples):
        out[k] = weights @ p
        p *= lam
    return out


def trotter_fidelity_series(plan: TrotterPlan, steps_per_sample: int,
                            n_samples: int, ham_eigenvalues: np.ndarray,
                            ham_eigenvectors: np.ndarray,
                            precomputed: tuple[np.ndarray, np.ndarray] | None = None,
                            ) -> np.ndarray:
    """(1/d) Tr[exp(+iHt_k) U_trotter(t_k)] on the sample grid."""
    if precomputed is None:
        lam, v = unitary_eig(_matrix_power(step_unitary(plan), steps_per_sample))
    else:
        lam, v = precomputed
    c = (np.abs(ham_eigenvectors.conj().T @ v) ** 2).astype(complex)
    d = c.shape[0]
    dt_samp = steps_per_sample * plan.dt
    out = np.empty(n_samples, dtype=complex)
    p = np.ones_like(lam)
    chunk = max(1, min(256, (1 << 24) // max(d, 1)))
    for start in range(0, n_samples, chunk):
        ks = np.arange(start, min(start + chunk, n_samples))
        lampow = np.empty((len(ks), d), dtype=complex)
        for row in range(len(ks)):
            lampow[row] = p
            p = p * lam
        eph = np.exp(1j * np.outer(ks * dt_samp, ham_eigenvalues))
        out[ks] = np.einsum("kd,kd->k", eph @ c, lampow) / d
    return out
