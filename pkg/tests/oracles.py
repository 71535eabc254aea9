"""Independent dense-matrix oracles used across the test suite.

Everything here is built from first principles with numpy/scipy kron and
matrix exponentials, deliberately avoiding the package's permutation-based
fast paths, so the two routes check each other.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
MATS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli_matrix(letters: str, coefficient=1.0) -> np.ndarray:
    """Dense matrix for a Pauli string, little-endian (letters[0] = qubit 0)."""
    m = np.array([[coefficient]], dtype=complex)
    for c in reversed(letters):
        m = np.kron(m, MATS[c])
    return m


def hamiltonian_matrix(terms, n: int) -> np.ndarray:
    """terms: iterable of (letters, coefficient)."""
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for letters, coef in terms:
        h += coef * pauli_matrix(letters)
    return h


def ham_to_matrix(ham) -> np.ndarray:
    """Dense matrix of a qdos QubitHamiltonian via the kron route."""
    return hamiltonian_matrix(
        [(t.letters, t.coefficient.real) for t in ham.terms], ham.n_qubits)


def evolve_expm(h: np.ndarray, psi: np.ndarray, t: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * t * h) @ psi


def controlled_unitary(u: np.ndarray, ancilla_is_msb: bool = True) -> np.ndarray:
    """|0><0| x I + |1><1| x U with the ancilla as the most significant bit."""
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    if ancilla_is_msb:
        out[d:, d:] = u
    else:
        raise NotImplementedError
    return out


def subspace_block(h: np.ndarray, indices) -> np.ndarray:
    idx = np.asarray(indices)
    return h[np.ix_(idx, idx)]


def boltzmann_sum(evals: np.ndarray, beta: float) -> float:
    return float(np.sum(np.exp(-beta * evals)))


def thermal_energy(evals: np.ndarray, beta: float) -> float:
    w = np.exp(-beta * evals)
    return float(np.sum(evals * w) / np.sum(w))


def lindblad_ptm_diagonal(gammas: dict[str, float], lam0: float) -> np.ndarray:
    """Diagonal of the Pauli transfer matrix of exp(L) on 2 qubits.

    L(rho) = lam0 * sum_k gamma_k (P_k rho P_k - rho), built as an explicit
    16x16 superoperator (column stacking) and exponentiated.
    Returns f_j indexed by the 16 two-qubit Pauli labels in lexicographic
    order II, IX, IY, IZ, XI, ..., ZZ.
    """
    labels = [a + b for a in "IXYZ" for b in "IXYZ"]
    dim = 4
    sup = np.zeros((dim * dim, dim * dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for lab, g in gammas.items():
        # qubit 0 = letters[0] = LSB, matching pauli_matrix
        p = pauli_matrix(lab)
        sup += lam0 * g * (np.kron(p.conj(), p) - np.kron(eye, eye))
    e = scipy.linalg.expm(sup)
    f = np.zeros(16)
    for j, lab in enumerate(labels):
        p = pauli_matrix(lab)
        out = (e @ p.reshape(-1, order="F")).reshape(dim, dim, order="F")
        f[j] = np.real(np.trace(p.conj().T @ out)) / dim
    return f


def white_noise_error_baseline(reference: np.ndarray, energies: np.ndarray,
                               n_trials: int, rng, percentile: float = 1.0):
    """Distribution of the cosine-distance error for pure-noise estimates."""
    errs = np.empty(n_trials)
    ref_norm = np.sqrt(np.trapezoid(reference * reference, energies))
    for i in range(n_trials):
        f = rng.standard_normal(reference.size)
        num = np.trapezoid(f * reference, energies)
        den = np.sqrt(np.trapezoid(f * f, energies)) * ref_norm
        errs[i] = 1.0 - num / den
    return np.percentile(errs, percentile), errs
