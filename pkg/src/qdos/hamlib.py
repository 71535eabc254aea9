"""Model Hamiltonians, Jordan-Wigner encoding, and exact eigen-oracles.

Fermionic conventions: modes are ordered site-major, spin-minor
(mode ``2*site`` = spin up, ``2*site + 1`` = spin down), grid sites are
row-major, and the Jordan-Wigner string runs along increasing mode index.
Occupation maps to qubit value 1, so particle number equals the Hamming
weight of a computational basis index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .qcore import PauliString, QubitHamiltonian, identity_pauli
from .rng import keyed_rng

__all__ = [
    "HeisenbergSpec",
    "HubbardSpec",
    "FermionOpSum",
    "SubspaceIndex",
    "RescaleInfo",
    "build_heisenberg",
    "build_hubbard",
    "jordan_wigner",
    "rescale_spectrum",
    "subspace_index",
    "exact_spectrum",
    "dense_matrix",
    "subspace_matrix",
    "block_spectra",
    "conserves_number",
    "total_number_operator",
    "ham_to_text",
    "ham_from_text",
]


@dataclass(frozen=True)
class HeisenbergSpec:
    """Open Heisenberg chain with uniform coupling and on-site disorder."""

    n: int
    J: float = 1.0
    h: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("Heisenberg chain needs n >= 2")

    def fields(self) -> np.ndarray:
        """Site fields h_j, uniform on [-h, h], keyed by (seed, site)."""
        return np.array([
            keyed_rng("heisenberg-field", self.seed, j).uniform(-self.h, self.h)
            for j in range(self.n)])


@dataclass(frozen=True)
class HubbardSpec:
    """Open-boundary grid Hubbard model; n_qubits = 2 * rows * cols."""

    rows: int
    cols: int
    J: float = 1.0
    U: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("lattice dimensions must be positive")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour site pairs (row-major site indices)."""
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                s = r * self.cols + c
                if c + 1 < self.cols:
                    out.append((s, s + 1))
                if r + 1 < self.rows:
                    out.append((s, s + self.cols))
        return out


@dataclass(frozen=True)
class FermionOpSum:
    """Sum of products of creation/annihilation operators.

    Each term is ``(ops, coefficient)`` where ``ops`` is a sequence of
    ``(mode, is_creation)`` applied left to right as written.  Hermiticity
    of the sum is the caller's responsibility and is checked at encoding.
    """

    n_modes: int
    terms: tuple[tuple[tuple[tuple[int, bool], ...], float], ...]

    @classmethod
    def build(cls, n_modes: int, terms: Iterable) -> "FermionOpSum":
        canon = []
        for ops, coef in terms:
            ops = tuple((int(m), bool(dag)) for m, dag in ops)
            for m, _ in ops:
                if not 0 <= m < n_modes:
                    raise ValueError(f"mode {m} out of range")
            canon.append((ops, float(coef)))
        return cls(n_modes, tuple(canon))


@dataclass(frozen=True)
class SubspaceIndex:
    """Basis indices of fixed Hamming weight M, sorted ascending."""

    n_qubits: int
    M: int
    indices: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.indices)

    def position_lookup(self) -> np.ndarray:
        """Array mapping a full-space basis index to its block position (-1 outside)."""
        lut = np.full(1 << self.n_qubits, -1, dtype=np.int64)
        lut[self.indices] = np.arange(self.dimension)
        return lut


@dataclass(frozen=True)
class RescaleInfo:
    """Affine map H' = scale * H + shift * I used to bring spec(H') into [-1, 1]."""

    scale: float
    shift: float

    def to_original(self, rescaled: np.ndarray | float):
        return (np.asarray(rescaled) - self.shift) / self.scale

    def to_rescaled(self, original: np.ndarray | float):
        return self.scale * np.asarray(original) + self.shift

    def beta_original_to_rescaled(self, beta: float) -> float:
        """Inverse temperature in rescaled-energy units (shift ignored)."""
        return beta / self.scale


def build_heisenberg(spec: HeisenbergSpec) -> QubitHamiltonian:
    """H = -J sum_j (XX + YY + ZZ)_{j,j+1} + sum_j h_j Z_j on an open chain."""
    n = spec.n
    terms: list[tuple[str, float]] = []
    for j in range(n - 1):
        for letter in "XYZ":
            letters = ["I"] * n
            letters[j] = letters[j + 1] = letter
            terms.append(("".join(letters), -spec.J))
    for j, hj in enumerate(spec.fields()):
        if hj != 0.0:
            letters = ["I"] * n
            letters[j] = "Z"
            terms.append(("".join(letters), float(hj)))
    return QubitHamiltonian.from_terms(n, terms)


def build_hubbard(spec: HubbardSpec) -> FermionOpSum:
    """Hopping -J over nearest-neighbour bonds per spin plus U n_up n_dn."""
    terms = []
    for s1, s2 in spec.bonds():
        for sigma in (0, 1):
            m1, m2 = 2 * s1 + sigma, 2 * s2 + sigma
            terms.append((((m1, True), (m2, False)), -spec.J))
            terms.append((((m2, True), (m1, False)), -spec.J))
    for s in range(spec.n_sites):
        up, dn = 2 * s, 2 * s + 1
        terms.append((((up, True), (up, False), (dn, True), (dn, False)), spec.U))
    return FermionOpSum.build(spec.n_qubits, terms)


def _jw_factor(mode: int, dag: bool, n: int) -> list[PauliString]:
    """c_mode (or c^dag) as a two-term Pauli sum: Z-string times (X -/+ iY)/2."""
    zs = "Z" * mode
    pad = "I" * (n - mode - 1)
    sign = -1j if dag else 1j
    return [PauliString(n, zs + "X" + pad, 0.5),
            PauliString(n, zs + "Y" + pad, sign * 0.5)]


def jordan_wigner(f: FermionOpSum) -> QubitHamiltonian:
    """Standard Jordan-Wigner encoding of a Hermitian fermionic sum."""
    n = f.n_modes
    acc: dict[str, complex] = {}
    for ops, coef in f.terms:
        partial: list[PauliString] = [identity_pauli(n, coef)]
        for mode, dag in ops:
            factors = _jw_factor(mode, dag, n)
            partial = [p * q for p in partial for q in factors]
        for p in partial:
            acc[p.letters] = acc.get(p.letters, 0.0) + p.coefficient
    terms = []
    for letters, c in acc.items():
        if abs(c) < 1e-14:
            continue
        if abs(c.imag) > 1e-10:
            raise ValueError(f"non-Hermitian fermionic sum: {letters} -> {c}")
        terms.append((letters, c.real))
    return QubitHamiltonian.from_terms(n, terms)


def total_number_operator(n: int) -> QubitHamiltonian:
    """N = sum_j (I - Z_j)/2."""
    terms: list[tuple[str, float]] = [("I" * n, n / 2.0)]
    for j in range(n):
        letters = ["I"] * n
        letters[j] = "Z"
        terms.append(("".join(letters), -0.5))
    return QubitHamiltonian.from_terms(n, terms)


def conserves_number(ham: QubitHamiltonian, tol: float = 1e-12) -> bool:
    """Symbolic check of [H, N] = 0 via Pauli products (no dense matrices)."""
    n = ham.n_qubits
    acc: dict[str, complex] = {}
    for j in range(n):
        letters = ["I"] * n
        letters[j] = "Z"
        zj = PauliString(n, "".join(letters))
        for t in ham.terms:
            if t.letters[j] in "XY":
                prod = t * zj  # [P, Z_j] = 2 P Z_j when they anticommute
                acc[prod.letters] = acc.get(prod.letters, 0.0) + prod.coefficient
    return all(abs(c) <= tol for c in acc.values())


def subspace_index(n: int, M: int) -> SubspaceIndex:
    if not 0 <= M <= n:
        raise ValueError("particle number outside [0, n]")
    idx = np.arange(1 << n, dtype=np.int64)
    sel = idx[np.bitwise_count(idx) == M]
    assert len(sel) == math.comb(n, M)
    return SubspaceIndex(n, M, sel)


def dense_matrix(ham: QubitHamiltonian) -> np.ndarray:
    return ham.dense()


def subspace_matrix(ham: QubitHamiltonian, subspace: SubspaceIndex) -> np.ndarray:
    """Projected block  Pi_S H Pi_S  in the subspace basis."""
    lut = subspace.position_lookup()
    dim = subspace.dimension
    cols_full = subspace.indices
    block = np.zeros((dim, dim), dtype=complex)
    for t in ham.terms:
        rows_full = cols_full ^ t.x_mask
        pos = lut[rows_full]
        keep = pos >= 0
        if not np.any(keep):
            continue
        signs = 1.0 - 2.0 * (np.bitwise_count(rows_full & t.z_mask).astype(np.int64) & 1)
        vals = t.coefficient.real * (1j ** t.n_y) * signs
        block[pos[keep], np.arange(dim)[keep]] += vals[keep]
    return block


def exact_spectrum(ham: QubitHamiltonian,
                   subspace: SubspaceIndex | None = None,
                   max_dense_qubits: int = 12) -> np.ndarray:
    """Sorted eigenvalues, restricted to the subspace block when given."""
    if subspace is not None:
        return np.sort(np.linalg.eigvalsh(subspace_matrix(ham, subspace)))
    if ham.n_qubits > max_dense_qubits:
        if conserves_number(ham):
            return np.sort(np.concatenate(
                [exact_spectrum(ham, subspace_index(ham.n_qubits, m))
                 for m in range(ham.n_qubits + 1)]))
        raise ValueError(
            f"dense diagonalization beyond {max_dense_qubits} qubits; "
            "restrict to a subspace")
    if ham.n_qubits >= 10 and conserves_number(ham):
        # block diagonalization is much cheaper than the full dense solve
        return np.sort(np.concatenate(
            [exact_spectrum(ham, subspace_index(ham.n_qubits, m))
             for m in range(ham.n_qubits + 1)]))
    return np.sort(np.linalg.eigvalsh(dense_matrix(ham)))


def block_spectra(ham: QubitHamiltonian) -> dict[int, np.ndarray]:
    """Eigenvalues per particle-number block of a number-conserving H."""
    if not conserves_number(ham):
        raise ValueError("Hamiltonian does not conserve particle number")
    return {m: exact_spectrum(ham, subspace_index(ham.n_qubits, m))
            for m in range(ham.n_qubits + 1)}


def number_conserving_eigensystem(ham: QubitHamiltonian
                                  ) -> tuple[np.ndarray, np.ndarray]:
    """Full-space (eigenvalues, eigenvectors) assembled block by block.

    Much cheaper than one dense solve at n = 12: the largest half-filling
    block is 924-dimensional.
    """
    if not conserves_number(ham):
        raise ValueError("Hamiltonian does not conserve particle number")
    n = ham.n_qubits
    d = 1 << n
    evals = np.empty(d)
    evecs = np.zeros((d, d), dtype=complex)
    col = 0
    for m in range(n + 1):
        sub = subspace_index(n, m)
        w, v = np.linalg.eigh(subspace_matrix(ham, sub))
        k = sub.dimension
        evals[col:col + k] = w
        evecs[np.ix_(sub.indices, np.arange(col, col + k))] = v
        col += k
    return evals, evecs


def extremal_eigenvalues(ham: QubitHamiltonian,
                         mode: str = "exact") -> tuple[float, float]:
    """(E_min, E_max); mode='coef_sum' gives the loose |E| <= sum|c| bound."""
    if mode == "coef_sum":
        bound = float(np.sum(np.abs(ham.coefficients)))
        return -bound, bound
    evals = exact_spectrum(ham)
    return float(evals[0]), float(evals[-1])


def rescale_spectrum(ham: QubitHamiltonian,
                     mode: str = "exact") -> tuple[QubitHamiltonian, RescaleInfo]:
    """Affine-map H so the (estimated) spectrum spans exactly [-1, 1]."""
    emin, emax = extremal_eigenvalues(ham, mode)
    span = emax - emin
    if span <= 1e-12:
        raise ValueError("degenerate spectrum span; cannot rescale")
    a = 2.0 / span
    b = -(emax + emin) / span
    return ham.scaled(a, b), RescaleInfo(scale=a, shift=b)


# ---------------------------------------------------------------------------
# line-oriented text serialization: one `coefficient letters` pair per line
# ---------------------------------------------------------------------------

def ham_to_text(ham: QubitHamiltonian) -> str:
    lines = [f"{t.coefficient.real:.17g} {t.letters}" for t in ham.terms]
    return "\n".join(lines) + "\n"


def ham_from_text(text: str) -> QubitHamiltonian:
    terms = []
    n = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        coef_str, letters = line.split()
        if n is None:
            n = len(letters)
        elif len(letters) != n:
            raise ValueError("inconsistent qubit count in Hamiltonian file")
        terms.append((letters, float(coef_str)))
    if n is None:
        raise ValueError("empty Hamiltonian file")
    return QubitHamiltonian.from_terms(n, terms)
