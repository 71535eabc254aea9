"""Layered hardware-efficient circuit: X-Z-Y rotations then a ZZ chain.

Used both as the parametrized ansatz for variational recompilation and,
with uniformly random angles, as a tunable random-state sampler that
interpolates between 1-design and 2-design behaviour with the layer count.
All-zero parameters give the identity circuit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import PauliString, StateVector, apply_pauli_rotation

__all__ = ["HardwareEfficientAnsatz"]


@dataclass(frozen=True)
class HardwareEfficientAnsatz:
    n_qubits: int
    layers: int

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError("ansatz needs at least 2 qubits")
        if self.layers < 1:
            raise ValueError("ansatz needs at least 1 layer")

    @property
    def n_parameters(self) -> int:
        n = self.n_qubits
        return self.layers * (3 * n + (n - 1))

    def gates(self, params: np.ndarray) -> list[tuple[PauliString, float]]:
        """Ordered (bare Pauli, angle) list; rotation is exp(-i*angle*P)."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_parameters,):
            raise ValueError(
                f"expected {self.n_parameters} parameters, got {params.shape}")
        n = self.n_qubits
        out: list[tuple[PauliString, float]] = []
        k = 0
        for _ in range(self.layers):
            for letter in "XZY":
                for q in range(n):
                    letters = ["I"] * n
                    letters[q] = letter
                    out.append((PauliString(n, "".join(letters)), params[k]))
                    k += 1
            for q in range(n - 1):
                letters = ["I"] * n
                letters[q] = letters[q + 1] = "Z"
                out.append((PauliString(n, "".join(letters)), params[k]))
                k += 1
        return out

    def apply(self, state: StateVector, params: np.ndarray) -> StateVector:
        out = state
        for p, angle in self.gates(params):
            out = apply_pauli_rotation(out, p, angle)
        return out

    def apply_batch(self, psis: np.ndarray, params: np.ndarray) -> np.ndarray:
        """Apply the circuit to a batch of states with per-row parameters.

        psis: (m, 2**n) complex, params: (m, n_parameters).
        """
        m, d = psis.shape
        if d != 1 << self.n_qubits or params.shape != (m, self.n_parameters):
            raise ValueError("batch shape mismatch")
        out = np.array(psis, dtype=complex)
        n = self.n_qubits
        k = 0
        for _ in range(self.layers):
            specs = [(letter, q) for letter in "XZY" for q in range(n)]
            specs += [("ZZ", q) for q in range(n - 1)]
            for kind, q in specs:
                letters = ["I"] * n
                if kind == "ZZ":
                    letters[q] = letters[q + 1] = "Z"
                else:
                    letters[q] = kind
                perm, coefs = PauliString(n, "".join(letters)).action()
                ang = params[:, k][:, None]
                out = np.cos(ang) * out \
                    - 1j * np.sin(ang) * (coefs[None, :] * out[:, perm])
                k += 1
        return out
