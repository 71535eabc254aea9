"""Density-of-states estimation for spin and fermionic Hamiltonians.

Simulates the quantum protocols (DQC1 circuits and random-initial-state
Loschmidt-echo sampling) that estimate the full or fixed-particle-number
density of states of a Hamiltonian, reconstructs the resolution-limited DOS
by windowed inverse Fourier transforms, and derives thermodynamic
quantities, optionally under Trotterized dynamics, realistic gate-noise
models, and variational recompilation.
"""

__version__ = "0.1.0"
