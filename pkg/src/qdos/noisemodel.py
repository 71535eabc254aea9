"""Hardware error models attached to controlled Trotter/ansatz circuits.

Two models:

* Early fault-tolerant: every controlled Pauli rotation is followed by
  single-qubit depolarizing noise of probability lambda on the ancilla and
  on the two endpoint qubits of the rotation's support.  The model is
  parametrized by a total circuit error rate xi = lambda * N_gates, with
  N_gates the rotation count of the full-length circuit.  Depolarizing is
  the replacement form rho -> (1-p) rho + p I/2 (equivalently probability
  p spread uniformly over all single-qubit Paulis including identity).

* Sparse Pauli-Lindblad pair channels: per qubit pair, rates gamma_k over
  the 15 non-identity two-qubit Paulis generate a Pauli-diagonal channel
  with transfer-matrix diagonal
  f_j = prod_k [w_k + (1 - w_k)(-1)^{<j,k>}],  w_k = (1 + e^{-2 lambda0 gamma_k})/2,
  converted to Pauli-channel probabilities by the Walsh-Hadamard transform
  c_b = (1/16) sum_a (-1)^{<a,b>} f_a.  Channels act after each entangling
  gate: one on (ancilla, target) for controlled single-qubit rotations, and
  for wider rotations one on the support endpoints plus one on (ancilla,
  nearest support qubit).

Noise experiments run on the density-matrix path with the DQC1 trace trick
replaced by explicit ancilla simulation.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .evolve import TrotterPlan
from .fdos import ROOT_2PI, FdosSignal, ShotPlan, TimeGrid, hadamard_test
from .hamlib import SubspaceIndex
from .qcore import PauliChannel, PauliString, symplectic_product
from .rng import keyed_rng

__all__ = [
    "TWO_QUBIT_PAULIS",
    "DepolSpec",
    "PauliLindbladSpec",
    "depolarizing_channel",
    "lindblad_fidelities",
    "lindblad_to_kraus",
    "fidelities_from_probs",
    "NoisyGate",
    "NoisyControlledPlan",
    "attach_depolarizing",
    "attach_lindblad",
    "lindblad_noisy_gates",
    "noisy_overlap",
    "noisy_dqc1_signal",
    "fit_exponential_envelope",
    "synthetic_gamma_table",
    "write_gamma_table",
    "read_gamma_table",
    "bundled_gamma_table",
]

_LABELS_2Q = tuple(a + b for a in "IXYZ" for b in "IXYZ")
TWO_QUBIT_PAULIS = tuple(l for l in _LABELS_2Q if l != "II")

# <a,b> over all 16x16 two-qubit Pauli pairs, reused by the Walsh transforms
_SYMPL = np.array([[symplectic_product(PauliString(2, a), PauliString(2, b))
                    for b in _LABELS_2Q] for a in _LABELS_2Q], dtype=np.int64)
_WALSH_SIGNS = 1.0 - 2.0 * _SYMPL


@dataclass(frozen=True)
class DepolSpec:
    """Total circuit error rate xi spread over N_gates noisy rotations."""

    xi: float
    n_gates: int

    def __post_init__(self):
        if self.n_gates < 1:
            raise ValueError("n_gates must be positive")
        lam = self.xi / self.n_gates
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"per-gate error rate {lam} outside [0, 1]")

    @property
    def lam(self) -> float:
        return self.xi / self.n_gates

    @classmethod
    def for_plan(cls, plan: TrotterPlan, xi: float, t_max: float) -> "DepolSpec":
        return cls(xi=xi, n_gates=plan.gate_count(t_max))


@dataclass(frozen=True)
class PauliLindbladSpec:
    """Per-pair generator rates, all scaled by the overall multiplier lambda0."""

    lambda0: float
    pair_gammas: dict

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be non-negative")
        for pair, gam in self.pair_gammas.items():
            for lab, g in gam.items():
                if lab not in TWO_QUBIT_PAULIS:
                    raise ValueError(f"bad generator label {lab!r} for {pair}")
                if g < 0:
                    raise ValueError("generator rates must be non-negative")

    def gammas(self, pair: tuple[int, int]) -> dict[str, float]:
        key = (min(pair), max(pair))
        if key not in self.pair_gammas:
            raise ValueError(f"no gamma assignment for qubit pair {key}")
        return self.pair_gammas[key]


def depolarizing_channel(p: float, k: int = 1) -> PauliChannel:
    """Replacement-form depolarizing: rho -> (1-p) rho + p I/2^k."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing probability outside [0, 1]")
    if k == 1:
        labels = ("I", "X", "Y", "Z")
    elif k == 2:
        labels = _LABELS_2Q
    else:
        raise ValueError("depolarizing channels implemented for k <= 2")
    n_p = len(labels)
    probs = [1.0 - p + p / n_p] + [p / n_p] * (n_p - 1)
    return PauliChannel(k, labels, tuple(probs))


def lindblad_fidelities(spec: PauliLindbladSpec,
                        pair: tuple[int, int]) -> np.ndarray:
    """Pauli-transfer-matrix diagonal f_j of exp(L), 16 entries (II first)."""
    gam = spec.gammas(pair)
    f = np.ones(16)
    for lab, g in gam.items():
        k = _LABELS_2Q.index(lab)
        w = 0.5 * (1.0 + math.exp(-2.0 * spec.lambda0 * g))
        f *= w + (1.0 - w) * _WALSH_SIGNS[:, k]
    return f


def lindblad_to_kraus(spec: PauliLindbladSpec,
                      pair: tuple[int, int]) -> PauliChannel:
    """Pauli channel with c_b = (1/16) sum_a (-1)^{<a,b>} f_a."""
    f = lindblad_fidelities(spec, pair)
    c = (_WALSH_SIGNS.T @ f) / 16.0
    if c.min() < -1e-8:
        raise ValueError(f"materially negative Kraus coefficient {c.min():.3e}")
    if np.any(c < 0.0):
        warnings.warn("clipping tiny negative Pauli-channel coefficients")
        c = np.clip(c, 0.0, None)
    return PauliChannel(2, _LABELS_2Q, tuple(float(x) for x in c))


def fidelities_from_probs(probs: np.ndarray) -> np.ndarray:
    """Inverse (forward Walsh) transform: f_a = sum_b (-1)^{<a,b>} c_b."""
    return _WALSH_SIGNS @ np.asarray(probs, dtype=float)


# ---------------------------------------------------------------------------
# noisy controlled plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoisyGate:
    """One controlled rotation plus the channels applied after it.

    ``channels`` entries are (PauliChannel, target qubit tuple) on the
    joint register; the ancilla is qubit index n (top).
    """

    pauli: PauliString  # on the main register
    angle: float
    channels: tuple


@dataclass(frozen=True)
class NoisyControlledPlan:
    n_qubits: int  # main register size; ancilla index = n_qubits
    dt: float
    gates: tuple[NoisyGate, ...]
    label: str

    @property
    def ancilla(self) -> int:
        return self.n_qubits


def attach_depolarizing(plan: TrotterPlan, spec: DepolSpec) -> NoisyControlledPlan:
    """Single-qubit depolarizing on ancilla + support endpoints per rotation."""
    if not plan.controlled:
        raise ValueError("depolarizing model decorates controlled plans")
    lam = spec.lam
    ch = depolarizing_channel(lam, 1)
    anc = plan.n_qubits
    gates = []
    for p, angle in plan.gates():
        sup = p.support
        if not sup:
            sites = (anc,)
        elif len(sup) == 1:
            sites = (anc, sup[0])
        else:
            sites = (anc, min(sup), max(sup))
        channels = tuple((ch, (s,)) for s in sites) if lam > 0 else ()
        gates.append(NoisyGate(p, angle, channels))
    return NoisyControlledPlan(plan.n_qubits, plan.dt, tuple(gates),
                               label=f"depol(xi={spec.xi:g})")


def lindblad_noisy_gates(gates, n_qubits: int,
                         spec: PauliLindbladSpec) -> tuple[NoisyGate, ...]:
    """Decorate a controlled gate list (on the main register) with channels."""
    anc = n_qubits
    cache: dict[tuple[int, int], PauliChannel] = {}

    def channel(pair):
        key = (min(pair), max(pair))
        if key not in cache:
            cache[key] = lindblad_to_kraus(spec, key)
        return cache[key]

    out = []
    for p, angle in gates:
        sup = p.support
        chans = []
        if spec.lambda0 > 0 and sup:
            if len(sup) == 1:
                chans.append((channel((anc, sup[0])), (sup[0], anc)))
            else:
                lo, hi = min(sup), max(sup)
                chans.append((channel((lo, hi)), (lo, hi)))
                chans.append((channel((anc, lo)), (lo, anc)))
        out.append(NoisyGate(p, angle, tuple(chans)))
    return tuple(out)


def attach_lindblad(plan: TrotterPlan,
                    spec: PauliLindbladSpec) -> NoisyControlledPlan:
    """Pair channels after each entangling gate of the decomposed circuit."""
    if not plan.controlled:
        raise ValueError("the Lindblad model decorates controlled plans")
    gates = lindblad_noisy_gates(plan.gates(), plan.n_qubits, spec)
    return NoisyControlledPlan(plan.n_qubits, plan.dt, gates,
                               label=f"lindblad(lambda0={spec.lambda0:g})")


# ---------------------------------------------------------------------------
# density-matrix execution
# ---------------------------------------------------------------------------

def _depolarize_qubit(rho: np.ndarray, q: int, p: float, n: int) -> None:
    """In place rho -> (1-p) rho + p I_q/2 (x) Tr_q rho, on the joint register."""
    a = 1 << (n - q - 1)
    b = 1 << q
    r = rho.reshape(a, 2, b, a, 2, b)
    d00 = r[:, 0, :, :, 0, :].copy()
    d11 = r[:, 1, :, :, 1, :].copy()
    mix = 0.5 * (d00 + d11)
    r[:, 0, :, :, 0, :] = (1 - p) * d00 + p * mix
    r[:, 1, :, :, 1, :] = (1 - p) * d11 + p * mix
    r[:, 0, :, :, 1, :] *= 1 - p
    r[:, 1, :, :, 0, :] *= 1 - p


def _apply_pauli_channel(rho: np.ndarray, probs, perms, coefs) -> np.ndarray:
    out = np.zeros_like(rho)
    for pr, perm, cf in zip(probs, perms, coefs):
        if pr == 0.0:
            continue
        if perm is None:  # identity component
            out += pr * rho
        else:
            out += pr * (cf[:, None] * rho[np.ix_(perm, perm)] * cf.conj()[None, :])
    return out


class _CompiledGate:
    """Precomputed index arrays for one noisy controlled gate."""

    def __init__(self, gate: NoisyGate, n_joint: int, on: np.ndarray):
        anc = n_joint - 1
        self.angle = gate.angle
        self.identity = gate.pauli.is_identity
        if not self.identity:
            padded = PauliString(n_joint, gate.pauli.letters + "I")
            self.perm, self.coefs = padded.action()
        self.on = on
        self.simple_depol = all(
            ch.arity == 1 and len(t) == 1 and ch.paulis == ("I", "X", "Y", "Z")
            and ch.probs[1] == ch.probs[2] == ch.probs[3]
            for ch, t in gate.channels)
        self.channels = []
        for ch, targets in gate.channels:
            if self.simple_depol:
                # replacement form: probs = (1 - 3p/4, p/4, p/4, p/4)
                p = (1.0 - ch.probs[0]) * 4.0 / 3.0
                self.channels.append((targets[0], p))
            else:
                perms, coefs, probs = [], [], []
                for lab, pr in zip(ch.paulis, ch.probs):
                    letters = ["I"] * n_joint
                    for m, q in enumerate(targets):
                        letters[q] = lab[m]
                    ps = PauliString(n_joint, "".join(letters))
                    if ps.is_identity:
                        perms.append(None)
                        coefs.append(None)
                    else:
                        pe, cf = ps.action()
                        perms.append(pe)
                        coefs.append(cf)
                    probs.append(pr)
                self.channels.append((probs, perms, coefs))

    def apply(self, rho: np.ndarray, n_joint: int) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        on = self.on
        if self.identity:
            ph = complex(c, -s)
            rho[on, :] *= ph
            rho[:, on] *= np.conj(ph)
        else:
            rot = c * rho - 1j * s * (self.coefs[:, None] * rho[self.perm, :])
            rho[on] = rot[on]
            rot = c * rho + 1j * s * (rho[:, self.perm]
                                      * self.coefs[self.perm][None, :])
            rho[:, on] = rot[:, on]
        for chan in self.channels:
            if self.simple_depol:
                q, p = chan
                _depolarize_qubit(rho, q, p, n_joint)
            else:
                rho = _apply_pauli_channel(rho, *chan)
        return rho


def noisy_dqc1_signal(noisy_plan: NoisyControlledPlan, grid: TimeGrid,
                      subspace: SubspaceIndex | None = None,
                      shot_plan: ShotPlan | None = None,
                      seed: int = 0) -> FdosSignal:
    """DQC1 signal under noise: explicit (n+1)-qubit density-matrix run.

    The main register starts maximally mixed (optionally projected onto the
    subspace), the ancilla in |+>; the ancilla coherence read out after
    every grid step gives G(t_k).  shot_plan=None or .analytic skips the
    binomial readout noise.
    """
    n = noisy_plan.n_qubits
    d = 1 << n
    ratio = grid.dt / noisy_plan.dt
    steps = int(round(ratio))
    if abs(ratio - steps) > 1e-9 or steps < 1:
        raise ValueError("grid spacing must be a multiple of the Trotter step")
    if subspace is None:
        main_diag = np.full(d, 1.0 / d)
        dim = d
    else:
        main_diag = np.zeros(d)
        main_diag[subspace.indices] = 1.0 / subspace.dimension
        dim = subspace.dimension
    rho = np.zeros((2 * d, 2 * d), dtype=complex)
    rho[:d, :d] = np.diag(main_diag) * 0.5
    rho[d:, d:] = np.diag(main_diag) * 0.5
    rho[:d, d:] = np.diag(main_diag) * 0.5
    rho[d:, :d] = np.diag(main_diag) * 0.5

    idx = np.arange(2 * d, dtype=np.int64)
    on = ((idx >> n) & 1).astype(bool)
    compiled = [_CompiledGate(g, n + 1, on) for g in noisy_plan.gates]

    analytic = shot_plan is None or shot_plan.analytic
    values = np.empty(grid.n_t, dtype=complex)
    for k in range(grid.n_t):
        z = 2.0 * np.conj(np.trace(rho[:d, d:]))
        if analytic:
            values[k] = dim * z / ROOT_2PI
        else:
            rng = keyed_rng(seed, "noisy-dqc1", k)
            sh_re = shot_plan.n_shots // 2
            sh_im = shot_plan.n_shots - sh_re
            est_re, _ = hadamard_test(z, "real", sh_re, rng)
            est_im, _ = hadamard_test(z, "imag", sh_im, rng)
            values[k] = dim * complex(est_re, est_im) / ROOT_2PI
        if k + 1 < grid.n_t:
            for _ in range(steps):
                for cg in compiled:
                    rho = cg.apply(rho, n + 1)
    shots = np.zeros(grid.n_t, dtype=np.int64) if analytic \
        else np.full(grid.n_t, shot_plan.n_shots, dtype=np.int64)
    return FdosSignal(grid, values, normalization=float(dim),
                      sampler=f"dqc1-noisy[{noisy_plan.label}]", seed=seed,
                      n_shots=shots,
                      provenance={"noise": noisy_plan.label,
                                  "trotter_dt": noisy_plan.dt})


def noisy_overlap(noisy_gates: tuple[NoisyGate, ...],
                  psi_main: np.ndarray) -> complex:
    """Hadamard-test overlap <psi|U|psi> with U the noisy controlled circuit.

    Runs the (n+1)-qubit density matrix with ancilla |+> and reads the
    ancilla coherence <X> + i <Y>.
    """
    d = psi_main.size
    n = d.bit_length() - 1
    proj = np.outer(psi_main, psi_main.conj())
    rho = 0.5 * np.block([[proj, proj], [proj, proj]])
    idx = np.arange(2 * d, dtype=np.int64)
    on = ((idx >> n) & 1).astype(bool)
    for cg in (_CompiledGate(g, n + 1, on) for g in noisy_gates):
        rho = cg.apply(rho, n + 1)
    return complex(2.0 * np.conj(np.trace(rho[:d, d:])))


def fit_exponential_envelope(times: np.ndarray, noisy: np.ndarray,
                             ideal: np.ndarray,
                             floor: float = 1e-3) -> tuple[float, float]:
    """Fit |noisy/ideal| ~ exp(-t/tau) over the pre-floor region.

    Points where the ideal signal is small (below its median magnitude) or
    the ratio has decayed under ``floor`` are excluded.  Returns (tau, R^2)
    of the linear fit to log|ratio|.
    """
    times = np.asarray(times, dtype=float)
    mag_ideal = np.abs(ideal)
    ratio = np.abs(noisy) / np.where(mag_ideal > 0, mag_ideal, np.inf)
    mask = (mag_ideal > np.median(mag_ideal)) & (ratio > floor) & (times > 0)
    if mask.sum() < 3:
        raise ValueError("too few usable points for an envelope fit")
    x, y = times[mask], np.log(ratio[mask])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if slope >= 0:
        return math.inf, r2
    return -1.0 / slope, r2


# ---------------------------------------------------------------------------
# gamma tables
# ---------------------------------------------------------------------------

def synthetic_gamma_table(n_qubits: int, seed: int = 0,
                          sparsity: int = 6,
                          log10_range: tuple[float, float] = (-3.5, -2.0)
                          ) -> dict:
    """Sparse synthetic rates for every qubit pair, log-uniform magnitudes.

    Stands in for hardware-learned values, preserving the model's structure
    without asserting anything about a real device.
    """
    table = {}
    for i in range(n_qubits):
        for j in range(i + 1, n_qubits):
            rng = keyed_rng("gamma-table", seed, i, j)
            labels = rng.choice(len(TWO_QUBIT_PAULIS), size=sparsity,
                                replace=False)
            gam = {}
            for li in sorted(labels):
                g = 10.0 ** rng.uniform(*log10_range)
                gam[TWO_QUBIT_PAULIS[li]] = float(g)
            table[(i, j)] = gam
    return table


def write_gamma_table(table: dict, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("# Pauli-Lindblad generator rates gamma_k per qubit pair.\n")
        fh.write("# Rates are base values; the channel multiplies every rate "
                 "by the run's lambda0.\n")
        w = csv.writer(fh)
        w.writerow(["pair_id", "pauli_label", "gamma"])
        for (i, j) in sorted(table):
            for lab, g in sorted(table[(i, j)].items()):
                w.writerow([f"{i}-{j}", lab, f"{g:.17g}"])


def read_gamma_table(source: str | Path | io.TextIOBase) -> dict:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    table: dict = {}
    for rec in csv.DictReader(rows):
        i, j = rec["pair_id"].split("-")
        pair = (int(i), int(j))
        table.setdefault(pair, {})[rec["pauli_label"]] = float(rec["gamma"])
    if not table:
        raise ValueError("empty gamma table")
    return table


def bundled_gamma_table() -> dict:
    """Synthetic rates shipped with the package (qubits 0..12, all pairs)."""
    ref = resources.files("qdos.data").joinpath("gamma_synthetic.txt")
    return read_gamma_table(io.StringIO(ref.read_text()))
