import numpy as np
import pytest

from qdos.evolve import PropagatorOracle, TrotterPlan, exact_evolve
from qdos.fdos import ROOT_2PI, ShotPlan, TimeGrid, exact_fdos
from qdos.hamlib import HeisenbergSpec, build_heisenberg
from qdos.noisemodel import PauliLindbladSpec, synthetic_gamma_table
from qdos.qcore import PauliString, QubitHamiltonian, StateVector
from qdos.rng import keyed_rng
from qdos.vardyn import (
    CompilationObjective,
    build_ansatz,
    compilation_energy,
    covar_vector,
    load_trajectory,
    noisy_fidelity,
    random_product_prep,
    recompile_step,
    recompile_trajectory,
    save_trajectory,
    variational_fdos,
)

import oracles


def make_objective(n=3, layers=2, dt=0.2, seed=0, mode="phase_sensitive",
                   theta_t=None, step_scale=1.0):
    ham = build_heisenberg(HeisenbergSpec(n=n, J=1.0, h=1.0, seed=seed))
    ansatz = build_ansatz(n, layers)
    plan = TrotterPlan(ham, dt=dt, order=2)
    prep = random_product_prep(n, keyed_rng("vardyn-prep", seed))
    theta_t = np.zeros(ansatz.n_parameters) if theta_t is None else theta_t
    gates = tuple((p, a * step_scale) for p, a in plan.gates())
    return CompilationObjective(ansatz, prep, gates, theta_t=theta_t, mode=mode)


class TestAnsatz:
    def test_parameter_count(self):
        assert build_ansatz(3, 1).n_parameters == 11

    def test_zero_parameters_identity(self):
        ans = build_ansatz(3, 2)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        psi = v / np.linalg.norm(v)
        out = ans.apply_batch(psi[None, :], np.zeros((1, ans.n_parameters)))[0]
        np.testing.assert_allclose(out, psi, atol=1e-14)

    def test_unitary_against_dense_oracle(self):
        ans = build_ansatz(3, 1)
        rng = np.random.default_rng(1)
        theta = rng.uniform(0, 2 * np.pi, ans.n_parameters)
        u = np.eye(8, dtype=complex)
        cols = ans.apply_batch(u, np.repeat(theta[None, :], 8, axis=0))
        # rows of cols are the circuit applied to each basis state
        mat = cols.T
        np.testing.assert_allclose(mat.conj().T @ mat, np.eye(8), atol=1e-12)
        # explicit product of dense rotation matrices, same order
        want = np.eye(8, dtype=complex)
        for p, a in ans.gates(theta):
            g = oracles.evolve_expm(oracles.pauli_matrix(p.letters),
                                    np.eye(8, dtype=complex), a)
            want = g @ want
        got0 = ans.apply_batch(np.eye(8, dtype=complex)[:1], theta[None, :])[0]
        np.testing.assert_allclose(got0, want[:, 0], atol=1e-11)


class TestObjective:
    def test_floor_attained_iff_exact(self):
        obj = make_objective(step_scale=0.0)  # V = identity
        theta = obj.theta_t
        assert compilation_energy(obj, theta) == pytest.approx(obj.energy_floor,
                                                               abs=1e-12)
        assert obj.step_fidelity(theta) == pytest.approx(1.0, abs=1e-12)
        # any objective value is bounded below by the floor
        rng = np.random.default_rng(2)
        for _ in range(10):
            th = rng.uniform(-1, 1, theta.size)
            assert compilation_energy(obj, th) >= obj.energy_floor - 1e-10

    def test_phase_shift_sensitivity(self):
        n = 3
        phi = 0.7
        ham = build_heisenberg(HeisenbergSpec(n=n, J=1.0, h=0.5, seed=3))
        ansatz = build_ansatz(n, 2)
        prep = random_product_prep(n, keyed_rng("ph", 1))
        ident = PauliString(n, "I" * n)
        # V = exp(-i phi) * Identity: exact up to a global phase
        gates = ((ident, phi),)
        theta = np.zeros(ansatz.n_parameters)
        sens = CompilationObjective(ansatz, prep, gates, theta,
                                    mode="phase_sensitive")
        free = CompilationObjective(ansatz, prep, gates, theta,
                                    mode="phase_free")
        assert compilation_energy(free, theta) == pytest.approx(
            free.energy_floor, abs=1e-12)
        got = compilation_energy(sens, theta)
        assert got == pytest.approx(-(n + np.cos(phi)), abs=1e-12)
        assert got > sens.energy_floor + 1e-3

    def test_random_theta_matches_dense_circuit_oracle(self):
        obj = make_objective(n=3, layers=1, dt=0.3, seed=5)
        rng = np.random.default_rng(4)
        theta = rng.uniform(-0.5, 0.5, obj.ansatz.n_parameters)
        # oracle: assemble W|0> from dense matrices and evaluate the energy
        n = 3
        psi0 = np.zeros(8, dtype=complex)
        psi0[0] = 1.0
        prep_u = np.eye(8, dtype=complex)
        for p, a in obj.prep.gates:
            prep_u = oracles.evolve_expm(oracles.pauli_matrix(p.letters),
                                         np.eye(8, dtype=complex), a) @ prep_u
        ans_u = np.eye(8, dtype=complex)
        for p, a in obj.ansatz.gates(theta):
            ans_u = oracles.evolve_expm(oracles.pauli_matrix(p.letters),
                                        np.eye(8, dtype=complex), a) @ ans_u
        ans_t = np.eye(8, dtype=complex)
        for p, a in obj.ansatz.gates(obj.theta_t):
            ans_t = oracles.evolve_expm(oracles.pauli_matrix(p.letters),
                                        np.eye(8, dtype=complex), a) @ ans_t
        v_u = np.eye(8, dtype=complex)
        for p, a in obj.step_gates:
            v_u = oracles.evolve_expm(oracles.pauli_matrix(p.letters),
                                      np.eye(8, dtype=complex), a) @ v_u
        w0 = prep_u.conj().T @ ans_u.conj().T @ v_u @ ans_t @ prep_u @ psi0
        joint = np.concatenate([(psi0 + w0) / 2, (psi0 - w0) / 2])
        zsum = 0.0
        for j in range(4):
            letters = ["I"] * 4
            letters[j] = "Z"
            zm = oracles.pauli_matrix("".join(letters))
            zsum += np.real(np.vdot(joint, zm @ joint))
        assert compilation_energy(obj, theta) == pytest.approx(-zsum, abs=1e-10)


class TestCovarVector:
    def test_computational_state_zero(self):
        st = StateVector.zero(3)
        obs = [PauliString(3, x) for x in ("XII", "IXI", "ZZI", "YIZ")]
        f = covar_vector(st, obs)
        np.testing.assert_allclose(f, 0.0, atol=1e-14)

    def test_single_qubit_plus_state(self):
        plus = StateVector(1, np.array([1, 1], dtype=complex) / np.sqrt(2))
        z, x = PauliString(1, "Z"), PauliString(1, "X")
        assert covar_vector(plus, [z], [x])[0] == pytest.approx(0.0, abs=1e-14)
        assert covar_vector(plus, [z], [z])[0] == pytest.approx(1.0)

    def test_matches_dense_expectation_oracle(self):
        rng = np.random.default_rng(6)
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        st = StateVector(3, v / np.linalg.norm(v))
        labels = ["XXI", "IZZ", "YIY", "ZII"]
        pivots = ["ZII", "IZI", "IIZ"]
        f = covar_vector(st, [PauliString(3, x) for x in labels],
                         [PauliString(3, x) for x in pivots])
        k = 0
        for lo in labels:
            om = oracles.pauli_matrix(lo)
            for lp in pivots:
                pm = oracles.pauli_matrix(lp)
                sym = 0.5 * (om @ pm + pm @ om)
                want = np.real(np.vdot(st.amplitudes, sym @ st.amplitudes)) \
                    - np.real(np.vdot(st.amplitudes, om @ st.amplitudes)) \
                    * np.real(np.vdot(st.amplitudes, pm @ st.amplitudes))
                assert f[k] == pytest.approx(want, abs=1e-12)
                k += 1


class TestRecompileStep:
    def test_identity_step_accepted_immediately(self):
        obj = make_objective(step_scale=0.0)
        theta0 = obj.theta_t
        theta, diag = recompile_step(obj, theta0, max_iters=50)
        np.testing.assert_array_equal(theta, theta0)
        assert len(diag) == 1  # converged at the warm start

    def test_single_step_converges(self):
        obj = make_objective(n=3, layers=3, dt=0.2, seed=7)
        theta, diag = recompile_step(obj, obj.theta_t, max_iters=100)
        assert diag[-1]["step_fidelity"] >= 0.99

    def test_fnorm_zero_iff_unit_fidelity_phase_free(self):
        obj = make_objective(n=2, layers=2, mode="phase_free", step_scale=0.0)
        theta = obj.theta_t
        ev_probes = obj.probes((0,), n_random=0)
        f = covar_vector(obj.compilation_state(theta), ev_probes, obj.pivots())
        assert np.max(np.abs(f)) < 1e-12
        assert obj.step_fidelity(theta) == pytest.approx(1.0, abs=1e-12)

    def test_gradient_mode_decreases_energy(self):
        obj = make_objective(n=3, layers=2, dt=0.15, seed=8)
        theta, diag = recompile_step(obj, obj.theta_t, optimizer="gradient",
                                     max_iters=30)
        assert diag[-1]["energy"] <= diag[0]["energy"]

    def test_warm_start_locality(self):
        moves = []
        for dt in (0.1, 0.02):
            obj = make_objective(n=3, layers=2, dt=dt, seed=9)
            theta, _ = recompile_step(obj, obj.theta_t, max_iters=60)
            moves.append(np.linalg.norm(theta - obj.theta_t))
        assert moves[1] < moves[0]


class TestTrajectory:
    def test_zero_steps(self):
        ham = build_heisenberg(HeisenbergSpec(n=3, J=1.0, h=0.4, seed=1))
        ansatz = build_ansatz(3, 2)
        prep = random_product_prep(3, keyed_rng("t", 2))
        tr = recompile_trajectory(ham, prep, dt=0.2, n_steps=0, ansatz=ansatz)
        assert tr.thetas.shape == (1, ansatz.n_parameters)
        np.testing.assert_array_equal(tr.thetas[0], 0.0)

    def test_short_trajectory_tracks_exact_dynamics(self):
        ham = build_heisenberg(HeisenbergSpec(n=3, J=1.0, h=1.0, seed=11))
        ansatz = build_ansatz(3, 3)
        prep = random_product_prep(3, keyed_rng("t", 3))
        tr = recompile_trajectory(ham, prep, dt=0.1, n_steps=8, ansatz=ansatz,
                                  max_iters=80, tol=1e-8)
        assert tr.cumulative_fidelities[-1] > 0.999
        assert np.all(tr.step_fidelities > 0.999)

    def test_json_round_trip(self, tmp_path):
        ham = build_heisenberg(HeisenbergSpec(n=3, J=1.0, h=0.6, seed=12))
        ansatz = build_ansatz(3, 2)
        prep = random_product_prep(3, keyed_rng("t", 4))
        tr = recompile_trajectory(ham, prep, dt=0.2, n_steps=2, ansatz=ansatz,
                                  max_iters=30)
        p = tmp_path / "traj.json"
        save_trajectory(tr, p)
        back = load_trajectory(p)
        np.testing.assert_array_equal(back.thetas, tr.thetas)
        np.testing.assert_array_equal(back.cumulative_fidelities,
                                      tr.cumulative_fidelities)


class TestNoisyFidelity:
    def test_identical_pure_states(self):
        st = StateVector.zero(2)
        rho = np.outer(st.amplitudes, st.amplitudes.conj())
        pair = noisy_fidelity(rho, rho)
        assert pair.literal == pytest.approx(0.25)  # 1/d prefactor
        assert pair.overlap == pytest.approx(1.0)

    def test_maximally_mixed_actual(self):
        st = StateVector.zero(2)
        rho = np.outer(st.amplitudes, st.amplitudes.conj())
        mixed = np.eye(4) / 4
        assert noisy_fidelity(rho, mixed).overlap == pytest.approx(0.25)


class TestVariationalFdos:
    def test_noiseless_matches_exact_within_recompilation_error(self):
        ham = build_heisenberg(HeisenbergSpec(n=3, J=1.0, h=1.0, seed=13))
        ansatz = build_ansatz(3, 3)
        preps = [random_product_prep(3, keyed_rng("vf", s)) for s in range(3)]
        trs = [recompile_trajectory(ham, p, dt=0.1, n_steps=6, ansatz=ansatz,
                                    max_iters=80, tol=1e-8, seed=s)
               for s, p in enumerate(preps)]
        grid = TimeGrid(dt=0.1, n_t=7)
        sig = variational_fdos(trs, preps, ansatz, grid)
        assert sig.values[0] == pytest.approx(8 / ROOT_2PI, abs=1e-12)
        # three 1-design states only: compare the echoes, not the trace
        from qdos.fdos import ExactEchoEngine
        engine = ExactEchoEngine(ham)
        for k, t in enumerate(grid.times):
            states = np.stack([p.state().amplitudes for p in preps])
            want = engine.echoes_for_states(states, k, t).mean() * 8 / ROOT_2PI
            assert abs(sig.values[k] - want) < 0.05 * 8 / ROOT_2PI

    def test_noise_orders_echo_magnitudes(self):
        ham = build_heisenberg(HeisenbergSpec(n=3, J=1.0, h=1.0, seed=14))
        ansatz = build_ansatz(3, 2)
        preps = [random_product_prep(3, keyed_rng("vn", 0))]
        trs = [recompile_trajectory(ham, preps[0], dt=0.2, n_steps=4,
                                    ansatz=ansatz, max_iters=40)]
        grid = TimeGrid(dt=0.2, n_t=5)
        table = synthetic_gamma_table(4, seed=8, log10_range=(-2.0, -1.2))
        mags = []
        for lam0 in (0.0, 0.5, 2.0):
            noise = PauliLindbladSpec(lam0, table) if lam0 else None
            sig = variational_fdos(trs, preps, ansatz, grid, noise=noise)
            mags.append(np.abs(sig.values[1:]).sum())
        assert mags[0] > mags[1] > mags[2]

    def test_trajectory_state_mismatch(self):
        ham = build_heisenberg(HeisenbergSpec(n=3, J=1.0, h=0.2, seed=15))
        ansatz = build_ansatz(3, 2)
        preps = [random_product_prep(3, keyed_rng("vm", s)) for s in range(2)]
        trs = [recompile_trajectory(ham, preps[0], dt=0.2, n_steps=1,
                                    ansatz=ansatz, max_iters=10)]
        with pytest.raises(ValueError):
            variational_fdos(trs, preps, ansatz, TimeGrid(dt=0.2, n_t=2))
