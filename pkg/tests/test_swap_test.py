"""The fidelity estimator circuit in all three modes, plus the loop shape."""

import numpy as np
import pytest

import oracles
from swapfit.noise import default_noise_model, noiseless_model, run_circuit_dm_noisy
from swapfit.prep import TargetSpec, sample_random_density, sample_random_state
from swapfit.sim import PureState, RngStream, basis_state, expectation_z, zero_state
from swapfit.swap_test import (
    DEFAULT_SHOTS,
    FidelityMode,
    RegisterLayout,
    SwapTestOutcome,
    _noisy_exact_p0,
    fidelity_oracle,
    iterate_snapshot,
    noisy_circuit_ops,
    noisy_floor_estimate,
    score_candidate,
    swap_gadget_ops,
    swap_test_exact,
    swap_test_mixed_exact,
    swap_test_sampled,
)

# Calibration constants for the default model, frozen from this
# implementation's own density-matrix runs (see noisy_floor_estimate).
FLOOR_1Q = 0.8525372632881913
FLOOR_2Q = 0.7444893200195593


class TestLayout:
    def test_register_indices(self):
        lay = RegisterLayout(3)
        assert lay.ancilla == 0
        assert lay.target == (1, 2, 3)
        assert lay.candidate == (4, 5, 6)
        assert lay.total == 7

    def test_rejects_zero_qubits(self):
        with pytest.raises(ValueError):
            RegisterLayout(0)


class TestExact:
    @pytest.mark.parametrize("n_qubits", [1, 2, 3, 4])
    def test_matches_oracle(self, n_qubits):
        """Circuit estimate equals |<psi|phi>|^2 computed from amplitudes."""
        rng = RngStream(400 + n_qubits)
        for _ in range(10):
            psi = sample_random_state(n_qubits, rng)
            phi = sample_random_state(n_qubits, rng)
            got = swap_test_exact(psi, phi).fidelity_estimate
            np.testing.assert_allclose(got, fidelity_oracle(psi, phi),
                                       atol=1e-12)

    def test_identical_states(self):
        psi = sample_random_state(2, RngStream(9))
        assert swap_test_exact(psi, psi).fidelity_estimate == pytest.approx(1.0)

    def test_orthogonal_states(self):
        got = swap_test_exact(basis_state(2, 0), basis_state(2, 3))
        assert got.fidelity_estimate == pytest.approx(0.0, abs=1e-12)

    def test_symmetric(self):
        rng = RngStream(10)
        psi, phi = sample_random_state(2, rng), sample_random_state(2, rng)
        np.testing.assert_allclose(swap_test_exact(psi, phi).fidelity_estimate,
                                   swap_test_exact(phi, psi).fidelity_estimate,
                                   atol=1e-13)

    def test_qubit_mismatch(self):
        with pytest.raises(ValueError):
            swap_test_exact(basis_state(1, 0), basis_state(2, 0))

    def test_gadget_shape(self):
        ops = swap_gadget_ops(3)
        assert ops[0].kind == "h" and ops[-1].kind == "h"
        assert [op.kind for op in ops[1:-1]] == ["cswap"] * 3
        assert ops[1].qubits == (0, 1, 4)


class TestOutcome:
    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            SwapTestOutcome(fidelity_estimate=0.5, p0=0.5, mode="exact",
                            noisy=False)

    def test_sampled_needs_shots(self):
        with pytest.raises(ValueError):
            SwapTestOutcome(fidelity_estimate=0.0, p0=0.5, mode="sampled",
                            noisy=False, shots=None)


class TestSampled:
    def test_concentrates_near_exact(self):
        """Empirical frequency lands inside a generous binomial interval."""
        rng = RngStream(77)
        psi = sample_random_state(2, rng)
        phi = sample_random_state(2, rng)
        want = swap_test_exact(psi, phi).fidelity_estimate
        got = swap_test_sampled(psi, phi, shots=20000, rng=rng).fidelity_estimate
        assert abs(got - want) < 0.03

    def test_requires_rng(self):
        psi = basis_state(1, 0)
        with pytest.raises(ValueError):
            swap_test_sampled(psi, psi, shots=16, rng=None)

    def test_deterministic_given_stream(self):
        psi = sample_random_state(1, RngStream(3))
        a = swap_test_sampled(psi, psi, shots=64, rng=RngStream(5))
        b = swap_test_sampled(psi, psi, shots=64, rng=RngStream(5))
        assert a.fidelity_estimate == b.fidelity_estimate

    def test_outcome_flags(self):
        psi = basis_state(1, 0)
        out = swap_test_sampled(psi, psi, shots=32, rng=RngStream(1))
        assert out.mode == "sampled"
        assert out.shots == 32
        assert not out.noisy

    def test_default_shots_constant(self):
        assert DEFAULT_SHOTS == 1024


class TestNoisy:
    def test_cached_route_equals_full_circuit(self):
        """The pullback/cache fast path must match straight DM evolution."""
        model = default_noise_model()
        rng = RngStream(88)
        for n_qubits in (1, 2):
            psi = sample_random_state(n_qubits, rng)
            phi = sample_random_state(n_qubits, rng)
            fast = _noisy_exact_p0(psi, phi, model)
            rho = zero_state(2 * n_qubits + 1).density()
            rho = run_circuit_dm_noisy(rho, noisy_circuit_ops(psi, phi), model)
            slow = model.flip_readout((1.0 + expectation_z(rho, 0)) / 2.0)
            np.testing.assert_allclose(fast, slow, atol=1e-12)

    def test_floor_values_frozen(self):
        """Calibration numbers for the default budget stay put."""
        model = default_noise_model()
        np.testing.assert_allclose(noisy_floor_estimate(1, model), FLOOR_1Q,
                                   atol=1e-12)
        np.testing.assert_allclose(noisy_floor_estimate(2, model), FLOOR_2Q,
                                   atol=1e-12)

    def test_floor_is_noise_only(self):
        """With the noiseless budget the floor sits at exactly 1."""
        np.testing.assert_allclose(noisy_floor_estimate(1, noiseless_model()),
                                   1.0, atol=1e-12)

    def test_sampled_noisy_hovers_at_floor(self):
        model = default_noise_model()
        z = zero_state(1)
        out = swap_test_sampled(z, z, shots=4096, noise=model, rng=RngStream(6))
        assert out.noisy
        assert abs(out.fidelity_estimate - FLOOR_1Q) < 0.05

    def test_noisy_orders_fidelities(self):
        """Noisy estimates still rank a good candidate above a bad one."""
        model = default_noise_model()
        psi = basis_state(1, 0)
        good = _noisy_exact_p0(psi, psi, model)
        bad = _noisy_exact_p0(psi, basis_state(1, 1), model)
        assert good > bad + 0.3

    def test_trajectory_fallback_runs(self):
        """Registers past the DM cap fall back to per-shot trajectories."""
        rng = RngStream(11)
        psi = sample_random_state(5, rng)  # 11 total qubits
        out = swap_test_sampled(psi, psi, shots=4, noise=default_noise_model(),
                                rng=rng)
        assert out.noisy and out.shots == 4
        assert -1.0 <= out.fidelity_estimate <= 1.0


class TestMixed:
    def test_overlap_against_dense(self):
        rng = RngStream(21)
        rho = sample_random_density(2, rng)
        sig = sample_random_density(2, rng)
        want = float(np.real(np.trace(rho.entries @ sig.entries)))
        np.testing.assert_allclose(swap_test_mixed_exact(rho, sig), want,
                                   atol=1e-13)

    def test_maximally_mixed_pair(self):
        """Identical I/2 inputs read 0.5, not 1: the estimator's blind spot."""
        from swapfit.sim import DensityMatrix
        half = DensityMatrix(1, np.eye(2, dtype=complex) / 2)
        assert swap_test_mixed_exact(half, half) == pytest.approx(0.5, abs=1e-15)


class TestIterateSnapshot:
    def test_constant_candidate_trace(self):
        rng = RngStream(31)
        target = TargetSpec(2, sample_random_state(2, rng), seed=31)
        cand = sample_random_state(2, rng)
        want = fidelity_oracle(target.state, cand)
        trace = iterate_snapshot(target, lambda i, last: cand, budget=4)
        np.testing.assert_allclose(trace, [want] * 4, atol=1e-10)

    def test_feedback_passes_previous_reading(self):
        rng = RngStream(32)
        target = TargetSpec(1, sample_random_state(1, rng), seed=32)
        seen = []

        def source(i, last):
            seen.append(last)
            return target.state

        iterate_snapshot(target, source, budget=3)
        assert seen[0] is None
        assert seen[1] == pytest.approx(1.0, abs=1e-10)

    def test_candidate_error_wrapped(self):
        rng = RngStream(33)
        target = TargetSpec(1, sample_random_state(1, rng), seed=33)

        def broken(i, last):
            raise KeyError("boom")

        with pytest.raises(RuntimeError, match="iteration 0"):
            iterate_snapshot(target, broken, budget=2)


class TestFidelityMode:
    def test_labels_roundtrip(self):
        for mode in (FidelityMode.exact(), FidelityMode.sampled(256),
                     FidelityMode.noisy(default_noise_model(), 128)):
            back = FidelityMode.from_label(mode.label())
            assert back.kind == mode.kind
            assert back.shots == mode.shots

    def test_stochastic_flag(self):
        assert not FidelityMode.exact().is_stochastic
        assert FidelityMode.sampled().is_stochastic

    def test_noisy_requires_model(self):
        with pytest.raises(ValueError):
            FidelityMode("noisy", shots=100)

    def test_bad_label(self):
        with pytest.raises(ValueError):
            FidelityMode.from_label("exactly")


class TestScoreCandidate:
    def test_pure_exact_equals_circuit(self):
        rng = RngStream(41)
        psi, phi = sample_random_state(2, rng), sample_random_state(2, rng)
        got = score_candidate(phi, psi, FidelityMode.exact())
        np.testing.assert_allclose(got, swap_test_exact(psi, phi).fidelity_estimate,
                                   atol=1e-13)

    def test_density_swap_objective(self):
        rng = RngStream(42)
        rho = sample_random_density(2, rng)
        psi = sample_random_state(2, rng)
        got = score_candidate(rho, psi, FidelityMode.exact(), objective="swap")
        want = float(np.real(psi.amplitudes.conj() @ rho.entries @ psi.amplitudes))
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_density_uhlmann_objective(self):
        rng = RngStream(43)
        rho = sample_random_density(2, rng)
        sig = sample_random_density(2, rng)
        got = score_candidate(rho, sig, FidelityMode.exact(), objective="uhlmann")
        np.testing.assert_allclose(got, oracles.uhlmann_scipy(rho.entries,
                                                              sig.entries),
                                   atol=1e-9)

    def test_unknown_objective(self):
        psi = basis_state(1, 0)
        with pytest.raises(ValueError):
            score_candidate(psi, psi, FidelityMode.exact(), objective="trace")
