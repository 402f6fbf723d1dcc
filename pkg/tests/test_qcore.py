import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvphase.qcore import (
    HADAMARD,
    PAULI_X,
    DensityMatrix,
    DimensionError,
    KrausChannel,
    Povm,
    PureState,
    QuantumStateError,
    apply_channel,
    apply_unitary,
    concurrence,
    outcome_pdf,
    partial_trace,
    phase_damping,
    random_channel,
    random_density,
    random_unitary,
    tensor,
)

plus = np.array([1, 1]) / math.sqrt(2)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def ket(*amps):
    return np.array(amps, dtype=complex)


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        with pytest.raises(QuantumStateError):
            DensityMatrix([[0.5, 0.1], [0.0, 0.5]])

    def test_rejects_bad_trace(self):
        with pytest.raises(QuantumStateError):
            DensityMatrix(np.diag([0.5, 0.6]))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(QuantumStateError):
            DensityMatrix(np.diag([1.2, -0.2]))

    def test_rejects_non_finite(self):
        with pytest.raises((QuantumStateError, ValueError)):
            DensityMatrix([[np.nan, 0], [0, 1]])

    def test_matrix_is_read_only(self):
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1

    def test_pure_and_mixed_purity(self):
        assert DensityMatrix.from_pure(plus).purity() == pytest.approx(1.0, abs=1e-12)
        assert DensityMatrix.maximally_mixed(4).purity() == pytest.approx(0.25)

    def test_pure_state_norm_checked(self):
        with pytest.raises(QuantumStateError):
            PureState([1.0, 1.0])
        assert np.allclose(PureState.normalized([1, 1]).amplitudes, plus)


class TestApplyUnitary:
    def test_identity_leaves_state(self):
        rho = DensityMatrix.maximally_mixed(2)
        assert np.allclose(apply_unitary(rho, np.eye(2)).matrix, rho.matrix)

    def test_bit_flip(self):
        out = apply_unitary(DensityMatrix.from_pure(ket(1, 0)), PAULI_X)
        assert np.allclose(out.matrix, np.diag([0, 1]))

    def test_hadamard_off_diagonals(self):
        out = apply_unitary(DensityMatrix.from_pure(ket(1, 0)), HADAMARD)
        assert out.matrix[0, 1] == pytest.approx(0.5)
        assert out.matrix[1, 0] == pytest.approx(0.5)

    def test_errors(self):
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(DimensionError):
            apply_unitary(rho, np.eye(4))
        with pytest.raises(QuantumStateError):
            apply_unitary(rho, np.diag([1, 2]))

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_spectrum_preserved(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(4, rng)
        out = apply_unitary(rho, random_unitary(4, rng))
        assert np.allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(rho.matrix), atol=1e-10)


class TestChannels:
    def test_full_dephasing(self):
        out = apply_channel(DensityMatrix.from_pure(plus), phase_damping(2, 1.0))
        assert np.allclose(out.matrix, np.diag([0.5, 0.5]))

    def test_zero_dephasing_is_identity(self):
        rho = DensityMatrix.from_pure(plus)
        assert np.allclose(apply_channel(rho, phase_damping(2, 0.0)).matrix, rho.matrix)

    def test_half_dephasing_brute_force(self):
        rho = DensityMatrix.from_pure(plus)
        ch = phase_damping(2, 0.5)
        brute = sum(k @ rho.matrix @ k.conj().T for k in ch.operators)
        out = apply_channel(rho, ch)
        assert abs(out.matrix[0, 1]) == pytest.approx(0.25)
        assert np.allclose(out.matrix, brute)

    def test_incomplete_kraus_rejected(self):
        with pytest.raises(QuantumStateError):
            KrausChannel((0.5 * np.eye(2),))

    def test_mixed_dims_rejected(self):
        with pytest.raises(DimensionError):
            KrausChannel((np.eye(2), np.eye(4)))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            apply_channel(DensityMatrix.maximally_mixed(2), KrausChannel.identity(4))

    def test_schur_needs_psd(self):
        with pytest.raises(QuantumStateError):
            KrausChannel.from_schur(np.array([[1, 2], [2, 1]]))

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_heisenberg_picture(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_density(4, rng)
        ch = random_channel(4, 3, rng)
        povm = Povm.projective(random_unitary(4, rng))
        direct = outcome_pdf(apply_channel(rho, ch), povm)
        heis = np.array([np.trace(ch.adjoint(e) @ rho.matrix).real for e in povm.elements])
        assert np.allclose(direct, heis, atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_trace_preserved(self, seed):
        rng = np.random.default_rng(seed)
        out = apply_channel(random_density(4, rng, rank=2), random_channel(4, 4, rng))
        assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-10)


class TestPovm:
    def test_z_basis(self):
        z = Povm.computational(2)
        assert np.allclose(outcome_pdf(DensityMatrix.from_pure(ket(1, 0)), z), [1, 0])
        assert np.allclose(outcome_pdf(DensityMatrix.from_pure(plus), z), [0.5, 0.5])

    def test_mixed_state_any_projective(self):
        rng = np.random.default_rng(3)
        p = outcome_pdf(DensityMatrix.maximally_mixed(4), Povm.projective(random_unitary(4, rng)))
        assert np.allclose(p, 0.25)

    def test_incomplete_povm_rejected(self):
        with pytest.raises(QuantumStateError):
            Povm([np.diag([1, 0])])

    def test_non_psd_element_rejected(self):
        with pytest.raises(QuantumStateError):
            Povm([np.diag([1.5, 0]), np.diag([-0.5, 1])])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            outcome_pdf(DensityMatrix.maximally_mixed(2), Povm.computational(4))


class TestTensorAndTrace:
    def test_identity_product(self):
        assert np.allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))

    def test_trace_out_nuclear(self):
        rho = DensityMatrix.from_pure(ket(1, 0, 0, 0))
        assert np.allclose(partial_trace(rho, "electron").matrix, np.diag([1, 0]))

    def test_bell_reduced_state_mixed(self):
        bell = DensityMatrix.from_pure(ket(0, 1, 1, 0) / math.sqrt(2))
        assert np.allclose(partial_trace(bell, "nuclear").matrix, np.eye(2) / 2)
        assert np.allclose(partial_trace(bell, "electron").matrix, np.eye(2) / 2)

    def test_product_state_factorizes(self):
        a = DensityMatrix.from_pure(plus)
        b = DensityMatrix(np.diag([0.3, 0.7]))
        joint = DensityMatrix(tensor(a.matrix, b.matrix))
        assert np.allclose(partial_trace(joint, "electron").matrix, a.matrix)
        assert np.allclose(partial_trace(joint, "nuclear").matrix, b.matrix)

    def test_unsupported_dim(self):
        with pytest.raises(DimensionError):
            partial_trace(DensityMatrix.maximally_mixed(2), "electron")
        with pytest.raises(ValueError):
            partial_trace(DensityMatrix.maximally_mixed(4), "nitrogen")

    def test_concurrence(self):
        bell = DensityMatrix.from_pure(ket(0, 1, 1, 0) / math.sqrt(2))
        assert concurrence(bell) == pytest.approx(1.0, abs=1e-10)
        assert concurrence(DensityMatrix.from_pure(ket(1, 0, 0, 0))) == pytest.approx(0.0, abs=1e-10)
        assert concurrence(DensityMatrix.maximally_mixed(4)) == pytest.approx(0.0, abs=1e-10)
