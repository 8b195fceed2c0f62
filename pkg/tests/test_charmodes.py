import numpy as np
import pytest

from modalbem.assembly import assemble_cfie
from modalbem.charmodes import (
    CharModeSet,
    detect_null_modes,
    load_modes,
    save_modes,
    solve_aux_modes,
    solve_modes_cfie,
    solve_modes_efie,
    solve_modes_mfie,
    track_modes,
)
from modalbem.kernels import Medium

from oracles import dense_generalized_modes


@pytest.fixture(scope="module")
def octa_medium():
    return Medium(30e6)


@pytest.fixture(scope="module")
def octa_cfie(octa_efie, octa_mfie, octa_medium):
    return assemble_cfie(octa_efie, octa_mfie, octa_medium, 0.5)


class TestEfieModes:
    def test_variants_agree_and_real(self, octa_efie):
        mx = solve_modes_efie(octa_efie, 5, "x_inverse", eig_method="dense")
        mz = solve_modes_efie(octa_efie, 5, "z_inverse", eig_method="dense")
        assert np.all(mx.lambdas.imag == 0)
        assert np.all(mz.lambdas.imag == 0)
        np.testing.assert_allclose(mx.lambdas.real, mz.lambdas.real, rtol=1e-8)

    def test_matches_dense_generalized_oracle(self, octa_efie):
        # oracle: Z J = (1 + i lambda) R J solved densely and independently
        R = np.real(octa_efie)
        lams, _ = dense_generalized_modes(octa_efie, R.astype(complex))
        modes = solve_modes_efie(octa_efie, 5, "x_inverse", eig_method="dense")
        np.testing.assert_allclose(
            modes.lambdas.real, lams[:5].real, rtol=1e-8
        )

    def test_eigenvector_residual(self, octa_efie):
        modes = solve_modes_efie(octa_efie, 4, "x_inverse", eig_method="dense")
        R = np.real(octa_efie)
        X = np.imag(octa_efie)
        for lam, J in zip(modes.lambdas.real, modes.currents.T):
            r = np.linalg.norm(X @ J - lam * R @ J) / np.linalg.norm(X @ J)
            assert r < 1e-8

    def test_arnoldi_matches_dense(self, octa_efie):
        dense = solve_modes_efie(octa_efie, 4, "x_inverse", eig_method="dense")
        arn = solve_modes_efie(
            octa_efie, 4, "x_inverse", eig_method="arnoldi", inner_method="lu"
        )
        np.testing.assert_allclose(
            dense.lambdas.real, arn.lambdas.real, rtol=1e-7
        )

    def test_invalid_variant(self, octa_efie):
        with pytest.raises(ValueError):
            solve_modes_efie(octa_efie, 3, "nonsense")


class TestMfieModes:
    def test_matches_efie_values(self, octa_efie, octa_mfie):
        me = solve_modes_efie(octa_efie, 3, "x_inverse", eig_method="dense")
        mh = solve_modes_mfie(octa_mfie, 3, eig_method="dense")
        # different discretizations of the same modes: loose agreement
        np.testing.assert_allclose(
            me.lambdas.real, mh.lambdas.real, rtol=0.5
        )
        assert np.abs(mh.lambdas.imag).max() < 1e-8


class TestCfieModes:
    def test_matches_dense_generalized_oracle(self, octa_cfie):
        Z_C, K_C = octa_cfie
        lams, _ = dense_generalized_modes(Z_C, K_C)
        modes = solve_modes_cfie(Z_C, K_C, 5, eig_method="dense")
        np.testing.assert_allclose(modes.lambdas, lams[:5], rtol=1e-8)

    def test_sorted_ascending(self, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 6, eig_method="dense")
        mags = np.abs(modes.lambdas)
        assert np.all(np.diff(mags) >= -1e-12)

    def test_gmres_inner_records_stats(self, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 3, inner_method="gmres")
        assert modes.stats is not None
        assert modes.stats.mean_inner_iterations > 0


class TestAuxModes:
    def test_biorthogonality_and_diagonalization(self, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 6, eig_method="dense")
        aux = solve_aux_modes(Z_C, K_C, modes, eig_method="dense")
        J, Ja = aux.currents, aux.aux_currents
        M = Ja.T @ K_C @ J
        np.testing.assert_allclose(M, np.eye(6), atol=1e-6)
        S = Ja.T @ Z_C @ J
        np.testing.assert_allclose(
            S, np.diag(1 + 1j * aux.lambdas), atol=1e-5
        )

    def test_requires_matching_spectrum(self, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 4, eig_method="dense")
        aux = solve_aux_modes(Z_C, K_C, modes, eig_method="dense")
        np.testing.assert_allclose(aux.lambdas, modes.lambdas)


class TestClassification:
    def test_all_regular_off_resonance(self, octa_efie, octa_mfie, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 5, eig_method="dense")
        cls = detect_null_modes(modes, octa_efie, octa_mfie)
        assert cls == ["regular"] * 5
        assert modes.classification == cls


class TestTracking:
    def test_identity_tracking(self, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 5, eig_method="dense")
        reordered, corr, breaks = track_modes(modes, modes)
        np.testing.assert_allclose(corr, 1.0, rtol=1e-10)
        assert not breaks.any()
        np.testing.assert_allclose(reordered.lambdas, modes.lambdas)

    def test_permutation_recovered(self, octa_cfie):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(Z_C, K_C, 5, eig_method="dense")
        perm = np.array([2, 0, 4, 1, 3])
        shuffled = CharModeSet(
            modes.formulation,
            modes.lambdas[perm],
            modes.currents[:, perm],
            modes.frequency,
            modes.alpha,
        )
        reordered, corr, breaks = track_modes(modes, shuffled)
        # degenerate partners may swap; eigenvalues must match in order
        np.testing.assert_allclose(
            np.abs(reordered.lambdas), np.abs(modes.lambdas), rtol=1e-8
        )
        assert not breaks.any()


class TestSerialization:
    def test_round_trip(self, octa_cfie, tmp_path):
        Z_C, K_C = octa_cfie
        modes = solve_modes_cfie(
            Z_C, K_C, 4, eig_method="dense", frequency=30e6, alpha=0.5
        )
        aux = solve_aux_modes(Z_C, K_C, modes, eig_method="dense")
        save_modes(tmp_path / "m", aux)
        back = load_modes(tmp_path / "m")
        assert back.formulation == aux.formulation
        assert back.frequency == aux.frequency
        assert back.alpha == aux.alpha
        np.testing.assert_allclose(back.lambdas, aux.lambdas, rtol=1e-15)
        np.testing.assert_array_equal(back.currents, aux.currents)
        np.testing.assert_array_equal(back.aux_currents, aux.aux_currents)
