import logging

import numpy as np
import pytest
from scipy import linalg

from geninv.errors import DataFileError, SingularGramError, ValidationError
from geninv.matrixlab import (CovarianceModel, Scenario, build_inverse_pair, build_observations, load_matrix,
                              moore_penrose_inverse, penrose_residuals, reflexive_inverse, sample_covariance,
                              sample_noise, spectral_stats)
from geninv.protocol import Noise
from geninv.spectrum import figure1_spectrum, identity_spectrum


def _random_spd(p, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return (Q * rng.uniform(0.5, 4.0, p)) @ Q.T


class TestScenario:
    def test_derived_sizes(self):
        s = Scenario(p=500, c=2.0, spectrum=identity_spectrum())
        assert s.n == 250
        assert s.c_eff == 2.0

    def test_c_eff_uses_rounded_n(self):
        s = Scenario(p=50, c=1.07, spectrum=identity_spectrum())
        assert s.n == 47
        assert s.c_eff == pytest.approx(50 / 47)

    def test_warns_outside_band(self, caplog):
        with caplog.at_level(logging.WARNING, logger="geninv.matrixlab"):
            Scenario(p=4, c=1.7, spectrum=identity_spectrum())
        assert "c_eff" in caplog.text

    @pytest.mark.parametrize("kwargs", [
        dict(p=100, c=1.0),
        dict(p=100, c=0.5),
        dict(p=1, c=2.0),
        dict(p=3, c=1.1),       # n = 3, not singular
        dict(p=100, c=2.0, seed=-1),
        dict(p=100, c=2.0, seed=2 ** 64),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            Scenario(spectrum=identity_spectrum(), **kwargs)

    def test_covariance_follows_spectrum(self):
        model = Scenario(p=10, c=2.0, spectrum=figure1_spectrum()).covariance()
        assert list(model.eigenvalues) == [1, 1, 3, 3, 3, 3, 10, 10, 10, 10]


class TestCovarianceModel:
    def test_dense_powers(self):
        model = CovarianceModel.from_matrix(_random_spd(6, 1))
        sigma = model.matrix
        fro = np.linalg.norm(sigma)
        assert np.linalg.norm(model.sqrt @ model.sqrt - sigma) / fro < 1e-10
        eye = model.inv_sqrt @ sigma @ model.inv_sqrt
        assert np.linalg.norm(eye - np.eye(6)) / np.sqrt(6) < 1e-10
        np.testing.assert_allclose(model.inverse @ sigma, np.eye(6), atol=1e-10)

    def test_dense_and_diagonal_agree(self):
        tau = np.array([1.0, 2.0, 5.0])
        dense = CovarianceModel.from_matrix(np.diag(tau))
        diag = CovarianceModel(tau)
        X = np.random.default_rng(0).standard_normal((3, 4))
        np.testing.assert_allclose(dense.apply_sqrt(X), diag.apply_sqrt(X), atol=1e-12)
        A = X @ X.T
        np.testing.assert_allclose(dense.apply_inv_sqrt_both(A), diag.apply_inv_sqrt_both(A), atol=1e-12)

    def test_rejects_bad_matrices(self):
        with pytest.raises(ValidationError):
            CovarianceModel.from_matrix(np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValidationError):
            CovarianceModel.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValidationError):
            CovarianceModel(np.array([1.0, 0.0]))

    def test_spectrum_and_precision(self):
        model = CovarianceModel(np.array([1.0, 1.0, 4.0, 2.0]))
        H = model.spectrum()
        assert list(H.eigenvalues) == [1.0, 2.0, 4.0]
        assert list(H.weights) == pytest.approx([0.5, 0.25, 0.25])
        assert model.precision_fro_sq() == pytest.approx((1 + 1 + 1 / 16 + 1 / 4) / 4)


class TestSampling:
    def test_rademacher_support(self):
        X = sample_noise(2, 2, Noise.RADEMACHER, 3)
        assert set(np.unique(X)) <= {-1.0, 1.0}

    def test_uniform_support(self):
        X = sample_noise(50, 40, "uniform", 3)
        assert np.all(np.abs(X) <= np.sqrt(3.0))
        assert X.var() == pytest.approx(1.0, abs=0.1)

    def test_deterministic(self):
        a = sample_noise(100, 50, Noise.GAUSSIAN, 12345)
        b = sample_noise(100, 50, Noise.GAUSSIAN, 12345)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, sample_noise(100, 50, Noise.GAUSSIAN, 12346))

    def test_gaussian_mean(self):
        X = sample_noise(400, 200, Noise.GAUSSIAN, 7)
        assert abs(X.mean()) < 4.0 / np.sqrt(400 * 200)

    def test_observations(self):
        X = sample_noise(3, 2, Noise.GAUSSIAN, 1)
        np.testing.assert_array_equal(build_observations(CovarianceModel.identity(3), X), X)
        x = np.array([[0.7, -1.2]])
        np.testing.assert_allclose(build_observations(CovarianceModel(np.array([4.0])), x), 2.0 * x)
        with pytest.raises(ValidationError):
            build_observations(CovarianceModel.identity(4), X)

    def test_observations_scale_rows(self):
        model = CovarianceModel.from_spectrum(figure1_spectrum(), 10)
        X = sample_noise(10, 4, Noise.GAUSSIAN, 2)
        Y = build_observations(model, X)
        np.testing.assert_allclose(Y[-1], np.sqrt(10.0) * X[-1])
        np.testing.assert_allclose(Y[0], X[0])


class TestSampleCovariance:
    def test_identity_observations(self):
        np.testing.assert_allclose(sample_covariance(np.eye(4)), np.eye(4) / 4)

    def test_single_column(self):
        y = np.array([[1.0], [2.0], [-1.0]])
        np.testing.assert_allclose(sample_covariance(y), y @ y.T)

    def test_rank(self):
        Y = sample_noise(40, 15, Noise.GAUSSIAN, 5)
        eig = linalg.eigvalsh(sample_covariance(Y))
        scale = np.abs(eig).max()
        assert np.all(eig > -1e-10 * scale)
        assert np.sum(np.abs(eig) < 1e-10 * scale) == 25


class TestInverses:
    def test_scalar(self):
        assert moore_penrose_inverse(np.array([[2.0]]))[0, 0] == pytest.approx(0.25)
        S_minus = reflexive_inverse(CovarianceModel(np.array([4.0])), np.array([[0.5]]))
        # S = 4 * 0.25 = 1
        assert S_minus[0, 0] == pytest.approx(1.0)

    def test_matches_full_decomposition(self):
        Y = sample_noise(60, 30, Noise.GAUSSIAN, 11)
        S = sample_covariance(Y)
        np.testing.assert_allclose(moore_penrose_inverse(Y), linalg.pinvh(S), atol=1e-8, rtol=1e-8)

    def test_penrose_conditions(self):
        Y = sample_noise(60, 30, Noise.GAUSSIAN, 11)
        S = sample_covariance(Y)
        res = penrose_residuals(S, moore_penrose_inverse(Y))
        assert max(res) < 1e-8

    def test_plus_spectrum_is_reciprocal(self):
        Y = sample_noise(60, 30, Noise.GAUSSIAN, 11)
        s = spectral_stats(sample_covariance(Y)).eigenvalues[:30]
        plus = spectral_stats(moore_penrose_inverse(Y)).eigenvalues
        np.testing.assert_allclose(np.sort(plus[:30]), np.sort(1.0 / s), rtol=1e-8)
        assert np.all(np.abs(plus[30:]) < 1e-8 * plus[0])

    def test_identity_collapse(self):
        X = sample_noise(40, 20, Noise.GAUSSIAN, 4)
        pair = build_inverse_pair(CovarianceModel.identity(40), X)
        np.testing.assert_allclose(pair.S_minus, pair.S_plus, rtol=1e-10, atol=1e-12)

    def test_reflexive_not_moore_penrose(self):
        model = CovarianceModel.from_spectrum(figure1_spectrum(), 60)
        X = sample_noise(60, 30, Noise.GAUSSIAN, 11)
        pair = build_inverse_pair(model, X)
        res = penrose_residuals(pair.S, pair.S_minus)
        assert res.agag < 1e-8
        assert res.gaga < 1e-8
        assert res.ag_sym > 1e-3

    def test_reflexive_spectrum_by_similarity(self):
        model = CovarianceModel.from_matrix(_random_spd(12, 3))
        X = sample_noise(12, 5, Noise.GAUSSIAN, 9)
        S_minus = reflexive_inverse(model, X)
        A_plus = moore_penrose_inverse(X)
        product = np.linalg.eigvals(model.inverse @ A_plus).real
        np.testing.assert_allclose(np.sort(spectral_stats(S_minus).eigenvalues), np.sort(product),
                                   atol=1e-8 * np.abs(product).max())

    def test_pair_fields(self):
        model = CovarianceModel.from_spectrum(figure1_spectrum(), 20)
        pair = build_inverse_pair(model, sample_noise(20, 8, Noise.GAUSSIAN, 1))
        assert pair.p == 20
        assert pair.n == 8
        assert pair.c_eff == 2.5
        assert pair.gram_eigen_floor > 0
        assert np.linalg.matrix_rank(pair.S_plus) == 8

    def test_singular_gram(self):
        Y = np.ones((4, 2))
        with pytest.raises(SingularGramError) as info:
            moore_penrose_inverse(Y)
        assert info.value.condition > 1e12


class TestSpectralStats:
    def test_identity(self):
        stats = spectral_stats(np.eye(3))
        assert stats.trace == 3
        assert stats.frobenius_sq == pytest.approx(3)
        np.testing.assert_allclose(stats.eigenvalues, [1, 1, 1])

    def test_diagonal(self):
        stats = spectral_stats(np.diag([1.0, 2.0]))
        assert stats.trace == 3.0
        assert stats.frobenius_sq == pytest.approx(5.0)
        np.testing.assert_allclose(stats.eigenvalues, [2, 1])

    def test_entrywise_frobenius(self):
        S = sample_covariance(sample_noise(30, 10, Noise.GAUSSIAN, 2))
        assert spectral_stats(S).frobenius_sq == pytest.approx(np.sum(S ** 2), rel=1e-9)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError):
            spectral_stats(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestLoadMatrix:
    def test_reads_with_comments(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("# Sigma\n1 0.5\n\n0.5 2  # second row\n")
        np.testing.assert_array_equal(load_matrix(path), [[1.0, 0.5], [0.5, 2.0]])

    def test_ragged_row_reports_line(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("1 2 3\n4 5 6\n7 8\n")
        with pytest.raises(DataFileError) as info:
            load_matrix(path)
        assert info.value.line == 3
        assert ":3:" in str(info.value)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("1 2\nx 3\n")
        with pytest.raises(DataFileError, match="non-numeric"):
            load_matrix(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFileError):
            load_matrix(tmp_path / "nope.txt")
