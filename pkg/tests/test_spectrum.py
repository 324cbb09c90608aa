import logging

import numpy as np
import pytest

from geninv.errors import PoleError, ValidationError
from geninv.matrixlab import CovarianceModel
from geninv.spectrum import (SpectrumSpec, apportion, canonicalize, figure1_spectrum, identity_spectrum,
                             integrate, inverse_moment, parse_spectrum)


class TestCanonicalize:
    def test_figure1_atoms(self):
        H = canonicalize([(0.2, 1), (0.4, 3), (0.4, 10)])
        assert list(H.weights) == pytest.approx([0.2, 0.4, 0.4])
        assert list(H.eigenvalues) == [1.0, 3.0, 10.0]
        assert H.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_merges_duplicates_and_sorts(self):
        H = canonicalize([(0.5, 2), (0.5, 2)])
        assert len(H) == 1
        assert H.atoms[0] == pytest.approx((1.0, 2.0))

        H = canonicalize([(0.3, 5), (0.7, 1)])
        assert list(H.eigenvalues) == [1.0, 5.0]
        assert list(H.weights) == pytest.approx([0.7, 0.3])

    def test_rescales_rounded_weights(self, caplog):
        with caplog.at_level(logging.INFO, logger="geninv.spectrum"):
            H = canonicalize([(0.33, 1), (0.33, 2), (0.33, 3)])
        assert H.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert H.weights == pytest.approx([1 / 3] * 3)
        assert "rescaling" in caplog.text

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            canonicalize([])

    def test_rejects_nonpositive_atoms(self):
        with pytest.raises(ValidationError, match="nonpositive eigenvalue"):
            canonicalize([(0.5, 0.0), (0.5, 1.0)])
        with pytest.raises(ValidationError, match="nonpositive weight"):
            canonicalize([(-0.5, 1.0), (1.5, 2.0)])

    def test_spec_is_immutable(self):
        H = identity_spectrum()
        with pytest.raises(ValueError):
            H.weights[0] = 0.5

    def test_direct_construction_checks_invariants(self):
        with pytest.raises(ValidationError):
            SpectrumSpec(atoms=((0.5, 1.0), (0.4, 2.0)))
        with pytest.raises(ValidationError):
            SpectrumSpec(atoms=((0.5, 2.0), (0.5, 1.0)))


class TestParse:
    def test_pairs(self):
        H = parse_spectrum("0.2:1,0.4:3,0.4:10")
        assert H.atoms == figure1_spectrum().atoms

    def test_presets(self):
        assert parse_spectrum("identity").atoms == ((1.0, 1.0),)
        assert parse_spectrum(" Figure1 ").atoms == figure1_spectrum().atoms

    @pytest.mark.parametrize("text", ["1", "a:b", "1:2:3", ""])
    def test_bad_text(self, text):
        with pytest.raises(ValidationError):
            parse_spectrum(text)

    def test_to_text_parses_back(self):
        H = figure1_spectrum()
        back = parse_spectrum(H.to_text())
        np.testing.assert_allclose(back.weights, H.weights, rtol=1e-15)
        np.testing.assert_array_equal(back.eigenvalues, H.eigenvalues)


class TestIntegrate:
    def test_total_mass(self):
        for H in (identity_spectrum(), figure1_spectrum(), canonicalize([(1, 0.5), (2, 7), (3, 1.5)])):
            assert integrate(H, lambda t: 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_linearity(self):
        H = figure1_spectrum()

        def f(t):
            return t ** 2

        def g(t):
            return 1.0 / (1.0 + t)

        lhs = integrate(H, lambda t: 2.5 * f(t) - 3.0 * g(t))
        rhs = 2.5 * integrate(H, f) - 3.0 * integrate(H, g)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_complex_integrand(self):
        z = 1 + 1j
        value = integrate(identity_spectrum(), lambda t: 1.0 / (t - z))
        assert isinstance(value, complex)
        assert value == pytest.approx(1.0 / (1.0 - z))

    def test_pole_names_the_atom(self):
        H = canonicalize([(0.5, 1.0), (0.5, 2.0)])
        with pytest.raises(PoleError, match="eigenvalue 2"):
            integrate(H, lambda t: 1.0 / (t - 2.0))

    def test_inverse_moments(self):
        H = figure1_spectrum()
        assert inverse_moment(H, 1) == pytest.approx(0.2 + 0.4 / 3 + 0.04)
        assert inverse_moment(H, 2) == pytest.approx(0.2 + 0.4 / 9 + 0.004)
        assert H.moment(1) == pytest.approx(5.4)
        assert H.moment(-2) == pytest.approx(inverse_moment(H, 2))
        with pytest.raises(ValidationError):
            inverse_moment(H, 3)

    def test_inverse_moment_matches_finite_sigma(self):
        H = figure1_spectrum()
        tau = CovarianceModel.from_spectrum(H, 10).eigenvalues
        assert np.mean(tau ** -1.0) == pytest.approx(inverse_moment(H, 1), rel=1e-14)
        assert np.mean(tau ** -2.0) == pytest.approx(inverse_moment(H, 2), rel=1e-14)


class TestApportion:
    def test_exact(self):
        assert list(apportion([0.2, 0.4, 0.4], 10)) == [2, 4, 4]

    def test_largest_remainder(self):
        counts = apportion([0.2, 0.4, 0.4], 7)
        assert counts.sum() == 7
        # quotas 1.4, 2.8, 2.8: the two .8 remainders win
        assert list(counts) == [1, 3, 3]

    def test_ties_go_to_the_first_atom(self):
        assert list(apportion([0.5, 0.5], 3)) == [2, 1]

    @pytest.mark.parametrize("p", [1, 2, 3, 50, 101, 499])
    def test_sums_to_p(self, p):
        assert apportion([0.1, 0.25, 0.3, 0.35], p).sum() == p
