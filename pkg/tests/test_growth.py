import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqvar import registry
from pqvar.growth import (DegenerateFormError, DegeneratePointError,
                          EllipticityViolationError, NotEvenError, check_legendre,
                          delta_of_homogeneous, ellipticity_eigs, ellipticity_ratio,
                          gehring_exponent, homogeneous_decomposition,
                          polynomial_growth_exponents, sum_growth)
from pqvar.integrands import (AxisPower, EvenPolynomial, HomogeneousForm, PowerNorm,
                              Scaled, Sum, frob2)
from pqvar.model import InvalidRegimeError, Regime

MODEL = Sum([PowerNorm(0.0, 2.0), AxisPower(1, 4.0)])
ANISO = registry.get("aniso2d_q4")


class TestEigs:
    def test_shifted_quadratic(self):
        # 1 + |z|^2 has hessian 2I everywhere
        F = PowerNorm(1.0, 2.0)
        lo, hi = ellipticity_eigs(F, np.array([[5.0, -3.0]]))
        assert lo == pytest.approx(2.0) and hi == pytest.approx(2.0)
        assert ellipticity_ratio(F, np.array([[5.0, -3.0]])) == pytest.approx(1.0)

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0, 100.0])
    def test_model_axis_point(self, t):
        lo, hi = ellipticity_eigs(MODEL, np.array([[t, 0.0]]))
        assert lo == pytest.approx(2.0)
        assert hi == pytest.approx(2.0 + 12.0 * t * t)
        assert ellipticity_ratio(MODEL, np.array([[t, 0.0]])) == pytest.approx(1.0 + 6.0 * t * t)

    def test_ratio_blows_up(self):
        assert ellipticity_ratio(MODEL, np.array([[100.0, 0.0]])) > \
            ellipticity_ratio(MODEL, np.array([[10.0, 0.0]])) > 1.0

    def test_2x2_characteristic_polynomial_oracle(self):
        rng = np.random.default_rng(30)
        for _ in range(50):
            z = rng.normal(size=(1, 2)) * rng.uniform(0.1, 5)
            H = MODEL.hessian(z).reshape(2, 2)
            tr, det = H[0, 0] + H[1, 1], H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
            disc = math.sqrt(max(tr * tr - 4 * det, 0.0))
            lo, hi = ellipticity_eigs(MODEL, z)
            assert lo == pytest.approx((tr - disc) / 2, rel=1e-10, abs=1e-12)
            assert hi == pytest.approx((tr + disc) / 2, rel=1e-10, abs=1e-12)

    def test_degenerate_point(self):
        with pytest.raises(DegeneratePointError):
            ellipticity_ratio(PowerNorm(0.0, 4.0), np.zeros((1, 2)))


class TestCheckLegendre:
    def test_aniso_quartic_passes(self):
        cert = check_legendre(ANISO.integrand, ANISO.regime, 4096, 1e3, seed=0)
        assert np.isfinite(cert.constant_assf3) and cert.constant_assf3 <= ANISO.regime.L
        assert np.isfinite(cert.constant_assf1)
        assert len(cert.worst_points) == 3

    def test_power_norm_nondegenerate(self):
        r = Regime(2, 1, 3.0, 4.0, 1.0, 12.0)
        cert = check_legendre(PowerNorm(1.0, 3.0), r, 2048, 1e2, seed=1)
        assert np.isfinite(cert.constant_assf3)

    def test_equal_exponents_rejected(self):
        with pytest.raises(InvalidRegimeError):
            check_legendre(PowerNorm(0.0, 2.0), Regime(2, 1, 2.0, 2.0, 0.0, 2.5), 64, 10)

    def test_violation_carries_witness(self):
        # a concave-direction integrand cannot be p-elliptic
        bad = Scaled(1e-6, PowerNorm(0.0, 2.0)) + AxisPower(1, 4.0)
        r = Regime(2, 1, 2.0, 4.0, 0.0, 2.0)
        with pytest.raises(EllipticityViolationError) as exc:
            check_legendre(Sum([bad]), r, 512, 10.0, seed=2)
        assert exc.value.witness is not None

    def test_ellipticity_ratio_controlled_by_stress(self):
        # R_F(z) <= C (1 + |F'(z)|^((q-p)/(q-1))) with C stable as the radius grows
        r = ANISO.regime
        rng = np.random.default_rng(31)

        def sampled_constant(radius, count=4000):
            z = rng.normal(size=(count, 1, 2))
            z *= np.exp(rng.uniform(np.log(1e-2), np.log(radius), size=(count, 1, 1)))
            H = ANISO.integrand.hessian(z).reshape(count, 2, 2)
            eigs = np.linalg.eigvalsh(H)
            ratio = eigs[:, -1] / eigs[:, 0]
            gn = np.sqrt(frob2(ANISO.integrand.gradient(z)))
            return (ratio / (1.0 + gn ** ((r.q - r.p) / (r.q - 1.0)))).max()

        c_small, c_big = sampled_constant(10.0), sampled_constant(1e3)
        assert np.isfinite(c_big)
        assert c_big <= 2.0 * c_small + 1e-9


class TestPolynomials:
    def test_decomposition_degrees(self):
        c0 = HomogeneousForm.from_terms(1, 2, 0, [(3.0, ())])
        c2 = HomogeneousForm.from_terms(1, 2, 2, [(1.0, (1, 1)), (1.0, (2, 2))])
        c4 = HomogeneousForm.from_terms(1, 2, 4, [(1.0, (1, 1, 1, 1))])
        comps = homogeneous_decomposition(EvenPolynomial([c0, c2, c4]))
        assert [c.degree for c in comps] == [0, 2, 4]
        assert all(c.nonnegative for c in comps)

    def test_odd_component_rejected(self):
        c2 = HomogeneousForm.from_terms(1, 2, 2, [(1.0, (1, 1))])
        c3 = HomogeneousForm.from_terms(1, 2, 3, [(1.0, (1, 1, 1))])
        with pytest.raises(NotEvenError):
            homogeneous_decomposition(EvenPolynomial([c2, c3]))

    def test_euler_relation_per_component(self):
        rng = np.random.default_rng(32)
        comps = homogeneous_decomposition(ANISO.polynomial)
        z = rng.normal(size=(200, 1, 2)) * 3
        for comp in comps:
            if comp.degree == 0:
                continue
            lhs = (comp.form.gradient(z) * z).sum(axis=(-2, -1))
            rhs = comp.degree * comp.form.value(z)
            assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())

    def test_reassembly(self):
        rng = np.random.default_rng(33)
        z = rng.normal(size=(100, 1, 2)) * 2
        comps = homogeneous_decomposition(ANISO.polynomial)
        total = sum(c.form.value(z) for c in comps)
        assert np.abs(total - ANISO.polynomial.value(z)).max() < 1e-12 * 100

    def test_growth_exponents_model(self):
        out = polynomial_growth_exponents(ANISO.polynomial, n_samples=10000, radius=100.0)
        assert (out.p_max, out.q) == (2.0, 4.0)
        assert np.isfinite(out.constant)

    def test_growth_exponents_shifted(self):
        # |z|^4 + z1^6 reads off (4, 6)
        c4 = HomogeneousForm.from_terms(
            1, 2, 4, [(1.0, (1, 1, 1, 1)), (2.0, (1, 1, 2, 2)), (1.0, (2, 2, 2, 2))])
        c6 = HomogeneousForm.from_terms(1, 2, 6, [(1.0, (1,) * 6)])
        out = polynomial_growth_exponents(EvenPolynomial([c4, c6]))
        assert (out.p_max, out.q) == (4.0, 6.0)


class TestDelta:
    def test_radial_form(self):
        c4 = HomogeneousForm.from_terms(
            1, 2, 4, [(1.0, (1, 1, 1, 1)), (2.0, (1, 1, 2, 2)), (1.0, (2, 2, 2, 2))])
        assert delta_of_homogeneous(c4, 4) == 0.0

    def test_single_axis_power(self):
        c4 = HomogeneousForm.from_terms(1, 2, 4, [(1.0, (1, 1, 1, 1))])
        assert delta_of_homogeneous(c4, 4) == 0.0

    def test_anisotropic_quartic(self):
        # (z1^2 + 4 z2^2)^2: analytic defect sqrt(1 - min (1+3t)^2/(1+15t)) = 0.6
        aniso = HomogeneousForm.from_terms(
            1, 2, 4, [(1.0, (1, 1, 1, 1)), (8.0, (1, 1, 2, 2)), (16.0, (2, 2, 2, 2))])
        d = delta_of_homogeneous(aniso, 4, sphere_samples=8192)
        assert 0.0 < d < 1.0
        assert d == pytest.approx(0.6, abs=5e-3)

    def test_zero_form_rejected(self):
        c4 = HomogeneousForm(1, 2, 4, np.zeros((2,) * 4))
        with pytest.raises(DegenerateFormError):
            delta_of_homogeneous(c4, 4)


class TestSumGrowth:
    def test_quadratic_plus_axis_power(self):
        H = HomogeneousForm.from_terms(1, 2, 4, [(1.0, (1, 1, 1, 1))])
        r = Regime(2, 1, 2.0, 2.0, 0.0, 4.0)
        out = sum_growth(PowerNorm(0.0, 2.0), r, H, n_samples=1024, seed=3)
        assert (out.p, out.q) == (2.0, 4.0)
        assert not out.equal_exponents and out.certificate is not None

    def test_repeated_application_matches_model(self):
        # adding the axis powers one at a time reproduces the (2, 4) model exponents
        r = Regime(2, 1, 2.0, 2.0, 0.0, 8.0)
        Q = PowerNorm(0.0, 2.0)
        for i in (1, 2):
            H = HomogeneousForm.from_terms(1, 2, 4, [(1.0, (i,) * 4)])
            out = sum_growth(Q, r, H, n_samples=1024, seed=4)
            Q = Sum([Q, EvenPolynomial([H])])
            r = r.with_exponents(q=out.q)
        assert (r.p, r.q) == (2.0, 4.0)

    def test_equal_exponent_case_reported(self):
        H = HomogeneousForm.from_terms(1, 2, 4, [(1.0, (1, 1, 1, 1))])
        r = Regime(2, 1, 4.0, 4.0, 0.0, 6.0)
        out = sum_growth(PowerNorm(0.0, 4.0), r, H, n_samples=256)
        assert out.equal_exponents and out.certificate is None
        assert (out.p, out.q) == (4.0, 4.0)


class TestGehringExponent:
    def test_reference_values(self):
        assert gehring_exponent(1.0, 1.0, 0.5) == 1.5
        assert gehring_exponent(2.0, 10.0, 0.5) == pytest.approx(39.5 / 39.0)

    def test_decreasing_to_one(self):
        ts = [gehring_exponent(1.0, M, 0.5) for M in (1, 10, 100, 1000)]
        assert all(b < a for a, b in zip(ts, ts[1:]))
        assert ts[-1] > 1.0

    # the domain keeps (1-m)/(2 c0 M - 1) above float resolution; at the exact
    # boundary (m within an ulp of 1 against huge c0 M) t rounds down to 1.0
    @given(c0=st.floats(1.0, 1e3), M=st.floats(1.0, 1e6),
           m=st.floats(1e-6, 1.0 - 1e-6))
    @settings(max_examples=300)
    def test_range_property(self, c0, M, m):
        t = gehring_exponent(c0, M, m)
        assert 1.0 < t < 2.0
        # the gap obeys t - 1 = (1-m)/(2 c0 M - 1) <= 1/(2 c0 M - 1)
        assert t - 1.0 <= 1.0 / (2.0 * c0 * M - 1.0) + 1e-15

    def test_domain_errors(self):
        for bad in ((0.5, 1.0, 0.5), (1.0, 0.5, 0.5), (1.0, 1.0, 1.0), (1.0, 1.0, 0.0)):
            with pytest.raises(ValueError):
                gehring_exponent(*bad)
