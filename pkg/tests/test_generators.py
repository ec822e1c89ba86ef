import numpy as np
import pytest
from scipy import integrate

from ellbounds import MomentError, ModelError, make_generator

from conftest import CATALOG


@pytest.mark.parametrize("kind,param", CATALOG)
@pytest.mark.parametrize("N", [1, 2, 4])
def test_density_normalized(kind, param, N):
    # quadrature oracle: the radial density of t must integrate to 1
    gen = make_generator(kind, param)
    mass, _ = integrate.quad(lambda t: gen.radial_pdf(t, N), 0.0, np.inf, limit=300)
    assert abs(mass - 1.0) <= 1e-6


@pytest.mark.parametrize("kind,param", CATALOG + [("gen-gaussian", 2.0)])
def test_psi_matches_logg_derivative(kind, param):
    gen = make_generator(kind, param)
    t = np.geomspace(0.05, 60.0, 40)
    h = 1e-6 * t
    fd = (gen.logg(t + h, 3) - gen.logg(t - h, 3)) / (2.0 * h)
    rel = np.abs(fd - gen.psi(t, 3)) / np.abs(gen.psi(t, 3))
    assert rel.max() <= 1e-6


@pytest.mark.parametrize("kind,param", CATALOG)
def test_logg_finite_on_grid(kind, param):
    gen = make_generator(kind, param)
    vals = gen.logg(np.linspace(0.0, 1e4, 200), 4)
    assert np.all(np.isfinite(vals))


@pytest.mark.parametrize("kind,param", CATALOG)
def test_radial_quantile_inverts_cdf(kind, param):
    gen = make_generator(kind, param)
    u = np.linspace(0.01, 0.99, 25)
    t = gen.radial_quantile(u, 3)
    assert np.all(np.diff(t) > 0)
    np.testing.assert_allclose(gen.radial_cdf(t, 3), u, atol=1e-10)


def test_radial_cdf_matches_pdf_quadrature():
    # independent oracle: cdf(t) == integral of the pdf up to t
    gen = make_generator("student-t", 4.0)
    for t_hi in (0.5, 2.0, 10.0):
        val, _ = integrate.quad(lambda t: gen.radial_pdf(t, 2), 0.0, t_hi, limit=200)
        assert abs(val - gen.radial_cdf(t_hi, 2)) <= 1e-8


def test_modular_radius_is_sqrt_of_t_quantile():
    gen = make_generator("gaussian")
    u = np.array([0.2, 0.5, 0.9])
    np.testing.assert_allclose(
        gen.radial_cdf_inverse(u, 3) ** 2, gen.radial_quantile(u, 3), rtol=1e-12
    )


def test_student_t_requires_finite_second_moment():
    with pytest.raises(MomentError):
        make_generator("student-t", 1.5)
    with pytest.raises(MomentError):
        make_generator("student-t", 2.0)


def test_gen_gaussian_requires_positive_shape():
    with pytest.raises(ModelError):
        make_generator("gen-gaussian", 0.0)


def test_unknown_kind_rejected():
    with pytest.raises(ModelError):
        make_generator("cauchy")


def test_moment_existence_rule():
    t5 = make_generator("student-t", 5.0)
    assert t5.moment_exists(4) and not t5.moment_exists(5)
    assert make_generator("gaussian").moment_exists(12)
