import io

import numpy as np
import pytest
from scipy import integrate, special, stats

from ellbounds import MomentError, mahalanobis, radial_moment, sample_res
from ellbounds.sampling import read_batch_csv, write_batch_csv

from conftest import CATALOG, make_model


def test_gaussian_moments_lln():
    model = make_model("gaussian", N=3)
    batch = sample_res(model, 100_000, seed=101)
    assert np.abs(batch.data.mean(axis=0)).max() < 0.02
    cov = np.cov(batch.data.T)
    assert np.linalg.norm(cov - np.eye(3)) / np.linalg.norm(np.eye(3)) < 0.05


@pytest.mark.parametrize("kind,param", CATALOG)
def test_median_at_center(kind, param):
    model = make_model(kind, param, N=2, mu=np.array([5.0, 5.0]))
    batch = sample_res(model, 10_000, seed=7)
    assert np.abs(np.median(batch.data, axis=0) - 5.0).max() < 0.1


def test_same_seed_bit_identical():
    model = make_model("student-t", 4.0, N=2)
    a = sample_res(model, 20_000, seed=13)
    b = sample_res(model, 20_000, seed=13)
    np.testing.assert_array_equal(a.data, b.data)
    assert a.fingerprint == b.fingerprint


def test_thread_count_does_not_change_draws():
    model = make_model("gen-gaussian", 0.5, N=3)
    a = sample_res(model, 30_000, seed=5, threads=1)
    b = sample_res(model, 30_000, seed=5, threads=8)
    np.testing.assert_array_equal(a.data, b.data)


def test_batch_is_immutable():
    model = make_model("gaussian", N=2)
    batch = sample_res(model, 10, seed=1)
    with pytest.raises(ValueError):
        batch.data[0, 0] = 99.0


def test_radial_moment_chi_square():
    # E[R^2] = E[chi^2_N] = N
    est2 = radial_moment(make_model("gaussian", N=2), 2, 200_000, seed=3)
    assert abs(est2.value - 2.0) < 4 * est2.stderr
    est5 = radial_moment(make_model("gaussian", N=5), 2, 200_000, seed=3)
    assert abs(est5.value - 5.0) < 4 * est5.stderr


def test_radial_moment_student_quadrature_oracle():
    model = make_model("student-t", 5.0, N=2)
    gen = model.generator
    oracle, _ = integrate.quad(lambda t: t * gen.radial_pdf(t, 2), 0.0, np.inf, limit=300)
    assert abs(oracle - 10.0 / 3.0) < 1e-8  # E[t] = N nu/(nu-2), frozen
    est = radial_moment(model, 2, 400_000, seed=21)
    assert abs(est.value - oracle) < 4 * est.stderr


def test_radial_moment_nonexistent():
    with pytest.raises(MomentError):
        radial_moment(make_model("student-t", 3.0, N=2), 4, 100, seed=1)


def test_directional_uniformity():
    model = make_model("student-t", 4.0, N=3)
    batch = sample_res(model, 100_000, seed=17)
    U = batch.data / np.linalg.norm(batch.data, axis=1, keepdims=True)
    prods = U[:, :, None] * U[:, None, :]
    mean = prods.mean(axis=0)
    se = prods.std(axis=0) / np.sqrt(batch.M)
    assert np.all(np.abs(mean - np.eye(3) / 3.0) <= 3.0 * se)


@pytest.mark.parametrize("kind,param", CATALOG)
def test_mahalanobis_ks_against_radial_cdf(kind, param):
    model = make_model(kind, param, N=3)
    batch = sample_res(model, 10_000, seed=123)
    t = mahalanobis(batch.data, model.mu, model.sigma)
    ks = stats.kstest(t, lambda x: model.generator.radial_cdf(x, 3)).statistic
    assert ks < special.kolmogi(0.01) / np.sqrt(batch.M)


def test_csv_roundtrip():
    model = make_model("gaussian", N=2)
    batch = sample_res(model, 50, seed=9)
    buf = io.StringIO()
    write_batch_csv(batch, buf)
    back = read_batch_csv(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back.data, batch.data)
    assert back.fingerprint == batch.fingerprint
    assert back.model_fingerprint == batch.model_fingerprint
    assert back.seed == batch.seed
