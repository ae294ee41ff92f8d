import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from ovlq import distributions as D
from ovlq.distributions import (
    MIXTURE,
    TRAPEZOIDAL,
    UNIFORM,
    EmpiricalSample,
    cdf,
    ecdf,
    normal,
    parse_distribution,
    sample,
)

ALL = [UNIFORM, normal(0, 1), normal(0.2, 1), normal(0, 1.1), TRAPEZOIDAL, MIXTURE]


def trapezoid_density(x):
    r2 = math.sqrt(2)
    if -2 <= x <= -r2:
        return (x + 2) / 2
    if -r2 < x <= r2:
        return (2 - r2) / 2
    if r2 < x <= 2:
        return (-x + 2) / 2
    return 0.0


@pytest.mark.parametrize(
    "spec, x, expected",
    [
        (UNIFORM, 0.5, 0.5),
        (UNIFORM, -3.0, 0.0),
        (UNIFORM, 7.0, 1.0),
        (normal(0, 1), 0.0, 0.5),
        (TRAPEZOIDAL, 0.0, 0.5),
        (MIXTURE, 0.0, 0.5),
        (TRAPEZOIDAL, -2.0, 0.0),
        (TRAPEZOIDAL, 2.0, 1.0),
    ],
)
def test_cdf_examples(spec, x, expected):
    assert cdf(spec, x) == pytest.approx(expected, abs=1e-15)


def test_normal_cdf_matches_arbitrary_precision():
    mpmath.mp.dps = 40
    xs = np.linspace(-9, 9, 721)
    for mu, sigma in [(0, 1), (0.2, 1), (0, 1.1), (-0.8, 0.6)]:
        got = cdf(normal(mu, sigma), xs)
        want = [float(mpmath.ncdf(mpmath.mpf(x), mu, sigma)) for x in xs]
        assert np.max(np.abs(got - want)) <= 1e-12


def test_trapezoid_cdf_is_integral_of_density():
    for x in np.linspace(-2.5, 2.5, 41):
        upper = min(max(-2.0, x), 2.0)
        val = 0.0
        # integrate piece by piece so quad never straddles a kink
        edges = [-2.0, -math.sqrt(2), math.sqrt(2), 2.0]
        for a, b in zip(edges, edges[1:]):
            if upper > a:
                val += integrate.quad(trapezoid_density, a, min(b, upper), epsabs=1e-15)[0]
        assert cdf(TRAPEZOIDAL, x) == pytest.approx(val, abs=1e-12)


def test_trapezoid_agrees_with_library_parameterisation():
    # scipy's trapezoid(c, d, loc=-2, scale=4) describes the same law
    lib = stats.trapezoid((2 - math.sqrt(2)) / 4, (2 + math.sqrt(2)) / 4, loc=-2, scale=4)
    xs = np.linspace(-2.2, 2.2, 1001)
    np.testing.assert_allclose(cdf(TRAPEZOIDAL, xs), lib.cdf(xs), atol=1e-12)


def test_mixture_cdf_is_average_of_components():
    xs = np.linspace(-4, 4, 81)
    want = 0.5 * (stats.norm.cdf(xs, -0.8, 0.6) + stats.norm.cdf(xs, 0.8, 0.6))
    np.testing.assert_allclose(cdf(MIXTURE, xs), want, atol=1e-12)


@pytest.mark.parametrize("spec", [TRAPEZOIDAL, MIXTURE, normal(0, 1), normal(0, 2.5)])
def test_symmetry(spec):
    xs = np.linspace(-5, 5, 2001)
    np.testing.assert_allclose(cdf(spec, -xs) + cdf(spec, xs), 1.0, atol=1e-12, rtol=0)


def test_trapezoid_quantile_round_trip():
    u = (np.arange(1, 10_001) - 0.5) / 10_000
    np.testing.assert_allclose(cdf(TRAPEZOIDAL, D.trapezoidal_quantile(u)), u, atol=1e-10, rtol=0)


@given(
    st.sampled_from(ALL),
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
)
def test_cdf_monotone(spec, x1, x2):
    lo, hi = sorted((x1, x2))
    assert 0.0 <= cdf(spec, lo) <= cdf(spec, hi) <= 1.0


def test_cdf_limits():
    for spec in ALL:
        assert cdf(spec, -1e6) == 0.0
        assert cdf(spec, 1e6) == 1.0


def test_invalid_sigma():
    with pytest.raises(D.ParameterError):
        normal(0, 0)
    with pytest.raises(D.ParameterError):
        normal(0, -1)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("uniform", UNIFORM),
        ("UNIFORM", UNIFORM),
        ("Trapezoidal", TRAPEZOIDAL),
        ("mixture", MIXTURE),
        ("normal(0.2,1)", normal(0.2, 1)),
        ("Normal( -1.5e0 , 2 )", normal(-1.5, 2)),
    ],
)
def test_parse(text, expected):
    assert parse_distribution(text) == expected


@pytest.mark.parametrize("text", ["gauss", "normal", "normal(0)", "normal(0,0)", "normal(a,b)"])
def test_parse_rejects(text):
    with pytest.raises(D.ParameterError):
        parse_distribution(text)


def test_name_round_trip():
    for spec in ALL:
        assert parse_distribution(spec.name) == spec


def test_sample_deterministic_and_sorted():
    a = sample(UNIFORM, 3, 42)
    b = sample(UNIFORM, 3, 42)
    np.testing.assert_array_equal(a.values, b.values)
    assert np.all(np.diff(a.values) >= 0)
    assert not np.array_equal(a.values, sample(UNIFORM, 3, 43).values)


def test_uniform_support():
    s = sample(UNIFORM, 100_000, 11)
    assert s.values.min() >= 0 and s.values.max() <= 1


def test_mixture_sample_mean():
    # the mixture mean is 0; confirm by quadrature, then check the sampler
    dens = lambda x: 0.5 * (stats.norm.pdf(x, -0.8, 0.6) + stats.norm.pdf(x, 0.8, 0.6))
    mean, _ = integrate.quad(lambda x: x * dens(x), -np.inf, np.inf)
    assert abs(mean) < 1e-12
    s = sample(MIXTURE, 100_000, 5)
    assert abs(s.values.mean() - mean) < 0.02


@pytest.mark.parametrize("spec", ALL)
def test_sampler_matches_cdf(spec):
    s = sample(spec, 20_000, 8)
    assert stats.kstest(s.values, lambda x: cdf(spec, x)).pvalue > 1e-3


def test_empty_sample():
    with pytest.raises(D.EmptySampleError):
        sample(UNIFORM, 0, 1)
    with pytest.raises(D.EmptySampleError):
        EmpiricalSample([])


@pytest.mark.parametrize(
    "values, x, expected",
    [([0.5], 0.4, 0.0), ([0.5], 0.5, 1.0), ([0.25, 0.75], 0.5, 0.5)],
)
def test_ecdf_examples(values, x, expected):
    assert ecdf(EmpiricalSample(values), x) == expected


def test_ecdf_brute_force():
    rng = np.random.default_rng(3)
    for n in [1, 2, 7, 100, 10_000]:
        v = rng.normal(size=n).round(2)  # rounding creates ties
        s = EmpiricalSample(v)
        for x in rng.normal(size=20).tolist() + v[:5].tolist():
            assert ecdf(s, x) == sum(1 for t in v if t <= x) / n


def test_empirical_sample_sorts_and_freezes():
    s = EmpiricalSample([3.0, 1.0, 2.0])
    assert s.values.tolist() == [1.0, 2.0, 3.0]
    assert s.n == 3
    with pytest.raises(ValueError):
        s.values[0] = 9
