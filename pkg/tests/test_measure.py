import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdim import measure as msr
from specdim.errors import InvalidArgumentError


def cantor_cdf_oracle(x, level):
    """Mass of level-``level`` Cantor atoms in ``(-inf, x]`` by self-similarity."""
    if x < 0:
        return 0.0
    if level == 0:
        return 1.0
    if x < 1 / 3:
        return 0.5 * cantor_cdf_oracle(3 * x, level - 1)
    if x < 2 / 3:
        return 0.5
    return 0.5 + 0.5 * cantor_cdf_oracle(3 * x - 2, level - 1)


finite = st.floats(-3, 3, allow_nan=False)
radius = st.floats(1e-6, 2.0)


@st.composite
def atomic_measures(draw, max_atoms=30):
    n = draw(st.integers(1, max_atoms))
    atoms = draw(st.lists(st.floats(-2, 2, allow_nan=False), min_size=n, max_size=n,
                          unique=True))
    weights = draw(st.lists(st.floats(1e-3, 1.0), min_size=n, max_size=n))
    return msr.AtomicMeasure.from_points(atoms, weights)


def reference_measures():
    return [
        msr.uniform(),
        msr.uniform(-1.0, 2.0),
        msr.power_law(0.25),
        msr.cantor(8),
        msr.mixture([(0.5, msr.uniform()), (0.5, msr.AtomicMeasure([0.25, 0.5], [0.3, 0.7]))]),
    ]


# -- construction ---------------------------------------------------------------

def test_atomic_validation():
    with pytest.raises(InvalidArgumentError):
        msr.AtomicMeasure([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        msr.AtomicMeasure([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(InvalidArgumentError):
        msr.AtomicMeasure([0.0, np.nan], [1.0, 1.0])


def test_from_points_merges_and_sorts():
    m = msr.AtomicMeasure.from_points([0.5, 0.1, 0.5], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(m.atoms, [0.1, 0.5])
    np.testing.assert_array_equal(m.weights, [2.0, 4.0])


def test_power_law_rejects_nonintegrable():
    with pytest.raises(InvalidArgumentError):
        msr.power_law(0.5)


@pytest.mark.parametrize("spec", [
    {"type": "atomic", "atoms": [0, 1], "weights": [0.5, 0.5]},
    {"type": "power_law", "theta": 0.25},
    {"type": "uniform", "a": 0, "b": 2},
    {"type": "cantor", "level": 5},
    {"type": "mixture", "components": [{"coef": 0.5, "measure": {"type": "uniform"}}]},
])
def test_from_spec_roundtrip(spec):
    m = msr.from_spec(spec)
    again = msr.from_spec(m.to_spec())
    xs = np.linspace(-0.5, 2.5, 41)
    np.testing.assert_allclose(again.cdf(xs), m.cdf(xs), atol=1e-15)


@pytest.mark.parametrize("spec", [{"type": "nope"}, {"type": "power_law"}, [], {"atoms": []}])
def test_from_spec_rejects(spec):
    with pytest.raises(InvalidArgumentError):
        msr.from_spec(spec)


# -- closed forms and oracles ---------------------------------------------------------

def test_cantor_cdf_matches_recursion():
    level = 10
    m = msr.cantor(level)
    rng = np.random.default_rng(3)
    xs = np.concatenate([rng.random(500), (m.atoms[:-1] + m.atoms[1:]) / 2])
    got = m.cdf(xs)
    want = [cantor_cdf_oracle(float(x), level) for x in xs]
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_cantor_atoms_are_triadic():
    m = msr.cantor(6)
    digits = np.round(m.atoms * 3 ** 6).astype(int)
    for n in digits:
        for _ in range(6):
            assert n % 3 in (0, 2)
            n //= 3
    assert m.size == 64 and m.total == pytest.approx(1.0, abs=1e-15)


def test_power_law_cdf_closed_form():
    theta = 0.1
    c = 0.5 - theta
    m = msr.power_law(theta)
    xs = np.array([0.0, 1e-8, 0.3, 0.9, 1.0])
    np.testing.assert_allclose(m.cdf(xs), xs ** c / (2 * c), rtol=1e-14)
    assert m.total == pytest.approx(1 / (2 * c))


def test_power_law_ball_near_origin_is_cancellation_free():
    m = msr.power_law(0.25)
    x, eps = 0.5, 1e-12
    # mass ~ density * 2 eps with density 0.5 * x**-0.75
    assert m.ball_mass(x, eps) == pytest.approx(0.5 * x ** -0.75 * 2 * eps, rel=1e-9)


def test_uniform_ball_mass():
    m = msr.uniform()
    assert m.ball_mass(0.5, 0.1) == pytest.approx(0.2)
    assert m.ball_mass(0.05, 0.1) == pytest.approx(0.15)
    assert m.ball_mass(3.0, 0.1) == 0.0


def test_integrate_piecewise_lebesgue():
    # int x^2 d(unif) = 1/3; int x d(power law) = (1/2) / (3/2 - theta)
    assert msr.integrate_mu(msr.uniform(), lambda x: x ** 2) == pytest.approx(1 / 3, abs=1e-13)
    theta = 0.2
    assert msr.integrate_mu(msr.power_law(theta), lambda x: x) == pytest.approx(
        0.5 / (1.5 - theta), rel=1e-10)
    mix = msr.mixture([(2.0, msr.uniform()), (1.0, msr.AtomicMeasure([0.5], [1.0]))])
    assert msr.integrate_mu(mix, lambda x: x ** 2) == pytest.approx(2 / 3 + 0.25, abs=1e-13)


def test_integrate_matches_riemann_sum():
    n = 10 ** 6
    x = (np.arange(n) + 0.5) / n
    g = lambda t: np.cos(3 * t) * np.exp(t)
    riemann = np.sum(g(-1 + 3 * x)) * 3 / n  # unit density on [-1, 2]
    assert msr.integrate_mu(msr.uniform(-1, 2), g) == pytest.approx(riemann, abs=1e-9)


def test_integrate_atomic_is_exact_sum():
    m = msr.AtomicMeasure([0.1, 0.2, 0.7], [0.2, 0.3, 0.5])
    assert msr.integrate_mu(m, np.sin) == math.fsum(w * math.sin(a) for a, w in
                                                    zip(m.atoms, m.weights))


def test_quantile_inverts_cdf():
    m = msr.power_law(0.25)
    u = np.linspace(0, m.total, 11)
    np.testing.assert_allclose(m.cdf(m.quantile(u)), u, atol=1e-13)


def test_atomic_discretization_total():
    m = msr.power_law(0.25)
    d = msr.atomic_discretization(m, 1000)
    assert d.total == pytest.approx(m.total, rel=1e-14)
    assert d.size == 1000


# -- properties -----------------------------------------------------------------

@given(atomic_measures(), finite, radius)
def test_atomic_ball_equals_cdf_difference(m, x, eps):
    assert m.ball_mass(x, eps) == pytest.approx(m.cdf(x + eps) - m.cdf_left(x - eps), abs=1e-12)


@given(atomic_measures())
def test_mass_conservation(m):
    assert m.ball_mass(0.0, 10.0) == pytest.approx(m.total, rel=1e-14)
    lo, hi = msr.support_interval(m)
    assert m.cdf(hi) == pytest.approx(m.total, rel=1e-14)
    assert m.cdf_left(lo) == 0.0


@settings(max_examples=40)
@given(st.sampled_from(range(5)), finite, radius, radius)
def test_ball_mass_monotone_in_radius(i, x, e1, e2):
    m = reference_measures()[i]
    lo, hi = sorted((e1, e2))
    assert m.ball_mass(x, lo) <= m.ball_mass(x, hi) + 1e-14


@settings(max_examples=40)
@given(st.sampled_from(range(5)), finite, radius)
def test_ball_cdf_consistency(i, x, eps):
    m = reference_measures()[i]
    want = m.cdf(x + eps) - m.cdf_left(x - eps)
    assert m.ball_mass(x, eps) == pytest.approx(want, abs=1e-12)


@settings(max_examples=40)
@given(st.sampled_from(range(5)), st.lists(finite, min_size=2, max_size=20))
def test_cdf_monotone(i, xs):
    m = reference_measures()[i]
    xs = np.sort(xs)
    assert np.all(np.diff(m.cdf(xs)) >= -1e-15)


@settings(max_examples=40)
@given(st.floats(0.01, 5), st.floats(0.01, 5), finite, radius)
def test_mixture_linearity(a, b, x, eps):
    u, p = msr.uniform(), msr.AtomicMeasure([0.2, 0.6], [0.4, 0.6])
    mix = msr.mixture([(a, u), (b, p)])
    want = a * u.ball_mass(x, eps) + b * p.ball_mass(x, eps)
    assert mix.ball_mass(x, eps) == pytest.approx(want, rel=1e-12, abs=1e-15)
    assert mix.integrate(np.cos) == pytest.approx(a * u.integrate(np.cos) + b * p.integrate(np.cos))
