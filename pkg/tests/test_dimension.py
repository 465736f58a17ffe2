import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdim import dimension as dim
from specdim import measure as msr
from specdim.errors import InvalidArgumentError

CANTOR_DIM = math.log(2) / math.log(3)


@st.composite
def atomic_measures(draw, max_atoms=25):
    n = draw(st.integers(2, max_atoms))
    atoms = [k / 1000 for k in draw(st.lists(st.integers(0, 1000), min_size=n, max_size=n,
                                             unique=True))]
    weights = draw(st.lists(st.floats(1e-2, 1.0), min_size=n, max_size=n))
    return msr.AtomicMeasure.from_points(atoms, weights)


# -- grid -----------------------------------------------------------------------

def test_grid_values_and_default_window():
    g = dim.EpsilonGrid(0.25, 24, 0.5)
    np.testing.assert_allclose(g.eps, 0.25 * 0.5 ** np.arange(25))
    assert g.default_window() == (6, 21)
    assert g.floor() == pytest.approx(0.25 * 0.5 ** 21)


@pytest.mark.parametrize("window", [(0, 3), (5, 30), (6, 6), (-1, 8)])
def test_grid_rejects_bad_window(window):
    with pytest.raises(InvalidArgumentError):
        dim.EpsilonGrid(0.25, 24).check_window(window)


@pytest.mark.parametrize("q", [1.0, 0.0, -2.0, float("nan")])
def test_bad_q(q):
    with pytest.raises(InvalidArgumentError):
        dim.correlation_integral(msr.uniform(), q, 0.1)


def test_bad_kind():
    with pytest.raises(InvalidArgumentError):
        dim.estimate_dimensions(msr.uniform(), 2.0, kind="box")


# -- integrals against closed forms and Riemann sums -----------------------------

@pytest.mark.parametrize("eps", [0.3, 0.1, 1e-3, 1e-6])
def test_uniform_correlation_integral_closed_form(eps):
    # int_0^1 |B(x, eps) cap [0, 1]| dx = 2 eps - eps^2 for eps <= 1/2
    assert dim.correlation_integral(msr.uniform(), 2.0, eps) == pytest.approx(
        2 * eps - eps ** 2, rel=1e-12)


@pytest.mark.parametrize("eps", [0.3, 0.05, 1e-4])
def test_uniform_mean_integral_closed_form(eps):
    want = 4 * eps - 8 * eps ** 2 / 3
    assert dim.mean_integral(msr.uniform(), 2.0, eps) == pytest.approx(want, rel=1e-12)


def test_mean_integral_matches_riemann_sum():
    m = msr.power_law(0.25)
    eps, q = 0.05, 2.5
    n = 10 ** 6
    x = -eps + (1 + 2 * eps) * (np.arange(n) + 0.5) / n
    riemann = np.sum(m.ball_mass(x, eps) ** q) * (1 + 2 * eps) / n / eps
    assert dim.mean_integral(m, q, eps) == pytest.approx(riemann, rel=1e-6)


def test_power_law_correlation_matches_riemann_sum():
    # int mu(B)^(q-1) dmu = int mu(B(x))^(q-1) rho(x) dx, midpoint rule in x = u^4
    theta, eps, q = 0.25, 0.01, 3.0
    m = msr.power_law(theta)
    n = 10 ** 6
    u = (np.arange(n) + 0.5) / n
    x = u ** 4
    rho = 0.5 * x ** -(theta + 0.5)
    riemann = np.sum(m.ball_mass(x, eps) ** (q - 1) * rho * 4 * u ** 3) / n
    assert dim.correlation_integral(m, q, eps) == pytest.approx(riemann, rel=1e-5)


def test_atomic_integral_exact_below_gap():
    m = msr.AtomicMeasure([0.0, 0.1, 0.35], [0.2, 0.5, 0.3])
    g = m.min_gap()
    for q in (0.5, 2.0, 3.0):
        want = float(np.sum(m.weights ** q))
        vals = {dim.correlation_integral(m, q, e) for e in (0.01 * g, 0.3 * g, 0.999 * g)}
        assert len(vals) == 1
        assert vals.pop() == pytest.approx(want, rel=1e-15)
        # mean integral: each atom alone sweeps length 2 eps below g/2
        assert dim.mean_integral(m, q, 0.2 * g) == pytest.approx(2 * want, rel=1e-13)


@settings(max_examples=40)
@given(atomic_measures(), st.floats(0.0, 0.5))
def test_atom_exactness_below_gap(m, frac):
    g = m.min_gap()
    a = dim.correlation_integral(m, 2.0, g / 2)
    b = dim.correlation_integral(m, 2.0, g / 2 * (0.01 + frac))
    assert a == b


# -- estimates ------------------------------------------------------------------

def test_uniform_dimensions_are_one():
    for q in (0.5, 2.0, 3.0):
        for kind in dim.KINDS:
            e = dim.estimate_dimensions(msr.uniform(), q, kind=kind)
            assert e.regression_est == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("s", [2.0, 3.0, 5.0])
def test_power_law_dimension_scaling(s):
    # local exponent c = 1/2 - theta at the origin dominates for s > 1
    theta = 0.25
    c = 0.5 - theta
    e = dim.estimate_dimensions(msr.power_law(theta), s)
    assert e.regression_est == pytest.approx(min(1.0, c * s / (s - 1)), abs=0.01)


def test_power_law_small_q_is_one():
    e = dim.estimate_dimensions(msr.power_law(0.25), 0.5)
    assert e.regression_est > 0.99
    assert e.lower_est > 0.95


@pytest.mark.parametrize("q", [0.5, 2.0, 4.0])
def test_cantor_correlation_is_exact(q):
    grid = dim.EpsilonGrid(1.0, 16, 1 / 3)
    e = dim.estimate_dimensions(msr.cantor(16), q, grid, window=(4, 12))
    assert e.lower_est == pytest.approx(CANTOR_DIM, abs=1e-9)
    assert e.upper_est == pytest.approx(CANTOR_DIM, abs=1e-9)


def test_endpoint_slope_at_unit_scale_is_nan_without_warning():
    grid = dim.EpsilonGrid(1.0, 8, 1 / 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        e = dim.estimate_dimensions(msr.cantor(8), 2.0, grid, window=(0, 8))
    assert math.isnan(e.series.endpoint_slopes[0])
    assert np.all(np.isfinite(e.series.endpoint_slopes[1:]))


def test_summary_and_rows():
    e = dim.estimate_dimensions(msr.uniform(), 2.0, dim.EpsilonGrid(0.25, 8), window=(2, 8))
    s = e.summary()
    assert s["window"] == [2, 8]
    assert s["eps_window"] == [0.25 / 4, 0.25 / 256]
    assert len(e.rows()) == 9
    assert e.rows()[0][:2] == (2.0, "correlation")


@settings(max_examples=25)
@given(atomic_measures())
def test_regression_between_local_slopes(m):
    e = dim.estimate_dimensions(m, 2.0, dim.EpsilonGrid(1.0, 10), window=(0, 10))
    assert e.lower_est - 1e-12 <= e.regression_est <= e.upper_est + 1e-12


@settings(max_examples=25)
@given(atomic_measures(), st.floats(1e-4, 0.5))
def test_finite_scale_dimension_nonincreasing_in_q(m, eps):
    # (int mu(B)^(q-1) dmu)^(1/(q-1)) is nondecreasing in q (Lyapunov), so
    # ln I / ((q - 1) ln eps) is nonincreasing for eps < 1 and total mass 1
    m = m.normalized()
    qs = [0.25, 0.5, 0.75, 1.5, 2.0, 3.0]
    d = [math.log(dim.correlation_integral(m, q, eps)) / ((q - 1) * math.log(eps)) for q in qs]
    assert all(b <= a + 1e-9 for a, b in zip(d[:-1], d[1:]))


@settings(max_examples=25)
@given(atomic_measures())
def test_clipped_in_unit_interval(m):
    e = dim.estimate_dimensions(m, 3.0, dim.EpsilonGrid(1.0, 8), window=(0, 8))
    for v in (e.lower_clipped, e.upper_clipped, e.regression_clipped):
        assert 0.0 <= v <= 1.0


# -- pointwise and Hausdorff --------------------------------------------------------

def test_pointwise_exponents():
    assert dim.pointwise_exponent(msr.uniform(), 0.5) == pytest.approx(1.0, abs=1e-9)
    assert dim.pointwise_exponent(msr.power_law(0.25), 0.0) == pytest.approx(0.25, abs=1e-9)
    assert dim.pointwise_exponent(msr.AtomicMeasure([0.5], [1.0]), 0.5) == 0.0
    assert dim.pointwise_exponent(msr.uniform(), 3.0) == math.inf


def test_hausdorff_upper_reference_values():
    grid = dim.EpsilonGrid(1.0, 16, 1 / 3)
    assert dim.hausdorff_upper(msr.cantor(16), grid=grid, window=(4, 12)) == pytest.approx(
        CANTOR_DIM, abs=1e-3)
    assert dim.hausdorff_upper(msr.uniform()) == pytest.approx(1.0, abs=1e-3)
    assert dim.hausdorff_upper(msr.AtomicMeasure([0.1, 0.7], [0.5, 0.5])) == 0.0


def test_hausdorff_rejects_few_samples():
    with pytest.raises(InvalidArgumentError):
        dim.hausdorff_upper(msr.uniform(), n_samples=10)


# -- classification and mixtures ------------------------------------------------------

def _fake(q, lo, hi):
    series = dim.SlopeSeries(q, "correlation", np.ones(2), np.ones(2), np.ones(1), np.ones(2))
    return dim.DimensionEstimate(q, "correlation", lo, hi, lo, (0, 1), series)


@pytest.mark.parametrize("low, up, want", [
    (0.5, 0.5, "singular-continuous-compatible"),
    (0.5, 0.01, "point-component"),
    (1.0, 0.95, "ac-component"),
    (0.95, 0.92, "ac-component"),
])
def test_classify_spectral_type(low, up, want):
    assert dim.classify_spectral_type(_fake(0.5, low, low), _fake(2.0, up, up)) == want


def test_classify_needs_q_on_both_sides():
    with pytest.raises(InvalidArgumentError):
        dim.classify_spectral_type(_fake(2.0, 1, 1), _fake(3.0, 1, 1))


def test_mixture_sweep_atom_dominates_large_q():
    grid = dim.EpsilonGrid(1e-6, 16)
    pp = msr.AtomicMeasure([0.5], [1.0])
    up = dim.mixture_sweep(msr.uniform(), pp, [1, 4], 2.0, grid)
    low = dim.mixture_sweep(msr.uniform(), pp, [1, 4], 0.5, grid)
    assert all(e.upper_est < 0.05 for e in up)
    assert all(e.lower_est > 0.95 for e in low)
    with pytest.raises(InvalidArgumentError):
        dim.mixture_sweep(msr.uniform(), pp, [0], 2.0, grid)


def test_estimates_independent_of_thread_count(monkeypatch):
    m = msr.power_law(0.25)
    grid = dim.EpsilonGrid(0.25, 12)
    monkeypatch.setenv("SPECDIM_THREADS", "1")
    a = dim.estimate_dimensions(m, 2.0, grid).series.values
    monkeypatch.setenv("SPECDIM_THREADS", "4")
    b = dim.estimate_dimensions(m, 2.0, grid).series.values
    np.testing.assert_array_equal(a, b)
