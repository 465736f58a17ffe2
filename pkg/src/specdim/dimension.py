"""Finite-scale estimates of generalized fractal dimensions.

The lower and upper dimensions are limits inferior/superior as ``eps -> 0``
of ``ln I(q, eps) / ((q - 1) ln eps)``. They are approximated here by the
minimum and maximum of two-point local log-log slopes over a window of a
geometric grid of scales, together with a least-squares slope over the same
window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._parallel import pmap
from .errors import InvalidArgumentError, NumericError
from .measure import (
    DEFAULT_NODES,
    AtomicMeasure,
    DensityMeasure,
    Measure,
    MixtureMeasure,
    gauss_legendre_unit,
    mixture,
)

BALL_FLOOR = 1e-300
KINDS = ("correlation", "mean")


def _check_q(q):
    if not (math.isfinite(q) and q > 0):
        raise InvalidArgumentError(f"q must be positive, got {q!r}")
    if q == 1:
        raise InvalidArgumentError("q = 1 is not supported")


@dataclass(frozen=True)
class EpsilonGrid:
    """Scales ``eps_i = eps_max * ratio**i`` for ``i = 0..levels``."""

    eps_max: float = 0.25
    levels: int = 24
    ratio: float = 0.5

    def __post_init__(self):
        if not (math.isfinite(self.eps_max) and self.eps_max > 0):
            raise InvalidArgumentError("eps_max must be positive")
        if int(self.levels) != self.levels or self.levels < 4:
            raise InvalidArgumentError("levels must be an integer >= 4")
        if not 0 < self.ratio < 1:
            raise InvalidArgumentError("ratio must lie in (0, 1)")

    @property
    def eps(self):
        return self.eps_max * self.ratio ** np.arange(self.levels + 1)

    def default_window(self):
        """Drop the coarsest 25% and the finest 12.5% of the levels."""
        return (int(self.levels * 0.25), self.levels - int(self.levels * 0.125))

    def check_window(self, window):
        if window is None:
            window = self.default_window()
        lo, hi = (int(w) for w in window)
        if not 0 <= lo < hi <= self.levels:
            raise InvalidArgumentError(f"window {window!r} outside grid 0..{self.levels}")
        if hi - lo < 4:
            raise InvalidArgumentError("window must contain at least 4 slopes")
        return lo, hi

    def floor(self, window=None):
        return float(self.eps[self.check_window(window)[1]])


@dataclass
class SlopeSeries:
    q: float
    kind: str
    eps: np.ndarray
    values: np.ndarray
    local_slopes: np.ndarray
    endpoint_slopes: np.ndarray


@dataclass
class DimensionEstimate:
    q: float
    kind: str
    lower_est: float
    upper_est: float
    regression_est: float
    window: tuple
    series: SlopeSeries
    flags: list = field(default_factory=list)

    @property
    def lower_clipped(self):
        return min(max(self.lower_est, 0.0), 1.0)

    @property
    def upper_clipped(self):
        return min(max(self.upper_est, 0.0), 1.0)

    @property
    def regression_clipped(self):
        return min(max(self.regression_est, 0.0), 1.0)

    def summary(self):
        return {
            "q": self.q,
            "kind": self.kind,
            "lower_est": self.lower_est,
            "upper_est": self.upper_est,
            "regression_est": self.regression_est,
            "lower_clipped": self.lower_clipped,
            "upper_clipped": self.upper_clipped,
            "regression_clipped": self.regression_clipped,
            "window": list(self.window),
            "eps_window": [float(self.series.eps[self.window[0]]),
                           float(self.series.eps[self.window[1]])],
            "flags": list(self.flags),
        }

    def rows(self):
        """Long-format rows ``(q, kind, eps, I, local_slope, endpoint_slope)``.

        The local slope on row ``i`` is the slope between levels ``i`` and
        ``i + 1``; it is empty on the last row.
        """
        s = self.series
        out = []
        for i, e in enumerate(s.eps):
            local = s.local_slopes[i] if i < len(s.local_slopes) else ""
            out.append((self.q, self.kind, float(e), float(s.values[i]), local,
                        float(s.endpoint_slopes[i])))
        return out


# -- integrals ----------------------------------------------------------------

def correlation_integral(m: Measure, q, eps, nodes=DEFAULT_NODES):
    """``int mu(B(x, eps))**(q - 1) dmu(x)``."""
    _check_q(q)
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidArgumentError("eps must be positive")
    if isinstance(m, AtomicMeasure):
        # exact sum over atoms; each ball contains at least its own atom
        bm = m.ball_mass(m.atoms, eps)
        return float(np.dot(m.weights, bm ** (q - 1)))

    flagged = []

    def g(x):
        bm = np.asarray(m.ball_mass(x, eps), dtype=float)
        if q < 1:
            low = bm < BALL_FLOOR
            if np.any(low):
                flagged.append(float(np.asarray(x)[np.argmax(low)]))
                bm = np.maximum(bm, BALL_FLOOR)
        return bm ** (q - 1)

    value = _integrate_refined(m, g, eps, nodes)
    if not (math.isfinite(value) and value > 0):
        where = f" near x = {flagged[0]!r}" if flagged else ""
        raise NumericError(f"correlation integral is {value!r} at eps = {eps!r}{where}")
    return value


def _integrate_refined(m, g, eps, nodes):
    """Quantile-space quadrature, split where the integrand has kinks."""
    if isinstance(m, AtomicMeasure):
        return m.integrate(g)
    if isinstance(m, MixtureMeasure):
        return float(sum(c * _integrate_refined(sub, g, eps, nodes) for c, sub in m.components))
    # ball masses are non-smooth where x +- eps hits a breakpoint of the measure
    bp = m.breakpoints()
    cuts = np.concatenate((bp - eps, bp + eps))
    cuts = cuts[(cuts > m.a) & (cuts < m.b)]
    u_cuts = np.unique(np.concatenate(([0.0, m.total], m.cdf(cuts))))
    return _graded_quadrature(lambda u: g(m.quantile(u)), u_cuts, nodes)


def _graded_quadrature(f, cuts, nodes, order=16):
    """Composite Gauss-Legendre on ``[cuts[0], cuts[-1]]``.

    Each piece between consecutive cuts is split geometrically towards both
    ends so end-point singularities and steep boundary layers are resolved.
    """
    xg, wg = gauss_legendre_unit(order)
    panels = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        h = hi - lo
        if h <= 0:
            continue
        depth = max(1, min(48, int(nodes) // (2 * order)))
        fr = 0.5 ** np.arange(depth, 0, -1)
        left = np.concatenate(([0.0], fr))          # 0, 2^-depth, ..., 1/2
        edges = np.concatenate((lo + h * left, (hi - h * left)[::-1][1:]))
        panels.append(edges)
    if not panels:
        return 0.0
    a = np.concatenate([e[:-1] for e in panels])
    b = np.concatenate([e[1:] for e in panels])
    width = b - a
    x = a[:, None] + width[:, None] * xg[None, :]
    vals = np.asarray(f(x.reshape(-1)), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(vals)):
        bad = np.argmax(~np.isfinite(vals.reshape(-1)))
        raise NumericError(f"integrand not finite at quantile coordinate {x.reshape(-1)[bad]!r}")
    return float(np.sum((vals @ wg) * width))


def mean_integral(m: Measure, q, eps, nodes=DEFAULT_NODES):
    """``eps**-1 * int mu(B(x, eps))**q dx`` over the eps-enlarged support."""
    _check_q(q)
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidArgumentError("eps must be positive")
    a, b = m.support_interval()
    bp = np.asarray(m.breakpoints(), dtype=float)
    cuts = np.unique(np.concatenate((bp - eps, bp + eps, [a - eps, b + eps])))
    if isinstance(m, AtomicMeasure):
        # ball mass is constant between consecutive cuts
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        bm = m.ball_mass(mid, eps)
        value = float(np.dot(np.diff(cuts), bm ** q)) / eps
    else:
        value = _graded_quadrature(lambda x: np.asarray(m.ball_mass(x, eps)) ** q, cuts, nodes) / eps
    if not (math.isfinite(value) and value > 0):
        raise NumericError(f"mean integral is {value!r} at eps = {eps!r}")
    return value


# -- estimators ---------------------------------------------------------------

def _slopes(log_eps, log_vals, scale):
    return np.diff(log_vals) / (scale * np.diff(log_eps))


def slope_summary(log_eps, log_vals, scale, window):
    """Min/max local slope and regression slope over ``window`` (inclusive)."""
    lo, hi = window
    le = log_eps[lo:hi + 1]
    lv = log_vals[lo:hi + 1]
    local = _slopes(le, lv, scale)
    reg = np.polyfit(scale * le, lv, 1)[0] if np.ptp(lv) > 0 else 0.0
    return float(np.min(local)), float(np.max(local)), float(reg)


def estimate_dimensions(m: Measure, q, grid: EpsilonGrid | None = None, kind="correlation",
                        window=None, nodes=DEFAULT_NODES):
    """Lower, upper and regression estimates of the ``q``-dimension of ``m``."""
    _check_q(q)
    grid = grid or EpsilonGrid()
    if kind not in KINDS:
        raise InvalidArgumentError(f"kind must be one of {KINDS}")
    window = grid.check_window(window)
    eps = grid.eps
    integral = correlation_integral if kind == "correlation" else mean_integral

    def level(i):
        try:
            return integral(m, q, float(eps[i]), nodes)
        except NumericError as exc:
            raise NumericError(f"level {i} (eps = {eps[i]!r}): {exc}") from exc

    values = np.array(pmap(level, range(len(eps))))
    log_eps = np.log(eps)
    log_vals = np.log(values)
    local = _slopes(log_eps, log_vals, q - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        endpoint = np.where(log_eps != 0.0, log_vals / ((q - 1) * log_eps), np.nan)
    lower, upper, reg = (v + 0.0 for v in slope_summary(log_eps, log_vals, q - 1, window))
    series = SlopeSeries(q, kind, eps, values, local, endpoint)
    est = DimensionEstimate(q, kind, lower, upper, reg, window, series)
    if not -0.1 <= reg <= 1.1:
        est.flags.append("regression estimate outside [-0.1, 1.1]")
    return est


def pointwise_exponent(m: Measure, x, grid: EpsilonGrid | None = None, window=None):
    """Minimum local slope of ``ln mu(B(x, eps))`` against ``ln eps``.

    Returns ``inf`` when some ball in the grid has zero mass.
    """
    grid = grid or EpsilonGrid()
    window = grid.check_window(window)
    return float(_pointwise(m, np.atleast_1d(np.asarray(x, dtype=float)), grid, window)[0])


def _pointwise(m, xs, grid, window):
    lo, hi = window
    eps = grid.eps[lo:hi + 1]
    bm = np.stack([np.asarray(m.ball_mass(xs, e), dtype=float) for e in eps])
    out = np.full(xs.shape, np.inf)
    pos = np.all(bm > 0, axis=0)
    if np.any(pos):
        slopes = np.diff(np.log(bm[:, pos]), axis=0) / np.diff(np.log(eps))[:, None]
        out[pos] = np.min(slopes, axis=0)
    return out


def hausdorff_upper(m: Measure, n_samples=1000, grid: EpsilonGrid | None = None,
                    quantile_level=0.99, window=None):
    """Estimate of the mu-essential supremum of the pointwise lower exponent.

    Points are drawn at the stratified quantiles ``(i + 1/2) / n_samples``.
    """
    if n_samples < 100:
        raise InvalidArgumentError("n_samples must be at least 100")
    if not 0 < quantile_level <= 1:
        raise InvalidArgumentError("quantile_level must lie in (0, 1]")
    grid = grid or EpsilonGrid()
    window = grid.check_window(window)
    u = (np.arange(n_samples) + 0.5) / n_samples * m.total
    xs = np.asarray(m.quantile(u), dtype=float)
    d = _pointwise(m, xs, grid, window)
    return float(np.quantile(d, quantile_level, method="inverted_cdf"))


SPECTRAL_TYPES = ("point-component", "ac-component", "singular-continuous-compatible",
                  "inconclusive")


def classify_spectral_type(lower_q: DimensionEstimate, upper_s: DimensionEstimate, tau=0.1):
    """Finite-scale heuristic for the spectral type behind a measure.

    An atom forces the upper ``s``-dimension (``s > 1``) to zero and an
    absolutely continuous part forces the lower ``q``-dimension (``q < 1``)
    to one; a measure showing neither is compatible with singular
    continuity. This is a diagnostic, not a proof.
    """
    if not lower_q.q < 1 < upper_s.q:
        raise InvalidArgumentError("need lower_q.q < 1 < upper_s.q")
    if not 0 < tau < 0.5:
        raise InvalidArgumentError("tau must lie in (0, 1/2)")
    if lower_q.lower_est < 1 - tau and upper_s.upper_est > tau:
        return "singular-continuous-compatible"
    if upper_s.upper_est <= tau:
        return "point-component"
    if lower_q.lower_est >= 1 - tau:
        return "ac-component"
    return "inconclusive"


def mixture_sweep(ac: Measure, pp: AtomicMeasure, k_values: Sequence[int], q,
                  grid: EpsilonGrid | None = None, window=None, kind="correlation",
                  nodes=DEFAULT_NODES):
    """Dimension estimates of ``ac + pp / k**2`` for each ``k``."""
    if not isinstance(pp, AtomicMeasure):
        raise InvalidArgumentError("pp must be an AtomicMeasure")
    if not k_values:
        raise InvalidArgumentError("k_values must be nonempty")
    out = []
    for k in k_values:
        if int(k) != k or k < 1:
            raise InvalidArgumentError(f"k must be a positive integer, got {k!r}")
        mk = mixture([(1.0, ac), (1.0 / k ** 2, pp)])
        out.append(estimate_dimensions(mk, q, grid, kind, window, nodes))
    return out
