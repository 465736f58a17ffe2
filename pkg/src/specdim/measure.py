"""Finite nonnegative Borel measures on the real line.

Three concrete kinds are supported, all immutable after construction:

* :class:`AtomicMeasure` -- finitely many weighted point masses;
* :class:`DensityMeasure` -- an absolutely continuous measure on ``[a, b]``
  given through a closed-form CDF and quantile function;
* :class:`MixtureMeasure` -- a positive linear combination of the above.

Balls are closed: ``B(x, eps) = [x - eps, x + eps]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InvalidArgumentError, NumericError

DEFAULT_NODES = 2048
DEFAULT_CANTOR_LEVEL = 16


def _check_finite(**values):
    for name, v in values.items():
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(f"{name} must be finite, got {v!r}")


def _check_eps(eps):
    _check_finite(eps=eps)
    if np.any(np.asarray(eps) <= 0):
        raise InvalidArgumentError(f"eps must be positive, got {eps!r}")


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


@lru_cache(maxsize=32)
def gauss_legendre_unit(n):
    """Gauss-Legendre nodes and weights on ``[0, 1]`` (cached, read-only)."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite sum of weighted Dirac masses.

    Parameters
    ----------
    atoms : array_like
        Strictly increasing atom positions.
    weights : array_like
        Positive weights, one per atom.
    """

    atoms: np.ndarray
    weights: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if atoms.size == 0:
            raise InvalidArgumentError("an atomic measure needs at least one atom")
        if atoms.shape != weights.shape:
            raise InvalidArgumentError("atoms and weights must have the same length")
        _check_finite(atoms=atoms, weights=weights)
        if np.any(weights <= 0):
            raise InvalidArgumentError("atom weights must be positive")
        if np.any(np.diff(atoms) <= 0):
            raise InvalidArgumentError("atom positions must be strictly increasing")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        cum = np.concatenate(([0.0], np.cumsum(weights)))
        cum.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_points(cls, atoms, weights, min_weight=0.0):
        """Build from unsorted points; coincident atoms are merged and weights
        ``<= min_weight`` dropped."""
        atoms = np.asarray(atoms, dtype=float).reshape(-1)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        keep = weights > min_weight
        atoms, weights = atoms[keep], weights[keep]
        uniq, inv = np.unique(atoms, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, weights)
        return cls(uniq, merged)

    @property
    def total(self):
        return float(self._cum[-1])

    @property
    def size(self):
        return int(self.atoms.size)

    def min_gap(self):
        """Smallest distance between consecutive atoms (``inf`` for one atom)."""
        if self.atoms.size < 2:
            return math.inf
        return float(np.min(np.diff(self.atoms)))

    def normalized(self):
        return type(self)(self.atoms, self.weights / self.total)

    def _range_sum(self, lo, hi):
        # prefix-sum differences, but single atoms return their weight bit-exactly
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        out = self._cum[hi] - self._cum[lo]
        single = hi - lo == 1
        if np.any(single):
            out = np.where(single, self.weights[np.minimum(lo, self.atoms.size - 1)], out)
        return np.where(hi > lo, out, 0.0)

    def ball_mass(self, x, eps):
        _check_finite(x=x)
        _check_eps(eps)
        xa = np.asarray(x, dtype=float)
        lo = np.searchsorted(self.atoms, xa - eps, side="left")
        hi = np.searchsorted(self.atoms, xa + eps, side="right")
        return _scalar_or_array(x, self._range_sum(lo, hi))

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        hi = np.searchsorted(self.atoms, xa, side="right")
        return _scalar_or_array(x, self._cum[hi])

    def cdf_left(self, x):
        xa = np.asarray(x, dtype=float)
        lo = np.searchsorted(self.atoms, xa, side="left")
        return _scalar_or_array(x, self._cum[lo])

    def quantile(self, u):
        ua = np.asarray(u, dtype=float)
        _check_quantile_arg(ua, self.total)
        idx = np.searchsorted(self._cum[1:], ua, side="left")
        idx = np.minimum(idx, self.atoms.size - 1)
        return _scalar_or_array(u, self.atoms[idx])

    def support_interval(self):
        return float(self.atoms[0]), float(self.atoms[-1])

    def integrate(self, g, nodes=None):
        vals = np.asarray(g(self.atoms), dtype=float)
        vals = np.broadcast_to(vals, self.atoms.shape)
        _raise_nonfinite(vals, self.atoms)
        return float(np.dot(self.weights, vals))

    def breakpoints(self):
        return self.atoms

    def to_spec(self):
        return {
            "type": "atomic",
            "atoms": self.atoms.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """Absolutely continuous measure on ``[a, b]`` with closed-form CDF.

    ``cdf`` and ``quantile`` must be vectorised numpy callables; ``cdf`` is
    only ever evaluated inside ``[a, b]``. An optional ``ball`` callable
    returning ``mu([x - eps, x + eps])`` may be supplied where a
    cancellation-free formula exists. ``singular_points`` lists interior or
    end points where the density is unbounded; quadrature refines there.
    """

    a: float
    b: float
    cdf_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    quantile_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    total: float
    singular_points: tuple = ()
    ball: Callable | None = field(default=None, repr=False)
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_finite(a=self.a, b=self.b, total=self.total)
        if not self.b > self.a:
            raise InvalidArgumentError("density support must satisfy a < b")
        if not self.total > 0:
            raise InvalidArgumentError("total mass must be positive")

    def _F(self, x):
        return self.cdf_fn(np.clip(x, self.a, self.b))

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa >= self.b, self.total, np.where(xa <= self.a, 0.0, self._F(xa)))
        return _scalar_or_array(x, out)

    cdf_left = cdf

    def ball_mass(self, x, eps):
        _check_finite(x=x)
        _check_eps(eps)
        xa = np.asarray(x, dtype=float)
        out = self._F(xa + eps) - self._F(xa - eps)
        if self.ball is not None:
            out = self.ball(xa, eps, out)
        return _scalar_or_array(x, np.maximum(out, 0.0))

    def quantile(self, u):
        ua = np.asarray(u, dtype=float)
        _check_quantile_arg(ua, self.total)
        out = np.clip(self.quantile_fn(ua), self.a, self.b)
        return _scalar_or_array(u, out)

    def support_interval(self):
        return float(self.a), float(self.b)

    def integrate(self, g, nodes=DEFAULT_NODES):
        u, w = gauss_legendre_unit(nodes)
        x = self.quantile(u * self.total)
        vals = np.asarray(g(x), dtype=float)
        _raise_nonfinite(vals, x)
        return float(self.total * np.dot(w, vals))

    def breakpoints(self):
        return np.array(sorted({self.a, self.b, *self.singular_points}), dtype=float)

    def to_spec(self):
        return dict(self.spec)


@dataclass(frozen=True, eq=False)
class MixtureMeasure:
    """Positive combination ``sum_i c_i * mu_i`` of other measures."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(c), m) for c, m in self.components)
        if not comps:
            raise InvalidArgumentError("a mixture needs at least one component")
        for c, m in comps:
            if not (math.isfinite(c) and c > 0):
                raise InvalidArgumentError("mixture coefficients must be positive")
            if not isinstance(m, (AtomicMeasure, DensityMeasure, MixtureMeasure)):
                raise InvalidArgumentError(f"not a measure: {m!r}")
        object.__setattr__(self, "components", comps)

    @property
    def total(self):
        return float(sum(c * m.total for c, m in self.components))

    def _combine(self, method, *args):
        acc = None
        for c, m in self.components:
            term = c * np.asarray(getattr(m, method)(*args), dtype=float)
            acc = term if acc is None else acc + term
        return acc

    def ball_mass(self, x, eps):
        return _scalar_or_array(x, self._combine("ball_mass", x, eps))

    def cdf(self, x):
        return _scalar_or_array(x, self._combine("cdf", x))

    def cdf_left(self, x):
        return _scalar_or_array(x, self._combine("cdf_left", x))

    def quantile(self, u):
        ua = np.asarray(u, dtype=float)
        total = self.total
        _check_quantile_arg(ua, total)
        a, b = self.support_interval()
        lo = np.full(ua.shape, a, dtype=float)
        hi = np.full(ua.shape, b, dtype=float)
        # invariant: cdf(hi) >= u; shrink until hi - lo is at float resolution
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            up = self.cdf(mid) >= ua
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
            if np.all(hi - lo <= 4 * np.spacing(np.maximum(abs(lo), abs(hi)))):
                break
        hi = np.where(self.cdf(lo) >= ua, lo, hi)
        # snap onto an atom in (lo, hi] so ties resolve exactly
        atoms = self._atoms()
        if atoms.size:
            j = np.searchsorted(atoms, hi, side="right") - 1
            j = np.clip(j, 0, atoms.size - 1)
            cand = atoms[j]
            snap = (cand > lo) & (cand <= hi)
            hi = np.where(snap, cand, hi)
        return _scalar_or_array(u, hi)

    def _atoms(self):
        pts = [m.atoms for _, m in self.components if isinstance(m, AtomicMeasure)]
        pts += [m._atoms() for _, m in self.components if isinstance(m, MixtureMeasure)]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    def support_interval(self):
        bounds = [m.support_interval() for _, m in self.components]
        return min(lo for lo, _ in bounds), max(hi for _, hi in bounds)

    def integrate(self, g, nodes=DEFAULT_NODES):
        return float(sum(c * m.integrate(g, nodes) for c, m in self.components))

    def breakpoints(self):
        return np.unique(np.concatenate([m.breakpoints() for _, m in self.components]))

    def to_spec(self):
        return {
            "type": "mixture",
            "components": [{"coef": c, "measure": m.to_spec()} for c, m in self.components],
        }


Measure = Union[AtomicMeasure, DensityMeasure, MixtureMeasure]


def _check_quantile_arg(u, total):
    _check_finite(u=u)
    tol = 1e-12 * total
    if np.any(u < -tol) or np.any(u > total + tol):
        raise InvalidArgumentError(f"quantile argument must lie in [0, {total}]")


def _raise_nonfinite(vals, x):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = float(np.asarray(x).reshape(-1)[np.argmax(bad.reshape(-1))])
        raise NumericError(f"integrand is not finite at x = {where!r}")


# -- constructors -------------------------------------------------------------

def uniform(a=0.0, b=1.0, density=1.0):
    """Lebesgue measure (times ``density``) restricted to ``[a, b]``."""
    a, b, density = float(a), float(b), float(density)
    if not density > 0:
        raise InvalidArgumentError("density must be positive")

    def cdf(x):
        return density * (x - a)

    def quantile(u):
        return a + u / density

    def ball(x, eps, _raw):
        return density * (np.minimum(x + eps, b) - np.maximum(x - eps, a))

    return DensityMeasure(
        a, b, cdf, quantile, density * (b - a), ball=ball,
        spec={"type": "uniform", "a": a, "b": b},
    )


def power_law(theta):
    """Density ``x**-(theta + 1/2) / 2`` on ``[0, 1]``; requires ``theta < 1/2``.

    The CDF is ``x**c / (2c)`` with ``c = 1/2 - theta`` and the local
    scaling exponent at the origin is ``c``.
    """
    theta = float(theta)
    _check_finite(theta=theta)
    c = 0.5 - theta
    if not c > 0:
        raise InvalidArgumentError("power_law requires theta < 1/2 (integrable density)")
    scale = 1.0 / (2.0 * c)

    def cdf(x):
        return scale * np.power(x, c)

    def quantile(u):
        return np.power(np.asarray(u) / scale, 1.0 / c)

    def ball(x, eps, raw):
        # interior balls: F(x)*[(1+r)^c - (1-r)^c] without cancellation
        with np.errstate(divide="ignore", invalid="ignore"):
            r = eps / x
            inner = scale * np.power(x, c) * (
                np.expm1(c * np.log1p(r)) - np.expm1(c * np.log1p(-r))
            )
        ok = (x - eps > 0) & (x + eps < 1)
        return np.where(ok, inner, raw)

    return DensityMeasure(
        0.0, 1.0, cdf, quantile, scale, singular_points=(0.0,), ball=ball,
        spec={"type": "power_law", "theta": theta},
    )


def cantor(level=DEFAULT_CANTOR_LEVEL):
    """Level-``level`` approximation of the middle-thirds Cantor measure.

    ``2**level`` atoms of weight ``2**-level`` at the left endpoints of the
    level-``level`` triadic intervals.
    """
    level = int(level)
    if level < 0 or level > 24:
        raise InvalidArgumentError("cantor level must be in 0..24")
    pos = np.zeros(1)
    for _ in range(level):
        pos = np.concatenate((pos / 3.0, pos / 3.0 + 2.0 / 3.0))
    return AtomicMeasure(pos, np.full(pos.size, 0.5 ** level))


def mixture(components: Sequence[tuple]):
    return MixtureMeasure(tuple(components))


def from_spec(spec):
    """Build a measure from its JSON description (see README for the schema)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidArgumentError("measure spec must be an object with a 'type' key")
    kind = spec["type"]
    try:
        if kind == "atomic":
            return AtomicMeasure.from_points(spec["atoms"], spec["weights"])
        if kind == "power_law":
            return power_law(spec["theta"])
        if kind == "uniform":
            return uniform(spec.get("a", 0.0), spec.get("b", 1.0))
        if kind == "cantor":
            return cantor(spec.get("level", DEFAULT_CANTOR_LEVEL))
        if kind == "mixture":
            return mixture([(c["coef"], from_spec(c["measure"])) for c in spec["components"]])
    except (KeyError, TypeError) as exc:
        raise InvalidArgumentError(f"malformed {kind!r} measure spec: {exc}") from exc
    raise InvalidArgumentError(f"unknown measure type {kind!r}")


# -- functional interface -------------------------------------------------------

def ball_mass(m: Measure, x, eps):
    """``mu([x - eps, x + eps])``."""
    return m.ball_mass(x, eps)


def cdf(m: Measure, x):
    return m.cdf(x)


def cdf_left(m: Measure, x):
    """Left limit ``mu((-inf, x))``."""
    return m.cdf_left(x)


def quantile(m: Measure, u):
    return m.quantile(u)


def integrate_mu(m: Measure, g, nodes=DEFAULT_NODES):
    """``int g dmu``.

    Atomic parts are summed exactly; continuous parts use ``nodes``-point
    Gauss-Legendre quadrature in quantile coordinates.
    """
    if int(nodes) < 1:
        raise InvalidArgumentError("nodes must be a positive integer")
    return m.integrate(g, int(nodes))


def support_interval(m: Measure):
    return m.support_interval()


def atomic_discretization(m: Measure, n_atoms):
    """Equal-weight atoms at the stratified quantiles ``(i + 1/2) / n``."""
    u = (np.arange(n_atoms) + 0.5) / n_atoms * m.total
    x = np.asarray(m.quantile(u))
    return AtomicMeasure.from_points(x, np.full(x.size, m.total / n_atoms))
