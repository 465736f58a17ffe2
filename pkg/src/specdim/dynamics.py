"""Time-averaged quantum dynamics from eigendata.

Every time average is evaluated in closed form. For a state with spectral
weights ``w_j`` at energies ``lambda_j``,

    (1/t) int_0^t |<psi, exp(-isT) psi>|^2 ds = sum_jk w_j w_k K(t (lambda_j - lambda_k))

with ``K(x) = sin(x) / x``; the time-averaged position distribution is the
analogous double sum over eigenvector components. No time stepping is done.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .dimension import EpsilonGrid, estimate_dimensions
from .errors import InvalidArgumentError
from .measure import AtomicMeasure
from .operator import (EigenDecomposition, JacobiMatrix, eigendecompose, njit,
                       spectral_measure)

DEFAULT_BLOCK = 512
SLOPE_SPAN = 2.0
MAX_MOMENT_P = 8.0
GUARNERI_TOLERANCE = 0.1


def sinc_kernel(x):
    """``sin(x) / x`` with ``K(0) = 1``."""
    return np.sinc(np.asarray(x) / math.pi)


@dataclass(frozen=True)
class TimeGrid:
    t_min: float = 1.0
    t_max: float = 100.0
    points: int = 64
    spacing: str = "log"

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max and math.isfinite(self.t_max)):
            raise InvalidArgumentError("need 0 < t_min < t_max")
        if int(self.points) != self.points or self.points < 8:
            raise InvalidArgumentError("points must be an integer >= 8")
        if self.spacing != "log":
            raise InvalidArgumentError("only log spacing is supported")

    @property
    def times(self):
        return np.geomspace(self.t_min, self.t_max, int(self.points))

    def window_indices(self, window=None):
        """Indices of the grid times inside ``window = (t_lo, t_hi)``."""
        t = self.times
        if window is None:
            return 0, t.size - 1
        t_lo, t_hi = (float(w) for w in window)
        if t_lo < t[0] * (1 - 1e-12) or t_hi > t[-1] * (1 + 1e-12) or not t_lo < t_hi:
            raise InvalidArgumentError(f"window {window!r} outside [{t[0]}, {t[-1]}]")
        rel = 1e-12
        idx = np.nonzero((t >= t_lo * (1 - rel)) & (t <= t_hi * (1 + rel)))[0]
        if idx.size < 3:
            raise InvalidArgumentError(f"window {window!r} holds fewer than 3 grid times")
        return int(idx[0]), int(idx[-1])


@dataclass
class DynamicsResult:
    """A trajectory on a time grid plus its log-log slope summary.

    For return probabilities the exponents are sign-flipped so they estimate
    the lower and upper correlation dimensions directly.
    """

    quantity: str
    times: np.ndarray
    values: np.ndarray
    lower_exponent: float
    upper_exponent: float
    regression_exponent: float
    window: tuple
    params: dict = field(default_factory=dict)

    @property
    def exponents(self):
        return self.lower_exponent, self.upper_exponent

    def rows(self):
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]

    def summary(self):
        return {
            "quantity": self.quantity,
            "lower_exponent": self.lower_exponent,
            "upper_exponent": self.upper_exponent,
            "regression_exponent": self.regression_exponent,
            "window": [float(self.times[self.window[0]]), float(self.times[self.window[1]])],
            **self.params,
        }


def _check_normalized(total):
    if abs(total - 1.0) > 1e-10:
        raise InvalidArgumentError(f"state must be normalized (total mass {total!r}); "
                                   "call .normalized() first")


@njit(cache=True, nogil=True, fastmath=True)
def _pair_block(lam, w, t, i0, i1):
    # sum_{i0 <= i < i1} w_i (w_i + 2 sum_{j > i} w_j K(t (lam_i - lam_j)));
    # atoms are strictly increasing so the kernel argument is never zero
    acc = 0.0
    n = lam.shape[0]
    for i in range(i0, i1):
        row = 0.0
        li = lam[i]
        for j in range(i + 1, n):
            x = t * (li - lam[j])
            row += w[j] * math.sin(x) / x
        acc += w[i] * (w[i] + 2.0 * row)
    return acc


def return_probability_avg(sm: AtomicMeasure, t, block=DEFAULT_BLOCK):
    """Time-averaged return probability up to time ``t``.

    The O(M^2) pair sum runs in row blocks of size ``block``; block partials
    are reduced in block order so the result does not depend on threading.
    """
    _check_normalized(sm.total)
    if not (math.isfinite(t) and t > 0):
        raise InvalidArgumentError("t must be positive")
    lam = np.ascontiguousarray(sm.atoms)
    w = np.ascontiguousarray(sm.weights)
    b = int(block)
    parts = pmap(lambda i0: _pair_block(lam, w, float(t), i0, min(i0 + b, lam.size)),
                 range(0, lam.size, b))
    return float(math.fsum(parts))


def span_slopes(times, values, window, span=SLOPE_SPAN):
    """Log-log slopes between grid times about a factor ``span`` apart."""
    lo, hi = window
    lt = np.log(times)
    lv = np.log(values)
    j = np.searchsorted(lt, lt[lo:hi + 1] + math.log(span) * (1 - 1e-9))
    i = np.arange(lo, hi + 1)
    ok = j <= hi
    if not np.any(ok):
        raise InvalidArgumentError(f"time window shorter than the slope span {span:g}")
    i, j = i[ok], j[ok]
    return (lv[j] - lv[i]) / (lt[j] - lt[i])


def _exponent_summary(times, values, window, flip, span=SLOPE_SPAN):
    lo, hi = window
    seg = values[lo:hi + 1]
    if np.all(seg == seg[0]):
        span_slopes(times, np.ones_like(values), window, span)  # window validation
        return 0.0, 0.0, 0.0
    if np.any(seg <= 0):
        raise InvalidArgumentError("trajectory must be positive on the window")
    s = span_slopes(times, values, window, span)
    reg = float(np.polyfit(np.log(times[lo:hi + 1]), np.log(seg), 1)[0])
    s_min, s_max = float(np.min(s)), float(np.max(s))
    if flip:
        return -s_max + 0.0, -s_min + 0.0, -reg + 0.0
    return s_min + 0.0, s_max + 0.0, reg + 0.0


def return_dynamics(sm: AtomicMeasure, grid: TimeGrid | None = None, window=None,
                    block=DEFAULT_BLOCK):
    """Return-probability trajectory and decay exponents on ``grid``."""
    grid = grid or TimeGrid()
    idx = grid.window_indices(window)
    times = grid.times
    values = np.array([return_probability_avg(sm, t, block) for t in times])
    lower, upper, reg = _exponent_summary(times, values, idx, flip=True)
    return DynamicsResult("return_probability", times, values, lower, upper, reg, idx)


def return_exponents(sm: AtomicMeasure, grid: TimeGrid | None = None, window=None):
    """``(D-(2) proxy, D+(2) proxy)`` from minus the local slopes of the return probability."""
    return return_dynamics(sm, grid, window).exponents


def _unit_state(psi, N):
    v = np.asarray(psi, dtype=float).reshape(-1)
    if v.size != N:
        raise InvalidArgumentError(f"vector has length {v.size}, expected {N}")
    _check_normalized(float(np.dot(v, v)))
    return v


def time_averaged_distribution(J: JacobiMatrix, psi, times,
                               decomposition: EigenDecomposition | None = None):
    """``A[i, j] = (1/t_i) int_0^{t_i} |<e_j, exp(-isJ) psi>|^2 ds``."""
    v = _unit_state(psi, J.N)
    ed = decomposition or eigendecompose(J)
    V, lam = ed.eigenvectors, ed.eigenvalues
    c = V.T @ v
    diff = lam[:, None] - lam[None, :]
    cc = np.outer(c, c)

    def one(t):
        M = cc * sinc_kernel(t * diff)
        return np.einsum("jk,jk->j", V @ M, V)

    return np.array(pmap(one, np.atleast_1d(np.asarray(times, dtype=float))))


def _moment_from_distribution(A, N, p, j0):
    if not (0 < p <= MAX_MOMENT_P):
        raise InvalidArgumentError(f"p must lie in (0, {MAX_MOMENT_P}]")
    dist = np.abs(np.arange(N) - j0).astype(float) ** p
    return np.maximum(A @ dist, 0.0) ** (1.0 / p)


def _default_center(J, psi, j0):
    if j0 is None:
        return int(np.argmax(np.abs(np.asarray(psi))))
    if not 0 <= int(j0) < J.N:
        raise InvalidArgumentError("j0 outside the lattice")
    return int(j0)


def moment_trajectory(J: JacobiMatrix, psi, p, t, j0=None,
                      decomposition: EigenDecomposition | None = None):
    """Time-averaged ``p``-moment ``r_p(t)`` of the position about index ``j0``.

    ``j0`` defaults to the index where ``|psi|`` is largest.
    """
    if not (math.isfinite(t) and t > 0):
        raise InvalidArgumentError("t must be positive")
    A = time_averaged_distribution(J, psi, [t], decomposition)
    return float(_moment_from_distribution(A, J.N, p, _default_center(J, psi, j0))[0])


def default_time_window(N, grid: TimeGrid):
    """``[2, N/8]`` intersected with the grid (below the Heisenberg time)."""
    t = grid.times
    lo, hi = max(2.0, t[0]), min(N / 8.0, t[-1])
    if hi <= lo:
        return None
    return lo, hi


def moment_dynamics(J: JacobiMatrix, psi, p, grid: TimeGrid | None = None, window=None,
                    j0=None, decomposition: EigenDecomposition | None = None,
                    distribution=None):
    grid = grid or TimeGrid()
    times = grid.times
    if window is None:
        window = default_time_window(J.N, grid)
    idx = grid.window_indices(window)
    if distribution is None:
        distribution = time_averaged_distribution(J, psi, times, decomposition)
    r = _moment_from_distribution(distribution, J.N, p, _default_center(J, psi, j0))
    lower, upper, reg = _exponent_summary(times, r, idx, flip=False)
    return DynamicsResult(f"moment_p{p:g}", times, r, lower, upper, reg, idx, {"p": p})


def moment_exponents(J: JacobiMatrix, psi, p, grid: TimeGrid | None = None, window=None,
                     j0=None):
    """``(beta-, beta+)`` from the min/max local log-log slope of ``r_p``."""
    return moment_dynamics(J, psi, p, grid, window, j0).exponents


def matched_eps_grid(t_lo, t_hi):
    """Dyadic scale grid spanning ``[1/t_hi, 1/t_lo]``."""
    levels = max(4, int(math.ceil(math.log2(t_hi / t_lo))))
    return EpsilonGrid(1.0 / t_lo, levels, 0.5)


def check_guarneri(J: JacobiMatrix, psi, p_list, grid: TimeGrid | None = None,
                   eps_grid: EpsilonGrid | None = None, window=None, eps_window=None,
                   tolerance=GUARNERI_TOLERANCE, j0=None, kind="correlation"):
    """Compare moment growth exponents with ``D(1/(1+p))`` of the spectral measure.

    The lower bound ``beta(p) >= D(1/(1+p))`` is checked separately for the
    lower and upper quantities at finite scales; ``eps`` is matched to
    ``1/t`` unless ``eps_grid`` is given. A violation is reported, never
    raised.
    """
    grid = grid or TimeGrid()
    if window is None:
        window = default_time_window(J.N, grid)
    idx = grid.window_indices(window)
    times = grid.times
    t_lo, t_hi = (float(w) for w in window) if window else (times[idx[0]], times[idx[1]])
    if eps_grid is None:
        eps_grid = matched_eps_grid(t_lo, t_hi)
        eps_window = (0, eps_grid.levels)
    ed = eigendecompose(J)
    v = _unit_state(psi, J.N)
    sm = spectral_measure(J, v, ed)
    dist = time_averaged_distribution(J, v, times, ed)
    entries = []
    for p in p_list:
        mom = moment_dynamics(J, v, p, grid, window, j0, ed, dist)
        q = 1.0 / (1.0 + p)
        dim = estimate_dimensions(sm, q, eps_grid, kind, eps_window)
        slack_minus = mom.lower_exponent - dim.lower_est
        slack_plus = mom.upper_exponent - dim.upper_est
        entries.append({
            "p": p,
            "q": q,
            "beta_minus": mom.lower_exponent,
            "beta_plus": mom.upper_exponent,
            "beta_regression": mom.regression_exponent,
            "D_minus": dim.lower_est,
            "D_plus": dim.upper_est,
            "D_regression": dim.regression_est,
            "slack_minus": slack_minus,
            "slack_plus": slack_plus,
            "violation": bool(min(slack_minus, slack_plus) < -tolerance),
        })
    return {
        "operator_hash": J.digest(),
        "N": J.N,
        "t_window": [t_lo, t_hi],
        "eps_window": [float(eps_grid.eps[dim.window[0]]), float(eps_grid.eps[dim.window[1]])]
        if entries else None,
        "tolerance": tolerance,
        "entries": entries,
        "violations": sum(e["violation"] for e in entries),
    }
