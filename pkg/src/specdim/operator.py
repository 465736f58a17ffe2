"""Finite Jacobi operators, their eigendecompositions and spectral measures.

Lattice operators on l2(Z) are truncated to ``N`` consecutive sites with
Dirichlet ends. Site ``n`` lives at array index ``n + offset``, where the
window is centred so that sites 0 and 1 are interior for ``N >= 4``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError
from .measure import AtomicMeasure, DensityMeasure, power_law

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

MAX_QL_ITERATIONS = 60
WEIGHT_CUTOFF = 1e-14


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    """Real symmetric tridiagonal matrix with positive off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray
    offset: int = 0

    def __post_init__(self):
        d = np.array(self.diag, dtype=float).reshape(-1)
        e = np.array(self.offdiag, dtype=float).reshape(-1)
        if d.size < 1:
            raise InvalidArgumentError("a Jacobi matrix needs N >= 1")
        if e.size != d.size - 1:
            raise InvalidArgumentError("offdiag must have N - 1 entries")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise InvalidArgumentError("matrix entries must be finite")
        if np.any(e <= 0):
            raise InvalidArgumentError("off-diagonal entries must be positive")
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def N(self):
        return int(self.diag.size)

    def index_of(self, site):
        idx = int(site) + self.offset
        if not 0 <= idx < self.N:
            raise InvalidArgumentError(f"site {site} lies outside the truncation")
        return idx

    @property
    def sites(self):
        return np.arange(self.N) - self.offset

    def norm_bound(self):
        """Gershgorin bound on the operator norm."""
        e = np.concatenate(([0.0], self.offdiag, [0.0]))
        return float(np.max(np.abs(self.diag) + e[:-1] + e[1:]))

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        out = np.array(out)
        out[:-1] += self.offdiag.reshape((-1,) + (1,) * (v.ndim - 1)) * v[1:]
        out[1:] += self.offdiag.reshape((-1,) + (1,) * (v.ndim - 1)) * v[:-1]
        return out

    def dense(self):
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def digest(self):
        h = hashlib.sha256()
        h.update(self.diag.tobytes())
        h.update(self.offdiag.tobytes())
        h.update(str(self.offset).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    def residual(self, J: JacobiMatrix):
        """``max_j ||J v_j - lambda_j v_j||``."""
        r = J.matvec(self.eigenvectors) - self.eigenvectors * self.eigenvalues[None, :]
        return float(np.max(np.linalg.norm(r, axis=0)))

    def gram_error(self):
        V = self.eigenvectors
        return float(np.max(np.abs(V.T @ V - np.eye(V.shape[1]))))

    def min_gap(self):
        if self.eigenvalues.size < 2:
            return math.inf
        return float(np.min(np.diff(self.eigenvalues)))

    def level_spacing(self):
        """Mean eigenvalue gap; sets the smallest meaningful scale."""
        ev = self.eigenvalues
        if ev.size < 2:
            return 0.0
        return float((ev[-1] - ev[0]) / (ev.size - 1))


@njit(cache=True, fastmath=True)
def _rotate_rows(a, b, c, s):
    for k in range(a.shape[0]):
        f = b[k]
        b[k] = s * a[k] + c * f
        a[k] = c * a[k] - s * f


@njit(cache=True)
def _tql_implicit(d, e, zt, max_iter):
    # Implicit QL with Wilkinson-type shifts. e[i] couples i and i + 1 and
    # e[n - 1] == 0. Rows of zt accumulate the rotations (zt = V^T).
    n = d.shape[0]
    eps = 2.220446049250313e-16
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                _rotate_rows(zt[i], zt[i + 1], c, s)
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def eigendecompose(J: JacobiMatrix, max_iter=MAX_QL_ITERATIONS):
    """Full eigendecomposition by implicit-shift QL; eigenvalues ascending."""
    n = J.N
    d = J.diag.copy()
    e = np.zeros(n)
    e[: n - 1] = J.offdiag
    zt = np.eye(n)
    failed = _tql_implicit(d, e, zt, int(max_iter))
    if failed >= 0:
        raise ConvergenceError(int(failed), int(max_iter))
    order = np.argsort(d, kind="stable")
    V = np.ascontiguousarray(zt[order].T)
    # fix the sign so the largest-magnitude component of each vector is positive
    piv = np.argmax(np.abs(V), axis=0)
    V *= np.sign(V[piv, np.arange(n)])[None, :]
    lam = d[order]
    lam.setflags(write=False)
    V.setflags(write=False)
    return EigenDecomposition(lam, V)


@dataclass(frozen=True, eq=False)
class SpectralMeasure(AtomicMeasure):
    """Atomic spectral measure of a finite Jacobi matrix and a vector."""

    operator_hash: str = ""
    label: str = ""

    def normalized(self):
        return SpectralMeasure(self.atoms, self.weights / self.total,
                               self.operator_hash, self.label)


def _as_vector(J, psi):
    v = np.asarray(psi, dtype=float).reshape(-1)
    if v.size != J.N:
        raise InvalidArgumentError(f"vector has length {v.size}, expected {J.N}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("vector entries must be finite")
    if not np.any(v != 0):
        raise InvalidArgumentError("the zero vector has no spectral measure")
    return v


def delta(J: JacobiMatrix, site=1):
    v = np.zeros(J.N)
    v[J.index_of(site)] = 1.0
    return v


def spectral_measure(J: JacobiMatrix, psi, decomposition: EigenDecomposition | None = None,
                     label=""):
    """Atoms at the eigenvalues with weights ``<v_j, psi>**2``.

    Weights below ``1e-14 * ||psi||**2`` are dropped and the rest rescaled so
    the total equals ``||psi||**2``.
    """
    v = _as_vector(J, psi)
    ed = decomposition or eigendecompose(J)
    norm2 = float(np.dot(v, v))
    w = (ed.eigenvectors.T @ v) ** 2
    keep = w >= WEIGHT_CUTOFF * norm2
    w = w[keep]
    w *= norm2 / np.sum(w)
    return SpectralMeasure(ed.eigenvalues[keep], w, J.digest(), label)


def _centred_offset(N):
    return (N - 1) // 2


def free_jacobi(N):
    """Discrete Laplacian: zero diagonal, unit off-diagonal."""
    N = int(N)
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    return JacobiMatrix(np.zeros(N), np.ones(N - 1), _centred_offset(N))


def rank_one_perturb(J: JacobiMatrix, lam, site):
    """Add ``lam`` to the diagonal entry at array index ``site``."""
    site = int(site)
    if not 0 <= site < J.N:
        raise InvalidArgumentError(f"index {site} out of range for N = {J.N}")
    d = J.diag.copy()
    d[site] += float(lam)
    return JacobiMatrix(d, J.offdiag, J.offset)


def almost_mathieu(N, lam=0.0, alpha=(math.sqrt(5) - 1) / 2, theta=0.0, kappa=3.0,
                   perturbation_site=1):
    """Truncated ``u_{n+1} + u_{n-1} + kappa cos(pi alpha n + theta) u_n``
    plus the rank-one term ``lam <., delta_1> delta_1``."""
    N = int(N)
    if N < 2:
        raise InvalidArgumentError("almost_mathieu requires N >= 2")
    off = _centred_offset(N)
    n = np.arange(N) - off
    J = JacobiMatrix(kappa * np.cos(math.pi * alpha * n + theta), np.ones(N - 1), off)
    return rank_one_perturb(J, lam, J.index_of(perturbation_site))


def quasiperiodic(N, coupling, alpha, theta, v):
    """Truncated ``u_{n+1} + u_{n-1} + coupling * v(theta + alpha n) u_n``.

    ``v`` is a vectorised 1-periodic real function; constant ``v`` is rejected.
    """
    N = int(N)
    if N < 2:
        raise InvalidArgumentError("quasiperiodic requires N >= 2")
    probe = np.asarray(v(np.linspace(0.0, 1.0, 257)[:-1]), dtype=float)
    if np.ptp(probe) <= 1e-12 * max(1.0, np.max(np.abs(probe))):
        raise InvalidArgumentError("the potential function must be nonconstant")
    off = _centred_offset(N)
    n = np.arange(N) - off
    diag = coupling * np.asarray(v(theta + alpha * n), dtype=float)
    return JacobiMatrix(diag, np.ones(N - 1), off)


def free_hamiltonian_measure(n) -> DensityMeasure:
    """Density ``x**-(theta_n + 1/2) / 2`` on ``[0, 1]`` with ``theta_n = 1/2 - 1/(n+2)``."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError("n must be a positive integer")
    return power_law(0.5 - 1.0 / (n + 2))


def spacing_flag(decomposition: EigenDecomposition, eps_floor, factor=10.0):
    """Warning text when ``eps_floor`` is below ``factor`` level spacings, else ``None``."""
    s = decomposition.level_spacing()
    if s > 0 and eps_floor < factor * s:
        return (f"eps floor {eps_floor:.3g} below {factor:g} x mean level spacing "
                f"{s:.3g}; finite-volume atoms dominate there")
    return None


OPERATOR_BUILDERS = ("almost_mathieu", "free_jacobi")


def from_spec(spec):
    """Build a :class:`JacobiMatrix` from its JSON description."""
    if not isinstance(spec, dict) or "builder" not in spec:
        raise InvalidArgumentError("operator spec must be an object with a 'builder' key")
    b = spec["builder"]
    try:
        N = int(spec["N"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"operator spec needs an integer N: {exc}") from exc
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    if b == "free_jacobi":
        return free_jacobi(N)
    if b == "almost_mathieu":
        return almost_mathieu(
            N,
            lam=float(spec.get("lambda", 0.0)),
            alpha=float(spec.get("alpha", (math.sqrt(5) - 1) / 2)),
            theta=float(spec.get("theta", 0.0)),
            kappa=float(spec.get("kappa", 3.0)),
        )
    raise InvalidArgumentError(f"unknown operator builder {b!r}")


def vector_from_spec(J: JacobiMatrix, spec):
    """``{"vector": "delta", "site": n}`` or an explicit list of N reals."""
    if isinstance(spec, dict):
        if spec.get("vector") != "delta":
            raise InvalidArgumentError(f"unknown vector spec {spec!r}")
        return delta(J, spec.get("site", 1))
    return _as_vector(J, spec)
