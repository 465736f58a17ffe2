"""Acceptance checks run by ``specdim verify`` and the test suite.

Each ``criterion_*`` function returns a list of :class:`CheckResult`.
``tolerance_scale`` multiplies every tolerance; values other than 1 exist
only to exercise the failure path.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import dimension as dim
from . import dynamics as dyn
from . import measure as msr
from . import operator as op

CANTOR_DIM = math.log(2) / math.log(3)
CANTOR_GRID = dim.EpsilonGrid(1.0, 16, 1.0 / 3.0)
CANTOR_WINDOW = (4, 12)
REFERENCE_GRID = dim.EpsilonGrid(0.25, 24, 0.5)
Q_SWEEP = (0.25, 0.5, 2.0, 3.0, 5.0)


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] C{self.criterion:<2d} {self.name}: {self.detail}"


def _within(value, target, tol):
    return abs(value - target) <= tol


def reference_measures():
    """``(label, measure, grid, window)`` for uniform, power law n=2 and Cantor."""
    return [
        ("uniform", msr.uniform(), REFERENCE_GRID, None),
        ("power_law_n2", op.free_hamiltonian_measure(2), REFERENCE_GRID, None),
        ("cantor16", msr.cantor(16), CANTOR_GRID, CANTOR_WINDOW),
    ]


def criterion_1(tolerance_scale=1.0, n_values=(1, 2, 4), s_values=(1.5, 2.0, 3.0)):
    tol = 0.05 * tolerance_scale
    out = []
    for n in n_values:
        m = op.free_hamiltonian_measure(n)
        target = 2.0 / (n + 2)
        c = 1.0 / (n + 2)  # local exponent at the origin
        for s in s_values:
            est = dim.estimate_dimensions(m, s, REFERENCE_GRID)
            closed = min(1.0, c * s / (s - 1))
            out.append(CheckResult(
                1, f"power-law n={n} s={s:g}",
                _within(est.regression_est, target, tol),
                f"regression {est.regression_est:.4f}, target 2/(n+2) = {target:.4f} +- {tol:g}"
                f" (closed-form scaling min(1, s/((n+2)(s-1))) = {closed:.4f})",
                {"estimate": est.regression_est, "target": target, "closed_form": closed},
            ))
    return out


def criterion_2(tolerance_scale=1.0, n_values=(1, 2, 4), q_values=(0.25, 0.5)):
    bound = 1.0 - 0.05 * tolerance_scale
    out = []
    for n in n_values:
        m = op.free_hamiltonian_measure(n)
        for q in q_values:
            est = dim.estimate_dimensions(m, q, REFERENCE_GRID)
            out.append(CheckResult(
                2, f"a.c. dominance n={n} q={q:g}", est.regression_est >= bound,
                f"regression {est.regression_est:.4f} >= {bound:.3f}",
                {"estimate": est.regression_est},
            ))
    return out


def _random_atomic(n, rng):
    return msr.AtomicMeasure.from_points(rng.random(n), rng.random(n) + 0.05)


def criterion_3(tolerance_scale=1.0, sizes=(1, 10, 100, 1000), seed=0):
    tol = 0.05 * tolerance_scale
    rng = np.random.default_rng(seed)
    out = []
    for n in sizes:
        m = _random_atomic(n, rng)
        gap = m.min_gap() if n > 1 else 1.0
        below_half = dim.EpsilonGrid(0.499 * gap, 8)
        below_gap = dim.EpsilonGrid(0.999 * gap, 8)
        worst = 0.0
        exact = True
        for s in (1.5, 2.0, 3.0):
            for kind in dim.KINDS:
                e = dim.estimate_dimensions(m, s, below_half, kind, (0, 8))
                worst = max(worst, e.upper_est)
            e = dim.estimate_dimensions(m, s, below_gap, "correlation", (0, 8))
            exact = exact and e.upper_est == 0.0 and e.lower_est == 0.0
        out.append(CheckResult(
            3, f"atom collapse N={n}", worst <= tol and exact,
            f"max upper_est {worst:.2e} <= {tol:g} (window below gap/2, both kinds); "
            f"correlation slopes below gap exactly 0: {exact}",
            {"max_upper": worst, "exact_zero": exact},
        ))
    return out


def criterion_4(tolerance_scale=1.0):
    c = msr.cantor(16)
    out = []
    for q in (0.5, 2.0):
        e = dim.estimate_dimensions(c, q, CANTOR_GRID, window=CANTOR_WINDOW)
        tol = 0.02 * tolerance_scale
        out.append(CheckResult(
            4, f"Cantor D(q={q:g})", _within(e.regression_est, CANTOR_DIM, tol),
            f"regression {e.regression_est:.6f}, target {CANTOR_DIM:.6f} +- {tol:g}",
            {"estimate": e.regression_est},
        ))
    h = dim.hausdorff_upper(c, 1000, CANTOR_GRID, window=CANTOR_WINDOW)
    tol = 0.03 * tolerance_scale
    out.append(CheckResult(
        4, "Cantor upper Hausdorff", _within(h, CANTOR_DIM, tol),
        f"estimate {h:.6f}, target {CANTOR_DIM:.6f} +- {tol:g}", {"estimate": h},
    ))
    return out


def criterion_5(tolerance_scale=1.0):
    mono_tol = 0.02 * tolerance_scale
    dm_tol = 0.05 * tolerance_scale
    out = []
    for label, m, grid, window in reference_measures():
        corr = [dim.estimate_dimensions(m, q, grid, "correlation", window).regression_est
                for q in Q_SWEEP]
        mean = [dim.estimate_dimensions(m, q, grid, "mean", window).regression_est
                for q in Q_SWEEP]
        rises = [max(b - a for a, b in zip(seq[:-1], seq[1:])) for seq in (corr, mean)]
        gap = max(abs(a - b) for a, b in zip(corr, mean))
        ok = max(rises) <= mono_tol and gap <= dm_tol
        out.append(CheckResult(
            5, f"monotone in q and D = m ({label})", ok,
            f"largest increase {max(rises):.4f} <= {mono_tol:g}; "
            f"max |corr - mean| {gap:.4f} <= {dm_tol:g}",
            {"correlation": corr, "mean": mean},
        ))
    return out


def criterion_6(tolerance_scale=1.0):
    tol = 0.05 * tolerance_scale
    out = []
    for label, m, grid, window in reference_measures():
        h = dim.hausdorff_upper(m, 1000, grid, window=window)
        d_s = dim.estimate_dimensions(m, 2.0, grid, window=window).regression_est
        d_q = dim.estimate_dimensions(m, 0.5, grid, window=window).regression_est
        ok = d_s - tol <= h <= d_q + tol
        out.append(CheckResult(
            6, f"dimension sandwich ({label})", ok,
            f"D(2) {d_s:.4f} - {tol:g} <= dimH+ {h:.4f} <= D(0.5) {d_q:.4f} + {tol:g}",
            {"hausdorff": h, "D2": d_s, "D05": d_q},
        ))
    return out


def criterion_7(tolerance_scale=1.0, N=2000, time_budget=10.0):
    op.eigendecompose(op.free_jacobi(2))  # JIT warm-up, excluded from timing
    J = op.free_jacobi(N)
    t0 = time.perf_counter()
    ed = op.eigendecompose(J)
    elapsed = time.perf_counter() - t0
    k = np.arange(1, N + 1)
    exact = np.sort(2 * np.cos(k * np.pi / (N + 1)))
    err = float(np.max(np.abs(ed.eigenvalues - exact)))
    res = ed.residual(J)
    gram = ed.gram_error()
    norm = J.norm_bound()
    ok = (err <= 1e-9 * tolerance_scale and res <= 1e-10 * norm * tolerance_scale
          and gram <= 1e-10 * tolerance_scale and elapsed <= time_budget)
    return [CheckResult(
        7, f"eigensolver N={N}", ok,
        f"max eigenvalue error {err:.2e}, residual {res:.2e}, Gram {gram:.2e}, "
        f"{elapsed:.2f} s (budget {time_budget:g} s)",
        {"error": err, "residual": res, "gram": gram, "seconds": elapsed},
    )]


def quadrature_return_probability(atoms, weights, t, nodes=4000):
    """Independent oracle: Gauss-Legendre in time of ``|sum_j w_j exp(-is lambda_j)|^2``."""
    x, w = msr.gauss_legendre_unit(nodes)
    amp = np.exp(-1j * np.outer(t * x, atoms)) @ weights
    return float(np.sum(w * np.abs(amp) ** 2))


def criterion_8(tolerance_scale=1.0, seed=1, trials=20):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m_atoms = int(rng.integers(1, 51))
        sm = msr.AtomicMeasure.from_points(rng.uniform(-2, 2, m_atoms),
                                           rng.random(m_atoms) + 0.01).normalized()
        t = float(rng.uniform(0.01, 100.0))
        closed = dyn.return_probability_avg(sm, t)
        ref = quadrature_return_probability(sm.atoms, sm.weights, t)
        worst = max(worst, abs(closed - ref))
    tol = 1e-6 * tolerance_scale
    return [CheckResult(
        8, "return probability closed form", worst <= tol,
        f"max |closed - quadrature| {worst:.2e} over {trials} (M, t) draws <= {tol:g}",
        {"max_error": worst},
    )]


def criterion_9(tolerance_scale=1.0, N=400):
    J = op.free_jacobi(N)
    sm = op.spectral_measure(J, op.delta(J, 1))
    ret = dyn.return_dynamics(sm, dyn.TimeGrid(1.0, N / 4, 64))
    # keep 2 eps above ~3 mean level spacings (4/N) so balls never resolve single atoms
    levels = 6
    grid = dim.EpsilonGrid(1.0, levels, (6.0 / N) ** (1.0 / levels))
    d2 = dim.estimate_dimensions(sm, 2.0, grid, window=(0, levels))
    tol = 0.15 * tolerance_scale
    diffs = {
        "lower": ret.lower_exponent - d2.lower_est,
        "upper": ret.upper_exponent - d2.upper_est,
        "regression": ret.regression_exponent - d2.regression_est,
    }
    ok = all(abs(v) <= tol for v in diffs.values())
    return [CheckResult(
        9, f"return exponents vs D(2), free N={N}", ok,
        "return (lower, upper, regression) = ({:.3f}, {:.3f}, {:.3f}); "
        "D(2) = ({:.3f}, {:.3f}, {:.3f}); max |diff| {:.3f} <= {:g}".format(
            ret.lower_exponent, ret.upper_exponent, ret.regression_exponent,
            d2.lower_est, d2.upper_est, d2.regression_est,
            max(abs(v) for v in diffs.values()), tol),
        diffs,
    )]


def criterion_10(tolerance_scale=1.0, N=400):
    J = op.free_jacobi(N)
    rep = dyn.check_guarneri(J, op.delta(J, 0), [1, 2], dyn.TimeGrid(1.0, 100.0, 64),
                             window=(2.0, 50.0))
    tol = 0.1 * tolerance_scale
    out = []
    for e in rep["entries"]:
        out.append(CheckResult(
            10, f"Guarneri bound p={e['p']:g}", e["slack_minus"] >= -tol,
            f"beta- {e['beta_minus']:.3f} - D-({e['q']:.3f}) {e['D_minus']:.3f} = "
            f"{e['slack_minus']:.3f} >= {-tol:g}",
            e,
        ))
    e2 = next(e for e in rep["entries"] if e["p"] == 2)
    ok = _within(e2["beta_minus"], 1.0, tol) and _within(e2["beta_plus"], 1.0, tol)
    out.append(CheckResult(
        10, "ballistic transport p=2", ok,
        f"beta(2) in [{e2['beta_minus']:.4f}, {e2['beta_plus']:.4f}], target 1 +- {tol:g}",
        {"beta_minus": e2["beta_minus"], "beta_plus": e2["beta_plus"]},
    ))
    return out


def criterion_11(tolerance_scale=1.0, k_values=(1, 2, 4, 8), seed=2):
    rng = np.random.default_rng(seed)
    ac = msr.uniform()
    grid = dim.EpsilonGrid(1e-6, 16)
    tol = 0.05 * tolerance_scale
    out = []
    atom_sets = {
        "one atom": msr.AtomicMeasure([0.5], [1.0]),
        "five atoms": msr.AtomicMeasure.from_points(rng.random(5), rng.random(5) + 0.1),
    }
    for label, pp in atom_sets.items():
        up = dim.mixture_sweep(ac, pp, list(k_values), 2.0, grid)
        low = dim.mixture_sweep(ac, pp, list(k_values), 0.5, grid)
        worst_up = max(e.upper_est for e in up)
        worst_low = min(e.lower_est for e in low)
        out.append(CheckResult(
            11, f"mixture sweep ({label}, k in {list(k_values)})",
            worst_up <= tol and worst_low >= 1 - tol,
            f"max upper_est(s=2) {worst_up:.2e} <= {tol:g}; "
            f"min lower_est(q=0.5) {worst_low:.4f} >= {1 - tol:g}",
            {"upper": [e.upper_est for e in up], "lower": [e.lower_est for e in low]},
        ))
    return out


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_all(tolerance_scale=1.0, only=None):
    results = []
    for number, fn in CRITERIA.items():
        if only is None or number in only:
            results.extend(fn(tolerance_scale))
    return results


def format_table(results):
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines)
