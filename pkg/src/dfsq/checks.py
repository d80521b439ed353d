"""Property suites run by ``dfsq verify`` and by the test suite.

Each suite returns a :class:`Check` with the number of cases tried and the
violations found.  Randomness comes from ``numpy.random.default_rng(seed)``
so a suite is reproducible.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .compander import Compander, CompandingQuantizer, PointDensity
from .design import (DesignProblem, allocate, design, fixed_rate_density, quasinorm_1_3,
                     variable_rate_density)
from .distortion import cell_variance, cell_variance_bounds, functional_constant
from .functions import (Linear, Max, Median, MinClip, SepParabola, Square,
                        sensitivity_profile)
from .rate import hr_entropy, output_entropy, monotone_scan
from .sources import IndependentSource, Power, Uniform, uniform_source


@dataclass
class Check:
    name: str
    cases: int
    violations: int
    detail: str = ""
    worst: float = math.nan
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.violations == 0 and self.cases > 0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.cases} cases, {self.violations} violations {self.detail}"


# -- quasi-triangle inequality -----------------------------------------------


def _random_nonnegative(rng):
    """Random nonnegative function on [0, 1]: a positive mixture of bumps and powers."""
    kind = rng.integers(3)
    if kind == 0:
        c = rng.uniform(0, 1, 3)
        w = rng.uniform(0.01, 0.3, 3)
        a = rng.lognormal(0, 1, 3)
        return lambda x: sum(ai * np.exp(-((x - ci) / wi) ** 2) for ai, ci, wi in zip(a, c, w))
    if kind == 1:
        p = rng.uniform(0, 6)
        a = rng.lognormal(0, 1)
        return lambda x: a * np.asarray(x, float) ** p
    edges = np.sort(rng.uniform(0, 1, 4))
    vals = rng.lognormal(0, 2, 5) * (rng.random(5) < 0.8)
    return lambda x: vals[np.searchsorted(edges, x)]


def quasi_triangle(count=100, seed=0):
    """``||f + g||_{1/3} <= 4 (||f||_{1/3} + ||g||_{1/3})`` on random pairs."""
    rng = np.random.default_rng(seed)
    bad, worst = 0, 0.0
    for _ in range(count):
        f, g = _random_nonnegative(rng), _random_nonnegative(rng)
        lhs = quasinorm_1_3(lambda x: f(x) + g(x))
        rhs = 4.0 * (quasinorm_1_3(f) + quasinorm_1_3(g))
        worst = max(worst, lhs / rhs)
        bad += lhs > rhs * (1 + 1e-12)
    return Check("quasi-triangle inequality (constant 4)", count, int(bad),
                 f"max lhs/rhs = {worst:.4f}", worst)


# -- cell variance envelope --------------------------------------------------


def _case_pool():
    pow2 = IndependentSource([Power(2.0), Uniform()])
    return [
        (Square(), uniform_source(1)),
        (Square(), IndependentSource([Power(3.0)])),
        (Linear([1.0, -2.0]), uniform_source(2)),
        (Linear([0.5, 3.0]), pow2),
        (SepParabola(), uniform_source(2)),
        (Max(2), uniform_source(2)),
        (Max(3), uniform_source(3)),
        (Median(3), uniform_source(3)),
        (MinClip(), uniform_source(1)),
    ]


def variance_bounds(count=100, seed=0):
    """Exact cell variances lie between the envelope bounds on random small cells."""
    rng = np.random.default_rng(seed)
    pool = _case_pool()
    bad, worst = 0, 0.0
    for _ in range(count):
        g, src = pool[rng.integers(len(pool))]
        width = 10.0 ** rng.uniform(-3, -1, g.n)
        lo = rng.uniform(0, 1 - width)
        hi = lo + width
        low, up, _ = cell_variance_bounds(g, lo, hi, src)
        v = cell_variance(g, lo, hi, src)
        # relative slack plus an absolute floor for round-off in constant cells
        tol = 1e-9 * up + 1e-24
        ok = low - tol <= v <= up + tol
        if up > 0:
            worst = max(worst, v / up)
        bad += not ok
    return Check("cell variance envelope", count, int(bad), f"max var/upper = {worst:.4f}",
                 worst)


# -- allocation --------------------------------------------------------------


def _grid_allocation(c, R, levels=60, points=21):
    """Zooming grid search for ``min sum c_j 2^{-2 R_j}`` with ``mean R_j = R``."""
    n = c.size
    if n == 1:
        return float(c[0] * 2.0 ** (-2 * R))
    center = np.full(n - 1, R)
    span = 8.0
    best = math.inf
    for _ in range(levels):
        axes = [np.linspace(m - span, m + span, points) for m in center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        last = n * R - mesh.sum(axis=1)
        rates = np.column_stack([mesh, last])
        cost = (c * 2.0 ** (-2.0 * rates)).sum(axis=1)
        k = int(np.argmin(cost))
        best = min(best, float(cost[k]))
        center = mesh[k]
        span *= 0.5
    return best


def allocation_optimum(count=40, seed=0, tol=1e-6):
    """Closed-form allocation matches a brute-force grid search for ``n <= 4``."""
    rng = np.random.default_rng(seed)
    bad, worst = 0, 0.0
    for _ in range(count):
        n = int(rng.integers(1, 5))
        c = rng.lognormal(0, 1.5, n)
        R = float(rng.uniform(2, 10))
        a = allocate(c, R, mode="unconstrained")
        direct = float(np.sum(c * 2.0 ** (-2.0 * a.rates)))
        brute = _grid_allocation(c, R)
        err = abs(direct - brute) / brute
        err = max(err, abs(a.cost - direct) / direct)
        worst = max(worst, err)
        bad += err > tol
    return Check("allocation equals grid optimum", count, int(bad),
                 f"max relative gap = {worst:.2e}", worst)


# -- optimality of the point densities ---------------------------------------


def _perturbed(density, rng, eps):
    k = rng.integers(1, 6)
    phase = rng.uniform(0, 2 * np.pi)
    amp = eps * rng.uniform(0.2, 1.0)
    return PointDensity(lambda x: density(x) * (1 + amp * np.sin(2 * np.pi * k * x + phase)),
                        breakpoints=density.breakpoints, name="perturbed")


def density_optimality(count=20, seed=0, tol=1e-10):
    """Random perturbations never lower the distortion constant of ``lambda*``."""
    rng = np.random.default_rng(seed)
    cases = [(Square(), uniform_source(1), 0), (Max(3), uniform_source(3), 0),
             (Linear([1.0]), IndependentSource([Power(2.0)]), 0),
             (SepParabola(), uniform_source(2), 1)]
    bad, best = 0, math.inf
    total = 0
    for regime in ("fixed", "variable"):
        for _ in range(count):
            g, src, j = cases[rng.integers(len(cases))]
            prof = sensitivity_profile(g, src, j)
            br = tuple(g.breakpoints(j))
            lam = (fixed_rate_density if regime == "fixed" else variable_rate_density)(
                prof, src, j, br)
            c0 = functional_constant(regime, prof, lam, src, j, br)
            eps = 10.0 ** rng.uniform(-3, -0.5)
            c1 = functional_constant(regime, prof, _perturbed(lam, rng, eps), src, j, br)
            gain = (c0 - c1) / c0
            best = min(best, -gain)
            bad += gain > tol
            total += 1
    return Check("point-density optimality under perturbation", total, int(bad),
                 f"min relative increase = {best:.2e}", best)


PROPERTY_SUITES = {
    "quasi-triangle": quasi_triangle,
    "variance-bounds": variance_bounds,
    "allocation": allocation_optimum,
    "density-optimality": density_optimality,
}


def property_suites(seed=0):
    return [f(seed=seed) for f in PROPERTY_SUITES.values()]


# -- checks tied to a configured problem -------------------------------------


def problem_checks(g, source, regime, rate, seed=0, grid_size=1024):
    """Sanity checks of the design for a configured ``(g, source, regime)``."""
    out = []
    res = design(DesignProblem(source, g, regime, rate, grid_size=grid_size, seed=seed))
    bad, worst = 0, 0.0
    for j, lam in enumerate(res.densities):
        mass = sum(_quad.integrate(lam, a, b) for a, b in
                   zip((0.0,) + tuple(lam.breakpoints), tuple(lam.breakpoints) + (1.0,)))
        worst = max(worst, abs(mass - 1.0))
        bad += abs(mass - 1.0) > 1e-9
    out.append(Check("point densities integrate to one", g.n, bad, f"max error {worst:.1e}",
                     worst))
    bad = 0
    for c in res.companders():
        x = np.linspace(0, 1, 4097)
        w = c(x)
        bad += not (abs(w[0]) < 1e-12 and abs(w[-1] - 1) < 1e-12 and np.all(np.diff(w) >= 0))
    out.append(Check("companders monotone from 0 to 1", g.n, bad))
    if regime != "fixed":
        bad, worst = 0, 0.0
        for j, c in enumerate(res.companders()):
            K = 2**12
            exact = output_entropy(CompandingQuantizer(c, K), source, j)
            hr = hr_entropy(c.density, source, j, K)
            worst = max(worst, abs(exact - hr))
            bad += abs(exact - hr) > 0.05
        out.append(Check("output entropy near h + log2 K + E log2 lambda at K=2^12", g.n, bad,
                         f"max gap {worst:.4f} bits", worst))
        _, rates = monotone_scan(res.companders()[0], source, None, (2, 256))
        dec = int(np.sum(np.diff(rates) < -1e-12))
        out.append(Check("output entropy nondecreasing in K (2..256)", 1, dec))
    sane = np.isfinite(res.predicted()) and res.predicted() > 0
    out.append(Check("predicted distortion finite and positive", 1, int(not sane)))
    return out
