"""Optimal point densities, distortion constants and bit allocation.

Conventions: ``R`` is the average rate per variable (bits per sample of
each source), so ``n R`` bits are spent in total.  Distortion constants
``c_j`` multiply ``2^{-2 R_j} / 12``.

The variable-rate constant is ``c_j = 2^{2 h(X_j) + 2 E[log2 gamma_j(X_j)]}``.
A factor ``||gamma_j||_1^2`` sometimes written in front of it cancels
against the normalization of ``lambda_j`` when the resolution is matched to
the entropy, and is exposed separately as :func:`unnormalized_variable_constant`
for comparison only.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .compander import Compander, DistributedQuantizer, PointDensity, resolutions
from .functions import DEFAULT_GRID, sensitivity_profile
from .sources import NumericError

REGIMES = ("fixed", "variable", "slepian-wolf")
ZERO_MASS_LIMIT = 1e-6


class DontCareRequired(ValueError):
    """The sensitivity vanishes on a set of positive probability.

    Such designs are handled by :mod:`dfsq.dontcare`.
    """


class AllocationWarning(UserWarning):
    pass


# -- expectation helpers -----------------------------------------------------


def _pieces(*groups):
    pts = sorted({float(p) for g in groups for p in g if 0 < p < 1})
    edges = [0.0] + pts + [1.0]
    return list(zip(edges[:-1], edges[1:]))


def _breaks(source, j, profile=None, extra=()):
    br = list(source.marginal(j).breakpoints()) + list(extra)
    if profile is not None:
        br += list(getattr(profile, "breakpoints", ()))
    return br


def expect(func, source, j, breaks=()):
    """``E[func(X_j)]`` by the shared quadrature rule."""
    pdf = source.marginal(j).pdf
    total = 0.0
    for a, b in _pieces(source.marginal(j).breakpoints(), breaks):
        total += _quad.integrate(lambda x: pdf(x) * func(x), a, b)
    return total


def integral(func, breaks=()):
    return sum(_quad.integrate(func, a, b) for a, b in _pieces(breaks))


def quasinorm_1_3(func, breaks=()):
    """``||func||_{1/3} = (int_0^1 func^{1/3})^3`` for a callable."""
    return integral(lambda x: np.cbrt(np.maximum(func(x), 0.0)), breaks) ** 3


def quasinorm_1_3_grid(values):
    """Quasinorm of a nonnegative function sampled at cell midpoints of a uniform grid."""
    v = np.asarray(values, dtype=float)
    return float(np.mean(np.cbrt(np.maximum(v, 0.0))) ** 3)


def zero_mass(profile, source, j, breaks=()):
    """``P{gamma_j(X_j) == 0}`` under the clamp convention."""
    return expect(lambda x: (profile.sq(x) <= 0.0).astype(float), source, j, breaks)


def expected_log2(func, source, j, breaks=()):
    """``E[log2 func(X_j)]``; ``-inf`` when ``func`` vanishes with positive mass."""
    def integrand(x):
        v = np.asarray(func(x), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.log2(np.where(v > 0, v, 1.0))
        return np.where(v > 0, out, 0.0)

    mass = expect(lambda x: (np.asarray(func(x)) <= 0).astype(float), source, j, breaks)
    if mass > ZERO_MASS_LIMIT:
        return -math.inf
    return expect(integrand, source, j, breaks)


def profile_breaks(g, profile):
    return tuple(g.breakpoints(profile.j)) if g is not None else ()


# -- densities ---------------------------------------------------------------


def _check_admissible(profile, source, j, breaks):
    m = zero_mass(profile, source, j, breaks)
    if m > ZERO_MASS_LIMIT:
        raise DontCareRequired(
            f"gamma_{j} vanishes with probability {m:.3g}; use the don't-care design")


def fixed_rate_density(profile, source, j, breaks=(), check=True):
    """``lambda_j proportional to (gamma_j^2 f_j)^{1/3}``."""
    if check:
        _check_admissible(profile, source, j, breaks)
    pdf = source.marginal(j).pdf
    br = tuple(breaks) + tuple(source.marginal(j).breakpoints())
    return PointDensity(lambda x: np.cbrt(profile.sq(x) * pdf(x)), breakpoints=br,
                        name=f"fixed-rate lambda_{j}")


def variable_rate_density(profile, source=None, j=None, breaks=(), check=True):
    """``lambda_j proportional to gamma_j``."""
    if check and source is not None:
        _check_admissible(profile, source, j, breaks)
    return PointDensity(lambda x: np.sqrt(profile.sq(x)), breakpoints=tuple(breaks),
                        name=f"variable-rate lambda_{profile.j}")


# -- constants ---------------------------------------------------------------


def fixed_rate_constant(profile, source, j, breaks=()):
    """``||gamma_j^2 f_j||_{1/3}``."""
    pdf = source.marginal(j).pdf
    br = tuple(breaks) + tuple(source.marginal(j).breakpoints())
    c = quasinorm_1_3(lambda x: profile.sq(x) * pdf(x), br)
    if not np.isfinite(c):
        raise NumericError(f"quasinorm for variable {j} diverges")
    return c


def variable_rate_constant(profile, source, j, breaks=()):
    """``2^{2 h(X_j) + 2 E[log2 gamma_j(X_j)]}``."""
    elog = expected_log2(lambda x: np.sqrt(profile.sq(x)), source, j, breaks)
    if elog == -math.inf:
        raise DontCareRequired(f"E[log gamma_{j}] is -inf; use the don't-care design")
    return 2.0 ** (2.0 * source.differential_entropy(j) + 2.0 * elog)


def l1_norm(profile, breaks=()):
    return integral(lambda x: np.sqrt(profile.sq(x)), breaks)


def unnormalized_variable_constant(profile, source, j, breaks=()):
    """Variable-rate constant carrying the extra ``||gamma_j||_1^2`` factor."""
    return l1_norm(profile, breaks) ** 2 * variable_rate_constant(profile, source, j, breaks)


def distortion_constant(regime, profile, source, j, breaks=()):
    if regime == "fixed":
        return fixed_rate_constant(profile, source, j, breaks)
    if regime in ("variable", "slepian-wolf"):
        return variable_rate_constant(profile, source, j, breaks)
    raise ValueError(f"unknown regime {regime!r}")


# -- allocation --------------------------------------------------------------


@dataclass
class Allocation:
    rates: np.ndarray
    cost: float
    alpha: np.ndarray = None
    negative: bool = False
    mode: str = "unconstrained"


def allocate(constants, R, mode="unconstrained"):
    """Minimize ``sum_j c_j 2^{-2 R_j}`` subject to ``mean(R_j) = R``.

    Returns ``R_j = R + 0.5 log2(c_j / geomean(c))`` and the minimum
    ``n geomean(c) 2^{-2R}``.  Negative ``R_j`` are reported with a warning;
    ``mode="clip"`` instead water-fills under ``R_j >= 0`` (not part of the
    unconstrained solution).
    """
    c = np.asarray(constants, dtype=float)
    if np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise ValueError("allocation constants must be positive and finite")
    n = c.size
    log_geo = float(np.mean(np.log2(c)))
    rates = R + 0.5 * (np.log2(c) - log_geo)
    cost = n * 2.0 ** (log_geo - 2.0 * R)
    negative = bool(np.any(rates < 0))
    if mode == "clip" and negative:
        active = np.ones(n, dtype=bool)
        total = n * R
        while True:
            lg = float(np.mean(np.log2(c[active])))
            r = np.zeros(n)
            r[active] = total / active.sum() + 0.5 * (np.log2(c[active]) - lg)
            if np.all(r[active] >= 0):
                break
            active &= r > 0
        rates = r
        cost = float(np.sum(c * 2.0 ** (-2.0 * rates)))
        return Allocation(rates, cost, _alpha(rates), False, "clip")
    if negative:
        warnings.warn("unconstrained allocation gives a negative per-variable rate",
                      AllocationWarning, stacklevel=2)
    alpha = _alpha(rates) if not negative else None
    return Allocation(rates, cost, alpha, negative, mode)


def _alpha(log_res):
    log_res = np.asarray(log_res, dtype=float)
    total = log_res.sum()
    if total <= 0 or np.any(log_res <= 0):
        return None
    return log_res / total


# -- full design -------------------------------------------------------------


@dataclass
class DesignProblem:
    source: object
    function: object
    regime: str = "fixed"
    rate: float = 8.0
    profiles: list = None
    grid_size: int = DEFAULT_GRID
    mc_samples: int = 4096
    seed: int = 0
    allocation_mode: str = "unconstrained"


@dataclass
class DesignResult:
    regime: str
    rate: float
    densities: list
    constants: np.ndarray
    rates: np.ndarray
    alpha: np.ndarray
    log_resolutions: np.ndarray
    profiles: list
    entropies: np.ndarray
    e_log_gamma: np.ndarray
    e_log_lambda: np.ndarray
    l1_norms: np.ndarray
    joint_entropy: float = None
    warnings: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.densities)

    def companders(self):
        if not hasattr(self, "_companders"):
            self._companders = [Compander(d) for d in self.densities]
        return self._companders

    def predicted(self, R=None):
        """High-resolution distortion at average rate ``R``."""
        R = self.rate if R is None else R
        return hr_distortion_rate(self, R)

    def total_resolution(self):
        return 2.0 ** float(np.sum(self.log_resolutions))

    def quantizer(self, K=None):
        """Distributed quantizer at total resolution ``K``."""
        K = self.total_resolution() if K is None else K
        return DistributedQuantizer.from_companders(self.companders(), self.alpha, K)

    def per_variable_resolutions(self, K=None):
        K = self.total_resolution() if K is None else K
        return resolutions(K, self.alpha)

    def summary(self):
        return {
            "regime": self.regime,
            "rate": self.rate,
            "constants": self.constants.tolist(),
            "alpha": None if self.alpha is None else self.alpha.tolist(),
            "rates": self.rates.tolist(),
            "D_hr": self.predicted(),
        }


def hr_distortion_rate(design, R):
    """Closed-form optimized distortion at average rate ``R`` per variable."""
    n = design.n
    if design.regime in ("fixed", "variable"):
        geo = 2.0 ** float(np.mean(np.log2(design.constants)))
        return n / 12.0 * geo * 2.0 ** (-2.0 * R)
    # Slepian-Wolf: the joint entropy replaces the sum of marginal entropies
    geo = 2.0 ** float(np.mean(2.0 * design.e_log_gamma))
    return n / 12.0 * geo * 2.0 ** (2.0 * design.joint_entropy / n - 2.0 * R)


def design(problem):
    """Sensitivity profiles, densities, constants and allocation for a regime."""
    src, g = problem.source, problem.function
    if problem.regime not in REGIMES:
        raise ValueError(f"unknown regime {problem.regime!r}")
    n = g.n
    profiles = problem.profiles or [
        sensitivity_profile(g, src, j, problem.grid_size, problem.mc_samples, problem.seed)
        for j in range(n)]
    notes = []
    dens, consts, ent, elg, ell, l1 = [], [], [], [], [], []
    for j in range(n):
        br = profile_breaks(g, profiles[j])
        ent.append(src.differential_entropy(j))
        if problem.regime == "fixed":
            lam = fixed_rate_density(profiles[j], src, j, br)
            consts.append(fixed_rate_constant(profiles[j], src, j, br))
        else:
            lam = variable_rate_density(profiles[j], src, j, br)
            consts.append(variable_rate_constant(profiles[j], src, j, br))
        dens.append(lam)
        elg.append(expected_log2(lambda x, p=profiles[j]: np.sqrt(p.sq(x)), src, j, br))
        ell.append(expected_log2(lam, src, j, br + lam.breakpoints))
        l1.append(l1_norm(profiles[j], br))
    consts = np.array(consts)
    ent, elg, ell, l1 = map(np.array, (ent, elg, ell, l1))
    R = float(problem.rate)
    joint_h = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        alloc = allocate(consts, R, problem.allocation_mode)
    notes += [str(w.message) for w in caught]
    rates = alloc.rates
    if problem.regime == "fixed":
        log_res = rates.copy()
    elif problem.regime == "variable":
        log_res = rates - ent - ell
    else:
        joint_h = src.joint_differential_entropy()
        # equalize K_j^{-2} ||gamma_j||_1^2 under sum log K_j = nR - h(X) - sum E log lambda
        budget = n * R - joint_h - float(np.sum(ell))
        log_res = budget / n + np.log2(l1) - float(np.mean(np.log2(l1)))
    alpha = _alpha(log_res)
    if alpha is None:
        notes.append("degenerate allocation: some per-variable resolution <= 1")
    return DesignResult(problem.regime, R, dens, consts, rates, alpha, log_res, profiles,
                        ent, elg, ell, l1, joint_h, notes)
