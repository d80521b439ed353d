"""Don't-care intervals and rate amplification.

Where ``gamma_j`` vanishes on an interval of positive probability, the
variable ``X_j`` only needs to be located in that interval.  A don't-care
quantizer spends one codeword per interval and companding cells elsewhere.
With entropy coding, the fine description is needed only on the event
``A_j = {X_j outside the intervals}``, so the rate left after sending the
interval indicator is amplified by ``rho_j = 1 / P(A_j)``.

The variable-rate distortion implemented here is

    D = (1/12) sum_j rho_j^{-1} 2^{-2 rho_j (alpha_j R - H(I_j))
                                  + 2 h(X_j | A_j) + 2 E[log2 gamma_j | A_j]}

which reduces exactly to the ordinary variable-rate constant when there are
no intervals.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .compander import (Compander, CompandingQuantizer, DistributedQuantizer,
                        NonRegularQuantizer, PointDensity, ResolutionError, uniform_cell)
from .design import _pieces
from .distortion import DistortionReport, EstimatorTable, empirical_distortion
from .rate import entropy_bits, output_entropy
from .sources import ConfigurationError

MIN_RUN = 4
MIN_PROB = 1e-4


class UnsupportedDontCare(ValueError):
    """Every value is a don't-care value (``P(A_j) = 0``)."""


@dataclass
class DontCareSpec:
    j: int
    intervals: list
    probabilities: list
    p_A: float

    @property
    def M(self):
        return len(self.intervals)

    @property
    def rho(self):
        return 1.0 / self.p_A

    @property
    def indicator_entropy(self):
        """``H(I_j)`` in bits."""
        if not self.intervals:
            return 0.0
        return entropy_bits(np.array(list(self.probabilities) + [self.p_A]))

    H_I = indicator_entropy

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x >= a) & (x <= b)
        return inside

    def complement_pieces(self):
        """Intervals of [0, 1] outside the don't-care set."""
        pts = [0.0]
        for a, b in self.intervals:
            pts += [a, b]
        pts.append(1.0)
        return [(pts[i], pts[i + 1]) for i in range(0, len(pts), 2) if pts[i + 1] > pts[i]]

    def rows(self):
        for (a, b), p in zip(self.intervals, self.probabilities):
            yield self.j, a, b, p


def empty_spec(j=0):
    return DontCareSpec(j, [], [], 1.0)


def spec_from_intervals(j, intervals, source):
    cdf = source.marginal(j).cdf
    probs = [float(cdf(b) - cdf(a)) for a, b in intervals]
    p_A = 1.0 - sum(probs)
    if p_A <= 0:
        raise UnsupportedDontCare("P(A_j) = 0: the variable is entirely don't-care")
    return DontCareSpec(j, [tuple(map(float, iv)) for iv in intervals], probs, p_A)


def detect(profile, source, min_run=MIN_RUN, min_prob=MIN_PROB):
    """Maximal runs of zero sensitivity with positive probability."""
    zero = profile.values == 0.0
    grid = profile.grid
    intervals = []
    i = 0
    while i < zero.size:
        if zero[i]:
            k = i
            while k + 1 < zero.size and zero[k + 1]:
                k += 1
            if k - i + 1 >= min_run:
                intervals.append((float(grid[i]), float(grid[k])))
            i = k + 1
        else:
            i += 1
    cdf = source.marginal(profile.j).cdf
    keep = [(a, b) for a, b in intervals if cdf(b) - cdf(a) >= min_prob]
    return spec_from_intervals(profile.j, keep, source)


# -- conditional quantities on A ---------------------------------------------


def _a_breaks(spec, extra=()):
    br = list(extra)
    for a, b in spec.intervals:
        br += [a, b]
    return br


def _expect_on_A(func, spec, source, extra=()):
    """``E[func(X_j) 1{A_j}]``."""
    pdf = source.marginal(spec.j).pdf
    br = _a_breaks(spec, list(extra) + list(source.marginal(spec.j).breakpoints()))
    total = 0.0
    for a, b in _pieces(br):
        mid = 0.5 * (a + b)
        if spec.contains(mid):
            continue
        total += _quad.integrate(lambda x: pdf(x) * func(x), a, b)
    return total


def conditional_entropy_on_A(spec, source):
    """``h(X_j | A_j)`` in bits."""
    pdf = source.marginal(spec.j).pdf
    pA = spec.p_A

    def integrand(x):
        f = pdf(x) / pA
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(f > 0, -np.log2(np.where(f > 0, f, 1.0)), 0.0)

    return _expect_on_A(integrand, spec, source) / pA


def conditional_elog_gamma(spec, profile, source, breaks=()):
    """``E[log2 gamma_j(X_j) | A_j]``."""
    def lg(x):
        s = profile.sq(x)
        with np.errstate(divide="ignore"):
            return np.where(s > 0, 0.5 * np.log2(np.where(s > 0, s, 1.0)), -np.inf)

    val = _expect_on_A(lg, spec, source, breaks) / spec.p_A
    if not np.isfinite(val):
        raise ArithmeticError("gamma vanishes inside A; refine the don't-care intervals")
    return val


def complement_density(spec, profile, source, regime="variable", breaks=()):
    """Optimal point density restricted to ``[0,1]`` minus the intervals."""
    pdf = source.marginal(spec.j).pdf
    inside = spec.contains

    if regime == "fixed":
        def lam(x):
            return np.where(inside(x), 0.0, np.cbrt(profile.sq(x) * pdf(x)))
    else:
        def lam(x):
            return np.where(inside(x), 0.0, np.sqrt(profile.sq(x)))

    br = _a_breaks(spec, list(breaks) + list(source.marginal(spec.j).breakpoints()))
    return PointDensity(lam, breakpoints=br, name=f"{regime} don't-care lambda_{spec.j}")


# -- quantizer ---------------------------------------------------------------


class DontCareQuantizer(NonRegularQuantizer):
    """Companding cells on the complement plus one cell per don't-care interval.

    Labels ``0..K-M-1`` are the companded cells; the interval cells follow.
    Every cell is a single interval, so the quantizer is regular.
    """

    def __init__(self, spec, compander, K):
        M = spec.M
        if K <= M:
            raise ResolutionError(f"need K > M (K={K}, M={M})")
        fine = K - M
        cuts = compander.inverse(np.arange(1, fine) / fine) if fine > 1 else np.empty(0)
        pts = [0.0, 1.0] + list(cuts)
        for a, b in spec.intervals:
            pts += [a, b]
        edges = np.unique(np.clip(np.asarray(pts, dtype=float), 0.0, 1.0))
        mids = 0.5 * (edges[:-1] + edges[1:])
        labels = uniform_cell(compander(mids), fine)
        in_z = spec.contains(mids)
        for i, (a, b) in enumerate(spec.intervals):
            sel = (mids >= a) & (mids <= b)
            labels[sel] = fine + i
        keep = np.concatenate([[True], labels[1:] != labels[:-1]])
        edges = np.concatenate([edges[:-1][keep], [1.0]])
        labels = labels[keep]
        codewords = np.empty(K)
        codewords[:fine] = compander.inverse((2 * np.arange(1, fine + 1) - 1) / (2 * fine))
        for i, (a, b) in enumerate(spec.intervals):
            codewords[fine + i] = 0.5 * (a + b)
        super().__init__(edges, labels, K, codewords)
        self.regular = bool(np.unique(labels).size == labels.size)
        self.spec = spec
        self.fine = fine
        self._in_z = in_z

    @property
    def boundaries(self):
        return self.edges


def build_dontcare_quantizer(spec, density, K):
    """Don't-care quantizer with ``K - M`` companding cells per ``density``."""
    if spec.M == 0:
        return CompandingQuantizer(Compander(density), K)
    return DontCareQuantizer(spec, Compander(density), int(K))


# -- predictions -------------------------------------------------------------


def vr_distortion_amplified(specs, profiles, source, alpha, R, breaks=None):
    """Variable-rate distortion with rate amplification.

    ``R`` is the total rate; variable ``j`` gets ``alpha_j R`` bits.
    Returns ``(D, notes)``.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    notes = []
    total = 0.0
    for j, (spec, prof) in enumerate(zip(specs, profiles)):
        br = () if breaks is None else breaks[j]
        Rj = alpha[j] * R
        if Rj < spec.indicator_entropy:
            notes.append(f"variable {j}: indicator entropy exceeds its rate; formula invalid")
        h = conditional_entropy_on_A(spec, source)
        elog = conditional_elog_gamma(spec, prof, source, br)
        expo = -2.0 * spec.rho * (Rj - spec.indicator_entropy) + 2.0 * h + 2.0 * elog
        total += spec.p_A * 2.0**expo
    return total / 12.0, notes


def fr_distortion_dontcare(specs, profiles, source, alpha, R, breaks=None):
    """Fixed-rate optimized distortion; the intervals only cost one level each."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    total = 0.0
    for j, (spec, prof) in enumerate(zip(specs, profiles)):
        br = () if breaks is None else breaks[j]
        c = _fr_constant(spec, prof, source, br)
        K = 2.0 ** (alpha[j] * R)
        total += c / (12.0 * max(K - spec.M, 1.0) ** 2)
    return total


def _fr_constant(spec, prof, source, br):
    pdf = source.marginal(spec.j).pdf
    cube = _expect_on_A(lambda x: np.cbrt(prof.sq(x) / np.maximum(pdf(x), 1e-300) ** 2),
                        spec, source, br)
    return cube**3


def dontcare_distortion_resolution(specs, profiles, densities, source, ks, breaks=None):
    """``sum_j P(A_j) E[(gamma_j/lambda_j)^2 | A_j] / (12 (K_j - M_j)^2)``."""
    total = 0.0
    for j, (spec, prof, lam, k) in enumerate(zip(specs, profiles, densities, ks)):
        br = () if breaks is None else breaks[j]

        def ratio(x):
            s = prof.sq(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(s > 0, s / lam(x) ** 2, 0.0)

        term = _expect_on_A(ratio, spec, source, br)
        total += term / (12.0 * (k - spec.M) ** 2)
    return total


# -- simulation --------------------------------------------------------------


@dataclass
class DontCareSweep:
    regime: str
    rates: list
    reports: list
    slope: float
    constant: float
    nominal_slope: float
    notes: list = field(default_factory=list)

    def rows(self):
        for r in self.reports:
            yield r.row() + [self.slope]


def _fine_resolution(spec, density, source, rate):
    """Largest fine resolution whose conditional entropy given ``A`` fits ``rate``."""
    comp = Compander(density)
    pA = spec.p_A

    def cond_entropy(k):
        q = CompandingQuantizer(comp, k)
        cdf = source.marginal(spec.j).cdf
        p = np.maximum(cdf(q.boundaries[1:]) - cdf(q.boundaries[:-1]), 0.0)
        # remove don't-care mass absorbed by flat stretches of w
        for (a, b), pz in zip(spec.intervals, spec.probabilities):
            idx = np.clip(np.searchsorted(q.boundaries, b, side="left") - 1, 0, k - 1)
            p[idx] -= pz
        p = np.maximum(p, 0.0) / pA
        return entropy_bits(p / p.sum())

    lim = rate + 1e-9
    if cond_entropy(1) > lim:
        return 1
    lo, hi = 1, 2
    while cond_entropy(hi) <= lim:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cond_entropy(mid) <= lim:
            lo = mid
        else:
            hi = mid
    return lo


def dontcare_quantizer_for_rate(spec, profile, source, R, regime="variable", breaks=()):
    """Don't-care quantizer meeting rate ``R`` for one variable."""
    if spec.M == 0:
        dens = complement_density(spec, profile, source, regime, breaks)
        if regime == "fixed":
            return CompandingQuantizer(Compander(dens), int(math.floor(2.0**R + 1e-9)))
        comp = Compander(dens)
        from .rate import resolution_for_rate

        K = resolution_for_rate("variable", comp, source, None, R)
        return CompandingQuantizer(comp, K)
    dens = complement_density(spec, profile, source, regime, breaks)
    if regime == "fixed":
        K = int(math.floor(2.0**R + 1e-9))
        return build_dontcare_quantizer(spec, dens, K)
    fine_rate = spec.rho * (R - spec.indicator_entropy)
    if fine_rate < 0:
        raise ResolutionError("rate below the indicator entropy")
    fine = _fine_resolution(spec, dens, source, fine_rate)
    return build_dontcare_quantizer(spec, dens, fine + spec.M)


def simulate_dontcare(spec, source, g, rates, samples=2**20, seed=0, regime="variable",
                      profile=None, workers=None):
    """Two-stage don't-care scheme swept over ``rates`` (``n = 1``).

    The indicator is charged ``H(I)`` bits; the fine quantizer on ``A`` gets
    ``rho (R - H(I))`` bits of conditional entropy.  Fixed rate uses ``2^R``
    levels in total.  The slope of ``log2 D`` against ``R`` is fitted by
    least squares and the constant is ``D 2^{-slope_nominal R}`` at the
    largest rate.
    """
    if g.n != 1:
        raise ConfigurationError("simulate_dontcare handles univariate functions")
    from .functions import sensitivity_profile

    profile = profile or sensitivity_profile(g, source, 0)
    br = g.breakpoints(0)
    reports = []
    nominal = -2.0 * spec.rho if (regime == "variable" and spec.M) else -2.0
    for R in rates:
        q = dontcare_quantizer_for_rate(spec, profile, source, R, regime, br)
        dq = DistributedQuantizer([q], [1.0], q.K)
        est = EstimatorTable(dq, source, g, "numeric")
        if regime == "variable":
            hr, _ = vr_distortion_amplified([spec], [profile], source, [1.0], R, [br])
        else:
            hr = fr_distortion_dontcare([spec], [profile], source, [1.0], R, [br])
        rep = empirical_distortion(dq, source, g, est, samples, seed, regime, R, hr, workers)
        rep.notes.append(f"rate used: {output_entropy(q, source, 0):.6f} bits")
        reports.append(rep)
    x = np.asarray(rates, dtype=float)
    y = np.log2([r.D_emp for r in reports])
    slope = float(np.polyfit(x, y, 1)[0]) if len(rates) > 1 else math.nan
    constant = reports[-1].D_emp * 2.0 ** (-nominal * x[-1])
    return DontCareSweep(regime, list(rates), reports, slope, constant, nominal)
