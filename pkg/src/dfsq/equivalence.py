"""Functional equivalences and binning (non-regular) companders.

Two values ``s != t`` of ``X_j`` are equivalent for ``g`` when knowing only
``X_j in {s, t}`` costs nothing:

    v_j(s, t) = E[ var(g(X) | X_j in {s, t}, X_{-j}) ] = 0.

With the two-point conditional law ``P(s) : P(t) = f_j(s) : f_j(t)`` the
inner variance is ``p_s p_t (g(s, X_{-j}) - g(t, X_{-j}))^2``.

Equivalent values may share a quantizer cell.  A binning compander folds
each pair onto one ``w`` value and is otherwise monotone.  A function
without equivalences cannot be quantized this way without a distortion
floor, which :func:`distortion_floor_demo` makes visible.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _quad
from .compander import (ConstructionError, DistributedQuantizer, GeneralizedCompander,
                        CompandingQuantizer, Compander, bin_map)
from .design import DesignProblem, design
from .distortion import EstimatorTable, empirical_distortion
from .functions import DomainError, sensitivity_profile
from .rng import batch_generator
from .sources import ConfigurationError

#: absolute floor of the equivalence threshold
V_FLOOR = 1e-8
SCAN_SIZE = 64


def _others(source, j, size, rng):
    if not source.independent:
        raise ConfigurationError("equivalence statistics need independent coordinates")
    cols = []
    for i in range(source.n):
        if i == j:
            cols.append(np.zeros(size))
        else:
            cols.append(source.marginal(i).ppf(rng.random(size)))
    return np.column_stack(cols)


def _pair_weights(source, j, s, t):
    fs = np.asarray(source.marginal(j).pdf(np.asarray(s, float)), float)
    ft = np.asarray(source.marginal(j).pdf(np.asarray(t, float)), float)
    tot = fs + ft
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, fs * ft / tot**2, 0.0)


def equivalence_statistic(g, source, j, s, t, mc_samples=4096, seed=0):
    """Monte Carlo ``v_j(s, t)`` and its standard error.

    ``s`` and ``t`` may be arrays of equal shape; every pair shares the same
    draw of the other coordinates, so scans are smooth in ``(s, t)``.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s == t):
        raise DomainError("the pair must have s != t")
    if np.any((s < 0) | (s > 1) | (t < 0) | (t > 1)):
        raise DomainError("s and t must lie in [0, 1]")
    shape = np.broadcast(s, t).shape
    s, t = np.broadcast_to(s, shape).ravel(), np.broadcast_to(t, shape).ravel()
    x = _others(source, j, mc_samples, batch_generator(seed, 0))
    w = _pair_weights(source, j, s, t)
    vals = np.empty(s.size)
    errs = np.empty(s.size)
    for k in range(s.size):
        xs = x.copy()
        xs[:, j] = s[k]
        xt = x.copy()
        xt[:, j] = t[k]
        d = w[k] * (g.evaluate(xs) - g.evaluate(xt)) ** 2
        vals[k] = math.fsum(d) / d.size
        errs[k] = d.std(ddof=1) / math.sqrt(d.size)
    if shape == ():
        return float(vals[0]), float(errs[0])
    return vals.reshape(shape), errs.reshape(shape)


def is_equivalent(v, stderr):
    """Equivalence decision ``v < max(1e-8, 3 stderr)``."""
    return np.asarray(v) < np.maximum(V_FLOOR, 3.0 * np.asarray(stderr))


@dataclass
class EquivalenceScan:
    j: int
    s: np.ndarray
    t: np.ndarray
    v: np.ndarray
    stderr: np.ndarray

    @property
    def equivalent(self):
        mask = is_equivalent(self.v, self.stderr)
        return mask & (self.s[:, None] != self.t[None, :])

    @property
    def equivalence_free(self):
        return not np.any(self.equivalent)

    def rows(self):
        for a, sa in enumerate(self.s):
            for b, tb in enumerate(self.t):
                yield sa, tb, self.v[a, b], self.stderr[a, b]


def scan(g, source, j, size=SCAN_SIZE, mc_samples=4096, seed=0):
    """``v_j`` on a ``size x size`` grid of cell-centred ``(s, t)`` pairs.

    The diagonal ``s == t`` is reported as ``nan``.
    """
    pts = (np.arange(size) + 0.5) / size
    S, T = np.meshgrid(pts, pts, indexing="ij")
    off = S != T
    v = np.full(S.shape, np.nan)
    se = np.full(S.shape, np.nan)
    vv, ee = equivalence_statistic(g, source, j, S[off], T[off], mc_samples, seed)
    v[off], se[off] = vv, ee
    return EquivalenceScan(j, pts, pts, v, se)


# -- pairings ----------------------------------------------------------------


@dataclass
class Pairing:
    """Decreasing involution ``t`` pairing ``[lo, fold]`` with ``[fold, hi]``.

    Either ``lo == 0`` or ``hi == 1`` so that a continuous, piecewise-monotone
    compander can give the unpaired remainder its own range of values.
    """

    lo: float
    fold: float
    hi: float
    t: object = None
    name: str = "pairing"

    def __post_init__(self):
        if not 0.0 <= self.lo < self.fold < self.hi <= 1.0:
            raise ConstructionError("need 0 <= lo < fold < hi <= 1")
        if self.lo > 0.0 and self.hi < 1.0:
            raise ConstructionError("unpaired values on both sides cannot be kept apart")
        if self.t is None:
            c = self.fold
            self.t = lambda s, c=c: 2.0 * c - np.asarray(s, dtype=float)
        probe = np.linspace(self.lo, self.fold, 33)
        img = self.t(probe)
        if (abs(float(img[0]) - self.hi) > 1e-9 or abs(float(img[-1]) - self.fold) > 1e-9
                or np.max(np.abs(self.t(img) - probe)) > 1e-9 or np.any(np.diff(img) > 0)):
            raise ConstructionError("pairing must be a decreasing involution onto [fold, hi]")

    def representatives(self, count=16):
        s = self.lo + (self.fold - self.lo) * (np.arange(count) + 0.5) / count
        return s, self.t(s)


def mirror_pairing(fold, lo=None):
    """``t(s) = 2 fold - s`` on the largest interval that fits in [0, 1]."""
    fold = float(fold)
    if lo is None:
        lo = max(0.0, 2.0 * fold - 1.0)
    return Pairing(lo, fold, 2.0 * fold - lo, name=f"mirror@{fold:g}")


def verify_pairing(g, source, j, pairing, count=16, mc_samples=4096, seed=0):
    """``(ok, v, stderr)`` for ``count`` representative pairs."""
    s, t = pairing.representatives(count)
    v, se = equivalence_statistic(g, source, j, s, t, mc_samples, seed)
    return bool(np.all(is_equivalent(v, se))), v, se


# -- binning compander -------------------------------------------------------


def _slope_funcs(profile, source, j, pairing, regime):
    pdf = source.marginal(j).pdf

    def single(x):
        x = np.asarray(x, dtype=float)
        if regime == "fixed":
            return np.cbrt(profile.sq(x) * pdf(x))
        return np.sqrt(profile.sq(x))

    if pairing is None:
        return single, None

    def paired(s):
        s = np.asarray(s, dtype=float)
        t = pairing.t(s)
        h = 1e-7
        dt = np.abs(pairing.t(s + h) - pairing.t(s - h)) / (2.0 * h)
        fs, ft = pdf(s), pdf(t) * dt
        f = fs + ft
        with np.errstate(invalid="ignore", divide="ignore"):
            g2 = np.where(f > 0, (fs * profile.sq(s) + ft * profile.sq(t)) / f, 0.0)
        # the pair class is one variable with density f and rms sensitivity sqrt(g2)
        if regime == "fixed":
            return np.cbrt(g2 * f)
        return np.sqrt(g2)

    return single, paired


def _antiderivative(func, a, b):
    """Callable ``F(x) = int_a^x func`` (exact at the panel edges, Hermite between)."""
    edges, vals = _quad.cumulative(func, a, b)
    d = np.asarray(func(edges), dtype=float)
    spline = CubicHermiteSpline(edges, vals, d)
    total = float(vals[-1])

    def F(x):
        return spline(np.clip(np.asarray(x, dtype=float), a, b))

    return F, total


def build_binning_compander(g, source, j, pairing=None, profile=None, regime="variable",
                            verify=True, mc_samples=4096, seed=0, **profile_kw):
    """Generalized compander that folds each pair ``{s, t(s)}`` onto one value.

    The slope magnitude follows the optimal point density for the pair
    class (``lambda`` proportional to the class rms sensitivity, or to
    ``(gamma^2 f)^{1/3}`` with ``regime="fixed"``) and, off the paired set,
    the usual single-variable density.  With ``pairing=None`` the result is
    the ordinary monotone compander.

    Raises :class:`ConstructionError` if ``verify`` is set and the pairing is
    not an equivalence of ``g``.
    """
    if pairing is not None and verify:
        ok, v, se = verify_pairing(g, source, j, pairing, mc_samples=mc_samples, seed=seed)
        if not ok:
            raise ConstructionError(
                f"pairing {pairing.name} is not a functional equivalence "
                f"(max v = {np.max(v):.3g}, stderr {np.max(se):.3g})")
    if profile is None:
        profile = sensitivity_profile(g, source, j, mc_samples=mc_samples, seed=seed,
                                      **profile_kw)
    single, paired = _slope_funcs(profile, source, j, pairing, regime)
    if pairing is None:
        F, tot = _antiderivative(single, 0.0, 1.0)
        if not tot > 0:
            raise ConstructionError("sensitivity vanishes everywhere")
        return GeneralizedCompander([(0.0, 1.0, lambda x: F(x) / tot)])
    lo, fold, hi, t = pairing.lo, pairing.fold, pairing.hi, pairing.t
    P, cls = _antiderivative(paired, lo, fold)
    if hi < 1.0:
        U, u = _antiderivative(single, hi, 1.0)
    elif lo > 0.0:
        U, u = _antiderivative(single, 0.0, lo)
    else:
        U, u = None, 0.0
    tot = cls + u
    if not tot > 0:
        raise ConstructionError("sensitivity vanishes everywhere")

    def rising(x):
        return (u + P(x)) / tot

    def falling(x):
        return rising(t(np.asarray(x, dtype=float)))

    pieces = []
    if lo > 0.0:
        pieces.append((0.0, lo, lambda x: U(x) / tot))
    pieces.append((0.0 if lo == 0.0 else lo, fold, rising))
    pieces.append((fold, hi, falling))
    if hi < 1.0:
        pieces.append((hi, 1.0, lambda x: (u - U(x)) / tot))
    return GeneralizedCompander(pieces)


# -- distortion floor --------------------------------------------------------


@dataclass
class FloorSweep:
    """Empirical distortion per rate for one quantizer family."""

    label: str
    rates: list
    D: list
    stderr: list
    notes: list = field(default_factory=list)

    def drops(self):
        """Factor by which ``D`` falls per added bit between successive rates."""
        r = np.asarray(self.rates, float)
        d = np.asarray(self.D, float)
        return (d[:-1] / d[1:]) ** (1.0 / np.diff(r))

    @property
    def plateaus(self):
        d = self.D
        return abs(d[-1] - d[-2]) <= 0.1 * max(d[-1], d[-2])

    HEADER = ("family", "R", "D_emp", "stderr")

    def rows(self):
        for R, D, se in zip(self.rates, self.D, self.stderr):
            yield self.label, R, D, se


def rate_sweep(label, make_dq, g, source, rates, samples, seed, workers):
    Ds, ses = [], []
    for R in rates:
        dq = make_dq(R)
        est = EstimatorTable(dq, source, g, mode="numeric")
        rep = empirical_distortion(dq, source, g, est, samples, seed, "fixed", R,
                                   workers=workers)
        Ds.append(rep.D_emp)
        ses.append(rep.stderr)
    return FloorSweep(label, list(rates), Ds, ses)


def binned_family(companders):
    """``R -> DistributedQuantizer`` with ``2^R`` cells per variable from ``bin_map``."""
    def make(R):
        K = int(round(2.0**R))
        return DistributedQuantizer([bin_map(gc, K) for gc in companders])
    return make


def regular_family(g, source, regime="fixed", **kw):
    res = design(DesignProblem(source, g, regime, 0.0, **kw))
    comps = res.companders()

    def make(R):
        K = int(round(2.0**R))
        return DistributedQuantizer([CompandingQuantizer(c, K) for c in comps])
    return make


@dataclass
class FloorDemo:
    regular: FloorSweep
    binned: FloorSweep
    certificate: EquivalenceScan = None

    def rows(self):
        yield from self.regular.rows()
        yield from self.binned.rows()


def distortion_floor_demo(g, source, binned, rates=(3, 4, 5, 6), samples=2**18, seed=0,
                          workers=None, certify=True, scan_samples=4096):
    """Regular design versus the binned family ``binned`` (list of companders).

    For an equivalence-free ``g`` the binned family's distortion stops
    falling with rate, while the regular design keeps its ``2^{-2R}`` slope.
    ``certify`` runs the 64 x 64 scan on every variable first and records
    the first variable's scan.
    """
    cert = None
    if certify:
        for j in range(g.n):
            sc = scan(g, source, j, mc_samples=scan_samples, seed=seed)
            if not sc.equivalence_free:
                raise ConstructionError(f"variable {j} has functional equivalences")
            cert = cert or sc
    reg = rate_sweep("regular", regular_family(g, source), g, source, rates, samples, seed,
                 workers)
    bn = rate_sweep("binned", binned_family(binned), g, source, rates, samples, seed, workers)
    return FloorDemo(reg, bn, cert)


def mirror_binned_companders(n):
    """Forced mirror binning ``w(x) = 1 - |2x - 1|`` (pairs ``s`` with ``1 - s``)."""
    fold = (lambda x: 2.0 * np.asarray(x, float), lambda x: 2.0 - 2.0 * np.asarray(x, float))
    gc = GeneralizedCompander([(0.0, 0.5, fold[0]), (0.5, 1.0, fold[1])])
    return [gc] * n


def sep_parabola_companders(g, source, **kw):
    """Binning compander for ``x1`` (fold at 3/8) and the regular one for ``x2``."""
    w1 = build_binning_compander(g, source, 0, mirror_pairing(0.375, lo=0.0), **kw)
    w2 = build_binning_compander(g, source, 1, None, **kw)
    return [w1, w2]
