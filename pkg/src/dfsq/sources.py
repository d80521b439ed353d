"""Source distributions on the unit cube.

Marginals are small objects exposing ``pdf``, ``cdf`` and ``ppf``.  A
:class:`SourceModel` bundles ``n`` of them, either as an independent product
(:class:`IndependentSource`) or as a piecewise-constant joint density on a
regular grid for ``n <= 3`` (:class:`GridSource`).
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline

from . import _quad
from .rng import BATCH_SIZE, batch_generator, batch_sizes


class ConfigurationError(ValueError):
    """Raised for source or function specifications that cannot be used."""


class NumericError(ArithmeticError):
    """Raised when a numerical quantity diverges or fails to converge."""


def bisect_inverse(func, y, lo=0.0, hi=1.0, tol=1e-15, max_iter=200):
    """Smallest ``x`` in [lo, hi] with ``func(x) >= y`` for nondecreasing ``func``.

    Vectorized over ``y``; ``lo``/``hi`` may be arrays bracketing each target.
    """
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), y.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), y.shape).copy()
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        above = func(mid) >= y
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return hi


# -- marginals ---------------------------------------------------------------


class Marginal:
    """Density on [0, 1].  Subclasses supply ``pdf`` and usually ``cdf``."""

    name = "marginal"

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return bisect_inverse(self.cdf, u)

    def mean(self):
        return _quad.integrate(lambda x: x * self.pdf(x))

    def breakpoints(self):
        """Points in (0, 1) where the pdf is discontinuous."""
        return ()


class Uniform(Marginal):
    name = "uniform"

    def pdf(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def ppf(self, u):
        return np.clip(np.asarray(u, dtype=float), 0.0, 1.0)

    def mean(self):
        return 0.5


class Power(Marginal):
    """Density ``(k+1) x**k`` on [0, 1], ``k > -1``."""

    def __init__(self, k):
        k = float(k)
        if k <= -1:
            raise ConfigurationError("power source needs k > -1")
        self.k = k
        self.name = f"power({k:g})"

    def pdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return (self.k + 1) * x**self.k

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** (self.k + 1)

    def ppf(self, u):
        return np.clip(np.asarray(u, dtype=float), 0.0, 1.0) ** (1.0 / (self.k + 1))

    def mean(self):
        return (self.k + 1) / (self.k + 2)


class Tabulated(Marginal):
    """Marginal defined by a callable pdf.

    The cdf is tabulated once on a ``2**14``-interval grid by cumulative
    quadrature and interpolated with a cubic Hermite spline that uses the pdf
    as slope data.
    """

    GRID = 2**14

    def __init__(self, pdf, name="tabulated", normalize=True):
        self._raw = pdf
        self.name = name
        total = _quad.integrate(lambda x: pdf(x))
        if not np.isfinite(total) or total <= 0:
            raise ConfigurationError("pdf must have positive finite mass")
        self._scale = 1.0 / total if normalize else 1.0
        xs = np.linspace(0.0, 1.0, self.GRID + 1)
        steps = _quad.gl_interval(lambda t: self.pdf(t), xs[:-1], xs[1:])
        cs = np.concatenate([[0.0], np.cumsum(steps)])
        cs /= cs[-1]
        self._spline = CubicHermiteSpline(xs, cs, self.pdf(xs))

    def pdf(self, x):
        return self._scale * np.asarray(self._raw(np.asarray(x, dtype=float)), dtype=float)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return np.clip(self._spline(x), 0.0, 1.0)


class PiecewiseConstant(Marginal):
    """Histogram density with equal-width bins."""

    def __init__(self, weights, name="histogram"):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or w.sum() <= 0:
            raise ConfigurationError("histogram weights must be nonnegative")
        self.mass = w / w.sum()
        self.m = len(w)
        self.name = name
        self._cum = np.concatenate([[0.0], np.cumsum(self.mass)])
        self._cum[-1] = 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip((x * self.m).astype(int), 0, self.m - 1)
        return self.mass[i] * self.m

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return np.interp(x, np.linspace(0.0, 1.0, self.m + 1), self._cum)

    def breakpoints(self):
        return tuple(np.arange(1, self.m) / self.m)


def marginal_from_spec(spec):
    """Build a marginal from ``{"kind": ..., ...}`` (CLI config form)."""
    kind = spec.get("kind")
    if kind == "uniform":
        return Uniform()
    if kind == "power":
        return Power(float(spec["k"]))
    raise ConfigurationError(f"unknown marginal kind {kind!r}")


# -- joint models ------------------------------------------------------------


class SourceModel:
    """Distribution of ``(X_1, ..., X_n)`` supported on [0, 1]^n."""

    n = 0
    independent = True

    def marginal(self, j):
        raise NotImplementedError

    def marginal_pdf(self, j, x):
        return self.marginal(j).pdf(x)

    def marginal_cdf(self, j, x):
        return self.marginal(j).cdf(x)

    def inverse_cdf(self, j, u):
        """Quantile of ``X_j``; bisection when no closed form exists."""
        return self.marginal(j).ppf(u)

    def joint_pdf(self, x):
        raise NotImplementedError

    def _draw(self, rng, size):
        raise NotImplementedError

    def sample_batch(self, seed, batch, size=BATCH_SIZE):
        """Batch ``batch`` of the stream ``seed`` as an array ``(size, n)``."""
        return self._draw(batch_generator(seed, batch), size)

    def sample(self, count, seed=0, batch_size=BATCH_SIZE):
        """``count`` draws from the counter-based stream ``seed``."""
        parts = [self.sample_batch(seed, b, size)
                 for b, size in enumerate(batch_sizes(count, batch_size))]
        return np.concatenate(parts, axis=0)

    def differential_entropy(self, j):
        """``h(X_j)`` in bits by adaptive quadrature."""
        m = self.marginal(j)

        def integrand(x):
            f = float(m.pdf(x))
            return -f * math.log2(f) if f > 0 else 0.0

        pts = [p for p in m.breakpoints() if 0 < p < 1][:50] or None
        val, err = quad(integrand, 0.0, 1.0, points=pts, limit=500,
                        epsabs=1e-12, epsrel=1e-12)
        if not np.isfinite(val) or err > 1e-6:
            raise NumericError(
                f"differential entropy of {m.name} did not converge (err={err:.2e})")
        return val

    def joint_differential_entropy(self):
        """``h(X_1, ..., X_n)`` in bits."""
        if self.independent:
            return sum(self.differential_entropy(j) for j in range(self.n))
        raise NotImplementedError

    def multiinformation(self):
        """``sum_j h(X_j) - h(X_1..X_n)`` in bits."""
        marg = sum(self.differential_entropy(j) for j in range(self.n))
        return marg - self.joint_differential_entropy()

    def is_uniform(self):
        return self.independent and all(
            isinstance(self.marginal(j), Uniform) for j in range(self.n))


class IndependentSource(SourceModel):
    """Product of ``n`` marginals."""

    independent = True

    def __init__(self, marginals):
        self.marginals = tuple(marginals)
        self.n = len(self.marginals)
        if self.n < 1:
            raise ConfigurationError("need at least one variable")

    @classmethod
    def iid(cls, marginal, n):
        return cls([marginal] * n)

    def marginal(self, j):
        return self.marginals[j]

    def joint_pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.ones(x.shape[0])
        for j, m in enumerate(self.marginals):
            out *= m.pdf(x[:, j])
        return out

    def _draw(self, rng, size):
        u = rng.random((size, self.n))
        cols = [m.ppf(u[:, j]) for j, m in enumerate(self.marginals)]
        return np.column_stack(cols)

    def __repr__(self):
        names = ", ".join(m.name for m in self.marginals)
        return f"IndependentSource([{names}])"


def uniform_source(n=1):
    return IndependentSource.iid(Uniform(), n)


class GridSource(SourceModel):
    """Piecewise-constant joint density on an ``m**n`` grid, ``n <= 3``.

    ``weights`` is an ``n``-dimensional array of nonnegative cell masses (it
    is normalized).  Marginals are exact histograms, so cell probabilities of
    any product partition follow from interval overlaps without sampling.
    """

    independent = False

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim < 1 or w.ndim > 3:
            raise ConfigurationError("grid sources support 1 <= n <= 3")
        if len(set(w.shape)) != 1:
            raise ConfigurationError("grid must have equal resolution per axis")
        if np.any(w < 0) or w.sum() <= 0:
            raise ConfigurationError("grid weights must be nonnegative")
        self.mass = w / w.sum()
        self.n = w.ndim
        self.m = w.shape[0]
        self._marginals = []
        for j in range(self.n):
            axes = tuple(a for a in range(self.n) if a != j)
            self._marginals.append(PiecewiseConstant(self.mass.sum(axis=axes)))
        self._flat_cum = np.cumsum(self.mass.ravel())
        self._flat_cum[-1] = 1.0

    def marginal(self, j):
        return self._marginals[j]

    def _cell(self, x):
        return np.clip((np.asarray(x, dtype=float) * self.m).astype(int), 0, self.m - 1)

    def joint_pdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = tuple(self._cell(x[:, j]) for j in range(self.n))
        return self.mass[idx] * self.m**self.n

    def _draw(self, rng, size):
        u = rng.random((size, self.n + 1))
        flat = np.searchsorted(self._flat_cum, u[:, 0], side="right")
        flat = np.minimum(flat, self.mass.size - 1)
        cells = np.unravel_index(flat, self.mass.shape)
        return np.column_stack([(cells[j] + u[:, j + 1]) / self.m for j in range(self.n)])

    def differential_entropy(self, j):
        p = self._marginals[j].mass
        return float(-np.sum(_quad.xlog2x(p)) - math.log2(self.m))

    def joint_differential_entropy(self):
        return float(-np.sum(_quad.xlog2x(self.mass)) - self.n * math.log2(self.m))

    def overlap_matrix(self, edges):
        """Fraction of each grid bin covered by each interval of ``edges``.

        Returns an array ``(len(edges) - 1, m)``; rows are partition cells.
        """
        edges = np.asarray(edges, dtype=float)
        g = np.linspace(0.0, 1.0, self.m + 1)
        lo = np.maximum(edges[:-1, None], g[None, :-1])
        hi = np.minimum(edges[1:, None], g[None, 1:])
        return np.clip(hi - lo, 0.0, None) * self.m

    def conditional_others(self, j, x, rng, size):
        """Draw ``size`` samples of all variables given ``X_j = x``.

        Column ``j`` of the result is set to ``x``.
        """
        c = int(self._cell(x))
        sl = np.take(self.mass, c, axis=j)
        total = sl.sum()
        out = np.empty((size, self.n))
        out[:, j] = x
        if total <= 0:
            out[:, [a for a in range(self.n) if a != j]] = rng.random((size, self.n - 1))
            return out
        cum = np.cumsum(sl.ravel() / total)
        cum[-1] = 1.0
        u = rng.random((size, self.n))
        flat = np.minimum(np.searchsorted(cum, u[:, 0], side="right"), sl.size - 1)
        cells = np.unravel_index(flat, sl.shape) if sl.ndim else ()
        others = [a for a in range(self.n) if a != j]
        for k, a in enumerate(others):
            out[:, a] = (cells[k] + u[:, k + 1]) / self.m
        return out


def source_from_spec(spec, n):
    """Build a source from the CLI config mapping."""
    kind = spec.get("kind")
    if kind in ("uniform", "power"):
        return IndependentSource.iid(marginal_from_spec(spec), n)
    if kind == "grid":
        w = np.asarray(spec["weights"], dtype=float)
        src = GridSource(w)
        if src.n != n:
            raise ConfigurationError(f"grid source has n={src.n}, function needs n={n}")
        return src
    raise ConfigurationError(f"unknown source kind {kind!r}")
