"""Functions of interest and their functional sensitivity profiles.

A :class:`FunctionModel` evaluates ``g`` on an ``(N, n)`` array of points and
returns partial derivatives (``NaN`` where undefined).  Built-in models may
also expose closed-form squared sensitivities and an analytic conditional
mean over product cells, which the distortion estimators use when present.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .rng import batch_generator
from .sources import ConfigurationError, GridSource, Uniform

CLAMP = 1e-12
DEFAULT_GRID = 1024


class DomainError(ValueError):
    """Raised for inputs outside an operation's domain."""


# -- base class --------------------------------------------------------------


class FunctionModel:
    """A function ``g: [0,1]^n -> R`` given with its partial derivatives."""

    name = "function"
    n = 1
    #: bound on ``|dg/dx_j|`` over the cube (assumption of bounded gradient)
    gradient_bound = math.inf

    def evaluate(self, x):
        raise NotImplementedError

    def partial(self, j, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(np.atleast_2d(np.asarray(x, dtype=float)))

    def sensitivity_sq(self, j, source):
        """Closed-form ``x -> gamma_j(x)**2`` for ``source``, or ``None``."""
        return None

    def conditional_sensitivity_sq(self, j, source, event, y):
        """Closed-form conditional squared sensitivity, or ``None``."""
        return None

    def breakpoints(self, j):
        """Values of ``x_j`` where ``g`` or its partials have kinks or jumps."""
        return ()

    def cell_mean(self, lo, hi, source):
        """Analytic ``E[g | X in cell]`` for ``(N, n)`` cell corners, or ``None``."""
        return None

    def partial_bounds(self, lo, hi, points=9):
        """``(inf |g_j|, sup |g_j|)`` per variable over the rectangle ``[lo, hi]``.

        The default evaluates the partials on a tensor grid and so returns an
        estimate; subclasses with exact bounds override it.  Returns
        ``(a, b, exact)``.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        axes = [np.linspace(lo[j], hi[j], points) for j in range(self.n)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        a = np.empty(self.n)
        b = np.empty(self.n)
        for j in range(self.n):
            d = np.abs(self.partial(j, mesh))
            d = d[np.isfinite(d)]
            a[j], b[j] = (d.min(), d.max()) if d.size else (np.nan, np.nan)
        return a, b, False

    def is_separable_linear(self):
        return False

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if n == 1 else x[None, :]
    if x.shape[-1] != n:
        raise DomainError(f"expected points with {n} coordinates, got shape {x.shape}")
    return x


# -- built-ins ---------------------------------------------------------------


class Linear(FunctionModel):
    """``g(x) = sum_j a_j x_j``."""

    def __init__(self, coefficients):
        self.a = np.asarray(coefficients, dtype=float).ravel()
        self.n = len(self.a)
        self.name = "linear"
        self.gradient_bound = float(np.max(np.abs(self.a)))

    def evaluate(self, x):
        return _as_points(x, self.n) @ self.a

    def partial(self, j, x):
        return np.full(_as_points(x, self.n).shape[0], self.a[j])

    def sensitivity_sq(self, j, source):
        a2 = self.a[j] ** 2
        return lambda x: np.full_like(np.asarray(x, dtype=float), a2)

    def conditional_sensitivity_sq(self, j, source, event, y):
        return self.sensitivity_sq(j, source)

    def partial_bounds(self, lo, hi, points=9):
        return np.abs(self.a), np.abs(self.a), True

    def is_separable_linear(self):
        return True


class Identity(Linear):
    def __init__(self):
        super().__init__([1.0])
        self.name = "identity"


class Square(FunctionModel):
    """``g(x) = x**2`` (univariate)."""

    name = "square"
    n = 1
    gradient_bound = 2.0

    def evaluate(self, x):
        return _as_points(x, 1)[:, 0] ** 2

    def partial(self, j, x):
        return 2.0 * _as_points(x, 1)[:, 0]

    def sensitivity_sq(self, j, source):
        return lambda x: 4.0 * np.asarray(x, dtype=float) ** 2

    def partial_bounds(self, lo, hi, points=9):
        return 2.0 * np.asarray(lo, float), 2.0 * np.asarray(hi, float), True


class MinClip(FunctionModel):
    """``g(x) = min(x, 1/2)``: constant on the don't-care interval [1/2, 1]."""

    name = "min_clip"
    n = 1
    gradient_bound = 1.0

    def evaluate(self, x):
        return np.minimum(_as_points(x, 1)[:, 0], 0.5)

    def partial(self, j, x):
        t = _as_points(x, 1)[:, 0]
        return np.where(t < 0.5, 1.0, np.where(t > 0.5, 0.0, np.nan))

    def sensitivity_sq(self, j, source):
        return lambda x: (np.asarray(x, dtype=float) < 0.5).astype(float)

    def breakpoints(self, j):
        return (0.5,)


class Tent(FunctionModel):
    """``g(x) = |2x - 1|``; ``s`` and ``1 - s`` are functionally equivalent."""

    name = "tent"
    n = 1
    gradient_bound = 2.0

    def evaluate(self, x):
        return np.abs(2.0 * _as_points(x, 1)[:, 0] - 1.0)

    def partial(self, j, x):
        t = _as_points(x, 1)[:, 0]
        return np.where(t == 0.5, np.nan, 2.0 * np.sign(2.0 * t - 1.0))

    def sensitivity_sq(self, j, source):
        return lambda x: np.full_like(np.asarray(x, dtype=float), 4.0)

    def breakpoints(self, j):
        return (0.5,)


class SepParabola(FunctionModel):
    """``g(x1, x2) = x1 (3/4 - x1) (1 - x2)``.

    Values ``x1`` and ``3/4 - x1`` always give the same ``g``.
    """

    name = "sep_parabola"
    n = 2
    gradient_bound = 0.75

    def evaluate(self, x):
        x = _as_points(x, 2)
        return x[:, 0] * (0.75 - x[:, 0]) * (1.0 - x[:, 1])

    def partial(self, j, x):
        x = _as_points(x, 2)
        if j == 0:
            return (0.75 - 2.0 * x[:, 0]) * (1.0 - x[:, 1])
        return -x[:, 0] * (0.75 - x[:, 0])

    def sensitivity_sq(self, j, source):
        if not source.is_uniform():
            return None
        if j == 0:
            # E[(1 - X2)^2] = 1/3
            return lambda x: (0.75 - 2.0 * np.asarray(x, dtype=float)) ** 2 / 3.0
        # E[(X1 (3/4 - X1))^2] = 9/48 - 3/8 + 1/5 = 1/80
        return lambda x: np.full_like(np.asarray(x, dtype=float), 1.0 / 80.0)


class OrderStatistic(FunctionModel):
    """``k``-th smallest of ``n`` variables (1-based ``k``).

    ``partial(j)`` is the indicator that ``x_j`` is the selected order
    statistic.  For independent sources the squared sensitivity is the
    probability that exactly ``k - 1`` of the other variables fall below
    ``x``, a Poisson-binomial probability.
    """

    gradient_bound = 1.0

    def __init__(self, n, k, name=None):
        if not 1 <= k <= n:
            raise ConfigurationError("order statistic index out of range")
        self.n = int(n)
        self.k = int(k)
        self.name = name or f"order({k}/{n})"

    def evaluate(self, x):
        x = _as_points(x, self.n)
        if self.k == self.n:
            return x.max(axis=1)
        if self.k == 1:
            return x.min(axis=1)
        return np.partition(x, self.k - 1, axis=1)[:, self.k - 1]

    def partial(self, j, x):
        x = _as_points(x, self.n)
        return (self.evaluate(x) == x[:, j]).astype(float)

    def sensitivity_sq(self, j, source):
        if not source.independent:
            return None
        others = [source.marginal(i) for i in range(self.n) if i != j]
        m, below = len(others), self.k - 1
        if m == 0:
            return lambda x: np.ones_like(np.asarray(x, dtype=float))
        if all(o is others[0] for o in others):
            # identical marginals: binomial probability
            cdf = others[0].cdf
            coef = math.comb(m, below)
            return lambda x: coef * cdf(x) ** below * (1.0 - cdf(x)) ** (m - below)

        def gsq(x):
            x = np.asarray(x, dtype=float)
            cdfs = np.stack([o.cdf(x) for o in others], axis=-1)
            return poisson_binomial(cdfs, below)

        return gsq

    def conditional_sensitivity_sq(self, j, source, event, y):
        if not source.independent:
            return None
        others = []
        for i in range(self.n):
            if i == j:
                continue
            m = source.marginal(i)
            others.append(_truncated_cdf(m, event, y) if i == event.k else m.cdf)

        def gsq(x):
            x = np.asarray(x, dtype=float)
            cdfs = np.stack([c(x) for c in others], axis=-1)
            return poisson_binomial(cdfs, self.k - 1)

        return gsq

    def partial_bounds(self, lo, hi, points=9):
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        a = np.zeros(self.n)
        b = np.zeros(self.n)
        for j in range(self.n):
            # x_j is surely / possibly the k-th smallest on the rectangle
            below_sure = np.sum(np.delete(hi, j) <= lo[j])
            below_maybe = np.sum(np.delete(lo, j) < hi[j])
            possible = below_sure <= self.k - 1 <= below_maybe
            certain = below_sure == below_maybe == self.k - 1
            a[j] = 1.0 if certain else 0.0
            b[j] = 1.0 if possible else 0.0
        return a, b, True

    def cell_mean(self, lo, hi, source):
        if not source.independent:
            return None
        return order_statistic_cell_mean(lo, hi, source, self.k)


def Max(n):
    return OrderStatistic(n, n, name="max")


def Median(n):
    if n % 2 != 1:
        raise ConfigurationError("median needs odd n")
    return OrderStatistic(n, (n + 1) // 2, name="median")


class Quadrant(FunctionModel):
    """Two-variable function whose ``x1`` slope depends on the quadrant.

    ``dg/dx2 = 1`` everywhere.  ``dg/dx1`` is 1 on the quadrants
    ``{x1 <= 1/2, x2 > 1/2}`` and ``{x1 > 1/2, x2 <= 1/2}`` and ``L``
    elsewhere.  Integrating with ``g(0, 0) = 0`` gives a function that jumps
    across the line ``x2 = 1/2``.
    """

    n = 2

    def __init__(self, L=16.0):
        self.L = float(L)
        if self.L <= 0:
            raise ConfigurationError("quadrant slope L must be positive")
        self.name = f"quadrant({self.L:g})"
        self.gradient_bound = max(1.0, self.L)

    def _slopes(self, x2):
        """(slope on x1 <= 1/2, slope on x1 > 1/2) for each x2."""
        low = x2 <= 0.5
        return np.where(low, self.L, 1.0), np.where(low, 1.0, self.L)

    def evaluate(self, x):
        x = _as_points(x, 2)
        s_left, s_right = self._slopes(x[:, 1])
        x1 = x[:, 0]
        g1 = np.where(x1 <= 0.5, s_left * x1, 0.5 * s_left + s_right * (x1 - 0.5))
        return x[:, 1] + g1

    def partial(self, j, x):
        x = _as_points(x, 2)
        if j == 1:
            return np.where(x[:, 1] == 0.5, np.nan, 1.0)
        s_left, s_right = self._slopes(x[:, 1])
        out = np.where(x[:, 0] <= 0.5, s_left, s_right)
        return np.where(x[:, 0] == 0.5, np.nan, out)

    def sensitivity_sq(self, j, source):
        if not source.is_uniform():
            return None
        if j == 1:
            return lambda x: np.ones_like(np.asarray(x, dtype=float))
        val = 0.5 * (self.L**2 + 1.0)
        return lambda x: np.full_like(np.asarray(x, dtype=float), val)

    def conditional_sensitivity_sq(self, j, source, event, y):
        if j != 0 or event.k != 1 or event.threshold != 0.5 or not source.is_uniform():
            return None
        L2 = self.L**2
        # y = 1 means X2 <= 1/2
        left, right = (L2, 1.0) if y == 1 else (1.0, L2)
        return lambda x: np.where(np.asarray(x, dtype=float) <= 0.5, left, right)

    def breakpoints(self, j):
        return (0.5,)


class SlopeGrid(FunctionModel):
    """Two-variable function with a piecewise-constant ``x1`` slope.

    ``slopes[r, c]`` is ``dg/dx1`` on the grid cell with ``x2`` in row ``r``
    and ``x1`` in column ``c`` (equal-width rows and columns); ``dg/dx2 = 1``.
    With ``g(0, x2) = x2`` the function can jump across row boundaries.
    """

    n = 2

    def __init__(self, slopes, name="slope_grid"):
        S = np.atleast_2d(np.asarray(slopes, dtype=float))
        if np.any(S < 0):
            raise ConfigurationError("slopes must be nonnegative")
        self.S = S
        self.rows, self.cols = S.shape
        self.name = name
        self.gradient_bound = float(max(1.0, S.max()))
        self._cum = np.concatenate([np.zeros((self.rows, 1)),
                                    np.cumsum(S, axis=1) / self.cols], axis=1)

    def _row(self, x2):
        return np.clip(np.ceil(np.asarray(x2) * self.rows).astype(int) - 1, 0, self.rows - 1)

    def _col(self, x1):
        return np.clip((np.asarray(x1) * self.cols).astype(int), 0, self.cols - 1)

    def evaluate(self, x):
        x = _as_points(x, 2)
        r = self._row(x[:, 1])
        c = self._col(x[:, 0])
        return x[:, 1] + self._cum[r, c] + self.S[r, c] * (x[:, 0] - c / self.cols)

    def partial(self, j, x):
        x = _as_points(x, 2)
        if j == 1:
            return np.ones(x.shape[0])
        return self.S[self._row(x[:, 1]), self._col(x[:, 0])]

    def breakpoints(self, j):
        k = self.cols if j == 0 else self.rows
        return tuple(np.arange(1, k) / k)

    def _row_weights(self, lo, hi):
        edges = np.linspace(0.0, 1.0, self.rows + 1)
        w = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
        return w / w.sum()

    def sensitivity_sq(self, j, source):
        if not source.is_uniform():
            return None
        if j == 1:
            return lambda x: np.ones_like(np.asarray(x, dtype=float))
        col_sq = (self.S**2).mean(axis=0)
        return lambda x: col_sq[self._col(x)]

    def conditional_sensitivity_sq(self, j, source, event, y):
        if j != 0 or event.k != 1 or not source.is_uniform():
            return None
        lo, hi = (0.0, event.threshold) if y == 1 else (event.threshold, 1.0)
        col_sq = self._row_weights(lo, hi) @ self.S**2
        return lambda x: col_sq[self._col(x)]


def poisson_binomial(p, k):
    """Probability that exactly ``k`` of independent events occur.

    ``p`` has the event probabilities along its last axis.
    """
    p = np.asarray(p, dtype=float)
    m = p.shape[-1]
    if k < 0 or k > m:
        return np.zeros(p.shape[:-1])
    dist = np.zeros(p.shape[:-1] + (m + 1,))
    dist[..., 0] = 1.0
    for i in range(m):
        pi = p[..., i, None]
        shifted = np.concatenate([np.zeros_like(dist[..., :1]), dist[..., :-1]], axis=-1)
        dist = dist * (1.0 - pi) + shifted * pi
    return dist[..., k]


def _poisson_binomial_below(p, k):
    """Probability that fewer than ``k`` events occur; ``k`` may vary per row.

    ``p`` has shape ``(..., m)`` and ``k`` broadcasts against ``p[..., 0]``.
    """
    m = p.shape[-1]
    dist = np.zeros(p.shape[:-1] + (m + 1,))
    dist[..., 0] = 1.0
    for i in range(m):
        pi = p[..., i, None]
        shifted = np.concatenate([np.zeros_like(dist[..., :1]), dist[..., :-1]], axis=-1)
        dist = dist * (1.0 - pi) + shifted * pi
    csum = np.cumsum(dist, axis=-1)
    k = np.asarray(k)
    idx = np.clip(k - 1, -1, m)
    out = np.take_along_axis(csum, np.maximum(idx, 0)[..., None], axis=-1)[..., 0]
    return np.where(idx < 0, 0.0, out)


def order_statistic_cell_mean(lo, hi, source, k, chunk=4096):
    """``E[X_(k) | X in prod_j (lo_j, hi_j]]`` for independent sources.

    Uses ``E[X_(k)] = a + int_a^b P(X_(k) > t) dt`` on ``[a, b]``, the
    range of the ``k``-th smallest corner.  Variables whose cell lies
    entirely below ``a`` or above ``b`` are resolved exactly; the rest enter
    a Poisson-binomial recursion, and the ``t`` integral is split at every
    cell edge so each piece is smooth.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    n = lo.shape[1]
    out = np.empty(lo.shape[0])
    margs = [source.marginal(j) for j in range(n)]
    for start in range(0, lo.shape[0], chunk):
        sl = slice(start, start + chunk)
        out[sl] = _os_chunk(lo[sl], hi[sl], margs, k)
    return out


def _single_mean(lo, hi, idx, margs):
    """``E[X_idx | lo < X_idx <= hi]`` row by row."""
    out = np.empty(lo.size)
    for j, m in enumerate(margs):
        sel = idx == j
        if not np.any(sel):
            continue
        a, b = lo[sel], hi[sel]
        num = _quad.gl_interval(lambda t: t * m.pdf(t), a, b)
        den = _quad.gl_interval(m.pdf, a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[sel] = np.where(den > 0, num / den, 0.5 * (a + b))
    return out


def _os_chunk(lo, hi, margs, k):
    N, n = lo.shape
    a = np.sort(lo, axis=1)[:, k - 1]
    b = np.sort(hi, axis=1)[:, k - 1]
    below = hi <= a[:, None]
    above = lo >= b[:, None]
    unc = ~(below | above)
    count = unc.sum(axis=1)
    single = count == 1
    if np.any(single):
        # the selected order statistic is the one uncertain variable
        out = np.empty(N)
        idx = np.argmax(unc[single], axis=1)
        rows = np.flatnonzero(single)
        out[rows] = _single_mean(lo[rows, idx], hi[rows, idx], idx, margs)
        rest = np.flatnonzero(~single)
        if rest.size:
            out[rest] = _os_chunk(lo[rest], hi[rest], margs, k)
        return out
    kk = k - below.sum(axis=1)
    u = int(count.max())
    # gather uncertain variables; pad with cells that sit surely above
    order = np.argsort(~unc, axis=1, kind="stable")[:, :u]
    ulo = np.take_along_axis(lo, order, axis=1)
    uhi = np.take_along_axis(hi, order, axis=1)
    valid = np.take_along_axis(unc, order, axis=1)
    # conditional cdf parameters per gathered variable
    Flo = np.empty((N, u))
    Fhi = np.empty((N, u))
    for c in range(u):
        idx = order[:, c]
        for j, m in enumerate(margs):
            sel = idx == j
            if np.any(sel):
                Flo[sel, c] = m.cdf(ulo[sel, c])
                Fhi[sel, c] = m.cdf(uhi[sel, c])
    mass = Fhi - Flo
    # split points: all uncertain edges clipped to [a, b]
    pts = np.concatenate([ulo, uhi], axis=1)
    pts = np.where(np.concatenate([valid, valid], axis=1), pts, a[:, None])
    pts = np.clip(pts, a[:, None], b[:, None])
    pts = np.sort(np.concatenate([a[:, None], pts, b[:, None]], axis=1), axis=1)
    seg_lo, seg_hi = pts[:, :-1], pts[:, 1:]
    t = 0.5 * (seg_lo + seg_hi)[..., None] + 0.5 * (seg_hi - seg_lo)[..., None] * _quad.GL_NODES
    wts = 0.5 * (seg_hi - seg_lo)[..., None] * _quad.GL_WEIGHTS
    tt = t.reshape(N, -1)
    p = np.empty(tt.shape + (u,))
    for c in range(u):
        idx = order[:, c]
        Fc = np.empty_like(tt)
        for j, m in enumerate(margs):
            sel = idx == j
            if np.any(sel):
                Fc[sel] = m.cdf(tt[sel])
        with np.errstate(invalid="ignore", divide="ignore"):
            q = (Fc - Flo[:, c, None]) / mass[:, c, None]
        degenerate = mass[:, c] <= 0
        if np.any(degenerate):
            q[degenerate] = (tt[degenerate] >= 0.5 * (ulo[degenerate, c] + uhi[degenerate, c])[:, None])
        q = np.clip(q, 0.0, 1.0)
        q = np.where(valid[:, c, None], q, 0.0)
        p[..., c] = q
    surv = _poisson_binomial_below(p, kk[:, None])
    integral = (surv.reshape(wts.shape) * wts).sum(axis=(1, 2))
    return a + integral


# -- registry ----------------------------------------------------------------


def function_from_spec(spec):
    """Build a built-in function from ``{"name": ..., ...}``."""
    name = spec.get("name")
    if name == "linear":
        return Linear(spec["coefficients"])
    if name == "identity":
        return Identity()
    if name == "square":
        return Square()
    if name == "max":
        return Max(int(spec["n"]))
    if name == "median":
        return Median(int(spec["n"]))
    if name == "min_clip":
        return MinClip()
    if name == "quadrant":
        return Quadrant(float(spec.get("L", 16)))
    if name == "sep_parabola":
        return SepParabola()
    if name == "tent":
        return Tent()
    raise ConfigurationError(f"unknown function {name!r}")


FUNCTION_NAMES = ("linear", "identity", "square", "max", "median", "min_clip",
                  "quadrant", "sep_parabola", "tent")


# -- sensitivity profiles ----------------------------------------------------


@dataclass(frozen=True)
class ThresholdEvent:
    """Binary event ``Y = 1{X_k <= threshold}`` on a companion variable."""

    k: int
    threshold: float

    def probability(self, source, y):
        p1 = float(source.marginal_cdf(self.k, self.threshold))
        return p1 if y == 1 else 1.0 - p1

    def indicator(self, x):
        return (np.asarray(x)[:, self.k] <= self.threshold).astype(int)


def _truncated_cdf(marginal, event, y):
    """cdf of a marginal conditioned on the side ``y`` of ``event``."""
    c = float(marginal.cdf(event.threshold))

    def cdf(x):
        F = marginal.cdf(x)
        if y == 1:
            return np.clip(F / c, 0.0, 1.0)
        return np.clip((F - c) / (1.0 - c), 0.0, 1.0)

    return cdf


def _truncated_ppf(marginal, event, y, u):
    c = float(marginal.cdf(event.threshold))
    if y == 1:
        return marginal.ppf(u * c)
    return marginal.ppf(c + u * (1.0 - c))


@dataclass
class SensitivityProfile:
    """Tabulated functional sensitivity profile ``gamma_j`` on [0, 1].

    ``values`` and ``stderr`` live on ``grid``; evaluation interpolates
    linearly, unless an exact callable is attached.
    """

    j: int
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    exact_sq: object = None
    sq_stderr: np.ndarray = None
    notes: list = field(default_factory=list)

    def sq(self, x):
        """``gamma_j(x)**2``."""
        x = np.asarray(x, dtype=float)
        if self.exact_sq is not None:
            return np.maximum(np.asarray(self.exact_sq(x), dtype=float), 0.0)
        return np.interp(x, self.grid, self.values) ** 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.exact_sq is not None:
            return np.sqrt(self.sq(x))
        return np.interp(x, self.grid, self.values)

    @property
    def is_exact(self):
        return self.exact_sq is not None

    def zero_mask(self):
        return self.values == 0.0


def _fill_undefined(grid, sq, sq_err):
    """Interpolate grid points where no draw had a defined partial."""
    sq = np.asarray(sq, dtype=float).copy()
    sq_err = np.asarray(sq_err, dtype=float).copy()
    bad = ~np.isfinite(sq)
    if np.any(bad) and not np.all(bad):
        sq[bad] = np.interp(grid[bad], grid[~bad], sq[~bad])
        ok = np.isfinite(sq_err)
        sq_err[~ok] = np.interp(grid[~ok], grid[ok], sq_err[ok]) if np.any(ok) else 0.0
    return sq, sq_err


def _profile_from_sq(j, grid, sq, sq_err, exact=None, notes=None):
    sq, sq_err = _fill_undefined(grid, sq, sq_err)
    sq = np.maximum(sq, 0.0)
    vals = np.sqrt(sq)
    vals = np.where(vals < CLAMP, 0.0, vals)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(vals > 0, sq_err / (2.0 * vals), np.sqrt(sq_err))
    return SensitivityProfile(j, grid, vals, err, exact, sq_err, notes or [])


def _mc_sq(g, j, grid, others, min_count=2):
    """Mean and standard error of ``g_j**2`` at each grid point."""
    mean = np.empty(grid.size)
    err = np.empty(grid.size)
    pts = others.copy()
    for i, x in enumerate(grid):
        pts[:, j] = x
        d2 = g.partial(j, pts) ** 2
        d2 = d2[np.isfinite(d2)]
        if d2.size < min_count:
            mean[i], err[i] = np.nan, np.inf
            continue
        mean[i] = d2.mean()
        err[i] = d2.std(ddof=1) / math.sqrt(d2.size)
    return mean, err


def sensitivity_profile(g, source, j, grid_size=DEFAULT_GRID, mc_samples=4096,
                        seed=0, use_closed_form=True, tolerance=None):
    """Functional sensitivity profile ``gamma_j(x) = sqrt(E[g_j^2 | X_j = x])``.

    ``grid_size`` counts intervals, so the table holds ``grid_size + 1``
    nodes including both endpoints.  A closed form is used when the model
    provides one for this source; otherwise the conditional expectation is
    estimated by Monte Carlo with one block of the other coordinates shared
    by every grid point.  Dependent (grid) sources are sliced conditionally
    per grid point.
    """
    if not 0 <= j < g.n or g.n != source.n:
        raise DomainError("variable index or dimension mismatch")
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    notes = []
    exact = g.sensitivity_sq(j, source) if use_closed_form else None
    if exact is not None:
        sq = exact(grid)
        return _profile_from_sq(j, grid, sq, np.zeros_like(grid), exact, notes)
    if g.n == 1:
        # no other variables: the conditional expectation is a point value
        d2 = g.partial(0, grid[:, None]) ** 2
        bad = ~np.isfinite(d2)
        if np.any(bad):
            # undefined points: use the average of one-sided neighbours
            eps = 1e-9
            left = g.partial(0, np.clip(grid[bad] - eps, 0, 1)[:, None]) ** 2
            right = g.partial(0, np.clip(grid[bad] + eps, 0, 1)[:, None]) ** 2
            d2[bad] = np.nanmean(np.stack([left, right]), axis=0)
        return _profile_from_sq(j, grid, d2, np.zeros_like(grid), None, notes)
    if source.independent:
        others = source.sample(mc_samples, seed)
        sq, err = _mc_sq(g, j, grid, others)
    else:
        if not isinstance(source, GridSource):
            raise ConfigurationError("dependent sources need a GridSource for slicing")
        notes.append("experimental: dependent-source profile by conditional slicing")
        sq = np.empty(grid.size)
        err = np.empty(grid.size)
        for i, x in enumerate(grid):
            pts = source.conditional_others(j, x, batch_generator(seed, i), mc_samples)
            d2 = g.partial(j, pts) ** 2
            d2 = d2[np.isfinite(d2)]
            sq[i] = d2.mean()
            err[i] = d2.std(ddof=1) / math.sqrt(d2.size)
    if tolerance is not None and np.nanmax(err) > tolerance:
        notes.append(f"warning: max stderr {np.nanmax(err):.3g} exceeds tolerance {tolerance:.3g}")
    return _profile_from_sq(j, grid, sq, err, None, notes)


def conditional_sensitivity_profile(g, source, j, event, y, grid_size=DEFAULT_GRID,
                                    mc_samples=4096, seed=0, use_closed_form=True):
    """Profile of ``g_j`` conditioned on ``X_j = x`` and ``Y = y``.

    ``Y`` must depend only on a companion variable ``event.k != j``; the
    companion is drawn from its distribution truncated to the branch ``y``.
    """
    if event.k == j:
        raise DomainError("the event must be defined on another variable")
    if not source.independent:
        raise ConfigurationError("conditional profiles need independent sources")
    if event.probability(source, y) <= 0:
        raise DomainError(f"P(Y={y}) is zero")
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    exact = g.conditional_sensitivity_sq(j, source, event, y) if use_closed_form else None
    if exact is not None:
        return _profile_from_sq(j, grid, exact(grid), np.zeros_like(grid), exact)
    others = source.sample(mc_samples, seed)
    u = batch_generator(seed, 2**31 - 1).random(mc_samples)
    others[:, event.k] = _truncated_ppf(source.marginal(event.k), event, y, u)
    sq, err = _mc_sq(g, j, grid, others)
    return _profile_from_sq(j, grid, sq, err)


def uniform_profile_like(profile, value=1.0):
    """Constant profile on the same grid (used for ordinary designs)."""
    val = float(value)
    return SensitivityProfile(profile.j, profile.grid, np.full_like(profile.grid, val),
                              np.zeros_like(profile.grid),
                              lambda x: np.full_like(np.asarray(x, float), val**2))


def constant_profile(j, value=1.0, grid_size=DEFAULT_GRID):
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    val = float(value)
    return SensitivityProfile(j, grid, np.full_like(grid, val), np.zeros_like(grid),
                              lambda x: np.full_like(np.asarray(x, float), val**2))


def is_uniform_marginal(source, j):
    return isinstance(source.marginal(j), Uniform)
