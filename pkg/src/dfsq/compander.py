"""Point densities, companders and companding scalar quantizers.

Cells follow the right-closed convention: cell ``i`` (0-based) is
``(b_i, b_{i+1}]`` and the point ``0`` belongs to cell 0.  Generalized
(piecewise-monotone) companders produce non-regular quantizers whose cells
are finite unions of intervals.
"""

import csv
import math

import numpy as np

from . import _quad
from .functions import DomainError
from .sources import NumericError, bisect_inverse

INVERSE_TOL = 1e-15
MAX_PIECES = 64


class ConstructionError(ValueError):
    """Raised when a compander or quantizer cannot be built as requested."""


class ResolutionError(ValueError):
    """Raised when a resolution is too small or a cell table too large."""


# -- point densities ---------------------------------------------------------


class PointDensity:
    """Normalized point density on [0, 1].

    ``func`` is any nonnegative vectorized callable; it is divided by its
    integral.  ``breakpoints`` lists interior discontinuities so that the
    compander integral can be split there.  ``w`` and ``w_inv`` may supply
    the compander in closed form (they must agree with ``func``).
    """

    def __init__(self, func, breakpoints=(), name="density", w=None, w_inv=None):
        self._func = func
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints if 0 < b < 1))
        self.name = name
        total = 0.0
        for a, b in zip((0.0,) + self.breakpoints, self.breakpoints + (1.0,)):
            total += _quad.integrate(lambda x: np.asarray(func(x), dtype=float), a, b)
        if not np.isfinite(total) or total <= 0:
            raise NumericError(f"point density {name!r} has no positive finite mass")
        self.total = total
        self.closed_w = w
        self.closed_w_inv = w_inv

    def __call__(self, x):
        return np.asarray(self._func(np.asarray(x, dtype=float)), dtype=float) / self.total

    pdf = __call__

    @classmethod
    def uniform(cls):
        return cls(lambda x: np.ones_like(x), name="uniform",
                   w=lambda x: np.clip(x, 0.0, 1.0), w_inv=lambda y: np.clip(y, 0.0, 1.0))

    @classmethod
    def power(cls, p):
        """Density ``(p+1) x**p`` with compander ``x**(p+1)``."""
        p = float(p)
        return cls(lambda x: (p + 1) * np.power(np.clip(x, 0.0, 1.0), p), name=f"power({p:g})",
                   w=lambda x: np.power(np.clip(x, 0.0, 1.0), p + 1),
                   w_inv=lambda y: np.power(np.clip(y, 0.0, 1.0), 1.0 / (p + 1)))

    @classmethod
    def from_grid(cls, grid, values, name="tabulated"):
        grid = np.asarray(grid, dtype=float)
        values = np.maximum(np.asarray(values, dtype=float), 0.0)
        return cls(lambda x: np.interp(x, grid, values), name=name)

    def integral_check(self):
        return sum(_quad.integrate(self, a, b) for a, b in
                   zip((0.0,) + self.breakpoints, self.breakpoints + (1.0,)))


# -- companders --------------------------------------------------------------


class Compander:
    """``w(x) = int_0^x lambda``, tabulated on the graded panel mesh.

    Evaluation adds a Gauss-Legendre integral over the partial panel.  The
    inverse is found by locating the panel and bisecting to ``INVERSE_TOL``;
    where ``w`` is flat the smallest preimage is returned.
    """

    def __init__(self, density, tol=INVERSE_TOL):
        self.density = density
        self.tol = tol
        edges = np.unique(np.concatenate([_quad.panel_edges(0.0, 1.0),
                                          np.asarray(density.breakpoints, float)]))
        steps = _quad.gl_interval(density, edges[:-1], edges[1:])
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        self._scale = cum[-1]
        self.edges = edges
        self.table = cum / cum[-1]

    def __call__(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.density.closed_w is not None:
            return np.asarray(self.density.closed_w(x), dtype=float)
        i = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.edges) - 2)
        part = _quad.gl_interval(self.density, self.edges[i], x) / self._scale
        return np.clip(self.table[i] + part, 0.0, 1.0)

    w = __call__

    def inverse(self, y):
        y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
        if self.density.closed_w_inv is not None:
            return np.asarray(self.density.closed_w_inv(y), dtype=float)
        i = np.clip(np.searchsorted(self.table, y, side="left") - 1, 0, len(self.edges) - 2)
        lo, hi = self.edges[i], self.edges[i + 1]
        x = bisect_inverse(self.__call__, y, lo, hi, tol=self.tol)
        return np.where(y <= 0.0, 0.0, np.where(y >= 1.0, 1.0, x))


def build_compander(density):
    return Compander(density)


# -- quantizers --------------------------------------------------------------


class CompandingQuantizer:
    """Regular quantizer ``Q_K(x) = w^{-1}(Q_K^U(w(x)))``.

    ``boundaries`` has ``K + 1`` entries from 0 to 1; ``codewords`` are the
    companded midpoints ``w^{-1}((2i - 1) / (2K))``.
    """

    regular = True

    def __init__(self, compander, K):
        K = int(K)
        if K < 1:
            raise ResolutionError("resolution K must be at least 1")
        self.compander = compander
        self.K = K
        levels = np.arange(K + 1) / K
        b = compander.inverse(levels)
        b[0], b[-1] = 0.0, 1.0
        if np.any(np.diff(b) < 0) or not np.all(np.isfinite(b)):
            raise NumericError("compander inversion produced non-monotone boundaries")
        self.boundaries = b
        self.codewords = compander.inverse((2 * np.arange(1, K + 1) - 1) / (2 * K))
        self.codeword_rule = "companded-midpoint"

    def quantize(self, x):
        """0-based index ``i`` with ``x`` in ``(b_i, b_{i+1}]``; 0 maps to cell 0."""
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
            raise DomainError("quantize expects inputs in [0, 1]")
        idx = np.searchsorted(self.boundaries, x, side="left") - 1
        return np.clip(idx, 0, self.K - 1)

    def reconstruct(self, index):
        return self.codewords[np.asarray(index)]

    def segments(self):
        """``(left, right, label)`` arrays describing every cell interval."""
        return self.boundaries[:-1].copy(), self.boundaries[1:].copy(), np.arange(self.K)

    def cell_lengths(self):
        return np.diff(self.boundaries)

    def rows(self):
        for i in range(self.K):
            yield i + 1, self.boundaries[i], self.boundaries[i + 1], self.codewords[i]


def build_quantizer(compander, K):
    return CompandingQuantizer(compander, K)


class NonRegularQuantizer:
    """Quantizer whose cells are unions of intervals.

    ``edges`` (increasing, from 0 to 1) split [0, 1] into segments and
    ``labels[s]`` names the cell of segment ``s``.  Labels are ``0..K-1``.
    ``codewords`` gives a representative point per cell.
    """

    regular = False

    def __init__(self, edges, labels, K, codewords=None, label_fn=None):
        self.edges = np.asarray(edges, dtype=float)
        self.labels = np.asarray(labels, dtype=int)
        self.K = int(K)
        if len(self.labels) != len(self.edges) - 1:
            raise ConstructionError("need one label per segment")
        self._label_fn = label_fn
        if codewords is None:
            codewords = np.full(self.K, np.nan)
            best = np.zeros(self.K)
            for s, lab in enumerate(self.labels):
                width = self.edges[s + 1] - self.edges[s]
                if width > best[lab]:
                    best[lab] = width
                    codewords[lab] = 0.5 * (self.edges[s] + self.edges[s + 1])
        self.codewords = np.asarray(codewords, dtype=float)
        self.codeword_rule = "segment-midpoint"

    def quantize(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
            raise DomainError("quantize expects inputs in [0, 1]")
        if self._label_fn is not None:
            return self._label_fn(x)
        s = np.clip(np.searchsorted(self.edges, x, side="left") - 1, 0, len(self.labels) - 1)
        return self.labels[s]

    def reconstruct(self, index):
        return self.codewords[np.asarray(index)]

    def segments(self):
        return self.edges[:-1].copy(), self.edges[1:].copy(), self.labels.copy()

    def cells(self):
        """List of interval lists, one per cell label."""
        out = [[] for _ in range(self.K)]
        for s, lab in enumerate(self.labels):
            out[lab].append((self.edges[s], self.edges[s + 1]))
        return out

    def rows(self):
        for s, lab in enumerate(self.labels):
            yield lab + 1, self.edges[s], self.edges[s + 1], self.codewords[lab]


def uniform_cell(y, K):
    """Right-closed uniform quantizer index of ``y`` in [0, 1] (0-based)."""
    y = np.asarray(y, dtype=float)
    return np.clip(np.ceil(y * K - 1e-12).astype(int) - 1, 0, K - 1)


class GeneralizedCompander:
    """Continuous piecewise-monotone map ``w: [0, 1] -> [0, 1]``.

    ``pieces`` is a list of ``(left, right, func)`` covering [0, 1] in order;
    each ``func`` is monotone on its interval.
    """

    def __init__(self, pieces, tol=1e-9):
        pieces = [(float(a), float(b), f) for a, b, f in pieces]
        if not 1 <= len(pieces) <= MAX_PIECES:
            raise ConstructionError(f"need between 1 and {MAX_PIECES} pieces")
        if pieces[0][0] != 0.0 or pieces[-1][1] != 1.0:
            raise ConstructionError("pieces must cover [0, 1]")
        for (a0, b0, f0), (a1, b1, f1) in zip(pieces, pieces[1:]):
            if b0 != a1:
                raise ConstructionError("pieces must be contiguous")
            if abs(float(f0(np.array(b0))) - float(f1(np.array(a1)))) > tol:
                raise ConstructionError(f"compander is discontinuous at x={b0:g}")
        self.increasing = []
        for a, b, f in pieces:
            fa, fb = float(f(np.array(a))), float(f(np.array(b)))
            if min(fa, fb) < -tol or max(fa, fb) > 1 + tol:
                raise ConstructionError("compander values must lie in [0, 1]")
            mid = np.linspace(a, b, 65)
            v = f(mid)
            inc = fb >= fa
            d = np.diff(v) if inc else -np.diff(v)
            if np.any(d < -tol):
                raise ConstructionError(f"piece on [{a:g}, {b:g}] is not monotone")
            self.increasing.append(inc)
        self.pieces = pieces

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for k, (a, b, f) in enumerate(self.pieces):
            sel = (x >= a) & (x <= b) if k == 0 else (x > a) & (x <= b)
            if np.any(sel):
                out[sel] = f(x[sel])
        return np.clip(out, 0.0, 1.0)

    @property
    def is_monotone(self):
        return len(self.pieces) == 1

    def preimages(self, levels):
        """Points where ``w`` crosses each level, per piece."""
        levels = np.asarray(levels, dtype=float)
        pts = []
        for (a, b, f), inc in zip(self.pieces, self.increasing):
            fa, fb = float(f(np.array(a))), float(f(np.array(b)))
            lo_v, hi_v = min(fa, fb), max(fa, fb)
            inside = levels[(levels > lo_v) & (levels < hi_v)]
            if inside.size == 0:
                continue
            g = f if inc else (lambda t, f=f: -f(t))
            tgt = inside if inc else -inside
            pts.append(bisect_inverse(g, tgt, a, b, tol=INVERSE_TOL))
        return np.concatenate(pts) if pts else np.empty(0)


def bin_map(gc, K):
    """Non-regular quantizer from uniformly quantizing ``w(x)`` with ``K`` cells.

    Two points share a cell exactly when their ``w`` values fall in the same
    uniform cell.
    """
    K = int(K)
    if K < 1:
        raise ResolutionError("resolution K must be at least 1")
    cuts = gc.preimages(np.arange(1, K) / K)
    joints = [p[1] for p in gc.pieces[:-1]]
    edges = np.unique(np.concatenate([[0.0, 1.0], cuts, joints]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    labels = uniform_cell(gc(mids), K)
    # merge neighbouring segments that share a label
    keep = np.concatenate([[True], labels[1:] != labels[:-1]])
    edges = np.concatenate([edges[:-1][keep], [1.0]])
    labels = labels[keep]
    codewords = np.full(K, np.nan)
    widths = np.diff(edges)
    for lab in range(K):
        sel = np.flatnonzero(labels == lab)
        if sel.size:
            s = sel[np.argmax(widths[sel])]
            codewords[lab] = 0.5 * (edges[s] + edges[s + 1])
    return NonRegularQuantizer(edges, labels, K, codewords,
                               label_fn=lambda x: uniform_cell(gc(x), K))


# -- distributed quantizers --------------------------------------------------


def resolutions(K, alpha):
    """Per-variable resolutions ``floor(K**alpha_j)`` (at least 1)."""
    alpha = np.asarray(alpha, dtype=float)
    return np.maximum(1, np.floor(np.power(float(K), alpha) + 1e-9).astype(np.int64))


class DistributedQuantizer:
    """``n`` scalar quantizers with fractional allocation ``alpha``."""

    def __init__(self, quantizers, alpha=None, K=None):
        self.quantizers = list(quantizers)
        self.n = len(self.quantizers)
        if alpha is None:
            ks = np.array([q.K for q in self.quantizers], dtype=float)
            total = float(np.sum(np.log(ks)))
            alpha = np.log(ks) / total if total > 0 else np.full(self.n, 1.0 / self.n)
            K = float(np.prod(ks))
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0) or abs(alpha.sum() - 1) > 1e-9:
            raise ConstructionError("fractional allocation must be positive and sum to 1")
        self.alpha = alpha
        self.K = K

    @classmethod
    def from_companders(cls, companders, alpha, K):
        ks = resolutions(K, alpha)
        return cls([CompandingQuantizer(c, k) for c, k in zip(companders, ks)], alpha, K)

    @property
    def resolutions(self):
        return np.array([q.K for q in self.quantizers])

    def quantize(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.column_stack([q.quantize(x[:, j]) for j, q in enumerate(self.quantizers)])

    def cell_count(self):
        return int(np.prod([float(q.K) for q in self.quantizers]))


def write_codebook(path, quantizer):
    """CSV with columns ``cell_index, left, right, codeword`` (1-based cells)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell_index", "left", "right", "codeword"])
        for i, a, b, c in quantizer.rows():
            w.writerow([i, fmt(a), fmt(b), fmt(c)])


def fmt(v):
    """17 significant digits, '.' decimal separator."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v) + 0.0  # folds -0.0 into 0.0
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"
