"""Predicted and empirical functional distortion.

The empirical distortion is the Monte Carlo mean of ``(g(X) - ghat(Q(X)))^2``
where ``ghat`` is the conditional mean of ``g`` over the product cell.
Conditional means are computed lazily for the cells that samples actually
visit, so product partitions far too large to enumerate are fine.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .design import _pieces, expect, hr_distortion_rate  # noqa: F401  (re-export)
from .rng import BATCH_SIZE, batch_sizes, default_workers
from .sources import NumericError

MIN_HITS = 8
MODES = ("auto", "analytic", "numeric", "monte-carlo", "midpoint")


# -- predictions -------------------------------------------------------------


def sensitivity_term(profile, density, source, j, breaks=()):
    """``E[(gamma_j(X_j) / lambda_j(X_j))^2]`` (0/0 counts as 0)."""
    def ratio(x):
        s = profile.sq(x)
        lam = density(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = s / lam**2
        return np.where(s > 0, r, 0.0)

    br = tuple(breaks) + tuple(density.breakpoints)
    val = expect(ratio, source, j, br)
    if not np.isfinite(val):
        raise NumericError(f"E[(gamma/lambda)^2] diverges for variable {j}")
    return val


def hr_distortion_resolution(profiles, densities, alpha, K, source, breaks=None):
    """``sum_j E[(gamma_j / lambda_j)^2] / (12 K^{2 alpha_j})``."""
    alpha = np.asarray(alpha, dtype=float)
    total = 0.0
    for j, (p, lam) in enumerate(zip(profiles, densities)):
        br = () if breaks is None else breaks[j]
        total += sensitivity_term(p, lam, source, j, br) / (12.0 * float(K) ** (2 * alpha[j]))
    return total


def hr_distortion_resolutions(profiles, densities, ks, source, breaks=None):
    """Same prediction evaluated at the integer per-variable resolutions ``ks``."""
    total = 0.0
    for j, (p, lam, k) in enumerate(zip(profiles, densities, ks)):
        br = () if breaks is None else breaks[j]
        total += sensitivity_term(p, lam, source, j, br) / (12.0 * float(k) ** 2)
    return total


def functional_constant(regime, profile, density, source, j, breaks=()):
    """Constant ``C`` with ``D^HR(lambda) = C 2^{-2R} / 12`` for an arbitrary density.

    Fixed rate uses ``K = 2^R``; variable rate uses ``log2 K = R - h - E log2 lambda``.
    """
    term = sensitivity_term(profile, density, source, j, breaks)
    if regime == "fixed":
        return term
    from .design import expected_log2

    elog = expected_log2(density, source, j, tuple(breaks) + tuple(density.breakpoints))
    return term * 2.0 ** (2 * source.differential_entropy(j) + 2 * elog)


# -- estimator tables --------------------------------------------------------


def _node_rule(q, source, j, breaks):
    """Padded GL nodes and weights per cell label of quantizer ``q``.

    Each cell segment is split at ``breaks`` and at the marginal's
    breakpoints.  Returns ``(nodes, weights)`` of shape ``(K, P)`` where the
    weights include the marginal density.
    """
    left, right, labels = q.segments()
    pts = np.unique(np.asarray(list(breaks) + list(source.marginal(j).breakpoints()), float))
    lo_list, hi_list, lab_list = [], [], []
    for a, b, lab in zip(left, right, labels):
        inner = pts[(pts > a) & (pts < b)]
        e = np.concatenate([[a], inner, [b]])
        lo_list.append(e[:-1])
        hi_list.append(e[1:])
        lab_list.append(np.full(len(e) - 1, lab))
    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    lab = np.concatenate(lab_list)
    counts = np.bincount(lab, minlength=q.K)
    P = int(counts.max())
    order = np.argsort(lab, kind="stable")
    lo, hi, lab = lo[order], hi[order], lab[order]
    slot = np.arange(lab.size) - np.repeat(np.cumsum(counts) - counts, counts)
    x = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * _quad.GL_NODES
    w = 0.5 * (hi - lo)[:, None] * _quad.GL_WEIGHTS
    nodes = np.zeros((q.K, P, _quad.GL_ORDER))
    weights = np.zeros((q.K, P, _quad.GL_ORDER))
    nodes[lab, slot] = x
    weights[lab, slot] = w
    return nodes.reshape(q.K, -1), weights.reshape(q.K, -1)


class EstimatorTable:
    """Conditional means ``ghat`` over product cells, computed on demand.

    ``mode`` is one of ``auto``, ``analytic``, ``numeric`` (tensor
    Gauss-Legendre, ``n <= 3``), ``monte-carlo`` (training sample, with a
    midpoint fallback below ``MIN_HITS`` hits) or ``midpoint`` (``g`` at the
    cell codewords).  ``flags`` counts cells that fell back to the midpoint.
    """

    def __init__(self, dq, source, g, mode="auto", train_samples=2**20, seed=1):
        if mode not in MODES:
            raise ValueError(f"unknown estimator mode {mode!r}")
        self.dq, self.source, self.g = dq, source, g
        self.n = dq.n
        if mode == "auto":
            mode = self._auto_mode()
        self.mode = mode
        self._lock = threading.Lock()
        self._cache = {}
        self.flagged = 0
        self.stderr = {}
        if mode == "numeric":
            if self.n > 3:
                raise ValueError("numeric estimator supports n <= 3")
            self._rules = []
            for j, q in enumerate(dq.quantizers):
                nodes, w = _node_rule(q, source, j, g.breakpoints(j))
                if source.independent:
                    w = w * source.marginal(j).pdf(nodes)
                self._rules.append((nodes, w))
        elif mode == "analytic" and g.is_separable_linear():
            self._rules = []
            self._means = []
            for j, q in enumerate(dq.quantizers):
                nodes, w = _node_rule(q, source, j, ())
                w = w * source.marginal(j).pdf(nodes)
                mass = w.sum(axis=1)
                with np.errstate(invalid="ignore", divide="ignore"):
                    m = (w * nodes).sum(axis=1) / mass
                m = np.where(mass > 0, m, q.codewords)
                self._means.append(m)
        elif mode == "monte-carlo":
            self._train(train_samples, seed)

    def _auto_mode(self):
        if self.g.is_separable_linear() and self.source.independent:
            return "analytic"
        probe = self._analytic_available()
        if probe:
            return "analytic"
        if self.n <= 3:
            return "numeric"
        return "monte-carlo"

    def _analytic_available(self):
        if not all(q.regular for q in self.dq.quantizers):
            return False
        lo = np.zeros((1, self.n))
        hi = np.ones((1, self.n))
        return self.g.cell_mean(lo, hi, self.source) is not None

    # -- per-mode evaluators ---------------------------------------------------

    def _corners(self, cells):
        lo = np.empty(cells.shape)
        hi = np.empty(cells.shape)
        for j, q in enumerate(self.dq.quantizers):
            lo[:, j] = q.boundaries[cells[:, j]]
            hi[:, j] = q.boundaries[cells[:, j] + 1]
        return lo, hi

    def _midpoint(self, cells):
        pts = np.column_stack([q.codewords[cells[:, j]] for j, q in enumerate(self.dq.quantizers)])
        return self.g.evaluate(pts)

    def _numeric(self, cells, chunk=2048):
        out = np.empty(cells.shape[0])
        empty = np.zeros(cells.shape[0], dtype=bool)
        for s in range(0, cells.shape[0], chunk):
            c = cells[s:s + chunk]
            xs = [self._rules[j][0][c[:, j]] for j in range(self.n)]
            ws = [self._rules[j][1][c[:, j]] for j in range(self.n)]
            grids = np.meshgrid(*[np.arange(x.shape[1]) for x in xs], indexing="ij")
            pts = np.stack([xs[j][:, grids[j].ravel()] for j in range(self.n)], axis=-1)
            wt = np.ones(pts.shape[:2])
            for j in range(self.n):
                wt = wt * ws[j][:, grids[j].ravel()]
            flat = pts.reshape(-1, self.n)
            if not self.source.independent:
                wt = wt * self.source.joint_pdf(flat).reshape(wt.shape)
            gv = self.g.evaluate(flat).reshape(wt.shape)
            mass = wt.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                out[s:s + chunk] = (wt * gv).sum(axis=1) / mass
            empty[s:s + chunk] = ~(mass > 0)
        if np.any(empty):
            out[empty] = self._midpoint(cells[empty])
            self.flagged += int(empty.sum())
        return out

    def _analytic(self, cells):
        if self.g.is_separable_linear():
            return sum(self.g.a[j] * self._means[j][cells[:, j]] for j in range(self.n))
        lo, hi = self._corners(cells)
        return self.g.cell_mean(lo, hi, self.source)

    def _train(self, count, seed):
        sums, sq, hits = {}, {}, {}
        for b, size in enumerate(batch_sizes(count)):
            x = self.source.sample_batch(seed, b, size)
            cells = self.dq.quantize(x)
            gv = self.g.evaluate(x)
            uniq, inv = np.unique(cells, axis=0, return_inverse=True)
            inv = inv.ravel()
            s1 = np.bincount(inv, weights=gv)
            s2 = np.bincount(inv, weights=gv * gv)
            cnt = np.bincount(inv)
            for row, a, b2, c in zip(uniq, s1, s2, cnt):
                key = row.tobytes()
                sums[key] = sums.get(key, 0.0) + a
                sq[key] = sq.get(key, 0.0) + b2
                hits[key] = hits.get(key, 0) + int(c)
        self._mc = {}
        for key, c in hits.items():
            if c >= MIN_HITS:
                m = sums[key] / c
                var = max(sq[key] / c - m * m, 0.0)
                self._mc[key] = m
                self.stderr[key] = math.sqrt(var / (c - 1))

    def _monte_carlo(self, cells):
        out = np.empty(cells.shape[0])
        miss = np.zeros(cells.shape[0], dtype=bool)
        for i, row in enumerate(cells):
            v = self._mc.get(row.tobytes())
            if v is None:
                miss[i] = True
            else:
                out[i] = v
        if np.any(miss):
            out[miss] = self._midpoint(cells[miss])
            self.flagged += int(miss.sum())
        return out

    def _compute(self, cells):
        if self.mode == "midpoint":
            return self._midpoint(cells)
        if self.mode == "numeric":
            return self._numeric(cells)
        if self.mode == "analytic":
            return self._analytic(cells)
        return self._monte_carlo(cells)

    # -- public ----------------------------------------------------------------

    def lookup(self, cells):
        """``ghat`` for each row of the integer array ``cells`` (shape ``(N, n)``)."""
        cells = np.atleast_2d(np.asarray(cells, dtype=np.int64))
        uniq, inv = np.unique(cells, axis=0, return_inverse=True)
        inv = inv.ravel()
        keys = [row.tobytes() for row in uniq]
        with self._lock:
            missing = [i for i, k in enumerate(keys) if k not in self._cache]
            if missing:
                vals = self._compute(uniq[missing])
                for i, v in zip(missing, vals):
                    self._cache[keys[i]] = float(v)
            table = np.array([self._cache[k] for k in keys])
        return table[inv]

    __call__ = lookup

    def enumerate_all(self, limit=2**16):
        """Values for every product cell (small partitions only)."""
        ks = self.dq.resolutions
        if np.prod(ks.astype(float)) > limit:
            raise ValueError("too many cells to enumerate")
        cells = np.stack(np.meshgrid(*[np.arange(k) for k in ks], indexing="ij"),
                         axis=-1).reshape(-1, self.n)
        return self.lookup(cells).reshape(tuple(ks))


def estimator_table(dq, source, g, mode="auto", **kw):
    return EstimatorTable(dq, source, g, mode, **kw)


# -- empirical distortion ----------------------------------------------------


@dataclass
class DistortionReport:
    regime: str
    R: float
    K: float
    D_hr: float
    D_emp: float
    stderr: float
    samples: int = 0
    flagged: int = 0
    notes: list = field(default_factory=list)

    @property
    def ratio(self):
        return self.D_emp / self.D_hr if self.D_hr else math.nan

    @property
    def ratio_stderr(self):
        return self.stderr / self.D_hr if self.D_hr else math.nan

    HEADER = ("regime", "R", "K", "D_hr", "D_emp", "stderr", "ratio")

    def row(self):
        return [self.regime, self.R, self.K, self.D_hr, self.D_emp, self.stderr, self.ratio]


def _batch_error(args):
    dq, source, g, estimator, seed, b, size, quantize = args
    x = source.sample_batch(seed, b, size)
    cells = quantize(x) if quantize is not None else dq.quantize(x)
    err = (g.evaluate(x) - estimator.lookup(cells)) ** 2
    return math.fsum(err), size


def batch_errors(dq, source, g, estimator, samples, seed, workers=None, quantize=None):
    """Per-batch sums of squared error, in batch order."""
    sizes = batch_sizes(samples, BATCH_SIZE)
    jobs = [(dq, source, g, estimator, seed, b, s, quantize) for b, s in enumerate(sizes)]
    workers = default_workers() if workers is None else int(workers)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_batch_error, jobs))
    return [_batch_error(j) for j in jobs]


def batch_mean(results):
    """Overall mean and batch-means standard error."""
    sums = np.array([s for s, _ in results])
    sizes = np.array([n for _, n in results], dtype=float)
    total = float(sizes.sum())
    mean = math.fsum(sums) / total
    if len(results) < 2:
        return mean, math.nan
    means = sums / sizes
    var = float(np.sum(sizes * (means - mean) ** 2)) / (total * (len(results) - 1))
    return mean, math.sqrt(var)


def empirical_distortion(dq, source, g, estimator=None, samples=2**20, seed=0,
                         regime="", R=math.nan, D_hr=math.nan, workers=None):
    """Monte Carlo distortion of ``dq`` with the given estimator table."""
    if estimator is None:
        estimator = EstimatorTable(dq, source, g)
    before = estimator.flagged
    res = batch_errors(dq, source, g, estimator, samples, seed, workers)
    mean, se = batch_mean(res)
    rep = DistortionReport(regime, R, dq.K, D_hr, mean, se, samples,
                           estimator.flagged - before)
    if rep.flagged:
        rep.notes.append(f"{rep.flagged} cells used the midpoint fallback")
    return rep


# -- cell variance envelopes -------------------------------------------------


def cell_variance_bounds(g, lo, hi, source, points=65):
    """Envelope ``(lower, upper, exact)`` for ``var(g(X) | X in [lo, hi])``.

    With independent coordinates, Efron-Stein gives ``var g <= sum_j
    b_j^2 var(X_j | cell)`` and the ANOVA decomposition gives ``var g >=
    sum_j a_j^2 var(X_j | cell)`` when each partial keeps one sign.  The
    conditional variances are bracketed by ``Delta_j^2 / 12`` times the
    density ratio ``m_j / M_j`` (or its inverse).  Variables whose partial
    changes sign on the cell get ``a_j = 0``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a, b, exact = g.partial_bounds(lo, hi)
    if not np.all(np.isfinite(b)):
        return math.nan, math.nan, False
    a = np.array(a, dtype=float)
    # sign check on a grid
    axes = [np.linspace(lo[j], hi[j], 9) for j in range(g.n)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g.n)
    for j in range(g.n):
        d = g.partial(j, mesh)
        d = d[np.isfinite(d)]
        if d.size and d.min() < 0 < d.max():
            a[j] = 0.0
    delta = hi - lo
    low = up = 0.0
    for j in range(g.n):
        xs = np.linspace(lo[j], hi[j], points)
        f = source.marginal(j).pdf(xs)
        m, M = float(f.min()), float(f.max())
        if m <= 0:
            lower_factor, upper_factor = 0.0, math.inf
        else:
            lower_factor, upper_factor = m / M, M / m
        low += a[j] ** 2 * delta[j] ** 2 / 12.0 * lower_factor
        up += b[j] ** 2 * delta[j] ** 2 / 12.0 * upper_factor
    return low, up, exact


def cell_variance(g, lo, hi, source, order=24):
    """``var(g(X) | X in [lo, hi])`` by tensor Gauss-Legendre (small ``n``)."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    xs, ws = [], []
    for j in range(g.n):
        x = 0.5 * (lo[j] + hi[j]) + 0.5 * (hi[j] - lo[j]) * nodes
        xs.append(x)
        ws.append(0.5 * (hi[j] - lo[j]) * weights * source.marginal(j).pdf(x))
    mesh = np.stack(np.meshgrid(*xs, indexing="ij"), axis=-1).reshape(-1, g.n)
    w = np.ones(())
    for wj in ws:
        w = np.multiply.outer(w, wj)
    w = w.ravel()
    gv = g.evaluate(mesh)
    mass = w.sum()
    mean = float(np.dot(w, gv) / mass)
    return float(np.dot(w, (gv - mean) ** 2) / mass)
