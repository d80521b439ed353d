"""Rate accounting for companding quantizers.

Cell probabilities always come from cdf differences (or, for grid joints,
from exact overlaps with the density grid), never from sampling.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _quad
from .compander import CompandingQuantizer, ResolutionError, resolutions
from .design import expected_log2
from .sources import GridSource

log = logging.getLogger(__name__)

MAX_JOINT_CELLS = 2**24
RATE_SLACK = 1e-9


def cell_probabilities(q, source, j):
    """Exact probabilities of the cells of ``q`` under marginal ``j``."""
    left, right, labels = q.segments()
    cdf = source.marginal(j).cdf
    p = np.maximum(cdf(right) - cdf(left), 0.0)
    return np.bincount(labels, weights=p, minlength=q.K)


def entropy_bits(p):
    p = np.asarray(p, dtype=float)
    return float(-np.sum(_quad.xlog2x(p)))


def output_entropy(q, source, j=0):
    """``H(Q(X_j))`` in bits."""
    return entropy_bits(cell_probabilities(q, source, j))


def hr_entropy(density, source, j, K):
    """``h(X_j) + log2 K + E[log2 lambda(X_j)]``."""
    elog = expected_log2(density, source, j, density.breakpoints)
    if elog == -math.inf:
        raise ArithmeticError("E[log lambda] diverges; the don't-care accounting applies")
    return source.differential_entropy(j) + math.log2(K) + elog


# -- resolution-rate functions -----------------------------------------------


class _EntropyCache:
    def __init__(self, companders, source, regime):
        self.companders = companders
        self.source = source
        self.regime = regime
        self.cache = {}

        # identical companders (symmetric designs) share one entropy table
        self.keys = [c.table.tobytes() for c in companders]

    def marginal(self, j, k):
        key = (self.keys[j], int(k))
        if key not in self.cache:
            self.cache[key] = output_entropy(
                CompandingQuantizer(self.companders[j], int(k)), self.source, j)
        return self.cache[key]

    def total(self, K, alpha):
        ks = resolutions(K, alpha)
        if self.regime == "slepian-wolf" and not self.source.independent:
            qs = [CompandingQuantizer(c, k) for c, k in zip(self.companders, ks)]
            return joint_entropy_of(qs, self.source)
        return sum(self.marginal(j, k) for j, k in enumerate(ks))


def resolution_for_rate(regime, companders, source, alpha, R, K_max=2**256, method="exact"):
    """Largest total resolution ``K`` whose rate does not exceed ``R`` bits.

    ``companders`` is one compander (``n = 1``) or a list.  ``R`` is the
    total rate over all variables.  Fixed rate returns ``floor(2^R)``.

    With ``method="exact"`` the entropy-coded regimes search ``K`` with a
    doubling stride and then bisection on exact output entropies; if the
    sampled rates are not monotone, the bracket is scanned linearly instead.
    ``method="hr"`` uses the high-resolution rate ``h + log2 K + E log2
    lambda`` in place of the exact entropy, which has a closed-form answer.
    """
    if R < 0:
        raise ValueError("rate must be nonnegative")
    if regime == "fixed":
        return int(math.floor(2.0**R + RATE_SLACK))
    if not isinstance(companders, (list, tuple)):
        companders = [companders]
    alpha = np.ones(1) if alpha is None else np.asarray(alpha, dtype=float)
    if method == "hr":
        return hr_resolution_for_rate(regime, companders, source, R)
    ent = _EntropyCache(companders, source, regime)
    lim = R + RATE_SLACK

    def ok(K):
        return ent.total(K, alpha) <= lim

    if not ok(1):
        return 0
    lo, hi = 1, 2
    seen = [(1, ent.total(1, alpha))]
    while hi <= K_max:
        h = ent.total(hi, alpha)
        seen.append((hi, h))
        if h > lim:
            break
        lo, hi = hi, hi * 2
    else:
        return lo
    rates = [h for _, h in seen]
    if any(b < a - 1e-12 for a, b in zip(rates, rates[1:])):
        log.info("rate not monotone across stride; scanning [%d, %d] linearly", lo, hi)
        return max(K for K in range(lo, hi + 1) if ok(K))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def hr_resolution_for_rate(regime, companders, source, R):
    """``floor(2^{R - h - sum_j E log2 lambda_j})`` with ``h`` the joint or summed entropy."""
    offset = 0.0
    for j, c in enumerate(companders):
        d = c.density
        offset += expected_log2(d, source, j, d.breakpoints)
    if regime == "slepian-wolf":
        offset += source.joint_differential_entropy()
    else:
        offset += sum(source.differential_entropy(j) for j in range(len(companders)))
    return int(math.floor(2.0 ** (R - offset) + RATE_SLACK))


def monotone_scan(companders, source, alpha=None, K_range=(2, 256)):
    """Rates over a range of ``K``; used to verify the search assumption."""
    if not isinstance(companders, (list, tuple)):
        companders = [companders]
    alpha = np.ones(1) if alpha is None else np.asarray(alpha, dtype=float)
    ent = _EntropyCache(companders, source, "variable")
    Ks = np.arange(K_range[0], K_range[1] + 1)
    return Ks, np.array([ent.total(K, alpha) for K in Ks])


# -- joint entropy -----------------------------------------------------------


def _overlap_by_label(q, src):
    left, right, labels = q.segments()
    edges_ok = np.all(np.diff(np.concatenate([left, right[-1:]])) >= 0)
    if not edges_ok:
        raise ValueError("segments must be sorted")
    ov = src.overlap_matrix(np.concatenate([left, right[-1:]]))
    out = np.zeros((q.K, ov.shape[1]))
    np.add.at(out, labels, ov)
    return out


def joint_cell_probabilities(quantizers, source):
    """Probabilities of every product cell (array of shape ``(K_1, ..., K_n)``)."""
    count = math.prod(q.K for q in quantizers)
    if count > MAX_JOINT_CELLS:
        raise ResolutionError(f"{count} product cells exceed the limit {MAX_JOINT_CELLS}")
    if source.independent:
        out = np.ones(())
        for j, q in enumerate(quantizers):
            out = np.multiply.outer(out, cell_probabilities(q, source, j))
        return out
    if not isinstance(source, GridSource):
        raise ValueError("dependent joint entropy needs a GridSource")
    ovs = [_overlap_by_label(q, source) for q in quantizers]
    if source.n == 1:
        return ovs[0] @ source.mass
    if source.n == 2:
        return ovs[0] @ source.mass @ ovs[1].T
    return np.einsum("ia,jb,kc,abc->ijk", ovs[0], ovs[1], ovs[2], source.mass)


def joint_entropy_of(quantizers, source):
    if source.independent:
        return sum(output_entropy(q, source, j) for j, q in enumerate(quantizers))
    return entropy_bits(joint_cell_probabilities(quantizers, source))


def joint_entropy(dq, source):
    """``H(Q(X_1), ..., Q(X_n))`` for a distributed quantizer."""
    return joint_entropy_of(dq.quantizers, source)


# -- reports -----------------------------------------------------------------


@dataclass
class RateReport:
    regime: str
    R: float
    K: float
    exact_rate: float
    hr_rate: float

    @property
    def gap(self):
        return self.exact_rate - self.hr_rate

    def row(self):
        return [self.regime, self.R, self.K, self.exact_rate, self.hr_rate, self.gap]

    HEADER = ("regime", "R", "K", "exact_bits", "hr_bits", "gap")


def rate_report(regime, dq, design, source, R=None):
    """Exact and high-resolution rate of ``dq`` in the given regime."""
    ks = dq.resolutions
    if regime == "fixed":
        exact = float(np.sum(np.log2(ks)))
        hr = exact
    elif regime == "variable":
        exact = sum(output_entropy(q, source, j) for j, q in enumerate(dq.quantizers))
        hr = float(np.sum(design.entropies + np.log2(ks) + design.e_log_lambda))
    else:
        exact = joint_entropy(dq, source)
        hr = float(source.joint_differential_entropy() + np.sum(np.log2(ks) + design.e_log_lambda))
    return RateReport(regime, R if R is not None else float("nan"), dq.K, exact, hr)
