"""Design, rate matching and simulation in one call.

Rates passed to this module are average rates per variable, ``R_bar``;
the total rate is ``n * R_bar``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .compander import Compander, CompandingQuantizer, DistributedQuantizer, PointDensity
from .design import DesignProblem, design
from .distortion import EstimatorTable, empirical_distortion
from .rate import rate_report, resolution_for_rate

log = logging.getLogger(__name__)


def total_resolution(result, source, R, method="exact"):
    """Total resolution ``K`` for average rate ``R`` per variable."""
    n = result.n
    if result.regime == "fixed":
        return 2.0 ** (n * R)
    if result.alpha is None:
        raise ArithmeticError("degenerate allocation; no total resolution for this rate")
    return resolution_for_rate(result.regime, result.companders(), source, result.alpha,
                               n * R, method=method)


@dataclass
class Simulation:
    design: object
    quantizer: object
    distortion: object
    rate: object
    notes: list = field(default_factory=list)

    @property
    def ratio(self):
        return self.distortion.ratio


def simulate(g, source, regime, R, samples=2**20, seed=0, workers=None, result=None,
             method="exact", estimator="auto", grid_size=1024, mc_samples=4096):
    """Design at rate ``R``, pick the resolution, and measure distortion and rate."""
    if result is None:
        result = design(DesignProblem(source, g, regime, R, grid_size=grid_size,
                                      mc_samples=mc_samples, seed=seed))
    K = total_resolution(result, source, R, method)
    dq = result.quantizer(K)
    est = EstimatorTable(dq, source, g, mode=estimator)
    D_hr = result.predicted(R)
    rep = empirical_distortion(dq, source, g, est, samples, seed, regime, R, D_hr, workers)
    rr = rate_report(regime, dq, result, source, R * result.n)
    notes = list(result.warnings) + list(rep.notes)
    log.info("%s R=%g K=%s D_emp/D_hr=%.4f", regime, R, dq.resolutions, rep.ratio)
    return Simulation(result, dq, rep, rr, notes)


def ordinary_quantizer(n, R):
    """Uniform scalar quantizers with ``2^R`` cells per variable."""
    q = CompandingQuantizer(Compander(PointDensity.uniform()), int(round(2.0**R)))
    return DistributedQuantizer([q] * n)


def ordinary_distortion(g, source, R, samples=2**20, seed=0, workers=None):
    """Empirical distortion of ordinary (uniform, fixed-rate) quantization."""
    dq = ordinary_quantizer(g.n, R)
    est = EstimatorTable(dq, source, g)
    return empirical_distortion(dq, source, g, est, samples, seed, "ordinary", R,
                                workers=workers)


SWEEP_HEADER = ("function", "n", "regime", "R", "K", "D_hr", "D_emp", "stderr",
                "normalized_hr", "normalized_emp")


def sweep_rows(g, source, regime, rates, samples=2**20, seed=0, workers=None,
               simulate_points=True, method="exact", **kw):
    """Rows of ``sweep.csv``: distortion against rate, with ``12 * 2^{2R} D``.

    ``normalized_*`` is the distortion relative to ``2^{-2R} / 12``.  With
    ``simulate_points=False`` only the high-resolution column is filled.
    """
    result = design(DesignProblem(source, g, regime, float(rates[0]), **kw))
    rows = []
    for R in rates:
        D_hr = result.predicted(R)
        norm = 12.0 * 2.0 ** (2.0 * R)
        if simulate_points:
            sim = simulate(g, source, regime, R, samples, seed, workers, result, method)
            K, D, se = sim.quantizer.K, sim.distortion.D_emp, sim.distortion.stderr
        else:
            K, D, se = math.nan, math.nan, math.nan
        rows.append([getattr(g, "name", type(g).__name__), g.n, regime, R, K, D_hr, D, se,
                     norm * D_hr, norm * D])
    return rows


def resolutions_summary(dq):
    return np.asarray(dq.resolutions).tolist()
