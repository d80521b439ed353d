"""One bit of communication from encoder 2 to encoder 1.

Encoder 2 sends ``Y = 1{X_2 <= t}`` to encoder 1, which then switches
between two companders designed from the conditional sensitivity profiles
``gamma_{1|Y=y}``.  The quantity of interest is the first variable's
distortion constant ``D_1``.

Variable-rate constants here use ``2^{2 h(X_1|Y=y) + 2 E[log2 gamma_{1|Y=y}]}``
per branch, matching :func:`dfsq.design.variable_rate_constant`.  The
branch-norm-weighted forms ``||gamma_{1|Y=y}||_1^2 (...)`` are also returned
for comparison.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .compander import Compander, CompandingQuantizer
from .design import (expected_log2, fixed_rate_constant, fixed_rate_density, l1_norm,
                     variable_rate_density)
from .distortion import DistortionReport, batch_mean
from .functions import (ThresholdEvent, conditional_sensitivity_profile,
                        sensitivity_profile)
from .rate import resolution_for_rate
from .rng import BATCH_SIZE, batch_sizes
from .sources import ConfigurationError


@dataclass
class ChatScenario:
    """Threshold chat bit on ``X_2`` for the encoder of ``X_1``."""

    g: object
    source: object
    threshold: float = 0.5
    grid_size: int = 1024
    mc_samples: int = 4096
    seed: int = 0
    profiles: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.g.n != 2 or self.source.n != 2:
            raise ConfigurationError("chatting scenarios have two variables")
        if not self.source.independent:
            raise ConfigurationError("chatting scenarios need independent sources")
        self.event = ThresholdEvent(1, float(self.threshold))
        self.p = {y: self.event.probability(self.source, y) for y in (0, 1)}
        if min(self.p.values()) <= 0:
            raise ConfigurationError("both values of the chat bit need positive probability")
        if not self.profiles:
            self.profiles["none"] = sensitivity_profile(
                self.g, self.source, 0, self.grid_size, self.mc_samples, self.seed)
            for y in (0, 1):
                self.profiles[y] = conditional_sensitivity_profile(
                    self.g, self.source, 0, self.event, y, self.grid_size,
                    self.mc_samples, self.seed)
        self.breaks = tuple(self.g.breakpoints(0))

    def profile(self, y=None):
        return self.profiles["none" if y is None else y]

    def density(self, regime, y=None):
        prof = self.profile(y)
        if regime == "fixed":
            return fixed_rate_density(prof, self.source, 0, self.breaks, check=False)
        return variable_rate_density(prof, self.source, 0, self.breaks, check=False)


@dataclass
class ChatConstants:
    regime: str
    chat: float
    no_chat: float
    weighted_chat: float = math.nan
    weighted_no_chat: float = math.nan

    @property
    def ratio(self):
        return self.no_chat / self.chat

    @property
    def weighted_ratio(self):
        return self.weighted_no_chat / self.weighted_chat


def fixed_rate_chat_constant(sc):
    """``sum_y P(Y=y) ||gamma_{1|y}^2 f_{1|y}||_{1/3}`` and the no-chat constant."""
    chat = sum(sc.p[y] * fixed_rate_constant(sc.profile(y), sc.source, 0, sc.breaks)
               for y in (0, 1))
    none = fixed_rate_constant(sc.profile(), sc.source, 0, sc.breaks)
    return ChatConstants("fixed", chat, none, chat, none)


def _vr_branch(sc, prof):
    elog = expected_log2(lambda x: np.sqrt(prof.sq(x)), sc.source, 0, sc.breaks)
    # X_1 is independent of Y, so h(X_1 | Y = y) = h(X_1)
    return 2.0 ** (2.0 * sc.source.differential_entropy(0) + 2.0 * elog)


def variable_rate_chat_constant(sc):
    """Mixture of branch variable-rate constants and the no-chat constant."""
    chat = wchat = 0.0
    for y in (0, 1):
        prof = sc.profile(y)
        c = _vr_branch(sc, prof)
        chat += sc.p[y] * c
        wchat += sc.p[y] * l1_norm(prof, sc.breaks) ** 2 * c
    none = _vr_branch(sc, sc.profile())
    wnone = l1_norm(sc.profile(), sc.breaks) ** 2 * none
    return ChatConstants("variable", chat, none, wchat, wnone)


def chat_constants(sc, regime):
    if regime == "fixed":
        return fixed_rate_chat_constant(sc)
    return variable_rate_chat_constant(sc)


# -- simulation --------------------------------------------------------------


def _cell_pieces(lo, hi, breaks):
    pts = [lo, hi] + [np.clip(np.full_like(lo, b), lo, hi) for b in breaks]
    pts = np.sort(np.stack(pts, axis=-1), axis=-1)
    return pts[:, :-1], pts[:, 1:]


def _conditional_mean_x1(g, source, lo, hi, x2, breaks):
    """``E[g(X_1, x_2) | X_1 in (lo, hi]]`` per sample, by Gauss-Legendre."""
    a, b = _cell_pieces(lo, hi, breaks)
    t = 0.5 * (a + b)[..., None] + 0.5 * (b - a)[..., None] * _quad.GL_NODES
    w = 0.5 * (b - a)[..., None] * _quad.GL_WEIGHTS
    pdf = source.marginal(0).pdf
    w = w * pdf(t)
    x2b = np.broadcast_to(x2[:, None, None], t.shape)
    gv = g.evaluate(np.stack([t.ravel(), x2b.ravel()], axis=1)).reshape(t.shape)
    mass = w.sum(axis=(1, 2))
    num = (w * gv).sum(axis=(1, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / mass
    bad = ~(mass > 0)
    if np.any(bad):
        mid = 0.5 * (lo[bad] + hi[bad])
        out[bad] = g.evaluate(np.column_stack([mid, x2[bad]]))
    return out


@dataclass
class ChatResult:
    regime: str
    R: float
    constants: ChatConstants
    chat: DistortionReport
    no_chat: DistortionReport
    resolutions: dict
    notes: list = field(default_factory=list)

    @property
    def ratio(self):
        return self.no_chat.D_emp / self.chat.D_emp

    @property
    def ratio_stderr(self):
        r = self.ratio
        rel = math.hypot(self.no_chat.stderr / self.no_chat.D_emp,
                         self.chat.stderr / self.chat.D_emp)
        return r * rel

    HEADER = ("threshold", "regime", "D1_chat_hr", "D1_nochat_hr", "D1_chat_emp",
              "D1_nochat_emp", "ratio")

    def row(self, label):
        return [label, self.regime, self.chat.D_hr, self.no_chat.D_hr, self.chat.D_emp,
                self.no_chat.D_emp, self.ratio]


def _quantizer(sc, regime, R, y=None):
    comp = Compander(sc.density(regime, y))
    if regime == "fixed":
        K = resolution_for_rate("fixed", comp, sc.source, None, R)
    else:
        # X_1 is independent of Y, so the branch entropy uses the marginal of X_1
        K = resolution_for_rate("variable", comp, sc.source, None, R)
    return CompandingQuantizer(comp, K)


def simulate_chat(sc, R, samples=2**20, seed=0, regime="variable"):
    """Empirical ``D_1`` with and without the chat bit at rate ``R`` for ``X_1``.

    ``X_2`` is revealed to the decoder, so the measured error isolates the
    first variable's contribution and the jump of ``g`` across
    ``x_2 = threshold`` never falls inside a cell.  Encoder 1 spends ``R``
    bits in either case; the chat bit is charged to the link between the
    encoders.  ``notes`` also lists the predictions when that bit is
    instead charged to encoder 1.
    """
    const = chat_constants(sc, regime)
    q_none = _quantizer(sc, regime, R)
    q_y = {y: _quantizer(sc, regime, R, y) for y in (0, 1)}
    src, g = sc.source, sc.g
    res_none, res_chat = [], []
    for b, size in enumerate(batch_sizes(samples, BATCH_SIZE)):
        x = src.sample_batch(seed, b, size)
        gv = g.evaluate(x)
        i = q_none.quantize(x[:, 0])
        est = _conditional_mean_x1(g, src, q_none.boundaries[i], q_none.boundaries[i + 1],
                                   x[:, 1], sc.breaks)
        res_none.append((math.fsum((gv - est) ** 2), size))
        y = sc.event.indicator(x)
        lo = np.empty(size)
        hi = np.empty(size)
        for val in (0, 1):
            sel = y == val
            q = q_y[val]
            k = q.quantize(x[sel, 0])
            lo[sel], hi[sel] = q.boundaries[k], q.boundaries[k + 1]
        est = _conditional_mean_x1(g, src, lo, hi, x[:, 1], sc.breaks)
        res_chat.append((math.fsum((gv - est) ** 2), size))
    m0, s0 = batch_mean(res_none)
    m1, s1 = batch_mean(res_chat)
    scale = 2.0 ** (-2.0 * R) / 12.0
    none = DistortionReport(regime, R, q_none.K, const.no_chat * scale, m0, s0, samples)
    chat = DistortionReport(regime, R, (q_y[0].K, q_y[1].K), const.chat * scale, m1, s1,
                            samples)
    hy = -sum(p * math.log2(p) for p in sc.p.values())
    notes = [f"chat bit on the link: D1_chat_hr={const.chat * scale:.6g}",
             f"chat bit charged to encoder 1 (R - {hy:.3f}): "
             f"D1_chat_hr={const.chat * 2.0 ** (-2.0 * (R - hy)) / 12.0:.6g}"]
    return ChatResult(regime, R, const, chat, none,
                      {"none": q_none.K, 0: q_y[0].K, 1: q_y[1].K}, notes)


# -- scenario sweeps ---------------------------------------------------------


def random_scenarios(count=20, seed=0, rows=4, cols=4):
    """Random :class:`~dfsq.functions.SlopeGrid` scenarios on a uniform square.

    Slopes are log-normal (so every branch has finite ``E log gamma``) and
    the chat threshold is drawn uniformly from ``[0.1, 0.9]``.
    """
    from .functions import SlopeGrid
    from .sources import uniform_source

    rng = np.random.default_rng(seed)
    src = uniform_source(2)
    out = []
    for i in range(count):
        slopes = rng.lognormal(0.0, 1.5, size=(rows, cols))
        t = float(rng.uniform(0.1, 0.9))
        out.append(ChatScenario(SlopeGrid(slopes, name=f"slope_grid_{i}"), src, threshold=t))
    return out


def fixed_rate_bound_holds(sc, tol=1e-9):
    """Chat gain in the fixed-rate regime never beats one extra bit (factor 4)."""
    c = fixed_rate_chat_constant(sc)
    return c.chat >= c.no_chat / 4.0 * (1.0 - tol)


def scenario_rows(scenarios, regime):
    """Rows of the scenario CSV from the high-resolution constants alone."""
    rows = []
    for sc in scenarios:
        c = chat_constants(sc, regime)
        rows.append([sc.threshold, regime, c.chat / 12.0, c.no_chat / 12.0, math.nan, math.nan,
                     c.ratio])
    return rows


def write_scenario_csv(path, rows):
    from .compander import fmt

    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(ChatResult.HEADER) + "\n")
        for r in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in r) + "\n")
