import math

import numpy as np
import pytest

from dfsq.compander import Compander, CompandingQuantizer, PointDensity, ResolutionError
from dfsq.design import distortion_constant
from dfsq.dontcare import (UnsupportedDontCare, build_dontcare_quantizer, detect, empty_spec,
                           fr_distortion_dontcare, simulate_dontcare, spec_from_intervals,
                           vr_distortion_amplified)
from dfsq.functions import (Identity, MinClip, Square, SensitivityProfile, constant_profile,
                            sensitivity_profile)
from dfsq.sources import uniform_source

U = uniform_source(1)


def test_detect_min_clip():
    spec = detect(sensitivity_profile(MinClip(), U, 0), U)
    assert spec.M == 1
    a, b = spec.intervals[0]
    assert a == pytest.approx(0.5, abs=2e-3) and b == 1.0
    assert spec.p_A == pytest.approx(0.5, abs=2e-3)
    assert spec.rho == pytest.approx(2.0, abs=1e-2)
    assert spec.indicator_entropy == pytest.approx(1.0, abs=1e-4)


def test_detect_square_none():
    assert detect(sensitivity_profile(Square(), U, 0), U).M == 0


def test_detect_constant_rejected():
    grid = np.linspace(0, 1, 1025)
    zero = SensitivityProfile(0, grid, np.zeros_like(grid), np.zeros_like(grid))
    with pytest.raises(UnsupportedDontCare):
        detect(zero, U)


def test_dontcare_quantizer_min_clip():
    spec = spec_from_intervals(0, [(0.5, 1.0)], U)
    dens = PointDensity(lambda x: np.where(x <= 0.5, 2.0, 0.0), breakpoints=(0.5,))
    q = build_dontcare_quantizer(spec, dens, 5)
    assert q.K == 5
    assert np.allclose(q.boundaries, [0, 0.125, 0.25, 0.375, 0.5, 1.0], atol=1e-12)
    x = np.random.default_rng(0).uniform(0.5, 1.0, 1000)
    assert np.unique(q.quantize(x)).size == 1


def test_dontcare_quantizer_without_intervals():
    q = build_dontcare_quantizer(empty_spec(), PointDensity.uniform(), 8)
    ref = CompandingQuantizer(Compander(PointDensity.uniform()), 8)
    assert np.allclose(q.boundaries, ref.boundaries)


def test_dontcare_quantizer_needs_more_levels():
    spec = spec_from_intervals(0, [(0.1, 0.2), (0.6, 0.7)], U)
    with pytest.raises(ResolutionError):
        build_dontcare_quantizer(spec, PointDensity.uniform(), 2)


def test_amplified_min_clip():
    spec = spec_from_intervals(0, [(0.5, 1.0)], U)
    prof = sensitivity_profile(MinClip(), U, 0)
    for R in (4, 6, 8):
        D, notes = vr_distortion_amplified([spec], [prof], U, [1.0], R, [(0.5,)])
        assert D == pytest.approx(2.0 ** (-4 * R) / 6, rel=1e-9) and not notes
    D_fr = fr_distortion_dontcare([spec], [prof], U, [1.0], 8, [(0.5,)])
    assert D_fr == pytest.approx(0.5**3 / 12 * 2.0**-16, rel=0.01)


def test_amplified_reduces_without_dontcare():
    prof = sensitivity_profile(Square(), U, 0)
    D, _ = vr_distortion_amplified([empty_spec()], [prof], U, [1.0], 6)
    assert D == pytest.approx(distortion_constant("variable", prof, U, 0) * 2.0**-12 / 12,
                              rel=1e-9)


def test_amplified_continuity():
    prof = constant_profile(0)
    base = 2.0**-12 / 12
    for width in (1e-2, 1e-3, 5e-4):
        spec = spec_from_intervals(0, [(0.5, 0.5 + width)], U)
        D, _ = vr_distortion_amplified([spec], [prof], U, [1.0], 6)
        if width < 1e-3:
            assert abs(D / base - 1) < 0.01


def test_low_rate_note():
    spec = spec_from_intervals(0, [(0.5, 1.0)], U)
    prof = sensitivity_profile(MinClip(), U, 0)
    _, notes = vr_distortion_amplified([spec], [prof], U, [1.0], 0.5, [(0.5,)])
    assert notes


def test_simulate_identity_ordinary_slope():
    sweep = simulate_dontcare(empty_spec(), U, Identity(), [4, 6, 8], 2**17, 0)
    assert sweep.slope == pytest.approx(-2.0, abs=0.1)


def test_simulate_min_clip_r6():
    spec = spec_from_intervals(0, [(0.5, 1.0)], U)
    sweep = simulate_dontcare(spec, U, MinClip(), [4, 6], 2**18, 0)
    assert 0.9 <= sweep.reports[-1].D_emp / (2.0**-24 / 6) <= 1.1
