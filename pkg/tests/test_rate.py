import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfsq.compander import Compander, CompandingQuantizer, DistributedQuantizer, PointDensity
from dfsq.rate import (hr_entropy, joint_entropy, monotone_scan, output_entropy,
                       resolution_for_rate)
from dfsq.sources import GridSource, IndependentSource, Power, uniform_source

U = uniform_source(1)
SQ = PointDensity(lambda x: 2 * x)


def test_uniform_entropy():
    assert output_entropy(CompandingQuantizer(Compander(PointDensity.uniform()), 4), U) == \
        pytest.approx(2.0, abs=1e-12)


def test_square_density_entropy_gap():
    c = Compander(SQ)
    gaps = [output_entropy(CompandingQuantizer(c, 2**k), U) - k for k in (6, 9, 12)]
    target = 1 - 1 / math.log(2)
    assert abs(gaps[-1] - target) < abs(gaps[0] - target)
    assert gaps[-1] == pytest.approx(target, abs=0.01)


def test_hr_entropy_values():
    assert hr_entropy(PointDensity.uniform(), U, 0, 2**5) == pytest.approx(5.0, abs=1e-12)
    assert hr_entropy(SQ, U, 0, 2**5) == pytest.approx(5 + 1 - 1 / math.log(2), abs=1e-9)
    val = 5 + math.log2(5 / 3) - 2 / (3 * math.log(2))
    assert hr_entropy(PointDensity.power(2 / 3), U, 0, 2**5) == pytest.approx(val, abs=1e-9)


def test_resolution_examples():
    c = Compander(SQ)
    assert resolution_for_rate("fixed", c, U, None, 4) == 16
    assert resolution_for_rate("variable", c, U, None, 4, method="hr") == 21
    assert resolution_for_rate("variable", Compander(PointDensity.uniform()), U, None, 3) == 8


def test_exact_entropy_resolution_is_feasible():
    c = Compander(SQ)
    K = resolution_for_rate("variable", c, U, None, 4)
    assert output_entropy(CompandingQuantizer(c, K), U) <= 4
    assert output_entropy(CompandingQuantizer(c, K + 1), U) > 4


def test_joint_entropy_independent():
    src = IndependentSource([Power(2.0), Power(0.5)])
    qs = [CompandingQuantizer(Compander(PointDensity.uniform()), 6),
          CompandingQuantizer(Compander(SQ), 9)]
    dq = DistributedQuantizer(qs)
    assert joint_entropy(dq, src) == pytest.approx(
        output_entropy(qs[0], src, 0) + output_entropy(qs[1], src, 1), abs=1e-10)


def test_joint_entropy_perfect_correlation():
    src = GridSource(np.eye(8))
    q = CompandingQuantizer(Compander(PointDensity.uniform()), 8)
    dq = DistributedQuantizer([q, q])
    assert joint_entropy(dq, src) == pytest.approx(3.0, abs=1e-12)
    marg = output_entropy(q, src, 0) + output_entropy(q, src, 1)
    assert marg - joint_entropy(dq, src) == pytest.approx(3.0, abs=1e-12)


def test_joint_entropy_hr_limit():
    w = np.array([[3.0, 1.0], [1.0, 2.0]])
    src = GridSource(w)
    lam = [PointDensity(lambda x: 1 + x), PointDensity.uniform()]
    # E log2 lambda_1(X_1) under the grid marginal, by quadrature
    from dfsq.design import expected_log2
    target = src.joint_differential_entropy() + expected_log2(lam[0], src, 0, (0.5,))
    errs = []
    for k in (10, 12, 14):
        K = 2**k
        qs = [CompandingQuantizer(Compander(l), 2 ** (k // 2)) for l in lam]
        H = joint_entropy(DistributedQuantizer(qs), src)
        errs.append(abs(H - k - target))
    assert errs[-1] < errs[0] and errs[-1] < 0.01


def test_monotone_scan():
    for lam in (SQ, PointDensity.power(1.5), PointDensity.uniform()):
        _, rates = monotone_scan(Compander(lam), U, None, (2, 256))
        assert np.all(np.diff(rates) >= -1e-12)


def test_log_resolution_gap_at_r12():
    c = Compander(SQ)
    K = resolution_for_rate("variable", c, U, None, 12)
    K_hr = resolution_for_rate("variable", c, U, None, 12, method="hr")
    assert abs(math.log2(K) - math.log2(K_hr)) < 0.1


@settings(max_examples=25, deadline=None)
@given(p=st.floats(0.0, 2.5), d=st.floats(0.05, 1.0), k=st.floats(0.0, 2.0))
def test_entropy_gap_convergence(p, d, k):
    # smooth, strictly positive point density
    src = IndependentSource([Power(k)])
    lam = PointDensity(lambda x, p=p, d=d: (x + d) ** p)
    c = Compander(lam)
    gap = [abs(output_entropy(CompandingQuantizer(c, K), src) - hr_entropy(lam, src, 0, K))
           for K in (2**10, 2**12)]
    assert gap[1] <= 0.05
    assert gap[1] <= gap[0] + 1e-9


@settings(max_examples=20, deadline=None)
@given(p=st.floats(0.0, 2.0), R=st.floats(1.0, 10.0), dR=st.floats(0.0, 2.0))
def test_resolution_nondecreasing(p, R, dR):
    c = Compander(PointDensity.power(p))
    assert resolution_for_rate("variable", c, U, None, R) <= \
        resolution_for_rate("variable", c, U, None, R + dR)
