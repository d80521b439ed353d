import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfsq.compander import (Compander, CompandingQuantizer, ConstructionError,
                            DistributedQuantizer, GeneralizedCompander, PointDensity,
                            ResolutionError, bin_map, build_compander, build_quantizer,
                            resolutions, write_codebook)
from dfsq.functions import DomainError
from dfsq.sources import bisect_inverse

X = np.linspace(0, 1, 513)


def test_uniform_compander():
    c = build_compander(PointDensity.uniform())
    assert np.allclose(c(X), X, atol=1e-12)


def test_compander_integrates_density():
    c = Compander(PointDensity(lambda x: x ** (4 / 3)))
    assert np.max(np.abs(c(X) - X ** (7 / 3))) <= 1e-9
    c2 = Compander(PointDensity(lambda x: 2 * x))
    assert np.max(np.abs(c2(X) - X**2)) <= 1e-9


def test_uniform_quantizer_example():
    q = build_quantizer(Compander(PointDensity.uniform()), 4)
    assert np.allclose(q.boundaries, [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(q.codewords, [1 / 8, 3 / 8, 5 / 8, 7 / 8])


def test_power_codewords_against_bisection():
    q = build_quantizer(Compander(PointDensity(lambda x: x ** (4 / 3))), 4)
    i = np.arange(1, 5)
    assert np.allclose(q.codewords, ((2 * i - 1) / 8) ** (3 / 7), atol=1e-10)
    beta1 = float(bisect_inverse(lambda x: x ** (7 / 3), 1 / 8))
    assert q.codewords[0] == pytest.approx(beta1, abs=1e-10)


def test_square_compander_quantizer():
    q = build_quantizer(Compander(PointDensity(lambda x: 2 * x)), 2)
    assert np.allclose(q.boundaries, [0, np.sqrt(0.5), 1], atol=1e-12)
    # 0.5 <= sqrt(1/2): first cell (index 0)
    assert q.quantize(0.5) == 0


def test_cell_convention():
    q = build_quantizer(Compander(PointDensity.uniform()), 4)
    assert q.quantize(0.25) == 0
    assert q.quantize(np.nextafter(0.25, 1)) == 1
    assert q.quantize(0.0) == 0
    assert q.quantize(1.0) == 3
    with pytest.raises(DomainError):
        q.quantize(1.5)
    with pytest.raises(DomainError):
        q.quantize(-0.1)
    with pytest.raises(ResolutionError):
        CompandingQuantizer(Compander(PointDensity.uniform()), 0)


def test_density_normalization():
    lam = PointDensity(lambda x: 7 * x**3 + 1)
    assert lam.integral_check() == pytest.approx(1.0, abs=1e-9)


def test_round_trip_same_cell():
    q = build_quantizer(Compander(PointDensity.power(0.7)), 37)
    x = np.random.default_rng(0).random(10**4)
    i = q.quantize(x)
    assert np.array_equal(q.quantize(q.reconstruct(i)), i)


def test_cell_length_asymptotics():
    lam = PointDensity(lambda x: 1 + 0.5 * np.sin(3 * x))
    errs = []
    for K in (2**4, 2**8, 2**12):
        q = build_quantizer(Compander(lam), K)
        errs.append(np.max(np.abs(q.cell_lengths() * K * lam(q.codewords) - 1)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-5


def test_sep_parabola_binning():
    w = lambda x: 64 / 25 * x * (0.75 - x) + 16 / 25
    gc = GeneralizedCompander([(0, 3 / 8, w), (3 / 8, 0.75, w),
                               (0.75, 1, lambda x: 16 / 25 + 9 / 25 * (x - 0.75) / 0.25)])
    q = bin_map(gc, 5)
    x = np.random.default_rng(1).uniform(0, 0.75, 5000)
    assert np.array_equal(q.quantize(x), q.quantize(0.75 - x))


def test_tent_binning():
    gc = GeneralizedCompander([(0, 0.5, lambda x: 2 * x), (0.5, 1, lambda x: 2 - 2 * x)])
    q = bin_map(gc, 2)
    x = np.array([0.0, 0.1, 0.25, 0.26, 0.5, 0.74, 0.76, 1.0])
    lab = q.quantize(x)
    assert lab[0] == lab[1] == lab[2] == lab[6] == lab[7]
    assert lab[3] == lab[4] == lab[5]
    assert lab[0] != lab[3]
    # w(3/4) = 1/2 lies in the right-closed cell (0, 1/2], shared with [0, 1/4]
    assert q.quantize(np.array([0.75]))[0] == lab[0]


def test_monotone_generalized_equals_regular():
    lam = PointDensity(lambda x: 2 * x)
    c = Compander(lam)
    gc = GeneralizedCompander([(0, 1, c)])
    q1, q2 = bin_map(gc, 7), build_quantizer(c, 7)
    x = np.random.default_rng(2).random(5000)
    assert np.array_equal(q1.quantize(x), q2.quantize(x))


def test_generalized_rejects_discontinuity():
    with pytest.raises(ConstructionError):
        GeneralizedCompander([(0, 0.5, lambda x: x), (0.5, 1, lambda x: x + 0.2)])
    with pytest.raises(ConstructionError):
        GeneralizedCompander([(0, 1, lambda x: np.sin(6 * x) ** 2)])


def test_distributed_resolutions():
    alpha = np.array([0.25, 0.75])
    K = 2.0**12
    ks = resolutions(K, alpha)
    assert list(ks) == [8, 512]
    dq = DistributedQuantizer.from_companders([Compander(PointDensity.uniform())] * 2, alpha, K)
    assert dq.cell_count() <= K
    with pytest.raises(ConstructionError):
        DistributedQuantizer([build_quantizer(Compander(PointDensity.uniform()), 2)] * 2,
                             [0.5, 0.6], 4)


def test_codebook_csv(tmp_path):
    q = build_quantizer(Compander(PointDensity.uniform()), 2)
    path = tmp_path / "cb.csv"
    write_codebook(path, q)
    assert path.read_text().splitlines() == ["cell_index,left,right,codeword",
                                             "1,0,0.5,0.25", "2,0.5,1,0.75"]


@settings(max_examples=30, deadline=None)
@given(p=st.floats(0.0, 3.0), K=st.integers(1, 300))
def test_boundaries_hit_uniform_levels(p, K):
    c = Compander(PointDensity(lambda x, p=p: x**p))
    q = CompandingQuantizer(c, K)
    assert np.all(np.diff(q.boundaries) > 0)
    assert np.max(np.abs(c(q.boundaries) - np.arange(K + 1) / K)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(logK=st.floats(0.5, 20.0), a=st.floats(0.05, 0.95))
def test_resolution_product_bounded(logK, a):
    K = 2.0**logK
    alpha = np.array([a, 1 - a])
    ks = resolutions(K, alpha)
    assert np.prod(ks.astype(float)) <= K * (1 + 1e-9) or np.any(ks == 1)
    if K >= max(2 ** (1 / a), 2 ** (1 / (1 - a))):
        assert np.all(ks >= 2)
