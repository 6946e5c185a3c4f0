"""Deviation-factor law, per-iteration and whole-process penalties, MC driver."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from hamest import adaptive, robustness
from hamest.errors import DomainError

DEVIATION_WEIGHT = 1.8177518730791193  # g0^2 csc^2(g0)
DEVIATION_VARIANCE = 0.7081609204640834  # (2 + 4 a^2) / s^2
SAMPLE_COUNT = 100_000
SAMPLE_SEED = 2718


@pytest.fixture(scope="module")
def deviation_draws():
    rng = np.random.default_rng(SAMPLE_SEED)
    return np.array([robustness.sample_deviation(rng) for _ in range(SAMPLE_COUNT)])


@pytest.fixture(scope="module")
def model_cdf():
    """Trapezoid CDF of the deviation density on a grid dense enough that the
    integration error is far below the sampling noise it is compared against."""
    xs = np.linspace(0.0, 60.0, 240_001)
    pdf = robustness.deviation_pdf(xs)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(xs))])
    return xs, cdf / cdf[-1]


# ---------------------------------------------------------------------------
# law constants and density


def test_deviation_params_values():
    p = robustness.deviation_params()
    assert p.a == pytest.approx(DEVIATION_WEIGHT, rel=1e-12)
    assert p.s == 2.0 * p.a + 1.0
    assert p.c == pytest.approx((2.0 * p.a - 1.0 - 1.0 / p.a) / 2.0, rel=1e-14)
    # E[D] = (1 + 2a) / s = 1 by construction
    assert (1.0 + 2.0 * p.a) / p.s == pytest.approx(1.0, rel=1e-15)


def test_deviation_variance_identity():
    p = robustness.deviation_params()
    assert (2.0 + 4.0 * p.a**2) / p.s**2 == pytest.approx(DEVIATION_VARIANCE, rel=1e-12)


def test_pdf_vanishes_at_and_below_origin():
    assert robustness.deviation_pdf(0.0) == 0.0
    assert robustness.deviation_pdf(-1.0) == 0.0


def test_pdf_array_matches_scalar():
    xs = np.array([-0.5, 0.0, 0.3, 1.0, 4.7])
    assert_allclose(
        robustness.deviation_pdf(xs),
        [robustness.deviation_pdf(float(x)) for x in xs],
        rtol=0.0,
        atol=0.0,
    )


def test_pdf_normalization():
    norm, _ = integrate.quad(robustness.deviation_pdf, 0.0, 60.0, limit=200)
    assert norm == pytest.approx(1.0, abs=1e-6)


def test_pdf_first_moment():
    mom, _ = integrate.quad(lambda d: d * robustness.deviation_pdf(d), 0.0, 60.0, limit=200)
    assert mom == pytest.approx(1.0, abs=1e-5)


# ---------------------------------------------------------------------------
# sampling against the density


def test_draws_positive(deviation_draws):
    assert np.all(deviation_draws > 0.0)


def test_sample_mean(deviation_draws):
    sigma = math.sqrt(DEVIATION_VARIANCE / SAMPLE_COUNT)
    assert abs(deviation_draws.mean() - 1.0) < 3.0 * sigma


def test_sample_variance(deviation_draws):
    assert deviation_draws.var() == pytest.approx(DEVIATION_VARIANCE, rel=0.05)


def test_empirical_cdf_matches_density(deviation_draws, model_cdf):
    xs, cdf = model_cdf
    srt = np.sort(deviation_draws)
    model = np.interp(srt, xs, cdf)
    steps = np.arange(SAMPLE_COUNT + 1) / SAMPLE_COUNT
    ks = max(np.abs(steps[1:] - model).max(), np.abs(steps[:-1] - model).max())
    assert ks < 0.01  # 0.0038 at the frozen seed; 95% point is 0.0043


def test_histogram_matches_density(deviation_draws, model_cdf):
    xs, cdf = model_cdf
    edges = np.linspace(0.0, 8.0, 201)
    counts, _ = np.histogram(deviation_draws, bins=edges)
    mass = np.diff(np.interp(edges, xs, cdf))
    assert np.abs(counts / SAMPLE_COUNT - mass).sum() < 0.05


# ---------------------------------------------------------------------------
# single-iteration penalty


def test_ratio_single_identity_at_one():
    assert robustness.ratio_single(1.0) == 1.0


def test_ratio_single_small_deviation_limit():
    g = adaptive.g0()
    limit = 3.0 / (4.0 * g * g) / adaptive.gain(g)
    assert limit == pytest.approx(0.6471788535358873, rel=1e-12)
    assert robustness.ratio_single(1e-9) == pytest.approx(limit, rel=1e-8)


def test_ratio_single_strictly_increasing():
    d_max = (math.pi / adaptive.g0()) ** 2
    grid = np.linspace(0.01, d_max - 0.01, 10_000)
    vals = np.array([robustness.ratio_single(d) for d in grid])
    assert np.all(np.diff(vals) > 0.0)


@pytest.mark.parametrize("d", [0.0, -0.3, (math.pi / 1.2986027893222916) ** 2, 7.0])
def test_ratio_single_domain(d):
    with pytest.raises(DomainError):
        robustness.ratio_single(d)


# ---------------------------------------------------------------------------
# re-optimized recursion


@pytest.mark.parametrize("dE2,n", [(1.0, 100), (0.37, 250), (4.2e-3, 12)])
def test_modified_recursion_recovers_ideal_recursion(dE2, n):
    total_time = n * adaptive.optimal_time(dE2)
    assert robustness.modified_recursion(dE2, 1.0, total_time) == pytest.approx(
        adaptive.recursion(dE2, n), rel=1e-12
    )


def test_modified_recursion_sqrt_homogeneity():
    base = robustness.modified_recursion(0.9, 1.0, 30.0)
    assert robustness.modified_recursion(0.9, 2.5, 30.0) == pytest.approx(
        math.sqrt(2.5) * base, rel=1e-12
    )
    assert robustness.modified_recursion(0.9 * 4.0, 1.0, 30.0) == pytest.approx(
        2.0 * base, rel=1e-12
    )


@pytest.mark.parametrize(
    "dE2,d,total_time",
    [(0.0, 1.0, 10.0), (-1.0, 1.0, 10.0), (1.0, 0.0, 10.0), (1.0, -0.5, 10.0), (1.0, 1.0, 0.0)],
)
def test_modified_recursion_domain(dE2, d, total_time):
    with pytest.raises(DomainError):
        robustness.modified_recursion(dE2, d, total_time)


# ---------------------------------------------------------------------------
# whole-process penalty


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_ratio_total_no_deviation(m):
    assert robustness.ratio_total(np.ones(m)) == 1.0


def test_ratio_total_single_step_square_root():
    assert robustness.ratio_total([1.0, 4.0]) == pytest.approx(2.0, rel=1e-15)


def test_ratio_total_matches_composed_recursions():
    # Running the re-optimized recursion with and without the deviations and
    # taking the quotient of the endpoints must reproduce the closed form.
    rng = np.random.default_rng(5)
    m = 5
    devs = np.concatenate([[1.0], [robustness.sample_deviation(rng) for _ in range(m - 1)]])
    times = rng.uniform(5.0, 50.0, size=m - 1)
    noisy, ideal = 0.9, 0.9
    for k in range(1, m):
        noisy = robustness.modified_recursion(noisy, devs[k], times[k - 1])
        ideal = robustness.modified_recursion(ideal, 1.0, times[k - 1])
    assert noisy / ideal == pytest.approx(robustness.ratio_total(devs), rel=1e-12)


@pytest.mark.parametrize("k,m", [(2, 4), (3, 4), (4, 4), (2, 2)])
def test_ratio_total_scaling_in_one_factor(k, m):
    rng = np.random.default_rng(k + 10 * m)
    devs = np.concatenate([[1.0], rng.uniform(0.4, 2.5, size=m - 1)])
    scaled = devs.copy()
    scaled[k - 1] *= 3.0
    expected = 3.0 ** (1.0 / 2.0 ** (m - k + 1))
    assert robustness.ratio_total(scaled) / robustness.ratio_total(devs) == pytest.approx(
        expected, rel=1e-12
    )


@pytest.mark.parametrize(
    "devs", [[0.9, 1.0], [1.0, -0.2], [1.0, 0.0, 1.3], [], [[1.0, 1.1]]]
)
def test_ratio_total_domain(devs):
    with pytest.raises(DomainError):
        robustness.ratio_total(devs)


# ---------------------------------------------------------------------------
# Monte Carlo driver


def test_mc_penalty_usually_below_one():
    summaries = [robustness.robustness_mc(m, 20_000, 7) for m in (2, 3, 4)]
    p = [s.p_below_one for s in summaries]
    assert all(q > 0.5 for q in p)
    assert p[0] < p[1] < p[2]
    # counter-based streams make the estimate reproducible to the last bit
    assert p[1] == 0.67905


def test_mc_median_below_one():
    s = robustness.robustness_mc(2, 20_000, 7)
    assert s.deciles[4] < 1.0
    assert s.mean < 1.0  # E[sqrt(D)] < sqrt(E[D]) = 1


def test_mc_summary_shape():
    s = robustness.robustness_mc(3, 10_000, 3)
    assert (s.m, s.samples, s.seed) == (3, 10_000, 3)
    assert len(s.deciles) == 9
    assert np.all(np.diff(s.deciles) >= 0.0)


def test_mc_worker_count_does_not_change_result():
    runs = [robustness.robustness_mc(3, 20_000, 11, workers=w) for w in (1, 4, 16)]
    assert runs[0] == runs[1] == runs[2]


def test_mc_force_unit_collapses_to_point():
    s = robustness.robustness_mc(2, 10_000, 0, force_unit=True)
    assert s.mean == 1.0
    assert s.p_below_one == 0.0
    assert set(s.deciles) == {1.0}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"m": 1, "samples": 10_000, "seed": 0},
        {"m": 2, "samples": 9_999, "seed": 0},
        {"m": 2, "samples": 10_000, "seed": -1},
        {"m": 2, "samples": 10_000, "seed": 0, "workers": 0},
    ],
)
def test_mc_domain(kwargs):
    with pytest.raises(DomainError):
        robustness.robustness_mc(**kwargs)
