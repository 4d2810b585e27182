import io
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergolin.birkhoff import StepFunction, favourite_f, variance_exact
from ergolin.clt_lab import (CltExperiment, SubsequenceScale, build_scale,
                             doubling_correlation, doubling_sn_l2,
                             empirical_distribution, kac_sigma2, ks_statistic,
                             ln_scale_experiment, range_growth_probe,
                             thread_cap, w_set_report)
from ergolin.continued_fractions import cf_expand, golden_alpha, select_tk
from ergolin.errors import ConfigError
from ergolin.torus_dynamics import BitStream, Doubling, Rotation, TorusPoint

GOLDEN_ALPHA = golden_alpha(320)
GOLDEN_ROT = Rotation(GOLDEN_ALPHA)
F_HALF = favourite_f(Fraction(1, 2))
F_THIRD = favourite_f(Fraction(1, 3))


def cf_to_fraction(digits):
    val = Fraction(0)
    for a in reversed(digits):
        val = 1 / (a + val)
    return val


# alpha = [0; 1, 2, 4, ..., 2^11]: quotients grow fast enough for the
# subsequence hypothesis, unlike the golden ratio
ALPHA_POW2 = cf_to_fraction([2 ** j for j in range(12)])
CF_POW2 = cf_expand(ALPHA_POW2, 12, exact=True)


def correlation_oracle(f, k):
    """Integrate f(x) f(2^k x) over the full refinement grid, exactly."""
    scale = 1 << k
    pts = set(f.cuts)
    for m in range(scale):
        for c in f.cuts:
            pts.add((c + m) / scale)
    grid = sorted(pts) + [Fraction(1)]
    tot = Fraction(0)
    for a, b in zip(grid, grid[1:]):
        mid = (a + b) / 2
        tot += f.value_at(mid) * f.value_at((mid * scale) % 1) * (b - a)
    return tot


# ---------------------------------------------------------------------------
# exact correlations

def test_correlations_vanish_for_half():
    for k in range(1, 13):
        assert doubling_correlation(F_HALF, k) == 0


def test_correlation_matches_oracle():
    for f in (F_THIRD, favourite_f(Fraction(2, 5))):
        for k in range(1, 6):
            assert doubling_correlation(f, k) == correlation_oracle(f, k)


def test_correlation_third_closed_form():
    # pairs of equal lags decaying by 1/4: corr_{2j-1} = corr_{2j} = (1/8) 4^{1-j}
    for j in range(1, 6):
        expect = Fraction(1, 8) / 4 ** (j - 1)
        assert doubling_correlation(F_THIRD, 2 * j - 1) == expect
        assert doubling_correlation(F_THIRD, 2 * j) == expect


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(min_value=0, max_value=1, max_denominator=16),
                min_size=1, max_size=4, unique=True),
       st.lists(st.integers(min_value=-3, max_value=3), min_size=5, max_size=5),
       st.integers(min_value=1, max_value=5))
def test_correlation_oracle_property(cuts, raw_vals, k):
    cuts = sorted(c for c in cuts if c < 1)
    if not cuts or cuts[0] != 0:
        cuts = [Fraction(0)] + cuts
    vals = [Fraction(v) for v in raw_vals[:len(cuts)]]
    f = StepFunction(cuts, vals)
    f = StepFunction(f.cuts, [v - f.integral() for v in f.values])
    assert doubling_correlation(f, k) == correlation_oracle(f, k)


def test_correlation_requires_centered():
    g = StepFunction([Fraction(0)], [Fraction(1)])
    with pytest.raises(ConfigError):
        doubling_correlation(g, 1)
    with pytest.raises(ConfigError):
        doubling_correlation(F_HALF, 0)


def test_kac_sigma2_values():
    assert kac_sigma2(F_HALF).value == 1.0
    rep = kac_sigma2(F_THIRD, max_lag=20)
    # geometric correlation pairs sum to 1/3, so sigma^2 = 1/2 + 2/3 = 7/6
    assert abs(rep.value - 7 / 6) <= rep.tail_bound
    assert rep.value > 0
    zero = StepFunction([Fraction(0)], [Fraction(0)])
    assert kac_sigma2(zero).value == 0.0
    assert kac_sigma2(zero).tail_bound == 0.0


def test_kac_sigma2_rejects_big_lag():
    with pytest.raises(ConfigError):
        kac_sigma2(F_HALF, max_lag=25)


def test_doubling_sn_l2_linear():
    for n in (1, 2, 17, 1000):
        assert doubling_sn_l2(F_HALF, n) == float(n)
    slope = (doubling_sn_l2(F_THIRD, 4096) - doubling_sn_l2(F_THIRD, 1024)) / 3072
    assert abs(slope - 7 / 6) < 1e-5


# ---------------------------------------------------------------------------
# KS statistic

def test_ks_single_point():
    assert ks_statistic(np.array([0.0])) == pytest.approx(0.5)


def test_ks_self_calibration():
    z = np.random.default_rng(123).standard_normal(20000)
    assert ks_statistic(z) < 0.015


def test_ks_rejects_uniform():
    u = np.random.default_rng(5).uniform(0, 3, size=5000)
    assert ks_statistic(u) > 0.2


def test_ks_empty():
    with pytest.raises(ConfigError):
        ks_statistic(np.array([]))


# ---------------------------------------------------------------------------
# Monte-Carlo harness

def test_experiment_validation():
    with pytest.raises(ConfigError):
        CltExperiment(Doubling(), F_HALF, "sqrt_n", 64, 999, 1)
    with pytest.raises(ConfigError):
        CltExperiment(Doubling(), F_HALF, "cube_n", 64, 2000, 1)
    with pytest.raises(ConfigError):
        CltExperiment(Doubling(), F_HALF, "sqrt_k", 64, 2000, 1)
    with pytest.raises(ConfigError):
        CltExperiment(Doubling(), F_HALF, "sqrt_n", 0, 2000, 1)


def test_doubling_clt_profile():
    exp = CltExperiment(Doubling(), F_HALF, "sqrt_n", 4096, 20000, 1)
    rep = empirical_distribution(exp)
    assert 0.95 <= rep.variance <= 1.05
    assert rep.ks <= 0.02
    assert abs(rep.mean) < 0.03


def test_reproducible_and_seed_sensitive():
    exp = CltExperiment(Doubling(), F_HALF, "sqrt_n", 256, 2000, 31)
    a = empirical_distribution(exp)
    b = empirical_distribution(exp)
    assert a.summary_json() == b.summary_json()
    assert np.array_equal(a.hist_counts, b.hist_counts)
    other = empirical_distribution(
        CltExperiment(Doubling(), F_HALF, "sqrt_n", 256, 2000, 32))
    assert other.summary_json() != a.summary_json()


def test_thread_count_never_changes_results(monkeypatch):
    exp = CltExperiment(Doubling(), F_HALF, "sqrt_n", 512, 3000, 99)
    monkeypatch.setenv("ERGOLIN_THREADS", "1")
    one = empirical_distribution(exp)
    monkeypatch.setenv("ERGOLIN_THREADS", "4")
    four = empirical_distribution(exp)
    assert one.summary_json() == four.summary_json()
    assert np.array_equal(one.hist_counts, four.hist_counts)


def test_thread_cap_parsing(monkeypatch):
    monkeypatch.setenv("ERGOLIN_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("ERGOLIN_THREADS", "0")
    with pytest.raises(ConfigError):
        thread_cap()
    monkeypatch.setenv("ERGOLIN_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_cap()


def test_single_step_atoms():
    # S_1 takes the two values of f with masses (b, 1-b)
    exp = CltExperiment(Doubling(), F_THIRD, "sqrt_n", 1, 3000, 7)
    rep = empirical_distribution(exp)
    assert rep.hist_edges[0] == pytest.approx(-0.5)
    assert rep.hist_edges[-1] == pytest.approx(1.0)
    nonzero = rep.hist_counts[rep.hist_counts > 0]
    assert len(nonzero) == 2
    assert rep.hist_counts.sum() == 3000
    assert nonzero[0] / 3000 == pytest.approx(2 / 3, abs=0.03)


def test_rotation_has_no_full_sequence_clt():
    exp = CltExperiment(GOLDEN_ROT, F_HALF, "sqrt_n", 10 ** 4, 20000, 3)
    rep = empirical_distribution(exp)
    assert rep.variance < 0.01


def test_rotation_l2_normalization_consistent():
    # Monte-Carlo variance against the exact Parseval norm: mutual check
    # of the fixed-point sampler and variance_exact
    exp = CltExperiment(GOLDEN_ROT, F_THIRD, "l2", 2500, 4000, 77)
    rep = empirical_distribution(exp)
    assert 0.9 <= rep.variance <= 1.1
    assert abs(rep.mean) < 0.05


def test_degenerate_normalization_rejected():
    # b = 2/5 is a coboundary for alpha = 1/5: S_5 vanishes identically
    exp = CltExperiment(Rotation(Fraction(1, 5)), favourite_f(Fraction(2, 5)),
                        "l2", 5, 1000, 1)
    with pytest.raises(ConfigError):
        empirical_distribution(exp)


def test_sqrt_k_normalization():
    exp = CltExperiment(Doubling(), F_HALF, "sqrt_k", 64, 1000, 8, k_index=4)
    rep = empirical_distribution(exp)
    assert rep.scale == pytest.approx(2.0)


def test_sampler_rejects_many_pieces():
    g = StepFunction([Fraction(0), Fraction(1, 4), Fraction(1, 2)],
                     [Fraction(1), Fraction(0), Fraction(-1)])
    with pytest.raises(ConfigError):
        empirical_distribution(CltExperiment(Doubling(), g, "sqrt_n", 8, 1000, 1))


def test_histogram_csv_and_summary():
    exp = CltExperiment(Doubling(), F_HALF, "sqrt_n", 128, 2000, 11)
    rep = empirical_distribution(exp)
    buf = io.StringIO()
    rep.histogram_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "bin_left,bin_right,count"
    assert len(lines) == 81
    assert sum(int(row.split(",")[2]) for row in lines[1:]) == 2000
    summary = json.loads(rep.summary_json())
    assert sorted(summary) == ["ks", "mean", "n", "samples", "seed", "var"]
    assert summary["seed"] == 11 and summary["samples"] == 2000


def test_kac_matches_monte_carlo_slope():
    from ergolin.clt_lab import _sample_sums
    for b in (Fraction(1, 2), Fraction(1, 3)):
        f = favourite_f(b)
        sigma2 = kac_sigma2(f, max_lag=16).value
        var = {}
        for n in (1024, 4096):
            exp = CltExperiment(Doubling(), f, "sqrt_n", n, 20000, 4242)
            var[n] = float(np.var(_sample_sums(exp), ddof=1))
        slope = (var[4096] - var[1024]) / 3072
        assert abs(slope / sigma2 - 1) < 0.05


# ---------------------------------------------------------------------------
# range growth

CHECKPOINTS = [10, 100, 1000, 10 ** 4, 10 ** 5, 10 ** 6]


def _omega(seed):
    return TorusPoint(seed * 0x9E3779B97F4A7C15 << 64)


def test_range_plateau_for_coboundary_b():
    b = (3 * GOLDEN_ALPHA) % 1
    probe = range_growth_probe(GOLDEN_ROT, favourite_f(b), _omega(1), CHECKPOINTS)
    assert probe.plateau
    assert probe.running_max[-1] < 10
    assert probe.running_min[-1] > -10


def test_range_grows_for_half():
    probe = range_growth_probe(GOLDEN_ROT, F_HALF, _omega(1), CHECKPOINTS)
    assert not probe.plateau
    assert probe.running_max[-1] >= probe.running_max[2] + 2
    assert probe.running_min[-1] <= probe.running_min[2] - 1


def test_range_doubling_clt_scale():
    omega = BitStream.random(10 ** 6 + 128, 2)
    probe = range_growth_probe(Doubling(), F_HALF, omega, CHECKPOINTS)
    assert not probe.plateau
    bar = 3 * math.sqrt(10 ** 6) * 0.1
    assert probe.running_max[-1] > bar
    assert probe.running_min[-1] < -bar


def test_range_checkpoint_validation():
    with pytest.raises(ConfigError):
        range_growth_probe(GOLDEN_ROT, F_HALF, _omega(1), [10, 10, 100])
    with pytest.raises(ConfigError):
        range_growth_probe(GOLDEN_ROT, F_HALF, _omega(1), [100, 10])


# ---------------------------------------------------------------------------
# W-set density

def test_w_set_extreme_thresholds():
    rep = w_set_report(GOLDEN_ALPHA, F_THIRD, 500, [0.0, 1e6], R=500)
    assert rep.density_m[0] == 1.0
    assert rep.density_logn[0] == 1.0
    assert rep.density_m[1] == 0.0
    assert rep.density_logn[1] == 0.0


def test_w_set_golden_density():
    rep = w_set_report(GOLDEN_ALPHA, F_THIRD, 10 ** 4, [0.05, 0.5])
    assert rep.density_m[0] >= 0.9
    assert rep.density_m[0] >= rep.density_m[1]
    assert rep.density_logn[0] >= rep.density_logn[1]
    # only n = 1 sits below q_2 for the golden ratio
    assert rep.skipped == 1
    assert rep.counted == 10 ** 4 - 1


def test_w_set_rational_alpha_degenerate():
    rep = w_set_report(Fraction(1, 5), F_THIRD, 100, [0.1])
    assert rep.counted == 0
    assert rep.density_m == (0.0,)


# ---------------------------------------------------------------------------
# L_n subsequence scale

def test_subsequence_scale_validation():
    with pytest.raises(ConfigError):
        SubsequenceScale((1,), (2,), (0, 5, 5))
    with pytest.raises(ConfigError):
        SubsequenceScale((1,), (2,), (1, 2))


def test_build_scale_pow2():
    sel = select_tk(CF_POW2, 4)
    scale = build_scale(CF_POW2, sel)
    assert scale.indices == (1, 2, 3, 4)
    assert scale.q_values == (1, 3, 13, 107)
    assert scale.L == (0, 1, 4, 17, 124)


def test_ln_scale_golden_hypothesis_unmet():
    cf = cf_expand(GOLDEN_ALPHA, 40, uncertainty=Fraction(1, 1 << 320))
    rep = ln_scale_experiment(cf, F_THIRD, count=4, samples=1000, seed=5)
    assert not rep.hypothesis_met
    assert rep.distribution is None
    assert rep.selection.indices == (1,)
    assert rep.variance_equivalent > 0
    assert rep.gamma_lower_bound == pytest.approx(27 / (16 * math.pi ** 2))


def test_ln_scale_pow2_hypothesis_met():
    rep = ln_scale_experiment(CF_POW2, F_THIRD, count=5, samples=4000, seed=11)
    assert rep.hypothesis_met
    assert rep.scale.L[-1] == 1849
    d = rep.distribution
    assert d is not None
    assert 0.9 <= d.variance <= 1.1
    assert abs(d.mean) < 0.05
    # five quasi-independent blocks: variance is right but the law is
    # still visibly discrete, so only a loose KS bound makes sense here
    assert d.ks < 0.35
    assert rep.l2_norm == pytest.approx(d.scale)
    assert rep.variance_equivalent > 0


def test_gamma_floor_for_rational_b():
    # for b = 1/3 the weight gamma_m is sqrt(3)/2 / (pi(1-b)) whenever
    # 3 does not divide m, and 0 otherwise
    floor = 27 / (16 * math.pi ** 2)
    for m in (1, 2, 4, 5, 55307):
        assert F_THIRD.gamma_abs(m) ** 2 == pytest.approx(floor)
    for m in (3, 6, 1725):
        assert F_THIRD.gamma_abs(m) == pytest.approx(0.0)
