import json
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ergolin.entire_products as ep
from ergolin.entire_products import (AffineOp, EntireProductSpec,
                                     EntireVerdict, ExpTypeSymbol, NormalForm,
                                     PolyVector, apply_affine, apply_phiD,
                                     decay_csv, eigen_residual,
                                     inverse_decay_rows, max_rel_diff,
                                     noncommuting_product, normal_form_at,
                                     phiD_classifier, right_inverse)
from ergolin.errors import (ConfigError, HorizonError,
                            InternalConsistencyError)
from ergolin.torus_dynamics import BitStream, Doubling, Interval

HALF1 = Interval(Fraction(0), Fraction(1, 2))
HALF2 = Interval(Fraction(1, 2), Fraction(1))

# orbit bits double as letters: bit 0 lands in [0, 1/2) and selects the
# affine step, bit 1 selects the derivation step
OMEGA = BitStream.random(256, seed=31)

D = ExpTypeSymbol.derivation()


def spec_for(lam, b, N=1024):
    return EntireProductSpec(lam, b, HALF1, HALF2, Doubling(), N=N)


def pattern(bits):
    return BitStream(list(bits) + [0] * 128)


# ---- polynomial vectors --------------------------------------------------------

def test_polyvector_validation():
    with pytest.raises(ConfigError):
        PolyVector((1.0, math.nan))
    with pytest.raises(ConfigError):
        PolyVector((1.0, math.inf))
    with pytest.raises(ConfigError):
        PolyVector((Fraction(1), 2), log2_scale=8)


def test_polyvector_trims_trailing_zeros():
    p = PolyVector((1, 2, 0, 0))
    assert p.coeffs == (1, 2) and p.degree == 1
    assert PolyVector.zero().is_zero
    assert PolyVector.zero().degree == -1
    assert PolyVector.monomial(3).coeffs == (0, 0, 0, 1)
    assert PolyVector.monomial(0, Fraction(2, 3)).exact


def test_derivative_power_rule():
    p = PolyVector((Fraction(1, 3), 2, 0, 5))
    assert p.derivative().coeffs == (2, 0, 15)
    assert PolyVector.monomial(0).derivative().is_zero


def test_seminorm_exact_rational():
    # p_R sum: 1 + 2 (1/2) + (1/2)^2 = 9/4
    p = PolyVector((1, 2, 1))
    s = p.seminorm(Fraction(1, 2))
    assert isinstance(s, Fraction) and s == Fraction(9, 4)
    q = PolyVector((1.0, 2.0, 1.0))
    assert math.isclose(q.seminorm(0.5), 2.25, rel_tol=1e-12)
    assert math.isclose(q.log_seminorm(0.5), math.log(2.25), rel_tol=1e-12)


def test_seminorm_survives_extreme_scales():
    big = PolyVector((1.0,), log2_scale=3000)
    assert big.seminorm(1.0) == math.inf
    assert math.isclose(big.log_seminorm(1.0), 3000 * math.log(2),
                        rel_tol=1e-12)
    tiny = PolyVector((1.0,), log2_scale=-3000)
    assert tiny.seminorm(1.0) == 0.0
    assert math.isclose(tiny.log_seminorm(1.0), -3000 * math.log(2),
                        rel_tol=1e-12)


def test_max_rel_diff_aligns_scales():
    # 2.0 * 2^0 and 1.0 * 2^1 are the same vector
    assert max_rel_diff(PolyVector((2.0,)),
                        PolyVector((1.0,), log2_scale=1)) == 0.0
    assert max_rel_diff(PolyVector((Fraction(3, 2), 1)),
                        PolyVector((1.5, 1.0))) == 0.0
    # a 2^100 scale mismatch is a wholesale disagreement, not an overflow
    gap = max_rel_diff(PolyVector((1.0,), log2_scale=100), PolyVector((1.0,)))
    assert math.isclose(gap, 1.0, rel_tol=1e-12)
    assert max_rel_diff(PolyVector.zero(), PolyVector.zero()) == 0.0


# ---- symbols -------------------------------------------------------------------

def test_exp_symbol_matches_factorial_series():
    phi = ExpTypeSymbol.exp(1)
    assert len(phi.taylor) == 177  # 1/k! crosses 1e-320 there
    for k in range(21):
        assert math.isclose(abs(phi.taylor[k]), 1.0 / math.factorial(k),
                            rel_tol=1e-15)
    assert abs(phi.value(0.3 + 0.1j) - np.exp(0.3 + 0.1j)) < 1e-15
    assert phi.nonconstant and phi.type_m == 1.0 and phi.type_a == 1.0


def test_symbol_validation():
    with pytest.raises(ConfigError):
        ExpTypeSymbol.from_taylor(())
    with pytest.raises(ConfigError):
        ExpTypeSymbol((0, 1), type_m=1.0)
    with pytest.raises(ConfigError):
        ExpTypeSymbol((0, 1), type_m=-1.0, type_a=0.0)
    with pytest.raises(ConfigError):
        ExpTypeSymbol.from_taylor((1.0, math.inf))


def test_tail_bound_geometric_envelope():
    # oracle: K=2, x=0.5 gives M x^K/K! / (1 - x/(K+1)) = 2(1/8)/(5/6) = 3/10
    phi = ExpTypeSymbol.from_taylor((1, 1), type_constants=(2.0, 0.5))
    assert math.isclose(phi.tail_bound(1.0), 0.3, rel_tol=1e-12)
    assert phi.tail_bound(6.0) == math.inf  # x = 3 >= K + 1
    with pytest.raises(ConfigError):
        ExpTypeSymbol.from_taylor((1, 1)).tail_bound(1.0)


def test_derivation_symbol_evaluates_to_lambda():
    assert D.value(0.7 - 2j) == 0.7 - 2j
    assert D.label == "D" and D.nonconstant


# ---- phi(D) --------------------------------------------------------------------

def test_derivation_on_monomials():
    for k in range(6):
        out = apply_phiD(D, PolyVector.monomial(k))
        want = PolyVector.zero() if k == 0 else PolyVector.monomial(k - 1, k)
        assert out.coeffs == want.coeffs


def test_constant_symbol_is_identity():
    f = PolyVector((Fraction(1, 3), 2, 0, 5))
    out = apply_phiD(ExpTypeSymbol.from_taylor([1]), f)
    assert out.coeffs == f.coeffs and out.exact


def test_exp_D_translates_argument():
    out = apply_phiD(ExpTypeSymbol.exp(1), PolyVector.monomial(2))
    # e^D z^2 = (z+1)^2
    assert max(abs(complex(a) - b) for a, b
               in zip(out.scaled_coeffs(), [1.0, 2.0, 1.0])) < 1e-12
    out5 = apply_phiD(ExpTypeSymbol.exp(0.5), PolyVector.monomial(5))
    want = [math.comb(5, j) * 0.5 ** (5 - j) for j in range(6)]
    assert max(abs(complex(a) - b) for a, b
               in zip(out5.scaled_coeffs(), want)) < 1e-12


@settings(deadline=None)
@given(st.lists(st.integers(-9, 9), min_size=1, max_size=8),
       st.lists(st.integers(-3, 3), min_size=1, max_size=6))
def test_phiD_never_raises_degree(coeffs, prefix):
    f = PolyVector(tuple(coeffs))
    out = apply_phiD(ExpTypeSymbol.from_taylor(prefix), f)
    assert out.degree <= f.degree
    assert out.exact


# ---- affine substitutions ------------------------------------------------------

def test_affine_validation():
    with pytest.raises(ConfigError):
        AffineOp(0, 1)
    with pytest.raises(ConfigError):
        AffineOp(2.0, math.nan)
    with pytest.raises(ConfigError):
        AffineOp(1, 0).iterate(-1)


def test_affine_quadratic_oracle():
    # (2z+1)^2 = 4z^2 + 4z + 1
    out = apply_affine(AffineOp(2, 1), PolyVector.monomial(2))
    assert out.coeffs == (1, 4, 4)
    f = PolyVector((Fraction(1, 3), 2, 0, 5))
    assert apply_affine(AffineOp(1, 0), f).coeffs == f.coeffs


def test_iterate_law_exact():
    op = AffineOp(Fraction(2), Fraction(1))
    g = PolyVector((Fraction(1), Fraction(-2), Fraction(3), Fraction(1)))
    three = apply_affine(op, apply_affine(op, apply_affine(op, g)))
    assert three.coeffs == apply_affine(op.iterate(3), g).coeffs
    assert op.iterate(3).lam == 8 and op.iterate(3).b == 7


def test_iterate_float_lambda_one_branch():
    it = AffineOp(1.0, 0.25).iterate(8)
    assert it.lam == 1.0 and it.b == 2.0


@settings(deadline=None, max_examples=60)
@given(st.integers(-3, 3).filter(bool),
       st.fractions(min_value=-2, max_value=2, max_denominator=9),
       st.integers(0, 5))
def test_iterate_matches_repeated_application(lam, b, n):
    op = AffineOp(Fraction(lam), b)
    cur = PolyVector((Fraction(1), Fraction(-2), Fraction(3)))
    for _ in range(n):
        cur = apply_affine(op, cur)
    assert cur.coeffs == apply_affine(op.iterate(n), cur.__class__(
        (Fraction(1), Fraction(-2), Fraction(3)))).coeffs


def test_commutation_exact():
    # D T = lam T D on monomials, exactly in rational arithmetic
    op = AffineOp(Fraction(2, 3), Fraction(5, 7))
    for k in range(13):
        f = PolyVector.monomial(k)
        lhs = apply_affine(op, f).derivative()
        rhs = apply_affine(op, f.derivative())
        assert lhs.coeffs == tuple(op.lam * c for c in rhs.coeffs)


def test_commutation_float_complex():
    op = AffineOp(0.8 + 0.3j, 0.1 - 0.2j)
    f = PolyVector((0.4 - 1.1j, -0.7 + 0.2j, 1.3 + 0.9j, -0.5 - 0.6j, 0.2j))
    lhs = apply_affine(op, f).derivative()
    rhs = apply_affine(op, f.derivative())
    scaled = PolyVector(tuple(op.lam * c for c in rhs.coeffs),
                        log2_scale=rhs.log2_scale)
    assert max_rel_diff(lhs, scaled) <= 1e-12


# ---- noncommuting products -----------------------------------------------------

def test_time_order_of_the_pair():
    spec = spec_for(Fraction(2), Fraction(1), N=64)
    td = noncommuting_product(spec, pattern([0, 1]), 2, PolyVector.monomial(2))
    assert td.direct.coeffs == (4, 8) and td.normal_form.c == 1
    dt = noncommuting_product(spec, pattern([1, 0]), 2, PolyVector.monomial(2))
    assert dt.direct.coeffs == (2, 4) and dt.normal_form.c == 0
    assert td.max_rel_diff == 0.0 and dt.max_rel_diff == 0.0


def test_swap_count_beats_step_count():
    # TTTDDD on z^3: every D crosses all three T's, c = 9 > n = 6
    spec = spec_for(Fraction(2), Fraction(1), N=64)
    trip = noncommuting_product(spec, pattern([0, 0, 0, 1, 1, 1]), 6,
                                PolyVector.monomial(3))
    assert trip.normal_form.c == 9
    assert trip.direct.coeffs == (3072,)  # 2^9 * 3!


def test_single_letter_patterns():
    spec = spec_for(Fraction(2), Fraction(1), N=64)
    g = PolyVector((Fraction(1), Fraction(-2), Fraction(3), Fraction(1)))
    allt = noncommuting_product(spec, pattern([0] * 8), 8, g)
    law = apply_affine(AffineOp(Fraction(2), Fraction(1)).iterate(8), g)
    assert allt.normal_form.c == 0 and allt.direct.coeffs == law.coeffs
    alld = noncommuting_product(spec, pattern([1] * 3), 3, g)
    assert alld.normal_form.c == 0
    assert alld.direct.coeffs == g.derivative().derivative().derivative().coeffs


@settings(deadline=None, max_examples=60)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=48))
def test_swap_count_pair_oracle(bits):
    spec = spec_for(Fraction(2), Fraction(1), N=64)
    nf = normal_form_at(spec, pattern(bits), len(bits))
    assert nf.a1 == bits.count(0) and nf.a2 == bits.count(1)
    want = sum(bits[:t].count(0) for t, letter in enumerate(bits) if letter)
    assert nf.c == want


def test_float_normal_form_equivalence_50_patterns():
    rng = random.Random(777)
    spec = spec_for(2.0, 1.0)
    worst, over = 0.0, 0
    for _ in range(50):
        n = rng.randrange(40, 101)
        bits = [rng.randrange(2) for _ in range(n)]
        deg = rng.randrange(3, 17)
        coeffs = [complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
                  for _ in range(deg + 1)]
        trip = noncommuting_product(spec, pattern(bits), n,
                                    PolyVector(tuple(coeffs)))
        worst = max(worst, trip.max_rel_diff)
        over += trip.normal_form.c > n
    # dyadic lam and b keep both routes exact: measured worst gap is 0.0
    assert worst <= 1e-9
    assert over == 50  # balanced patterns push c well past n


def test_exact_vs_float_cross_check():
    omx = BitStream.random(192, seed=77)
    fe = PolyVector(tuple(Fraction((i * 5) % 11 - 5, 7) for i in range(41)))
    te = noncommuting_product(spec_for(Fraction(2), Fraction(1), N=256),
                              omx, 60, fe)
    tf = noncommuting_product(spec_for(2.0, 1.0, N=256), omx, 60,
                              PolyVector(tuple(complex(x) for x in fe.coeffs)))
    assert te.max_rel_diff == 0.0
    assert max_rel_diff(te.direct, tf.direct) < 1e-12  # measured 2.3e-16
    # degree bookkeeping: 28 derivation steps eat exactly 28 degrees
    assert te.normal_form.a2 == 28 and te.direct.degree == 40 - 28


def test_degree_bookkeeping_annihilation():
    omx = BitStream.random(192, seed=77)
    fe = PolyVector(tuple(Fraction(1) for _ in range(13)))
    trip = noncommuting_product(spec_for(Fraction(2), Fraction(1), N=256),
                                omx, 60, fe)
    assert trip.direct.is_zero and trip.closed.is_zero


def test_product_guards():
    spec = spec_for(Fraction(2), Fraction(1), N=16)
    with pytest.raises(ConfigError):
        noncommuting_product(spec, OMEGA, 0, PolyVector.monomial(1))
    with pytest.raises(HorizonError):
        noncommuting_product(spec, OMEGA, 16, PolyVector.monomial(1))
    with pytest.raises(ConfigError):
        noncommuting_product(spec, OMEGA, 4, PolyVector.monomial(16))


def test_product_route_disagreement_raises(monkeypatch):
    spec = spec_for(2.0, 1.0, N=64)
    real = normal_form_at

    def skewed(s, omega, n):
        nf = real(s, omega, n)
        return NormalForm(nf.a1, nf.a2, nf.c + 3, nf.r)

    monkeypatch.setattr(ep, "normal_form_at", skewed)
    with pytest.raises(InternalConsistencyError):
        ep.noncommuting_product(spec, pattern([0, 1] * 4), 8,
                                PolyVector.monomial(5))


# ---- right inverses ------------------------------------------------------------

def test_trivial_single_derivation():
    s = right_inverse(spec_for(Fraction(2), Fraction(1), N=64),
                      pattern([1]), 1, 0)
    assert s.coeffs == (0, 1)  # S 1 = z


def test_two_step_inverse_hand_oracle():
    # T then D: a1 = a2 = c = 1, r = 1, so S z = (1/2) lam^-2 (z^2 - 2z)
    s = right_inverse(spec_for(Fraction(2), Fraction(1), N=64),
                      pattern([0, 1]), 2, 1)
    assert s.coeffs == (0, Fraction(-1, 4), Fraction(1, 8))


@pytest.mark.parametrize("lam", [Fraction(2), Fraction(1, 2)])
def test_exact_composition_identity(lam):
    bits = [0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0]
    spec = spec_for(lam, Fraction(1), N=128)
    for k in range(5):
        s = right_inverse(spec, pattern(bits), 12, k)
        back = noncommuting_product(spec, pattern(bits), 12, s)
        assert back.direct.coeffs == PolyVector.monomial(k).coeffs


def test_float_composition_long_horizon():
    spec = spec_for(2.0, 1.0)
    worst = 0.0
    for k in range(9):
        s = right_inverse(spec, OMEGA, 100, k)
        back = noncommuting_product(spec, OMEGA, 100, s)
        worst = max(worst, max_rel_diff(back.direct, PolyVector.monomial(k)))
    assert worst < 1e-8  # measured 2.7e-11


def test_contracting_float_matches_exact_lane():
    # |lam| < 1 floats verify through the exact dyadic shadow; the
    # coefficients must still match the rational lane bit for bit-ish
    spec = spec_for(0.5, 1.0, N=256)
    spec_q = spec_for(Fraction(1, 2), Fraction(1), N=256)
    for k in range(5):
        s = right_inverse(spec, OMEGA, 40, k)
        s_q = right_inverse(spec_q, OMEGA, 40, k)
        as_float = PolyVector(tuple(complex(x) for x in s_q.coeffs))
        assert max_rel_diff(s, as_float) < 1e-12  # measured 1.3e-14


def test_complex_symbol_composition():
    spec = spec_for(1.5 + 0.5j, 0.25j, N=256)
    om = pattern([0, 1, 0, 0, 1, 1, 0, 1] * 3)
    for k in range(4):
        s = right_inverse(spec, om, 24, k)
        back = noncommuting_product(spec, om, 24, s)
        gap = max_rel_diff(back.direct, PolyVector.monomial(k))
        assert gap < 1e-10  # measured 1.5e-14


def test_drift_free_inverse_is_single_term():
    om = pattern([0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0])
    spec = spec_for(2.0, 0.0, N=64)
    for k in range(4):
        s = right_inverse(spec, om, 12, k)
        assert np.count_nonzero(s.coeffs) == 1
        back = noncommuting_product(spec, om, 12, s)
        assert max_rel_diff(back.direct, PolyVector.monomial(k)) < 1e-12
    # exact b=0 formula on TDTD: a1 = a2 = 2, c = 3, S z = 3^-5 z^3 / 3!
    sq = right_inverse(spec_for(Fraction(3), Fraction(0), N=64),
                       pattern([0, 1, 0, 1]), 4, 1)
    assert sq.coeffs == (0, 0, 0, Fraction(1, 1458))


def test_right_inverse_guards():
    spec = spec_for(Fraction(2), Fraction(1), N=64)
    with pytest.raises(ConfigError):
        right_inverse(spec, OMEGA, 4, -1)
    with pytest.raises(HorizonError):
        right_inverse(spec_for(Fraction(2), Fraction(1), N=11),
                      pattern([1] * 10), 10, 1)


# ---- seminorm trajectories -----------------------------------------------------

def test_expanding_branch_decays_monotonically():
    rows = inverse_decay_rows(spec_for(2.0, 1.0), OMEGA, range(5),
                              range(1, 101))
    seq = [max(r["seminorms"][k] for k in range(5)) for r in rows]
    assert all(seq[i + 1] <= seq[i] for i in range(len(seq) - 1))
    # first step is a derivation: p_5(S_1 z^4) = 5^5/5 = 625
    assert math.isclose(seq[0], 625.0, rel_tol=1e-12)
    assert np.isclose(seq[24], 1.424680e-22, rtol=1e-4)
    assert seq[99] == 0.0  # underflows doubles outright


def test_contracting_branch_diverges():
    # lam^-c with c growing like n^2/8 swamps the factorial: no decay
    rows = inverse_decay_rows(spec_for(0.5, 1.0), OMEGA, range(5),
                              range(1, 101))
    seq = [max(r["seminorms"][k] for k in range(5)) for r in rows]
    cs = [r["c"] for r in rows]
    assert (cs[24], cs[49], cs[99]) == (74, 315, 1200)
    assert np.isclose(seq[24], 2.564290e42, rtol=1e-4)
    assert math.isinf(seq[99])
    increases = sum(seq[i + 1] > seq[i] for i in range(49, 99))
    assert increases == 38


def test_all_derivation_pattern_decays_in_both_branches():
    # a1 = c = 0 patterns drop lam entirely: S_n z^k = k! z^{k+n}/(k+n)!
    om = BitStream([1] * 256)
    vals = []
    for lam in (2.0, 0.5):
        rows = inverse_decay_rows(spec_for(lam, 1.0), om, range(5),
                                  range(50, 101))
        seq = [max(r["seminorms"][k] for k in range(5)) for r in rows]
        assert all(seq[i + 1] <= seq[i] for i in range(len(seq) - 1))
        vals.append(seq[-1])
    assert vals[0] == vals[1]
    assert np.isclose(vals[0], 8.452725758442722e-89, rtol=1e-12)


def test_decay_csv_shape():
    spec = spec_for(2.0, 1.0)
    txt = decay_csv(spec, OMEGA, range(3), [10, 50, 100])
    lines = txt.strip().splitlines()
    assert lines[0] == "n,p5_k0,p5_k1,p5_k2,c,a1,a2"
    assert len(lines) == 4
    rows = inverse_decay_rows(spec, OMEGA, range(3), [10, 50, 100])
    first = lines[1].split(",")
    assert first[0] == "10" and int(first[4]) == rows[0]["c"]
    for k in range(3):
        assert float(first[1 + k]) == float(rows[0]["seminorms"][k])


# ---- commuting-pair classifier -------------------------------------------------

def test_classifier_finds_both_witnesses():
    rep = phiD_classifier(ExpTypeSymbol.exp(1, label="e^z"), D,
                          Fraction(1, 2), Fraction(1, 2))
    assert rep.verdict is EntireVerdict.MIXING
    assert rep.refinement is None
    assert rep.witness_decay == 0j and rep.g_decay == 0.0
    # the grid contains lam = 4, the disk maximum of sqrt(|e^lam lam|)
    assert rep.witness_growth == 4 + 0j
    assert math.isclose(rep.g_growth, math.sqrt(math.exp(4) * 4),
                        rel_tol=1e-12)
    assert rep.grid_points == 2561 and rep.labels == ("e^z", "D")


def test_classifier_custom_grid_oracle():
    rep = phiD_classifier(ExpTypeSymbol.exp(1), D, 0.5, 0.5,
                          lam_grid=[0.5, 3.0])
    assert rep.verdict is EntireVerdict.MIXING
    assert rep.witness_growth == 3 + 0j and rep.witness_decay == 0.5 + 0j
    assert math.isclose(rep.g_growth, math.sqrt(math.exp(3) * 3),
                        rel_tol=1e-12)
    assert math.isclose(rep.g_decay, math.sqrt(math.exp(0.5) * 0.5),
                        rel_tol=1e-12)
    assert rep.radius == 3.0 and rep.grid_points == 2


def test_classifier_same_symbol_pair():
    rep = phiD_classifier(ExpTypeSymbol.exp(1), ExpTypeSymbol.exp(1),
                          0.5, 0.5)
    assert rep.verdict is EntireVerdict.MIXING


def test_classifier_constant_pair_cannot_refine():
    one = ExpTypeSymbol.from_taylor([1])
    rep = phiD_classifier(one, one, 0.5, 0.5)
    assert rep.verdict is EntireVerdict.UNRESOLVED
    assert "constant" in rep.refinement
    assert rep.witness_growth is None and rep.witness_decay is None
    assert rep.g_growth == 1.0 and rep.g_decay == 1.0


def test_classifier_one_sided_pairs_hint_refinement():
    grow_only = ExpTypeSymbol.from_taylor((6, 1))  # |6 + lam| >= 2 on the disk
    rep = phiD_classifier(grow_only, grow_only, 0.5, 0.5)
    assert rep.verdict is EntireVerdict.UNRESOLVED
    assert "g < 1" in rep.refinement and "2561" in rep.refinement
    shrink_only = ExpTypeSymbol.from_taylor((0, Fraction(1, 6)))
    rep2 = phiD_classifier(shrink_only, shrink_only, 0.5, 0.5)
    assert rep2.verdict is EntireVerdict.UNRESOLVED
    assert "g > 1" in rep2.refinement


def test_classifier_validation():
    with pytest.raises(ConfigError):
        phiD_classifier(D, D, 0.5, 0.4)
    with pytest.raises(ConfigError):
        phiD_classifier(D, D, 0.0, 1.0)
    with pytest.raises(ConfigError):
        phiD_classifier(D, D, 0.5, 0.5, radius=-1.0)
    with pytest.raises(ConfigError):
        phiD_classifier(D, D, 0.5, 0.5, lam_grid=[])


def test_report_json_round_trip():
    rep = phiD_classifier(ExpTypeSymbol.exp(1, label="e^z"), D,
                          Fraction(1, 2), Fraction(1, 2))
    assert rep.to_json() == rep.to_json()
    doc = json.loads(rep.to_json())
    assert doc["verdict"] == "Mixing"
    assert doc["witness_growth"] == [4.0, 0.0]
    assert doc["witness_decay"] == [0.0, 0.0]
    assert doc["symbols"] == ["e^z", "D"]
    assert doc["grid_points"] == 2561


# ---- eigenfunction residuals ---------------------------------------------------

def test_eigen_residual_small_truncation_oracle():
    # phi = D: the residual is the single spilled term lam^N z^{N-1}/(N-1)!
    res = eigen_residual(D, 0.5, N=8, R=1.0)
    assert math.isclose(res, 0.5 ** 8 / math.factorial(7), rel_tol=1e-12)


def test_eigen_residual_kernel_library():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(16):
        lam = 2.0 * math.sqrt(rng.uniform()) * np.exp(2j * np.pi
                                                      * rng.uniform())
        for phi in (ExpTypeSymbol.exp(1), ExpTypeSymbol.exp(-0.5 + 0.25j), D):
            worst = max(worst, eigen_residual(phi, lam, N=512, R=1.0))
    assert worst <= 1e-12  # measured 6.5e-15


def test_eigen_residual_guard():
    with pytest.raises(ConfigError):
        eigen_residual(D, 1.0, N=1)
