"""Numbered acceptance experiments behind the suite driver.

Each criterion is a self-contained run with committed seeds (derived from
the master seed, default 42) and pilot-fixed thresholds.  Runners return a
result record instead of raising, so the driver can print the whole
PASS/FAIL table even when one criterion is out of reach; the test suite
asserts the same records.
"""

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .birkhoff import (StepFunction, birkhoff_sums, CoboundaryWitness,
                       doubling_coboundary_obstruction, favourite_f,
                       oren_analysis, OrenVerdict, rational_coboundary)
from .clt_lab import CltExperiment, empirical_distribution
from .continued_fractions import cf_expand, golden_alpha
from .entire_products import (EntireProductSpec, PolyVector, max_rel_diff,
                              noncommuting_product, right_inverse)
from .errors import InternalConsistencyError
from .hardy_products import (AnalyticSymbol, BoundedOrbitCertificate,
                             BUILTIN_PAIRS, CoeffVector, HardyVerdict,
                             adjoint_apply, builtin_pair, classify, kernel,
                             nonuniversality_certificate, norm_trajectory,
                             product_apply, unimodular_pair, verdict_echo)
from .torus_dynamics import BitStream, Doubling, Interval, Rotation

MASTER_SEED = 42

_GOLDEN = golden_alpha(320)
_GOLDEN_CF = cf_expand(_GOLDEN, 64, uncertainty=Fraction(1, 1 << 318))


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float
    metrics: dict = field(default_factory=dict)

    @property
    def in_budget(self) -> bool:
        return self.seconds <= self.budget


def _seed_for(number: int, seed: int) -> int:
    return seed * 1000 + number


def _random_points(rng: np.random.Generator, count: int) -> list:
    return [Fraction(int(rng.integers(1, 1 << 62)), 1 << 62)
            for _ in range(count)]


def denjoy_koksma_certificate(seed: int = MASTER_SEED) -> CriterionResult:
    """|S_{q_k} f| <= 4 at every convergent denominator q_k <= 10^6.

    f = 1_{[0,1/2)} - 1/2 has variation 2, so 4 is a doubled certificate
    bound; the sums are exact rationals and the comparison is exact.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(_seed_for(1, seed))
    f = favourite_f(Fraction(1, 2))
    qs = sorted({int(_GOLDEN_CF.q[k]) for k in range(1, _GOLDEN_CF.depth + 1)
                 if 1 <= _GOLDEN_CF.q[k] <= 10 ** 6})
    rot = Rotation(_GOLDEN)
    worst = Fraction(0)
    for omega in _random_points(rng, 16):
        series = birkhoff_sums(rot, f, omega, qs[-1])
        for q in qs:
            worst = max(worst, abs(series.sum_exact(q)))
    passed = worst <= 4
    dt = time.perf_counter() - t0
    return CriterionResult(
        1, "Denjoy-Koksma certificate", passed,
        f"max |S_q| = {float(worst):.6f} over {len(qs)} denominators, "
        f"16 starting points", dt, 5.0,
        {"max_abs_sum": float(worst), "denominators": len(qs)})


# Pilot-fixed dichotomy thresholds.  For irrational b the attained sums are
# dense in the bounded range, so literal constancy never happens; the bounded
# side instead caps the in-window creep (measured <= 3e-4 at these horizons,
# against an unbounded-side creep of 2.0).
RANGE_CREEP_TOL = 0.01
RANGE_GROWTH_FACTOR = 2.0

# Decay-clause slack: during derivation-free runs p_5(S_n z^k) is nearly
# flat with genuine (exact-arithmetic) upticks of order 2^-a1, measured
# worst 3.3e-6 relative on the committed sample.  The slack sits well above
# that wiggle and thirteen orders below the contracting branch's per-step
# blowup, so it cannot mask a real failure.
DECAY_SLACK = 1e-4


def oren_dichotomy(seed: int = MASTER_SEED) -> CriterionResult:
    """Jump-coset verdicts and the matching running-range behaviour.

    b = 3 alpha mod 1 is a Z alpha + Z point: bounded sums predicted and the
    running range must sit still across [10^5, 10^6].  b = 1/2 is not:
    unbounded predicted and range(10^6) must at least double range(10^3).
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(_seed_for(2, seed))
    om_a, om_b = _random_points(rng, 2)
    rot = Rotation(_GOLDEN)

    b3 = (3 * _GOLDEN) % 1
    f3 = favourite_f(b3)
    rep3 = oren_analysis(f3, _GOLDEN_CF)
    s3 = birkhoff_sums(rot, f3, om_a, 10 ** 6)
    mx, mn = s3.running_max(), s3.running_min()
    creep = float((mx[10 ** 6] - mx[10 ** 5]) + (mn[10 ** 5] - mn[10 ** 6]))
    flat = creep <= RANGE_CREEP_TOL

    fh = favourite_f(Fraction(1, 2))
    reph = oren_analysis(fh, _GOLDEN_CF)
    sh = birkhoff_sums(rot, fh, om_b, 10 ** 6)
    mxh, mnh = sh.running_max(), sh.running_min()
    r_small = float(mxh[10 ** 3] - mnh[10 ** 3])
    r_big = float(mxh[10 ** 6] - mnh[10 ** 6])

    passed = (rep3.verdict is OrenVerdict.BoundedPredicted and flat
              and reph.verdict is OrenVerdict.UnboundedPredicted
              and r_big >= RANGE_GROWTH_FACTOR * r_small)
    dt = time.perf_counter() - t0
    return CriterionResult(
        2, "Oren dichotomy", passed,
        f"b=3a: {rep3.verdict.value}, range creep {creep:.2e} "
        f"(tol {RANGE_CREEP_TOL:g}); b=1/2: {reph.verdict.value}, "
        f"range {r_small:.3f} -> {r_big:.3f}", dt, 30.0,
        {"creep": creep, "range_small": r_small, "range_big": r_big,
         "bounded_verdict": rep3.verdict.value,
         "unbounded_verdict": reph.verdict.value})


def rational_coboundary_identity() -> CriterionResult:
    """Exact coboundary at alpha = 1/5, b = 2/5: identity and sum bound."""
    t0 = time.perf_counter()
    alpha = Fraction(1, 5)
    f = favourite_f(Fraction(2, 5))
    sol = rational_coboundary(alpha, f)
    ok = isinstance(sol, CoboundaryWitness) and sol.residual == 0
    grid_ok = True
    if ok:
        h = sol.h
        for i in range(1000):
            x = Fraction(i, 1000)
            if f.value_at(x) != h.value_at(x) - h.value_at((x + alpha) % 1):
                grid_ok = False
                break
        spread = max(h.values) - min(h.values)
        rot = Rotation(alpha, exact=True)
        sums_ok = True
        for i in range(0, 1000, 10):
            series = birkhoff_sums(rot, f, Fraction(i, 1000), 100)
            if any(abs(series.sum_exact(n)) > spread for n in range(1, 101)):
                sums_ok = False
                break
    else:
        grid_ok = sums_ok = False
        spread = None
    passed = ok and grid_ok and sums_ok
    dt = time.perf_counter() - t0
    return CriterionResult(
        3, "rational coboundary", passed,
        f"h built: {ok}, identity exact on 1000 grid points: {grid_ok}, "
        f"|S_n| <= max h - min h for n <= 100: {sums_ok}", dt, 1.0,
        {"spread": None if spread is None else float(spread)})


def kac_clt(seed: int = MASTER_SEED) -> CriterionResult:
    """Doubling-map CLT for the Rademacher step at b = 1/2."""
    t0 = time.perf_counter()
    f = StepFunction([Fraction(0), Fraction(1, 2)],
                     [Fraction(1), Fraction(-1)])
    exp = CltExperiment(Doubling(), f, "sqrt_n", 4096, 20000,
                        _seed_for(4, seed))
    rep = empirical_distribution(exp)
    passed = 0.95 <= rep.variance <= 1.05 and rep.ks <= 0.02
    dt = time.perf_counter() - t0
    return CriterionResult(
        4, "Kac CLT", passed,
        f"variance {rep.variance:.4f} (want [0.95, 1.05]), "
        f"KS {rep.ks:.4f} (want <= 0.02)", dt, 60.0,
        {"variance": rep.variance, "ks": rep.ks})


def doubling_obstruction() -> CriterionResult:
    """Im c_{3 2^k}(g) <= -2/(3 pi) + 1e-12 for k <= 12, closed forms."""
    t0 = time.perf_counter()
    rep = doubling_coboundary_obstruction(favourite_f(Fraction(1, 2)), 3, 12)
    target = -2 / (3 * math.pi)
    bound_ok = math.isclose(rep.bound, target, rel_tol=1e-12)
    worst = max(s.imag for s in rep.partial_sums)
    passed = rep.holds and bound_ok and worst <= target + 1e-12
    dt = time.perf_counter() - t0
    return CriterionResult(
        5, "doubling coboundary obstruction", passed,
        f"max Im = {worst:.12f} vs bound {target:.12f}", dt, 1.0,
        {"max_imag": worst, "bound": rep.bound})


def hardy_eigen_relation(seed: int = MASTER_SEED) -> CriterionResult:
    """Adjoint multipliers fix the kernels: residual <= 1e-9 at N = 512."""
    t0 = time.perf_counter()
    polys = [AnalyticSymbol.polynomial([0, 2]),
             AnalyticSymbol.polynomial([1, 0.5]),
             AnalyticSymbol.polynomial([1.5, 0.25])]
    rng = np.random.default_rng(_seed_for(6, seed))
    worst = 0.0
    for _ in range(16):
        lam = 0.8 * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        k = kernel(lam, 512)
        for phi in polys:
            out = adjoint_apply(phi, k.vec)
            target = np.conj(phi.evaluator(np.asarray([lam]))[0]) * k.vec.c
            worst = max(worst, float(np.linalg.norm(out.c - target)))
    passed = worst <= 1e-9
    dt = time.perf_counter() - t0
    return CriterionResult(
        6, "Hardy eigen-relation", passed,
        f"worst residual {worst:.3e} over 16 kernels x 3 symbols", dt, 1.0,
        {"residual": worst})


def product_cross_check(seed: int = MASTER_SEED) -> CriterionResult:
    """Step-by-step vs closed-form product on the mixing-demo pair."""
    t0 = time.perf_counter()
    spec = builtin_pair("mixing-demo", N=256)
    rng = np.random.default_rng(_seed_for(7, seed))
    om = BitStream.random(200 + 128, seed=_seed_for(7, seed) + 1)
    x = CoeffVector(rng.standard_normal(256) + 1j * rng.standard_normal(256))
    try:
        tr = product_apply(spec, om, 200, x, tol=1e-8)
        passed, gap = tr.max_rel_diff <= 1e-8, tr.max_rel_diff
        detail = f"route gap {gap:.3e} after 200 factors"
    except InternalConsistencyError as exc:
        passed, gap, detail = False, math.inf, str(exc)
    dt = time.perf_counter() - t0
    return CriterionResult(7, "product cross-implementation", passed,
                           detail, dt, 5.0, {"gap": gap})


def classifier_cases(seed: int = MASTER_SEED) -> CriterionResult:
    """The four built-in regimes land on their verdicts with evidence."""
    t0 = time.perf_counter()
    checks = {}

    rep = classify(builtin_pair("mixing-demo"))
    checks["mixing"] = rep.verdict is HardyVerdict.MixingByEigenvalues

    rep = classify(builtin_pair("remark-3.8"))
    checks["limit-case"] = (rep.verdict is HardyVerdict.LimitCaseInnerProduct
                            and not rep.image1_meets_circle
                            and not rep.image2_meets_circle)

    spec51 = builtin_pair("example-5.1")
    worst_dev = 0.0
    for i in range(8):
        om = BitStream.random(2000 + 128, seed=_seed_for(8, seed) + i)
        nt = norm_trajectory(spec51, om, range(100, 2001))
        worst_dev = max(worst_dev,
                        float(np.max(np.abs(nt.inverse_norms() - 1.0))))
    checks["inverse-isometry"] = worst_dev <= 1e-9

    specnd = builtin_pair("norm-decay")
    checks["norm-decay"] = (classify(specnd).verdict
                            is HardyVerdict.NonUniversalNormDecay)
    om = BitStream.random(200 + 128, seed=_seed_for(8, seed) + 99)
    n200 = float(norm_trajectory(specnd, om, [200]).norms()[0])
    checks["norm-below-1e-6"] = n200 <= 1e-6

    passed = all(checks.values())
    dt = time.perf_counter() - t0
    return CriterionResult(
        8, "classifier case studies", passed,
        ", ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()),
        dt, 30.0,
        {"inverse_dev": worst_dev, "norm_at_200": n200, **checks})


def slope_law(seed: int = MASTER_SEED) -> CriterionResult:
    """(1/n) log ||T_n|| within 0.05 of 1/2 at n = 10^4, example-5.1 pair."""
    t0 = time.perf_counter()
    spec = builtin_pair("example-5.1")
    worst = 0.0
    for i in range(8):
        om = BitStream.random(10 ** 4 + 128, seed=_seed_for(9, seed) + i)
        nt = norm_trajectory(spec, om, [10 ** 4])
        worst = max(worst, abs(float(nt.slopes[0]) - 0.5))
    passed = worst <= 0.05
    dt = time.perf_counter() - t0
    return CriterionResult(
        9, "log-norm slope law", passed,
        f"max |slope - 1/2| = {worst:.4f} over 8 samples", dt, 30.0,
        {"max_slope_dev": worst})


def nonuniversality(seed: int = MASTER_SEED) -> CriterionResult:
    """Bounded-orbit certificate at b = 2 alpha mod 1 under the golden
    rotation, with the unimodular-product pair built from s = 1/2."""
    t0 = time.perf_counter()
    b = (2 * _GOLDEN) % 1
    spec = unimodular_pair(b, s=0.5, transformation=Rotation(_GOLDEN))
    rng = np.random.default_rng(_seed_for(10, seed))
    omega = _random_points(rng, 1)[0]
    cert = nonuniversality_certificate(spec, omega, 10 ** 4, cf=_GOLDEN_CF)
    if isinstance(cert, BoundedOrbitCertificate):
        under = cert.trajectory_log_max <= math.log(cert.bound) + 1e-9
        passed = under
        detail = (f"route {cert.route}, sup_n |S_n| = {cert.s_sup:.3f}, "
                  f"log bound {math.log(cert.bound):.4f}, trajectory max "
                  f"{cert.trajectory_log_max:.4f}")
        metrics = {"bound": cert.bound, "s_sup": cert.s_sup,
                   "trajectory_log_max": cert.trajectory_log_max}
    else:
        passed, detail, metrics = False, cert.failed_check, {}
    dt = time.perf_counter() - t0
    return CriterionResult(10, "non-universality certificate", passed,
                           detail, dt, 30.0, metrics)


def entire_normal_form(seed: int = MASTER_SEED) -> CriterionResult:
    """Products, right inverses, and the seminorm-decay clause.

    The first two clauses hold with room.  The decay clause holds for
    lam = 2 and fails for lam = 1/2 on mixed letter patterns: the inverse
    carries lam^{-c} and the swap count c grows like n^2/8, so the
    contracting branch blows up instead of decaying (all-derivation
    patterns are the degenerate exception).  The clause is run as stated
    and the failure is reported, not patched over.
    """
    t0 = time.perf_counter()
    half1 = Interval(Fraction(0), Fraction(1, 2))
    half2 = Interval(Fraction(1, 2), Fraction(1))
    spec2 = EntireProductSpec(2.0, 1.0, half1, half2, Doubling(), N=1024)
    spech = EntireProductSpec(0.5, 1.0, half1, half2, Doubling(), N=1024)
    base = _seed_for(11, seed)
    omegas = [BitStream.random(228, seed=base + i) for i in range(50)]
    rng = np.random.default_rng(base)

    product_gap = 0.0
    for om in omegas:
        deg = int(rng.integers(3, 17))
        f = PolyVector(tuple(rng.standard_normal(deg + 1)
                             + 1j * rng.standard_normal(deg + 1)))
        product_gap = max(product_gap,
                          noncommuting_product(spec2, om, 100, f).max_rel_diff)

    identity_gap = 0.0
    for om in omegas:
        for k in range(9):
            sv = right_inverse(spec2, om, 100, k)
            back = noncommuting_product(spec2, om, 100, sv)
            identity_gap = max(identity_gap,
                               max_rel_diff(back.direct,
                                            PolyVector.monomial(k)))

    def violations(spec, streams):
        bad = 0
        for om in streams:
            prev = None
            for n in range(50, 101):
                cur = tuple(right_inverse(spec, om, n, k).seminorm(5.0)
                            for k in range(9))
                if prev is not None:
                    bad += sum(c > p * (1 + DECAY_SLACK)
                               for c, p in zip(cur, prev))
                prev = cur
        return bad

    decay_sample = omegas[:8]
    bad2 = violations(spec2, decay_sample)
    badh = violations(spech, decay_sample)

    passed = (product_gap <= 1e-9 and identity_gap <= 1e-6
              and bad2 == 0 and badh == 0)
    dt = time.perf_counter() - t0
    return CriterionResult(
        11, "entire normal form", passed,
        f"product gap {product_gap:.3e}, inverse identity gap "
        f"{identity_gap:.3e}, decay violations lam=2: {bad2}, "
        f"lam=1/2: {badh} (of 3600 steps; divergence is structural)",
        dt, 60.0,
        {"product_gap": product_gap, "identity_gap": identity_gap,
         "decay_violations_expanding": bad2,
         "decay_violations_contracting": badh})


def zero_one_echo(seed: int = MASTER_SEED) -> CriterionResult:
    """Classify verdicts agree across 32 orbit samples per built-in pair."""
    t0 = time.perf_counter()
    base = _seed_for(12, seed)
    details = []
    passed = True
    for p, name in enumerate(BUILTIN_PAIRS):
        spec = builtin_pair(name)
        omegas = [BitStream.random(512 + 128, seed=base + 32 * p + j)
                  for j in range(32)]
        verdicts = set(verdict_echo(spec, omegas, n=512))
        agree = len(verdicts) == 1
        passed &= agree
        details.append(f"{name}: {sorted(v.value for v in verdicts)}")
    dt = time.perf_counter() - t0
    return CriterionResult(12, "zero-one echo", passed,
                           "; ".join(details), dt, 30.0, {})


CRITERIA = (
    denjoy_koksma_certificate,
    oren_dichotomy,
    rational_coboundary_identity,
    kac_clt,
    doubling_obstruction,
    hardy_eigen_relation,
    product_cross_check,
    classifier_cases,
    slope_law,
    nonuniversality,
    entire_normal_form,
    zero_one_echo,
)


def run_all(seed: int = MASTER_SEED, numbers=None) -> list:
    """Run the selected criteria (all by default) in order."""
    wanted = set(numbers) if numbers is not None else None
    out = []
    for i, fn in enumerate(CRITERIA, start=1):
        if wanted is not None and i not in wanted:
            continue
        if fn in (rational_coboundary_identity, doubling_obstruction):
            out.append(fn())
        else:
            out.append(fn(seed))
    return out


def format_table(results) -> str:
    lines = ["  # status  time     criterion",
             "--- ------- -------- ---------"]
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        over = "" if r.in_budget else f"  [over budget {r.budget:g}s]"
        lines.append(f"{r.number:3d} {mark:7s} {r.seconds:7.2f}s "
                     f"{r.name}{over}")
    failed = [r.number for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} passed"
                 + (f"; failing: {failed}" if failed else ""))
    return "\n".join(lines)
