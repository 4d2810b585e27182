"""Continued fractions, convergents, Ostrowski digits, and the
equidistribution diagnostics used by the rotation central-limit experiments.

Digits come out of an interval Gauss map: the input carries an explicit
uncertainty and a partial quotient is emitted only while both interval
endpoints agree on it.  A wrong digit would silently corrupt every
downstream experiment, a shorter certified expansion never does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import ConfigError

PRECISION_BITS = 256
DEFAULT_UNCERTAINTY = Fraction(1, 1 << PRECISION_BITS)


def sqrt_fraction(n: int, bits: int = PRECISION_BITS) -> Fraction:
    """sqrt(n) truncated to the given number of fractional bits."""
    return Fraction(math.isqrt(n << (2 * bits)), 1 << bits)


def golden_alpha(bits: int = PRECISION_BITS) -> Fraction:
    """(sqrt(5) - 1) / 2, error below 2^-bits."""
    return (sqrt_fraction(5, bits + 2) - 1) / 2


def sqrt2_minus_1(bits: int = PRECISION_BITS) -> Fraction:
    return sqrt_fraction(2, bits + 1) - 1


@dataclass(frozen=True)
class ContinuedFraction:
    """A certified prefix [0; a_1, ..., a_depth] of an expansion.

    quotients[j] is a_{j+1}; p[k]/q[k] is the k-th convergent with the
    usual seeds p_0 = 0, p_1 = 1, q_0 = 1, q_1 = a_1.
    """

    quotients: tuple[int, ...]
    p: tuple[int, ...]
    q: tuple[int, ...]
    alpha: Fraction
    uncertainty: Fraction
    exhausted: bool
    terminated: bool

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def a(self, j: int) -> int:
        """Partial quotient a_j, 1-based as in the recurrences."""
        if not 1 <= j <= self.depth:
            raise ConfigError(f"a_{j} not computed (depth {self.depth})")
        return self.quotients[j - 1]

    def theta(self, k: int) -> Fraction:
        """Signed q_k alpha - p_k; its absolute value is ||q_k alpha||
        for k >= 1 (up to q_k * uncertainty, negligible here)."""
        return self.q[k] * self.alpha - self.p[k]

    def qk_alpha_dist(self, k: int) -> Fraction:
        return abs(self.theta(k))

    def reconstruction_error(self) -> Fraction:
        k = self.depth
        return abs(self.alpha - Fraction(self.p[k], self.q[k]))


def _convergents_from_quotients(quotients: Sequence[int]):
    p = [0, 1]
    q = [1]
    if quotients:
        q.append(quotients[0])
    for n in range(1, len(quotients)):
        p.append(quotients[n] * p[n] + p[n - 1])
        q.append(quotients[n] * q[n] + q[n - 1])
    p = p[:len(q)]
    return tuple(p), tuple(q)


def cf_expand(alpha, depth: int,
              uncertainty: Fraction = DEFAULT_UNCERTAINTY,
              exact: bool = False) -> ContinuedFraction:
    """Expand alpha to at most `depth` certified partial quotients.

    With exact=True the input Fraction is taken literally; a rational input
    then ends with the `terminated` flag set.  Otherwise the expansion stops
    (flag `exhausted`) as soon as the uncertainty interval straddles a digit
    boundary, so every emitted digit is correct for the true alpha.
    """
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    alpha = alpha if isinstance(alpha, Fraction) else Fraction(alpha)
    if exact:
        uncertainty = Fraction(0)
    if not (0 < alpha < 1):
        raise ConfigError("alpha must lie in (0, 1)")
    lo, hi = alpha - uncertainty, alpha + uncertainty
    digits: list[int] = []
    exhausted = False
    terminated = False
    while len(digits) < depth:
        if lo <= 0:
            if exact and lo == 0:
                terminated = True
            else:
                exhausted = True
            break
        if hi >= 1:
            exhausted = True
            break
        a_hi = math.floor(1 / hi)
        a_lo = math.floor(1 / lo)
        if a_hi != a_lo:
            exhausted = True
            break
        digits.append(a_hi)
        lo, hi = 1 / hi - a_hi, 1 / lo - a_hi
    p, q = _convergents_from_quotients(digits)
    return ContinuedFraction(tuple(digits), p, q, alpha, uncertainty,
                             exhausted, terminated)


def cf_from_quotients(quotients: Sequence[int]) -> ContinuedFraction:
    """Synthetic expansion with prescribed partial quotients.

    The represented alpha is only known to lie strictly between the last
    convergent and its mediant with the previous one; the midpoint is used
    with the half-width as uncertainty.
    """
    qs = tuple(int(a) for a in quotients)
    if not qs or any(a < 1 for a in qs):
        raise ConfigError("partial quotients must be positive integers")
    p, q = _convergents_from_quotients(qs)
    k = len(qs)
    end1 = Fraction(p[k], q[k])
    end2 = Fraction(p[k] + p[k - 1], q[k] + q[k - 1])
    alpha = (end1 + end2) / 2
    return ContinuedFraction(qs, p, q, alpha, abs(end1 - end2) / 2,
                             exhausted=False, terminated=False)


def convergents(cf: ContinuedFraction):
    """The (p, q) sequences; identities are checked exactly in tests."""
    return cf.p, cf.q


@dataclass(frozen=True)
class OstrowskiExpansion:
    digits: tuple[int, ...]
    residual: Fraction
    partial: bool                       # depth could not absorb b
    digit_ratios: tuple[float, ...]     # |b_n| / a_{n+1}
    qkb_dists: tuple[Fraction, ...]     # ||q_k b|| for k = 1..depth
    small_digit_regime: bool            # tail of |b_n|/a_{n+1} near zero
    weight: int                         # sum of b_n q_n over all digits


def _centered(x: Fraction) -> Fraction:
    """Representative of x mod 1 in (-1/2, 1/2]."""
    fr = x - (x.numerator // x.denominator)
    return fr if fr <= Fraction(1, 2) else fr - 1


def ostrowski(b, cf: ContinuedFraction,
              depth: Optional[int] = None) -> OstrowskiExpansion:
    """Digits b_n with b = sum b_n q_n alpha mod 1 up to a small residual.

    Route: locate the integer m < q_{depth+1} whose orbit point {m alpha}
    is nearest to b (modular-inverse seed, then exact descent by +-q_k
    index hops until no hop improves, which pins the error at or below
    ||q_depth alpha|| / 2), then read off the canonical greedy digits of m
    over the denominators.  Those digits satisfy 0 <= b_n <= a_{n+1}, with
    the cap value only following a zero digit, and sum to m itself.
    """
    b = b if isinstance(b, Fraction) else Fraction(b)
    if not 0 <= b < 1:
        raise ConfigError("b must lie in [0, 1)")
    depth = cf.depth if depth is None else min(depth, cf.depth)
    # one quotient past the digit range certifies the last cap and the grid
    work = cf
    if not cf.terminated:
        work = cf_expand(cf.alpha, depth + 1, cf.uncertainty)
    d_work = min(work.depth, depth + 1)
    alpha = cf.alpha
    grid = work.q[d_work]
    if grid == 1:
        digits = (0,) * d_work
        residual = _centered(b)
        m = 0
    else:
        p_mod = work.p[d_work] % grid
        t = (b.numerator * grid) // b.denominator
        best_m, best_e = 0, _centered(b)
        for target in (t, t + 1):
            m0 = (target * pow(p_mod, -1, grid)) % grid
            e0 = _centered(b - m0 * alpha)
            if abs(e0) < abs(best_e):
                best_m, best_e = m0, e0
        hops = [work.q[d_work - 1], -work.q[d_work - 1]]
        if d_work >= 2:
            hops += [work.q[d_work - 2], -work.q[d_work - 2]]
        improved = True
        while improved:
            improved = False
            for h in hops:
                cand = (best_m + h) % grid
                e = _centered(b - cand * alpha)
                if abs(e) < abs(best_e):
                    best_m, best_e = cand, e
                    improved = True
        m = best_m
        residual = best_e
        rem = m
        digit_list = [0] * d_work
        for n in range(d_work - 1, 0, -1):
            if n == 1 and work.q[1] == 1 and rem == 1:
                break           # q_1 == q_0: carry the unit on the alpha scale
            d, rem = divmod(rem, work.q[n])
            assert d <= work.quotients[n], "canonical digit cap violated"
            digit_list[n] = d
        assert rem <= work.quotients[0], "canonical digit cap violated"
        digit_list[0] = rem
        digits = tuple(digit_list)
    qkb = tuple(_dist_to_int(cf.q[k] * b) for k in range(1, depth + 1))
    ratios = tuple(digits[n] / work.quotients[n] for n in range(d_work))
    tail = ratios[2 * d_work // 3:]
    regime = bool(tail) and max(tail) <= 0.25
    if work.terminated:
        partial = residual != 0
    elif d_work <= depth:
        partial = True
    else:
        partial = abs(residual) >= cf.qk_alpha_dist(depth)
    return OstrowskiExpansion(digits, residual, partial, ratios, qkb,
                              regime, m)


def _dist_to_int(x: Fraction) -> Fraction:
    fr = x - (x.numerator // x.denominator)
    return min(fr, 1 - fr)


def star_discrepancy(points: Sequence[Fraction]) -> Fraction:
    """Exact star discrepancy of a finite sample in [0, 1)."""
    xs = sorted(points)
    n = len(xs)
    if n == 0:
        raise ConfigError("empty sample")
    best = Fraction(0)
    for i, x in enumerate(xs, start=1):
        best = max(best, Fraction(i, n) - x, x - Fraction(i - 1, n))
    return best


def discrepancy_qk_b(cf: ContinuedFraction, b, K: int) -> Fraction:
    """Star discrepancy of {q_k b mod 1 : 1 <= k <= K}."""
    if K < 8:
        raise ConfigError("K must be >= 8")
    if K > cf.depth:
        raise ConfigError(f"K={K} exceeds certified depth {cf.depth}")
    b = b if isinstance(b, Fraction) else Fraction(b)
    pts = []
    for k in range(1, K + 1):
        x = cf.q[k] * b
        pts.append(x - (x.numerator // x.denominator))
    return star_discrepancy(pts)


@dataclass
class HypothesisReport:
    """Diagnostics for the three Diophantine/Fourier growth conditions."""

    a_bound: dict                      # p -> minimal A with a_j <= A j^p
    eta_curve: list                    # (eta, count / N) pairs
    eta_star: Optional[float]          # rational-endpoint threshold, if any
    fraction_at_eta_star: Optional[float]
    gamma_terms: list                  # a_{j+1} |gamma_{q_j}(f)|, j = 0..N
    partial_averages: list             # (1/n) sum_{k<=n} sum_{0<|r|<=R} ...
    truncation_R: int


def hypothesis_checks(cf: ContinuedFraction, f, N: int,
                      R: int = 1000, eta_grid=None) -> HypothesisReport:
    """Evaluate the partial-quotient growth bound, the lower-frequency mass
    condition, and the resonant-variance condition for a step function f.

    f must expose gamma_abs(r) -> |gamma_r(f)| and (optionally) a rational
    discontinuity position f.b for the sharp eta threshold.
    """
    if N < 1:
        raise ConfigError("N must be >= 1")
    if N > cf.depth - 1:
        raise ConfigError(f"N={N} needs {N + 1} certified quotients, "
                          f"have {cf.depth}")
    a_bound = {}
    for p_exp in (0, Fraction(1, 16)):
        a_bound[p_exp] = max(cf.quotients[j - 1] / j ** float(p_exp)
                             for j in range(1, cf.depth + 1))
    terms = [cf.quotients[j] * f.gamma_abs(cf.q[j]) for j in range(N + 1)]
    if eta_grid is None:
        top = max(terms) if terms else 1.0
        eta_grid = [top * t / 16 for t in range(1, 17)]
    curve = [(eta, sum(t >= eta for t in terms) / N) for eta in eta_grid]
    eta_star = None
    frac_star = None
    b = getattr(f, "b", None)
    if isinstance(b, Fraction):
        qp = b.denominator
        pp = b.numerator
        if qp > 1:
            eta_star = min(abs(math.sin(math.pi * j * pp / qp))
                           for j in range(1, qp)) / (math.pi * (1 - float(b)))
            frac_star = sum(t >= eta_star - 1e-12 for t in terms) / N
    averages = []
    running = 0.0
    for k in range(1, N + 1):
        qk = cf.q[k]
        inner = 2.0 * sum(f.gamma_abs(r * qk) ** 2 / r ** 2
                          for r in range(1, R + 1))
        running += inner
        averages.append(running / k)
    return HypothesisReport(a_bound, curve, eta_star, frac_star,
                            terms, averages, R)


@dataclass(frozen=True)
class TkSelection:
    indices: tuple[int, ...]       # t_1 < t_2 < ... with a_{t_k+1} >= k^beta
    beta: float
    satisfied: bool                # all requested indices found


def select_tk(cf: ContinuedFraction, count: int, beta: float = 1.5) -> TkSelection:
    """Greedy earliest indices t_k with a_{t_k + 1} >= k^beta.

    a_{t+1} is quotients[t], so admissible t range over 1..depth-1.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    indices = []
    t = 1
    for k in range(1, count + 1):
        need = k ** beta
        while t < cf.depth and cf.quotients[t] < need:
            t += 1
        if t >= cf.depth:
            return TkSelection(tuple(indices), beta, False)
        indices.append(t)
        t += 1
    return TkSelection(tuple(indices), beta, True)
