"""Step functions on the torus: Birkhoff sums, jump analysis, Fourier data,
exact variance, and constructive coboundary checks for both transformations."""

from __future__ import annotations

import cmath
import csv
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .continued_fractions import ContinuedFraction, ostrowski
from .errors import ConfigError, InternalConsistencyError
from .torus_dynamics import Interval, Rotation, membership_counts

Value = Union[Fraction, float]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10 ** 15)
    return Fraction(x)


def _mod1(x: Fraction) -> Fraction:
    return x - (x.numerator // x.denominator)


class StepFunction:
    """Right-continuous piecewise-constant function on [0, 1).

    Pieces are [cuts[i], cuts[i+1]) with the last one running to 1; the
    canonical form always starts the cut list at 0 (a zero jump there is
    allowed).  Cut positions are exact rationals so that orbit evaluations
    and coboundary algebra stay exact.
    """

    def __init__(self, cuts: Sequence, values: Sequence[Value]):
        cuts = [_frac(c) for c in cuts]
        values = list(values)
        if len(cuts) != len(values) or not cuts:
            raise ConfigError("need one value per piece")
        if any(not 0 <= c < 1 for c in cuts):
            raise ConfigError("cuts must lie in [0, 1)")
        if sorted(set(cuts)) != cuts:
            raise ConfigError("cuts must be strictly increasing")
        if cuts[0] != 0:
            # cyclic input: the final piece wraps around through 0
            cuts.insert(0, Fraction(0))
            values.insert(0, values[-1])
        self.cuts = tuple(cuts)
        self.values = tuple(values)

    @classmethod
    def centered(cls, cuts: Sequence, values: Sequence[Value]) -> "StepFunction":
        f = cls(cuts, values)
        mean = f.integral()
        return cls(f.cuts, tuple(v - mean for v in f.values))

    @property
    def is_exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.values)

    def value_at(self, x) -> Value:
        x = _mod1(_frac(x))
        lo, hi = 0, len(self.cuts)
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if self.cuts[mid] <= x:
                lo = mid
            else:
                hi = mid
        return self.values[lo]

    def piece_lengths(self) -> tuple:
        ext = self.cuts + (Fraction(1),)
        return tuple(ext[i + 1] - ext[i] for i in range(len(self.cuts)))

    def integral(self) -> Value:
        return sum(v * w for v, w in zip(self.values, self.piece_lengths()))

    def jumps(self) -> dict:
        """Jump map x -> f(x+) - f(x-) over the points where it is nonzero."""
        out = {}
        for i, c in enumerate(self.cuts):
            d = self.values[i] - self.values[i - 1]
            if d != 0:
                out[c] = d
        return out

    def variation(self) -> Value:
        return sum(abs(d) for d in self.jumps().values())

    def shift(self, a) -> "StepFunction":
        """The function x -> f(x + a)."""
        a = _mod1(_frac(a))
        cuts = [_mod1(c - a) for c in self.cuts]
        order = sorted(range(len(cuts)), key=lambda i: cuts[i])
        return StepFunction([cuts[i] for i in order],
                            [self.values[i] for i in order])

    def __add__(self, other: "StepFunction") -> "StepFunction":
        cuts = sorted(set(self.cuts) | set(other.cuts))
        vals = [self.value_at(c) + other.value_at(c) for c in cuts]
        return StepFunction(cuts, vals)

    def scale(self, k) -> "StepFunction":
        return StepFunction(self.cuts, [k * v for v in self.values])

    def prune(self) -> "StepFunction":
        """Merge adjacent pieces carrying equal values."""
        cuts, vals = [self.cuts[0]], [self.values[0]]
        for c, v in zip(self.cuts[1:], self.values[1:]):
            if v != vals[-1]:
                cuts.append(c)
                vals.append(v)
        return StepFunction(cuts, vals)

    def __repr__(self):
        return f"StepFunction({len(self.cuts)} pieces)"


class FavouriteFunction(StepFunction):
    """1 on [0, b), -b/(1-b) on [b, 1); the paper-driving two-interval case."""

    def __init__(self, b: Fraction):
        if not 0 < b < 1:
            raise ConfigError("b must lie strictly inside (0, 1)")
        ratio = b / (1 - b)
        super().__init__([Fraction(0), b], [Fraction(1), -ratio])
        self.b = b
        self.ratio = ratio

    def c_r(self, r: int) -> complex:
        """Fourier coefficient (1/(1-b)) (1 - e^{-2 pi i r b}) / (2 pi i r)."""
        if r == 0:
            return 0j
        t = float(_mod1(r * self.b))
        return (1 - cmath.exp(-2j * math.pi * t)) / (2j * math.pi * r * float(1 - self.b))

    def gamma_abs(self, r: int) -> float:
        """|r c_r| = |sin(pi r b)| / (pi (1 - b)), reduced exactly mod 1."""
        if r == 0:
            return 0.0
        t = float(_mod1(r * self.b))
        return abs(math.sin(math.pi * t)) / (math.pi * float(1 - self.b))


def favourite_f(b) -> FavouriteFunction:
    f = FavouriteFunction(_frac(b))
    assert f.integral() == 0
    return f


# ---------------------------------------------------------------------------
# Birkhoff sums

@dataclass(frozen=True)
class BirkhoffSeries:
    """Visit counters of the two pieces plus everything derived from them.

    a1[n] and a2[n] count orbit points among the first n that landed in
    [0, b) and [b, 1); index 0 is the empty sum.  The real-valued S_n is
    derived on demand so the stored record stays exact.
    """

    a1: np.ndarray
    a2: np.ndarray
    v1: Value
    v2: Value

    @property
    def n_max(self) -> int:
        return len(self.a1) - 1

    def sums(self) -> np.ndarray:
        return float(self.v1) * self.a1 + float(self.v2) * self.a2

    def sum_exact(self, n: int) -> Value:
        return self.v1 * int(self.a1[n]) + self.v2 * int(self.a2[n])

    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.sums())

    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.sums())

    def write_csv(self, fileobj) -> None:
        w = csv.writer(fileobj)
        w.writerow(["n", "a1", "a2", "S", "runmax", "runmin"])
        s, mx, mn = self.sums(), self.running_max(), self.running_min()
        for n in range(len(s)):
            w.writerow([n, int(self.a1[n]), int(self.a2[n]),
                        repr(float(s[n])), repr(float(mx[n])), repr(float(mn[n]))])


def birkhoff_sums(t, f: StepFunction, omega, n: int) -> BirkhoffSeries:
    """Counters and sums S_k = sum_{i<k} f(tau^i omega) for k = 0..n."""
    if n < 1:
        raise ConfigError("need n >= 1")
    if len(f.cuts) != 2 or f.cuts[0] != 0:
        raise ConfigError("counter form needs a two-piece function cut at 0 and b")
    b = f.cuts[1]
    c1, c2 = membership_counts(t, omega, n, Interval(Fraction(0), b),
                               Interval(b, Fraction(1)))
    a1 = np.concatenate([[0], c1]).astype(np.int64)
    a2 = np.concatenate([[0], c2]).astype(np.int64)
    return BirkhoffSeries(a1, a2, f.values[0], f.values[1])


# ---------------------------------------------------------------------------
# Oren-style jump analysis

class OrenVerdict(enum.Enum):
    BoundedPredicted = "BoundedPredicted"
    UnboundedPredicted = "UnboundedPredicted"
    Inconclusive = "Inconclusive"


@dataclass(frozen=True)
class OrenCoset:
    points: tuple
    offsets: tuple          # k with point = rep + k*alpha mod 1, per point
    delta_sum: Value


@dataclass(frozen=True)
class OrenReport:
    verdict: OrenVerdict
    cosets: tuple
    delta: dict
    unresolved_pairs: int


def _zalpha_offset(d: Fraction, cf: ContinuedFraction, bound: int,
                   tol: Fraction) -> tuple:
    """Signed k with ||d - k alpha|| <= tol and |k| <= bound, if one exists.

    Returns (state, k) with state in {"yes", "no", "unsure"}.  The search
    runs against the expansion truncated where q_n first exceeds the k
    horizon; a deeper grid would place every d within tol of some huge-k
    point and say nothing about the bounded question.  Unsure covers
    residuals inside the band where the finite-precision alpha cannot
    separate membership from near-membership.
    """
    depth_t = cf.depth
    for t in range(1, cf.depth + 1):
        if cf.q[t] > bound:
            depth_t = t
            break
    best = None
    for target, sign in ((d, 1), (_mod1(-d), -1)):
        exp = ostrowski(target, cf, depth=depth_t)
        if best is None or abs(exp.residual) < best[0]:
            best = (abs(exp.residual), sign * exp.weight, exp.partial)
    res, k, partial = best
    if partial:
        return "unsure", None
    if res <= tol:
        # a nearest point beyond the horizon rules out any |k| <= bound
        # match: the second-nearest sits at least a grid gap away
        return ("yes", k) if abs(k) <= bound else ("no", None)
    if res <= 2 * tol + bound * cf.uncertainty:
        return "unsure", None
    return "no", None


def oren_analysis(f: StepFunction, cf: ContinuedFraction, k_bound: int = 10 ** 4,
                  tol: Fraction = Fraction(1, 1 << 64)) -> OrenReport:
    """Group the jump points of f into Z-alpha cosets and sum jumps per coset.

    All coset sums zero predicts bounded Birkhoff sums under the rotation;
    any nonzero sum predicts unbounded ones.  Pair decisions too close to
    the tolerance turn the verdict into Inconclusive.
    """
    jumps = f.jumps()
    points = sorted(jumps)
    groups: list[list] = []        # [rep, [(point, k)], ...]
    unresolved = 0
    for x in points:
        placed = False
        for g in groups:
            state, k = _zalpha_offset(_mod1(x - g[0]), cf, k_bound, tol)
            if state == "yes":
                g[1].append((x, k))
                placed = True
                break
            if state == "unsure":
                unresolved += 1
        if not placed:
            groups.append([x, [(x, 0)]])
    cosets = []
    delta = {}
    exact = f.is_exact
    any_nonzero = False
    near_zero = False
    for rep, members in groups:
        s = sum(jumps[x] for x, _ in members)
        if exact:
            nz = s != 0
        else:
            nz = abs(s) > 1e-9
            near_zero |= 1e-12 < abs(s) <= 1e-9
        any_nonzero |= nz
        cosets.append(OrenCoset(tuple(x for x, _ in members),
                                tuple(k for _, k in members), s))
        delta[rep] = s
    if unresolved or near_zero:
        verdict = OrenVerdict.Inconclusive
    elif any_nonzero:
        verdict = OrenVerdict.UnboundedPredicted
    else:
        verdict = OrenVerdict.BoundedPredicted
    return OrenReport(verdict, tuple(cosets), delta, unresolved)


# ---------------------------------------------------------------------------
# Fourier data and exact variance

@dataclass(frozen=True)
class FourierData:
    c: np.ndarray           # c[r] for r = 0..R; negative r by conjugation
    variation: float

    @property
    def R(self) -> int:
        return len(self.c) - 1

    def c_r(self, r: int) -> complex:
        if abs(r) > self.R:
            raise ConfigError(f"coefficient {r} beyond truncation {self.R}")
        return complex(self.c[r]) if r >= 0 else complex(np.conj(self.c[-r]))

    def gamma(self, r: int) -> complex:
        return r * self.c_r(r)


def fourier_coeffs(f: StepFunction, R: int) -> FourierData:
    """Coefficients c_r for |r| <= R: closed form for the two-interval
    function, exact piecewise integration otherwise."""
    if R < 1:
        raise ConfigError("need R >= 1")
    c = np.zeros(R + 1, dtype=np.complex128)
    c[0] = complex(float(f.integral()))
    if isinstance(f, FavouriteFunction):
        for r in range(1, R + 1):
            c[r] = f.c_r(r)
    else:
        ext = list(f.cuts) + [Fraction(1)]
        for r in range(1, R + 1):
            tot = 0j
            for i, v in enumerate(f.values):
                lo = cmath.exp(-2j * math.pi * float(_mod1(r * ext[i])))
                hi = cmath.exp(-2j * math.pi * float(_mod1(r * ext[i + 1])))
                tot += float(v) * (lo - hi)
            c[r] = tot / (2j * math.pi * r)
    V = float(f.variation())
    gmax = float(np.abs(np.arange(R + 1) * c).max())
    if gmax > V / (2 * math.pi) + 1e-9:
        raise InternalConsistencyError(
            f"gamma bound violated: {gmax} > V/(2 pi) = {V / (2 * math.pi)}")
    return FourierData(c, V)


@dataclass(frozen=True)
class VarianceReport:
    value: float
    n: int
    R: int
    excluded: tuple
    tail_estimate: float

    def __float__(self):
        return self.value


_RESONANCE_FLOOR = Fraction(1, 1 << 100)


def _dist_to_int_frac(x: Fraction) -> Fraction:
    m = _mod1(x)
    return min(m, 1 - m)


def variance_exact(alpha, f: StepFunction, n: int, R: int = 10 ** 5) -> VarianceReport:
    """||S_n f||_2^2 by Parseval: sum over 0 < |r| <= R of
    |c_r|^2 sin^2(pi n r alpha) / sin^2(pi r alpha).

    Frequencies with ||r alpha|| below 2^-100 are excluded and reported;
    at fixed precision a true resonance is indistinguishable from a near
    one and would only inject a spurious huge term.
    """
    alpha = alpha.alpha if isinstance(alpha, Rotation) else _frac(alpha)
    if n < 0:
        raise ConfigError("need n >= 0")
    if n == 0:
        return VarianceReport(0.0, 0, R, (), 0.0)
    data = fourier_coeffs(f, R)
    absc = np.abs(data.c)
    num, den = alpha.numerator, alpha.denominator
    acc = 0.0
    excluded = []
    r_num = 0
    for r in range(1, R + 1):
        r_num = (r_num + num) % den
        if min(r_num, den - r_num) * (1 << 100) < den:
            excluded.append(r)
            continue
        x = r_num / den                    # int/int division rounds correctly
        xn = ((n * r_num) % den) / den
        s = math.sin(math.pi * x)
        sn = math.sin(math.pi * xn)
        acc += 2.0 * float(absc[r]) ** 2 * (sn * sn) / (s * s)
    V = float(f.variation())
    tail = _variance_tail(alpha, V, n, R)
    return VarianceReport(acc, n, R, tuple(excluded), tail)


def _variance_tail(alpha: Fraction, V: float, n: int, R: int) -> float:
    """Sampled estimate of the mass beyond R, using the gamma bound
    |c_r| <= V/(2 pi r) and the kernel bound min(n, 1/(2||r alpha||))."""
    coef = (V / (2 * math.pi)) ** 2
    total = 0.0
    r = R + 1
    # 16 octaves, 32 deterministic probes each, then an n-capped closure
    for _ in range(16):
        width = r  # octave [r, 2r)
        step = max(1, width // 32)
        probes = range(r, 2 * r, step)
        vals = []
        for rr in probes:
            d = _dist_to_int_frac(rr * alpha)
            kern = min(float(n), 1.0 / (2.0 * float(d))) if d else float(n)
            vals.append(kern * kern / (rr * rr))
        total += 2.0 * coef * (sum(vals) / len(vals)) * width
        r *= 2
    total += 2.0 * coef * n * n / r
    return total


# ---------------------------------------------------------------------------
# Coboundary construction and obstruction

@dataclass(frozen=True)
class CoboundaryWitness:
    h: StepFunction
    residual: Value


@dataclass(frozen=True)
class NoSolution:
    witness: Fraction
    period_sum: Value


def rational_coboundary(alpha, f: StepFunction):
    """Solve f = h - h(. + alpha) for rational alpha = p/q, exactly.

    The period sums sum_{j<q} f(x + j alpha) must vanish identically; if
    one piece has a nonzero sum, that value and a point in the piece come
    back as the counterexample.
    """
    alpha = _frac(alpha)
    q = alpha.denominator
    cuts = sorted({_mod1(c - j * alpha) for c in f.cuts for j in range(q)})
    shifted = [f.shift(j * alpha) for j in range(q)]
    for x in cuts:
        ps = sum(g.value_at(x) for g in shifted)
        if ps != 0:
            return NoSolution(x, ps)
    values = []
    for x in cuts:
        values.append(-sum((j + 1) * shifted[j].value_at(x) for j in range(q))
                      / q)
    h = StepFunction(cuts, values).prune()
    residual = max(abs(f.value_at(x) - h.value_at(x) + h.value_at(x + alpha))
                   for x in cuts)
    return CoboundaryWitness(h, residual)


@dataclass(frozen=True)
class ObstructionReport:
    indices: tuple          # q * 2^j for j = 0..K
    partial_sums: tuple     # c_{q 2^j}(g) accumulated per the recursion
    bound: float            # -sin^2(pi q b) / (q pi (1 - b))
    holds: bool
    no_l2_solution: bool


def doubling_coboundary_obstruction(f: FavouriteFunction, q: int,
                                    K: int) -> ObstructionReport:
    """Imaginary-part obstruction to solving f = g - g(2.) in L^2.

    Along the doubling recursion the coefficient of g at frequency q 2^j
    is the partial sum of the c_{q 2^i}(f); its imaginary part stays below
    a strictly negative constant, so it cannot tend to zero.
    """
    if not isinstance(f, FavouriteFunction):
        raise ConfigError("obstruction uses the two-interval closed form")
    if q < 1 or q % 2 == 0:
        raise ConfigError("q must be odd")
    if _mod1(q * f.b) == 0:
        raise ConfigError("q b integer: the obstruction constant vanishes")
    bound = -math.sin(math.pi * float(_mod1(q * f.b))) ** 2 \
        / (q * math.pi * float(1 - f.b))
    sums = []
    acc = 0j
    idx = []
    for j in range(K + 1):
        r = q * (1 << j)
        acc += f.c_r(r)
        sums.append(acc)
        idx.append(r)
    holds = all(s.imag <= bound + 1e-12 for s in sums)
    return ObstructionReport(tuple(idx), tuple(sums), bound, holds, holds)
