"""Monte-Carlo distribution experiments: doubling-map and rotation CLT
probes, exact lag correlations, range growth, W-set densities, L_n scales."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .birkhoff import StepFunction, birkhoff_sums, fourier_coeffs, variance_exact
from .continued_fractions import ContinuedFraction, TkSelection, cf_expand, select_tk
from .errors import ConfigError
from .torus_dynamics import Doubling, Rotation

_U64 = 1 << 64
_CHUNK = 512


def thread_cap() -> int:
    """Worker cap from ERGOLIN_THREADS; results never depend on it."""
    raw = os.environ.get("ERGOLIN_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"ERGOLIN_THREADS must be an integer, got {raw!r}")
        if n < 1:
            raise ConfigError("ERGOLIN_THREADS must be >= 1")
        return n
    return min(os.cpu_count() or 1, 8)


def ks_statistic(samples: np.ndarray) -> float:
    """Exact two-sided Kolmogorov distance between the empirical CDF and Phi."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(x)
    if n == 0:
        raise ConfigError("empty sample")
    cdf = ndtr(x)
    i = np.arange(n)
    return float(np.maximum(cdf - i / n, (i + 1) / n - cdf).max())


@dataclass(frozen=True)
class CltExperiment:
    transformation: Union[Rotation, Doubling]
    f: StepFunction
    normalization: str          # sqrt_n | l2 | sqrt_k
    n: int
    samples: int
    seed: int
    k_index: Optional[int] = None   # the k in sqrt_k

    def __post_init__(self):
        if self.normalization not in ("sqrt_n", "l2", "sqrt_k"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if self.normalization == "sqrt_k" and not self.k_index:
            raise ConfigError("sqrt_k normalization needs k_index")
        if self.n < 1:
            raise ConfigError("need n >= 1")
        if self.samples < 10 ** 3:
            raise ConfigError("KS statistics below 10^3 samples are noise")


@dataclass(frozen=True)
class DistributionReport:
    mean: float
    variance: float
    ks: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    n: int
    samples: int
    seed: int
    normalization: str
    scale: float                # the divisor a_n actually applied

    def histogram_csv(self, fileobj) -> None:
        w = csv.writer(fileobj)
        w.writerow(["bin_left", "bin_right", "count"])
        for i, cnt in enumerate(self.hist_counts):
            w.writerow([repr(float(self.hist_edges[i])),
                        repr(float(self.hist_edges[i + 1])), int(cnt)])

    def summary_json(self) -> str:
        return json.dumps({"mean": self.mean, "var": self.variance,
                           "ks": self.ks, "n": self.n,
                           "samples": self.samples, "seed": self.seed},
                          sort_keys=True)


def _two_piece(f: StepFunction):
    if len(f.cuts) != 2 or f.cuts[0] != 0:
        raise ConfigError("samplers need the two-piece function cut at 0 and b")
    return f.cuts[1], float(f.values[0]), float(f.values[1])


def _doubling_chunk(rng, rows: int, n: int, b: Fraction, v1: float, v2: float):
    """Sums S_n for `rows` doubling orbits, one i.i.d. bit array per orbit.

    Dyadic b compares integer bit windows exactly; other b uses 53-bit
    windows, whose misclassification odds per orbit stay below n * 2^-53
    and are invisible at Monte-Carlo scale.
    """
    d = max(b.denominator.bit_length() - 1, 1)
    if b.denominator == (1 << d):
        bits = rng.integers(0, 2, size=(rows, n + d), dtype=np.int8)
        win = np.zeros((rows, n), dtype=np.int64)
        for j in range(d):                 # most significant bit first
            win = 2 * win + bits[:, j:j + n]
        hits = (win < int(b * (1 << d))).sum(axis=1)
    else:
        depth = 53
        bits = rng.integers(0, 2, size=(rows, n + depth), dtype=np.int8)
        win = np.zeros((rows, n), dtype=np.float64)
        for j in range(depth):
            win += bits[:, j:j + n] * (0.5 ** (j + 1))
        hits = (win < float(b)).sum(axis=1)
    return v1 * hits + v2 * (n - hits)


def _rotation_chunk(rng, rows: int, n: int, alpha: Fraction, b: Fraction,
                    v1: float, v2: float):
    """Sums S_n for `rows` uniform starting points under the rotation.

    Orbits run in 64-bit fixed point; the quantization drift n * 2^-64
    only reshuffles points already that close to a cut.
    """
    a = np.uint64((alpha.numerator * _U64 // alpha.denominator) % _U64)
    thr = np.uint64((b.numerator * _U64 // b.denominator) % _U64)
    x0 = rng.integers(0, _U64, size=rows, dtype=np.uint64)
    hits = np.zeros(rows, dtype=np.int64)
    block = 4096
    for start in range(0, n, block):
        idx = np.arange(start, min(start + block, n), dtype=np.uint64)
        xb = x0[:, None] + idx[None, :] * a    # uint64 wraparound is the mod 1
        hits += (xb < thr).sum(axis=1)
    return v1 * hits + v2 * (n - hits)


def _sample_sums(exp: CltExperiment) -> np.ndarray:
    b, v1, v2 = _two_piece(exp.f)
    n_chunks = (exp.samples + _CHUNK - 1) // _CHUNK
    seeds = np.random.SeedSequence(exp.seed).spawn(n_chunks)
    sizes = [min(_CHUNK, exp.samples - i * _CHUNK) for i in range(n_chunks)]

    def run(i: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(seeds[i]))
        if isinstance(exp.transformation, Doubling):
            return _doubling_chunk(rng, sizes[i], exp.n, b, v1, v2)
        if isinstance(exp.transformation, Rotation):
            return _rotation_chunk(rng, sizes[i], exp.n,
                                   exp.transformation.alpha, b, v1, v2)
        raise ConfigError(f"unknown transformation {exp.transformation!r}")

    workers = min(thread_cap(), n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    return np.concatenate(parts)


def _adaptive_R(n: int) -> int:
    """Parseval truncation that keeps the resonant blocks near scale n.

    Frequencies r with ||r alpha|| ~ 1/n carry kernel weight ~ n^2; they
    cluster at multiples of the denominators q_m <= n, so the truncation
    has to track n.  40 multiples leave under one percent of a block out.
    Capped at 4e6 to bound runtime; beyond that the norm is understated.
    """
    return max(10 ** 5, min(40 * n, 4 * 10 ** 6))


def _l2_norm(exp: CltExperiment) -> float:
    if isinstance(exp.transformation, Rotation):
        return math.sqrt(variance_exact(exp.transformation.alpha, exp.f,
                                        exp.n, R=_adaptive_R(exp.n)).value)
    return math.sqrt(doubling_sn_l2(exp.f, exp.n))


def empirical_distribution(exp: CltExperiment) -> DistributionReport:
    """Draw i.i.d. omega, normalize the sums, and compare against N(0,1)."""
    sums = _sample_sums(exp)
    if exp.normalization == "sqrt_n":
        scale = math.sqrt(exp.n)
    elif exp.normalization == "sqrt_k":
        scale = math.sqrt(exp.k_index)
    else:
        scale = _l2_norm(exp)
    if scale == 0 or not math.isfinite(scale):
        raise ConfigError("degenerate normalization: zero or non-finite scale")
    z = sums / scale
    counts, edges = np.histogram(z, bins=80)
    return DistributionReport(float(z.mean()), float(z.var(ddof=1)),
                              ks_statistic(z), edges, counts, exp.n,
                              exp.samples, exp.seed, exp.normalization,
                              float(scale))


# ---------------------------------------------------------------------------
# Exact doubling-map correlations and the Kac variance

def _cumulative(f: StepFunction):
    """F(cut_i) = integral of f over [0, cut_i], piece by piece."""
    acc = [Fraction(0)]
    ext = list(f.cuts) + [Fraction(1)]
    for i, v in enumerate(f.values):
        acc.append(acc[-1] + v * (ext[i + 1] - ext[i]))
    return acc


def doubling_correlation(f: StepFunction, k: int) -> Fraction:
    """Exact integral of f(x) f(2^k x) dx for a centered step function.

    Over a dyadic cell of width 2^-k on which f is constant the inner
    factor integrates to the (zero) mean, so only the cells straddling a
    cut of f contribute, each as a sum of exact antiderivative increments.
    """
    if k < 1:
        raise ConfigError("lag must be >= 1")
    if f.integral() != 0:
        raise ConfigError("correlation formula needs a centered function")
    acc = _cumulative(f)

    def F(t: Fraction) -> Fraction:
        lo, hi = 0, len(f.cuts)
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if f.cuts[mid] <= t:
                lo = mid
            else:
                hi = mid
        return acc[lo] + f.values[lo] * (t - f.cuts[lo])

    scale = 1 << k
    cells: dict[int, list[Fraction]] = {}
    for x in f.cuts:
        u = x * scale
        if u.denominator == 1:
            continue               # cut lands on a cell boundary: no straddle
        m = u.numerator // u.denominator
        cells.setdefault(m, []).append(u - m)
    total = Fraction(0)
    for m, inner in cells.items():
        grid = [Fraction(0)] + sorted(inner) + [Fraction(1)]
        for j in range(len(grid) - 1):
            mid_x = Fraction(m, scale) + (grid[j] + grid[j + 1]) / (2 * scale)
            total += f.value_at(mid_x) * (F(grid[j + 1]) - F(grid[j]))
    return total / scale


@dataclass(frozen=True)
class Sigma2Report:
    value: float
    norm2: Fraction             # ||f||_2^2
    correlations: tuple
    tail_bound: float

    def __float__(self):
        return self.value


def kac_sigma2(f: StepFunction, max_lag: int = 16) -> Sigma2Report:
    """sigma^2 = ||f||_2^2 + 2 sum_k corr_k for the doubling map, exact
    correlations up to max_lag plus a geometric bound on the remainder.

    Per straddled cell |corr_k| is at most max|f| * Var(F) / 2^k and at
    most len(cuts) cells straddle, so the dropped tail is bounded by
    2 * len(cuts) * max|f|^2 / 2^max_lag.
    """
    if max_lag > 24:
        raise ConfigError("lags beyond 24 explode the piece count")
    if max_lag < 0:
        raise ConfigError("need max_lag >= 0")
    norm2 = sum(v * v * w for v, w in zip(f.values, f.piece_lengths()))
    corr = tuple(doubling_correlation(f, k) for k in range(1, max_lag + 1))
    vmax = max(abs(float(v)) for v in f.values)
    tail = 2.0 * len(f.cuts) * vmax * vmax / (1 << max_lag)
    value = float(norm2 + 2 * sum(corr))
    return Sigma2Report(value, norm2, corr, tail)


def doubling_sn_l2(f: StepFunction, n: int, max_lag: int = 24) -> float:
    """||S_n f||_2^2 under doubling from the exact lag correlations."""
    norm2 = sum(v * v * w for v, w in zip(f.values, f.piece_lengths()))
    total = n * norm2
    for k in range(1, min(n, max_lag + 1)):
        total += 2 * (n - k) * doubling_correlation(f, k)
    return float(total)


# ---------------------------------------------------------------------------
# Range growth

@dataclass(frozen=True)
class RangeProbe:
    checkpoints: tuple
    running_max: tuple
    running_min: tuple
    plateau: bool


def range_growth_probe(t, f: StepFunction, omega,
                       checkpoints: Sequence[int]) -> RangeProbe:
    """Running extrema of S_n at the checkpoints.

    The plateau flag records whether both extrema were pinned two decades
    of n before the end, up to half the smallest step of f.  Bounded sums
    approach their supremum without attaining it, so record creep below
    one step signals no new excursion rather than growth.
    """
    cps = list(checkpoints)
    if cps != sorted(cps) or len(set(cps)) != len(cps) or cps[0] < 1:
        raise ConfigError("checkpoints must be strictly increasing, >= 1")
    series = birkhoff_sums(t, f, omega, cps[-1])
    mx, mn = series.running_max(), series.running_min()
    at_max = [float(mx[c]) for c in cps]
    at_min = [float(mn[c]) for c in cps]
    ref = 0
    for i, c in enumerate(cps):
        if c <= cps[-1] // 100:
            ref = i
    steps = [abs(float(v)) for v in f.values if v != 0]
    eps = min(steps) / 2 if steps else 0.0
    plateau = (at_max[-1] - at_max[ref] <= eps
               and at_min[ref] - at_min[-1] <= eps)
    return RangeProbe(tuple(cps), tuple(at_max), tuple(at_min), plateau)


# ---------------------------------------------------------------------------
# W-set density

@dataclass(frozen=True)
class WSetReport:
    c_grid: tuple
    density_m: tuple            # threshold c sqrt(m(n) / log m(n))
    density_logn: tuple         # threshold c sqrt(log n / log log n)
    counted: int
    skipped: int                # n too small for the m(n) normalization


def w_set_report(alpha, f: StepFunction, N: int, c_grid: Sequence[float],
                 R: int = 2000) -> WSetReport:
    """Fraction of n <= N whose ||S_n f||_2 clears the scaled threshold.

    Uses the same Parseval series as variance_exact at truncation R,
    vectorized over n.  m(n) is the largest index with q_m <= n; n with
    m(n) < 2 (or log n <= 1 for the second normalization) cannot be
    scored and are skipped.  Both threshold normalizations are reported.
    """
    alpha = alpha.alpha if isinstance(alpha, Rotation) else Fraction(alpha)
    if N < 1:
        raise ConfigError("need N >= 1")
    excluded = variance_exact(alpha, f, 1, R=R).excluded
    coeffs = fourier_coeffs(f, R)
    num, den = alpha.numerator, alpha.denominator
    xs, amps = [], []
    r_num = 0
    for r in range(1, R + 1):
        r_num = (r_num + num) % den
        if r in excluded:
            continue
        x = float(Fraction(r_num, den))
        s = math.sin(math.pi * x)
        xs.append(x)
        amps.append(2.0 * abs(coeffs.c_r(r)) ** 2 / (s * s))
    xs = np.array(xs)
    amps = np.array(amps)
    norms = np.empty(N + 1)
    norms[0] = 0.0
    for n in range(1, N + 1):
        sn = np.sin(math.pi * ((n * xs) % 1.0))
        norms[n] = math.sqrt(float(amps @ (sn * sn)))
    cf = cf_expand(alpha, 64, uncertainty=Fraction(1, 1 << 128))
    m_of_n = np.zeros(N + 1, dtype=np.int64)
    k = 0
    for n in range(1, N + 1):
        while k + 1 <= cf.depth and cf.q[k + 1] <= n:
            k += 1
        m_of_n[n] = k
    c_grid = tuple(float(c) for c in c_grid)
    usable_m = [n for n in range(1, N + 1) if m_of_n[n] >= 2]
    usable_log = [n for n in range(1, N + 1) if math.log(n) > 1.0]
    dens_m, dens_log = [], []
    for c in c_grid:
        hit_m = sum(1 for n in usable_m
                    if norms[n] >= c * math.sqrt(m_of_n[n] / math.log(m_of_n[n])))
        hit_log = sum(1 for n in usable_log
                      if norms[n] >= c * math.sqrt(math.log(n) / math.log(math.log(n))))
        dens_m.append(hit_m / len(usable_m) if usable_m else 0.0)
        dens_log.append(hit_log / len(usable_log) if usable_log else 0.0)
    return WSetReport(c_grid, tuple(dens_m), tuple(dens_log), len(usable_m),
                      N - len(usable_m))


# ---------------------------------------------------------------------------
# L_n subsequence scale

@dataclass(frozen=True)
class SubsequenceScale:
    indices: tuple              # t_k, 1-based positions into the quotients
    q_values: tuple             # q_{t_k}
    L: tuple                    # L_0 = 0, L_j = L_{j-1} + q_{t_j}

    def __post_init__(self):
        if list(self.L) != sorted(set(self.L)) or self.L[0] != 0:
            raise ConfigError("L must start at 0 and increase strictly")


def build_scale(cf: ContinuedFraction, selection: TkSelection) -> SubsequenceScale:
    qv = tuple(cf.q[t] for t in selection.indices)
    L = [0]
    for q in qv:
        L.append(L[-1] + q)
    return SubsequenceScale(selection.indices, qv, tuple(L))


@dataclass(frozen=True)
class LnScaleReport:
    selection: TkSelection
    scale: SubsequenceScale
    hypothesis_met: bool
    distribution: Optional[DistributionReport]
    l2_norm: float
    variance_equivalent: float
    gamma_lower_bound: Optional[float]


def ln_scale_experiment(cf: ContinuedFraction, f, count: int, samples: int,
                        seed: int, beta: float = 1.5,
                        R: int = 1000) -> LnScaleReport:
    """Distribution of S_{L_n} / ||S_{L_n}||_2 along the greedy t_k scale.

    When no admissible t_k exist (bounded quotients, e.g. the golden
    ratio) the hypothesis-met flag goes false and the Monte-Carlo stage
    is skipped; the variance-equivalent series, and for rational b the
    positive lower bound on the gamma weights, are still reported.
    """
    sel = select_tk(cf, count, beta=beta)
    scale = build_scale(cf, sel) if sel.indices else SubsequenceScale((), (), (0,))
    var_eq = 0.0
    for t in sel.indices:
        qt = cf.q[t]
        for r in range(1, R + 1):
            var_eq += 2.0 * f.gamma_abs(r * qt) ** 2 / (r * r)
    glb = None
    b = getattr(f, "b", None)
    if b is not None and b.denominator > 1:
        qp = b.denominator
        glb = min(math.sin(math.pi * j * b.numerator / qp) ** 2
                  for j in range(1, qp)) / ((1 - float(b)) ** 2 * math.pi ** 2)
    dist = None
    l2 = 0.0
    if sel.satisfied and scale.L[-1] >= 1:
        L_final = scale.L[-1]
        l2 = math.sqrt(variance_exact(cf.alpha, f, L_final,
                                      R=_adaptive_R(L_final)).value)
        if l2 == 0:
            raise ConfigError("degenerate normalization at the L_n scale")
        exp = CltExperiment(Rotation(cf.alpha), f, "l2", L_final, samples, seed)
        sums = _sample_sums(exp)
        z = sums / l2
        counts, edges = np.histogram(z, bins=80)
        dist = DistributionReport(float(z.mean()), float(z.var(ddof=1)),
                                  ks_statistic(z), edges, counts, L_final,
                                  samples, seed, "l2", l2)
    return LnScaleReport(sel, scale, sel.satisfied, dist, l2, var_eq, glb)
