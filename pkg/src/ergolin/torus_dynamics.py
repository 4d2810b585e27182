"""Exact arithmetic on the circle R/Z and the two driving maps.

Points carry 128 fractional bits.  Rotation orbits are iterated fixed-point
additions, which agree bit for bit with the one-shot value
(omega + i * alpha) mod 2^128, so the only deviation from the ideal real
orbit is the quantization of alpha: after i steps it is below i * 2^-128.
Rational angles p/q take an exact Fraction path with period exactly q.
The doubling map acts on explicit bit streams; every orbit point is read
off a 128-bit window, and a request past the stream horizon is an error,
never a silent truncation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ConfigError, HorizonError

FRAC_BITS = 128
SCALE = 1 << FRAC_BITS
_MASK = SCALE - 1
_M32 = (1 << 32) - 1
_M64 = (1 << 64) - 1


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise ConfigError(f"cannot interpret {x!r} as an exact number")


@dataclass(frozen=True, slots=True)
class TorusPoint:
    """A point of [0, 1) stored as an integer multiple of 2^-128."""

    frac: int

    def __post_init__(self):
        object.__setattr__(self, "frac", self.frac & _MASK)

    @classmethod
    def from_fraction(cls, x) -> "TorusPoint":
        x = _to_fraction(x)
        x -= x.numerator // x.denominator  # reduce mod 1
        return cls((x.numerator * SCALE) // x.denominator)

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint((self.frac + other.frac) & _MASK)

    def double(self) -> "TorusPoint":
        return TorusPoint((self.frac << 1) & _MASK)

    def as_fraction(self) -> Fraction:
        return Fraction(self.frac, SCALE)

    def __float__(self) -> float:
        return self.frac / SCALE

    def distance_to_zero(self) -> Fraction:
        """Distance to the nearest integer, exact."""
        return Fraction(min(self.frac, SCALE - self.frac), SCALE)


def _bound_parts(c: Fraction) -> tuple[int, bool]:
    """floor(c * 2^128) and whether c has a nonzero tail past 128 bits."""
    num = c.numerator * SCALE
    b, rem = divmod(num, c.denominator)
    return b, rem != 0


@dataclass(frozen=True)
class Interval:
    """Half-open interval [lo, hi) with exact endpoints, 0 <= lo < hi <= 1."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = _to_fraction(self.lo), _to_fraction(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if not (0 <= lo < hi <= 1):
            raise ConfigError(f"bad interval endpoints [{lo}, {hi})")

    @property
    def measure(self) -> Fraction:
        return self.hi - self.lo

    def contains_exact(self, x: Fraction) -> bool:
        return self.lo <= x < self.hi

    def contains_point(self, p: TorusPoint) -> bool:
        """Membership of a dyadic point (exact: p is exactly p.frac * 2^-128)."""
        x = Fraction(p.frac, SCALE)
        return self.lo <= x < self.hi

    def fixed_thresholds(self) -> tuple[int, int]:
        """Integer thresholds T such that a dyadic w is inside iff
        T_lo <= w <= T_hi, for the vector kernels.  T_hi may be -1 (empty)."""
        b_lo, tail_lo = _bound_parts(self.lo)
        # w * 2^-128 >= lo  iff  w >= lo * 2^128  iff  w >= b_lo + (1 if tail)
        t_lo = b_lo + (1 if tail_lo else 0)
        b_hi, tail_hi = _bound_parts(self.hi)
        # w * 2^-128 < hi   iff  w <= b_hi when tail, w <= b_hi - 1 otherwise
        t_hi = b_hi if tail_hi else b_hi - 1
        return t_lo, t_hi


def validate_partition(intervals: Sequence[Interval]) -> None:
    """Check that the intervals are disjoint and cover [0, 1)."""
    if not intervals:
        raise ConfigError("empty interval family")
    ordered = sorted(intervals, key=lambda iv: iv.lo)
    if ordered[0].lo != 0:
        raise ConfigError("intervals do not cover [0, 1): gap before first endpoint")
    cursor = Fraction(0)
    for iv in ordered:
        if iv.lo != cursor:
            raise ConfigError(f"intervals leave a gap or overlap at {cursor}")
        cursor = iv.hi
    if cursor != 1:
        raise ConfigError("intervals do not reach 1")


class Rotation:
    """x -> x + alpha mod 1.

    With exact=True, alpha must be rational and every orbit computation uses
    Fraction arithmetic (orbit period is exactly the reduced denominator).
    Otherwise alpha is quantized once to 128 fractional bits.
    """

    def __init__(self, alpha, exact: bool = False):
        alpha = _to_fraction(alpha)
        alpha -= alpha.numerator // alpha.denominator
        self.alpha = alpha
        self.exact = bool(exact)
        self.alpha_point = TorusPoint.from_fraction(alpha)

    def __repr__(self):
        if self.exact:
            return f"Rotation({self.alpha}, exact=True)"
        return f"Rotation(~{float(self.alpha_point):.12f})"


class Doubling:
    """x -> 2x mod 1, driven by an explicit bit stream."""

    def __repr__(self):
        return "Doubling()"


Transformation = Union[Rotation, Doubling]


class BitStream:
    """A finite prefix of a binary expansion, the sample space for doubling.

    A stream of length L supports n iteration steps only when L >= n + 128;
    every orbit point needs a full 128-bit window.
    """

    __slots__ = ("bits",)

    def __init__(self, bits: Iterable[int]):
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits,
                         dtype=np.uint8)
        if arr.ndim != 1:
            raise ConfigError("bit stream must be one-dimensional")
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ConfigError("bit stream entries must be 0 or 1")
        self.bits = arr
        self.bits.setflags(write=False)

    @classmethod
    def random(cls, length: int, seed) -> "BitStream":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        return cls(rng.integers(0, 2, size=length, dtype=np.uint8))

    @classmethod
    def from_point(cls, p: TorusPoint, length: int) -> "BitStream":
        """Binary expansion of a dyadic point (zero tail past 128 bits)."""
        bits = [(p.frac >> (FRAC_BITS - 1 - i)) & 1 if i < FRAC_BITS else 0
                for i in range(length)]
        return cls(bits)

    def __len__(self) -> int:
        return int(self.bits.size)

    def require_horizon(self, n: int) -> None:
        if len(self) < n + FRAC_BITS:
            raise HorizonError(
                f"stream of {len(self)} bits supports at most "
                f"{max(len(self) - FRAC_BITS, 0)} steps, requested {n}")

    def window_int(self, j: int) -> int:
        """The 128-bit window starting at position j, as an integer."""
        if j + FRAC_BITS > len(self):
            raise HorizonError(f"window at {j} exceeds stream length {len(self)}")
        w = 0
        for b in self.bits[j:j + FRAC_BITS]:
            w = (w << 1) | int(b)
        return w

    def point(self, j: int) -> TorusPoint:
        return TorusPoint(self.window_int(j))

    def compare_tail(self, j: int, c: Fraction) -> int:
        """Sign of (x - c), x being the number the stream encodes from
        position j onward.  Returns 0 when x >= c is certain but the unknown
        continuation leaves equality open; raises HorizonError when the
        available bits cannot decide the ordering at all."""
        rest = _to_fraction(c)
        if rest < 0 or rest > 1:
            raise ConfigError("comparison bound must lie in [0, 1]")
        if rest == 1:
            return -1
        for i in range(j, len(self)):
            if rest == 0:
                return 0
            rest *= 2
            digit = rest.numerator // rest.denominator
            bit = int(self.bits[i])
            if bit != digit:
                return 1 if bit > digit else -1
            rest -= digit
        if rest == 0:
            return 0
        raise HorizonError("bit stream exhausted while comparing against bound")


# ---------------------------------------------------------------------------
# orbit kernels
# ---------------------------------------------------------------------------

_VEC_LIMIT = 1 << 31  # keeps 32-bit limb products inside uint64


def rotation_orbit_limbs(rot: Rotation, omega: TorusPoint, n: int):
    """(hi, lo) uint64 arrays of the exact fixed-point orbit omega + i*alpha.

    Exact multiword arithmetic mod 2^128; identical to iterating TorusPoint
    addition n times.
    """
    if n < 0 or n >= _VEC_LIMIT:
        raise ConfigError(f"orbit length {n} outside [0, 2^31)")
    a = rot.alpha_point.frac
    limbs = [(a >> (32 * k)) & _M32 for k in range(4)]
    i = np.arange(n, dtype=np.uint64)
    c = i * np.uint64(limbs[0])
    lane0 = c & np.uint64(_M32)
    c = i * np.uint64(limbs[1]) + (c >> np.uint64(32))
    lane1 = c & np.uint64(_M32)
    c = i * np.uint64(limbs[2]) + (c >> np.uint64(32))
    lane2 = c & np.uint64(_M32)
    c = i * np.uint64(limbs[3]) + (c >> np.uint64(32))
    lane3 = c & np.uint64(_M32)
    lo = lane0 | (lane1 << np.uint64(32))
    hi = lane2 | (lane3 << np.uint64(32))
    # add omega with carry
    w_lo = np.uint64(omega.frac & _M64)
    w_hi = np.uint64(omega.frac >> 64)
    lo2 = lo + w_lo
    carry = (lo2 < lo).astype(np.uint64)
    hi2 = hi + w_hi + carry
    return hi2, lo2


def _limbs_leq(hi, lo, t: int):
    """Boolean array: 128-bit (hi, lo) <= t, for integer t possibly -1."""
    if t < 0:
        return np.zeros(hi.shape, dtype=bool)
    if t >= SCALE:
        return np.ones(hi.shape, dtype=bool)
    t_hi = np.uint64(t >> 64)
    t_lo = np.uint64(t & _M64)
    return (hi < t_hi) | ((hi == t_hi) & (lo <= t_lo))


def interval_mask(hi, lo, interval: Interval):
    """Membership mask for dyadic points given as limb arrays."""
    t_lo, t_hi = interval.fixed_thresholds()
    inside_hi = _limbs_leq(hi, lo, t_hi)
    below_lo = _limbs_leq(hi, lo, t_lo - 1)
    return inside_hi & ~below_lo


def orbit(t: Transformation, omega, n: int) -> list[TorusPoint]:
    """First n orbit points omega, T(omega), ..., T^{n-1}(omega)."""
    if n < 0:
        raise ConfigError("orbit length must be nonnegative")
    if isinstance(t, Rotation):
        if t.exact:
            x = _to_fraction(omega if not isinstance(omega, TorusPoint)
                             else omega.as_fraction())
            x -= x.numerator // x.denominator
            pts = []
            q = t.alpha.denominator
            # exact period q: compute one period, then reuse
            cycle = []
            cur = x
            for _ in range(min(n, q)):
                cycle.append(TorusPoint.from_fraction(cur))
                cur += t.alpha
                cur -= cur.numerator // cur.denominator
            for i in range(n):
                pts.append(cycle[i % q] if q <= n else cycle[i])
            return pts
        om = omega if isinstance(omega, TorusPoint) else TorusPoint.from_fraction(omega)
        pts = []
        cur = om
        for _ in range(n):
            pts.append(cur)
            cur = cur + t.alpha_point
        return pts
    if isinstance(t, Doubling):
        if not isinstance(omega, BitStream):
            raise ConfigError("doubling orbits need a BitStream sample")
        omega.require_horizon(n)
        pts = []
        w = omega.window_int(0)
        for j in range(n):
            pts.append(TorusPoint(w))
            if j + 1 < n:
                w = ((w << 1) & _MASK) | int(omega.bits[j + FRAC_BITS])
        return pts
    raise ConfigError(f"unknown transformation {t!r}")


def orbit_endpoint_oneshot(rot: Rotation, omega: TorusPoint, n: int) -> TorusPoint:
    """(omega + n * alpha) mod 1 in a single multiplication; cross-check route."""
    return TorusPoint((omega.frac + n * rot.alpha_point.frac) & _MASK)


def _doubling_membership(omega: BitStream, n: int, intervals: Sequence[Interval]):
    """Index of the containing interval for each of the first n doubling points.

    Window comparisons are pushed past 128 bits when a point ties with an
    endpoint; the stream horizon decides or an error is raised.
    """
    omega.require_horizon(n)
    bounds = []
    for iv in intervals:
        bounds.append((iv, _bound_parts(iv.lo), _bound_parts(iv.hi)))
    out = np.empty(n, dtype=np.int64)
    w = omega.window_int(0)
    for j in range(n):
        out[j] = -1
        for idx, (iv, (blo, tlo), (bhi, thi)) in enumerate(bounds):
            # decide lo <= x < hi with x = window w possibly extended
            if w > blo or (w == blo and not tlo):
                ge_lo = True
            elif w < blo:
                ge_lo = False
            else:
                ge_lo = omega.compare_tail(j + FRAC_BITS, Fraction(iv.lo * SCALE - blo)) >= 0
            if not ge_lo:
                continue
            if w < bhi:
                lt_hi = True
            elif w > bhi or (w == bhi and not thi):
                lt_hi = False
            else:
                lt_hi = omega.compare_tail(j + FRAC_BITS, Fraction(iv.hi * SCALE - bhi)) < 0
            if lt_hi:
                out[j] = idx
                break
        if out[j] < 0:
            raise ConfigError("intervals failed to classify an orbit point")
        if j + 1 < n:
            w = ((w << 1) & _MASK) | int(omega.bits[j + FRAC_BITS])
    return out


def membership_counts(t: Transformation, omega, n: int,
                      a1: Interval, a2: Interval):
    """Cumulative visit counts of the first n orbit points in each interval.

    Returns int64 arrays (c1, c2) of length n with c1[i-1] + c2[i-1] = i.
    The two intervals must partition [0, 1).
    """
    validate_partition([a1, a2])
    if n <= 0:
        raise ConfigError("need n >= 1")
    if isinstance(t, Rotation):
        if t.exact:
            x = _to_fraction(omega if not isinstance(omega, TorusPoint)
                             else omega.as_fraction())
            x -= x.numerator // x.denominator
            q = t.alpha.denominator
            period = min(n, q)
            pattern = np.empty(period, dtype=bool)
            cur = x
            for j in range(period):
                pattern[j] = a1.contains_exact(cur)
                cur += t.alpha
                cur -= cur.numerator // cur.denominator
            if n > q:
                reps = (n + q - 1) // q
                member = np.tile(pattern, reps)[:n]
            else:
                member = pattern
        else:
            om = omega if isinstance(omega, TorusPoint) else TorusPoint.from_fraction(omega)
            hi, lo = rotation_orbit_limbs(t, om, n)
            member = interval_mask(hi, lo, a1)
    elif isinstance(t, Doubling):
        idx = _doubling_membership(omega, n, [a1, a2])
        member = idx == 0
    else:
        raise ConfigError(f"unknown transformation {t!r}")
    c1 = np.cumsum(member, dtype=np.int64)
    c2 = np.arange(1, n + 1, dtype=np.int64) - c1
    return c1, c2


def iid_bit_check(omega: BitStream, n: int) -> bool:
    """Confirm that membership of the j-th doubling point in [0, 1/2)
    equals (bit_j == 0), recomputed through actual point comparisons."""
    half = Interval(Fraction(0), Fraction(1, 2))
    idx = _doubling_membership(omega, n, [half, Interval(Fraction(1, 2), Fraction(1))])
    want = omega.bits[:n] == 0
    return bool(np.array_equal(idx == 0, want))
