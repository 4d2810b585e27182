"""Random products of the derivation D and affine substitutions on
truncated entire functions.

Everything acts on P_N, polynomials of degree < N, where D is nilpotent and
phi(D) = sum_k a_k D^k is a finite sum.  The two step kinds do not commute:
D T_{lam,b} = lam T_{lam,b} D, so an n-step product collapses to
lam^c T^{a1} D^{a2} with an explicit swap count c.  The module computes the
product along the orbit and through the collapsed form (and refuses to return
if the two disagree), builds the explicit right inverse on monomials, and
classifies commuting phi(D) pairs through g = |phi1|^{m1} |phi2|^{m2} on the
kernel functions e_lam.

Number model: inputs that are ints or Fractions stay in exact rational
arithmetic end to end.  Anything else runs in complex floats with a shared
power-of-two exponent per vector, because lam^c alone overflows doubles long
before the interesting horizons (c grows like n^2 on mixed patterns, see
NormalForm).  Power-of-two rescaling is lossless, so the exponent ledger
never costs precision.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ConfigError, HorizonError, InternalConsistencyError
from .torus_dynamics import Interval, membership_counts, validate_partition

DEFAULT_TRUNCATION = 1024
TOL_PRODUCT = 1e-9
TOL_INVERSE = 1e-8

# mantissas are renormalised once their exponent drifts this far; frequent
# enough to keep headroom, rare enough to stay off the profile
_RESCALE_TRIGGER = 64
_LOG2 = math.log(2.0)


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _unit(z: complex) -> complex:
    a = abs(z)
    return z / a if a else 0j


# ---------------------------------------------------------------------------
# Polynomial vectors

@dataclass(frozen=True, eq=False)
class PolyVector:
    """Coefficients of a polynomial, lowest degree first.

    Exact mode (every entry an int or Fraction) keeps all downstream algebra
    rational.  Float mode stores complex mantissas plus log2_scale, so the
    represented coefficients are coeffs * 2**log2_scale.
    """

    coeffs: tuple
    log2_scale: int = 0

    def __post_init__(self):
        cs = list(self.coeffs)
        if not cs:
            cs = [0]
        exact = all(_is_exact(x) for x in cs)
        if not exact:
            cs = [complex(x) for x in cs]
            if not all(math.isfinite(z.real) and math.isfinite(z.imag)
                       for z in cs):
                raise ConfigError("polynomial coefficients must be finite")
        while len(cs) > 1 and not cs[-1]:
            cs.pop()
        if exact and self.log2_scale:
            raise ConfigError("exact vectors carry no exponent")
        object.__setattr__(self, "coeffs", tuple(cs))
        object.__setattr__(self, "log2_scale", int(self.log2_scale))

    @classmethod
    def monomial(cls, k: int, value=1) -> "PolyVector":
        if k < 0:
            raise ConfigError("monomial degree must be nonnegative")
        return cls((0,) * k + (value,))

    @classmethod
    def zero(cls) -> "PolyVector":
        return cls((0,))

    @property
    def exact(self) -> bool:
        return not isinstance(self.coeffs[0], complex)

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and not self.coeffs[0]

    @property
    def degree(self) -> int:
        """Degree of the polynomial, -1 for the zero polynomial."""
        return -1 if self.is_zero else len(self.coeffs) - 1

    def derivative(self) -> "PolyVector":
        if self.degree < 1:
            return PolyVector.zero()
        der = [j * self.coeffs[j] for j in range(1, len(self.coeffs))]
        return PolyVector(tuple(der), self.log2_scale)

    def scaled_coeffs(self) -> tuple:
        """Coefficients with the exponent applied (may overflow to inf)."""
        if self.exact:
            return self.coeffs
        if abs(self.log2_scale) < 2000:
            s = math.ldexp(1.0, self.log2_scale)
        else:
            s = math.inf if self.log2_scale > 0 else 0.0
        if s == 0:
            return tuple(0j for _ in self.coeffs)
        return tuple(z * s for z in self.coeffs)

    def log_seminorm(self, R) -> float:
        """Natural log of sum |c_j| R^j, the computable bound on p_R."""
        if self.is_zero:
            return -math.inf
        R = float(R)
        if R < 0:
            raise ConfigError("seminorm radius must be nonnegative")
        logs = [math.log(abs(z)) + j * math.log(R) if z and R else
                (math.log(abs(z)) if z and j == 0 else -math.inf)
                for j, z in enumerate(self.coeffs)]
        m = max(logs)
        if m == -math.inf:
            return -math.inf
        total = sum(math.exp(lg - m) for lg in logs if lg > -math.inf)
        return m + math.log(total) + self.log2_scale * _LOG2

    def seminorm(self, R):
        """Sum |c_j| R^j; exact Fraction for exact vectors and rational R."""
        if self.exact and _is_exact(R):
            if R < 0:
                raise ConfigError("seminorm radius must be nonnegative")
            return sum(abs(z) * R ** j for j, z in enumerate(self.coeffs))
        lg = self.log_seminorm(R)
        if lg == -math.inf:
            return 0.0
        try:
            return math.exp(lg)
        except OverflowError:
            return math.inf

    def __repr__(self):
        head = ", ".join(repr(z) for z in self.coeffs[:4])
        tail = ", ..." if len(self.coeffs) > 4 else ""
        sc = f", log2_scale={self.log2_scale}" if self.log2_scale else ""
        return f"PolyVector([{head}{tail}]{sc})"


def max_rel_diff(p: PolyVector, q: PolyVector) -> float:
    """Largest coefficient difference relative to the largest coefficient.

    Exact vectors compare exactly (0.0 or the true rational gap as float).
    Float vectors are aligned at the larger of the two exponents; the small
    side only shifts down, so alignment never overflows, and anything it
    flushes to zero sits ~300 decimal digits below the reported scale.
    """
    if p.exact and q.exact:
        n = max(len(p.coeffs), len(q.coeffs))
        a = list(p.coeffs) + [0] * (n - len(p.coeffs))
        b = list(q.coeffs) + [0] * (n - len(q.coeffs))
        diff = max(abs(x - y) for x, y in zip(a, b))
        scale = max(max(abs(x) for x in a), max(abs(y) for y in b))
        return 0.0 if not diff else float(diff / scale) if scale else math.inf
    if p.exact or q.exact:
        ex, fl = (p, q) if p.exact else (q, p)
        ex = PolyVector(tuple(complex(x) for x in ex.coeffs))
        p, q = ex, fl
    if p.is_zero and q.is_zero:
        return 0.0
    top = max(p.log2_scale, q.log2_scale)
    a = np.asarray(p.coeffs, dtype=np.complex128) \
        * 2.0 ** float(p.log2_scale - top)
    b = np.asarray(q.coeffs, dtype=np.complex128) \
        * 2.0 ** float(q.log2_scale - top)
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - b))) / scale


def _pv_from_parts(arr: np.ndarray, scale: float) -> PolyVector:
    """Build a float PolyVector from mantissas and a real-valued exponent."""
    if not arr.size or not np.any(arr):
        return PolyVector.zero()
    s2 = int(math.floor(scale))
    return PolyVector(tuple(arr * 2.0 ** (float(scale) - s2)), s2)


def _repack(arr: np.ndarray, scale: int):
    m = float(np.max(np.abs(arr)))
    if m == 0.0:
        return arr, 0
    e = math.frexp(m)[1]
    if abs(e) >= _RESCALE_TRIGGER:
        arr = arr * math.ldexp(1.0, -e)
        scale += e
    return arr, scale


# ---------------------------------------------------------------------------
# Symbols phi(D)

@dataclass(frozen=True, eq=False)
class ExpTypeSymbol:
    """Taylor coefficients of an exponential-type symbol phi.

    Only the first deg(f)+1 coefficients ever act on a polynomial f, since D
    is nilpotent on P_N; the stored prefix must simply be long enough for the
    vectors it meets.  type_m and type_a, when declared, are constants with
    |phi(z)| <= type_m * exp(type_a |z|) and feed certified tail bounds.  An
    evaluator, when present, supplies phi(lam) without truncation error.
    """

    taylor: tuple
    type_m: float | None = None
    type_a: float | None = None
    label: str = ""
    evaluator: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ts = tuple(self.taylor)
        if not ts:
            raise ConfigError("symbol needs at least one Taylor coefficient")
        if not all(_is_exact(a) for a in ts):
            ts = tuple(complex(a) for a in ts)
            if not all(math.isfinite(a.real) and math.isfinite(a.imag)
                       for a in ts):
                raise ConfigError("symbol coefficients must be finite")
        if (self.type_m is None) != (self.type_a is None):
            raise ConfigError("declare both type constants or neither")
        if self.type_m is not None and (self.type_m <= 0 or self.type_a < 0):
            raise ConfigError("need type_m > 0 and type_a >= 0")
        object.__setattr__(self, "taylor", ts)

    @classmethod
    def from_taylor(cls, coeffs, type_constants=None, label="") \
            -> "ExpTypeSymbol":
        m, a = type_constants if type_constants else (None, None)
        return cls(tuple(coeffs), m, a, label)

    @classmethod
    def derivation(cls) -> "ExpTypeSymbol":
        return cls((0, 1), 1.0, 1.0, "D", evaluator=lambda lam: complex(lam))

    @classmethod
    def exp(cls, a, label: str = "") -> "ExpTypeSymbol":
        """The translation generator e^{a z}: phi(D) f = f(. + a)."""
        a = complex(a)
        coeffs = [1.0 + 0j]
        k = 1
        while abs(coeffs[-1]) > 1e-320 and k < 1400:
            coeffs.append(coeffs[-1] * a / k)
            k += 1
        return cls(tuple(coeffs), 1.0, abs(a), label or f"exp({a:g}z)",
                   evaluator=lambda lam, _a=a: cmath.exp(_a * complex(lam)))

    @property
    def nonconstant(self) -> bool:
        return any(self.taylor[1:])

    def value(self, lam) -> complex:
        if self.evaluator is not None:
            return complex(self.evaluator(lam))
        acc = 0j
        for a in reversed(self.taylor):
            acc = acc * complex(lam) + complex(a)
        return acc

    def tail_bound(self, radius: float, terms: int | None = None) -> float:
        """Bound on |phi(lam) - partial sum| for |lam| <= radius.

        Needs declared type constants: the tail of M e^{A|z|} past index K is
        M (A r)^K / K! times a geometric factor once K+1 > A r.
        """
        if self.type_m is None:
            raise ConfigError("tail bound needs declared type constants")
        K = len(self.taylor) if terms is None else terms
        x = self.type_a * radius
        if x >= K + 1:
            return math.inf
        lead = math.exp(K * math.log(x) - math.lgamma(K + 1)) if x > 0 else 0.0
        return self.type_m * lead / (1.0 - x / (K + 1))


def apply_phiD(phi: ExpTypeSymbol, f: PolyVector) -> PolyVector:
    """phi(D) f = sum_k a_k f^(k): an exact finite sum, degree never grows."""
    terms = min(len(phi.taylor), len(f.coeffs))
    exact = f.exact and all(_is_exact(a) for a in phi.taylor[:terms])
    if exact:
        out = [0] * len(f.coeffs)
        der = list(f.coeffs)
        for k in range(terms):
            a = phi.taylor[k]
            if a:
                for j, cj in enumerate(der):
                    out[j] += a * cj
            der = [j * cj for j, cj in enumerate(der)][1:]
        return PolyVector(tuple(out))
    arr = np.asarray([complex(x) for x in f.coeffs], dtype=np.complex128)
    out = np.zeros_like(arr)
    der = arr
    for k in range(terms):
        a = complex(phi.taylor[k])
        if a:
            out[:der.size] += a * der
        der = der[1:] * np.arange(1, der.size)
    if not np.all(np.isfinite(out)):
        raise HorizonError("phi(D) overflows doubles on this input; "
                           "use exact coefficients or a lower degree")
    return _pv_from_parts(*_repack(out, f.log2_scale))


# ---------------------------------------------------------------------------
# Affine substitution

@dataclass(frozen=True, eq=False)
class AffineOp:
    """T_{lam,b} f = f(lam z + b), with lam nonzero."""

    lam: object
    b: object

    def __post_init__(self):
        for name in ("lam", "b"):
            v = getattr(self, name)
            if not _is_exact(v):
                v = complex(v)
                if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                    raise ConfigError(f"{name} must be finite")
                object.__setattr__(self, name, v)
        if not self.lam:
            raise ConfigError("lam = 0 is not an affine substitution")

    @property
    def exact(self) -> bool:
        return _is_exact(self.lam) and _is_exact(self.b)

    def iterate(self, n: int) -> "AffineOp":
        """The n-fold composition: (lam^n, b sum_{k<n} lam^k), exactly."""
        if n < 0:
            raise ConfigError("iterate count must be nonnegative")
        if self.exact:
            acc, p = 0, 1
            for _ in range(n):
                acc += p
                p *= self.lam
            return AffineOp(p, self.b * acc)
        lam, b = complex(self.lam), complex(self.b)
        p = lam ** n
        if not (math.isfinite(p.real) and math.isfinite(p.imag)):
            raise HorizonError("lam^n overflows doubles; use exact rationals")
        s = complex(n) if lam == 1 else (p - 1) / (lam - 1)
        return AffineOp(p, b * s)


_PASCAL = np.ones((1, 1))


def _pascal(d: int) -> np.ndarray:
    global _PASCAL
    if _PASCAL.shape[0] <= d:
        size = d + 1
        C = np.zeros((size, size))
        C[:, 0] = 1.0
        for i in range(1, size):
            C[i, 1:i + 1] = C[i - 1, 1:i + 1] + C[i - 1, :i]
        _PASCAL = C
    return _PASCAL[:d + 1, :d + 1]


def _affine_exact(lam, b, coeffs) -> tuple:
    d = len(coeffs) - 1
    out = [0] * (d + 1)
    lam_pow = [1]
    for _ in range(d):
        lam_pow.append(lam_pow[-1] * lam)
    for i, ci in enumerate(coeffs):
        if not ci:
            continue
        bp = 1
        for j in range(i, -1, -1):
            out[j] += ci * math.comb(i, j) * lam_pow[j] * bp
            bp *= b
    return tuple(out)


def _affine_float(arr: np.ndarray, scale: int, lam: complex, b: complex):
    """f(lam z + b) on mantissas.

    Two equivalent expansions are tried: the shift form
    sum_i c_i lam^i C(i,j) (b/lam)^{i-j} and the plain form
    sum_i c_i C(i,j) lam^j b^{i-j}.  They overflow in different parameter
    corners, so whichever stays finite wins; the matrices are triangular in
    the active degree only, never in N.
    """
    d = arr.size - 1
    if d == 0:
        return arr.copy(), scale
    if d > 8192:
        raise HorizonError("active degree too large for dense substitution")
    if b == 0:
        out = arr * np.power(lam, np.arange(d + 1))
        if np.all(np.isfinite(out.view(np.float64))):
            return _repack(out, scale)
        raise HorizonError("affine substitution overflows doubles; "
                           "use exact rationals or a lower degree")
    C = _pascal(d)
    diff = np.subtract.outer(np.arange(d + 1), np.arange(d + 1))
    lower = diff >= 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for form in ("shift", "plain"):
            if form == "shift":
                g = arr * np.power(lam, np.arange(d + 1))
                M = C * np.where(lower, np.power(b / lam, np.where(
                    lower, diff, 0)), 0)
                out = g @ M
            else:
                M = C * np.where(lower, np.power(b, np.where(
                    lower, diff, 0)), 0)
                out = (arr @ M) * np.power(lam, np.arange(d + 1))
            if np.all(np.isfinite(out.view(np.float64))):
                return _repack(out, scale)
    raise HorizonError("affine substitution overflows doubles; "
                       "use exact rationals or a lower degree")


def apply_affine(op: AffineOp, f: PolyVector) -> PolyVector:
    """Binomial-expansion substitution z -> lam z + b; exact in exact mode."""
    if f.is_zero:
        return PolyVector.zero()
    if op.exact and f.exact:
        return PolyVector(_affine_exact(op.lam, op.b, f.coeffs))
    arr = np.asarray([complex(x) for x in f.coeffs], dtype=np.complex128)
    out, scale = _affine_float(arr, f.log2_scale, complex(op.lam),
                               complex(op.b))
    return _pv_from_parts(out, scale)


# ---------------------------------------------------------------------------
# Random products

@dataclass(frozen=True, eq=False)
class EntireProductSpec:
    """Step rule for the product: points in a1 apply T_{lam,b}, else D."""

    lam: object
    b: object
    a1: Interval
    a2: Interval
    transformation: object
    N: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        validate_partition([self.a1, self.a2])
        AffineOp(self.lam, self.b)
        if self.N < 2:
            raise ConfigError("truncation must be at least 2")

    @property
    def affine(self) -> AffineOp:
        return AffineOp(self.lam, self.b)

    @property
    def exact(self) -> bool:
        return self.affine.exact


@dataclass(frozen=True, eq=False)
class NormalForm:
    """The collapsed product lam^c T^{a1} D^{a2}.

    c is the exact swap count: every D step contributes one factor lam per
    T step already applied, so c = sum over D steps of the running T count.
    On mixed patterns it grows like n^2, far past the linear bound one might
    expect; keep it an int and exponentiate in log space.
    """

    a1: int
    a2: int
    c: int
    r: object


@dataclass(frozen=True, eq=False)
class ProductTriple:
    direct: PolyVector
    normal_form: NormalForm
    closed: PolyVector
    max_rel_diff: float


def _letters(spec: EntireProductSpec, omega, n: int):
    c1, _ = membership_counts(spec.transformation, omega, n, spec.a1, spec.a2)
    member = np.diff(c1, prepend=0) > 0
    return member, c1


def normal_form_at(spec: EntireProductSpec, omega, n: int) -> NormalForm:
    """Letter counts, swap count, and shift of the n-step product."""
    if n < 1:
        raise ConfigError("need n >= 1")
    member, c1 = _letters(spec, omega, n)
    a1 = int(c1[-1])
    a2 = n - a1
    # a D at step t has c1[t] T's strictly before it (t itself is not a T)
    c = int(c1[~member].sum())
    if spec.exact:
        r = spec.affine.iterate(a1).b
    else:
        r = _r_value(complex(spec.lam), complex(spec.b), a1)
    return NormalForm(a1, a2, c, r)


def _r_polar(lam: complex, b: complex, a1: int):
    """(log2 |r|, unit phase) of r = b sum_{k<a1} lam^k, overflow-proof."""
    if b == 0 or a1 == 0:
        return -math.inf, 0j
    if lam == 1:
        r = b * a1
        return math.log2(abs(r)), _unit(r)
    lg_pow = a1 * math.log2(abs(lam))
    if abs(lg_pow) < 900:
        r = b * (lam ** a1 - 1) / (lam - 1)
        if r == 0:
            return -math.inf, 0j
        return math.log2(abs(r)), _unit(r)
    if lg_pow > 0:
        # lam^{a1} dominates the -1 beyond any double's ulp
        ph = _unit(b) * cmath.exp(1j * a1 * cmath.phase(lam)) / _unit(lam - 1)
        return math.log2(abs(b)) + lg_pow - math.log2(abs(lam - 1)), _unit(ph)
    r = b / (1 - lam)
    return math.log2(abs(r)), _unit(r)


def _r_value(lam: complex, b: complex, a1: int) -> complex:
    lg, ph = _r_polar(lam, b, a1)
    if lg == -math.inf:
        return 0j
    if lg > 1023:
        return complex(math.inf)  # recorded for reporting; math stays polar
    return ph * math.ldexp(1.0, int(math.floor(lg))) * \
        2.0 ** (lg - math.floor(lg))


def _closed_float(spec: EntireProductSpec, nf: NormalForm,
                  f: PolyVector) -> PolyVector:
    g = f
    for _ in range(nf.a2):
        g = g.derivative()
    if g.is_zero:
        return PolyVector.zero()
    lam = complex(spec.lam)
    lg_lam = math.log2(abs(lam))
    ph_lam = _unit(lam)
    arg_lam = cmath.phase(lam)
    lg_r, ph_r = _r_polar(lam, complex(spec.b), nf.a1)
    d = g.degree
    ph_r_pow = [1.0 + 0j]
    for _ in range(d):
        ph_r_pow.append(ph_r_pow[-1] * ph_r)
    coeff_logs = [-math.inf] * (d + 1)
    coeff_vals = [0j] * (d + 1)
    # magnitudes ride in the logs so the max-shift below cannot overflow
    # even when g's coefficients span thousands of binades
    cs = [complex(x) for x in g.coeffs]
    cs_abs = [abs(z) for z in cs]
    for j in range(d + 1):
        terms = []
        for i in range(j, d + 1):
            if not cs_abs[i]:
                continue
            if i > j and lg_r == -math.inf:
                continue
            lg_t = math.log2(cs_abs[i]) + math.log2(math.comb(i, j)) \
                + (i - j) * (lg_r if i > j else 0.0)
            terms.append((lg_t, cs[i] / cs_abs[i] * ph_r_pow[i - j]))
        if not terms:
            continue
        m = max(lg for lg, _ in terms)
        s = sum(v * 2.0 ** (lg - m) for lg, v in terms)
        if s == 0:
            continue
        # the swap factor lam^c and the stretch lam^{a1 j} enter here, both
        # in log2; their phases are exact unit rotations
        rot = cmath.exp(1j * arg_lam * (nf.c + nf.a1 * j)) \
            if ph_lam != 1 else 1.0
        coeff_logs[j] = m + (nf.c + nf.a1 * j) * lg_lam + g.log2_scale
        coeff_vals[j] = s * rot
    top = max(coeff_logs)
    if top == -math.inf:
        return PolyVector.zero()
    arr = np.zeros(d + 1, dtype=np.complex128)
    for j in range(d + 1):
        if coeff_logs[j] > top - 1200:
            arr[j] = coeff_vals[j] * 2.0 ** (coeff_logs[j] - top)
    return _pv_from_parts(arr, top)


def _closed_exact(lam, b, nf: NormalForm, f: PolyVector) -> PolyVector:
    g = f
    for _ in range(nf.a2):
        g = g.derivative()
    if g.is_zero:
        return PolyVector.zero()
    h = apply_affine(AffineOp(lam, b).iterate(nf.a1), g)
    w = Fraction(lam) ** nf.c
    return PolyVector(tuple(w * x for x in h.coeffs))


def closed_apply(spec: EntireProductSpec, nf: NormalForm,
                 f: PolyVector) -> PolyVector:
    """Apply the collapsed form lam^c f^(a2)(lam^{a1} z + r) in one shot."""
    if spec.exact and f.exact:
        return _closed_exact(spec.lam, spec.b, nf, f)
    return _closed_float(spec, nf, f)


def noncommuting_product(spec: EntireProductSpec, omega, n: int,
                         f: PolyVector, tol: float = TOL_PRODUCT) \
        -> ProductTriple:
    """T_n(omega) f along the orbit and through the normal form.

    The direct route applies one step at a time in orbit order; the closed
    route differentiates a2 times, substitutes lam^{a1} z + r once, and
    multiplies by lam^c.  They must agree: any gap beyond tol (exact modes
    must match exactly) is a bug in one of the routes and raises.
    """
    if n < 1:
        raise ConfigError("need n >= 1")
    if spec.N <= n:
        raise HorizonError(f"truncation N={spec.N} must exceed n={n}: "
                           "a run of derivations empties P_N silently")
    if f.degree >= spec.N:
        raise ConfigError(f"input degree {f.degree} is outside P_{spec.N}")
    member, c1 = _letters(spec, omega, n)
    nf = normal_form_at(spec, omega, n)
    exact = spec.exact and f.exact
    if exact:
        cur = f
        for t in range(n):
            cur = apply_affine(spec.affine, cur) if member[t] \
                else cur.derivative()
        direct = cur
        closed = closed_apply(spec, nf, f)
        gap = max_rel_diff(direct, closed)
        if direct.coeffs != closed.coeffs:
            raise InternalConsistencyError(
                f"direct and closed products differ exactly (gap {gap:.3e})")
        return ProductTriple(direct, nf, closed, 0.0)
    arr = np.asarray([complex(x) for x in f.coeffs], dtype=np.complex128)
    scale = f.log2_scale
    lam, b = complex(spec.lam), complex(spec.b)
    for t in range(n):
        if member[t]:
            arr, scale = _affine_float(arr, scale, lam, b)
        else:
            arr = arr[1:] * np.arange(1, arr.size)
            if not arr.size:
                arr = np.zeros(1, dtype=np.complex128)
            arr, scale = _repack(arr, scale)
    direct = _pv_from_parts(arr, scale) if np.any(arr) else PolyVector.zero()
    closed = closed_apply(spec, nf, f)
    gap = max_rel_diff(direct, closed)
    if gap > tol:
        raise InternalConsistencyError(
            f"direct vs closed product gap {gap:.3e} exceeds {tol:.1e} "
            f"at n={n} (a1={nf.a1}, a2={nf.a2}, c={nf.c})")
    return ProductTriple(direct, nf, closed, gap)


# ---------------------------------------------------------------------------
# Right inverse on monomials

def _inverse_exact(lam, b, nf: NormalForm, k: int) -> PolyVector:
    lam_q = Fraction(lam)
    pref = Fraction(math.factorial(k), math.factorial(k + nf.a2)) \
        * lam_q ** (-(nf.c + k * nf.a1))
    coeffs = [0] * (k + nf.a2 + 1)
    if b == 0:
        coeffs[k + nf.a2] = pref
    else:
        r = b * sum(lam_q ** i for i in range(nf.a1))
        for j in range(k + 1):
            coeffs[k + nf.a2 - j] = pref * math.comb(k + nf.a2, j) \
                * (-r) ** j
    return PolyVector(tuple(coeffs))


def right_inverse(spec: EntireProductSpec, omega, n: int, k: int,
                  tol: float = TOL_INVERSE) -> PolyVector:
    """S_n(omega) z^k with T_n(omega) S_n(omega) z^k = z^k, verified.

    The formula integrates a2 times and undoes the affine stretch:
    k!/(k+a2)! lam^{-c-k a1} sum_j C(k+a2, j) z^{k+a2-j} (-r)^j, with the
    single j = 0 term when b = 0.  Factorial ratios and lam powers run in
    log space; exact inputs stay rational.

    The composition check prefers an exact-arithmetic shadow: every real
    float is a dyadic rational, and the float telescope cancels k binades
    per a1 when |lam| < 1, which no fixed tolerance survives.  Complex
    symbols fall back to a tolerance inflated by that condition number.
    """
    if k < 0:
        raise ConfigError("monomial degree must be nonnegative")
    nf = normal_form_at(spec, omega, n)
    if k + nf.a2 >= spec.N:
        raise HorizonError(
            f"S_n z^{k} needs degree {k + nf.a2} >= N={spec.N}; "
            "raise the truncation or shorten the horizon")
    if spec.exact:
        s = _inverse_exact(spec.lam, spec.b, nf, k)
        back = _closed_exact(spec.lam, spec.b, nf, s)
        if back.coeffs != PolyVector.monomial(k).coeffs:
            raise InternalConsistencyError(
                f"exact composition T_n S_n z^{k} != z^{k}")
        return s
    lam = complex(spec.lam)
    lg_pref = (math.lgamma(k + 1) - math.lgamma(k + nf.a2 + 1)) / _LOG2 \
        - (nf.c + k * nf.a1) * math.log2(abs(lam))
    ph_pref = cmath.exp(-1j * cmath.phase(lam) * (nf.c + k * nf.a1))
    deg = k + nf.a2
    logs = [-math.inf] * (deg + 1)
    vals = [0j] * (deg + 1)
    if spec.b == 0:
        logs[deg] = lg_pref
        vals[deg] = ph_pref
    else:
        lg_r, ph_r = _r_polar(lam, complex(spec.b), nf.a1)
        for j in range(k + 1):
            if j > 0 and lg_r == -math.inf:
                break
            logs[deg - j] = lg_pref + math.log2(math.comb(deg, j)) \
                + j * (lg_r if j else 0.0)
            vals[deg - j] = ph_pref * (-ph_r) ** j
    top = max(logs)
    arr = np.zeros(deg + 1, dtype=np.complex128)
    for j in range(deg + 1):
        if logs[j] > top - 1200:
            arr[j] = vals[j] * 2.0 ** (logs[j] - top)
    s = _pv_from_parts(arr, top)
    b = complex(spec.b)
    if lam.imag == 0 and lam.real:
        q = Fraction(lam.real)
        pow_bits = max(q.numerator.bit_length(), q.denominator.bit_length()) + 1
    else:
        pow_bits = 0
    shadow_ok = (lam.imag == 0 and b.imag == 0 and lam.real != 0 and
                 (nf.c + (k + 1) * nf.a1 + nf.a2) * pow_bits < 3_000_000)
    if shadow_ok:
        lam_q, b_q = Fraction(lam.real), Fraction(b.real)
        s_q = _inverse_exact(lam_q, b_q, nf, k)
        back = _closed_exact(lam_q, b_q, nf, s_q)
        if back.coeffs != PolyVector.monomial(k).coeffs:
            raise InternalConsistencyError(
                f"exact shadow composition T_n S_n z^{k} != z^{k} at n={n}")
        return s
    back = closed_apply(spec, nf, s)
    gap = max_rel_diff(back, PolyVector.monomial(k))
    lg_lam = math.log2(abs(lam))
    lg_r = _r_polar(lam, b, nf.a1)[0]
    kappa = 0.0 if lg_r == -math.inf else \
        max(0.0, k * (lg_r - min(0.0, nf.a1 * lg_lam)))
    tol_eff = max(tol, (k + 1) * 2.0 ** (kappa - 46))
    if gap > tol_eff:
        raise InternalConsistencyError(
            f"composition T_n S_n z^{k} off by {gap:.3e} at n={n} "
            f"(tolerance {tol_eff:.3e})")
    return s


def inverse_decay_rows(spec: EntireProductSpec, omega, ks, n_values,
                       R=5.0) -> list:
    """Seminorm trajectory of S_n z^k for each k, plus the letter counters."""
    ks = sorted(set(int(k) for k in ks))
    rows = []
    for n in sorted(set(int(v) for v in n_values)):
        nf = normal_form_at(spec, omega, n)
        sem = {}
        for k in ks:
            sem[k] = right_inverse(spec, omega, n, k).seminorm(R)
        rows.append({"n": n, "seminorms": sem,
                     "c": nf.c, "a1": nf.a1, "a2": nf.a2})
    return rows


def decay_csv(spec: EntireProductSpec, omega, ks, n_values, R=5.0) -> str:
    rows = inverse_decay_rows(spec, omega, ks, n_values, R=R)
    ks = sorted(rows[0]["seminorms"]) if rows else []
    head = ",".join(["n"] + [f"p{R:g}_k{k}" for k in ks] + ["c", "a1", "a2"])
    lines = [head]
    for row in rows:
        vals = [repr(float(row["seminorms"][k])) for k in ks]
        lines.append(",".join([str(row["n"])] + vals +
                              [str(row["c"]), str(row["a1"]),
                               str(row["a2"])]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Commuting pairs: eigenvalue classifier

class EntireVerdict(Enum):
    MIXING = "Mixing"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True, eq=False)
class PhiDReport:
    """Grid evidence for the eigenvalue criterion on a phi(D) pair.

    The kernels e_lam are common eigenvectors with eigenvalue
    phi1(lam)^{a1} phi2(lam)^{a2}, so g(lam) = |phi1|^{m1} |phi2|^{m2}
    crossing 1 in both directions forces mixing.  Witnesses are grid points;
    absence of one is a statement about the grid, not the pair, hence the
    refinement hint instead of a negative verdict.
    """

    verdict: EntireVerdict
    witness_growth: complex | None
    witness_decay: complex | None
    g_growth: float
    g_decay: float
    radius: float
    grid_points: int
    refinement: str | None
    labels: tuple

    def to_json(self) -> str:
        def cpx(z):
            return None if z is None else [z.real, z.imag]

        payload = {
            "verdict": self.verdict.value,
            "witness_growth": cpx(self.witness_growth),
            "witness_decay": cpx(self.witness_decay),
            "g_growth": self.g_growth,
            "g_decay": self.g_decay,
            "radius": self.radius,
            "grid_points": self.grid_points,
            "refinement": self.refinement,
            "symbols": list(self.labels),
        }
        return json.dumps(payload, sort_keys=True)


def _default_grid(radius: float) -> np.ndarray:
    radii = np.linspace(0.0, radius, 41)[1:]
    angles = np.exp(2j * np.pi * np.arange(64) / 64)
    pts = np.concatenate([[0j], np.outer(radii, angles).ravel()])
    return pts


def phiD_classifier(phi1: ExpTypeSymbol, phi2: ExpTypeSymbol, m1, m2,
                    lam_grid=None, radius: float = 4.0) -> PhiDReport:
    """Search a disk grid for eigenvalue witnesses g > 1 and g < 1."""
    m1f, m2f = float(m1), float(m2)
    if m1f <= 0 or m2f <= 0 or abs(m1f + m2f - 1.0) > 1e-12:
        raise ConfigError("need frequencies m1, m2 > 0 with m1 + m2 = 1")
    if lam_grid is None:
        if radius <= 0:
            raise ConfigError("grid radius must be positive")
        grid = _default_grid(radius)
    else:
        grid = np.asarray(list(lam_grid), dtype=np.complex128)
        if grid.size == 0:
            raise ConfigError("empty classifier grid")
        radius = float(np.max(np.abs(grid)))
    g_best_hi, g_best_lo = -math.inf, math.inf
    wit_hi = wit_lo = None
    for lam in grid:
        v1, v2 = abs(phi1.value(lam)), abs(phi2.value(lam))
        g = v1 ** m1f * v2 ** m2f
        if g > g_best_hi:
            g_best_hi, wit_hi = g, complex(lam)
        if g < g_best_lo:
            g_best_lo, wit_lo = g, complex(lam)
    growth = wit_hi if g_best_hi > 1.0 else None
    decay = wit_lo if g_best_lo < 1.0 else None
    if growth is not None and decay is not None:
        verdict, hint = EntireVerdict.MIXING, None
    else:
        verdict = EntireVerdict.UNRESOLVED
        if not (phi1.nonconstant or phi2.nonconstant):
            hint = "both symbols are constant; g is constant and no grid " \
                   "refinement can produce the missing witness"
        else:
            missing = "g > 1" if growth is None else "g < 1"
            hint = (f"no witness with {missing} on {grid.size} points of "
                    f"radius {radius:g}; double the radius and the angular "
                    "resolution")
    return PhiDReport(verdict, growth, decay, g_best_hi, g_best_lo,
                      float(radius), int(grid.size), hint,
                      (phi1.label, phi2.label))


def eigen_residual(phi: ExpTypeSymbol, lam, N: int = 512,
                   R: float = 1.0) -> float:
    """Seminorm of phi(D) e_lam - phi(lam) e_lam on the N-term kernel."""
    if N < 2:
        raise ConfigError("need at least two kernel terms")
    lam = complex(lam)
    coeffs = [1.0 + 0j]
    for j in range(1, N):
        coeffs.append(coeffs[-1] * lam / j)
    e = PolyVector(tuple(coeffs))
    out = apply_phiD(phi, e)
    target = phi.value(lam)
    diff = [a - target * b for a, b in
            zip(out.scaled_coeffs() + (0j,) * N, e.coeffs)]
    return float(PolyVector(tuple(diff)).seminorm(R))
