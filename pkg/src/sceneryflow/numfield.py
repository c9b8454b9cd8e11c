"""Exact arithmetic in a fixed real algebraic number field.

Elements are represented in the power basis of a monic integer minimal
polynomial together with a rational interval isolating one real root.
All arithmetic is exact rational arithmetic reduced modulo the minimal
polynomial; order comparisons are decided by refining the isolating
interval, never by floating point.

Coefficients are gmpy2.mpq when gmpy2 is available (much faster), with
fractions.Fraction as a drop-in fallback.  Both hash and compare
identically, so nothing downstream depends on the backend.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence, Union

try:
    from gmpy2 import mpq as _rational
except ImportError:  # pragma: no cover - gmpy2 is normally present
    from fractions import Fraction as _rational

Rational = _rational
RationalLike = Union[int, str, Fraction, "Rational"]


def QQ(a: RationalLike = 0, b=None) -> "Rational":
    """Exact rational constructor (accepts ints, 'p/q' strings, rationals)."""
    if b is not None:
        return _rational(a) / _rational(b)
    if isinstance(a, str):
        if "/" in a:
            num, den = a.split("/", 1)
            return _rational(int(num.strip())) / _rational(int(den.strip()))
        return _rational(int(a.strip()))
    if isinstance(a, float):
        raise TypeError("refusing to build an exact rational from a float")
    return _rational(a)


_ZERO = QQ(0)
_ONE = QQ(1)


class PrecisionError(ArithmeticError):
    """Sign of a nonzero-looking element could not be decided.

    In a valid field this cannot happen; it indicates a reducible
    minimal polynomial (the element is an algebraic zero divisor).
    """


# ---------------------------------------------------------------------------
# dense polynomial helpers over the rationals, low-to-high coefficients
# ---------------------------------------------------------------------------

def _strip(p):
    while p and p[-1] == 0:
        p = p[:-1]
    return p


def poly_eval(p, x):
    acc = _ZERO
    for c in reversed(p):
        acc = acc * x + c
    return acc


def poly_deriv(p):
    return [c * k for k, c in enumerate(p)][1:]


def poly_rem(p, q):
    """Remainder of p by q (q nonzero), exact."""
    p = list(p)
    dq = len(_strip(q)) - 1
    q = _strip(q)
    lead = q[-1]
    while len(_strip(p)) - 1 >= dq and _strip(p):
        p = _strip(p)
        dp = len(p) - 1
        factor = p[-1] / lead
        shift = dp - dq
        for i, c in enumerate(q):
            p[shift + i] -= factor * c
        p = p[:-1]
    return _strip(p)


def poly_gcd(p, q):
    p, q = _strip(list(p)), _strip(list(q))
    while q:
        p, q = q, poly_rem(p, q)
    if p:
        lead = p[-1]
        p = [c / lead for c in p]
    return p


def sturm_chain(p):
    chain = [_strip(list(p)), _strip(poly_deriv(p))]
    while chain[-1]:
        r = poly_rem(chain[-2], chain[-1])
        chain.append([-c for c in r])
    return chain[:-1]


def _sign_variations(values) -> int:
    signs = [1 if v > 0 else -1 for v in values if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_real_roots(p, lo, hi) -> int:
    """Number of distinct real roots of p in (lo, hi], p square-free."""
    chain = sturm_chain(p)
    at_lo = _sign_variations(poly_eval(f, lo) for f in chain)
    at_hi = _sign_variations(poly_eval(f, hi) for f in chain)
    return at_lo - at_hi


def _interval_add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _interval_mul(a, b):
    products = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return (min(products), max(products))


def poly_eval_interval(p, iv):
    """Certified interval image of p over iv, by interval Horner."""
    acc = (_ZERO, _ZERO)
    for c in reversed(p):
        acc = _interval_add(_interval_mul(acc, iv), (c, c))
    return acc


# ---------------------------------------------------------------------------
# the field
# ---------------------------------------------------------------------------

class AlgebraicField:
    """A real algebraic number field Q(alpha) in the power basis.

    Parameters
    ----------
    minpoly : integer coefficients, low-to-high degree, monic, degree >= 1
    root_interval : rational pair isolating exactly one real root alpha

    Degree 1 reduces to the rationals (alpha = -c0 is rational and the
    basis is just {1}).
    """

    def __init__(self, minpoly: Sequence[int], root_interval=None):
        coeffs = [QQ(c) for c in minpoly]
        if len(_strip(coeffs)) != len(coeffs) or len(coeffs) < 2:
            raise ValueError("minpoly must have degree >= 1 (low-to-high coefficients)")
        if coeffs[-1] != 1:
            raise ValueError("minpoly must be monic")
        if any(c.denominator != 1 for c in coeffs):
            raise ValueError("minpoly must have integer coefficients")
        self.minpoly = tuple(coeffs)
        self.degree = len(coeffs) - 1

        if poly_gcd(coeffs, poly_deriv(coeffs)) not in ([], [_ONE]):
            raise ValueError("minpoly is not square-free")
        self._check_probable_irreducible()

        if self.degree == 1:
            root = -coeffs[0]
            self._root_iv = (root, root)
        else:
            if root_interval is None:
                raise ValueError("degree >= 2 requires an isolating root_interval")
            lo, hi = QQ(root_interval[0]), QQ(root_interval[1])
            if not lo < hi:
                raise ValueError("root_interval must be a nondegenerate interval")
            if poly_eval(coeffs, lo) == 0 or poly_eval(coeffs, hi) == 0:
                raise ValueError("root_interval endpoints must not be roots")
            if count_real_roots(coeffs, lo, hi) != 1:
                raise ValueError("root_interval must isolate exactly one real root")
            self._root_iv = (lo, hi)

        # x^k mod minpoly for k = degree .. 2*degree-2, used by multiplication
        self._reduction = []
        if self.degree >= 2:
            prev = [-c for c in coeffs[:-1]]  # x^degree
            self._reduction.append(tuple(prev))
            for _ in range(self.degree - 2):
                shifted = [_ZERO] + prev
                top = shifted[self.degree]
                prev = [shifted[i] - top * coeffs[i] for i in range(self.degree)]
                self._reduction.append(tuple(prev))

    def _check_probable_irreducible(self):
        # rational-root test; for degrees 2 and 3 this decides irreducibility,
        # beyond that a reducible minpoly is caught at use (PrecisionError).
        if self.degree < 2:
            return
        c0 = int(self.minpoly[0])
        if c0 == 0:
            raise ValueError("minpoly has the rational root 0, hence is reducible")
        for r in range(1, abs(c0) + 1):
            if c0 % r:
                continue
            for cand in (QQ(r), QQ(-r)):
                if poly_eval(self.minpoly, cand) == 0:
                    raise ValueError(f"minpoly has the rational root {cand}, hence is reducible")

    # -- root interval ------------------------------------------------------

    def _refine_root_once(self):
        lo, hi = self._root_iv
        if lo == hi:
            return
        mid = (lo + hi) / 2
        fmid = poly_eval(self.minpoly, mid)
        if fmid == 0:
            raise ValueError("minpoly has a rational root; reducible")
        if (poly_eval(self.minpoly, lo) > 0) != (fmid > 0):
            self._root_iv = (lo, mid)
        else:
            self._root_iv = (mid, hi)

    def root_interval(self, max_width=None):
        """Current isolating interval, refined until width <= max_width."""
        if max_width is not None:
            lo, hi = self._root_iv
            while hi - lo > max_width:
                self._refine_root_once()
                lo, hi = self._root_iv
        return self._root_iv

    # -- element constructors ----------------------------------------------

    def element(self, coeffs: Union[RationalLike, Iterable[RationalLike]]) -> "FieldElement":
        if isinstance(coeffs, (int, str, Fraction)) or type(coeffs) is _rational:
            vec = [QQ(coeffs)] + [_ZERO] * (self.degree - 1)
        else:
            vec = [QQ(c) for c in coeffs]
            if len(vec) > self.degree:
                raise ValueError("coefficient vector longer than field degree")
            vec += [_ZERO] * (self.degree - len(vec))
        return FieldElement(self, tuple(vec))

    def zero(self) -> "FieldElement":
        return self.element(0)

    def one(self) -> "FieldElement":
        return self.element(1)

    def generator(self) -> "FieldElement":
        """The root alpha itself (for degree 1: the rational root)."""
        if self.degree == 1:
            return self.element(-self.minpoly[0])
        return self.element([0, 1])

    def __eq__(self, other):
        return isinstance(other, AlgebraicField) and self.minpoly == other.minpoly \
            and (self.degree == 1 or self._isolates_same_root(other))

    def _isolates_same_root(self, other):
        lo = max(self._root_iv[0], other._root_iv[0])
        hi = min(self._root_iv[1], other._root_iv[1])
        return lo < hi and count_real_roots(self.minpoly, lo, hi) == 1

    def __hash__(self):
        return hash(self.minpoly)

    def __repr__(self):
        return f"AlgebraicField(minpoly={[int(c) for c in self.minpoly]}, root~{float(self.generator()):.6g})"


class FieldElement:
    """An element of an AlgebraicField in the power basis.

    Immutable; arithmetic is exact, comparisons are decided exactly.
    """

    __slots__ = ("field", "coeffs", "_hash")

    def __init__(self, field: AlgebraicField, coeffs: tuple):
        self.field = field
        self.coeffs = coeffs
        self._hash = None

    # -- basic structure ----------------------------------------------------

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    def as_rational(self):
        if not self.is_rational():
            raise ValueError(f"{self!r} is not rational")
        return self.coeffs[0]

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.coeffs)
        return self._hash

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.field is not self.field and other.field != self.field:
                raise ValueError("elements of different fields")
            return other
        if isinstance(other, (int, Fraction)) or type(other) is _rational:
            return self.field.element(QQ(other))
        return NotImplemented

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return FieldElement(self.field, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return FieldElement(self.field, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        n = self.field.degree
        a, b = self.coeffs, other.coeffs
        if n == 1:
            return FieldElement(self.field, (a[0] * b[0],))
        # schoolbook product then reduction via the precomputed x^k tables
        prod = [_ZERO] * (2 * n - 1)
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j, bj in enumerate(b):
                if bj == 0:
                    continue
                prod[i + j] += ai * bj
        out = prod[:n]
        for k in range(n, 2 * n - 1):
            ck = prod[k]
            if ck == 0:
                continue
            red = self.field._reduction[k - n]
            for i in range(n):
                out[i] += ck * red[i]
        return FieldElement(self.field, tuple(out))

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise ZeroDivisionError("inversion of the zero field element")
        if self.is_rational():
            return self.field.element(1 / self.coeffs[0])
        # extended Euclid: u*self + v*minpoly = gcd (a nonzero constant)
        r0, r1 = list(self.field.minpoly), _strip(list(self.coeffs))
        u0, u1 = [], [_ONE]
        while True:
            r = poly_rem(r0, r1)
            if not r:
                break
            # quotient via repeated subtraction bookkeeping: q = (r0 - r) / r1
            q = _poly_div_exact(_poly_sub(r0, r), r1)
            u0, u1 = u1, _poly_sub(u0, _poly_mul(q, u1))
            r0, r1 = r1, r
        if len(r1) != 1:
            raise PrecisionError("nontrivial gcd with minpoly: minpoly is reducible")
        inv_coeffs = [c / r1[0] for c in u1]
        inv_coeffs = inv_coeffs[: self.field.degree]
        inv_coeffs += [_ZERO] * (self.field.degree - len(inv_coeffs))
        result = FieldElement(self.field, tuple(inv_coeffs))
        assert (result * self).coeffs == self.field.one().coeffs
        return result

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = self.field.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- sign, order, embedding ----------------------------------------------

    _MAX_REFINE = 20_000

    def sign(self) -> int:
        """Exact sign in {-1, 0, +1}."""
        if self.is_zero():
            return 0
        if self.is_rational():
            return 1 if self.coeffs[0] > 0 else -1
        # coefficient fast path when the root is certainly nonnegative
        if self.field._root_iv[0] >= 0:
            if all(c >= 0 for c in self.coeffs):
                return 1
            if all(c <= 0 for c in self.coeffs):
                return -1
        for _ in range(self._MAX_REFINE):
            iv = poly_eval_interval(self.coeffs, self.field.root_interval())
            if iv[0] > 0:
                return 1
            if iv[1] < 0:
                return -1
            self.field._refine_root_once()
        raise PrecisionError(
            "sign undecidable after refinement; minpoly is likely reducible")

    def compare(self, other) -> int:
        """-1, 0 or +1 according to the exact order."""
        other = self._coerce(other)
        return (self - other).sign()

    def __lt__(self, other):
        return self.compare(other) < 0

    def __le__(self, other):
        return self.compare(other) <= 0

    def __gt__(self, other):
        return self.compare(other) > 0

    def __ge__(self, other):
        return self.compare(other) >= 0

    def interval(self, precision: int = 53):
        """Certified rational interval of width <= 2^-precision around the value."""
        if precision < 1:
            raise ValueError("precision must be >= 1")
        if self.is_rational():
            c = self.coeffs[0]
            return (c, c)
        target = QQ(1, 2 ** precision)
        iv = poly_eval_interval(self.coeffs, self.field.root_interval())
        while iv[1] - iv[0] > target:
            self.field._refine_root_once()
            iv = poly_eval_interval(self.coeffs, self.field.root_interval())
        return iv

    def __float__(self):
        lo, hi = self.interval(64)
        return float((lo + hi) / 2)

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __repr__(self):
        return f"FieldElement({[str(c) for c in self.coeffs]})"


def _poly_sub(p, q):
    n = max(len(p), len(q))
    p = list(p) + [_ZERO] * (n - len(p))
    q = list(q) + [_ZERO] * (n - len(q))
    return _strip([a - b for a, b in zip(p, q)])


def _poly_mul(p, q):
    if not p or not q:
        return []
    out = [_ZERO] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _strip(out)


def _poly_div_exact(p, q):
    """Exact polynomial quotient (remainder known to be zero)."""
    p = _strip(list(p))
    q = _strip(list(q))
    if not p:
        return []
    out = [_ZERO] * (len(p) - len(q) + 1)
    lead = q[-1]
    while p and len(p) >= len(q):
        factor = p[-1] / lead
        shift = len(p) - len(q)
        out[shift] = factor
        for i, c in enumerate(q):
            p[shift + i] -= factor * c
        p = _strip(p)
    return _strip(out)


# convenience fields -----------------------------------------------------------

def rational_field() -> AlgebraicField:
    """The rationals, as the degree-1 field with minpoly x."""
    return AlgebraicField([0, 1])


def golden_field() -> AlgebraicField:
    """Q(rho) with rho^2 + rho - 1 = 0, rho = (sqrt(5)-1)/2 ~ 0.618."""
    return AlgebraicField([-1, 1, 1], (QQ(1, 2), QQ(1)))
