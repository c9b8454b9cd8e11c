"""Equidistribution diagnostics: Weyl sums and discrepancy on sampled points.

Points x ~ mu are evaluated exactly (field arithmetic cleared to a common
integer denominator); the orbit s^k x mod 1 is then iterated as a single
modular bigint recurrence against a high-precision dyadic approximation of
the field generator, with a certified error budget, and rounded to float
once per step.  Iterated floating multiplication would lose all fractional
precision long before k ~ 2^12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .numfield import QQ, AlgebraicField, count_real_roots, poly_eval
from .ifs import IFS

MAX_EXACT_WORD = 40_000


@dataclass
class NormalityReport:
    base: int
    samples: int
    horizon: int
    frequencies: Sequence[int]
    weyl: List[dict]          # rows: {m, K, mean_abs_weyl}
    discrepancy: List[dict]   # rows: {K, mean_star_discrepancy}
    meta: dict = dataclass_field(default_factory=dict)


def _exact_point_cleared(ifs: IFS, word) -> Tuple[List[int], int]:
    """phi_word(0) as integer coefficients over a common denominator."""
    x = ifs.project_point(tuple(int(s) for s in word))[0]
    coeffs = x.coeffs
    dens = [int(c.denominator) for c in coeffs]
    D = 1
    for d in dens:
        D = D * d // math.gcd(D, d)
    nums = [int(c.numerator) * (D // int(c.denominator)) for c in coeffs]
    return nums, D


def _dyadic_root(field: AlgebraicField, bits: int) -> int:
    """floor(alpha * 2^bits) certified from the isolating interval."""
    target = QQ(1, 2 ** (bits + 2))
    while True:
        lo, hi = field.root_interval(target)
        lo_floor = (int(lo.numerator) << bits) // int(lo.denominator)
        hi_floor = (int(hi.numerator) << bits) // int(hi.denominator)
        if lo_floor == hi_floor:
            return lo_floor
        target = target / 4


def fractional_orbit(ifs: IFS, word, s: int, horizon: int) -> np.ndarray:
    """frac(s^k phi_word(0)) for k < horizon, certified to ~2^-50."""
    if ifs.dim != 1:
        raise ValueError("normality diagnostics are one-dimensional")
    if s < 2:
        raise ValueError("the base must be an integer >= 2")
    nums, D = _exact_point_cleared(ifs, word)
    degree = ifs.field.degree

    # error budget: the dyadic root error (1 ulp) is amplified by s^k and
    # the cleared coefficients; keep 64 spare bits at the final step
    coeff_bits = max((abs(n).bit_length() for n in nums), default=1)
    n_bits = horizon * max(1, math.ceil(math.log2(s))) + coeff_bits + 64

    if degree == 1:
        root_num = None
    else:
        root_num = _dyadic_root(ifs.field, n_bits)

    modulus = D << n_bits
    acc = nums[0] << n_bits
    if degree >= 2:
        power = root_num
        acc += nums[1] * power
        for k in range(2, degree):
            power = (power * root_num) >> n_bits
            acc += nums[k] * power
    acc %= modulus

    out = np.empty(horizon)
    shift = 1 << 53
    for k in range(horizon):
        out[k] = ((acc * shift) // modulus) / shift
        acc = (acc * s) % modulus
    return out


def weyl_magnitudes(fracs: np.ndarray, frequencies: Sequence[int],
                    horizons: Sequence[int]) -> Dict[Tuple[int, int], float]:
    """|1/K sum_{k<K} e^{2 pi i m y_k}| for each frequency and horizon."""
    out = {}
    for m in frequencies:
        z = np.exp(2j * np.pi * m * fracs)
        csum = np.cumsum(z)
        for K in horizons:
            if K > len(fracs):
                raise ValueError(f"horizon {K} exceeds the orbit length")
            out[(m, K)] = float(abs(csum[K - 1]) / K)
    return out


def star_discrepancy(fracs: np.ndarray) -> float:
    u = np.sort(fracs)
    n = len(u)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(grid - u), np.max(u - (grid - 1 / n))))


def required_word_length(ifs: IFS, s: int, horizon: int, guard: int = 64) -> int:
    """Depth resolving s^-horizon: L ~ horizon log s / log(1/rho_min) + guard."""
    return int(horizon * math.log(s) / math.log(1.0 / ifs.rho_max)) + guard


def weyl_sums(ifs: IFS, s: int, samples: int, horizon: int, freqs: int,
              seed: int, horizons: Optional[Sequence[int]] = None) -> NormalityReport:
    """Averaged Weyl magnitudes and discrepancies over mu-sampled points."""
    length = required_word_length(ifs, s, horizon)
    if length > MAX_EXACT_WORD:
        raise ValueError(
            f"horizon {horizon} needs exact words of length {length}, beyond "
            f"the budget {MAX_EXACT_WORD}; lower the horizon")
    if horizons is None:
        horizons = sorted({1 << k for k in range(4, 13) if (1 << k) <= horizon}
                          | {horizon})
    frequencies = list(range(1, freqs + 1))

    mags: Dict[Tuple[int, int], list] = {}
    discs: Dict[int, list] = {}
    for j in range(samples):
        word = ifs.sample_word(length, seed + 7919 * j)
        fracs = fractional_orbit(ifs, word, s, horizon)
        sample_mags = weyl_magnitudes(fracs, frequencies, horizons)
        for key, val in sample_mags.items():
            mags.setdefault(key, []).append(val)
        for K in horizons:
            discs.setdefault(K, []).append(star_discrepancy(fracs[:K]))

    weyl_rows = [{"m": m, "K": K, "mean_abs_weyl": float(np.mean(mags[(m, K)]))}
                 for m in frequencies for K in horizons]
    disc_rows = [{"K": K, "mean_star_discrepancy": float(np.mean(discs[K]))}
                 for K in horizons]
    return NormalityReport(
        base=s, samples=samples, horizon=horizon, frequencies=frequencies,
        weyl=weyl_rows, discrepancy=disc_rows,
        meta={"word_length": length, "seed": seed})


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------

@dataclass
class HypothesisReport:
    base_description: str
    pisot: Optional[bool]          # None when only numerically checked
    pisot_note: str
    ratio_rational: List[dict]     # per map: relation found or bound reported
    search_bound: int

    @property
    def irrationality_holds_somewhere(self) -> bool:
        return any(row["relation"] is None for row in self.ratio_rational)


def _pisot_integer(s: int) -> Tuple[bool, str]:
    return s >= 2, "integer >= 2 is Pisot (no conjugates)"


def _pisot_quadratic(minpoly: Sequence[int]) -> Tuple[Optional[bool], str]:
    """Exact check for monic integer quadratics with two real roots."""
    c0, c1, c2 = (int(c) for c in minpoly)
    disc = c1 * c1 - 4 * c0 * c2
    if disc <= 0:
        return None, "complex conjugates: not certified at degree 2"
    coeffs = [QQ(c0), QQ(c1), QQ(1)]
    big = 1 + abs(c0) + abs(c1)
    roots_above_1 = count_real_roots(coeffs, QQ(1), QQ(big))
    if roots_above_1 != 1:
        return False, "does not have exactly one real root > 1"
    inside = count_real_roots(coeffs, QQ(-1), QQ(1))
    on_edge = poly_eval(coeffs, QQ(-1)) == 0 or poly_eval(coeffs, QQ(1)) == 0
    if inside == 1 and not on_edge:
        return True, "conjugate isolated inside (-1, 1) by exact sign counting"
    return False, "conjugate not strictly inside the unit interval"


def _pisot_numeric(minpoly: Sequence[int]) -> Tuple[Optional[bool], str]:
    roots = np.roots(list(reversed([float(c) for c in minpoly])))
    is_big = (np.abs(roots.imag) < 1e-9) & (roots.real > 1)
    if is_big.sum() != 1:
        return False, "numeric roots: no single real root > 1"
    others = np.abs(roots[~is_big])
    margin = 1 - others.max() if others.size else 1.0
    if margin > 1e-6:
        return None, f"numeric only: conjugates inside the disk by {margin:.2e}"
    return False, "numeric roots: a conjugate reaches the unit circle"


def power_relation(ifs: IFS, s: int, map_index: int, bound: int) -> Optional[Tuple[int, int]]:
    """(a, b) with s^a = rho_i^{-b} exactly, searched up to the bound."""
    rho = ifs.maps[map_index].ratio
    inv_rho_powers = [ifs.field.one()]
    for _ in range(bound):
        inv_rho_powers.append(inv_rho_powers[-1] / rho)
    for a in range(1, bound + 1):
        target = ifs.field.element(s) ** a
        for b in range(1, bound + 1):
            if inv_rho_powers[b] == target:
                return a, b
    return None


def hypothesis_check(ifs: IFS, s, minpoly: Optional[Sequence[int]] = None,
                     bound: int = 16) -> HypothesisReport:
    """Check the normality hypotheses: s Pisot, log s / log rho_i irrational.

    The rationality test is semi-decidable: it searches exact power
    relations s^a = rho^{-b} up to the bound and otherwise reports that no
    relation was found, never claiming irrationality.
    """
    if minpoly is not None:
        desc = f"algebraic root of {list(int(c) for c in minpoly)}"
        if len(minpoly) == 3:
            pisot, note = _pisot_quadratic(minpoly)
            if pisot is None:
                pisot, note = _pisot_numeric(minpoly)
        else:
            pisot, note = _pisot_numeric(minpoly)
        rows = [{"map": i + 1, "relation": None,
                 "note": "power-relation search needs an integer base"}
                for i in range(ifs.m)]
        return HypothesisReport(desc, pisot, note, rows, bound)

    s = int(s)
    pisot, note = _pisot_integer(s)
    rows = []
    for i in range(ifs.m):
        rel = power_relation(ifs, s, i, bound)
        if rel is not None:
            a, b = rel
            rows.append({"map": i + 1, "relation": (a, b),
                         "note": f"s^{a} = rho^-{b}: log s/log rho = -{b}/{a}, rational"})
        else:
            rows.append({"map": i + 1, "relation": None,
                         "note": f"no rational relation found up to denominator {bound}"})
    return HypothesisReport(f"integer {s}", pisot, note, rows, bound)
