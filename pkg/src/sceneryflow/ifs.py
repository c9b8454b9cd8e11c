"""Homothety IFS machinery: word algebra, normalization, certified geometry.

Maps are homotheties x -> ratio*x + translation with exact coefficients in
one algebraic number field.  Geometric predicates are three-valued
(disjoint / intersects / unknown) and only ever report a definite answer
when a cover-based certificate exists; they are exact (never "unknown")
when the attractor is a full-hull interval, which covers every bundled
example system.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from .numfield import QQ, AlgebraicField, FieldElement, Rational

Word = Tuple[int, ...]

DISJOINT = "disjoint"
INTERSECTS = "intersects"
UNKNOWN = "unknown"

# rational upper bounds on sqrt(d), used to certify box -> euclidean-ball bounds
_SQRT_BOUND = {1: QQ(1), 2: QQ(3, 2), 3: QQ(7, 4)}

# normalized systems place the attractor hull inside B(0, _HULL_SCALE).
# 3/4 keeps K strictly inside B(0,1) (alpha_0 <= log 4) while avoiding the
# exact ball/cylinder tangencies that a tighter 1/2 scale creates for
# strongly separated systems.
_HULL_SCALE = QQ(3, 4)


class Similarity:
    """Exact homothety x -> ratio*x + translation on R^d."""

    __slots__ = ("ratio", "translation", "_hash")

    def __init__(self, ratio: FieldElement, translation: Tuple[FieldElement, ...]):
        self.ratio = ratio
        self.translation = tuple(translation)
        self._hash = None

    @staticmethod
    def identity(field: AlgebraicField, dim: int) -> "Similarity":
        return Similarity(field.one(), tuple(field.zero() for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.translation)

    def is_identity(self) -> bool:
        return self.ratio == 1 and all(t.is_zero() for t in self.translation)

    def apply(self, point: Sequence[FieldElement]) -> Tuple[FieldElement, ...]:
        return tuple(self.ratio * x + t for x, t in zip(point, self.translation))

    def compose(self, other: "Similarity") -> "Similarity":
        # (self o other)(x) = self(other(x))
        return Similarity(
            self.ratio * other.ratio,
            tuple(self.ratio * t2 + t1 for t1, t2 in zip(self.translation, other.translation)),
        )

    def inverse(self) -> "Similarity":
        inv = self.ratio.inverse()
        return Similarity(inv, tuple(-(inv * t) for t in self.translation))

    def __eq__(self, other):
        if not isinstance(other, Similarity):
            return NotImplemented
        return self.ratio == other.ratio and self.translation == other.translation

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ratio, self.translation))
        return self._hash

    def sort_key(self):
        """Exact lexicographic order by (ratio, translation coordinates)."""
        return _ExactKey((self.ratio, *self.translation))

    def __repr__(self):
        t = ", ".join(f"{float(x):.6g}" for x in self.translation)
        return f"Similarity({float(self.ratio):.6g}*x + [{t}])"


class _ExactKey:
    """Sorting adaptor: tuple of FieldElements under exact comparison."""

    __slots__ = ("items",)

    def __init__(self, items):
        self.items = items

    def __lt__(self, other):
        for a, b in zip(self.items, other.items):
            c = a.compare(b)
            if c != 0:
                return c < 0
        return False

    def __eq__(self, other):
        return all(a == b for a, b in zip(self.items, other.items))


class Ball:
    """Closed euclidean ball with exact center and radius (interval in d=1)."""

    __slots__ = ("center", "radius")

    def __init__(self, center: Tuple[FieldElement, ...], radius: FieldElement):
        self.center = tuple(center)
        self.radius = radius

    def __repr__(self):
        c = ", ".join(f"{float(x):.6g}" for x in self.center)
        return f"Ball([{c}], r={float(self.radius):.6g})"


class CoverBox:
    """Closed axis-aligned cube with exact center and half-width."""

    __slots__ = ("center", "radius")

    def __init__(self, center: Tuple[FieldElement, ...], radius: FieldElement):
        self.center = tuple(center)
        self.radius = radius

    def image(self, f: Similarity) -> "CoverBox":
        return CoverBox(f.apply(self.center), f.ratio * self.radius)

    def interval(self, axis: int = 0):
        return (self.center[axis] - self.radius, self.center[axis] + self.radius)

    def __repr__(self):
        c = ", ".join(f"{float(x):.6g}" for x in self.center)
        return f"CoverBox([{c}], r={float(self.radius):.6g})"


def box_ball_disjoint(box: CoverBox, ball: Ball) -> bool:
    """Certified: the closed cube and the closed ball do not meet."""
    dist_sq = None
    for c, q in zip(box.center, ball.center):
        gap = abs(c - q) - box.radius
        if gap.sign() > 0:
            dist_sq = gap * gap if dist_sq is None else dist_sq + gap * gap
    if dist_sq is None:
        return False
    return dist_sq.compare(ball.radius * ball.radius) > 0


def box_inside_ball(box: CoverBox, ball: Ball) -> bool:
    """Certified: the closed cube lies inside the closed ball."""
    far_sq = None
    for c, q in zip(box.center, ball.center):
        reach = abs(c - q) + box.radius
        far_sq = reach * reach if far_sq is None else far_sq + reach * reach
    return far_sq.compare(ball.radius * ball.radius) <= 0


def point_in_ball(point: Tuple[FieldElement, ...], ball: Ball) -> bool:
    dist_sq = None
    for p, q in zip(point, ball.center):
        d = p - q
        dist_sq = d * d if dist_sq is None else dist_sq + d * d
    return dist_sq.compare(ball.radius * ball.radius) <= 0


class IFS:
    """A normalized-or-raw homothety IFS with exact coefficients.

    probs must be strictly positive rationals summing to one; all map
    ratios lie in (0,1).  Construction computes the exact attractor hull
    box, an invariant cover cube, and the full-hull-interval flag that
    makes d=1 intersection predicates exact.
    """

    def __init__(self, field: AlgebraicField, dim: int, maps: Sequence[Similarity],
                 probs: Sequence[Rational], normalization: Optional[Similarity] = None):
        if len(maps) < 2:
            raise ValueError("an IFS needs at least two maps (a single map is a point mass)")
        self.field = field
        self.dim = dim
        self.maps = tuple(maps)
        self.probs = tuple(QQ(p) for p in probs)
        self.normalization = normalization

        if any(p <= 0 for p in self.probs):
            raise ValueError("probability vector must be strictly positive")
        if sum(self.probs) != 1:
            raise ValueError("probability vector must sum to 1")
        if len(self.probs) != len(self.maps):
            raise ValueError("need exactly one probability per map")
        for phi in self.maps:
            if phi.dim != dim:
                raise ValueError("map dimension mismatch")
            if phi.ratio.sign() <= 0 or phi.ratio.compare(1) >= 0:
                raise ValueError("generator ratios must lie strictly in (0,1)")

        self.m = len(self.maps)
        self._init_geometry()
        self._init_float_views()

    # -- exact geometry -------------------------------------------------------

    def _init_geometry(self):
        zero = self.field.zero()
        one = self.field.one()
        # per-coordinate attainable extremes: with positive ratios, each
        # coordinate evolves independently and the hull endpoints are the
        # extreme fixed points t/(1-r).
        fixed = [tuple(t / (one - phi.ratio) for t in phi.translation) for phi in self.maps]
        self.hull_lo = tuple(min((f[j] for f in fixed), key=_cmp_key) for j in range(self.dim))
        self.hull_hi = tuple(max((f[j] for f in fixed), key=_cmp_key) for j in range(self.dim))
        self.fixed_points = tuple(fixed)

        width = [self.hull_hi[j] - self.hull_lo[j] for j in range(self.dim)]
        if all(w.is_zero() for w in width):
            raise ValueError("attractor is a single point (all maps share a fixed point)")

        center = tuple((self.hull_lo[j] + self.hull_hi[j]) / 2 for j in range(self.dim))
        half = max((w / 2 for w in width), key=_cmp_key)
        # enlarge to an invariant cube: phi_i(cube) subset cube for all i
        for phi in self.maps:
            img = phi.apply(center)
            for j in range(self.dim):
                need = abs(img[j] - center[j]) / (one - phi.ratio)
                if need.compare(half) > 0:
                    half = need
        self.cover_root = CoverBox(center, half)

        self.full_hull_interval = self.dim == 1 and self._union_of_images_is_hull()
        self.unit_ball = Ball(tuple(zero for _ in range(self.dim)), one)

        # does every generator map B(0,1) into itself?  (||t|| <= 1 - rho)
        # holds after normalization and makes B_{a j} subset B_a, which the
        # incremental neighbourhood machinery relies on.
        self.balls_nested = True
        for phi in self.maps:
            norm_sq = None
            for t in phi.translation:
                norm_sq = t * t if norm_sq is None else norm_sq + t * t
            slack = one - phi.ratio
            if norm_sq.compare(slack * slack) > 0:
                self.balls_nested = False
                break

    def _union_of_images_is_hull(self) -> bool:
        lo, hi = self.hull_lo[0], self.hull_hi[0]
        images = sorted(
            ((phi.ratio * lo + phi.translation[0], phi.ratio * hi + phi.translation[0])
             for phi in self.maps),
            key=lambda iv: _ExactKey(iv),
        )
        if images[0][0] != lo:
            return False
        reach = images[0][1]
        for a, b in images[1:]:
            if a.compare(reach) > 0:
                return False
            if b.compare(reach) > 0:
                reach = b
        return reach == hi

    def _init_float_views(self):
        self.float_ratios = np.array([float(phi.ratio) for phi in self.maps])
        self.float_translations = np.array(
            [[float(t) for t in phi.translation] for phi in self.maps])
        self.float_probs = np.array([float(p) for p in self.probs])
        self.float_probs = self.float_probs / self.float_probs.sum()
        self.float_hull_lo = np.array([float(x) for x in self.hull_lo])
        self.float_hull_hi = np.array([float(x) for x in self.hull_hi])
        self.rho_max = float(max((phi.ratio for phi in self.maps), key=_cmp_key))
        self.rho_min = float(min((phi.ratio for phi in self.maps), key=_cmp_key))
        self.float_log_inv_ratios = -np.log(self.float_ratios)

    @property
    def is_equicontractive(self) -> bool:
        return all(phi.ratio == self.maps[0].ratio for phi in self.maps[1:])

    def map(self, symbol: int) -> Similarity:
        if not 1 <= symbol <= self.m:
            raise ValueError(f"symbol {symbol} outside alphabet 1..{self.m}")
        return self.maps[symbol - 1]

    def prob(self, symbol: int) -> Rational:
        return self.probs[symbol - 1]

    # -- word algebra ---------------------------------------------------------

    def compose_word(self, word: Word) -> Similarity:
        acc = Similarity.identity(self.field, self.dim)
        for s in word:
            acc = acc.compose(self.map(s))
        return acc

    def relative_map(self, a: Word, b: Word) -> Similarity:
        """phi_a^{-1} o phi_b; ratio may exceed 1, callers filter by the window."""
        return self.compose_word(a).inverse().compose(self.compose_word(b))

    def word_prob(self, word: Word) -> Rational:
        p = QQ(1)
        for s in word:
            p = p * self.prob(s)
        return p

    def word_ratio(self, word: Word) -> FieldElement:
        r = self.field.one()
        for s in word:
            r = r * self.map(s).ratio
        return r

    def project_point(self, word: Word) -> Tuple[FieldElement, ...]:
        """phi_{word}(0): exact attractor point within diam*prod(rho) of the limit."""
        if len(word) < 1:
            raise ValueError("need at least one symbol")
        point = tuple(self.field.zero() for _ in range(self.dim))
        for s in reversed(word):
            point = self.map(s).apply(point)
        return point

    def cylinder_ball(self, word: Word) -> Ball:
        """B_a = phi_a(B(0,1))."""
        phi = self.compose_word(word)
        return Ball(phi.translation, phi.ratio)

    def sample_word(self, length: int, seed: int) -> Word:
        """i.i.d. p-distributed symbols, deterministic per seed (PCG64)."""
        if length < 1:
            raise ValueError("length must be >= 1")
        rng = np.random.Generator(np.random.PCG64(seed))
        symbols = rng.choice(self.m, size=length, p=self.float_probs) + 1
        return tuple(int(s) for s in symbols)

    def sample_array(self, length: int, seed: int) -> np.ndarray:
        """Like sample_word but as a 0-based uint8 numpy array (large samples)."""
        rng = np.random.Generator(np.random.PCG64(seed))
        return rng.choice(self.m, size=length, p=self.float_probs).astype(np.uint8)

    # -- covers and predicates --------------------------------------------------

    def attractor_cover(self, depth: int):
        """Cubes {phi_a(C0) : |a| = depth}, lexicographic in a, nested in depth."""
        if depth < 0:
            raise ValueError("depth must be >= 0")
        sims = [Similarity.identity(self.field, self.dim)]
        for _ in range(depth):
            sims = [s.compose(phi) for s in sims for phi in self.maps]
        return [self.cover_root.image(s) for s in sims]

    def intersect_predicate(self, b: Word, ball: Ball, depth: int) -> str:
        """Does K_b meet the closed ball?  Certified three-valued answer."""
        phi_b = self.compose_word(b)
        return self.image_meets_ball(phi_b, ball, depth)

    def image_meets_ball(self, f: Similarity, ball: Ball, depth: int) -> str:
        """Does f(K) meet the closed ball?  f is any exact similarity."""
        if self.full_hull_interval:
            lo = f.ratio * self.hull_lo[0] + f.translation[0]
            hi = f.ratio * self.hull_hi[0] + f.translation[0]
            blo, bhi = ball.center[0] - ball.radius, ball.center[0] + ball.radius
            if lo.compare(bhi) > 0 or hi.compare(blo) < 0:
                return DISJOINT
            return INTERSECTS

        # cover refinement tracks g = f o phi_w so boxes stay covers of f(K_w)
        anchor = self.fixed_points[0]
        pending = [f]
        for level in range(depth + 1):
            undecided = []
            for g in pending:
                box = self.cover_root.image(g)
                if box_ball_disjoint(box, ball):
                    continue
                if box_inside_ball(box, ball):
                    return INTERSECTS
                if point_in_ball(g.apply(anchor), ball):
                    return INTERSECTS
                undecided.append(g)
            if not undecided:
                return DISJOINT
            if level == depth:
                break
            pending = [g.compose(phi) for g in undecided for phi in self.maps]
        return UNKNOWN

    # -- reporting ----------------------------------------------------------------

    def describe(self) -> str:
        lines = [f"dim={self.dim} maps={self.m} field_degree={self.field.degree}"]
        for k, (phi, p) in enumerate(zip(self.maps, self.probs), start=1):
            lines.append(f"  phi_{k}: ratio={float(phi.ratio):.8g} "
                         f"translation={[float(t) for t in phi.translation]} p={p}")
        lines.append(f"  hull=[{[float(x) for x in self.hull_lo]}, "
                     f"{[float(x) for x in self.hull_hi]}] "
                     f"full_hull_interval={self.full_hull_interval}")
        return "\n".join(lines)


def _cmp_key(x: FieldElement):
    return _ExactKey((x,))


def normalize_ifs(raw: IFS) -> IFS:
    """Conjugate so the phi_1 fixed point is 0 and hull(K) lies in B(0, 3/4).

    Idempotent up to exact equality; the conjugating similarity is recorded
    on the result for reporting back in original coordinates.
    """
    field = raw.field
    one = field.one()
    z = raw.fixed_points[0]
    bound = _SQRT_BOUND.get(raw.dim, QQ(raw.dim))

    a_max = None
    for j in range(raw.dim):
        for endpoint in (raw.hull_lo[j] - z[j], raw.hull_hi[j] - z[j]):
            mag = abs(endpoint)
            if a_max is None or mag.compare(a_max) > 0:
                a_max = mag
    scale = (one * _HULL_SCALE) / (a_max * bound)

    conj = Similarity(scale, tuple(-(scale * zj) for zj in z))
    maps = []
    for phi in raw.maps:
        img = phi.apply(z)
        maps.append(Similarity(phi.ratio, tuple(scale * (img[j] - z[j]) for j in range(raw.dim))))
    normalized = IFS(field, raw.dim, maps, raw.probs, normalization=conj)

    # certify hull(K') inside B(0, 3/4)
    norm_sq = None
    for j in range(raw.dim):
        mag = max(abs(normalized.hull_lo[j]), abs(normalized.hull_hi[j]), key=_cmp_key)
        norm_sq = mag * mag if norm_sq is None else norm_sq + mag * mag
    if norm_sq.compare(_HULL_SCALE * _HULL_SCALE) > 0:
        raise AssertionError("normalization failed to bring hull inside B(0, 3/4)")
    return normalized
