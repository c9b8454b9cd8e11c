"""Word algebra, normalization and certified geometric predicates."""

import numpy as np
import pytest

from sceneryflow.numfield import QQ
from sceneryflow.ifs import (
    DISJOINT,
    INTERSECTS,
    Ball,
    IFS,
    Similarity,
    normalize_ifs,
)

from conftest import make_dyadic, make_golden, make_strong_separation


# -- composition ---------------------------------------------------------------


def test_compose_word_dyadic_raw():
    sys = make_dyadic(raw=True)
    phi = sys.compose_word((1, 1))
    assert phi.ratio == QQ(1, 4)
    assert phi.translation[0].is_zero()


def test_compose_empty_word_is_identity(dyadic):
    assert dyadic.compose_word(()).is_identity()


def test_golden_exact_overlap():
    # phi_{(1,2,2)} == phi_{(2,1,1)} via rho^2 = 1 - rho
    for sys in (make_golden(raw=True), make_golden()):
        assert sys.compose_word((1, 2, 2)) == sys.compose_word((2, 1, 1))


def test_relative_map_identity(dyadic):
    assert dyadic.relative_map((1, 2), (1, 2)).is_identity()


def test_relative_map_dyadic_raw():
    # phi_1^{-1} o phi_2 = x + 1 before normalization
    sys = make_dyadic(raw=True)
    f = sys.relative_map((1,), (2,))
    assert f.ratio == 1
    assert f.translation[0] == 1


def test_relative_map_golden_overlap(golden_bc):
    assert golden_bc.relative_map((1, 2, 2), (2, 1, 1)).is_identity()


def test_compose_word_homomorphism(golden_bc):
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(20):
        la, lb = int(rng.integers(0, 7)), int(rng.integers(0, 6))
        a = tuple(int(s) for s in rng.integers(1, 3, size=la))
        b = tuple(int(s) for s in rng.integers(1, 3, size=lb))
        assert golden_bc.compose_word(a + b) == \
            golden_bc.compose_word(a).compose(golden_bc.compose_word(b))


def test_relative_map_recomposes(golden_bc):
    a, b = (1, 2, 1), (2, 2, 1)
    f = golden_bc.relative_map(a, b)
    assert golden_bc.compose_word(a).compose(f) == golden_bc.compose_word(b)


# -- normalization ----------------------------------------------------------------


def test_normalize_dyadic_values():
    sys = make_dyadic()
    # oracle: fixed point of phi_1 is 0, hull [0,1], scale 3/4
    assert sys.maps[0].ratio == QQ(1, 2)
    assert sys.maps[0].translation[0].is_zero()
    assert sys.maps[1].translation[0] == QQ(3, 8)
    assert sys.hull_lo[0].is_zero()
    assert sys.hull_hi[0] == QQ(3, 4)
    assert sys.full_hull_interval


def test_normalize_strong_separation_values():
    sys = make_strong_separation()
    assert sys.maps[1].translation[0] == QQ(9, 16)
    assert sys.hull_hi[0] == QQ(3, 4)
    assert not sys.full_hull_interval


def test_normalize_golden_values():
    sys = make_golden()
    rho = sys.field.generator()
    assert sys.maps[1].translation[0] == (sys.field.one() - rho) * QQ(3, 4)
    assert sys.hull_hi[0] == QQ(3, 4)
    assert sys.full_hull_interval  # rho >= 1/2 so the two images cover the hull


def test_normalize_idempotent():
    sys = make_dyadic()
    again = normalize_ifs(sys)
    assert all(p.ratio == q.ratio and p.translation == q.translation
               for p, q in zip(sys.maps, again.maps))


def test_normalize_sends_phi1_fixed_point_to_zero(all_systems):
    for sys in all_systems.values():
        assert all(c.is_zero() for c in sys.fixed_points[0])


def test_single_map_rejected():
    from sceneryflow.numfield import rational_field
    field = rational_field()
    with pytest.raises(ValueError):
        IFS(field, 1, [Similarity(field.element(QQ(1, 2)), (field.element(0),))], [QQ(1)])


def test_point_attractor_rejected():
    from sceneryflow.numfield import rational_field
    field = rational_field()
    maps = [
        Similarity(field.element(QQ(1, 2)), (field.element(0),)),
        Similarity(field.element(QQ(1, 3)), (field.element(0),)),
    ]
    with pytest.raises(ValueError):
        IFS(field, 1, maps, [QQ(1, 2), QQ(1, 2)])


# -- covers and predicates ------------------------------------------------------------


def test_attractor_cover_depth0(dyadic):
    boxes = dyadic.attractor_cover(0)
    assert len(boxes) == 1
    lo, hi = boxes[0].interval()
    assert lo.compare(dyadic.hull_lo[0]) <= 0
    assert hi.compare(dyadic.hull_hi[0]) >= 0


def test_attractor_cover_tiles_hull(dyadic):
    # dyadic cover at depth 1: two intervals tiling the invariant cube
    boxes = dyadic.attractor_cover(1)
    assert len(boxes) == 2
    (lo1, hi1), (lo2, hi2) = boxes[0].interval(), boxes[1].interval()
    assert lo1.compare(lo2) < 0
    assert hi1 == lo2  # contiguous halves


def test_attractor_cover_nested(golden_bc):
    # every depth-(n+1) box sits inside its depth-n parent
    for parent, child_block in zip(
        golden_bc.attractor_cover(4),
        np.array_split(golden_bc.attractor_cover(5), 2 ** 4),
    ):
        plo, phi_ = parent.interval()
        for child in child_block:
            clo, chi = child.interval()
            assert plo.compare(clo) <= 0
            assert chi.compare(phi_) <= 0


def test_intersect_predicate_dyadic(dyadic):
    ball = dyadic.cylinder_ball((2,))
    assert dyadic.intersect_predicate((1,), ball, 0) == INTERSECTS


def test_intersect_predicate_far_ball(all_systems):
    for sys in all_systems.values():
        far = Ball((sys.field.element(100),), sys.field.element(1))
        assert sys.intersect_predicate((1,), far, 2) == DISJOINT


def test_intersect_predicate_strong_separation_certifies():
    sys = make_strong_separation()
    ball = sys.cylinder_ball((2,))
    # K_(1) ends at 3/16, B_(2) = [5/16, 13/16]: certified disjoint
    assert sys.intersect_predicate((1,), ball, 4) == DISJOINT
    # K_(2) is inside its own ball
    assert sys.intersect_predicate((2,), ball, 4) == INTERSECTS


def test_predicate_never_contradicts_refinement(strong_separation):
    sys = strong_separation
    words = [(1,), (2,), (1, 2), (2, 1), (2, 2), (1, 1, 2)]
    for a in words:
        ball = sys.cylinder_ball(a)
        for b in words:
            shallow = sys.intersect_predicate(b, ball, 2)
            deep = sys.intersect_predicate(b, ball, 6)
            if shallow == DISJOINT:
                assert deep == DISJOINT
            if shallow == INTERSECTS:
                assert deep == INTERSECTS


# -- points and sampling ---------------------------------------------------------------


def test_project_point_fixed_point(dyadic):
    assert dyadic.project_point((1,) * 8)[0].is_zero()


def test_project_point_dyadic_raw():
    sys = make_dyadic(raw=True)
    assert sys.project_point((2, 1))[0] == QQ(1, 2)


def test_project_point_contraction_bound(golden_bc):
    word = golden_bc.sample_word(12, seed=3)
    diam = float(golden_bc.cover_root.radius) * 2
    for k in range(1, 12):
        a = float(golden_bc.project_point(word[:k])[0])
        b = float(golden_bc.project_point(word[:k + 1])[0])
        assert abs(a - b) <= golden_bc.rho_max ** k * diam + 1e-12


def test_sample_word_deterministic(dyadic):
    assert dyadic.sample_word(50, seed=11) == dyadic.sample_word(50, seed=11)


def test_sample_word_frequencies(dyadic):
    n = 10_000
    word = dyadic.sample_word(n, seed=5)
    freq = sum(1 for s in word if s == 1) / n
    assert abs(freq - 0.5) <= 3 / n ** 0.5


def test_sample_word_seeds_differ(dyadic):
    words = {dyadic.sample_word(30, seed=s) for s in range(100)}
    assert len(words) >= 99
