"""Neighbourhood systems vs brute force, automaton closure, certificates."""

import itertools

import numpy as np
import pytest

from sceneryflow.numfield import QQ
from sceneryflow.ifs import Ball, Similarity, normalize_ifs, IFS
from sceneryflow.neighbourhood import (
    CertificationError,
    NeighbourhoodSystem,
    compute_weights_q,
    compute_zeta_coefficients,
    construct_b0,
    explore_automaton,
    find_a0,
    map_key,
    maximal_system,
    neighbourhood_system,
    transition_step,
    verify_certificate,
    verify_lemma_maximal,
)

from conftest import make_dyadic, make_golden


# -- brute-force oracle ----------------------------------------------------------
#
# Independent route: enumerate Gamma^{|a|} outright (equicontractive window),
# decide K_b meets B_a by exact interval arithmetic on the full-hull interval
# (dyadic, golden) or by cover refinement (strong separation), and collapse
# exact overlaps through map equality.

def brute_force_system(ifs, a):
    phi_a = ifs.compose_word(a)
    ball = Ball(phi_a.translation, phi_a.ratio)
    inv_a = phi_a.inverse()
    keys = {}
    for b in itertools.product(range(1, ifs.m + 1), repeat=len(a)):
        status = ifs.intersect_predicate(b, ball, depth=10)
        assert status != "unknown", "oracle needs decisive geometry"
        if status == "intersects":
            f = inv_a.compose(ifs.compose_word(b))
            keys[map_key(f)] = f
    return keys


def brute_force_weights(ifs, a):
    phi_a = ifs.compose_word(a)
    ball = Ball(phi_a.translation, phi_a.ratio)
    inv_a = phi_a.inverse()
    weights = {}
    for b in itertools.product(range(1, ifs.m + 1), repeat=len(a)):
        if ifs.intersect_predicate(b, ball, depth=10) == "intersects":
            k = map_key(inv_a.compose(ifs.compose_word(b)))
            weights[k] = weights.get(k, QQ(0)) + ifs.word_prob(b)
    return weights


def all_words(m, max_len):
    for k in range(1, max_len + 1):
        yield from itertools.product(range(1, m + 1), repeat=k)


# -- direct enumeration ---------------------------------------------------------


def test_strong_separation_all_identity(strong_separation):
    for a in all_words(2, 4):
        system = neighbourhood_system(strong_separation, a)
        assert len(system) == 1
        assert system.contains_identity
        assert not system.has_unknown


def test_direct_matches_brute_force_dyadic(dyadic):
    for a in all_words(2, 6):
        system = neighbourhood_system(dyadic, a)
        assert set(system.key()) == set(brute_force_system(dyadic, a)), a


def test_direct_matches_brute_force_golden(golden_bc):
    for a in all_words(2, 6):
        system = neighbourhood_system(golden_bc, a)
        assert set(system.key()) == set(brute_force_system(golden_bc, a)), a


def test_golden_exact_overlap_collapses(golden_bc):
    # (1,2,2) and (2,1,1) realize the same map; the system holds it once
    system = neighbourhood_system(golden_bc, (1, 2, 2))
    identity_members = [f for f in system if f.is_identity()]
    assert len(identity_members) == 1
    # and the brute-force count over distinct words exceeds the map count
    words_hitting_identity = [
        b for b in itertools.product((1, 2), repeat=3)
        if golden_bc.relative_map((1, 2, 2), b).is_identity()
    ]
    assert sorted(words_hitting_identity) == [(1, 2, 2), (2, 1, 1)]


def test_canonical_order_permutation_invariant(golden_bc):
    system = neighbourhood_system(golden_bc, (2, 1, 2))
    members = [(f, False, None) for f in system.maps]
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(5):
        perm = rng.permutation(len(members))
        shuffled = NeighbourhoodSystem([members[i] for i in perm])
        assert shuffled == system


def test_witnesses_recompose(golden_bc):
    a = (2, 1, 2)
    phi_a = golden_bc.compose_word(a)
    system = neighbourhood_system(golden_bc, a)
    for f, wit in zip(system.maps, system.witnesses):
        assert wit is not None
        assert phi_a.compose(f) == golden_bc.compose_word(wit)


# -- transition step -------------------------------------------------------------


@pytest.mark.parametrize("factory", [make_dyadic, make_golden])
def test_transition_matches_direct(factory):
    ifs = factory()
    for a in all_words(2, 5):
        state = neighbourhood_system(ifs, a)
        for j in (1, 2):
            assert transition_step(ifs, state, j) == neighbourhood_system(ifs, a + (j,)), (a, j)


def test_transition_strong_separation(strong_separation):
    state = neighbourhood_system(strong_separation, (1,))
    for j in (1, 2):
        nxt = transition_step(strong_separation, state, j)
        assert len(nxt) == 1 and nxt.contains_identity


# -- automaton --------------------------------------------------------------------


def test_automaton_strong_separation(strong_separation):
    report = explore_automaton(strong_separation, max_states=100, max_depth=50)
    assert report.closed
    assert len(report.states) == 1
    assert report.max_cardinality == 1


def test_automaton_dyadic(dyadic):
    report = explore_automaton(dyadic, max_states=10_000, max_depth=100)
    assert report.closed
    assert not report.has_unknown
    brute_max = max(len(brute_force_system(dyadic, a)) for a in all_words(2, 8))
    assert report.max_cardinality == brute_max == 4


def test_automaton_golden(golden_bc):
    report = explore_automaton(golden_bc, max_states=10_000, max_depth=100)
    assert report.closed
    assert not report.has_unknown
    brute_max = max(len(brute_force_system(golden_bc, a)) for a in all_words(2, 8))
    assert report.max_cardinality == brute_max == 7


def test_automaton_edges_closed(golden_bc):
    report = explore_automaton(golden_bc, max_states=10_000, max_depth=100)
    for i in range(len(report.states)):
        for j in (1, 2):
            assert (i, j) in report.edges
            assert 0 <= report.edges[(i, j)] < len(report.states)


def test_automaton_budget_flag(golden_bc):
    report = explore_automaton(golden_bc, max_states=3, max_depth=100)
    assert not report.closed
    assert report.budget_exceeded


def test_find_a0_requires_closure(golden_bc):
    report = explore_automaton(golden_bc, max_states=3, max_depth=100)
    with pytest.raises(CertificationError):
        find_a0(report)


def test_find_a0_shortest(dyadic):
    report = explore_automaton(dyadic, max_states=100, max_depth=50)
    a0 = find_a0(report)
    # brute force: first shortlex word realizing the maximum
    best = None
    for a in all_words(2, 4):
        if len(brute_force_system(dyadic, a)) == report.max_cardinality:
            if best is None or (len(a), a) < (len(best), best):
                best = a
    assert a0 == best == (2, 1)


def test_normalization_preserves_combinatorics():
    # conjugating the raw system differently must not change the closed
    # automaton's state cardinalities (after renormalization)
    base = make_dyadic()
    report_base = explore_automaton(base, 100, 50)
    field = base.field
    g = Similarity(field.element(QQ(5, 2)), (field.element(QQ(-7, 3)),))
    conjugated = IFS(field, 1,
                     [g.compose(phi).compose(g.inverse()) for phi in base.maps],
                     base.probs)
    report_conj = explore_automaton(normalize_ifs(conjugated), 100, 50)
    assert sorted(len(s) for s in report_base.states) == \
        sorted(len(s) for s in report_conj.states)


# -- lemma-maximal verification ----------------------------------------------------


@pytest.mark.parametrize("name", ["strong_separation", "dyadic", "golden_bc"])
def test_lemma_maximal(name, all_systems):
    ifs = all_systems[name]
    report = explore_automaton(ifs, 10_000, 100)
    a0, n0 = maximal_system(ifs, report)
    result = verify_lemma_maximal(ifs, a0, n0, trials=25, seed=42)
    assert result.ok, (result.failed, result.undecided)


# -- b0 certificates -----------------------------------------------------------------


@pytest.mark.parametrize("name", ["strong_separation", "dyadic", "golden_bc"])
def test_b0_certificate(name, all_systems):
    ifs = all_systems[name]
    report = explore_automaton(ifs, 10_000, 100)
    a0, n0 = maximal_system(ifs, report)
    cert = construct_b0(ifs, a0, n0)
    assert cert.complete
    check = verify_certificate(ifs, cert, n0)
    assert check.ok, check.details
    # every family identity is exact
    phi_b0 = ifs.compose_word(cert.b0)
    for h in cert.F:
        assert h.compose(ifs.compose_word(cert.word_of(h))) == phi_b0


@pytest.mark.parametrize("name", ["dyadic", "golden_bc"])
def test_b0_recursion_path_also_validates(name, all_systems):
    ifs = all_systems[name]
    report = explore_automaton(ifs, 10_000, 100)
    a0, n0 = maximal_system(ifs, report)
    cert = construct_b0(ifs, a0, n0, minimize=False)
    assert cert.complete
    assert verify_certificate(ifs, cert, n0).ok


# -- weights -------------------------------------------------------------------------


@pytest.mark.parametrize("factory", [make_dyadic, make_golden])
def test_weights_dp_vs_brute_force(factory):
    ifs = factory()
    for a in all_words(2, 6):
        ws = compute_weights_q(ifs, a)
        brute = brute_force_weights(ifs, a)
        got = {k: w for k, w in zip(ws.base.key(), ws.weights)}
        assert got == brute, a


def test_weights_strong_separation(strong_separation):
    ws = compute_weights_q(strong_separation, (1, 2, 1))
    assert len(ws.base) == 1
    assert ws.normalized() == (QQ(1),)


def test_weights_golden_overlap_aggregates(golden_bc):
    # identity weight at (1,2,2) merges the two overlapping words
    ws = compute_weights_q(golden_bc, (1, 2, 2))
    identity = Similarity.identity(golden_bc.field, 1)
    assert ws.weight_of(identity) == QQ(1, 4)  # p1 p2 p2 + p2 p1 p1


def test_weights_normalized_sum_to_one(golden_bc):
    ws = compute_weights_q(golden_bc, (2, 1, 2, 2, 1))
    assert sum(ws.normalized(), QQ(0)) == 1
    assert all(w > 0 for w in ws.weights)


# -- zeta coefficients ----------------------------------------------------------------


@pytest.mark.parametrize("name", ["strong_separation", "dyadic", "golden_bc"])
def test_zeta_coefficients_positive(name, all_systems):
    ifs = all_systems[name]
    report = explore_automaton(ifs, 10_000, 100)
    a0, n0 = maximal_system(ifs, report)
    cert = construct_b0(ifs, a0, n0)
    zc = compute_zeta_coefficients(ifs, cert, n0)
    assert all(c > 0 for c in zc.lower_bounds.values())
    # coefficient vectors sum to the window mass of b_h restricted to N0
    for h in cert.F:
        vec = zc.coefficients[map_key(h)]
        assert all(v > 0 for v in vec)


def test_zeta_q_weights_normalized(golden_bc):
    report = explore_automaton(golden_bc, 10_000, 100)
    a0, n0 = maximal_system(golden_bc, report)
    cert = construct_b0(golden_bc, a0, n0)
    zc = compute_zeta_coefficients(golden_bc, cert, n0)
    prefix = (2, 1) + tuple(a0)  # any word ending with a0
    q = zc.q_weights(golden_bc, prefix)
    assert sum(q.values(), QQ(0)) == 1
    assert all(v >= 0 for v in q.values())
