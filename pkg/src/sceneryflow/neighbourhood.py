"""Neighbourhood systems, the transition automaton and separation certificates.

The neighbourhood system of a finite word a collects the relative maps
f = phi_a^{-1} o phi_b over words b whose cylinder is comparable in size
to a's (the ratio window) and meets the ball B_a.  Equivalently, and the
form used throughout this module, f belongs to the system iff f(K) meets
the closed unit ball; the test depends only on the map, which is what
makes exact-overlap collapse and dynamic programming on weights work.

All predicates are certified three-valued; undecided members are included
with an `unknown` tag (supersets only), and callers escalate the cover
depth.  On interval attractors every answer is exact and no tags appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .numfield import QQ, Rational
from .ifs import (
    DISJOINT,
    UNKNOWN,
    Ball,
    IFS,
    Similarity,
    Word,
    box_ball_disjoint,
)

DEFAULT_GEOM_DEPTH = 6
GEOM_DEPTH_CAP = 24


class CertificationError(RuntimeError):
    """A construction needed a certified fact that is not available."""


def map_key(f: Similarity):
    """Canonical hashable identity of an exact similarity."""
    return (f.ratio.coeffs, tuple(t.coeffs for t in f.translation))


class NeighbourhoodSystem:
    """Canonically ordered set of relative maps, with provenance metadata.

    Identity (equality/hash) depends only on the map set.  Witnesses (a
    window word b with phi_a o f = phi_b, when known) and unknown tags ride
    along as metadata.
    """

    __slots__ = ("maps", "unknown", "witnesses", "_key")

    def __init__(self, members):
        # members: iterable of (Similarity, unknown_flag, witness_word_or_None)
        merged: Dict[tuple, list] = {}
        for f, unk, wit in members:
            k = map_key(f)
            if k in merged:
                entry = merged[k]
                entry[1] = entry[1] and unk  # certified once is certified
                if wit is not None and (entry[2] is None or
                                        (len(wit), wit) < (len(entry[2]), entry[2])):
                    entry[2] = wit
            else:
                merged[k] = [f, unk, wit]
        ordered = sorted(merged.values(), key=lambda e: e[0].sort_key())
        self.maps: Tuple[Similarity, ...] = tuple(e[0] for e in ordered)
        self.unknown = frozenset(i for i, e in enumerate(ordered) if e[1])
        self.witnesses: Tuple[Optional[Word], ...] = tuple(e[2] for e in ordered)
        self._key = tuple(map_key(f) for f in self.maps)

    def key(self):
        return self._key

    def __len__(self):
        return len(self.maps)

    def __iter__(self):
        return iter(self.maps)

    def __eq__(self, other):
        if not isinstance(other, NeighbourhoodSystem):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    @property
    def contains_identity(self) -> bool:
        return any(f.is_identity() for f in self.maps)

    @property
    def has_unknown(self) -> bool:
        return bool(self.unknown)

    def index_of(self, f: Similarity) -> Optional[int]:
        k = map_key(f)
        for i, existing in enumerate(self._key):
            if existing == k:
                return i
        return None

    def witness_of(self, f: Similarity) -> Optional[Word]:
        i = self.index_of(f)
        return None if i is None else self.witnesses[i]

    def __repr__(self):
        tags = f", unknown={sorted(self.unknown)}" if self.unknown else ""
        return f"NeighbourhoodSystem({len(self.maps)} maps{tags})"


# ---------------------------------------------------------------------------
# direct enumeration
# ---------------------------------------------------------------------------

def neighbourhood_system(ifs: IFS, a: Word, geom_depth: int = DEFAULT_GEOM_DEPTH
                         ) -> NeighbourhoodSystem:
    """N(a) by pruned depth-first search over the ratio window of a."""
    if len(a) < 1:
        raise ValueError("neighbourhood systems are defined for nonempty words")
    phi_a = ifs.compose_word(a)
    return _window_system(ifs, phi_a, geom_depth)


def _window_system(ifs: IFS, phi_a: Similarity, geom_depth: int) -> NeighbourhoodSystem:
    inv_a = phi_a.inverse()
    rho_a = phi_a.ratio
    members = []
    # stack of (word, phi_word) with word_ratio > rho_a, expanded depth-first
    stack = [((j,), ifs.map(j)) for j in range(ifs.m, 0, -1)]
    while stack:
        word, phi_w = stack.pop()
        f = inv_a.compose(phi_w)
        if phi_w.ratio.compare(rho_a) <= 0:
            # first window crossing: candidate member
            status = ifs.image_meets_ball(f, ifs.unit_ball, geom_depth)
            if status != DISJOINT:
                members.append((f, status == UNKNOWN, word))
            continue
        # prefix with room to contract further: prune or expand
        if ifs.image_meets_ball(f, ifs.unit_ball, geom_depth) == DISJOINT:
            continue
        for j in range(ifs.m, 0, -1):
            stack.append((word + (j,), phi_w.compose(ifs.map(j))))
    return NeighbourhoodSystem(members)


def nprime_count(ifs: IFS, system: NeighbourhoodSystem, geom_depth: int = DEFAULT_GEOM_DEPTH
                 ) -> int:
    """#N'(a): members whose copy f(K) certifiably meets int(conv K) (d=1)."""
    if ifs.dim != 1:
        raise NotImplementedError("N' variant implemented for d=1")
    lo, hi = ifs.hull_lo[0], ifs.hull_hi[0]
    count = 0
    for f in system.maps:
        flo = f.ratio * ifs.hull_lo[0] + f.translation[0]
        fhi = f.ratio * ifs.hull_hi[0] + f.translation[0]
        if ifs.full_hull_interval:
            if flo.compare(hi) < 0 and fhi.compare(lo) > 0:
                count += 1
        else:
            # certified via an interior attractor point of the copy
            anchor = f.apply(ifs.fixed_points[0])[0]
            if anchor.compare(lo) > 0 and anchor.compare(hi) < 0:
                count += 1
    return count


# ---------------------------------------------------------------------------
# incremental transition
# ---------------------------------------------------------------------------

def transition_step(ifs: IFS, state: NeighbourhoodSystem, j: int,
                    geom_depth: int = DEFAULT_GEOM_DEPTH) -> NeighbourhoodSystem:
    """N(a j) from N(a), independent of which word a realizes the state.

    Exact in the equicontractive case.  In general, a member that is
    already below the child threshold may stay in the child window
    depending on its witness's parent ratio, which the state does not
    determine; such members are over-included and tagged unknown
    (superset semantics).
    """
    members = []
    for g, cands in _transition_candidates(ifs, state, j):
        for f, ext, window_certain, wit in cands:
            status = ifs.image_meets_ball(f, ifs.unit_ball, geom_depth)
            if status == DISJOINT:
                continue
            members.append((f, status == UNKNOWN or not window_certain, wit))
    return NeighbourhoodSystem(members)


def _transition_candidates(ifs: IFS, state: NeighbourhoodSystem, j: int):
    """Yield (g, [(candidate map, extension word, window_certain, witness)])."""
    phi_j = ifs.map(j)
    inv_j = phi_j.inverse()
    rho_j = phi_j.ratio
    for idx, g in enumerate(state.maps):
        wit = state.witnesses[idx]
        cands = []
        if g.ratio.compare(rho_j) <= 0:
            # the witness word itself may straddle the child window; without
            # its parent ratio this is undecidable from the state alone
            cands.append((inv_j.compose(g), (), False, wit))
        else:
            stack = [((), g)]
            while stack:
                ext, rel = stack.pop()
                for jp in range(ifs.m, 0, -1):
                    child_ext = ext + (jp,)
                    child = rel.compose(ifs.map(jp))
                    if child.ratio.compare(rho_j) <= 0:
                        f = inv_j.compose(child)
                        child_wit = None if wit is None else wit + child_ext
                        cands.append((f, child_ext, True, child_wit))
                    else:
                        stack.append((child_ext, child))
        yield g, cands


# ---------------------------------------------------------------------------
# automaton exploration
# ---------------------------------------------------------------------------

@dataclass
class AutomatonReport:
    """Breadth-first closure of the neighbourhood-system transition graph."""

    states: List[NeighbourhoodSystem]
    state_words: List[Word]
    edges: Dict[Tuple[int, int], int]
    closed: bool
    budget_exceeded: bool
    max_cardinality: int
    frontier_depth: int
    geom_depth: int
    nprime_counts: List[int] = dataclass_field(default_factory=list)

    @property
    def has_unknown(self) -> bool:
        return any(s.has_unknown for s in self.states)

    def max_state_index(self) -> int:
        best = 0
        for i, s in enumerate(self.states):
            if len(s) > len(self.states[best]):
                best = i
        return best

    def rows(self):
        """Tabular view: one row per state."""
        out = []
        for i, (s, w) in enumerate(zip(self.states, self.state_words)):
            out.append({
                "state": i,
                "cardinality": len(s),
                "nprime": self.nprime_counts[i] if self.nprime_counts else "",
                "witness_word": ".".join(map(str, w)),
                "contains_identity": s.contains_identity,
                "n_unknown": len(s.unknown),
            })
        return out


def explore_automaton(ifs: IFS, max_states: int = 10_000, max_depth: int = 400,
                      geom_depth: int = DEFAULT_GEOM_DEPTH,
                      with_nprime: bool = True) -> AutomatonReport:
    """BFS closure over distinct canonical systems.

    closed=True certifies finitely many neighbourhood systems, hence the
    weak separation condition with sup #N = max_cardinality.  closed=False
    is a budget report, explicitly not a refutation.
    """
    if max_states < 1 or max_depth < 1:
        raise ValueError("budgets must be >= 1")
    if not ifs.balls_nested:
        raise CertificationError(
            "incremental exploration needs phi_j(B(0,1)) inside B(0,1): "
            "normalize the system first")
    states: List[NeighbourhoodSystem] = []
    state_words: List[Word] = []
    index: Dict[tuple, int] = {}
    edges: Dict[Tuple[int, int], int] = {}
    queue: List[int] = []
    depth_of: List[int] = []
    budget_exceeded = False
    frontier_depth = 0

    def intern(system: NeighbourhoodSystem, word: Word, depth: int) -> Optional[int]:
        nonlocal budget_exceeded
        key = system.key()
        if key in index:
            return index[key]
        if len(states) >= max_states:
            budget_exceeded = True
            return None
        idx = len(states)
        index[key] = idx
        states.append(system)
        state_words.append(word)
        depth_of.append(depth)
        queue.append(idx)
        return idx

    for j in range(1, ifs.m + 1):
        intern(neighbourhood_system(ifs, (j,), geom_depth), (j,), 1)

    head = 0
    closed = True
    while head < len(queue):
        idx = queue[head]
        head += 1
        depth = depth_of[idx]
        frontier_depth = max(frontier_depth, depth)
        if depth >= max_depth:
            closed = False
            continue
        for j in range(1, ifs.m + 1):
            nxt = transition_step(ifs, states[idx], j, geom_depth)
            nxt_idx = intern(nxt, state_words[idx] + (j,), depth + 1)
            if nxt_idx is None:
                closed = False
                continue
            edges[(idx, j)] = nxt_idx

    if budget_exceeded:
        closed = False
    max_cardinality = max(len(s) for s in states) if states else 0
    nprime = [nprime_count(ifs, s, geom_depth) for s in states] if (
        with_nprime and ifs.dim == 1) else []
    return AutomatonReport(
        states=states, state_words=state_words, edges=edges, closed=closed,
        budget_exceeded=budget_exceeded, max_cardinality=max_cardinality,
        frontier_depth=frontier_depth, geom_depth=geom_depth, nprime_counts=nprime)


def find_a0(report: AutomatonReport) -> Word:
    """Shortest word (ties lexicographic) realizing the maximal cardinality."""
    if not report.closed:
        raise CertificationError("maximality not certified: automaton did not close")
    best_word = None
    for system, word in zip(report.states, report.state_words):
        if len(system) == report.max_cardinality:
            if best_word is None or (len(word), word) < (len(best_word), best_word):
                best_word = word
    return best_word


def maximal_system(ifs: IFS, report: AutomatonReport,
                   geom_depth: int = DEFAULT_GEOM_DEPTH) -> Tuple[Word, NeighbourhoodSystem]:
    """(a0, N0) with witnesses recomputed by direct enumeration at a0."""
    a0 = find_a0(report)
    depth = geom_depth
    while True:
        n0 = neighbourhood_system(ifs, a0, depth)
        if not n0.has_unknown or depth >= GEOM_DEPTH_CAP:
            break
        depth = min(2 * depth, GEOM_DEPTH_CAP)
    if n0.has_unknown:
        raise CertificationError("N0 membership undecided at the geometry depth cap")
    if len(n0) != report.max_cardinality:
        raise CertificationError(
            "direct enumeration at a0 disagrees with the automaton; "
            "escalate geometry depth")
    return a0, n0


# ---------------------------------------------------------------------------
# maximality verification (recurrence of N0 under prefixing)
# ---------------------------------------------------------------------------

@dataclass
class MaximalityReport:
    a0: Word
    trials: int
    passed: int
    failed: List[Word]
    undecided: List[Word]

    @property
    def ok(self) -> bool:
        return not self.failed and not self.undecided and self.passed == self.trials


def verify_lemma_maximal(ifs: IFS, a0: Word, n0: NeighbourhoodSystem, trials: int,
                         seed: int, geom_depth: int = DEFAULT_GEOM_DEPTH,
                         max_prefix: int = 12) -> MaximalityReport:
    """Check N(c a0) = N0 exactly for `trials` random prefixes c.

    Undecided geometry escalates depth (doubling, capped); a word that still
    carries unknown members is reported as undecided, never as a pass.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    failed: List[Word] = []
    undecided: List[Word] = []
    passed = 0
    target = n0.key()
    for _ in range(trials):
        clen = int(rng.integers(0, max_prefix + 1))
        c = tuple(int(s) + 1 for s in rng.choice(ifs.m, size=clen, p=ifs.float_probs))
        word = c + tuple(a0)
        depth = geom_depth
        while True:
            system = neighbourhood_system(ifs, word, depth)
            if not system.has_unknown:
                break
            if depth >= GEOM_DEPTH_CAP:
                break
            depth = min(2 * depth, GEOM_DEPTH_CAP)
        if system.has_unknown:
            undecided.append(word)
        elif system.key() == target:
            passed += 1
        else:
            failed.append(word)
    return MaximalityReport(a0=tuple(a0), trials=trials, passed=passed,
                            failed=failed, undecided=undecided)


# ---------------------------------------------------------------------------
# the b0 certificate
# ---------------------------------------------------------------------------

@dataclass
class B0Certificate:
    """Constructive witness for the recurring-frame decomposition.

    For every h in F the exact identity phi_b0 = h o phi_{b_h} holds with
    N(b_h) = N0; for every other member of N0 the ball of b0 is certified
    disjoint from h(K).
    """

    a0: Word
    b0: Word
    F: List[Similarity]
    b_h: Dict[tuple, Word]          # map_key(h) -> word
    disjointness_depth: int
    complete: bool = True
    failure_stage: Optional[str] = None
    via: str = "recursion"

    def word_of(self, h: Similarity) -> Word:
        return self.b_h[map_key(h)]

    @property
    def window_word(self) -> Word:
        """The visit window a0 b0 used by the return-time machinery."""
        return tuple(self.a0) + tuple(self.b0)


def _image_vs_image_disjoint(ifs: IFS, f: Similarity, g: Similarity, depth: int) -> bool:
    """Certified: f(K) and g(K) do not meet."""
    if ifs.full_hull_interval:
        flo = f.ratio * ifs.hull_lo[0] + f.translation[0]
        fhi = f.ratio * ifs.hull_hi[0] + f.translation[0]
        glo = g.ratio * ifs.hull_lo[0] + g.translation[0]
        ghi = g.ratio * ifs.hull_hi[0] + g.translation[0]
        return flo.compare(ghi) > 0 or glo.compare(fhi) > 0
    f_boxes = [ifs.cover_root.image(f.compose(s)) for s in _level_sims(ifs, depth)]
    g_boxes = [ifs.cover_root.image(g.compose(s)) for s in _level_sims(ifs, depth)]
    for fb in f_boxes:
        ball = Ball(fb.center, fb.radius * _SQRT_FACTOR(ifs.dim))
        for gb in g_boxes:
            if not box_ball_disjoint(gb, ball):
                return False
    return True


def _SQRT_FACTOR(dim):
    # cube of half-width r sits inside the ball of radius r*sqrt(d) <= bound
    from .ifs import _SQRT_BOUND
    return _SQRT_BOUND.get(dim, QQ(dim))


def _level_sims(ifs: IFS, depth: int):
    sims = [Similarity.identity(ifs.field, ifs.dim)]
    for _ in range(depth):
        sims = [s.compose(phi) for s in sims for phi in ifs.maps]
    return sims


def _claim1_search(ifs: IFS, w: Word, h: Similarity, n0: NeighbourhoodSystem,
                   geom_depth: int):
    """Find (btilde, c) with phi_{a0} o f = phi_btilde, h o phi_c = phi_w o f.

    Searches c over the ratio window of w, pruned by certified disjointness
    of h(K_c) from K_w; returns the witness extension word btilde of the
    matched member f in N0 and the word c, or None.
    """
    phi_w = ifs.compose_word(w)
    inv_w = phi_w.inverse()
    rho_w = phi_w.ratio
    n0_index = {k: i for i, k in enumerate(n0.key())}
    stack = [((j,), ifs.map(j)) for j in range(ifs.m, 0, -1)]
    while stack:
        c, phi_c = stack.pop()
        hc = h.compose(phi_c)
        if phi_c.ratio.compare(rho_w) <= 0:
            f = inv_w.compose(hc)
            idx = n0_index.get(map_key(f))
            if idx is not None:
                btilde = n0.witnesses[idx]
                if btilde is not None:
                    return btilde, c
            continue
        if _image_vs_image_disjoint(ifs, hc, phi_w, geom_depth):
            continue
        for j in range(ifs.m, 0, -1):
            stack.append((c + (j,), phi_c.compose(ifs.map(j))))
    return None


def _ball_clear_of_copies(ifs: IFS, word: Word, copies: Sequence[Similarity],
                          geom_depth: int) -> bool:
    ball = ifs.cylinder_ball(word)
    return all(ifs.image_meets_ball(h, ball, geom_depth) == DISJOINT for h in copies)


def _find_clearing_extension(ifs: IFS, base: Word, copies: Sequence[Similarity],
                             geom_depth: int, max_len: int, max_nodes: int):
    """Shortest word e with B_{base+e} certified clear of every copy h(K)."""
    if not copies:
        return ()
    frontier: List[Word] = [()]
    nodes = 0
    for _ in range(max_len + 1):
        next_frontier: List[Word] = []
        for ext in frontier:
            nodes += 1
            if nodes > max_nodes:
                return None
            if _ball_clear_of_copies(ifs, base + ext, copies, geom_depth):
                return ext
            for j in range(1, ifs.m + 1):
                next_frontier.append(ext + (j,))
        frontier = next_frontier
    return None


def construct_b0(ifs: IFS, a0: Word, n0: NeighbourhoodSystem,
                 geom_depth: int = DEFAULT_GEOM_DEPTH,
                 extension_max_len: int = 14, extension_max_nodes: int = 20_000,
                 minimize: bool = True) -> B0Certificate:
    """Run the recursive construction; optionally shorten by direct search.

    The recursion mirrors the existence proof: while some member of N0
    outside the accumulated family F has a copy h(K) meeting K_{b_n a0},
    match it through an exact overlap with a descendant (the claim1
    search) and extend b_n.  Afterwards b0 = b_n + d + a0 for an extension
    d whose ball is certified clear of the leftover copies.
    """
    a0 = tuple(a0)
    if not n0.contains_identity:
        raise CertificationError("N0 must contain the identity")
    identity = Similarity.identity(ifs.field, ifs.dim)

    b_n: Word = ()
    family: List[Similarity] = [identity]
    partial: Dict[tuple, Word] = {map_key(identity): ()}  # phi_{b_n} = h o phi_v
    remaining = [f for f in n0.maps if not f.is_identity()]

    while remaining:
        w = b_n + a0
        phi_w = ifs.compose_word(w)
        matched = None
        stuck = []
        for h in remaining:
            depth = geom_depth
            while True:
                if _image_vs_image_disjoint(ifs, h, phi_w, depth):
                    break  # disjoint at this stage; the final extension handles it
                found = _claim1_search(ifs, w, h, n0, depth)
                if found is not None:
                    matched = (h, found)
                    break
                if depth >= GEOM_DEPTH_CAP:
                    stuck.append(h)
                    break
                depth = min(2 * depth, GEOM_DEPTH_CAP)
            if matched:
                break
        if matched:
            h, (btilde, c) = matched
            # phi_{b_n + btilde} = phi_w o f = h o phi_c, exactly
            b_n = b_n + btilde
            partial = {k: v + btilde for k, v in partial.items()}
            partial[map_key(h)] = c
            family.append(h)
            remaining = [f for f in remaining if map_key(f) != map_key(h)]
            continue
        if stuck:
            return B0Certificate(
                a0=a0, b0=b_n + a0, F=list(family), b_h=dict(partial),
                disjointness_depth=geom_depth, complete=False,
                failure_stage=f"neither disjointness nor exact overlap certified for "
                              f"{len(stuck)} members at depth cap")
        break  # everything left is certified clear of K_{b_n a0}

    complement = [f for f in n0.maps
                  if map_key(f) not in {map_key(g) for g in family}]
    ext = _find_clearing_extension(ifs, b_n + a0, complement, geom_depth,
                                   extension_max_len, extension_max_nodes)
    if ext is None:
        return B0Certificate(
            a0=a0, b0=b_n + a0, F=list(family), b_h=dict(partial),
            disjointness_depth=geom_depth, complete=False,
            failure_stage="no certified-clear descendant within the search budget")
    d = (a0 + ext) if ext else ()  # descend through a0 so names keep ending in a0
    b0 = b_n + d + a0
    b_h = {k: partial[k] + d + a0 for k in partial}
    cert = B0Certificate(a0=a0, b0=b0, F=list(family), b_h=b_h,
                         disjointness_depth=geom_depth)

    if minimize:
        shorter = _minimize_certificate(ifs, cert, n0, geom_depth)
        if shorter is not None:
            return shorter
    return cert


def solve_words(ifs: IFS, target: Similarity, max_len: int, cap: int = 64
                ) -> List[Word]:
    """All words w with phi_w = target exactly, up to max_len (at most cap)."""
    if target.is_identity():
        return [()]
    # necessary: target(K) bounding box inside the prefix cover cube
    t_lo = [target.ratio * lo + t for lo, t in zip(ifs.hull_lo, target.translation)]
    t_hi = [target.ratio * hi + t for hi, t in zip(ifs.hull_hi, target.translation)]

    def compatible(prefix: Similarity) -> bool:
        box = ifs.cover_root.image(prefix)
        for j in range(ifs.dim):
            lo_j = box.center[j] - box.radius
            hi_j = box.center[j] + box.radius
            if t_lo[j].compare(lo_j) < 0 or t_hi[j].compare(hi_j) > 0:
                return False
        return True

    out: List[Word] = []
    stack = [((j,), ifs.map(j)) for j in range(ifs.m, 0, -1)]
    while stack and len(out) < cap:
        word, phi = stack.pop()
        if phi == target:
            out.append(word)
            continue
        if len(word) >= max_len:
            continue
        if phi.ratio.compare(target.ratio) <= 0:
            continue  # ratios only shrink; equality already checked
        if not compatible(phi):
            continue
        for j in range(ifs.m, 0, -1):
            stack.append((word + (j,), phi.compose(ifs.map(j))))
    return out


def solve_word(ifs: IFS, target: Similarity, max_len: int) -> Optional[Word]:
    """Some word w with phi_w = target exactly, or None."""
    words = solve_words(ifs, target, max_len, cap=1)
    return words[0] if words else None


def _certificate_from_candidate(ifs: IFS, a0: Word, n0: NeighbourhoodSystem,
                                b0: Word, geom_depth: int) -> Optional[B0Certificate]:
    """Try to complete a candidate b0 (ending with a0) into a certificate."""
    phi_b0 = ifs.compose_word(b0)
    b0_sys = neighbourhood_system(ifs, b0, geom_depth)
    if b0_sys.has_unknown or b0_sys.key() != n0.key():
        return None
    family: List[Similarity] = []
    b_h: Dict[tuple, Word] = {}
    leftovers: List[Similarity] = []
    for h in n0.maps:
        chosen = None
        for word in solve_words(ifs, h.inverse().compose(phi_b0), max_len=len(b0)):
            if not word:
                continue
            check = neighbourhood_system(ifs, word, geom_depth)
            if not check.has_unknown and check.key() == n0.key():
                chosen = word
                break
        if chosen is not None:
            family.append(h)
            b_h[map_key(h)] = chosen
        else:
            leftovers.append(h)
    if not any(h.is_identity() for h in family):
        return None
    if not _ball_clear_of_copies(ifs, b0, leftovers, geom_depth):
        return None
    return B0Certificate(a0=tuple(a0), b0=tuple(b0), F=family, b_h=b_h,
                         disjointness_depth=geom_depth, via="direct-search")


def _minimize_certificate(ifs: IFS, cert: B0Certificate, n0: NeighbourhoodSystem,
                          geom_depth: int) -> Optional[B0Certificate]:
    """Shortest word u+a0 passing the same validation, shortlex order."""
    a0 = tuple(cert.a0)
    best_len = len(cert.b0)
    prefixes: List[Word] = [()]
    while prefixes and len(prefixes[0]) + len(a0) < best_len:
        for u in prefixes:
            cand = _certificate_from_candidate(ifs, a0, n0, u + a0, geom_depth)
            if cand is not None:
                return cand
        if len(prefixes) * ifs.m > 4096:
            break
        prefixes = [u + (j,) for u in prefixes for j in range(1, ifs.m + 1)]
    return None


@dataclass
class CertificateCheck:
    identities_ok: bool
    systems_ok: bool
    disjointness_ok: bool
    window_system_ok: bool
    details: List[str]

    @property
    def ok(self):
        return (self.identities_ok and self.systems_ok and self.disjointness_ok
                and self.window_system_ok)


def verify_certificate(ifs: IFS, cert: B0Certificate, n0: NeighbourhoodSystem,
                       geom_depth: int = DEFAULT_GEOM_DEPTH) -> CertificateCheck:
    """Independent recheck of every certificate equation and disjointness."""
    details: List[str] = []
    phi_b0 = ifs.compose_word(cert.b0)

    identities_ok = True
    systems_ok = True
    for h in cert.F:
        word = cert.word_of(h)
        if h.compose(ifs.compose_word(word)) != phi_b0:
            identities_ok = False
            details.append(f"identity failed for member with word {word}")
        system = neighbourhood_system(ifs, word, geom_depth)
        if system.has_unknown or system.key() != n0.key():
            systems_ok = False
            details.append(f"N(b_h) != N0 for word {word}")

    window_ok = True
    b0_sys = neighbourhood_system(ifs, cert.b0, geom_depth)
    if b0_sys.has_unknown or b0_sys.key() != n0.key():
        window_ok = False
        details.append("N(b0) != N0")

    fam_keys = {map_key(h) for h in cert.F}
    complement = [f for f in n0.maps if map_key(f) not in fam_keys]
    disjoint_ok = _ball_clear_of_copies(ifs, cert.b0, complement,
                                        max(geom_depth, cert.disjointness_depth))
    if not disjoint_ok:
        details.append("complement copy meets B_b0")

    return CertificateCheck(identities_ok=identities_ok, systems_ok=systems_ok,
                            disjointness_ok=disjoint_ok, window_system_ok=window_ok,
                            details=details)


# ---------------------------------------------------------------------------
# exact weights
# ---------------------------------------------------------------------------

@dataclass
class WeightedSystem:
    """A neighbourhood system with the exact p-mass carried by each map."""

    base: NeighbourhoodSystem
    weights: Tuple[Rational, ...]   # aligned with base.maps, unnormalized

    @property
    def total(self) -> Rational:
        return sum(self.weights, QQ(0))

    def normalized(self) -> Tuple[Rational, ...]:
        t = self.total
        return tuple(w / t for w in self.weights)

    def weight_of(self, f: Similarity) -> Rational:
        i = self.base.index_of(f)
        return QQ(0) if i is None else self.weights[i]


def compute_weights_q(ifs: IFS, a: Word, geom_depth: int = DEFAULT_GEOM_DEPTH
                      ) -> WeightedSystem:
    """Exact window weights at a by DP along the word, never enumerating Gamma^k.

    weights[f] = sum of p_b over window words b with phi_a^{-1} phi_b = f and
    K_b meeting B_a; normalized they are the convex weights of the scenery
    representation at a.
    """
    if len(a) < 1:
        raise ValueError("need a nonempty word")
    if not ifs.balls_nested:
        raise CertificationError(
            "weight propagation needs phi_j(B(0,1)) inside B(0,1): "
            "normalize the system first")
    state, weights = _weighted_root(ifs, a[0], geom_depth)
    for j in a[1:]:
        state, weights = _weighted_step(ifs, state, weights, j, geom_depth)
    return WeightedSystem(base=state, weights=tuple(weights))


def _weighted_root(ifs: IFS, j: int, geom_depth: int):
    phi_a = ifs.map(j)
    inv_a = phi_a.inverse()
    rho_a = phi_a.ratio
    acc: Dict[tuple, list] = {}
    stack = [((jj,), ifs.map(jj), ifs.prob(jj)) for jj in range(ifs.m, 0, -1)]
    while stack:
        word, phi_w, p = stack.pop()
        f = inv_a.compose(phi_w)
        if phi_w.ratio.compare(rho_a) <= 0:
            status = ifs.image_meets_ball(f, ifs.unit_ball, geom_depth)
            if status != DISJOINT:
                k = map_key(f)
                if k in acc:
                    acc[k][1] += p
                    acc[k][2] = acc[k][2] and (status == UNKNOWN)
                else:
                    acc[k] = [f, p, status == UNKNOWN, word]
            continue
        if ifs.image_meets_ball(f, ifs.unit_ball, geom_depth) == DISJOINT:
            continue
        for jj in range(ifs.m, 0, -1):
            stack.append((word + (jj,), phi_w.compose(ifs.map(jj)), p * ifs.prob(jj)))
    return _pack_weighted(acc)


def _weighted_step(ifs: IFS, state: NeighbourhoodSystem, weights, j: int,
                   geom_depth: int):
    acc: Dict[tuple, list] = {}
    for ((g, cands), w_g) in zip(_transition_candidates(ifs, state, j), weights):
        if w_g == 0:
            continue
        for f, ext, window_certain, wit in cands:
            status = ifs.image_meets_ball(f, ifs.unit_ball, geom_depth)
            if status == DISJOINT:
                continue
            p_ext = QQ(1)
            for s in ext:
                p_ext = p_ext * ifs.prob(s)
            unk = status == UNKNOWN or not window_certain
            k = map_key(f)
            if k in acc:
                acc[k][1] += w_g * p_ext
                acc[k][2] = acc[k][2] and unk
            else:
                acc[k] = [f, w_g * p_ext, unk, wit]
    return _pack_weighted(acc)


def _pack_weighted(acc: Dict[tuple, list]):
    members = [(e[0], e[2], e[3]) for e in acc.values()]
    system = NeighbourhoodSystem(members)
    weights = []
    for f in system.maps:
        weights.append(acc[map_key(f)][1])
    return system, weights


# ---------------------------------------------------------------------------
# long-horizon weight propagation
# ---------------------------------------------------------------------------

class WeightFlow:
    """Window-weight propagation along long words via the closed automaton.

    Exact rational DP carries k-bit denominators at step k, so long
    trajectories use float64 vectors (nonnegative sums-products, normalized
    each step; no cancellation).  Exactness stays with compute_weights_q
    where the contracts demand it.
    """

    def __init__(self, ifs: IFS, report: AutomatonReport,
                 geom_depth: int = DEFAULT_GEOM_DEPTH):
        if not report.closed:
            raise CertificationError("weight flow needs a closed automaton")
        self.ifs = ifs
        self.report = report
        self._state_index = {s.key(): i for i, s in enumerate(report.states)}

        self.root_state = {}
        self.root_vector = {}
        for j in range(1, ifs.m + 1):
            system, weights = _weighted_root(ifs, j, geom_depth)
            idx = self._state_index.get(system.key())
            if idx is None:
                raise CertificationError("root state missing from the automaton")
            self.root_state[j] = idx
            self.root_vector[j] = np.array([float(w) for w in weights])

        # per (state, symbol): column-stochastic-ish transfer triples
        self.transfer = {}
        for (src, j), dst in report.edges.items():
            src_state = report.states[src]
            dst_state = report.states[dst]
            dst_index = {k: i for i, k in enumerate(dst_state.key())}
            triples = []
            seen = set()
            for g_idx, (g, cands) in enumerate(
                    _transition_candidates(ifs, src_state, j)):
                for f, ext, _certain, _wit in cands:
                    status = ifs.image_meets_ball(f, ifs.unit_ball, geom_depth)
                    if status == DISJOINT:
                        continue
                    d_idx = dst_index.get(map_key(f))
                    if d_idx is None:
                        raise CertificationError(
                            "transfer table inconsistent with the automaton edge")
                    p_ext = 1.0
                    for s in ext:
                        p_ext *= float(ifs.prob(s))
                    triples.append((d_idx, g_idx, p_ext))
                    seen.add(d_idx)
            if seen != set(range(len(dst_state))):
                raise CertificationError("transfer table misses a destination member")
            matrix = np.zeros((len(dst_state), len(src_state)))
            for d_idx, g_idx, p in triples:
                matrix[d_idx, g_idx] += p
            self.transfer[(src, j)] = matrix

    def propagate(self, symbols, positions):
        """State and normalized weight vector at each requested position.

        positions are 1-based word lengths (k means the prefix i|k), sorted
        ascending; symbols is a 1-based sequence.
        """
        positions = sorted(set(int(p) for p in positions))
        if not positions:
            return {}
        if positions[0] < 1 or positions[-1] > len(symbols):
            raise ValueError("positions outside the word")
        j0 = int(symbols[0])
        state = self.root_state[j0]
        vec = self.root_vector[j0].copy()
        vec /= vec.sum()
        out = {}
        want = iter(positions)
        nxt = next(want)
        if nxt == 1:
            out[1] = (state, vec.copy())
            nxt = next(want, None)
        for k in range(1, positions[-1]):
            j = int(symbols[k])
            vec = self.transfer[(state, j)] @ vec
            state = self.report.edges[(state, j)]
            total = vec.sum()
            if total <= 0:
                raise CertificationError("weight vector vanished during propagation")
            vec /= total
            if nxt == k + 1:
                out[k + 1] = (state, vec.copy())
                nxt = next(want, None)
        return out


# ---------------------------------------------------------------------------
# zeta coefficients
# ---------------------------------------------------------------------------

@dataclass
class ZetaCoefficients:
    """Exact reconstruction data attached to a certificate.

    For each member h of F: coefficient vector over N0 (the p-mass of words
    c with phi_c = phi_{b_h} o f) and its positive lower bound C_h.
    """

    n0: NeighbourhoodSystem
    family: List[Similarity]
    coefficients: Dict[tuple, Tuple[Rational, ...]]   # map_key(h) -> per-f weights
    lower_bounds: Dict[tuple, Rational]               # map_key(h) -> C_h

    def c_min(self) -> Rational:
        return min(self.lower_bounds.values())

    def q_weights(self, ifs: IFS, prefix: Word,
                  geom_depth: int = DEFAULT_GEOM_DEPTH) -> Dict[tuple, Rational]:
        """Normalized convex weights q_h at a word prefix ending with a0.

        prefix is i|k' = i|k minus the trailing b0; weights are the exact
        window masses of each h in F, renormalized over F.
        """
        ws = compute_weights_q(ifs, prefix, geom_depth)
        raw = {map_key(h): ws.weight_of(h) for h in self.family}
        total = sum(raw.values(), QQ(0))
        if total == 0:
            raise CertificationError("prefix carries no mass on the family F")
        return {k: v / total for k, v in raw.items()}


def compute_zeta_coefficients(ifs: IFS, cert: B0Certificate, n0: NeighbourhoodSystem,
                              geom_depth: int = DEFAULT_GEOM_DEPTH) -> ZetaCoefficients:
    """Exact per-member coefficient vectors and the constants C_h > 0."""
    coeffs: Dict[tuple, Tuple[Rational, ...]] = {}
    bounds: Dict[tuple, Rational] = {}
    for h in cert.F:
        word = cert.word_of(h)
        ws = compute_weights_q(ifs, word, geom_depth)
        if ws.base.key() != n0.key():
            raise CertificationError(f"N(b_h) != N0 at word {word}")
        vec = tuple(ws.weights)
        coeffs[map_key(h)] = vec
        c_h = min(vec)
        if c_h <= 0:
            raise CertificationError(
                "C_h = 0 contradicts the positive lower bound; certificate invalid")
        bounds[map_key(h)] = c_h
    return ZetaCoefficients(n0=n0, family=list(cert.F), coefficients=coeffs,
                            lower_bounds=bounds)
