"""Scenery-flow simulation: frames along a trajectory, return times, blocks.

A scenery frame at time t is the measure zoomed to the ball B(pi(i), e^-t).
Rather than expanding the whole measure to that depth (exponentially many
atoms), frames factor through the symbolic level k(t): an exact active set
of cylinders near the trajectory point, rescaled level by level, with a
bounded residual zoom on top.  The same engine, seeded with the reference
frame's branch copies, produces the deep in-block zooms of the weighted
reference measure.

The active-set recursion is deliberately independent of the neighbourhood
machinery: it keeps every cylinder within a generous float reach of the
path (no certified window filtering) and carries raw p-mass, so agreement
between its frames and the reference-frame reconstruction is a genuine
two-route check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .ifs import IFS, Similarity, Word
from .measure import AtomicMeasure, DepthError, approx_measure, zoom
from .neighbourhood import (
    B0Certificate,
    WeightFlow,
    ZetaCoefficients,
    map_key,
)

DEFAULT_REACH = 4.0
PATH_LOOKAHEAD = 48


def as_symbol_array(word) -> np.ndarray:
    """1-based symbol sequence as a compact numpy array."""
    arr = np.asarray(word, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError("need a flat symbol sequence")
    return arr


class LocalExpansion:
    """Exact cylinder active set around a symbolic trajectory.

    State at level k: relative maps rel = phi_{i|k}^{-1} o phi_b (exact
    field arithmetic) with float weights proportional to the p-mass, for
    every cylinder b whose copy rel(K) stays within `reach` of the frame
    origin.  Exact-overlap cylinders merge, which is what keeps the active
    set (and its coefficients) bounded on finite-type systems.
    """

    def __init__(self, ifs: IFS, symbols, initial=None, reach: float = DEFAULT_REACH):
        self.ifs = ifs
        self.symbols = as_symbol_array(symbols)
        self.reach = reach
        self.level = 0
        self.log_scale = 0.0
        if initial is None:
            initial = [(Similarity.identity(ifs.field, ifs.dim), 1.0)]
        self.state: Dict[Similarity, float] = {}
        for rel, w in initial:
            if w > 0 and self._within_reach(rel):
                self.state[rel] = self.state.get(rel, 0.0) + float(w)
        if not self.state:
            raise ValueError("empty initial active set within reach")
        self._normalize()

    def _within_reach(self, rel: Similarity) -> bool:
        # generous float test; the margin absorbs conversion error
        r = float(rel.ratio)
        for u, lo, hi in zip(rel.translation, self.ifs.float_hull_lo,
                             self.ifs.float_hull_hi):
            uf = float(u)
            if uf + r * lo > self.reach or uf + r * hi < -self.reach:
                return False
        return True

    def _normalize(self):
        total = sum(self.state.values())
        if total <= 0:
            raise RuntimeError("active set lost all mass")
        for k in list(self.state):
            self.state[k] /= total

    def advance(self, to_level: int):
        if to_level < self.level:
            raise ValueError("cannot rewind the expansion")
        if to_level + PATH_LOOKAHEAD > len(self.symbols):
            raise DepthError(
                f"word too short: need at least {to_level + PATH_LOOKAHEAD} symbols")
        for k in range(self.level, to_level):
            j = int(self.symbols[k])
            inv_j = self.ifs.map(j).inverse()
            nxt: Dict[Similarity, float] = {}
            for rel, w in self.state.items():
                for jj in range(1, self.ifs.m + 1):
                    child = inv_j.compose(rel.compose(self.ifs.map(jj)))
                    cw = w * float(self.ifs.prob(jj))
                    if not self._within_reach(child):
                        continue
                    nxt[child] = nxt.get(child, 0.0) + cw
            self.state = nxt
            self.level = k + 1
            self.log_scale += float(self.ifs.float_log_inv_ratios[j - 1])
            self._normalize()

    def path_point(self, level: Optional[int] = None,
                   lookahead: int = PATH_LOOKAHEAD) -> np.ndarray:
        """Float approximation of the projected point of the shifted word."""
        k = self.level if level is None else level
        end = min(len(self.symbols), k + lookahead)
        x = np.zeros(self.ifs.dim)
        for s in self.symbols[k:end][::-1]:
            i = int(s) - 1
            x = self.ifs.float_ratios[i] * x + self.ifs.float_translations[i]
        return x

    def frame_cloud(self, lattice: "AtomLattice") -> AtomicMeasure:
        """All active cylinders expanded by the lattice depth, frame coords."""
        pts = []
        wts = []
        max_scale = 0.0
        for rel, w in self.state.items():
            r = float(rel.ratio)
            u = np.array([float(t) for t in rel.translation])
            pts.append(r * lattice.points + u)
            wts.append(w * lattice.weights)
            max_scale = max(max_scale, r)
        return AtomicMeasure(
            np.concatenate(pts), np.concatenate(wts),
            {"resolution": max_scale * lattice.resolution,
             "provenance": f"local_expansion(level={self.level})"})


class AtomLattice:
    """Shared depth-n0 atom template (anchors and p-masses of mu)."""

    def __init__(self, ifs: IFS, depth: int):
        template = approx_measure(ifs, depth)
        self.points = template.points
        self.weights = template.weights
        self.resolution = template.resolution
        self.depth = depth


def max_residual(ifs: IFS) -> float:
    """Largest residual zoom a frame oracle performs on top of a level.

    Bounded by the worst alpha_0 (the hull stays strictly inside the unit
    ball) plus one level of scale, with a little slack.
    """
    hull_norm = max(abs(ifs.float_hull_lo).max(), abs(ifs.float_hull_hi).max())
    return -math.log(1.0 - hull_norm) + math.log(1.0 / ifs.rho_min) + 0.1


def default_lattice_depth(ifs: IFS, max_residual: float,
                          resolution_factor: float = 8.0) -> int:
    """Depth n0 with rho_max^n0 * diam <= e^-max_residual / factor."""
    diam = 2.0 * float(ifs.cover_root.radius)
    need = math.exp(-max_residual) / resolution_factor
    n0 = max(1, math.ceil(math.log(need / diam) / math.log(ifs.rho_max)))
    return n0


class FrameOracle:
    """Scenery frames mu_{i,t} (or reference-frame zooms) at arbitrary times.

    Tracks the level thresholds rtilde(k) = log(1/rho_{i|k}) + alpha_0 of
    the shifted word, picks the deepest admissible level for each query and
    zooms the active-set cloud by the bounded residual.
    """

    def __init__(self, ifs: IFS, symbols, initial=None, lattice: AtomLattice = None,
                 reach: float = DEFAULT_REACH, resolution_factor: float = 8.0):
        self.ifs = ifs
        self.expansion = LocalExpansion(ifs, symbols, initial, reach)
        self.lattice = lattice or AtomLattice(
            ifs, default_lattice_depth(ifs, max_residual(ifs), resolution_factor))
        self.resolution_factor = resolution_factor
        self._rtilde: List[float] = []
        self._log_scales: List[float] = [0.0]
        self._cloud_cache: Tuple[int, Optional[AtomicMeasure]] = (-1, None)

    def _alpha0(self, level: int) -> float:
        x = self.expansion.path_point(level)
        norm = float(np.linalg.norm(x))
        return max(0.0, -math.log(max(1e-12, 1.0 - norm)))

    def _ensure_thresholds(self, up_to_level: int):
        while len(self._rtilde) <= up_to_level:
            k = len(self._rtilde)
            if k >= len(self._log_scales):
                sym = int(self.expansion.symbols[k - 1]) - 1
                self._log_scales.append(
                    self._log_scales[-1] + float(self.ifs.float_log_inv_ratios[sym]))
            self._rtilde.append(self._log_scales[k] + self._alpha0(k))

    def level_for(self, t: float) -> int:
        """Deepest level k with rtilde(k) <= t (0 when none)."""
        min_log = float(self.ifs.float_log_inv_ratios.min())
        bound = int(t / min_log) + 1
        bound = min(bound, len(self.expansion.symbols) - PATH_LOOKAHEAD)
        self._ensure_thresholds(min(bound, len(self.expansion.symbols)))
        best = 0
        for k in range(min(bound, len(self._rtilde) - 1), -1, -1):
            if self._rtilde[k] <= t:
                best = k
                break
        return best

    def frame_at(self, t: float) -> AtomicMeasure:
        """The zoomed frame at time t (mass-1 measure on B(0,1))."""
        k = self.level_for(t)
        if k < self.expansion.level:
            raise ValueError("frame times must be nondecreasing per oracle")
        if k > self.expansion.level:
            self.expansion.advance(k)
        cached_level, cloud = self._cloud_cache
        if cached_level != k:
            cloud = self.expansion.frame_cloud(self.lattice)
            self._cloud_cache = (k, cloud)
        center = self.expansion.path_point(k)
        residual = t - self._log_scales[k]
        return zoom(cloud, center, residual, self.resolution_factor)

    def frames(self, times: Sequence[float]) -> List[AtomicMeasure]:
        return [self.frame_at(float(t)) for t in times]


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class SceneryTrajectory:
    word: np.ndarray
    x: np.ndarray
    times: np.ndarray
    frames: List[AtomicMeasure]
    meta: dict = dataclass_field(default_factory=dict)


def required_word_length(ifs: IFS, T: float) -> int:
    """Symbols needed to resolve scenery up to time T (plus path lookahead)."""
    min_log = float(ifs.float_log_inv_ratios.min())
    return int(T / min_log) + 2 + PATH_LOOKAHEAD


def scenery_trajectory(ifs: IFS, word, T: float, dt: float,
                       lattice: AtomLattice = None) -> SceneryTrajectory:
    """Frames of the scenery at t = 0, dt, ..., T along one sampled word."""
    symbols = as_symbol_array(word)
    need = required_word_length(ifs, T)
    if len(symbols) < need:
        raise DepthError(f"word too short for T={T:.3g}: need {need} symbols, "
                         f"got {len(symbols)}")
    oracle = FrameOracle(ifs, symbols, lattice=lattice)
    times = np.arange(0.0, T + dt / 2, dt)
    frames = oracle.frames(times)
    return SceneryTrajectory(
        word=symbols, x=oracle.expansion.path_point(0), times=times, frames=frames,
        meta={"dt": dt, "T": T, "lattice_depth": oracle.lattice.depth})


# ---------------------------------------------------------------------------
# return times
# ---------------------------------------------------------------------------

@dataclass
class ReturnTimeRecord:
    """Visits of the shifted word to the certificate window a0 b0."""

    window: Word
    t_n: np.ndarray          # visit positions (word lengths k), increasing
    tau: np.ndarray          # gaps t_{n+1} - t_n
    alpha0: np.ndarray       # corrections at each visit (and one past the end)
    r_n: np.ndarray          # zoom thresholds per visit
    log_rho_prefix: np.ndarray  # log(1/rho_{i|t_n}) per visit

    @property
    def visits(self) -> int:
        return len(self.t_n)


def _window_positions(symbols: np.ndarray, window: np.ndarray) -> np.ndarray:
    L = len(window)
    if len(symbols) < L:
        return np.empty(0, dtype=np.int64)
    hits = np.ones(len(symbols) - L + 1, dtype=bool)
    for offset, s in enumerate(window):
        hits &= symbols[offset:len(symbols) - L + 1 + offset] == s
    return np.nonzero(hits)[0] + L  # visit recorded at the window's end


def _projected_points(ifs: IFS, symbols: np.ndarray, starts: np.ndarray,
                      lookahead: int = PATH_LOOKAHEAD) -> np.ndarray:
    """pi(sigma^k i) float approximations for many shifts at once."""
    n = len(starts)
    x = np.zeros((n, ifs.dim))
    for off in range(lookahead - 1, -1, -1):
        idx = np.minimum(starts + off, len(symbols) - 1)
        sym = symbols[idx] - 1
        x = ifs.float_ratios[sym][:, None] * x + ifs.float_translations[sym]
    return x


def return_times(ifs: IFS, word, cert: B0Certificate) -> ReturnTimeRecord:
    """All window visits with gaps, corrections and zoom thresholds.

    The visit at position k means the prefix i|k ends with a0 b0.
    """
    symbols = as_symbol_array(word)
    window = np.asarray(cert.window_word, dtype=np.int64)
    usable = len(symbols) - PATH_LOOKAHEAD
    positions = _window_positions(symbols[:max(usable, 0)], window)
    if len(positions) == 0:
        p_window = float(np.prod([ifs.float_probs[s - 1] for s in window]))
        raise ValueError(
            f"no visits to the window in {usable} usable symbols; expected "
            f"visit frequency is {p_window:.3g}, try a sample of length "
            f">= {int(10 / max(p_window, 1e-12))}")
    points = _projected_points(ifs, symbols, positions)
    norms = np.linalg.norm(points, axis=1)
    alpha0 = np.maximum(0.0, -np.log(np.maximum(1e-12, 1.0 - norms)))
    log_steps = ifs.float_log_inv_ratios[symbols - 1]
    cum = np.concatenate([[0.0], np.cumsum(log_steps)])
    log_prefix = cum[positions]
    r_n = log_prefix + alpha0
    tau = np.diff(positions)
    return ReturnTimeRecord(window=tuple(int(s) for s in window),
                            t_n=positions, tau=tau, alpha0=alpha0,
                            r_n=r_n, log_rho_prefix=log_prefix)


# ---------------------------------------------------------------------------
# Birkhoff averages along return times
# ---------------------------------------------------------------------------

@dataclass
class BirkhoffResult:
    name: str
    partial: np.ndarray       # (1/n) sum_{k<n} g(sigma^{t_k} i), n = 1..N
    target: float             # conditional average over all recorded visits
    sd: float                 # empirical standard deviation of g at visits
    values: np.ndarray


def birkhoff_average(ifs: IFS, word, record: ReturnTimeRecord, g: str,
                     lattice: AtomLattice = None) -> BirkhoffResult:
    """Partial averages of a test functional sampled at the return times.

    Built-in family: "eta" (the block-length cocycle), "cylinder:a.b.c"
    (indicator that the shifted word starts with the given symbols), and
    "moment:t" (first coordinate mean of the frame at zoom offset t,
    capped at 256 visits).
    """
    symbols = as_symbol_array(word)
    if g == "eta":
        # tau_k log(1/rho) + alpha0(next) - alpha0(here) = r_{k+1} - r_k
        values = np.diff(record.r_n)
    elif g.startswith("cylinder:"):
        target_word = np.array([int(s) for s in g.split(":", 1)[1].split(".")],
                               dtype=np.int64)
        L = len(target_word)
        ok = np.ones(len(record.t_n), dtype=bool)
        for off, s in enumerate(target_word):
            idx = record.t_n + off
            valid = idx < len(symbols)
            ok &= valid & (symbols[np.minimum(idx, len(symbols) - 1)] == s)
        values = ok.astype(float)
    elif g.startswith("moment:"):
        t_off = float(g.split(":", 1)[1])
        cap = min(256, record.visits)
        lattice = lattice or AtomLattice(ifs, default_lattice_depth(
            ifs, t_off + math.log(1 / ifs.rho_min) + 2.0))
        vals = []
        for k in record.t_n[:cap]:
            oracle = FrameOracle(ifs, symbols[int(k):], lattice=lattice)
            frame = oracle.frame_at(t_off)
            vals.append(float(frame.points[:, 0] @ frame.weights))
        values = np.array(vals)
    else:
        raise ValueError(f"unknown test functional {g!r}")
    partial = np.cumsum(values) / np.arange(1, len(values) + 1)
    return BirkhoffResult(name=g, partial=partial, target=float(values.mean()),
                          sd=float(values.std()), values=values)


# ---------------------------------------------------------------------------
# empirical distributions and their distance
# ---------------------------------------------------------------------------

@dataclass
class EmpiricalDistribution:
    """Finitely many measures with weights: a discretized time average."""

    members: List[AtomicMeasure]
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.members) != len(self.weights):
            raise ValueError("members and weights must align")
        total = self.weights.sum()
        if total <= 0:
            raise ValueError("empirical distribution needs positive mass")
        self.weights = self.weights / total

    def __len__(self):
        return len(self.members)

    def resample_uniform(self, count: int) -> "EmpiricalDistribution":
        """Systematic resampling to `count` equally weighted members."""
        cum = np.cumsum(self.weights)
        marks = (np.arange(count) + 0.5) / count
        idx = np.searchsorted(cum, marks, side="left")
        idx = np.minimum(idx, len(self.members) - 1)
        return EmpiricalDistribution([self.members[i] for i in idx],
                                     np.full(count, 1.0 / count))


def _cdf_matrix(members: List[AtomicMeasure], grid_cells: int) -> np.ndarray:
    """Per-member CDF on the common [-1,1] grid (d=1 ground metric)."""
    edges = np.linspace(-1.0, 1.0, grid_cells + 1)
    out = np.empty((len(members), grid_cells))
    for i, m in enumerate(members):
        hist, _ = np.histogram(m.points[:, 0], bins=edges, weights=m.weights)
        out[i] = np.cumsum(hist)
    return out


def distribution_distance(d1: EmpiricalDistribution, d2: EmpiricalDistribution,
                          member_cap: int = 200, grid_cells: int = 2048) -> float:
    """Wasserstein distance between distributions of measures.

    Ground cost: W1 between member measures, evaluated on a common grid
    (exact up to one cell width).  Both sides are resampled to equally
    weighted ensembles of the same size, for which the optimal transport
    problem is an assignment problem, solved exactly.
    """
    if not d1.members or not d2.members:
        raise ValueError("empty distribution")
    if d1.members[0].dim != 1 or d2.members[0].dim != 1:
        raise NotImplementedError("nested distance implemented for d=1 members")
    n = min(member_cap, max(len(d1), len(d2)))
    u1 = d1.resample_uniform(n)
    u2 = d2.resample_uniform(n)
    f1 = _cdf_matrix(u1.members, grid_cells)
    f2 = _cdf_matrix(u2.members, grid_cells)
    cell = 2.0 / grid_cells
    # cost[i,j] = integral |F1_i - F2_j|, accumulated in row chunks
    cost = np.empty((n, n))
    chunk = max(1, (1 << 24) // (n * grid_cells))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        cost[start:stop] = np.abs(
            f1[start:stop, None, :] - f2[None, :, :]).sum(axis=2) * cell
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def empirical_tangent_distribution(traj: SceneryTrajectory) -> EmpiricalDistribution:
    """Uniform weights over the trajectory frames (Riemann time average)."""
    if len(traj.frames) < 2:
        raise ValueError("need at least two frames")
    return EmpiricalDistribution(list(traj.frames),
                                 np.full(len(traj.frames), 1.0))


# ---------------------------------------------------------------------------
# block assembly
# ---------------------------------------------------------------------------

def branch_copies_initial(ifs: IFS, n0_maps: Sequence[Similarity],
                          branch_weights: Sequence[float]):
    return [(f, float(w)) for f, w in zip(n0_maps, branch_weights) if w > 0]


def assemble_qn(ifs: IFS, word, record: ReturnTimeRecord, cert: B0Certificate,
                zc: ZetaCoefficients, flow: WeightFlow, n: int, dt: float,
                member_cap: int = 200, lattice: AtomLattice = None
                ) -> EmpiricalDistribution:
    """The block-structured empirical distribution over the first n visits.

    Block k covers residual times [alpha0_k, tau_k log(1/rho) + alpha0_{k+1}]
    of the weighted reference measure zeta(i|t_k) d nu, zoomed along the
    shifted word; blocks are weighted by their length, i.e. members are
    sampled uniformly in scenery time.
    """
    symbols = as_symbol_array(word)
    if n > record.visits - 1:
        raise ValueError(f"need at least n+1 = {n + 1} visits, have {record.visits}")
    n0_maps = list(zc.n0.maps)
    family_keys = [map_key(h) for h in zc.family]

    # zeta weights at each visit: q over F from the propagated window weights
    query_positions = [int(record.t_n[k]) - len(cert.b0) for k in range(n)]
    flows = flow.propagate(symbols, query_positions)
    n0_key_order = list(zc.n0.key())

    block_bounds = []
    for k in range(n):
        a = record.alpha0[k]
        b = (record.log_rho_prefix[k + 1] - record.log_rho_prefix[k]) + record.alpha0[k + 1]
        block_bounds.append((a, b))
    lengths = np.array([b - a for a, b in block_bounds])
    total_time = lengths.sum()

    # systematic sampling, uniform in time across all blocks
    count = min(member_cap, max(2, int(total_time / dt)))
    marks = (np.arange(count) + 0.5) / count * total_time
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    members: List[AtomicMeasure] = []
    for k in range(n):
        sel = marks[(marks >= cum[k]) & (marks < cum[k + 1])] - cum[k]
        if len(sel) == 0:
            continue
        state_idx, weights_vec = flows[query_positions[k]]
        state = flow.report.states[state_idx]
        if state.key() != zc.n0.key():
            raise ValueError("visit prefix does not carry the maximal system")
        member_weight = {mk: weights_vec[i] for i, mk in enumerate(state.key())}
        q_raw = np.array([member_weight[hk] for hk in family_keys])
        q = q_raw / q_raw.sum()
        lam = np.zeros(len(n0_maps))
        for qi, hk in zip(q, family_keys):
            coeff = zc.coefficients[hk]
            lam += qi * np.array([float(c) for c in coeff])
        oracle = FrameOracle(
            ifs, symbols[int(record.t_n[k]):],
            initial=branch_copies_initial(ifs, n0_maps, lam),
            lattice=lattice)
        times = np.sort(block_bounds[k][0] + sel)
        for t in times:
            members.append(oracle.frame_at(float(t)))
    return EmpiricalDistribution(members, np.full(len(members), 1.0))


def direct_block_distribution(ifs: IFS, word, T: float, dt: float,
                              member_cap: int = 200, lattice: AtomLattice = None
                              ) -> EmpiricalDistribution:
    """Direct scenery time average over [0, T], thinned to member_cap."""
    symbols = as_symbol_array(word)
    count = min(member_cap, max(2, int(T / dt)))
    times = (np.arange(count) + 0.5) / count * T
    oracle = FrameOracle(ifs, symbols, lattice=lattice)
    members = oracle.frames(times)
    return EmpiricalDistribution(members, np.full(len(members), 1.0))


# ---------------------------------------------------------------------------
# convergence diagnostics
# ---------------------------------------------------------------------------

def convergence_report(ifs: IFS, points: int, t_list: Sequence[float], seed: int,
                       dt: Optional[float] = None, member_cap: int = 120,
                       pair_cap: int = 10, cert: Optional[B0Certificate] = None,
                       zc: Optional[ZetaCoefficients] = None,
                       flow: Optional[WeightFlow] = None,
                       qn_visits: int = 0) -> List[dict]:
    """Pairwise and self distances of empirical tangent distributions.

    For sampled trajectories x_j ~ mu: the pairwise distribution distance
    at each horizon T, and the self-distance between the [0,T] and [0,2T]
    averages.  Uniform scaling predicts both to shrink as T grows.  With a
    certificate (and qn_visits > 0), block-assembly-vs-direct rows are
    appended for a few points.
    """
    from itertools import combinations, islice

    t_list = sorted(t_list)
    if dt is None:
        dt = math.log(1.0 / ifs.rho_max) / 8.0
    horizons = t_list + [2 * t for t in t_list if 2 * t not in t_list]
    length = required_word_length(ifs, max(horizons)) + 8
    lattice = AtomLattice(ifs, default_lattice_depth(ifs, max_residual(ifs)))
    words = [ifs.sample_word(length, seed + 1013 * j) for j in range(points)]

    # one monotone frame pass per word covers every horizon
    time_sets = {}
    for T in horizons:
        times = np.arange(dt / 2, T, dt)
        if len(times) > member_cap:
            times = (np.arange(member_cap) + 0.5) / member_cap * T
        time_sets[T] = times
    all_times = np.unique(np.concatenate(list(time_sets.values())))

    distributions: Dict[Tuple[int, float], EmpiricalDistribution] = {}
    for j, word in enumerate(words):
        oracle = FrameOracle(ifs, word, lattice=lattice)
        frame_of = dict(zip(all_times, oracle.frames(all_times)))
        for T in horizons:
            frames = [frame_of[t] for t in time_sets[T]]
            distributions[(j, T)] = EmpiricalDistribution(
                frames, np.full(len(frames), 1.0))

    rows = []
    for a, b in islice(combinations(range(points), 2), pair_cap):
        for T in t_list:
            d = distribution_distance(distributions[(a, T)],
                                      distributions[(b, T)],
                                      member_cap=member_cap)
            rows.append({"kind": "pairwise", "a": a, "b": b, "T": T,
                         "distance": d, "depth": lattice.depth})
    for j in range(points):
        for T in t_list:
            d = distribution_distance(distributions[(j, T)],
                                      distributions[(j, 2 * T)],
                                      member_cap=member_cap)
            rows.append({"kind": "self", "a": j, "b": j, "T": T, "distance": d,
                         "depth": lattice.depth})

    if cert is not None and zc is not None and flow is not None and qn_visits > 0:
        window_p = float(np.prod([ifs.float_probs[s - 1]
                                  for s in cert.window_word]))
        length_q = int((qn_visits + 4) / window_p * 1.6) + 400
        for j in range(min(points, 3)):
            word = ifs.sample_word(length_q, seed + 5051 * j)
            record = return_times(ifs, word, cert)
            n = min(qn_visits, record.visits - 1)
            qn = assemble_qn(ifs, word, record, cert, zc, flow, n=n, dt=dt,
                             member_cap=member_cap, lattice=lattice)
            direct = direct_block_distribution(
                ifs, word, T=float(record.r_n[n]), dt=dt,
                member_cap=member_cap, lattice=lattice)
            rows.append({"kind": "qn_vs_direct", "a": j, "b": j,
                         "T": float(record.r_n[n]),
                         "distance": distribution_distance(qn, direct,
                                                           member_cap=member_cap),
                         "depth": lattice.depth})
    return rows
