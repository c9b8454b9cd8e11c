"""End-to-end verification suite over the three bundled example systems.

Each check pairs a pipeline result with an independent oracle: automaton
closure against straight same-length enumeration, weight propagation
against direct window sums, the frame reconstruction against the raw
localized expansion of the measure, and the statistical diagnostics
against their stated tolerances.  The functions return structured results
so both the test suite and the command line can run them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dataclass_field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import load_system
from .ifs import IFS, Similarity
from .measure import tv_grid, zoom
from .neighbourhood import (
    B0Certificate,
    NeighbourhoodSystem,
    WeightFlow,
    ZetaCoefficients,
    compute_weights_q,
    compute_zeta_coefficients,
    construct_b0,
    explore_automaton,
    map_key,
    maximal_system,
    neighbourhood_system,
    verify_certificate,
    verify_lemma_maximal,
)
from .scenery import (
    AtomLattice,
    FrameOracle,
    LocalExpansion,
    assemble_qn,
    birkhoff_average,
    branch_copies_initial,
    convergence_report,
    default_lattice_depth,
    direct_block_distribution,
    distribution_distance,
    max_residual,
    return_times,
)
from .measure import weighted_frame_measure
from .normality import hypothesis_check, weyl_sums

SYSTEM_NAMES = ("strong-separation", "dyadic", "golden")


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    value: str
    threshold: str
    runtime: float
    details: dict = dataclass_field(default_factory=dict)

    def row(self) -> dict:
        return {
            "criterion": self.criterion,
            "name": self.name,
            "status": "PASS" if self.passed else "FAIL",
            "value": self.value,
            "threshold": self.threshold,
        }

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.criterion:2d} {self.name}: "
                f"{self.value} (threshold {self.threshold}, {self.runtime:.1f}s)")


@dataclass
class VerifyParams:
    seed: int = 2024
    brute_force_depth: Dict[str, int] = dataclass_field(
        default_factory=lambda: {"dyadic": 8, "golden": 10})
    maximality_trials: int = 100
    weights_depth: int = 8
    reconstruction_samples: int = 20
    reconstruction_tol: float = 0.05
    trend_points: int = 30
    qn_visits: int = 30
    qn_tol: float = 0.1
    scaling_points: int = 5
    scaling_pairs: int = 10
    scaling_factor: float = 0.6
    birkhoff_visits: int = 1000
    weyl_horizon: int = 2 ** 12
    weyl_samples: int = 12

    @staticmethod
    def quick() -> "VerifyParams":
        return VerifyParams(
            brute_force_depth={"dyadic": 6, "golden": 7},
            maximality_trials=25,
            weights_depth=6,
            reconstruction_samples=5,
            trend_points=10,
            qn_visits=8,
            scaling_points=3,
            scaling_pairs=3,
            birkhoff_visits=200,
            weyl_horizon=2 ** 10,
            weyl_samples=4,
        )


class SystemContext:
    """Everything the checks need about one bundled system, built lazily."""

    def __init__(self, name: str):
        self.name = name
        self.ifs: IFS = load_system(name)
        self._report = None
        self._a0 = None
        self._n0 = None
        self._cert = None
        self._zc = None
        self._flow = None
        self._lattice = None

    @property
    def report(self):
        if self._report is None:
            self._report = explore_automaton(self.ifs, max_states=10_000,
                                             max_depth=400)
        return self._report

    @property
    def a0(self):
        if self._a0 is None:
            self._a0, self._n0 = maximal_system(self.ifs, self.report)
        return self._a0

    @property
    def n0(self) -> NeighbourhoodSystem:
        _ = self.a0
        return self._n0

    @property
    def cert(self) -> B0Certificate:
        if self._cert is None:
            self._cert = construct_b0(self.ifs, self.a0, self.n0)
        return self._cert

    @property
    def zc(self) -> ZetaCoefficients:
        if self._zc is None:
            self._zc = compute_zeta_coefficients(self.ifs, self.cert, self.n0)
        return self._zc

    @property
    def flow(self) -> WeightFlow:
        if self._flow is None:
            self._flow = WeightFlow(self.ifs, self.report)
        return self._flow

    @property
    def lattice(self) -> AtomLattice:
        if self._lattice is None:
            self._lattice = AtomLattice(self.ifs, default_lattice_depth(
                self.ifs, max_residual(self.ifs)))
        return self._lattice


def build_contexts() -> Dict[str, SystemContext]:
    return {name: SystemContext(name) for name in SYSTEM_NAMES}


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def _level_table(ifs: IFS, k: int):
    """All length-k words with exact maps, float anchors sorted for windowing."""
    from .numfield import QQ

    sims = [Similarity.identity(ifs.field, ifs.dim)]
    probs = [QQ(1)]
    words: List[tuple] = [()]
    for _ in range(k):
        sims = [s.compose(phi) for s in sims for phi in ifs.maps]
        probs = [p * ifs.prob(j) for p in probs for j in range(1, ifs.m + 1)]
        words = [w + (j,) for w in words for j in range(1, ifs.m + 1)]
    anchors = np.array([float(s.translation[0]) for s in sims])
    order = np.argsort(anchors, kind="stable")
    return ([sims[i] for i in order], [probs[i] for i in order],
            [words[i] for i in order], anchors[order])


def brute_force_level(ifs: IFS, k: int):
    """Per length-k word: the exact neighbour map set handled by raw scans.

    Independent of the pruned enumerator: same-length candidates are
    preselected by a generous float window and then decided exactly on the
    full-hull interval.  Only valid for interval attractors.
    """
    if not ifs.full_hull_interval:
        raise ValueError("the raw oracle needs an interval attractor")
    sims, probs, words, anchors = _level_table(ifs, k)
    lo, hi = ifs.hull_lo[0], ifs.hull_hi[0]
    width = float(hi - lo) * ifs.rho_max ** k
    margin = 1e-9
    out = {}
    for idx, (word, phi_a) in enumerate(zip(words, sims)):
        rho = float(phi_a.ratio)
        center = anchors[idx]
        sel_lo = np.searchsorted(anchors, center - rho - width - margin)
        sel_hi = np.searchsorted(anchors, center + rho + margin, side="right")
        ball_lo = phi_a.translation[0] - phi_a.ratio
        ball_hi = phi_a.translation[0] + phi_a.ratio
        inv_a = phi_a.inverse()
        members = {}
        weights = {}
        for j in range(sel_lo, sel_hi):
            phi_b = sims[j]
            k_lo = phi_b.ratio * lo + phi_b.translation[0]
            k_hi = phi_b.ratio * hi + phi_b.translation[0]
            if k_lo.compare(ball_hi) <= 0 and k_hi.compare(ball_lo) >= 0:
                f = inv_a.compose(phi_b)
                key = map_key(f)
                members[key] = f
                weights[key] = weights.get(key, 0) + probs[j]
        out[word] = (members, weights)
    return out


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------

def check_exact_overlap(ctx: Dict[str, SystemContext]) -> CheckResult:
    t0 = time.perf_counter()
    ifs = ctx["golden"].ifs
    equal = ifs.compose_word((1, 2, 2)) == ifs.compose_word((2, 1, 1))
    system = neighbourhood_system(ifs, (1, 2, 2))
    collapsed = sum(1 for f in system if f.is_identity()) == 1
    realizing = [b for b in [(1, 2, 2), (2, 1, 1)]
                 if ifs.relative_map((1, 2, 2), b).is_identity()]
    passed = equal and collapsed and len(realizing) == 2
    return CheckResult(1, "exact overlap collapse", passed,
                       f"maps equal={equal}, one member from {len(realizing)} words",
                       "exact equality", time.perf_counter() - t0)


def check_automaton_closure(ctx: Dict[str, SystemContext],
                            params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    details = {}
    ok = True
    strong = ctx["strong-separation"].report
    ok &= strong.closed and len(strong.states) == 1
    details["strong-separation"] = f"{len(strong.states)} states, closed={strong.closed}"
    for name in ("dyadic", "golden"):
        report = ctx[name].report
        ok &= report.closed and len(report.states) <= 10_000
        brute_max = 0
        for k in range(1, params.brute_force_depth[name] + 1):
            level = brute_force_level(ctx[name].ifs, k)
            brute_max = max(brute_max,
                            max(len(m) for m, _ in level.values()))
        ok &= report.max_cardinality == brute_max
        details[name] = (f"{len(report.states)} states, closed={report.closed}, "
                         f"max={report.max_cardinality}, brute={brute_max}")
    return CheckResult(2, "automaton closure vs raw enumeration", ok,
                       "; ".join(f"{k}: {v}" for k, v in details.items()),
                       "closed, exact match", time.perf_counter() - t0, details)


def check_lemma_maximal(ctx: Dict[str, SystemContext],
                        params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    ok = True
    parts = []
    for name, c in ctx.items():
        result = verify_lemma_maximal(c.ifs, c.a0, c.n0,
                                      trials=params.maximality_trials,
                                      seed=params.seed + 17)
        ok &= result.ok
        parts.append(f"{name}: {result.passed}/{result.trials} "
                     f"({len(result.undecided)} undecided)")
    return CheckResult(3, "recurring maximal system under prefixing", ok,
                       "; ".join(parts),
                       f"{params.maximality_trials}/{params.maximality_trials}, "
                       "0 undecided", time.perf_counter() - t0)


def check_b0_certificates(ctx: Dict[str, SystemContext]) -> CheckResult:
    t0 = time.perf_counter()
    ok = True
    parts = []
    for name, c in ctx.items():
        cert = c.cert
        check = verify_certificate(c.ifs, cert, c.n0)
        zc = c.zc
        positive = all(v > 0 for v in zc.lower_bounds.values())
        ok &= cert.complete and check.ok and positive
        parts.append(f"{name}: b0 len {len(cert.b0)}, |F|={len(cert.F)}, "
                     f"recheck={'ok' if check.ok else check.details}, "
                     f"min C={float(zc.c_min()):.4g}")
    return CheckResult(4, "frame certificate validation", ok, "; ".join(parts),
                       "exact identities, C_h > 0", time.perf_counter() - t0)


def check_weight_dp(ctx: Dict[str, SystemContext], params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    ok = True
    parts = []
    for name in ("dyadic", "golden"):
        ifs = ctx[name].ifs
        mismatches = 0
        count = 0
        for k in range(1, params.weights_depth + 1):
            level = brute_force_level(ifs, k)
            for word, (_members, weights) in level.items():
                ws = compute_weights_q(ifs, word)
                got = dict(zip(ws.base.key(), ws.weights))
                if got != weights:
                    mismatches += 1
                count += 1
        ok &= mismatches == 0
        parts.append(f"{name}: {count} words, {mismatches} mismatches")
    return CheckResult(5, "weight propagation vs direct window sums", ok,
                       "; ".join(parts), "exact rational equality",
                       time.perf_counter() - t0)


def _word_with_visit(ifs: IFS, cert: B0Certificate, seed: int,
                     lookahead: int = 64) -> Tuple[tuple, int]:
    """A sampled word together with its first window visit position."""
    window = np.asarray(cert.window_word, dtype=np.int64)
    p = float(np.prod([ifs.float_probs[s - 1] for s in window]))
    length = max(int(8 / p), 400) + lookahead
    for attempt in range(64):
        word = ifs.sample_word(length, seed + 331 * attempt)
        symbols = np.asarray(word, dtype=np.int64)
        hits = np.ones(len(symbols) - len(window) + 1, dtype=bool)
        for off, s in enumerate(window):
            hits &= symbols[off:len(symbols) - len(window) + 1 + off] == s
        positions = np.nonzero(hits)[0] + len(window)
        positions = positions[positions + lookahead < length]
        if len(positions):
            return word, int(positions[0])
    raise RuntimeError("no window visit found; the sample length heuristic failed")


def check_reconstruction(ctx: Dict[str, SystemContext],
                         params: VerifyParams) -> CheckResult:
    """Magnified measure vs its frame reconstruction at matched depth."""
    t0 = time.perf_counter()
    c = ctx["golden"]
    ifs = c.ifs
    family_keys = [map_key(h) for h in c.cert.F]
    n0_maps = list(c.n0.maps)
    values = []
    for idx in range(params.reconstruction_samples):
        word, k = _word_with_visit(ifs, c.cert, params.seed + 101 * idx)
        prefix = word[:k - len(c.cert.b0)]
        ws = compute_weights_q(ifs, prefix)
        raw = {hk: ws.weight_of(h) for hk, h in zip(family_keys, c.cert.F)}
        total = sum(raw.values())
        lam = np.zeros(len(n0_maps))
        for hk in family_keys:
            q_h = float(raw[hk] / total)
            lam += q_h * np.array([float(v) for v in c.zc.coefficients[hk]])
        rhs = weighted_frame_measure(ifs, n0_maps, lam, c.lattice.depth).normalized()

        expansion = LocalExpansion(ifs, word)
        expansion.advance(k)
        lhs = zoom(expansion.frame_cloud(c.lattice), np.zeros(1), 0.0)
        values.append(tv_grid(lhs, rhs, resolution=32))
    worst = max(values)
    passed = worst <= params.reconstruction_tol
    return CheckResult(
        6, "frame reconstruction of magnifications", passed,
        f"worst tv={worst:.3g} over {len(values)} samples "
        f"(depth {c.lattice.depth}, resolution 32)",
        f"<= {params.reconstruction_tol}", time.perf_counter() - t0,
        {"values": values})


def check_tv_trend(ctx: Dict[str, SystemContext], params: VerifyParams) -> CheckResult:
    """Zoomed densities of the measure vs a fixed reference combination."""
    t0 = time.perf_counter()
    c = ctx["golden"]
    ifs = c.ifs
    log_l = math.log(1.0 / ifs.rho_max)
    t_values = [m * log_l for m in (2, 4, 6, 8, 10, 12)]
    n0_maps = list(c.n0.maps)
    # the fixed reference density: branch weights taken at the maximal word
    ws = compute_weights_q(ifs, c.a0)
    raw = {map_key(h): ws.weight_of(h) for h in c.cert.F}
    total = sum(raw.values())
    lam = np.zeros(len(n0_maps))
    for h in c.cert.F:
        q_h = float(raw[map_key(h)] / total)
        lam += q_h * np.array([float(v) for v in c.zc.coefficients[map_key(h)]])

    length = 200
    tv = np.empty((params.trend_points, len(t_values)))
    for p in range(params.trend_points):
        word = ifs.sample_word(length, params.seed + 7 * p)
        mu_oracle = FrameOracle(ifs, word, lattice=c.lattice)
        ref_oracle = FrameOracle(
            ifs, word, initial=branch_copies_initial(ifs, n0_maps, lam),
            lattice=c.lattice)
        for ti, t in enumerate(t_values):
            tv[p, ti] = tv_grid(mu_oracle.frame_at(t), ref_oracle.frame_at(t),
                                resolution=16)
    medians = np.median(tv, axis=0)
    passed = medians[-1] < medians[0]
    return CheckResult(
        7, "zoomed density agreement improves with depth", passed,
        f"medians {np.round(medians, 4).tolist()} over t/log(1/rho) = 2..12",
        "median at t=12L strictly below t=2L", time.perf_counter() - t0,
        {"medians": medians.tolist(), "t_values": t_values})


def check_qn_fidelity(ctx: Dict[str, SystemContext], params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    c = ctx["golden"]
    ifs = c.ifs
    dt = math.log(1.0 / ifs.rho_max) / 8.0
    window_p = 0.5 ** len(c.cert.window_word)
    length = int((params.qn_visits + 6) / window_p * 1.6) + 400
    word = ifs.sample_word(length, params.seed + 5)
    record = return_times(ifs, word, c.cert)
    n = min(params.qn_visits, record.visits - 1)
    qn = assemble_qn(ifs, word, record, c.cert, c.zc, c.flow, n=n, dt=dt,
                     member_cap=200, lattice=c.lattice)
    direct = direct_block_distribution(ifs, word, T=float(record.r_n[n]), dt=dt,
                                       member_cap=200, lattice=c.lattice)
    d = distribution_distance(qn, direct, member_cap=200)
    passed = d <= params.qn_tol and n == params.qn_visits
    return CheckResult(
        8, "block assembly matches the direct flow", passed,
        f"distance={d:.4g} at n={n}, dt={dt:.4g}",
        f"<= {params.qn_tol} at n={params.qn_visits}",
        time.perf_counter() - t0)


def check_uniform_scaling(ctx: Dict[str, SystemContext],
                          params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    ok = True
    parts = []
    details = {}
    for name, c in ctx.items():
        log_l = math.log(1.0 / c.ifs.rho_max)
        t_list = [5 * log_l, 10 * log_l, 20 * log_l]
        rows = convergence_report(c.ifs, points=params.scaling_points,
                                  t_list=t_list, seed=params.seed + 23,
                                  member_cap=160, pair_cap=params.scaling_pairs)
        pair_first = np.median([r["distance"] for r in rows
                                if r["kind"] == "pairwise" and r["T"] == t_list[0]])
        pair_last = np.median([r["distance"] for r in rows
                               if r["kind"] == "pairwise" and r["T"] == t_list[-1]])
        self_first = np.median([r["distance"] for r in rows
                                if r["kind"] == "self" and r["T"] == t_list[0]])
        self_last = np.median([r["distance"] for r in rows
                               if r["kind"] == "self" and r["T"] == t_list[-1]])
        system_ok = (pair_last <= params.scaling_factor * pair_first
                     and self_last < self_first)
        ok &= system_ok
        parts.append(f"{name}: pair {pair_first:.3g}->{pair_last:.3g}, "
                     f"self {self_first:.3g}->{self_last:.3g}")
        details[name] = rows
    return CheckResult(
        9, "tangent statistics tighten with the horizon", ok, "; ".join(parts),
        f"pairwise at 20L <= {params.scaling_factor} x at 5L; self decreases",
        time.perf_counter() - t0, details)


def check_birkhoff(ctx: Dict[str, SystemContext], params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    ok = True
    parts = []
    n = params.birkhoff_visits
    for name, c in ctx.items():
        window_p = float(np.prod([c.ifs.float_probs[s - 1]
                                  for s in c.cert.window_word]))
        length = int(4.5 * n / window_p) + 1000
        word = c.ifs.sample_array(length, params.seed + 77) + 1
        record = return_times(c.ifs, word, c.cert)
        misses = []
        for g in ("eta", "cylinder:1", "cylinder:2.1"):
            res = birkhoff_average(c.ifs, word, record, g)
            if len(res.partial) < n:
                ok = False
                misses.append(f"{g}: only {len(res.partial)} visits")
                continue
            gap = abs(res.partial[n - 1] - res.target)
            bound = 3 * res.sd / math.sqrt(n)
            if res.sd == 0:
                good = gap == 0
            else:
                good = gap <= bound
            ok &= good
            misses.append(f"{g}: gap={gap:.3g} bound={bound:.3g}")
        parts.append(f"{name}: " + ", ".join(misses))
    return CheckResult(
        10, "return-time averages match conditional targets", ok,
        "; ".join(parts), f"within 3 sd/sqrt(n) at n={n}",
        time.perf_counter() - t0)


def check_normality(ctx: Dict[str, SystemContext], params: VerifyParams) -> CheckResult:
    t0 = time.perf_counter()
    c = ctx["golden"]
    horizons = sorted({params.weyl_horizon // 16, params.weyl_horizon // 4,
                       params.weyl_horizon})
    rep = weyl_sums(c.ifs, 2, samples=params.weyl_samples,
                    horizon=params.weyl_horizon, freqs=4,
                    seed=params.seed + 13, horizons=horizons)
    means = {}
    for row in rep.weyl:
        means.setdefault(row["K"], []).append(row["mean_abs_weyl"])
    means = {k: float(np.mean(v)) for k, v in means.items()}
    ks = sorted(means)
    decreasing = all(means[a] > means[b] for a, b in zip(ks, ks[1:]))
    bound = 5 / math.sqrt(ks[-1])
    final_ok = means[ks[-1]] <= bound

    dyadic_flagged = not hypothesis_check(ctx["dyadic"].ifs, 4).irrationality_holds_somewhere
    golden_ok = hypothesis_check(c.ifs, 2).irrationality_holds_somewhere
    passed = decreasing and final_ok and dyadic_flagged and golden_ok
    return CheckResult(
        11, "exponential-sum decay and base hypotheses", passed,
        f"means {({k: round(v, 4) for k, v in means.items()})}, "
        f"flagged(ratio 1/2, base 4)={dyadic_flagged}",
        f"decreasing, final <= {bound:.3g}, power relation flagged",
        time.perf_counter() - t0)


CHECKS = [
    check_exact_overlap,
    check_automaton_closure,
    check_lemma_maximal,
    check_b0_certificates,
    check_weight_dp,
    check_reconstruction,
    check_tv_trend,
    check_qn_fidelity,
    check_uniform_scaling,
    check_birkhoff,
    check_normality,
]


def run_all(params: Optional[VerifyParams] = None, echo=None) -> List[CheckResult]:
    """Run every check; returns results ordered by criterion."""
    params = params or VerifyParams()
    ctx = build_contexts()
    results = []
    for check in CHECKS:
        if check in (check_automaton_closure, check_lemma_maximal,
                     check_weight_dp, check_reconstruction, check_tv_trend,
                     check_qn_fidelity, check_uniform_scaling, check_birkhoff,
                     check_normality):
            result = check(ctx, params)
        else:
            result = check(ctx)
        results.append(result)
        if echo:
            echo(result.line())
    return results
