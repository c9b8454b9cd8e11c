"""Numerical measure engine: atom clouds, zooms, distances, grid densities.

Measures are finite weighted atom clouds (numpy arrays).  Atoms sit at
exact cylinder anchors converted to float once at construction; every
measure records the scale its atoms resolve, and zooming below that scale
raises instead of silently returning a coarse answer.

Distances: Wasserstein-1 is exact from sorted cumulative weights in d=1
and an entropic (sinkhorn) estimate in higher dimension; total variation
is estimated on grids, never on raw atom sets.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np

from .ifs import IFS, Similarity


class DepthError(ValueError):
    """The operation needs a deeper atom approximation than provided."""


class ZeroMassError(ValueError):
    """The zoom ball carries no mass at this approximation."""


class AtomicMeasure:
    """Weighted atoms; d=1 clouds are kept sorted by position."""

    __slots__ = ("points", "weights", "meta")

    def __init__(self, points: np.ndarray, weights: np.ndarray, meta: Optional[dict] = None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        weights = np.asarray(weights, dtype=np.float64)
        if points.shape[0] != weights.shape[0]:
            raise ValueError("points and weights must align")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if points.shape[1] == 1:
            order = np.argsort(points[:, 0], kind="stable")
            points = points[order]
            weights = weights[order]
        self.points = points
        self.weights = weights
        self.meta = dict(meta or {})
        self.meta.setdefault("resolution", 0.0)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def resolution(self) -> float:
        return float(self.meta["resolution"])

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def normalized(self) -> "AtomicMeasure":
        mass = self.total_mass
        if mass <= 0:
            raise ZeroMassError("cannot normalize a zero measure")
        return AtomicMeasure(self.points, self.weights / mass, self.meta)

    def scaled(self, factor: float) -> "AtomicMeasure":
        return AtomicMeasure(self.points, self.weights * factor, self.meta)

    def restrict_ball(self, center, radius: float) -> "AtomicMeasure":
        center = np.asarray(center, dtype=np.float64).reshape(1, -1)
        if self.dim == 1:
            lo = np.searchsorted(self.points[:, 0], center[0, 0] - radius, side="left")
            hi = np.searchsorted(self.points[:, 0], center[0, 0] + radius, side="right")
            sel = slice(lo, hi)
        else:
            dist = np.linalg.norm(self.points - center, axis=1)
            sel = dist <= radius
        return AtomicMeasure(self.points[sel], self.weights[sel], self.meta)

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        meta = dict(self.meta)
        meta["resolution"] = max(self.resolution, other.resolution)
        return AtomicMeasure(np.vstack([self.points, other.points]),
                             np.concatenate([self.weights, other.weights]), meta)

    def __repr__(self):
        return (f"AtomicMeasure(n={self.size}, d={self.dim}, mass={self.total_mass:.6g}, "
                f"res={self.resolution:.3g})")


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------

ATOM_CAP = 1 << 23


def approx_measure(ifs: IFS, depth: int, cap: int = ATOM_CAP) -> AtomicMeasure:
    """Atoms (phi_a(0), p_a) over all words of the given length.

    Deterministic; beyond the atom cap use sample_measure (Monte Carlo
    atoms of equal weight) instead.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if ifs.m ** depth > cap:
        raise DepthError(
            f"{ifs.m}^{depth} atoms exceed the cap {cap}; "
            "use sample_measure for a sparsified approximation")
    ratios = ifs.float_ratios
    trans = ifs.float_translations
    probs = ifs.float_probs
    points = np.zeros((1, ifs.dim))
    weights = np.ones(1)
    for _ in range(depth):
        points = np.concatenate([ratios[i] * points + trans[i] for i in range(ifs.m)])
        weights = np.concatenate([probs[i] * weights for i in range(ifs.m)])
    diam = 2.0 * float(ifs.cover_root.radius)
    return AtomicMeasure(points, weights, {
        "resolution": ifs.rho_max ** depth * diam,
        "depth": depth,
        "provenance": "approx_measure",
    })


def sample_measure(ifs: IFS, count: int, depth: int, seed: int) -> AtomicMeasure:
    """Monte Carlo atoms: count equal-weight points phi_{a}(0), a ~ p^depth."""
    rng = np.random.Generator(np.random.PCG64(seed))
    symbols = rng.choice(ifs.m, size=(count, depth), p=ifs.float_probs)
    points = np.zeros((count, ifs.dim))
    ratios = ifs.float_ratios
    trans = ifs.float_translations
    for level in range(depth - 1, -1, -1):
        r = ratios[symbols[:, level]][:, None]
        t = trans[symbols[:, level]]
        points = r * points + t
    diam = 2.0 * float(ifs.cover_root.radius)
    return AtomicMeasure(points, np.full(count, 1.0 / count), {
        "resolution": ifs.rho_max ** depth * diam,
        "depth": depth,
        "provenance": f"sample_measure(seed={seed})",
    })


def push_forward(f: Union[Similarity, tuple], m: AtomicMeasure) -> AtomicMeasure:
    """Image measure under a similarity (exact map, float image)."""
    if isinstance(f, Similarity):
        ratio = float(f.ratio)
        translation = np.array([float(t) for t in f.translation])
    else:
        ratio, translation = f
        translation = np.asarray(translation, dtype=np.float64)
    meta = dict(m.meta)
    meta["resolution"] = m.resolution * abs(ratio)
    return AtomicMeasure(m.points * ratio + translation, m.weights, meta)


def build_reference_nu(ifs: IFS, n0_maps: Sequence[Similarity], depth: int,
                       cap: int = ATOM_CAP) -> AtomicMeasure:
    """The recurring frame: unnormalized sum of the branch copies f(mu).

    Total mass equals the number of branches; provenance records them.
    """
    mu = approx_measure(ifs, depth, cap)
    parts = [push_forward(f, mu) for f in n0_maps]
    out = parts[0]
    for part in parts[1:]:
        out = out + part
    out.meta["provenance"] = f"nu({len(n0_maps)} branches)"
    out.meta["depth"] = depth
    return out


def weighted_frame_measure(ifs: IFS, n0_maps: Sequence[Similarity],
                           branch_weights: Sequence[float], depth: int,
                           cap: int = ATOM_CAP) -> AtomicMeasure:
    """sum_f lambda_f (f mu)|_{B(0,1)}: the density-weighted reference measure.

    The density against nu is piecewise constant across branch copies, so
    the weighted measure is again an atom cloud; restriction to the unit
    ball happens atom-wise.
    """
    mu = approx_measure(ifs, depth, cap)
    pieces = []
    for f, lam in zip(n0_maps, branch_weights):
        if lam == 0:
            continue
        piece = push_forward(f, mu).scaled(lam).restrict_ball(
            np.zeros(ifs.dim), 1.0)
        pieces.append(piece)
    if not pieces:
        raise ZeroMassError("all branch weights vanish")
    out = pieces[0]
    for piece in pieces[1:]:
        out = out + piece
    out.meta["provenance"] = "weighted_frame"
    out.meta["depth"] = depth
    return out


# ---------------------------------------------------------------------------
# the zoom-in operation
# ---------------------------------------------------------------------------

def zoom(m: AtomicMeasure, x, t: float, resolution_factor: float = 8.0) -> AtomicMeasure:
    """Translate x to 0, rescale by e^t, restrict to B(0,1), renormalize.

    Requires the measure to resolve the window: atom resolution must be at
    most e^{-t}/resolution_factor.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    radius = math.exp(-t)
    if m.resolution > radius / resolution_factor:
        raise DepthError(
            f"atom resolution {m.resolution:.3g} too coarse for scale e^-{t:.3g}"
            f"={radius:.3g} (need <= {radius / resolution_factor:.3g}); "
            "rebuild the approximation deeper")
    window = m.restrict_ball(x, radius)
    mass = window.total_mass
    if mass <= 0:
        raise ZeroMassError(f"no mass in B({x}, e^-{t:.3g})")
    scale = 1.0 / radius
    meta = dict(m.meta)
    meta["resolution"] = m.resolution * scale
    meta["zoom_t"] = t
    return AtomicMeasure((window.points - x) * scale, window.weights / mass, meta)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def _w1_exact_1d(m1: AtomicMeasure, m2: AtomicMeasure) -> float:
    xs = np.concatenate([m1.points[:, 0], m2.points[:, 0]])
    deltas = np.concatenate([m1.weights, -m2.weights])
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    cum = np.cumsum(deltas[order])
    if len(xs) < 2:
        return 0.0
    return float(np.abs(cum[:-1]) @ np.diff(xs))


def _thin(m: AtomicMeasure, cap: int) -> AtomicMeasure:
    if m.size <= cap:
        return m
    stride = m.size / cap
    idx = np.minimum((np.arange(cap) * stride).astype(int), m.size - 1)
    w = np.zeros(cap)
    # assign every atom to its nearest kept representative to conserve mass
    owners = np.minimum((np.arange(m.size) / stride).astype(int), cap - 1)
    np.add.at(w, owners, m.weights)
    return AtomicMeasure(m.points[idx], w, m.meta)


def _sinkhorn_w1(m1: AtomicMeasure, m2: AtomicMeasure, epsilon: float = 1e-2,
                 iterations: int = 200, cap: int = 2000) -> float:
    """Entropic W1 estimate for d >= 2 (documented approximation)."""
    a_m = _thin(m1, cap)
    b_m = _thin(m2, cap)
    cost = np.linalg.norm(a_m.points[:, None, :] - b_m.points[None, :, :], axis=2)
    a = a_m.weights / a_m.weights.sum()
    b = b_m.weights / b_m.weights.sum()
    kernel = np.exp(-cost / epsilon)
    u = np.ones_like(a)
    v = np.ones_like(b)
    for _ in range(iterations):
        u = a / np.maximum(kernel @ v, 1e-300)
        v = b / np.maximum(kernel.T @ u, 1e-300)
    plan = u[:, None] * kernel * v[None, :]
    return float((plan * cost).sum())


def measure_distance(kind: str, m1: AtomicMeasure, m2: AtomicMeasure,
                     resolution: int = 64) -> float:
    """w1 (exact in d=1, entropic in d>=2) or tv_grid at a stated resolution."""
    if kind == "w1":
        for m in (m1, m2):
            if not m.is_normalized(1e-6):
                raise ValueError("w1 expects normalized measures")
        if m1.dim == 1:
            return _w1_exact_1d(m1, m2)
        return _sinkhorn_w1(m1, m2)
    if kind == "tv_grid":
        return tv_grid(m1, m2, resolution)
    raise ValueError(f"unknown distance kind {kind!r}")


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

class GridDensity:
    """Dense per-cell masses (or ratios) over [-1,1]^d at `resolution` cells/unit."""

    __slots__ = ("resolution", "values", "kind")

    def __init__(self, resolution: int, values: np.ndarray, kind: str = "mass"):
        self.resolution = int(resolution)
        self.values = np.asarray(values, dtype=np.float64)
        self.kind = kind

    @property
    def total(self) -> float:
        return float(np.nansum(self.values))

    def __repr__(self):
        return f"GridDensity(res={self.resolution}, cells={self.values.shape}, kind={self.kind})"


def render_grid(m: AtomicMeasure, resolution: int) -> GridDensity:
    """Histogram the atom cloud over [-1,1]^d; atoms outside are dropped."""
    cells = 2 * resolution
    edges = [np.linspace(-1.0, 1.0, cells + 1)] * m.dim
    hist, _ = np.histogramdd(m.points, bins=edges, weights=m.weights)
    return GridDensity(resolution, hist)


def tv_grid(m1: AtomicMeasure, m2: AtomicMeasure, resolution: int = 64) -> float:
    """Grid estimate of the total-variation norm ||m1 - m2|| (range [0, 2])."""
    g1 = render_grid(m1, resolution)
    g2 = render_grid(m2, resolution)
    return float(np.abs(g1.values - g2.values).sum())


def zeta_density(ifs: IFS, n0_maps: Sequence[Similarity],
                 branch_coefficients: Sequence[float], depth: int,
                 resolution: int) -> GridDensity:
    """Per-cell ratio of the weighted branch sum to the reference frame.

    Cells carrying no reference mass are NaN ("empty").  The coefficient
    vector is indexed like n0_maps.
    """
    num = weighted_frame_measure(ifs, n0_maps, branch_coefficients, depth)
    den = build_reference_nu(ifs, n0_maps, depth).restrict_ball(np.zeros(ifs.dim), 1.0)
    g_num = render_grid(num, resolution)
    g_den = render_grid(den, resolution)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(g_den.values > 0, g_num.values / g_den.values, np.nan)
    return GridDensity(resolution, ratio, kind="ratio")


# ---------------------------------------------------------------------------
# columnar text export
# ---------------------------------------------------------------------------

def save_measure(m: AtomicMeasure, path) -> None:
    header = (f"sceneryflow measure: n={m.size} d={m.dim} "
              f"resolution={m.resolution!r} provenance={m.meta.get('provenance', '?')}")
    np.savetxt(path, np.column_stack([m.points, m.weights]), header=header)


def save_grid(g: GridDensity, path) -> None:
    np.savez(path, values=g.values, resolution=g.resolution, kind=g.kind)


def load_grid(path) -> GridDensity:
    data = np.load(path, allow_pickle=False)
    return GridDensity(int(data["resolution"]), data["values"], str(data["kind"]))


def load_measure(path) -> AtomicMeasure:
    data = np.atleast_2d(np.loadtxt(path))
    resolution = 0.0
    with open(path) as fh:
        first = fh.readline()
        if "resolution=" in first:
            resolution = float(first.split("resolution=")[1].split()[0])
    return AtomicMeasure(data[:, :-1], data[:, -1],
                         {"resolution": resolution, "provenance": f"loaded:{path}"})
