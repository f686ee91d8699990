"""Spatial primitives: PPP sampling, distance-based association, disk overlaps.

Points live in a disk window centered at the origin.  The typical (probe) UE
sits at the origin and is always the *last* point of the UE set produced by
``sample_ues``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointSet", "ClusterMap",
    "sample_ppp", "sample_ues", "build_association",
    "lens_area", "lens_area_linearized", "s_area", "s_area_coefficients",
    "dump_realization_csv",
]


@dataclass(frozen=True)
class PointSet:
    """A finite planar point pattern inside a disk window."""

    points: np.ndarray          # (n, 2) Cartesian coordinates, meters
    window_radius: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            pts = pts.reshape(0, 2)
        if pts.shape[1] != 2:
            raise ValueError("points must be (n, 2)")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def radii(self) -> np.ndarray:
        """Distances of all points from the origin."""
        return np.hypot(self.points[:, 0], self.points[:, 1])


@dataclass
class ClusterMap:
    """Distance-threshold association between RRHs and UEs.

    ``pair_rrh``/``pair_ue``/``pair_dist`` enumerate every associated
    (RRH, UE) pair; ``c_u`` and ``b_i`` are the per-node index views
    (serving set of each UE, served set of each RRH), built lazily.
    """

    pair_rrh: np.ndarray         # (n_pairs,) RRH indices
    pair_ue: np.ndarray          # (n_pairs,) UE indices
    pair_dist: np.ndarray        # (n_pairs,) distances r_iu
    n_rrh: int
    n_ue: int
    _c_u: list = field(repr=False, default=None)
    _b_i: list = field(repr=False, default=None)

    def _build_adjacency(self):
        c_u = [[] for _ in range(self.n_ue)]
        b_i = [[] for _ in range(self.n_rrh)]
        for i, u in zip(self.pair_rrh, self.pair_ue):
            c_u[u].append(i)
            b_i[i].append(u)
        self._c_u = [np.asarray(v, dtype=np.intp) for v in c_u]
        self._b_i = [np.asarray(v, dtype=np.intp) for v in b_i]

    @property
    def c_u(self):
        if self._c_u is None:
            self._build_adjacency()
        return self._c_u

    @property
    def b_i(self):
        if self._b_i is None:
            self._build_adjacency()
        return self._b_i

    def cluster_size(self, u: int) -> int:
        return len(self.c_u[u])


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _uniform_disk(n, radius, rng):
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def sample_ppp(intensity, window_radius, seed) -> PointSet:
    """Homogeneous PPP on a disk: Poisson count, i.i.d. uniform positions."""
    if intensity < 0 or window_radius <= 0:
        raise ValueError("need intensity >= 0 and window_radius > 0")
    rng = _rng(seed)
    n = rng.poisson(intensity * math.pi * window_radius ** 2)
    return PointSet(_uniform_disk(n, window_radius, rng), window_radius)


def sample_ues(intensity, window_radius, rrhs: PointSet, r0, seed) -> PointSet:
    """UE process: PPP on the window minus the RRH exclusion disks.

    Candidate points within ``r0`` of any RRH are rejected (thinning).  The
    typical UE at the origin is appended last; callers must supply an RRH set
    with no point within ``r0`` of the origin so the probe UE is admissible.
    """
    rng = _rng(seed)
    raw = sample_ppp(intensity, window_radius, rng)
    pts = raw.points
    if len(rrhs) and len(raw):
        d2 = cross_sq_distances(pts, rrhs.points)
        keep = d2.min(axis=1) >= r0 * r0
        pts = pts[keep]
    pts = np.vstack([pts, [[0.0, 0.0]]])
    return PointSet(pts, window_radius)


def cross_sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared distances, (len(a), len(b)), via one GEMM."""
    d2 = -2.0 * (a @ b.T)
    d2 += np.sum(a * a, axis=1)[:, None]
    d2 += np.sum(b * b, axis=1)[None, :]
    return d2


def cross_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances, (len(a), len(b))."""
    return np.sqrt(np.maximum(cross_sq_distances(a, b), 0.0))


def build_association(rrhs: PointSet, ues: PointSet, r1, sq_dists=None) -> ClusterMap:
    """Associate every UE with all RRHs within distance ``r1`` (inclusive).

    Overlaps are allowed: one RRH may serve many UEs.  ``sq_dists`` may supply
    a precomputed (n_rrh, n_ue) squared-distance matrix.
    """
    if len(rrhs) == 0 or len(ues) == 0:
        return ClusterMap(np.empty(0, np.intp), np.empty(0, np.intp),
                          np.empty(0), len(rrhs), len(ues))
    d2 = cross_sq_distances(rrhs.points, ues.points) if sq_dists is None \
        else sq_dists
    ii, uu = np.nonzero(d2 <= r1 * r1)
    return ClusterMap(ii.astype(np.intp), uu.astype(np.intp),
                      np.sqrt(np.maximum(d2[ii, uu], 0.0)),
                      len(rrhs), len(ues))


# --------------------------------------------------------------------------
# Disk-intersection areas
# --------------------------------------------------------------------------

def lens_area(d, radius):
    """Intersection area of two disks of equal radius with centers ``d`` apart.

    Zero for d >= 2*radius; pi*radius^2 for coincident centers.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("center distance must be nonnegative")
    if radius <= 0:
        raise ValueError("radius must be positive")
    x = np.clip(d / (2.0 * radius), 0.0, 1.0)
    area = 2.0 * radius ** 2 * np.arccos(x) - (d / 2.0) * np.sqrt(
        np.maximum(4.0 * radius ** 2 - d * d, 0.0))
    area = np.where(d >= 2.0 * radius, 0.0, np.maximum(area, 0.0))
    return float(area) if area.ndim == 0 else area


def lens_area_linearized(r, r1):
    """First-order (around r = 0) stand-in for ``lens_area(r, r1)``, clamped at 0."""
    r = np.asarray(r, dtype=float)
    area = math.pi * r1 ** 2 * (1.0 - 2.0 * r / (math.pi * r1))
    area = np.maximum(area, 0.0)
    return float(area) if np.ndim(area) == 0 else area


def s_area_coefficients():
    """(a, b) of the linear overlap model S(r) = r1^2 * (a + b*r/r1).

    Anchored on the exact lens area at the two effective center distances
    r1/2 (for r = 0) and sqrt(5)*r1/2 (for r = r1) implied by placing the
    served interfering UE at the average offset r1/2, perpendicular to the
    RRH direction.
    """
    a = lens_area(0.5, 1.0)
    b = lens_area(math.sqrt(5.0) / 2.0, 1.0) - a
    return a, b


def s_area(r, r1):
    """Effective serving-disk overlap for an interfered UE, clamped to [0, pi*r1^2]."""
    a, b = s_area_coefficients()
    r = np.asarray(r, dtype=float)
    area = r1 * r1 * (a + b * r / r1)
    area = np.clip(area, 0.0, math.pi * r1 * r1)
    return float(area) if area.ndim == 0 else area


# --------------------------------------------------------------------------
# Debug output
# --------------------------------------------------------------------------

def dump_realization_csv(path, rrhs: PointSet, ues: PointSet, cmap: ClusterMap):
    """Write one topology (points + association edges) for visual inspection."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["record", "a", "b", "c"])
        for x, y in rrhs.points:
            w.writerow(["rrh", f"{x:.6f}", f"{y:.6f}", ""])
        for x, y in ues.points:
            w.writerow(["ue", f"{x:.6f}", f"{y:.6f}", ""])
        for i, u, d in zip(cmap.pair_rrh, cmap.pair_ue, cmap.pair_dist):
            w.writerow(["edge", int(i), int(u), f"{d:.6f}"])
