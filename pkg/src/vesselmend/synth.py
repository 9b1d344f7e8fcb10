"""Synthetic bifurcating vessel trees with known ground truth, plus fracturing.

Trees are grown recursively as smooth centerline polylines (quadratic
blends with mild random bending), rasterized as unions of tubes with
tapered radii.  Fractures delete centerline-centered balls and verify
that each cut actually splits off a new 26-connected component, so the
component count after fracturing is exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .volume import Volume3D, MASK_U8
from .geodesic import GeodesicPath, fill_tube

_STRUCT26 = np.ones((3, 3, 3), dtype=int)


@dataclass
class SynthParams:
    seed: int = 0
    dims: tuple[int, int, int] = (128, 128, 128)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    depth: int = 2
    radius_root: float = 4.0
    taper: float = 0.75
    branch_angle_deg: tuple[float, float] = (25.0, 40.0)
    length_range: tuple[float, float] = (28.0, 40.0)

    def __post_init__(self):
        if not (0.0 < self.taper < 1.0):
            raise ValueError("taper must be in (0, 1)")
        if self.radius_root < min(self.spacing):
            raise ValueError("radius_root must be at least one voxel")


@dataclass
class GroundTruth:
    branches: list[np.ndarray]        # centerline polylines, mm
    branch_lengths_mm: list[float]
    branch_radii_mm: list[float]
    branch_parent_radii_mm: list[float]
    branch_count: int
    total_length_mm: float
    betti: tuple[int, int, int] = (1, 0, 0)
    clipped: bool = False

    def to_dict(self) -> dict:
        return {
            "branch_count": self.branch_count,
            "total_length_mm": self.total_length_mm,
            "branch_lengths_mm": list(self.branch_lengths_mm),
            "branch_radii_mm": list(self.branch_radii_mm),
            "branch_parent_radii_mm": list(self.branch_parent_radii_mm),
            "betti": list(self.betti),
            "clipped": self.clipped,
            "branches": [b.tolist() for b in self.branches],
        }


def _unit(v):
    return v / np.linalg.norm(v)


def _perp(v, rng):
    """Random unit vector perpendicular to v."""
    while True:
        r = rng.normal(size=3)
        p = r - np.dot(r, v) * v
        n = np.linalg.norm(p)
        if n > 1e-6:
            return p / n


def _bent_segment(start, direction, length, rng, n_pts=24, bend=0.12):
    """Quadratic blend from start along direction with a mild sideways bow."""
    end = start + length * direction
    mid = start + 0.5 * length * direction + bend * length * _perp(direction, rng)
    t = np.linspace(0.0, 1.0, n_pts)[:, None]
    return (1 - t) ** 2 * start + 2 * t * (1 - t) * mid + t ** 2 * end


def _polyline_length(pts):
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def generate_tree(params: SynthParams) -> tuple[Volume3D, GroundTruth]:
    """Rasterize a random bifurcating tree; deterministic per seed.

    Branches escaping the volume are clipped (with the ground truth
    shortened to match) and their children dropped.
    """
    rng = np.random.default_rng(params.seed)
    dims = np.asarray(params.dims)
    spacing = np.asarray(params.spacing)
    extent = dims * spacing
    margin = params.radius_root + 2.0 * min(spacing)

    min_radius = 1.5 * min(spacing)  # thinner tubes skeletonize unreliably
    start = np.array([0.5 * extent[0], 0.5 * extent[1], margin])
    direction = _unit(np.array([0.0, 0.0, 1.0]) + 0.1 * rng.normal(size=3))

    branches: list[np.ndarray] = []
    radii: list[float] = []
    parent_radii: list[float] = []
    clipped = False

    def grow(p0, d0, radius, depth_left, parent_radius=0.0):
        nonlocal clipped
        length = float(rng.uniform(*params.length_range)) * (0.85 ** (params.depth - depth_left))
        pts = _bent_segment(p0, d0, length, rng)
        inside = np.all((pts >= margin * 0.5) & (pts <= extent - margin * 0.5), axis=1)
        if not inside.all():
            cut = int(np.argmin(inside))
            if cut < 4:
                clipped = True
                return
            pts = pts[:cut]
            clipped = True
            branches.append(pts)
            radii.append(radius)
            parent_radii.append(parent_radius)
            return  # children dropped with the clipped tip
        branches.append(pts)
        radii.append(radius)
        parent_radii.append(parent_radius)
        if depth_left == 0:
            return
        tip_dir = _unit(pts[-1] - pts[-2])
        axis = _perp(tip_dir, rng)
        for sign in (1.0, -1.0):
            ang = np.deg2rad(rng.uniform(*params.branch_angle_deg))
            child_dir = _unit(np.cos(ang) * tip_dir + np.sin(ang) * sign * axis)
            grow(pts[-1], child_dir, max(radius * params.taper, min_radius),
                 depth_left - 1, parent_radius=radius)

    grow(start, direction, params.radius_root, params.depth)

    vol = Volume3D(params.dims, params.spacing, MASK_U8, np.zeros(params.dims, dtype=np.uint8))
    for pts, r in zip(branches, radii):
        vol = fill_tube(vol, GeodesicPath(points_mm=pts), r)

    lengths = [_polyline_length(b) for b in branches]
    gt = GroundTruth(
        branches=branches, branch_lengths_mm=lengths, branch_radii_mm=list(radii),
        branch_parent_radii_mm=list(parent_radii),
        branch_count=len(branches), total_length_mm=float(sum(lengths)),
        betti=(1, 0, 0), clipped=clipped)
    return vol, gt


def _component_count(mask: np.ndarray) -> int:
    return ndimage.label(mask, structure=_STRUCT26)[1]


def fracture(vol: Volume3D, gt: GroundTruth, n: int, seed: int = 0,
             radius_range_vox: tuple[float, float] = (2.0, 5.0),
             max_retries: int = 200) -> tuple[Volume3D, list[dict]]:
    """Delete ``n`` centerline-centered balls, each verified to split off a
    new component.

    Cut centers stay away from branch terminals (and hence bifurcations)
    so each cut severs exactly one branch, keep clearance from every
    other branch tube (a cut hugging the parent tube near a bifurcation
    would leave no stub on the main side), and stay apart from earlier
    cuts (adjacent cuts would leave a sliver fragment too short to carry
    an endpoint).  Cuts that fail to separate after ``max_retries``
    draws are skipped and logged.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    spacing = np.asarray(vol.spacing)
    h = float(min(spacing))
    mask = vol.mask().copy()
    cut_log: list[dict] = []
    placed_cuts: list[tuple[np.ndarray, float]] = []

    for cut_idx in range(n):
        before = _component_count(mask)
        placed = False
        for _ in range(max_retries):
            bi = int(rng.integers(len(gt.branches)))
            pts = gt.branches[bi]
            # the ball must clear the full tube cross-section; a bite that
            # barely severs leaves paper-thin crescents at the faces
            radius = max(float(rng.uniform(*radius_range_vox)) * h,
                         gt.branch_radii_mm[bi] + 1.5 * h)
            # keep the ball clear of both branch ends so the stubs on each
            # side stay long enough to thin into endpoint branches after
            # skeleton retraction (about one tube radius from the face);
            # the proximal stub additionally has to clear the parent tube
            br = gt.branch_radii_mm[bi]
            margin_lo = radius + gt.branch_parent_radii_mm[bi] + br + 4.0 * h
            margin_hi = radius + br + 4.0 * h
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            s = np.concatenate([[0.0], np.cumsum(seg)])
            if s[-1] <= margin_lo + margin_hi:
                continue
            s_cut = float(rng.uniform(margin_lo, s[-1] - margin_hi))
            center = np.array([np.interp(s_cut, s, pts[:, k]) for k in range(3)])
            if any(np.linalg.norm(center - c0) < radius + r0 + 2.0 * br + 4.0 * h
                   for c0, r0 in placed_cuts):
                continue
            clear = True
            for bj, other in enumerate(gt.branches):
                if bj == bi:
                    continue
                d_other = float(np.linalg.norm(other - center, axis=1).min())
                if d_other < radius + gt.branch_radii_mm[bj] + 2.0 * h:
                    clear = False
                    break
            if not clear:
                continue

            lo = np.maximum(np.floor((center - radius) / spacing - 1).astype(int), 0)
            hi = np.minimum(np.ceil((center + radius) / spacing + 2).astype(int), vol.dims)
            xs = np.arange(lo[0], hi[0]) * spacing[0]
            ys = np.arange(lo[1], hi[1]) * spacing[1]
            zs = np.arange(lo[2], hi[2]) * spacing[2]
            gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
            ball = ((gx - center[0]) ** 2 + (gy - center[1]) ** 2
                    + (gz - center[2]) ** 2) <= radius ** 2

            trial = mask.copy()
            trial[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] &= ~ball
            if _component_count(trial) == before + 1:
                mask = trial
                placed_cuts.append((center, radius))
                cut_log.append({
                    "cut": cut_idx, "branch": bi, "center_mm": center.tolist(),
                    "radius_mm": radius, "arclength_mm": s_cut,
                })
                placed = True
                break
        if not placed:
            cut_log.append({"cut": cut_idx, "failed": True})

    return vol.with_data(mask.astype(np.uint8)), cut_log
