"""Topology and overlap metrics for binary vessel volumes.

Betti numbers come from the cubical complex of the foreground voxels:
b0 counts 26-connected foreground components, b2 counts enclosed
6-connected background cavities, and b1 follows from the Euler
characteristic chi = V - E + F - C.  Tree length and branch counts are
read off the skeleton graph; Dice and the surface distance score compare
a prediction against a reference mask.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .volume import Volume3D
from .morphology import morph, distance_transform, skeletonize, StructuringElement
from .skeleton import build_graph

_STRUCT26 = np.ones((3, 3, 3), dtype=int)
_STRUCT6 = ndimage.generate_binary_structure(3, 1)


@dataclass
class TopologyReport:
    betti_pred: tuple[int, int, int]
    betti_gt: tuple[int, int, int]
    betti_error: int
    length_pred_mm: float
    length_gt_mm: float
    lr_error: float
    branches_pred: int
    branches_gt: int
    br_error: float
    dsc: float
    nsd: float
    nsd_tolerance_mm: float
    sym_diff_ratio: float
    empty_gt: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betti_pred"] = list(self.betti_pred)
        d["betti_gt"] = list(self.betti_gt)
        return d


def euler_characteristic(vol: Volume3D) -> int:
    """chi = V - E + F - C of the cubical complex built from foreground voxels."""
    occ = vol.mask()
    c = int(occ.sum())
    if c == 0:
        return 0

    occ_p = np.pad(occ, 1)

    # a vertex of the voxel grid is present when any of its 8 incident voxels is
    vert = np.zeros(tuple(s + 1 for s in occ.shape), dtype=bool)
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                vert |= occ_p[dx:dx + vert.shape[0],
                              dy:dy + vert.shape[1],
                              dz:dz + vert.shape[2]]
    v = int(vert.sum())

    e = 0
    f = 0
    for axis in range(3):
        # edges along `axis`: shared by up to 4 voxels
        shape = [s + 1 for s in occ.shape]
        shape[axis] -= 1
        edge = np.zeros(shape, dtype=bool)
        others = [a for a in range(3) if a != axis]
        for d0 in (0, 1):
            for d1 in (0, 1):
                off = [0, 0, 0]
                off[others[0]] = d0
                off[others[1]] = d1
                off[axis] = 1  # padding offset along axis covers both sides
                edge |= occ_p[off[0]:off[0] + shape[0],
                              off[1]:off[1] + shape[1],
                              off[2]:off[2] + shape[2]]
        e += int(edge.sum())

        # faces orthogonal to `axis`: shared by up to 2 voxels
        shape = [s for s in occ.shape]
        shape[axis] += 1
        face = np.zeros(shape, dtype=bool)
        for d in (0, 1):
            off = [1, 1, 1]
            off[axis] = d
            face |= occ_p[off[0]:off[0] + shape[0],
                          off[1]:off[1] + shape[1],
                          off[2]:off[2] + shape[2]]
        f += int(face.sum())

    return v - e + f - c


def betti_numbers(vol: Volume3D) -> tuple[int, int, int]:
    """(b0, b1, b2) with 26-connected foreground and 6-connected background."""
    occ = vol.mask()
    if not occ.any():
        return (0, 0, 0)
    _, b0 = ndimage.label(occ, structure=_STRUCT26)

    bg = np.pad(~occ, 1, constant_values=True)
    bg_labels, n_bg = ndimage.label(bg, structure=_STRUCT6)
    border = np.unique(np.concatenate([
        bg_labels[0].ravel(), bg_labels[-1].ravel(),
        bg_labels[:, 0].ravel(), bg_labels[:, -1].ravel(),
        bg_labels[:, :, 0].ravel(), bg_labels[:, :, -1].ravel()]))
    border = set(int(b) for b in border if b != 0)
    b2 = sum(1 for lab in range(1, n_bg + 1) if lab not in border)

    chi = euler_characteristic(vol)
    b1 = b0 + b2 - chi
    return (int(b0), int(b1), int(b2))


def dice(a: Volume3D, b: Volume3D) -> float:
    """2|A.B| / (|A|+|B|); two empty masks count as identical (1.0)."""
    if a.dims != b.dims:
        raise ValueError(f"dims mismatch: {a.dims} vs {b.dims}")
    ma, mb = a.mask(), b.mask()
    na, nb = int(ma.sum()), int(mb.sum())
    if na + nb == 0:
        return 1.0
    return 2.0 * int((ma & mb).sum()) / (na + nb)


def sym_diff_ratio(a: Volume3D, b: Volume3D) -> float:
    """|A xor B| / |A or B|; 0 for identical masks, 0/0 -> 0."""
    if a.dims != b.dims:
        raise ValueError(f"dims mismatch: {a.dims} vs {b.dims}")
    ma, mb = a.mask(), b.mask()
    union = int((ma | mb).sum())
    if union == 0:
        return 0.0
    return int((ma ^ mb).sum()) / union


def _boundary_coords(vol: Volume3D) -> np.ndarray:
    """Physical coordinates of foreground boundary voxels (A minus its erosion)."""
    m = vol.mask()
    inner = morph(vol, "erode", StructuringElement("cross6", 1)).mask()
    coords = np.argwhere(m & ~inner)
    return coords * np.asarray(vol.spacing)


def nsd(a: Volume3D, b: Volume3D, tol: float | None = None) -> float:
    """Normalized surface distance at tolerance ``tol`` (mm).

    Fraction of boundary voxels of each mask lying within ``tol`` of the
    other mask's boundary, averaged over both directions.  Two empty
    masks score 1.0.
    """
    if a.dims != b.dims or a.spacing != b.spacing:
        raise ValueError("masks must share dims and spacing")
    if tol is None:
        tol = min(a.spacing)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    ba = _boundary_coords(a)
    bb = _boundary_coords(b)
    if len(ba) == 0 and len(bb) == 0:
        return 1.0
    if len(ba) == 0 or len(bb) == 0:
        return 0.0
    ta = cKDTree(ba)
    tb = cKDTree(bb)
    da = tb.query(ba, k=1)[0]
    db = ta.query(bb, k=1)[0]
    eps = 1e-9  # absorb float roundoff at exactly-tol distances
    hits = int((da <= tol + eps).sum()) + int((db <= tol + eps).sum())
    return hits / (len(ba) + len(bb))


def tree_stats(vol: Volume3D) -> tuple[float, int]:
    """(total skeleton length in mm, branch chain count) of a mask."""
    if not vol.data.any():
        return 0.0, 0
    skel = skeletonize(vol)
    dt = distance_transform(vol)
    graph = build_graph(skel, dt)
    length = sum(c.total_length_mm for c in graph.components)
    branches = sum(len(c.branches) for c in graph.components)
    return float(length), int(branches)


def topology_report(pred: Volume3D, gt: Volume3D, tol: float | None = None) -> TopologyReport:
    """Full metric report for a prediction/reference pair.

    The Betti error sums the b0 and b1 discrepancies; b2 is reported but
    excluded (vessel masks carry no cavities by design).  With an empty
    reference, rate errors degrade to absolute counts and are flagged.
    """
    if pred.dims != gt.dims or pred.spacing != gt.spacing:
        raise ValueError("pred and gt must share dims and spacing")
    if tol is None:
        tol = min(pred.spacing)

    bp = betti_numbers(pred)
    bg = betti_numbers(gt)
    betti_err = abs(bp[0] - bg[0]) + abs(bp[1] - bg[1])

    lp, brp = tree_stats(pred)
    lg, brg = tree_stats(gt)
    empty_gt = not gt.data.any()
    if empty_gt or lg == 0:
        lr = abs(lp - lg)
    else:
        lr = abs(lp - lg) / lg
    if empty_gt or brg == 0:
        br = float(abs(brp - brg))
    else:
        br = abs(brp - brg) / brg

    return TopologyReport(
        betti_pred=bp, betti_gt=bg, betti_error=int(betti_err),
        length_pred_mm=lp, length_gt_mm=lg, lr_error=float(lr),
        branches_pred=brp, branches_gt=brg, br_error=float(br),
        dsc=dice(pred, gt), nsd=nsd(pred, gt, tol), nsd_tolerance_mm=float(tol),
        sym_diff_ratio=sym_diff_ratio(pred, gt), empty_gt=empty_gt)
