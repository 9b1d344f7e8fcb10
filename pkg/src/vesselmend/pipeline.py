"""End-to-end repair loop: score endpoint pairs, connect best-first, merge.

Each round scores every (main-tree endpoint, subtree endpoint) pair:
a distance gate first, then the touching-fit degree, then the minimal
spanning-surface area for pairs that pass.  The pair with the smallest
area is bridged by a geodesic tube, the absorbed subtree's endpoints
join the main pool (minus the two connected stumps), and the round
repeats until no admissible pair remains.  Skeletons are not recomputed
after a connection by default; the subtree is grafted onto the main
endpoint pool, which keeps the bookkeeping exact and deterministic.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import ndimage

from .volume import Volume3D, MASK_U8, SCALAR_F32
from .morphology import skeletonize, distance_transform
from .skeleton import build_graph, build_trees, endpoint_curve, EndpointInfo, VesselTree
from .curves import tfd_with_reason, frenet_frame, fit_canonical_cubic, cubic_point_at, \
    DiscreteCurve, ImplausibleGeometryError, DegenerateCurveError, TFD_INFINITE
from .surface import min_surface_area, msmo
from .geodesic import build_speed_field, fast_march, backtrack_geodesic, fill_tube, \
    GeodesicPath, GeodesicStagnation

STATUS_ACCEPTED = "accepted"
STATUS_REJECTED_TFD = "rejected-tfd"
STATUS_REJECTED_GEOMETRY = "rejected-geometry"
STATUS_REJECTED_DISTANCE = "rejected-distance"
STATUS_CONNECTED = "connected"
STATUS_FAILED = "failed-geodesic"


@dataclass
class RepairParams:
    epsilon: float = math.sqrt(2.0)   # TFD acceptance bound
    d_max_vox: float = 30.0           # endpoint distance gate, voxel units
    window: int = 7                   # endpoint chain length, voxels
    sigma: float | None = None        # speed-field smoothing, mm (default 2*min spacing)
    delta: float = 0.05               # speed floor
    n_surface: int = 32               # samples per connector curve
    surface_tol: float = 1e-6
    surface_max_iter: int = 500
    backtrack_step: float = 0.5       # voxel fraction
    box_margin_factor: float = 1.5    # fast-marching box margin vs pair distance
    rethin_after_connect: bool = False
    kappa_min: float | None = None    # stump-frame curvature floor, 1/mm
    # (default 1.5/min spacing: curvature estimated from a short voxel
    # chain sits below the staircase noise floor, so the frame normal is
    # reseeded from the pair geometry instead)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CandidatePair:
    p0: tuple[int, int, int]   # main-tree endpoint voxel
    q0: tuple[int, int, int]   # subtree endpoint voxel
    sub_tree_id: int
    tfd: float
    area_mm2: float | None
    msmo: float | None
    status: str
    reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "p0": list(self.p0), "q0": list(self.q0),
            "sub_tree_id": self.sub_tree_id,
            "tfd": None if math.isinf(self.tfd) else self.tfd,
            "area_mm2": self.area_mm2,
            "msmo": None if self.msmo is not None and math.isinf(self.msmo) else self.msmo,
            "status": self.status, "reason": self.reason,
        }


@dataclass
class RepairReport:
    connections: list[CandidatePair] = field(default_factory=list)
    iteration_j_sizes: list[int] = field(default_factory=list)
    trees_absorbed: list[int] = field(default_factory=list)
    trees_unconnected: list[int] = field(default_factory=list)
    failed_pairs: list[CandidatePair] = field(default_factory=list)
    runtime_s: float = 0.0
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "connections": [c.to_dict() for c in self.connections],
            "iteration_j_sizes": self.iteration_j_sizes,
            "trees_absorbed": self.trees_absorbed,
            "trees_unconnected": self.trees_unconnected,
            "failed_pairs": [c.to_dict() for c in self.failed_pairs],
            "runtime_s": self.runtime_s,
            "parameters": self.parameters,
        }


def _effective_kappa_min(params: RepairParams, spacing) -> float:
    if params.kappa_min is not None:
        return params.kappa_min
    return 1.5 / float(min(spacing))


def _connector_points(ep_from: EndpointInfo, ep_to: EndpointInfo, n: int, window: int,
                      kappa_min: float):
    """Sample the canonical cubic fitted from one stump to the other's endpoint."""
    curve = DiscreteCurve.from_points(ep_from.chain_mm)
    frame = frenet_frame(curve, at="start", orientation="outward", window=window,
                         kappa_min=kappa_min)
    cubic = fit_canonical_cubic(frame, ep_to.chain_mm[0])
    s = np.linspace(0.0, cubic.s_star, n)
    pts = np.asarray([cubic_point_at(cubic, si) for si in s])
    pts[0] = ep_from.chain_mm[0]
    pts[-1] = ep_to.chain_mm[0]  # snap: exact for k0 != 0, tiny correction otherwise
    return pts


def score_pair(ep_main: EndpointInfo, ep_sub: EndpointInfo,
               params: RepairParams, spacing) -> CandidatePair:
    """Gate by distance, then TFD, then compute the spanning-surface area."""
    p0 = ep_main.endpoint
    q0 = ep_sub.endpoint
    dist_vox = math.dist(p0, q0)
    base = dict(p0=p0, q0=q0, sub_tree_id=ep_sub.tree_id)
    if dist_vox > params.d_max_vox:
        return CandidatePair(**base, tfd=TFD_INFINITE, area_mm2=None, msmo=None,
                             status=STATUS_REJECTED_DISTANCE, reason="distance-gate")
    kappa_min = _effective_kappa_min(params, spacing)
    value, reason = tfd_with_reason(ep_main, ep_sub, window=params.window,
                                    kappa_min=kappa_min)
    if math.isinf(value):
        status = STATUS_REJECTED_GEOMETRY if reason in ("implausible-geometry",
                                                        "degenerate-endpoint") \
            else STATUS_REJECTED_TFD
        return CandidatePair(**base, tfd=value, area_mm2=None, msmo=None,
                             status=status, reason=reason)
    if value >= params.epsilon:
        return CandidatePair(**base, tfd=value, area_mm2=None, msmo=None,
                             status=STATUS_REJECTED_TFD, reason="tfd-above-epsilon")

    try:
        c1 = _connector_points(ep_main, ep_sub, params.n_surface, params.window,
                               kappa_min)
        c2 = _connector_points(ep_sub, ep_main, params.n_surface, params.window,
                               kappa_min)[::-1]
    except (ImplausibleGeometryError, DegenerateCurveError) as exc:
        return CandidatePair(**base, tfd=value, area_mm2=None, msmo=None,
                             status=STATUS_REJECTED_GEOMETRY, reason=str(exc))
    area, _ = min_surface_area(c1, c2, n=params.n_surface,
                               tol=params.surface_tol, max_iter=params.surface_max_iter)
    return CandidatePair(**base, tfd=value, area_mm2=float(area), msmo=msmo(area),
                         status=STATUS_ACCEPTED)


def _pair_sort_key(pair: CandidatePair):
    return (pair.area_mm2 if pair.area_mm2 is not None else float("inf"),
            pair.tfd, pair.p0, pair.q0)


def _connect(seg_mask: np.ndarray, vol_template: Volume3D, dt: Volume3D,
             pair: CandidatePair, params: RepairParams) -> tuple[np.ndarray, GeodesicPath]:
    """Bridge one accepted pair with a geodesic tube on the current mask."""
    spacing = np.asarray(vol_template.spacing)
    dims = np.asarray(vol_template.dims)
    p = np.asarray(pair.p0)
    q = np.asarray(pair.q0)
    margin = int(math.ceil(params.box_margin_factor * max(np.linalg.norm(p - q), 4.0)))
    lo = np.maximum(np.minimum(p, q) - margin, 0)
    hi = np.minimum(np.maximum(p, q) + margin + 1, dims)

    sub = seg_mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]].astype(np.uint8)
    sub_vol = Volume3D(sub.shape, vol_template.spacing, MASK_U8, sub)
    speed = build_speed_field(sub_vol, sigma=params.sigma, delta=params.delta)
    times = fast_march(speed, q - lo)
    path_local = backtrack_geodesic(times, p - lo, step=params.backtrack_step)

    pts_global = path_local.points_mm + lo * spacing
    radius = max(0.5 * (float(dt.data[tuple(p)]) + float(dt.data[tuple(q)])),
                 float(min(vol_template.spacing)))
    path = GeodesicPath(points_mm=pts_global, radius_mm=radius)
    filled = fill_tube(
        Volume3D(vol_template.dims, vol_template.spacing, MASK_U8, seg_mask.astype(np.uint8)),
        path, radius)
    out_mask = filled.mask()
    # rasterizing the tube against the stump faces can trap isolated
    # background voxels; such cavities force topology-preserving thinning
    # to wrap a shell around them, wrecking the skeleton downstream
    region = out_mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    out_mask[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = ndimage.binary_fill_holes(region)
    return out_mask, path


def _endpoint_infos(tree: VesselTree, window: int) -> dict:
    infos = {}
    for ep in tree.endpoints():
        infos[ep] = endpoint_curve(tree, ep, window=window)
    return infos


def repair(seg: Volume3D, params: RepairParams | None = None) -> tuple[Volume3D, RepairReport]:
    """Repair fractured vessels: returns (mask superset of the input, report)."""
    if params is None:
        params = RepairParams()
    report = RepairReport(parameters=params.to_dict())
    t0 = time.perf_counter()

    if seg.dtype != MASK_U8:
        raise ValueError("repair expects a mask volume")
    if not seg.data.any():
        report.runtime_s = time.perf_counter() - t0
        return seg, report

    mask = seg.mask().copy()
    dt = distance_transform(seg)

    def build_state(current_mask):
        vol = Volume3D(seg.dims, seg.spacing, MASK_U8, current_mask.astype(np.uint8))
        graph = build_graph(skeletonize(vol), dt)
        main, subs = build_trees(graph)
        return main, subs

    main, subs = build_state(mask)
    p_main = _endpoint_infos(main, params.window)
    sub_infos = {t.id: _endpoint_infos(t, params.window) for t in subs}
    live_subs = {t.id for t in subs}

    score_cache: dict[tuple, CandidatePair] = {}
    failed: set[tuple] = set()

    while live_subs:
        j_pairs = []
        for tid in sorted(live_subs):
            for q_vox, ep_sub in sorted(sub_infos[tid].items()):
                for p_vox, ep_main in sorted(p_main.items()):
                    key = (p_vox, q_vox)
                    if key in failed:
                        continue
                    pair = score_cache.get(key)
                    if pair is None:
                        pair = score_pair(ep_main, ep_sub, params, seg.spacing)
                        score_cache[key] = pair
                    if pair.status == STATUS_ACCEPTED:
                        j_pairs.append(pair)
        report.iteration_j_sizes.append(len(j_pairs))
        if not j_pairs:
            break

        j_pairs.sort(key=_pair_sort_key)
        connected = False
        for pair in j_pairs:
            try:
                mask, _path = _connect(mask, seg, dt, pair, params)
            except GeodesicStagnation:
                pair_failed = dataclasses.replace(
                    pair, status=STATUS_FAILED, reason="geodesic-stagnation")
                report.failed_pairs.append(pair_failed)
                failed.add((pair.p0, pair.q0))
                continue
            pair.status = STATUS_CONNECTED
            report.connections.append(pair)
            tid = pair.sub_tree_id
            report.trees_absorbed.append(tid)
            live_subs.discard(tid)
            # graft: absorbed endpoints join the main pool, minus the two
            # stumps that were just connected
            absorbed = dict(sub_infos.pop(tid))
            absorbed.pop(pair.q0, None)
            p_main.pop(pair.p0, None)
            p_main.update(absorbed)
            # cached scores involving the consumed endpoints are gone with them
            score_cache = {k: v for k, v in score_cache.items()
                           if k[0] != pair.p0 and k[1] != pair.q0}
            connected = True
            if params.rethin_after_connect:
                main, subs = build_state(mask)
                p_main = _endpoint_infos(main, params.window)
                sub_infos = {t.id: _endpoint_infos(t, params.window) for t in subs}
                live_subs = {t.id for t in subs}
                score_cache.clear()
            break
        if not connected:
            break

    report.trees_unconnected = sorted(live_subs)
    report.runtime_s = time.perf_counter() - t0
    out = Volume3D(seg.dims, seg.spacing, MASK_U8, mask.astype(np.uint8))
    return out, report
