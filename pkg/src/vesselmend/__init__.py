"""Repair of fractured 3D vessel segmentations.

The library takes a binary vessel mask, skeletonizes it into vessel trees,
scores candidate endpoint pairs by how well their local Frenet geometry
continues across the gap, orders accepted pairs by the area of the minimal
surface spanning the two fitted connector curves, and bridges the winning
pairs with geodesic tubes computed by fast marching.  Topology metrics
(Betti numbers, tree length/branch errors, Dice, surface distance) and a
synthetic vessel generator close the loop for verification.
"""

from .volume import Volume3D, read_nrrd, write_nrrd
from .morphology import (
    StructuringElement,
    morph,
    edge_map,
    gaussian_smooth,
    distance_transform,
    skeletonize,
)
from .skeleton import SkeletonGraph, VesselTree, EndpointInfo, build_graph, build_trees, endpoint_curve
from .curves import (
    DiscreteCurve,
    FrenetFrame,
    CanonicalCubic,
    resample_arclength,
    frenet_frame,
    fit_canonical_cubic,
    cubic_frenet_at,
    touching_bias,
    tfd,
    TFD_INFINITE,
)
from .surface import TriMesh, ruled_mesh, min_surface_area, msmo
from .geodesic import SpeedField, GeodesicPath, build_speed_field, fast_march, backtrack_geodesic, fill_tube
from .pipeline import CandidatePair, RepairReport, RepairParams, score_pair, repair
from .metrics import betti_numbers, dice, nsd, sym_diff_ratio, tree_stats, topology_report, TopologyReport
from .synth import SynthParams, GroundTruth, generate_tree, fracture

__version__ = "0.1.0"
