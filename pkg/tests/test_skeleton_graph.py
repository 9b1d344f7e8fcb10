import numpy as np
import pytest

from vesselmend.volume import Volume3D, SCALAR_F32
from vesselmend.morphology import distance_transform
from vesselmend.skeleton import (
    build_graph, build_trees, endpoint_curve, graph_to_json_dict,
    ENDPOINT, BIFURCATION,
)

from conftest import mask_volume


def skel_and_dt(arr, spacing=(1.0, 1.0, 1.0)):
    vol = mask_volume(arr, spacing=spacing)
    return vol, distance_transform(vol)


def path_mask(n=10, dims=(12, 5, 5)):
    a = np.zeros(dims)
    a[1:1 + n, 2, 2] = 1
    return a


def y_mask():
    a = np.zeros((15, 15, 5))
    a[1:8, 7, 2] = 1            # stem
    for i in range(1, 6):
        a[7 + i, 7 + i, 2] = 1  # diagonal arm
        a[7 + i, 7 - i, 2] = 1  # other arm
    return a


def test_straight_path_graph():
    skel, dt = skel_and_dt(path_mask())
    g = build_graph(skel, dt)
    assert len(g.components) == 1
    c = g.components[0]
    kinds = [n.kind for n in c.nodes.values()]
    assert kinds.count(ENDPOINT) == 2
    assert kinds.count(BIFURCATION) == 0
    assert len(c.branches) == 1
    assert c.total_length_mm == pytest.approx(9.0)


def test_y_shape_graph():
    skel, dt = skel_and_dt(y_mask())
    g = build_graph(skel, dt)
    assert len(g.components) == 1
    c = g.components[0]
    kinds = [n.kind for n in c.nodes.values()]
    assert kinds.count(ENDPOINT) == 3
    assert kinds.count(BIFURCATION) == 1
    assert len(c.branches) == 3


def test_two_components():
    a = path_mask()
    a[1:6, 4, 4] = 1
    skel, dt = skel_and_dt(a)
    g = build_graph(skel, dt)
    assert len(g.components) == 2


def test_branch_length_additivity():
    skel, dt = skel_and_dt(y_mask())
    g = build_graph(skel, dt)
    for c in g.components:
        assert sum(b.length_mm for b in c.branches) == pytest.approx(c.total_length_mm)


def test_spacing_scales_length():
    skel, dt = skel_and_dt(path_mask(), spacing=(2.0, 1.0, 1.0))
    g = build_graph(skel, dt)
    assert g.components[0].total_length_mm == pytest.approx(18.0)


def test_build_trees_single_component():
    skel, dt = skel_and_dt(path_mask())
    main, subs = build_trees(build_graph(skel, dt))
    assert subs == []
    assert main.directed
    assert main.root is not None


def test_build_trees_ordering():
    a = np.zeros((40, 12, 5))
    a[1:31, 2, 2] = 1   # length 30
    a[1:13, 5, 2] = 1   # length 12
    a[1:4, 8, 2] = 1    # length 3
    skel, dt = skel_and_dt(a)
    main, subs = build_trees(build_graph(skel, dt))
    assert main.total_length_mm == pytest.approx(29.0)
    assert [round(t.total_length_mm) for t in subs] == [11, 2]


def test_root_is_thickest_endpoint():
    # fat blob at one end of a tube: DT max sits there
    a = np.zeros((40, 15, 15))
    a[2:30, 7, 7] = 1
    g = np.indices(a.shape)
    ball = (g[0] - 27.0) ** 2 + (g[1] - 7.0) ** 2 + (g[2] - 7.0) ** 2 <= 16.0
    vol = mask_volume(a.astype(bool) | ball)
    from vesselmend.morphology import skeletonize
    skel = skeletonize(vol)
    dt = distance_transform(vol)
    main, _ = build_trees(build_graph(skel, dt))
    assert main.root is not None
    # the root endpoint must carry the maximal radius among endpoints
    radii = {v: main.nodes[v].radius_mm for v in main.endpoints()}
    assert radii[main.root] == max(radii.values())


def test_empty_skeleton_raises():
    skel, dt = skel_and_dt(np.zeros((4, 4, 4)))
    with pytest.raises(ValueError, match="empty"):
        build_trees(build_graph(skel, dt))


def test_endpoint_curve_straight():
    skel, dt = skel_and_dt(path_mask())
    main, _ = build_trees(build_graph(skel, dt))
    ep = main.endpoints()[0]
    info = endpoint_curve(main, ep, window=5)
    assert len(info.chain_mm) == 5
    assert not info.degenerate
    # collinear points
    diffs = np.diff(info.chain_mm, axis=0)
    assert np.allclose(np.cross(diffs[0], diffs[1:]), 0)


def test_endpoint_curve_truncates_at_bifurcation():
    a = y_mask()
    skel, dt = skel_and_dt(a)
    main, _ = build_trees(build_graph(skel, dt))
    # arm endpoints are 5 voxels from the bifurcation: chain = 6 incl. both ends
    arm_ep = (12, 12, 2)
    info = endpoint_curve(main, arm_ep, window=10)
    assert len(info.chain_mm) == 6
    assert not info.degenerate


def test_isolated_voxel_degenerate():
    a = np.zeros((5, 5, 5))
    a[2, 2, 2] = 1
    skel, dt = skel_and_dt(a)
    main, _ = build_trees(build_graph(skel, dt))
    info = endpoint_curve(main, (2, 2, 2))
    assert info.degenerate


def test_determinism():
    a = y_mask()
    skel, dt = skel_and_dt(a)
    d1 = graph_to_json_dict(build_graph(skel, dt))
    d2 = graph_to_json_dict(build_graph(skel, dt))
    assert d1 == d2
