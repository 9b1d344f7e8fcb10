import numpy as np
import pytest

from vesselmend.metrics import betti_numbers
from vesselmend.synth import SynthParams, generate_tree, fracture


def small_params(seed=0, **kw):
    kw.setdefault("dims", (96, 96, 96))
    return SynthParams(seed=seed, **kw)


def test_determinism_per_seed():
    v1, g1 = generate_tree(small_params(seed=7))
    v2, g2 = generate_tree(small_params(seed=7))
    assert np.array_equal(v1.data, v2.data)
    assert g1.to_dict() == g2.to_dict()


def test_seeds_differ():
    v1, _ = generate_tree(small_params(seed=1))
    v2, _ = generate_tree(small_params(seed=2))
    assert not np.array_equal(v1.data, v2.data)


def test_tree_is_connected_no_loops():
    for seed in range(5):
        vol, gt = generate_tree(small_params(seed=seed))
        assert betti_numbers(vol) == (1, 0, 0)
        assert gt.betti == (1, 0, 0)


def test_branch_count_structure():
    vol, gt = generate_tree(small_params(seed=0, depth=2))
    # full binary tree of depth 2 has 7 branches; clipping can only reduce it
    assert 1 <= gt.branch_count <= 7
    if not gt.clipped:
        assert gt.branch_count == 7
    assert gt.total_length_mm == pytest.approx(sum(gt.branch_lengths_mm))
    assert len(gt.branches) == gt.branch_count == len(gt.branch_radii_mm)


def test_radii_taper():
    _, gt = generate_tree(small_params(seed=3))
    assert gt.branch_radii_mm[0] == max(gt.branch_radii_mm)
    assert min(gt.branch_radii_mm) >= 1.5  # rasterization floor at unit spacing


def test_centerline_voxels_are_foreground():
    vol, gt = generate_tree(small_params(seed=4))
    m = vol.mask()
    spacing = np.asarray(vol.spacing)
    for pts in gt.branches:
        vox = np.rint(pts / spacing).astype(int)
        assert m[vox[:, 0], vox[:, 1], vox[:, 2]].all()


def test_invalid_params():
    with pytest.raises(ValueError):
        SynthParams(taper=1.5)
    with pytest.raises(ValueError):
        SynthParams(radius_root=0.1)


# ------------------------------------------------------------------ fracture

def test_fracture_increases_components_exactly():
    vol, gt = generate_tree(small_params(seed=0))
    for n in (1, 2, 3):
        broken, log = fracture(vol, gt, n, seed=n)
        ok = [c for c in log if not c.get("failed")]
        assert betti_numbers(broken)[0] == 1 + len(ok)
        assert len(log) == n


def test_fracture_is_subset():
    vol, gt = generate_tree(small_params(seed=1))
    broken, _ = fracture(vol, gt, 2, seed=9)
    assert np.all(broken.data <= vol.data)
    assert broken.data.sum() < vol.data.sum()


def test_fracture_deterministic():
    vol, gt = generate_tree(small_params(seed=1))
    b1, l1 = fracture(vol, gt, 2, seed=5)
    b2, l2 = fracture(vol, gt, 2, seed=5)
    assert np.array_equal(b1.data, b2.data)
    assert l1 == l2


def test_fracture_log_contents():
    vol, gt = generate_tree(small_params(seed=2))
    _, log = fracture(vol, gt, 1, seed=3)
    assert len(log) == 1
    entry = log[0]
    if not entry.get("failed"):
        assert 0 <= entry["branch"] < gt.branch_count
        assert entry["radius_mm"] > 0
        assert len(entry["center_mm"]) == 3


def test_fracture_rejects_zero_cuts():
    vol, gt = generate_tree(small_params(seed=0))
    with pytest.raises(ValueError):
        fracture(vol, gt, 0)
