import math

import numpy as np
import pytest

from vesselmend.metrics import betti_numbers, dice
from vesselmend.pipeline import (
    RepairParams, repair, STATUS_CONNECTED,
)
from vesselmend.synth import SynthParams, generate_tree, fracture

from conftest import mask_volume, straight_tube


def broken_tube(gap=(24, 27)):
    vol = straight_tube()
    m = vol.mask().copy()
    m[gap[0]:gap[1]] = False
    return vol, mask_volume(m)


def test_unbroken_volume_untouched():
    vol = straight_tube()
    out, report = repair(vol)
    assert np.array_equal(out.data, vol.data)
    assert report.connections == []
    assert report.trees_unconnected == []


def test_empty_volume():
    vol = mask_volume(np.zeros((8, 8, 8)))
    out, report = repair(vol)
    assert not out.data.any()
    assert report.connections == []


def test_single_gap_repaired():
    full, broken = broken_tube()
    assert betti_numbers(broken)[0] == 2
    out, report = repair(broken)
    assert betti_numbers(out)[0] == 1
    assert len(report.connections) == 1
    assert report.connections[0].status == STATUS_CONNECTED
    assert np.all(out.data >= broken.data)  # superset of the input
    assert dice(out, full) > dice(broken, full)


def test_repair_is_deterministic():
    _, broken = broken_tube()
    out1, rep1 = repair(broken)
    out2, rep2 = repair(broken)
    assert np.array_equal(out1.data, out2.data)
    d1, d2 = rep1.to_dict(), rep2.to_dict()
    d1.pop("runtime_s"), d2.pop("runtime_s")
    assert d1 == d2


def test_epsilon_zero_connects_nothing():
    _, broken = broken_tube()
    out, report = repair(broken, RepairParams(epsilon=0.0))
    assert np.array_equal(out.data, broken.data)
    assert report.connections == []
    assert report.trees_unconnected != []


def test_distance_gate_blocks_far_fragments():
    # two short tubes far apart: no candidate within d_max
    a = np.zeros((100, 15, 15), dtype=bool)
    g = np.indices((100, 15, 15))
    d2 = (g[1] - 7.0) ** 2 + (g[2] - 7.0) ** 2
    a[5:20] = d2[5:20] <= 9.0
    a[80:95] = d2[80:95] <= 9.0
    vol = mask_volume(a)
    out, report = repair(vol, RepairParams(d_max_vox=30.0))
    assert np.array_equal(out.data, vol.data)
    assert report.trees_unconnected != []


def test_multi_fracture_synth_tree():
    vol, gt = generate_tree(SynthParams(seed=3, dims=(96, 96, 96)))
    broken, log = fracture(vol, gt, 2, seed=3)
    n_cuts = sum(1 for c in log if not c.get("failed"))
    assert betti_numbers(broken)[0] == 1 + n_cuts
    out, report = repair(broken)
    assert betti_numbers(out)[0] == 1
    assert len(report.connections) == n_cuts
    assert np.all(out.data >= broken.data)
    assert dice(out, vol) > dice(broken, vol)
    # report bookkeeping is consistent
    assert len(report.iteration_j_sizes) >= n_cuts
    assert sorted(report.trees_absorbed) == sorted(
        c.sub_tree_id for c in report.connections)


def test_report_json_round_trip():
    import json
    _, broken = broken_tube()
    _, report = repair(broken)
    blob = json.dumps(report.to_dict())
    back = json.loads(blob)
    assert back["connections"][0]["status"] == STATUS_CONNECTED
    assert back["parameters"]["epsilon"] == pytest.approx(math.sqrt(2))


def test_rethink_flag_still_repairs():
    _, broken = broken_tube()
    out, report = repair(broken, RepairParams(rethin_after_connect=True))
    assert betti_numbers(out)[0] == 1
    assert len(report.connections) == 1


def test_rejects_scalar_volume():
    from vesselmend.volume import Volume3D, SCALAR_F32
    vol = Volume3D((4, 4, 4), (1, 1, 1), SCALAR_F32, np.zeros(64, np.float32))
    with pytest.raises(ValueError, match="mask"):
        repair(vol)


def test_connection_radius_reasonable():
    # bridged gap should be about as thick as the tube it joins
    full, broken = broken_tube()
    out, _ = repair(broken)
    added = out.mask() & ~broken.mask()
    assert added.any()
    # no added voxel strays far from the gap region
    xs = np.argwhere(added)[:, 0]
    assert xs.min() >= 20 and xs.max() <= 31
