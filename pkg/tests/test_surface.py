import math

import numpy as np
import pytest

from vesselmend.surface import (
    TriMesh, ruled_mesh, min_surface_area, msmo, mesh_to_obj, MSMO_INFINITE,
)


def semicircle_pair(radius=1.0, n=64, tilt=0.0):
    """Two semicircular arcs forming a (possibly bent) closed circle."""
    th = np.linspace(0.0, np.pi, n)
    upper = np.column_stack([radius * np.cos(th), radius * np.sin(th),
                             tilt * np.sin(th)])
    lower = np.column_stack([radius * np.cos(th), -radius * np.sin(th),
                             np.zeros(n)])
    return upper, lower


def test_ruled_mesh_is_disk():
    c1, c2 = semicircle_pair()
    mesh = ruled_mesh(c1, c2, n=24)
    assert mesh.euler_characteristic() == 1
    assert mesh.boundary_mask[0] and mesh.boundary_mask[1]
    assert mesh.triangles.min() >= 0
    assert mesh.triangles.max() < len(mesh.vertices)


def test_ruled_mesh_requires_shared_endpoints():
    c1 = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
    c2 = np.array([[0, 0, 1], [1, 1, 0], [2, 0, 0]], dtype=float)
    with pytest.raises(ValueError, match="endpoints"):
        ruled_mesh(c1, c2)


def test_planar_circle_area():
    # flat disk of radius 1: minimal area is pi, and the boundary is already
    # planar so relaxation must not move the area away from it
    c1, c2 = semicircle_pair(radius=1.0)
    area, mesh = min_surface_area(c1, c2, n=32)
    assert area == pytest.approx(math.pi, rel=0.005)
    assert mesh.euler_characteristic() == 1


def test_planar_area_scales_quadratically():
    a1, _ = min_surface_area(*semicircle_pair(radius=1.0), n=32)
    a2, _ = min_surface_area(*semicircle_pair(radius=2.0), n=32)
    assert a2 / a1 == pytest.approx(4.0, rel=0.01)


def test_relaxation_decreases_nonplanar_area():
    c1, c2 = semicircle_pair(tilt=0.6)
    init = ruled_mesh(c1, c2, n=32).area()
    relaxed, _ = min_surface_area(c1, c2, n=32)
    assert relaxed <= init + 1e-12
    assert relaxed < init  # strictly better for a genuinely non-planar loop


def test_relaxed_area_exceeds_projection_lower_bound():
    # any spanning surface has at least the area of its planar projection
    c1, c2 = semicircle_pair(tilt=0.6)
    relaxed, _ = min_surface_area(c1, c2, n=32)
    assert relaxed >= math.pi * (1.0 - 1e-3)


def test_refinement_consistency():
    c1, c2 = semicircle_pair(tilt=0.6)
    areas = [min_surface_area(c1, c2, n=n)[0] for n in (16, 32, 64)]
    assert abs(areas[1] - areas[0]) / areas[1] < 0.01
    assert abs(areas[2] - areas[1]) / areas[2] < 0.01


def test_boundary_vertices_fixed():
    c1, c2 = semicircle_pair(tilt=0.6)
    initial = ruled_mesh(c1, c2, n=24)
    fixed_before = initial.vertices[initial.boundary_mask].copy()
    _, relaxed = min_surface_area(c1, c2, n=24)
    assert np.allclose(relaxed.vertices[relaxed.boundary_mask], fixed_before)


def test_degenerate_coincident_curves():
    c = np.array([[0, 0, 0], [1, 0.2, 0], [2, 0.3, 0], [3, 0, 0]], dtype=float)
    area, _ = min_surface_area(c, c.copy(), n=16)
    assert area < 1e-6
    assert msmo(area) == MSMO_INFINITE


def test_msmo_values():
    assert msmo(2.0) == 0.5
    assert msmo(0.0) == MSMO_INFINITE
    with pytest.raises(ValueError):
        msmo(-1.0)


def test_msmo_orders_by_agreement():
    # closer connector curves span less area and therefore rank higher
    near = semicircle_pair(tilt=0.1)
    far = semicircle_pair(tilt=0.8)
    m_near = msmo(min_surface_area(*near, n=24)[0])
    m_far = msmo(min_surface_area(*far, n=24)[0])
    assert m_near > m_far


def test_mesh_to_obj(tmp_path):
    _, mesh = min_surface_area(*semicircle_pair(), n=12)
    path = tmp_path / "m.obj"
    mesh_to_obj(mesh, path)
    lines = path.read_text().splitlines()
    assert sum(1 for ln in lines if ln.startswith("v ")) == len(mesh.vertices)
    assert sum(1 for ln in lines if ln.startswith("f ")) == len(mesh.triangles)
