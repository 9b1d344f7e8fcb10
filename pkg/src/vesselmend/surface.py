"""Approximate minimal surfaces spanning a closed curve made of two arcs.

The surface bounded by two connector curves sharing both endpoints is
initialized as a ruled patch (with the shared endpoints collapsed to
poles), then relaxed by area-gradient descent with the boundary held
fixed.  Only the final area matters downstream: smaller spanning area
means the two connectors agree better, so the pair gets a higher
connection priority (the reciprocal of the area).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import DiscreteCurve, resample_arclength

MSMO_INFINITE = float("inf")


@dataclass
class TriMesh:
    vertices: np.ndarray       # (V, 3)
    triangles: np.ndarray      # (F, 3) int
    boundary_mask: np.ndarray  # (V,) bool, fixed during relaxation
    degenerate_warning: bool = False

    def areas(self) -> np.ndarray:
        v = self.vertices
        t = self.triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def area(self) -> float:
        a = self.areas()
        return float(a[a >= 1e-12].sum()) if self.degenerate_warning else float(a.sum())

    def euler_characteristic(self) -> int:
        v = len(self.vertices)
        f = len(self.triangles)
        edges = set()
        for a, b, c in self.triangles:
            for e in ((a, b), (b, c), (c, a)):
                edges.add((min(e), max(e)))
        return v - len(edges) + f


def _resample_to_n(pts, n):
    curve = DiscreteCurve.from_points(pts)
    if curve.length == 0:
        return np.repeat(curve.points[:1], n, axis=0)
    s_new = np.linspace(0.0, curve.length, n)
    out = np.empty((n, 3))
    for k in range(3):
        out[:, k] = np.interp(s_new, curve.arclength, curve.points[:, k])
    return out


def ruled_mesh(c1, c2, n: int = 32, rows: int | None = None) -> TriMesh:
    """Triangulated ruled patch between two curves sharing both endpoints.

    Both curves are resampled to ``n`` points; interior cross-sections are
    linear blends, giving ``rows`` rows between the two boundary curves
    (default ~n/2, at least 3).  The shared endpoints become single pole
    vertices, so the mesh is a topological disk.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if n < 3:
        raise ValueError("n must be >= 3")
    if np.linalg.norm(c1[0] - c2[0]) > 1e-6 or np.linalg.norm(c1[-1] - c2[-1]) > 1e-6:
        raise ValueError("curves must share both endpoints")
    if rows is None:
        rows = max(3, n // 2)

    a = _resample_to_n(c1, n)
    b = _resample_to_n(c2, n)
    p_start = 0.5 * (a[0] + b[0])
    p_end = 0.5 * (a[-1] + b[-1])

    # vertex grid: poles + (n-2) columns x rows, row 0 on c1, last row on c2
    t = np.linspace(0.0, 1.0, rows)
    verts = [p_start, p_end]
    index = np.empty((n - 2, rows), dtype=int)
    for i in range(1, n - 1):
        for j in range(rows):
            index[i - 1, j] = len(verts)
            verts.append((1.0 - t[j]) * a[i] + t[j] * b[i])
    verts = np.asarray(verts)

    tris = []
    # fans at the poles
    for j in range(rows - 1):
        tris.append((0, index[0, j], index[0, j + 1]))
        tris.append((1, index[-1, j + 1], index[-1, j]))
    # quads in the middle
    for i in range(n - 3):
        for j in range(rows - 1):
            v00, v01 = index[i, j], index[i, j + 1]
            v10, v11 = index[i + 1, j], index[i + 1, j + 1]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    tris = np.asarray(tris, dtype=int)

    boundary = np.zeros(len(verts), dtype=bool)
    boundary[0] = boundary[1] = True
    boundary[index[:, 0]] = True
    boundary[index[:, -1]] = True
    return TriMesh(vertices=verts, triangles=tris, boundary_mask=boundary)


def _area_and_gradient(verts, tris):
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    cr = np.cross(e1, e2)
    norms = np.linalg.norm(cr, axis=1)
    area = 0.5 * norms.sum()

    safe = np.where(norms > 1e-14, norms, 1.0)
    nhat = cr / safe[:, None]
    # dA/dv_k = 0.5 * nhat x (opposite edge)
    grad = np.zeros_like(verts)
    g0 = 0.5 * np.cross(nhat, verts[tris[:, 2]] - verts[tris[:, 1]])
    g1 = 0.5 * np.cross(nhat, verts[tris[:, 0]] - verts[tris[:, 2]])
    g2 = 0.5 * np.cross(nhat, verts[tris[:, 1]] - verts[tris[:, 0]])
    np.add.at(grad, tris[:, 0], g0)
    np.add.at(grad, tris[:, 1], g1)
    np.add.at(grad, tris[:, 2], g2)
    return area, grad


def min_surface_area(c1, c2, n: int = 32, tol: float = 1e-6,
                     max_iter: int = 500,
                     history: list | None = None) -> tuple[float, TriMesh]:
    """Relax the ruled patch toward the least-area spanning surface.

    Interior vertices move by area-gradient descent with step halving, so
    the area never increases; iteration stops when the relative area
    change over one sweep drops below ``tol``.  If ``history`` is a list,
    the area after each accepted sweep is appended to it.
    """
    mesh = ruled_mesh(c1, c2, n)
    verts = mesh.vertices.copy()
    tris = mesh.triangles
    free = ~mesh.boundary_mask

    area, grad = _area_and_gradient(verts, tris)
    if history is not None:
        history.append(area)
    if area < 1e-9 or not free.any():
        mesh.vertices = verts
        return mesh.area(), mesh

    diam = float(np.ptp(verts, axis=0).max())
    step = 0.25 * diam
    step_max = 0.5 * diam
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad[free])
        if gnorm < 1e-14:
            break
        direction = np.zeros_like(verts)
        direction[free] = -grad[free] / gnorm
        new_area = area
        for _ in range(40):
            trial = verts + step * direction
            trial_area, trial_grad = _area_and_gradient(trial, tris)
            if trial_area <= area:
                verts, new_area, grad = trial, trial_area, trial_grad
                step = min(2.0 * step, step_max)  # carry the step size over
                break
            step *= 0.5
        if new_area >= area:
            break  # no descent step found
        if history is not None:
            history.append(new_area)
        if area - new_area < tol * max(area, 1e-12):
            area = new_area
            break
        area = new_area

    areas = 0.5 * np.linalg.norm(
        np.cross(verts[tris[:, 1]] - verts[tris[:, 0]],
                 verts[tris[:, 2]] - verts[tris[:, 0]]), axis=1)
    degenerate = areas < 1e-12
    mesh.vertices = verts
    if degenerate.sum() > 0.5 * len(tris):
        mesh.degenerate_warning = True
    return mesh.area(), mesh


def msmo(area: float) -> float:
    """Connection priority: reciprocal spanning area; ~zero area -> +inf."""
    if area < 0:
        raise ValueError("area must be >= 0")
    if area < 1e-6:
        return MSMO_INFINITE
    return 1.0 / area


def mesh_to_obj(mesh: TriMesh, path) -> None:
    """Dump the mesh in OBJ format (debugging aid)."""
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]} {v[1]} {v[2]}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
