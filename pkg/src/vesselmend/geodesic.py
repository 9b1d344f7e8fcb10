"""Eikonal arrival times, geodesic backtracking, and tube filling.

The speed field is a smoothed copy of the segmentation with a positive
floor, so geodesics prefer to run through (and between) vessel stumps.
Arrival times solve |grad u| * F = 1 with a first-order upwind Godunov
discretization via the fast marching method; paths follow -grad u with
trilinear interpolation and midpoint stepping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .volume import Volume3D, MASK_U8, SCALAR_F32
from .morphology import gaussian_smooth


@dataclass
class SpeedField:
    volume: Volume3D  # scalar volume, values in [delta, 1]
    delta: float


@dataclass
class GeodesicPath:
    points_mm: np.ndarray  # (k, 3), start -> source
    radius_mm: float = 0.0


class GeodesicStagnation(RuntimeError):
    def __init__(self, message, partial_path):
        super().__init__(message)
        self.partial_path = partial_path


def build_speed_field(seg: Volume3D, sigma: float | None = None,
                      delta: float = 0.05) -> SpeedField:
    """Speed = delta + (1-delta) * smoothed mask, clamped to [delta, 1].

    ``sigma`` defaults to twice the minimum spacing, which leaks enough
    speed into small gaps to steer geodesics through fractures.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    if seg.dtype != MASK_U8:
        raise ValueError("segmentation must be a mask volume")
    if sigma is None:
        sigma = 2.0 * min(seg.spacing)
    smooth = gaussian_smooth(seg, sigma).data
    f = delta + (1.0 - delta) * smooth
    f = np.clip(f, delta, 1.0).astype(np.float32)
    return SpeedField(volume=Volume3D(seg.dims, seg.spacing, SCALAR_F32, f), delta=delta)


_FAR, _TRIAL, _KNOWN = 0, 1, 2


@njit(cache=True)
def _heap_push(heap_t, heap_i, size, t, idx):
    heap_t[size] = t
    heap_i[size] = idx
    child = size
    while child > 0:
        parent = (child - 1) // 2
        if heap_t[parent] <= heap_t[child]:
            break
        heap_t[parent], heap_t[child] = heap_t[child], heap_t[parent]
        heap_i[parent], heap_i[child] = heap_i[child], heap_i[parent]
        child = parent
    return size + 1


@njit(cache=True)
def _heap_pop(heap_t, heap_i, size):
    top_t = heap_t[0]
    top_i = heap_i[0]
    size -= 1
    heap_t[0] = heap_t[size]
    heap_i[0] = heap_i[size]
    parent = 0
    while True:
        left = 2 * parent + 1
        if left >= size:
            break
        right = left + 1
        small = left
        if right < size and heap_t[right] < heap_t[left]:
            small = right
        if heap_t[parent] <= heap_t[small]:
            break
        heap_t[parent], heap_t[small] = heap_t[small], heap_t[parent]
        heap_i[parent], heap_i[small] = heap_i[small], heap_i[parent]
        parent = small
    return top_t, top_i, size


@njit(cache=True)
def _solve_quadratic(u, state, speed, x, y, z, nx, ny, nz, sx, sy, sz):
    """Upwind Godunov update at one voxel from KNOWN 6-neighbors."""
    vals = np.empty(3)
    steps = np.empty(3)
    m = 0
    # axis x
    best = 1e308
    if x > 0 and state[x - 1, y, z] == _KNOWN and u[x - 1, y, z] < best:
        best = u[x - 1, y, z]
    if x < nx - 1 and state[x + 1, y, z] == _KNOWN and u[x + 1, y, z] < best:
        best = u[x + 1, y, z]
    if best < 1e307:
        vals[m] = best
        steps[m] = sx
        m += 1
    best = 1e308
    if y > 0 and state[x, y - 1, z] == _KNOWN and u[x, y - 1, z] < best:
        best = u[x, y - 1, z]
    if y < ny - 1 and state[x, y + 1, z] == _KNOWN and u[x, y + 1, z] < best:
        best = u[x, y + 1, z]
    if best < 1e307:
        vals[m] = best
        steps[m] = sy
        m += 1
    best = 1e308
    if z > 0 and state[x, y, z - 1] == _KNOWN and u[x, y, z - 1] < best:
        best = u[x, y, z - 1]
    if z < nz - 1 and state[x, y, z + 1] == _KNOWN and u[x, y, z + 1] < best:
        best = u[x, y, z + 1]
    if best < 1e307:
        vals[m] = best
        steps[m] = sz
        m += 1
    if m == 0:
        return 1e308

    # sort the m (value, step) pairs by value
    for i in range(m):
        for j in range(i + 1, m):
            if vals[j] < vals[i]:
                vals[i], vals[j] = vals[j], vals[i]
                steps[i], steps[j] = steps[j], steps[i]

    rhs = 1.0 / speed[x, y, z]
    # try using the k smallest neighbors, largest k first that stays valid
    u_new = vals[0] + rhs * steps[0]
    for k in range(2, m + 1):
        a = 0.0
        b = 0.0
        c = -rhs * rhs
        for i in range(k):
            w = 1.0 / (steps[i] * steps[i])
            a += w
            b -= 2.0 * w * vals[i]
            c += w * vals[i] * vals[i]
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            break
        cand = (-b + np.sqrt(disc)) / (2.0 * a)
        if cand >= vals[k - 1]:
            u_new = cand
    return u_new


@njit(cache=True)
def _fast_march_kernel(speed, sx, sy, sz, src_x, src_y, src_z, init_radius_vox):
    nx, ny, nz = speed.shape
    u = np.full((nx, ny, nz), 1e308)
    state = np.zeros((nx, ny, nz), dtype=np.uint8)

    cap = 8 * nx * ny * nz + 64
    heap_t = np.empty(cap)
    heap_i = np.empty(cap, dtype=np.int64)
    size = 0

    # exact initialization in a small ball around the source softens the
    # point-source rarefaction error of the first-order scheme
    f0 = speed[src_x, src_y, src_z]
    r = init_radius_vox
    for dx in range(-r, r + 1):
        for dy in range(-r, r + 1):
            for dz in range(-r, r + 1):
                x = src_x + dx
                y = src_y + dy
                z = src_z + dz
                if x < 0 or y < 0 or z < 0 or x >= nx or y >= ny or z >= nz:
                    continue
                if dx * dx + dy * dy + dz * dz > r * r:
                    continue
                d = np.sqrt((dx * sx) ** 2 + (dy * sy) ** 2 + (dz * sz) ** 2)
                u[x, y, z] = d / f0
                state[x, y, z] = _KNOWN
                idx = x + nx * (y + ny * z)
                size = _heap_push(heap_t, heap_i, size, u[x, y, z], idx)

    while size > 0:
        t, idx, size = _heap_pop(heap_t, heap_i, size)
        x = idx % nx
        y = (idx // nx) % ny
        z = idx // (nx * ny)
        if state[x, y, z] == _KNOWN and u[x, y, z] < t:
            continue  # stale entry
        state[x, y, z] = _KNOWN
        for n in range(6):
            xx, yy, zz = x, y, z
            if n == 0:
                xx -= 1
            elif n == 1:
                xx += 1
            elif n == 2:
                yy -= 1
            elif n == 3:
                yy += 1
            elif n == 4:
                zz -= 1
            else:
                zz += 1
            if xx < 0 or yy < 0 or zz < 0 or xx >= nx or yy >= ny or zz >= nz:
                continue
            if state[xx, yy, zz] == _KNOWN:
                continue
            cand = _solve_quadratic(u, state, speed, xx, yy, zz, nx, ny, nz, sx, sy, sz)
            if cand < u[xx, yy, zz]:
                u[xx, yy, zz] = cand
                state[xx, yy, zz] = _TRIAL
                nidx = xx + nx * (yy + ny * zz)
                size = _heap_push(heap_t, heap_i, size, cand, nidx)
    return u


def fast_march(speed: SpeedField, source, init_radius_vox: int = 5) -> Volume3D:
    """Arrival times u solving |grad u| * F = 1 with u(source) = 0."""
    vol = speed.volume
    nx, ny, nz = vol.dims
    x, y, z = (int(c) for c in source)
    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
        raise ValueError(f"source {source} out of bounds for dims {vol.dims}")
    u = _fast_march_kernel(vol.data.astype(np.float64), *map(float, vol.spacing),
                           x, y, z, init_radius_vox)
    u[x, y, z] = 0.0
    return Volume3D(vol.dims, vol.spacing, SCALAR_F32, u.astype(np.float32))


def _trilinear_gradient(times: np.ndarray, spacing, pos_vox):
    """Gradient of the arrival-time field at a continuous voxel position."""
    nx, ny, nz = times.shape
    g = np.zeros(3)
    base = np.floor(pos_vox).astype(int)
    frac = pos_vox - base
    for axis in range(3):
        # central difference of the trilinear interpolant
        acc = 0.0
        for cx in (0, 1):
            for cy in (0, 1):
                for cz in (0, 1):
                    ix = min(max(base[0] + cx, 0), nx - 1)
                    iy = min(max(base[1] + cy, 0), ny - 1)
                    iz = min(max(base[2] + cz, 0), nz - 1)
                    i = [ix, iy, iz]
                    lo = [max(i[a] - 1, 0) for a in range(3)]
                    hi = [min(i[a] + 1, times.shape[a] - 1) for a in range(3)]
                    ilo = list(i)
                    ihi = list(i)
                    ilo[axis] = lo[axis]
                    ihi[axis] = hi[axis]
                    denom = (ihi[axis] - ilo[axis]) * spacing[axis]
                    if denom == 0:
                        continue
                    diff = (times[ihi[0], ihi[1], ihi[2]] - times[ilo[0], ilo[1], ilo[2]]) / denom
                    w = ((frac[0] if cx else 1 - frac[0])
                         * (frac[1] if cy else 1 - frac[1])
                         * (frac[2] if cz else 1 - frac[2]))
                    acc += w * diff
        g[axis] = acc
    return g


def _trilinear_value(data: np.ndarray, pos_vox) -> float:
    base = np.floor(pos_vox).astype(int)
    frac = pos_vox - base
    acc = 0.0
    for cx in (0, 1):
        for cy in (0, 1):
            for cz in (0, 1):
                ix = min(max(base[0] + cx, 0), data.shape[0] - 1)
                iy = min(max(base[1] + cy, 0), data.shape[1] - 1)
                iz = min(max(base[2] + cz, 0), data.shape[2] - 1)
                w = ((frac[0] if cx else 1 - frac[0])
                     * (frac[1] if cy else 1 - frac[1])
                     * (frac[2] if cz else 1 - frac[2]))
                acc += w * data[ix, iy, iz]
    return acc


def backtrack_geodesic(times: Volume3D, start, step: float = 0.5,
                       max_steps: int = 100_000) -> GeodesicPath:
    """Descend -grad u from ``start`` to the arrival-time source.

    Midpoint (RK2) stepping with trilinear gradient interpolation;
    ``step`` is a voxel fraction.  A step is only accepted if the
    interpolated arrival time decreases (halving the trial step
    otherwise), which prevents limit cycles in narrow corridors.
    Terminates within one voxel of the source (the field minimum).
    """
    data = times.data.astype(np.float64)
    spacing = np.asarray(times.spacing, dtype=float)
    dims = np.asarray(times.dims)

    src = np.unravel_index(np.argmin(data), data.shape)
    src = np.asarray(src, dtype=float)
    pos = np.asarray(start, dtype=float)
    if np.linalg.norm((pos - src)) <= 1.0:
        pts = np.asarray([pos * spacing])
        return GeodesicPath(points_mm=pts)

    path = [pos.copy()]
    u_here = _trilinear_value(data, pos)
    for _ in range(max_steps):
        g = _trilinear_gradient(data, spacing, pos)
        gn = np.linalg.norm(g)
        if gn < 1e-12:
            raise GeodesicStagnation(
                f"vanishing arrival-time gradient at {pos}",
                np.asarray(path) * spacing)
        trial_step = step
        accepted = False
        for _ in range(20):
            d1 = -(g / gn) / spacing
            d1 /= np.linalg.norm(d1)
            mid = np.clip(pos + 0.5 * trial_step * d1, 0, dims - 1)
            g2 = _trilinear_gradient(data, spacing, mid)
            g2n = np.linalg.norm(g2)
            if g2n < 1e-12:
                g2, g2n = g, gn
            d2 = -(g2 / g2n) / spacing
            d2 /= np.linalg.norm(d2)
            cand = np.clip(pos + trial_step * d2, 0, dims - 1)
            u_cand = _trilinear_value(data, cand)
            if u_cand < u_here:
                pos, u_here, accepted = cand, u_cand, True
                break
            trial_step *= 0.5
        if not accepted:
            # the interpolated gradient can fail to descend at sharp kinks
            # of the arrival field; fall back to one discrete hop along the
            # 6-neighbor with the smallest time (upwind FMM guarantees a
            # strictly smaller neighbor everywhere except the source)
            vox = np.clip(np.rint(pos).astype(int), 0, dims - 1)
            best = None
            for ax in range(3):
                for d in (-1, 1):
                    nb = vox.copy()
                    nb[ax] += d
                    if not (0 <= nb[ax] < dims[ax]):
                        continue
                    val = data[nb[0], nb[1], nb[2]]
                    if best is None or val < best[0]:
                        best = (val, nb)
            if best is None or best[0] >= data[vox[0], vox[1], vox[2]]:
                raise GeodesicStagnation(
                    f"descent stalled at {pos}", np.asarray(path) * spacing)
            pos = best[1].astype(float)
            u_here = best[0]
        path.append(pos.copy())
        if np.linalg.norm(pos - src) <= 1.0:
            path.append(src.copy())
            return GeodesicPath(points_mm=np.asarray(path) * spacing)
    raise GeodesicStagnation(
        f"no convergence to the source within {max_steps} steps",
        np.asarray(path) * spacing)


def fill_tube(seg: Volume3D, path: GeodesicPath, radius_mm: float) -> Volume3D:
    """Union of ``seg`` with all voxels within ``radius_mm`` of the path."""
    if radius_mm <= 0:
        raise ValueError("radius_mm must be > 0")
    if len(path.points_mm) == 0:
        raise ValueError("empty path")
    spacing = np.asarray(seg.spacing)
    dims = np.asarray(seg.dims)
    out = seg.mask().copy()

    pts = np.asarray(path.points_mm, dtype=float)
    segments = list(zip(pts[:-1], pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
    for a, b in segments:
        lo = np.maximum(np.floor((np.minimum(a, b) - radius_mm) / spacing).astype(int), 0)
        hi = np.minimum(np.ceil((np.maximum(a, b) + radius_mm) / spacing).astype(int) + 1, dims)
        if np.any(lo >= hi):
            continue
        xs = np.arange(lo[0], hi[0]) * spacing[0]
        ys = np.arange(lo[1], hi[1]) * spacing[1]
        zs = np.arange(lo[2], hi[2]) * spacing[2]
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        p = np.stack([gx, gy, gz], axis=-1)
        ab = b - a
        denom = float(np.dot(ab, ab))
        if denom < 1e-18:
            d2 = np.sum((p - a) ** 2, axis=-1)
        else:
            t = np.clip(np.einsum("xyzk,k->xyz", p - a, ab) / denom, 0.0, 1.0)
            closest = a + t[..., None] * ab
            d2 = np.sum((p - closest) ** 2, axis=-1)
        hit = d2 <= radius_mm ** 2
        out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] |= hit

    # voxels containing path points are always part of the tube, even when
    # the radius is below half a voxel
    vox = np.rint(pts / spacing).astype(int)
    vox = np.clip(vox, 0, dims - 1)
    out[vox[:, 0], vox[:, 1], vox[:, 2]] = True
    return seg.with_data(out.astype(np.uint8))
