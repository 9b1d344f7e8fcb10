"""Binary morphology, smoothing, distance transform, and thinning on volumes.

Erosion/dilation use either a 6-connected cross or a 26-connected cube
neighborhood; out-of-bounds voxels count as background, so foreground
touching the border erodes.  The edge map is the voxelwise difference
``dilate - erode`` (the set D \\ E).  Thinning delegates to the classic
template-based parallel 3D algorithm (Lee et al.), which preserves the
homotopy type of the foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.morphology import skeletonize as _skimage_skeletonize

from .volume import Volume3D, MASK_U8, SCALAR_F32


@dataclass(frozen=True)
class StructuringElement:
    shape: str = "cross6"  # cross6 | cube26
    radius: int = 1

    def __post_init__(self):
        if self.shape not in ("cross6", "cube26"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 1:
            raise ValueError("radius must be >= 1")

    def footprint(self) -> np.ndarray:
        """Dense boolean footprint, symmetric about its center."""
        r = self.radius
        size = 2 * r + 1
        if self.shape == "cube26":
            return np.ones((size, size, size), dtype=bool)
        # cross6 radius r = voxels with L1 distance <= r
        ax = np.arange(-r, r + 1)
        l1 = np.abs(ax)[:, None, None] + np.abs(ax)[None, :, None] + np.abs(ax)[None, None, :]
        return l1 <= r


def _require_mask(vol: Volume3D):
    if vol.dtype != MASK_U8:
        raise ValueError(f"expected a mask volume, got dtype {vol.dtype!r}")


def morph(vol: Volume3D, op: str, se: StructuringElement = StructuringElement()) -> Volume3D:
    """Binary erosion (min over the SE neighborhood) or dilation (max)."""
    _require_mask(vol)
    fp = se.footprint()
    m = vol.mask()
    if op == "erode":
        out = ndimage.binary_erosion(m, structure=fp, border_value=0)
    elif op == "dilate":
        out = ndimage.binary_dilation(m, structure=fp, border_value=0)
    else:
        raise ValueError(f"op must be 'erode' or 'dilate', got {op!r}")
    return vol.with_data(out.astype(np.uint8))


def edge_map(vol: Volume3D, se: StructuringElement = StructuringElement()) -> Volume3D:
    """|dilate - erode|: the morphological boundary shell of the foreground."""
    _require_mask(vol)
    d = morph(vol, "dilate", se).data
    e = morph(vol, "erode", se).data
    return vol.with_data(np.abs(d.astype(np.int16) - e.astype(np.int16)).astype(np.uint8))


def gaussian_smooth(vol: Volume3D, sigma: float) -> Volume3D:
    """Separable Gaussian blur with kernel truncated at 3*sigma.

    ``sigma`` is in mm; kernels are renormalized at the borders so a
    constant volume stays constant.  ``sigma == 0`` is the identity cast
    to float32.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    data = vol.data.astype(np.float64)
    if sigma == 0:
        return Volume3D(vol.dims, vol.spacing, SCALAR_F32, data.astype(np.float32))
    out = data
    norm = np.ones_like(data)
    for axis in range(3):
        sig_vox = sigma / vol.spacing[axis]
        if sig_vox == 0:
            continue
        out = ndimage.gaussian_filter1d(out, sig_vox, axis=axis, mode="constant", truncate=3.0)
        norm = ndimage.gaussian_filter1d(norm, sig_vox, axis=axis, mode="constant", truncate=3.0)
    out = out / norm
    return Volume3D(vol.dims, vol.spacing, SCALAR_F32, out.astype(np.float32))


def distance_transform(vol: Volume3D) -> Volume3D:
    """Exact Euclidean distance (mm) to the nearest background voxel center.

    Background outside the volume bounds is assumed, so an all-foreground
    volume still gets finite distances.  Background voxels map to 0.
    """
    _require_mask(vol)
    padded = np.pad(vol.mask(), 1, constant_values=False)
    dt = ndimage.distance_transform_edt(padded, sampling=vol.spacing)
    dt = dt[1:-1, 1:-1, 1:-1]
    return Volume3D(vol.dims, vol.spacing, SCALAR_F32, dt.astype(np.float32))


def skeletonize(vol: Volume3D) -> Volume3D:
    """Thin a mask to a unit-width, 26-connected skeleton.

    Topology-preserving parallel thinning (Lee et al. templates via
    scikit-image): the skeleton is a subset of the foreground with the
    same number of 26-connected components and the same Euler
    characteristic.
    """
    _require_mask(vol)
    if not vol.data.any():
        return vol.with_data(np.zeros(vol.dims, dtype=np.uint8))
    skel = _skimage_skeletonize(vol.mask(), method="lee")
    return vol.with_data((skel > 0).astype(np.uint8))
