import numpy as np
import pytest

from vesselmend.volume import Volume3D, MASK_U8


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mask_volume(arr, spacing=(1.0, 1.0, 1.0)) -> Volume3D:
    return Volume3D.from_array(np.asarray(arr).astype(np.uint8), spacing=spacing, dtype=MASK_U8)


def straight_tube(dims=(50, 21, 21), radius=3.0, axis=0) -> Volume3D:
    """Solid cylinder along `axis`, centered in the other two."""
    grid = np.indices(dims)
    others = [a for a in range(3) if a != axis]
    c = [(dims[a] - 1) / 2.0 for a in range(3)]
    d2 = (grid[others[0]] - c[others[0]]) ** 2 + (grid[others[1]] - c[others[1]]) ** 2
    m = d2 <= radius ** 2
    # keep the tube off the volume border along its axis
    sl = [slice(None)] * 3
    sl[axis] = slice(0, 5)
    m[tuple(sl)] = False
    sl[axis] = slice(dims[axis] - 5, dims[axis])
    m[tuple(sl)] = False
    return mask_volume(m)
