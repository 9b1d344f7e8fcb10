"""Axis-aligned 3D scalar grids and a bit-exact NRRD subset reader/writer.

Volumes are stored as numpy arrays of shape ``(nx, ny, nz)``; the on-disk
layout is x-fastest (Fortran ravel of that shape).  Only a narrow NRRD
subset is supported: ``NRRD0004``, uint8 masks or little-endian float32
scalars, raw or gzip encoding, diagonal ``space directions``.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field

import numpy as np

MASK_U8 = "mask-u8"
SCALAR_F32 = "scalar-f32"

_NRRD_MAGIC = "NRRD0004"


class NrrdError(ValueError):
    """Malformed or unsupported NRRD content."""


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    dtype: str
    encoding: str = "raw"
    endianness: str = "little"


@dataclass
class Volume3D:
    """A 3D grid with physical voxel spacing in mm.

    ``data`` has shape ``dims = (nx, ny, nz)``; masks are uint8 in {0, 1},
    scalars are finite float32.  Instances are treated as immutable after
    construction.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    dtype: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise ValueError(f"dims must be three positive counts, got {self.dims}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive lengths, got {self.spacing}")
        if self.dtype not in (MASK_U8, SCALAR_F32):
            raise ValueError(f"unknown dtype {self.dtype!r}")
        want = np.uint8 if self.dtype == MASK_U8 else np.float32
        arr = np.asarray(self.data)
        if arr.size != self.dims[0] * self.dims[1] * self.dims[2]:
            raise ValueError(
                f"data length {arr.size} does not match dims {self.dims}"
            )
        arr = arr.reshape(self.dims, order="F") if arr.ndim == 1 else arr.reshape(self.dims)
        self.data = np.ascontiguousarray(arr.astype(want, copy=False))
        if self.dtype == MASK_U8:
            bad = np.setdiff1d(np.unique(self.data), [0, 1])
            if bad.size:
                raise ValueError(f"mask volume contains values outside {{0,1}}: {bad[:5]}")
        else:
            if not np.all(np.isfinite(self.data)):
                raise ValueError("scalar volume contains non-finite values")

    @classmethod
    def from_array(cls, arr, spacing=(1.0, 1.0, 1.0), dtype=None) -> "Volume3D":
        arr = np.asarray(arr)
        if dtype is None:
            dtype = MASK_U8 if arr.dtype == np.uint8 or arr.dtype == bool else SCALAR_F32
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        return cls(dims=arr.shape, spacing=spacing, dtype=dtype, data=arr)

    def mask(self) -> np.ndarray:
        """Boolean view of a mask volume."""
        if self.dtype != MASK_U8:
            raise ValueError("not a mask volume")
        return self.data.astype(bool)

    def with_data(self, arr, dtype=None) -> "Volume3D":
        """Same grid, new values."""
        return Volume3D(dims=self.dims, spacing=self.spacing,
                        dtype=self.dtype if dtype is None else dtype, data=np.asarray(arr))

    def flat(self) -> np.ndarray:
        """x-fastest flat view: idx = x + nx*(y + ny*z)."""
        return self.data.ravel(order="F")

    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


def flat_index(dims, x, y, z) -> int:
    nx, ny, _ = dims
    return x + nx * (y + ny * z)


def unflatten_index(dims, idx) -> tuple[int, int, int]:
    nx, ny, _ = dims
    x = idx % nx
    y = (idx // nx) % ny
    z = idx // (nx * ny)
    return x, y, z


_TYPE_TO_FIELD = {MASK_U8: "uint8", SCALAR_F32: "float"}
_FIELD_TO_TYPE = {
    "uint8": MASK_U8, "uchar": MASK_U8, "unsigned char": MASK_U8,
    "float": SCALAR_F32, "float32": SCALAR_F32,
}


def _parse_header(lines: list[str]) -> VolumeHeader:
    fields: dict[str, str] = {}
    for line in lines:
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise NrrdError(f"malformed header line: {line!r}")
        key, _, value = line.partition(":")
        fields[key.strip().lower()] = value.lstrip("= ").strip()

    if "type" not in fields or "dimension" not in fields or "sizes" not in fields:
        raise NrrdError("header missing required field (type/dimension/sizes)")
    if fields["dimension"] != "3":
        raise NrrdError(f"unsupported dimension {fields['dimension']!r} (only 3)")
    dtype = _FIELD_TO_TYPE.get(fields["type"].lower())
    if dtype is None:
        raise NrrdError(f"unsupported type {fields['type']!r}")

    sizes = fields["sizes"].split()
    if len(sizes) != 3:
        raise NrrdError(f"sizes must have 3 entries, got {fields['sizes']!r}")
    dims = tuple(int(s) for s in sizes)

    if "space directions" in fields:
        spacing = _parse_space_directions(fields["space directions"])
    elif "spacings" in fields:
        vals = fields["spacings"].split()
        if len(vals) != 3:
            raise NrrdError(f"spacings must have 3 entries, got {fields['spacings']!r}")
        spacing = tuple(float(v) for v in vals)
    else:
        spacing = (1.0, 1.0, 1.0)

    encoding = fields.get("encoding", "raw").lower()
    if encoding in ("gz", "gzip"):
        encoding = "gzip"
    elif encoding != "raw":
        raise NrrdError(f"unsupported encoding {fields.get('encoding')!r}")

    endian = fields.get("endian", "little").lower()
    if endian != "little":
        raise NrrdError(f"unsupported endianness {endian!r} (little only)")

    return VolumeHeader(dims=dims, spacing=spacing, dtype=dtype, encoding=encoding)


def _parse_space_directions(text: str) -> tuple[float, float, float]:
    # expect three parenthesized vectors; off-diagonal terms must be zero
    vecs = []
    for chunk in text.replace("(", " ").split(")"):
        chunk = chunk.strip().strip(",")
        if chunk:
            vecs.append([float(v) for v in chunk.replace(",", " ").split()])
    if len(vecs) != 3 or any(len(v) != 3 for v in vecs):
        raise NrrdError(f"space directions must be three 3-vectors, got {text!r}")
    spacing = []
    for axis, vec in enumerate(vecs):
        for j, v in enumerate(vec):
            if j != axis and v != 0.0:
                raise NrrdError("only diagonal space directions are supported")
        if vec[axis] <= 0:
            raise NrrdError("space directions must have positive diagonal")
        spacing.append(vec[axis])
    return tuple(spacing)


def read_nrrd(path) -> Volume3D:
    """Read a volume from the supported NRRD subset.

    Raises :class:`NrrdError` on malformed headers, unsupported fields, or
    payload length mismatch; mask volumes must contain only {0, 1}.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        header_end = blob.index(b"\n\n")
    except ValueError:
        raise NrrdError("no blank line terminating the header") from None
    header_text = blob[:header_end].decode("ascii", errors="replace")
    lines = header_text.splitlines()
    if not lines or not lines[0].startswith("NRRD"):
        raise NrrdError("missing NRRD magic")
    header = _parse_header(lines[1:])

    payload = blob[header_end + 2:]
    if header.encoding == "gzip":
        try:
            payload = gzip.decompress(payload)
        except OSError as exc:
            raise NrrdError(f"bad gzip payload: {exc}") from exc

    np_dtype = np.uint8 if header.dtype == MASK_U8 else np.dtype("<f4")
    expected = header.dims[0] * header.dims[1] * header.dims[2] * np_dtype.itemsize \
        if header.dtype == SCALAR_F32 else header.dims[0] * header.dims[1] * header.dims[2]
    if len(payload) != expected:
        raise NrrdError(
            f"data length mismatch: expected {expected} bytes for sizes "
            f"{header.dims}, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=np_dtype)
    try:
        return Volume3D(dims=header.dims, spacing=header.spacing, dtype=header.dtype, data=arr)
    except ValueError as exc:
        raise NrrdError(str(exc)) from exc


def write_nrrd(vol: Volume3D, path, encoding: str = "raw") -> None:
    """Write a volume; the output round-trips bit-exactly through read_nrrd."""
    if encoding not in ("raw", "gzip"):
        raise ValueError(f"encoding must be raw or gzip, got {encoding!r}")
    nx, ny, nz = vol.dims
    sx, sy, sz = vol.spacing
    lines = [
        _NRRD_MAGIC,
        f"type: {_TYPE_TO_FIELD[vol.dtype]}",
        "dimension: 3",
        f"sizes: {nx} {ny} {nz}",
        f"space directions: ({sx!r},0,0) (0,{sy!r},0) (0,0,{sz!r})",
        f"encoding: {encoding}",
    ]
    if vol.dtype == SCALAR_F32:
        lines.append("endian: little")
    header = "\n".join(lines) + "\n\n"

    np_dtype = np.uint8 if vol.dtype == MASK_U8 else np.dtype("<f4")
    payload = np.ascontiguousarray(vol.flat().astype(np_dtype, copy=False)).tobytes()
    if encoding == "gzip":
        payload = gzip.compress(payload, mtime=0)  # fixed mtime: byte-identical reruns
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload)
