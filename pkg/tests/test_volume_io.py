import gzip

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vesselmend.volume import (
    Volume3D, VolumeHeader, NrrdError, read_nrrd, write_nrrd,
    flat_index, unflatten_index, MASK_U8, SCALAR_F32,
)


def test_read_all_zero_raw(tmp_path):
    path = tmp_path / "z.nrrd"
    path.write_bytes(
        b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 2 2 2\nencoding: raw\n\n" + b"\x00" * 8)
    vol = read_nrrd(path)
    assert vol.dims == (2, 2, 2)
    assert vol.dtype == MASK_U8
    assert not vol.data.any()


def test_single_voxel_raw_payload(tmp_path):
    vol = Volume3D((1, 1, 1), (1, 1, 1), MASK_U8, np.ones((1, 1, 1), np.uint8))
    path = tmp_path / "one.nrrd"
    write_nrrd(vol, path)
    payload = path.read_bytes().split(b"\n\n", 1)[1]
    assert payload == b"\x01"


def test_round_trip_identity(tmp_path):
    data = (np.arange(24) % 2).astype(np.uint8)
    vol = Volume3D((4, 3, 2), (0.5, 0.5, 1.0), MASK_U8, data)
    path = tmp_path / "v.nrrd"
    write_nrrd(vol, path)
    back = read_nrrd(path)
    assert back.dims == vol.dims
    assert back.spacing == (0.5, 0.5, 1.0)
    assert np.array_equal(back.data, vol.data)


def test_truncated_payload_rejected(tmp_path):
    vol = Volume3D((4, 3, 2), (1, 1, 1), MASK_U8, np.zeros(24, np.uint8))
    path = tmp_path / "v.nrrd"
    write_nrrd(vol, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-1])  # 23 data bytes for sizes 4 3 2
    with pytest.raises(NrrdError, match="length mismatch"):
        read_nrrd(path)


def test_gzip_smaller_for_constant_volume(tmp_path):
    vol = Volume3D((64, 64, 64), (1, 1, 1), MASK_U8, np.ones((64, 64, 64), np.uint8))
    raw = tmp_path / "raw.nrrd"
    gz = tmp_path / "gz.nrrd"
    write_nrrd(vol, raw, encoding="raw")
    write_nrrd(vol, gz, encoding="gzip")
    assert gz.stat().st_size < raw.stat().st_size
    assert np.array_equal(read_nrrd(gz).data, vol.data)


def test_mask_value_validation(tmp_path):
    path = tmp_path / "bad.nrrd"
    path.write_bytes(
        b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 1 1 2\nencoding: raw\n\n\x00\x07")
    with pytest.raises(NrrdError, match="outside"):
        read_nrrd(path)


@pytest.mark.parametrize("header,err", [
    (b"NRRD0004\ntype: int16\ndimension: 3\nsizes: 1 1 1\n\n\x00", "unsupported type"),
    (b"NRRD0004\ntype: uint8\ndimension: 2\nsizes: 1 1\n\n\x00", "dimension"),
    (b"NRRD0004\ntype: float\ndimension: 3\nsizes: 1 1 1\nendian: big\n\n\x00\x00\x00\x00", "endian"),
    (b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 1 1 1\nencoding: hex\n\n\x00", "encoding"),
    (b"JUNK\n\n", "magic"),
])
def test_malformed_headers(tmp_path, header, err):
    path = tmp_path / "bad.nrrd"
    path.write_bytes(header)
    with pytest.raises(NrrdError, match=err):
        read_nrrd(path)


def test_header_field_order(tmp_path):
    vol = Volume3D((2, 2, 2), (1, 1, 1), SCALAR_F32, np.zeros(8, np.float32))
    path = tmp_path / "v.nrrd"
    write_nrrd(vol, path)
    keys = [line.split(":")[0] for line in
            path.read_bytes().split(b"\n\n")[0].decode().splitlines()[1:]]
    assert keys == ["type", "dimension", "sizes", "space directions", "encoding", "endian"]


def test_unknown_fields_ignored_on_read(tmp_path):
    path = tmp_path / "v.nrrd"
    path.write_bytes(
        b"NRRD0004\ntype: uint8\ndimension: 3\nsizes: 1 1 1\n"
        b"content: whatever\nencoding: raw\n\n\x01")
    assert read_nrrd(path).data[0, 0, 0] == 1


@settings(max_examples=25, deadline=None)
@given(
    dims=st.tuples(*[st.integers(1, 6)] * 3),
    spacing=st.tuples(*[st.floats(0.25, 3.0, allow_nan=False)] * 3),
    dtype=st.sampled_from([MASK_U8, SCALAR_F32]),
    encoding=st.sampled_from(["raw", "gzip"]),
    seed=st.integers(0, 2 ** 31),
)
def test_round_trip_property(tmp_path_factory, dims, spacing, dtype, encoding, seed):
    rng = np.random.default_rng(seed)
    n = dims[0] * dims[1] * dims[2]
    if dtype == MASK_U8:
        data = rng.integers(0, 2, n).astype(np.uint8)
    else:
        data = rng.normal(size=n).astype(np.float32)
    vol = Volume3D(dims, spacing, dtype, data)
    path = tmp_path_factory.mktemp("rt") / "v.nrrd"
    write_nrrd(vol, path, encoding=encoding)
    back = read_nrrd(path)
    assert back.dims == vol.dims
    assert back.dtype == vol.dtype
    assert back.spacing == vol.spacing
    assert np.array_equal(back.data, vol.data)  # bit-exact


def test_flat_index_bijection():
    dims = (4, 3, 2)
    seen = set()
    for z in range(2):
        for y in range(3):
            for x in range(4):
                idx = flat_index(dims, x, y, z)
                assert unflatten_index(dims, idx) == (x, y, z)
                seen.add(idx)
    assert seen == set(range(24))


def test_flat_order_matches_x_fastest():
    data = np.arange(24, dtype=np.float32)
    vol = Volume3D((4, 3, 2), (1, 1, 1), SCALAR_F32, data)
    assert vol.data[1, 0, 0] == 1
    assert vol.data[0, 1, 0] == 4
    assert vol.data[0, 0, 1] == 12
    assert np.array_equal(vol.flat(), data)
