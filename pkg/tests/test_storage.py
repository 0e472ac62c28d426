import numpy as np
import pytest

from fbsed import storage


def test_matrix_roundtrip_bit_exact(tmp_path, rng):
    arr = rng.standard_normal((128, 37))
    path = tmp_path / "feat.fbm"
    storage.save_matrix(path, arr)
    back = storage.load_matrix(path)
    assert back.dtype == arr.dtype
    assert back.shape == arr.shape
    assert np.array_equal(back.view(np.uint64), arr.view(np.uint64))


def test_matrix_roundtrip_float32_and_int(tmp_path, rng):
    for arr in (rng.standard_normal((4, 5)).astype(np.float32),
                rng.integers(0, 100, size=(3, 2)),
                np.array(3.5)):
        path = tmp_path / "x.fbm"
        storage.save_matrix(path, arr)
        back = storage.load_matrix(path)
        assert back.shape == np.asarray(arr).shape
        assert np.array_equal(back, arr)


def test_bundle_roundtrip(tmp_path, rng):
    arrays = {"a/w": rng.standard_normal((3, 4)).astype(np.float32),
              "b": np.arange(7)}
    meta = {"kind": "test", "nested": {"x": 1}}
    path = tmp_path / "bundle.fbb"
    storage.save_bundle(path, arrays, meta)
    back, back_meta = storage.load_bundle(path)
    assert back_meta == meta
    assert set(back) == set(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])


def test_deterministic_bytes(tmp_path, rng):
    arr = rng.standard_normal((16, 8))
    p1, p2 = tmp_path / "a.fbm", tmp_path / "b.fbm"
    storage.save_matrix(p1, arr)
    storage.save_matrix(p2, arr)
    assert p1.read_bytes() == p2.read_bytes()
    b1, b2 = tmp_path / "a.fbb", tmp_path / "b.fbb"
    storage.save_bundle(b1, {"x": arr}, {"m": 1})
    storage.save_bundle(b2, {"x": arr}, {"m": 1})
    assert b1.read_bytes() == b2.read_bytes()


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "bad.fbm"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError):
        storage.load_matrix(path)
    with pytest.raises(ValueError):
        storage.load_bundle(path)
