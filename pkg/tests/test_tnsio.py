import numpy as np
import pytest

from statsvd.tnsio import read_long_csv, read_tns, write_long_csv, write_tns


def test_tns_roundtrip_bit_exact(tmp_path, rng):
    t = rng.standard_normal((3, 4, 5))
    path = tmp_path / "t.tns"
    write_tns(path, t)
    back = read_tns(path)
    np.testing.assert_array_equal(back, t)
    assert back.shape == t.shape


def test_tns_rewrite_byte_identical(tmp_path, rng):
    t = rng.standard_normal((2, 6))
    p1, p2 = tmp_path / "a.tns", tmp_path / "b.tns"
    write_tns(p1, t)
    write_tns(p2, read_tns(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_tns_header_layout(tmp_path):
    t = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "t.tns"
    write_tns(path, t)
    raw = path.read_bytes()
    assert raw[:4] == b"TNS1"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 3
    assert len(raw) == 24 + 6 * 8


def test_tns_bad_magic(tmp_path):
    path = tmp_path / "bad.tns"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        read_tns(path)


def test_tns_truncated_payload(tmp_path, rng):
    path = tmp_path / "t.tns"
    write_tns(path, rng.standard_normal((2, 3)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="entries"):
        read_tns(path)


def test_tns_trailing_garbage(tmp_path, rng):
    path = tmp_path / "t.tns"
    write_tns(path, rng.standard_normal((2, 3)))
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(ValueError, match="trailing"):
        read_tns(path)


def test_tns_rejects_vectors(tmp_path):
    with pytest.raises(ValueError):
        write_tns(tmp_path / "v.tns", np.arange(3.0))


def test_long_csv_roundtrip(tmp_path, rng):
    t = rng.standard_normal((3, 2, 4))
    path = tmp_path / "t.csv"
    write_long_csv(path, t, mode_names=["age", "year", "country"])
    back, names = read_long_csv(path)
    np.testing.assert_array_equal(back, t)
    assert names == ["age", "year", "country"]


def test_long_csv_value_identical_rewrite(tmp_path, rng):
    t = rng.standard_normal((2, 3))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_long_csv(p1, t)
    back, names = read_long_csv(p1)
    write_long_csv(p2, back, mode_names=names)
    assert p1.read_text() == p2.read_text()


def test_long_csv_missing_entry(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("m1,m2,value\n1,1,1.0\n2,2,4.0\n")
    with pytest.raises(ValueError, match="missing"):
        read_long_csv(path)


def test_long_csv_duplicate_entry(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("m1,m2,value\n1,1,1.0\n1,1,2.0\n1,2,1.0\n2,1,1.0\n2,2,1.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_long_csv(path)


def test_long_csv_bad_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_long_csv(path)
