"""Balanced splitting, code assignment and encoding persistence."""

import numpy as np
import pytest

from symcode import (InvalidBits, SurfaceEncoding, UnassignedCode,
                     balanced_two_means, build_encoding, code_bit,
                     content_hash, decode, encode_mesh_one_to_one,
                     encode_mesh_symcode, load_encoding, save_encoding)
from symcode.errors import ParseError

from conftest import star_tube, tube_annotation


def separated_clusters(rng, k, per=5, spread=0.05):
    centers = rng.uniform(-1, 1, size=(k, 3)) * 100.0
    pts = (centers[:, None] + rng.normal(scale=spread, size=(k, per, 3)))
    return centers, pts.reshape(-1, 3)


def test_balanced_two_means_balance_and_determinism():
    rng = np.random.default_rng(2)
    for n in (2, 3, 17, 64, 101):
        pts = rng.normal(size=(n, 3))
        left, right = balanced_two_means(pts, seed=7)
        assert abs(len(left) - len(right)) <= 1
        assert sorted(np.concatenate([left, right])) == list(range(n))
        left2, right2 = balanced_two_means(pts, seed=7)
        assert np.array_equal(left, left2)
        assert np.array_equal(right, right2)


def test_balanced_two_means_separates_blobs():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(20, 3)) + [100, 0, 0]
    b = rng.normal(size=(20, 3)) - [100, 0, 0]
    pts = np.concatenate([a, b])
    left, right = balanced_two_means(pts)
    sides = {tuple(sorted(left)), tuple(sorted(right))}
    assert sides == {tuple(range(20)), tuple(range(20, 40))}


def test_codes_balanced_at_every_split_node():
    # recount the split tree purely from the emitted codes: at each prefix
    # node the two child populations differ by at most one group
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(37, 3)) * 10
    d = 6
    enc = build_encoding(pts, d=d)
    codes = np.sort(enc.group_codes.astype(np.uint64))
    for depth in range(d):
        prefixes = codes >> np.uint64(d - depth)
        bits = (codes >> np.uint64(d - depth - 1)) & np.uint64(1)
        for p in np.unique(prefixes):
            sel = bits[prefixes == p]
            if len(sel) <= 1:
                continue
            zeros, ones = (sel == 0).sum(), (sel == 1).sum()
            assert abs(int(zeros) - int(ones)) <= 1


def test_bijection_on_power_of_two_groups():
    rng = np.random.default_rng(5)
    for d in (3, 5):
        _, pts = separated_clusters(rng, 2 ** d, per=1)
        enc = build_encoding(pts, d=d)
        assert sorted(enc.group_codes) == list(range(2 ** d))


def test_two_groups_split_on_top_bit():
    rng = np.random.default_rng(6)
    for d in (4, 8, 16):
        pts = np.array([[50.0, 0, 0], [-50.0, 0, 0]])
        enc = build_encoding(pts, d=d)
        assert set(int(c) for c in enc.group_codes) == {0, 2 ** (d - 1)}


def test_code_bit_is_msb_first():
    codes = np.array([0b1010, 0b0110], dtype=np.uint32)
    d = 4
    assert np.array_equal(code_bit(codes, 0, d), [1, 0])
    assert np.array_equal(code_bit(codes, 1, d), [0, 1])
    assert np.array_equal(code_bit(codes, 2, d), [1, 1])
    assert np.array_equal(code_bit(codes, 3, d), [0, 0])


def test_invalid_bits_rejected():
    pts = np.random.default_rng(7).normal(size=(5, 3))
    for d in (0, -1, 33):
        with pytest.raises(InvalidBits):
            build_encoding(pts, d=d)


def test_decode_round_trip_and_unassigned():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(30, 3)) * 5
    enc = build_encoding(pts, d=8)
    for gi, code in enumerate(enc.group_codes):
        main, members = decode(enc, int(code))
        assert members == list(enc.group_members[gi])
        assert np.allclose(main, enc.group_mains[gi])
    used = set(int(c) for c in enc.group_codes)
    free = next(c for c in range(2 ** 8) if c not in used)
    with pytest.raises(UnassignedCode):
        decode(enc, free)
    with pytest.raises(UnassignedCode):
        enc.decode(2 ** 8 + 5)


def test_vertex_codes_follow_group_codes():
    mesh = star_tube(n_wedges=4)
    enc = encode_mesh_symcode(mesh, tube_annotation(4), d=10, seed=3)
    for gi, members in enumerate(enc.group_members):
        for j in members:
            assert enc.vertex_codes[j] == enc.group_codes[gi]
            assert enc.code_of(j) == enc.group_codes[gi]
    assert enc.vertex_count == mesh.vertex_count
    assert enc.group_count == mesh.vertex_count // 4


def test_symcode_equals_one_to_one_without_symmetry(small_blob):
    from symcode import SymmetryAnnotation
    empty = SymmetryAnnotation.from_json_dict({})
    a = encode_mesh_symcode(small_blob, empty, d=12, seed=5)
    b = encode_mesh_one_to_one(small_blob, d=12, seed=5)
    assert np.array_equal(a.vertex_codes, b.vertex_codes)
    assert a.group_count == small_blob.vertex_count


def test_same_seed_reproduces_codes():
    # splits are geometry driven (farthest pair + two means), so the seed
    # only breaks ties; the guarantee is exact reproducibility per seed
    mesh = star_tube(n_wedges=2)
    ann = tube_annotation(2)
    a = encode_mesh_symcode(mesh, ann, d=12, seed=9)
    b = encode_mesh_symcode(mesh, ann, d=12, seed=9)
    assert np.array_equal(a.vertex_codes, b.vertex_codes)
    assert np.array_equal(a.group_codes, b.group_codes)
    assert a.group_members == b.group_members


def test_save_load_round_trip_and_hash(tmp_path):
    mesh = star_tube(n_wedges=4)
    enc = encode_mesh_symcode(mesh, tube_annotation(4), d=16, seed=0)
    p1, p2 = tmp_path / "a.symenc", tmp_path / "b.symenc"
    save_encoding(enc, p1)
    save_encoding(enc, p2)
    assert p1.read_bytes() == p2.read_bytes()
    back = load_encoding(p1)
    assert back.d == enc.d and back.seed == enc.seed
    assert back.kind == enc.kind
    assert np.array_equal(back.vertex_codes, enc.vertex_codes)
    assert np.array_equal(back.group_codes, enc.group_codes)
    assert back.group_members == enc.group_members
    assert np.allclose(back.group_mains, enc.group_mains, atol=0)
    assert content_hash(back) == content_hash(enc)


def test_save_format_switches_on_size(tmp_path):
    small = build_encoding(np.random.default_rng(1).normal(size=(40, 3)), d=8)
    mesh = star_tube(n_wedges=4, n_arc=12, n_z=24)
    assert mesh.vertex_count > 1024
    big = encode_mesh_one_to_one(mesh, d=12)
    ps = tmp_path / "small.symenc"
    pb = tmp_path / "big.symenc"
    save_encoding(small, ps)
    save_encoding(big, pb)
    assert b"\x00" not in ps.read_bytes()  # small stays readable json
    assert b'"codes_binary"' in pb.read_bytes() or \
        pb.read_bytes().count(b"\n") < big.vertex_count
    assert load_encoding(pb).vertex_count == big.vertex_count
    # explicit override forces the binary layout for small files too
    pf = tmp_path / "forced.symenc"
    save_encoding(small, pf, binary=True)
    assert load_encoding(pf).vertex_count == small.vertex_count


def test_tampered_file_rejected(tmp_path):
    enc = build_encoding(np.random.default_rng(2).normal(size=(20, 3)), d=8)
    path = tmp_path / "enc.symenc"
    save_encoding(enc, path)
    raw = bytearray(path.read_bytes())
    # flip one code byte past the header
    raw[-3] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ParseError):
        load_encoding(path)
    path.write_text("{}")
    with pytest.raises(ParseError):
        load_encoding(path)


def test_build_encoding_with_groups():
    rng = np.random.default_rng(9)
    mains = rng.normal(size=(6, 3)) * 20
    members = tuple((2 * i, 2 * i + 1) for i in range(6))
    v2g = np.repeat(np.arange(6), 2)
    enc = build_encoding(mains, d=5, group_members=members,
                         vertex_to_group=v2g)
    assert enc.vertex_count == 12
    assert enc.group_count == 6
    for gi in range(6):
        assert enc.vertex_codes[2 * gi] == enc.vertex_codes[2 * gi + 1]
    assert len(set(int(c) for c in enc.group_codes)) == 6
