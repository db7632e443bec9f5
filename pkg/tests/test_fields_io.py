"""Scalar-field container format and STL export."""

import numpy as np
import pytest

from afmass.fields_io import load_field, save_field, save_stl

RNG = np.random.default_rng(3)


class TestFieldFormat:
    def test_float_round_trip(self, tmp_path):
        a = RNG.normal(size=(7, 7, 7))
        p = tmp_path / "u.field"
        save_field(p, a, "u1", h=0.25, L_box=6.0)
        b, meta = load_field(p)
        assert np.array_equal(a, b)
        assert meta["name"] == "u1"
        assert meta["h"] == 0.25
        assert meta["L_box"] == 6.0

    def test_bool_round_trip(self, tmp_path):
        mask = RNG.random(size=(5, 5, 5)) > 0.5
        p = tmp_path / "mask.field"
        save_field(p, mask, "mask", h=0.5, L_box=2.0)
        b, meta = load_field(p)
        assert b.dtype == np.bool_
        assert np.array_equal(mask, b)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "junk.field"
        p.write_bytes(b"not-a-field\n")
        with pytest.raises(ValueError):
            load_field(p)

    def test_truncated_payload_rejected(self, tmp_path):
        a = RNG.normal(size=(4, 4, 4))
        p = tmp_path / "u.field"
        save_field(p, a, "u", h=0.5, L_box=2.0)
        data = p.read_bytes()
        p.write_bytes(data[:-16])
        with pytest.raises(ValueError):
            load_field(p)


class TestStl:
    def test_triangle_counts_and_header(self, tmp_path):
        verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
        faces = np.array([[0, 1, 2], [0, 1, 3]])
        p = tmp_path / "b.stl"
        save_stl(p, verts, faces, name="boundary")
        text = p.read_text()
        assert text.startswith("solid boundary")
        assert text.count("facet normal") == 2
        assert text.rstrip().endswith("endsolid boundary")
