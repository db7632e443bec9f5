"""Field serialization: versioned plain-text header plus raw binary payload.

Layout: a short ASCII header terminated by an ``end`` line, immediately
followed by the array bytes in C order.  The header pins the format version,
field name, grid dimensions, spacing, box half-width, and dtype, so a file is
self-describing and refuses to load under a mismatched reader.
"""

from __future__ import annotations

import numpy as np

FORMAT_MAGIC = "afmass-field"
FORMAT_VERSION = 1
_DTYPES = {"float64": np.float64, "uint8": np.uint8, "bool": np.uint8}


def save_field(path, array: np.ndarray, name: str, h: float, L_box: float) -> None:
    """Write a node field with its grid metadata."""
    arr = np.ascontiguousarray(array)
    stored = arr.dtype.name
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
        stored = "bool"
    if stored not in _DTYPES:
        raise ValueError(f"unsupported dtype {stored}")
    if any(c.isspace() for c in name) or not name:
        raise ValueError("field name must be nonempty without whitespace")
    header = (
        f"{FORMAT_MAGIC} {FORMAT_VERSION}\n"
        f"name {name}\n"
        f"dims {' '.join(str(d) for d in arr.shape)}\n"
        f"h {h!r}\n"
        f"L_box {L_box!r}\n"
        f"dtype {stored}\n"
        f"end\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes())


def load_field(path):
    """Read a field written by save_field.

    Returns ``(array, meta)`` with meta holding name, h, L_box.
    """
    with open(path, "rb") as fh:
        meta = {}
        first = fh.readline().decode("ascii").split()
        if len(first) != 2 or first[0] != FORMAT_MAGIC:
            raise ValueError("not a field file")
        if int(first[1]) != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {first[1]}")
        dims = None
        dtype = None
        while True:
            line = fh.readline().decode("ascii").strip()
            if line == "end":
                break
            if not line:
                raise ValueError("truncated header")
            key, _, val = line.partition(" ")
            if key == "name":
                meta["name"] = val
            elif key == "dims":
                dims = tuple(int(x) for x in val.split())
            elif key == "h":
                meta["h"] = float(val)
            elif key == "L_box":
                meta["L_box"] = float(val)
            elif key == "dtype":
                if val not in _DTYPES:
                    raise ValueError(f"unsupported dtype {val}")
                dtype = _DTYPES[val]
                meta["dtype"] = val
            else:
                raise ValueError(f"unknown header key {key!r}")
        if dims is None or dtype is None:
            raise ValueError("incomplete header")
        data = np.frombuffer(fh.read(), dtype=dtype)
        if data.size != int(np.prod(dims)):
            raise ValueError("payload size does not match dims")
        out = data.reshape(dims).copy()
        if meta.get("dtype") == "bool":
            out = out.astype(np.bool_)
        return out, meta


def save_stl(path, verts: np.ndarray, faces: np.ndarray, name: str = "mesh") -> None:
    """Export a triangle mesh as ASCII STL."""
    tri = verts[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.where(norm > 0, n / np.maximum(norm, 1e-300), 0.0)
    lines = [f"solid {name}"]
    for nm, t in zip(n, tri):
        lines.append(f" facet normal {nm[0]:.9e} {nm[1]:.9e} {nm[2]:.9e}")
        lines.append("  outer loop")
        for v in t:
            lines.append(f"   vertex {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}")
        lines.append("  endloop")
        lines.append(" endfacet")
    lines.append(f"endsolid {name}\n")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
