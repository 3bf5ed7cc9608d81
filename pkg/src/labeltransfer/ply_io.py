"""PLY point-cloud reader/writer (ASCII and binary little-endian).

Vertex properties: x, y, z (float32, required); red, green, blue (uint8);
nx, ny, nz (float32); frame (int32); label (int32); confidence (float32).
Unknown scalar properties are read and ignored.
"""
from __future__ import annotations

import numpy as np

from .errors import FileFormatError
from .pointcloud import PointCloud

_TYPES = {
    "float": ("<f4", "float"),
    "float32": ("<f4", "float"),
    "double": ("<f8", "double"),
    "float64": ("<f8", "double"),
    "uchar": ("<u1", "uchar"),
    "uint8": ("<u1", "uchar"),
    "char": ("<i1", "char"),
    "int8": ("<i1", "char"),
    "short": ("<i2", "short"),
    "ushort": ("<u2", "ushort"),
    "int": ("<i4", "int"),
    "int32": ("<i4", "int"),
    "uint": ("<u4", "uint"),
    "uint32": ("<u4", "uint"),
}


def write_ply(path, cloud: PointCloud, binary=True):
    n = len(cloud)
    props = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    cols = [cloud.positions[:, 0], cloud.positions[:, 1], cloud.positions[:, 2]]
    if cloud.colors is not None:
        props += [("red", "<u1"), ("green", "<u1"), ("blue", "<u1")]
        rgb = np.clip(np.rint(cloud.colors), 0, 255)
        cols += [rgb[:, 0], rgb[:, 1], rgb[:, 2]]
    if cloud.normals is not None:
        props += [("nx", "<f4"), ("ny", "<f4"), ("nz", "<f4")]
        cols += [cloud.normals[:, 0], cloud.normals[:, 1], cloud.normals[:, 2]]
    if cloud.frame_index is not None:
        props += [("frame", "<i4")]
        cols += [cloud.frame_index]
    if cloud.labels is not None:
        props += [("label", "<i4")]
        cols += [cloud.labels]
    if cloud.confidences is not None:
        props += [("confidence", "<f4")]
        cols += [cloud.confidences]

    names = {"<f4": "float", "<u1": "uchar", "<i4": "int"}
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += [f"property {names[d]} {p}" for p, d in props]
    header.append("end_header")

    rec = np.empty(n, dtype=[(p, d) for p, d in props])
    for (p, d), c in zip(props, cols):
        rec[p] = c.astype(d)

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(rec.tobytes())
        else:
            fmt_cols = []
            for (p, d), c in zip(props, cols):
                if d == "<f4":
                    fmt_cols.append([f"{v:.9g}" for v in c.astype(np.float32)])
                else:
                    fmt_cols.append([str(int(v)) for v in c])
            lines = (" ".join(row) for row in zip(*fmt_cols)) if n else ()
            f.write(("\n".join(lines) + ("\n" if n else "")).encode("ascii"))


def read_ply(path) -> PointCloud:
    with open(path, "rb") as f:
        data = f.read()
    try:
        end = data.index(b"end_header\n") + len(b"end_header\n")
    except ValueError:
        raise FileFormatError("missing end_header") from None
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()
    if not header_lines or header_lines[0].strip() != "ply":
        raise FileFormatError("not a PLY file")
    fmt = None
    n = None
    props = []
    in_vertex = False
    for line in header_lines[1:]:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n = int(tok[2])
            elif n is None:
                raise FileFormatError(f"unsupported leading element {tok[1]!r}")
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise FileFormatError("list properties not supported")
            if tok[1] not in _TYPES:
                raise FileFormatError(f"unsupported property type {tok[1]!r}")
            props.append((tok[2], _TYPES[tok[1]][0]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise FileFormatError(f"unsupported format {fmt!r}")
    if n is None:
        raise FileFormatError("no vertex element")

    dtype = np.dtype([(p, d) for p, d in props])
    if fmt == "binary_little_endian":
        rec = np.frombuffer(data[end : end + n * dtype.itemsize], dtype=dtype, count=n)
    else:
        text = data[end:].decode("ascii")
        flat = np.array(text.split(), dtype=np.float64)
        if flat.size < n * len(props):
            raise FileFormatError("ascii body shorter than declared vertex count")
        flat = flat[: n * len(props)].reshape(n, len(props))
        rec = np.empty(n, dtype=dtype)
        for j, (p, d) in enumerate(props):
            rec[p] = flat[:, j].astype(d)

    have = {p for p, _ in props}
    for req in ("x", "y", "z"):
        if req not in have:
            raise FileFormatError(f"missing required property {req!r}")
    pos = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    kw = {}
    if {"red", "green", "blue"} <= have:
        kw["colors"] = np.column_stack([rec["red"], rec["green"], rec["blue"]]).astype(np.float64)
    if {"nx", "ny", "nz"} <= have:
        normals = np.column_stack([rec["nx"], rec["ny"], rec["nz"]]).astype(np.float64)
        norm = np.linalg.norm(normals, axis=1, keepdims=True)
        kw["normals"] = normals / np.maximum(norm, 1e-12)
    if "frame" in have:
        kw["frame_index"] = rec["frame"].astype(np.int32)
    if "label" in have:
        kw["labels"] = rec["label"].astype(np.int32)
    if "confidence" in have:
        kw["confidences"] = np.clip(rec["confidence"].astype(np.float64), 0.0, 1.0)
    return PointCloud(pos, **kw)


def write_dynamic_flags_ply(path, cloud: PointCloud, dynamic_flags, binary=True):
    """PLY with an extra uint8 `dynamic` property (detect-dynamic output)."""
    n = len(cloud)
    flags = np.asarray(dynamic_flags).astype(np.uint8)
    props = [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("dynamic", "<u1")]
    rec = np.empty(n, dtype=props)
    rec["x"], rec["y"], rec["z"] = cloud.positions.T.astype(np.float32)
    rec["dynamic"] = flags
    names = {"<f4": "float", "<u1": "uchar"}
    header = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {n}",
        *[f"property {names[d]} {p}" for p, d in props],
        "end_header",
    ]
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            f.write(rec.tobytes())
        else:
            rows = (
                f"{r['x']:.9g} {r['y']:.9g} {r['z']:.9g} {int(r['dynamic'])}" for r in rec
            )
            f.write(("\n".join(rows) + ("\n" if n else "")).encode("ascii"))
