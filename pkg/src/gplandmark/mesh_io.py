"""Reading and validating triangle meshes and point clouds.

Supported inputs are the ASCII variants of OFF, PLY and OBJ for meshes, and
whitespace (XYZ) or comma (CSV) separated coordinates for point clouds.
Coordinates are always parsed as float64.
"""

import logging
import os
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

MESH_FORMATS = ("off", "ply", "obj")
CLOUD_FORMATS = ("xyz", "csv")


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Embedded triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (N, 3)
    faces : array_like of int, shape (F, 3)
        Zero-based vertex indices.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        f = np.array(self.faces)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"vertices must have shape (N, 3), got {v.shape}")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError(f"faces must have shape (F, 3), got {f.shape}")
        if not np.issubdtype(f.dtype, np.integer):
            if not np.all(np.mod(f, 1) == 0):
                raise ValidationError("face indices must be integers")
        f = f.astype(np.int64)
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))
        self._validate()

    def _validate(self):
        v, f = self.vertices, self.faces
        n = len(v)
        if n < 3:
            raise ValidationError(f"mesh needs at least 3 vertices, got {n}")
        if len(f) < 1:
            raise ValidationError("mesh needs at least one face")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertex coordinates must be finite")
        bad = np.flatnonzero(np.any((f < 0) | (f >= n), axis=1))
        if bad.size:
            raise ValidationError(
                f"face {bad[0]} has vertex index out of range [0, {n}): {f[bad[0]].tolist()}"
            )
        degenerate = np.flatnonzero(
            (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        )
        if degenerate.size:
            raise ValidationError(
                f"face {degenerate[0]} is degenerate (repeated vertex): {f[degenerate[0]].tolist()}"
            )
        _check_duplicates(v, "vertex")
        counts = Counter(map(tuple, np.sort(self.edges_per_face(), axis=1).tolist()))
        nonmanifold = sum(1 for c in counts.values() if c > 2)
        if nonmanifold:
            logger.warning("mesh has %d non-manifold edges", nonmanifold)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def edges_per_face(self):
        """All directed half-edges, shape (3F, 2), face-major order."""
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    def unique_edges(self):
        e = np.sort(self.edges_per_face(), axis=1)
        return np.unique(e, axis=0)

    def boundary_vertices(self):
        """Boolean mask of vertices lying on a boundary edge."""
        e = np.sort(self.edges_per_face(), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[uniq[counts == 1].ravel()] = True
        return mask

    def euler_characteristic(self):
        return self.n_vertices - len(self.unique_edges()) + self.n_faces

    def same_as(self, other):
        return (
            self.vertices.shape == other.vertices.shape
            and self.faces.shape == other.faces.shape
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.faces, other.faces)
        )


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] < 1:
            raise ValidationError(f"points must have shape (N, D), got {p.shape}")
        if len(p) < 2:
            raise ValidationError(f"point cloud needs at least 2 points, got {len(p)}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("point coordinates must be finite")
        _check_duplicates(p, "point")
        object.__setattr__(self, "points", _readonly(p))

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    @property
    def n_points(self):
        return len(self.points)

    def __len__(self):
        return len(self.points)


def _check_duplicates(x, what):
    _, first, counts = np.unique(x, axis=0, return_index=True, return_counts=True)
    if np.any(counts > 1):
        i = int(first[np.argmax(counts > 1)])
        raise ValidationError(f"duplicate {what} coordinates at index {i}: {x[i].tolist()}")


def mesh_to_cloud(mesh):
    return PointCloud(mesh.vertices.copy())


def as_points(obj):
    """Coordinates of a mesh, a cloud, or a raw array as an (N, D) array."""
    if isinstance(obj, TriangleMesh):
        return obj.vertices
    if isinstance(obj, PointCloud):
        return obj.points
    return np.asarray(obj, dtype=np.float64)


# ---------------------------------------------------------------- reading


class _Lines:
    """Line iterator that skips blanks/comments and remembers line numbers."""

    def __init__(self, text, comment="#"):
        self._lines = text.splitlines()
        self._i = 0
        self.comment = comment
        self.lineno = 0

    def next(self, what):
        while self._i < len(self._lines):
            raw = self._lines[self._i]
            self._i += 1
            if self.comment and self.comment in raw:
                raw = raw[: raw.index(self.comment)]
            s = raw.strip()
            if s:
                self.lineno = self._i
                return s.split()
        raise ParseError(f"unexpected end of file while reading {what}", self._i)

    def remaining(self):
        out = []
        while True:
            try:
                out.append((self.next("trailing data"), self.lineno))
            except ParseError:
                return out


def _floats(tokens, line, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"non-numeric token in {what}: {' '.join(tokens)!r}", line) from None


def _ints(tokens, line, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"non-integer token in {what}: {' '.join(tokens)!r}", line) from None


def _read_text(path):
    with open(path, "rb") as fh:
        data = fh.read()
    head = data[:512]
    if head.startswith(b"ply") and b"format binary" in head:
        raise ParseError(f"{path}: binary PLY is not supported; convert to ASCII PLY")
    try:
        return data.decode("ascii")
    except UnicodeDecodeError:
        raise ParseError(f"{path}: not an ASCII file (binary formats are not supported)") from None


def _guess_format(path, allowed):
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    if ext not in allowed:
        raise ParseError(f"cannot infer format from extension {ext!r}; expected one of {allowed}")
    return ext


def _normalize_format(fmt, allowed, path):
    if fmt is None:
        return _guess_format(path, allowed)
    fmt = str(fmt).lower()
    if fmt == "ply_ascii":
        fmt = "ply"
    if fmt not in allowed:
        raise ValueError(f"unknown format {fmt!r}; expected one of {allowed}")
    return fmt


def parse_off(text):
    lines = _Lines(text)
    header = lines.next("header")
    if header[0].upper() != "OFF":
        raise ParseError(f"expected 'OFF' header, got {header[0]!r}", lines.lineno)
    counts = header[1:] if len(header) > 1 else lines.next("counts line")
    if len(counts) < 2:
        raise ParseError("counts line must be 'N F [E]'", lines.lineno)
    n, nf = _ints(counts[:3], lines.lineno, "counts line")[:2]
    if n < 0 or nf < 0:
        raise ParseError("negative element count", lines.lineno)
    verts = []
    for i in range(n):
        tok = lines.next(f"vertex {i} of {n}")
        if len(tok) != 3:
            raise ParseError(
                f"vertex block: expected 3 coordinates for vertex {i} of {n}, got {len(tok)} tokens",
                lines.lineno,
            )
        verts.append(_floats(tok, lines.lineno, "vertex block"))
    faces = []
    for i in range(nf):
        tok = lines.next(f"face {i} of {nf}")
        vals = _ints(tok[:4], lines.lineno, "face block")
        if vals[0] != 3 or len(vals) < 4:
            raise ParseError(f"face block: only triangles are supported, got {tok[0]}-gon", lines.lineno)
        # tokens past the third index are per-face colors
        faces.append(vals[1:4])
    extra = lines.remaining()
    if extra:
        raise ParseError("extra data after declared faces", extra[0][1])
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces).reshape(-1, 3))


def parse_ply(text):
    lines = _Lines(text, comment=None)
    tok = lines.next("header")
    if tok != ["ply"]:
        raise ParseError("expected 'ply' magic", lines.lineno)
    elements = []  # [name, count, [(prop_name, is_list)]]
    fmt_seen = False
    while True:
        tok = lines.next("header")
        key = tok[0]
        if key == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise ParseError(f"unsupported PLY format {' '.join(tok[1:])!r}; only ascii is supported",
                                 lines.lineno)
            fmt_seen = True
        elif key in ("comment", "obj_info"):
            continue
        elif key == "element":
            if len(tok) != 3:
                raise ParseError("malformed element line", lines.lineno)
            elements.append([tok[1], _ints(tok[2:3], lines.lineno, "element count")[0], []])
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", lines.lineno)
            if tok[1] == "list":
                if len(tok) != 5:
                    raise ParseError("malformed list property", lines.lineno)
                elements[-1][2].append((tok[4], True))
            else:
                if len(tok) != 3:
                    raise ParseError("malformed property line", lines.lineno)
                elements[-1][2].append((tok[2], False))
        elif key == "end_header":
            break
        else:
            raise ParseError(f"unknown header keyword {key!r}", lines.lineno)
    if not fmt_seen:
        raise ParseError("missing format line", lines.lineno)

    verts = faces = None
    for name, count, props in elements:
        rows = []
        for i in range(count):
            tok = lines.next(f"{name} {i} of {count}")
            rows.append((tok, lines.lineno))
        if name == "vertex":
            names = [p for p, _ in props]
            if any(is_list for _, is_list in props):
                raise ParseError("list properties on vertices are not supported")
            try:
                ix = [names.index(c) for c in ("x", "y", "z")]
            except ValueError:
                raise ParseError("vertex element lacks x, y, z properties") from None
            verts = []
            for tok, ln in rows:
                if len(tok) != len(props):
                    raise ParseError(f"vertex block: expected {len(props)} values, got {len(tok)}", ln)
                vals = _floats(tok, ln, "vertex block")
                verts.append([vals[j] for j in ix])
        elif name == "face":
            lists = [p for p, is_list in props if is_list]
            if len(props) != 1 or not lists:
                raise ParseError("face element must have exactly one list property")
            faces = []
            for tok, ln in rows:
                vals = _ints(tok, ln, "face block")
                if vals[0] != 3 or len(vals) != 4:
                    raise ParseError("face block: only triangles are supported", ln)
                faces.append(vals[1:])
    extra = lines.remaining()
    if extra:
        raise ParseError("extra data after declared elements", extra[0][1])
    if verts is None or faces is None:
        raise ParseError("PLY file must define vertex and face elements")
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces).reshape(-1, 3))


def parse_obj(text):
    verts, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if "#" in raw:
            raw = raw[: raw.index("#")]
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "v":
            if len(tok) not in (4, 5):
                raise ParseError("'v' record needs 3 coordinates", lineno)
            verts.append(_floats(tok[1:4], lineno, "'v' record"))
        elif tok[0] == "f":
            if len(tok) != 4:
                raise ParseError(f"only triangles are supported, got {len(tok) - 1}-gon", lineno)
            idx = _ints([t.split("/")[0] for t in tok[1:]], lineno, "'f' record")
            tri = []
            for k in idx:
                if k == 0:
                    raise ParseError("OBJ indices are 1-based; got 0", lineno)
                # negative indices count back from the latest vertex
                tri.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(tri)
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(faces).reshape(-1, 3))


_MESH_PARSERS = {"off": parse_off, "ply": parse_ply, "obj": parse_obj}


def load_mesh(path, format=None):
    """Load a triangle mesh from an ASCII OFF, PLY or OBJ file.

    ``format`` is inferred from the file extension when omitted.
    """
    fmt = _normalize_format(format, MESH_FORMATS, path)
    return _MESH_PARSERS[fmt](_read_text(path))


def parse_point_cloud(text, sep=None):
    rows = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        tok = [t.strip() for t in s.split(sep)] if sep else s.split()
        if width is None:
            width = len(tok)
        elif len(tok) != width:
            raise ParseError(f"inconsistent column count: expected {width}, got {len(tok)}", lineno)
        rows.append(_floats(tok, lineno, "point row"))
    if len(rows) < 2:
        raise ParseError(f"point cloud needs at least 2 points, got {len(rows)}")
    return PointCloud(np.array(rows, dtype=np.float64))


def load_point_cloud(path, format=None):
    fmt = _normalize_format(format, CLOUD_FORMATS, path)
    return parse_point_cloud(_read_text(path), sep="," if fmt == "csv" else None)


# ---------------------------------------------------------------- debug writers


def _fmt(x):
    return repr(float(x))


def write_off(mesh, path):
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} {len(mesh.unique_edges())}\n")
        for v in mesh.vertices:
            fh.write(" ".join(map(_fmt, v)) + "\n")
        for f in mesh.faces:
            fh.write("3 %d %d %d\n" % tuple(f))


def write_ply(mesh, path):
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\nend_header\n")
        for v in mesh.vertices:
            fh.write(" ".join(map(_fmt, v)) + "\n")
        for f in mesh.faces:
            fh.write("3 %d %d %d\n" % tuple(f))


def write_obj(mesh, path):
    with open(path, "w") as fh:
        for v in mesh.vertices:
            fh.write("v " + " ".join(map(_fmt, v)) + "\n")
        for f in mesh.faces:
            fh.write("f %d %d %d\n" % tuple(f + 1))


def write_mesh(mesh, path, format=None):
    fmt = _normalize_format(format, MESH_FORMATS, path)
    {"off": write_off, "ply": write_ply, "obj": write_obj}[fmt](mesh, path)


def write_point_cloud(cloud, path, format=None):
    fmt = _normalize_format(format, CLOUD_FORMATS, path)
    sep = "," if fmt == "csv" else " "
    with open(path, "w") as fh:
        for p in as_points(cloud):
            fh.write(sep.join(map(_fmt, p)) + "\n")
