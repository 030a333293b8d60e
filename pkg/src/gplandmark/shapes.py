"""Synthetic test surfaces and surface samplers."""

import numpy as np

from .mesh_io import PointCloud, TriangleMesh


def icosahedron(radius=1.0):
    """Regular icosahedron with the given circumradius, outward-oriented faces."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    v *= radius / np.linalg.norm(v[0])
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return TriangleMesh(v, f)


def icosphere(subdivisions=4, radius=1.0):
    """Loop-style midpoint subdivision of the icosahedron, projected to the sphere.

    ``subdivisions=4`` gives 2562 vertices.
    """
    base = icosahedron(1.0)
    verts = [tuple(p) for p in base.vertices]
    faces = base.faces.tolist()
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = (np.asarray(verts[a]) + np.asarray(verts[b])) / 2.0
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces
    return TriangleMesh(np.array(verts) * radius, np.array(faces))


def torus(major=1.0, minor=0.4, n_major=40, n_minor=20):
    """Closed genus-1 torus mesh around the z axis."""
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(vv)
    pts = np.stack([ring * np.cos(uu), ring * np.sin(uu), minor * np.sin(vv)], axis=-1).reshape(-1, 3)

    def idx(i, j):
        return (i % n_major) * n_minor + (j % n_minor)

    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(pts, np.array(faces))


def grid_patch(nx=5, ny=5, size=1.0, z=None):
    """Triangulated planar grid on [0, size]^2; ``z`` optionally lifts vertices."""
    xs = np.linspace(0.0, size, nx)
    ys = np.linspace(0.0, size, ny)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    zz = np.zeros_like(xx) if z is None else z(xx, yy)
    pts = np.stack([xx, yy, zz], axis=-1).reshape(-1, 3)
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a, b = i * ny + j, (i + 1) * ny + j
            c, d = (i + 1) * ny + j + 1, i * ny + j + 1
            faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(pts, np.array(faces))


def sample_sphere(n, seed=0, radius=1.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return PointCloud(radius * x)


def sample_torus(n, seed=0, major=1.0, minor=0.4):
    """Area-uniform samples on a torus (rejection on the minor angle)."""
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < n:
        u = rng.uniform(0, 2 * np.pi, 2 * n)
        v = rng.uniform(0, 2 * np.pi, 2 * n)
        keep = rng.uniform(0, 1, 2 * n) < (major + minor * np.cos(v)) / (major + minor)
        u, v = u[keep], v[keep]
        ring = major + minor * np.cos(v)
        out.append(np.stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], axis=1))
    return PointCloud(np.concatenate(out)[:n])


def sample_cube_surface(n_per_face, seed=0):
    """Uniform samples on the surface of the unit cube [0, 1]^3."""
    rng = np.random.default_rng(seed)
    faces = []
    for axis in range(3):
        for val in (0.0, 1.0):
            p = rng.uniform(0, 1, (n_per_face, 3))
            p[:, axis] = val
            faces.append(p)
    return PointCloud(np.concatenate(faces))
