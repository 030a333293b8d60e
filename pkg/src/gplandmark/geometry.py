"""Discrete differential geometry on triangle meshes and point clouds.

Per-vertex mixed Voronoi areas, angle-deficit Gaussian curvature,
cotangent-Laplacian mean curvature, and the curvature weight field used to
reweight the kernel.  Reductions use ``np.bincount`` so results do not
depend on thread count.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    AllZeroCurvatureError,
    DegenerateGeometryError,
    DegenerateNeighborhoodError,
    DimensionMismatch,
    ValidationError,
)
from .mesh_io import as_points

# Curvature magnitudes at this (dimensionless) level are rounding noise.
_SNAP = 1e-12


@dataclass(frozen=True, eq=False)
class CurvatureField:
    gaussian: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gaussian, dtype=np.float64)
        m = np.asarray(self.mean, dtype=np.float64)
        if g.shape != m.shape:
            raise DimensionMismatch("gaussian and mean curvature lengths differ")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(m))):
            raise DegenerateGeometryError("non-finite curvature value")
        object.__setattr__(self, "gaussian", g)
        object.__setattr__(self, "mean", m)


@dataclass(frozen=True, eq=False)
class WeightField:
    """Per-vertex weight ``w`` and cell area ``nu``.

    The kernel measure puts mass ``w[i] * nu[i]`` on vertex ``i``.
    """

    weight: np.ndarray
    area: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        a = np.asarray(self.area, dtype=np.float64)
        if w.shape != a.shape or w.ndim != 1:
            raise DimensionMismatch("weight and area must be 1-d arrays of equal length")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValidationError("weights must be nonnegative with at least one positive entry")
        if np.any(a <= 0):
            raise ValidationError("areas must be positive")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "area", a)

    @property
    def mass(self):
        return self.weight * self.area

    def __len__(self):
        return len(self.weight)


def uniform_weights(n, area=None):
    """``w = 1`` with ``nu = 1/n`` (or the given areas)."""
    area = np.full(n, 1.0 / n) if area is None else np.asarray(area, dtype=np.float64)
    return WeightField(np.ones(n), area)


def _face_geometry(mesh):
    v = mesh.vertices
    f = mesh.faces
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    # edge opposite to corner k
    e0, e1, e2 = p2 - p1, p0 - p2, p1 - p0
    l2 = np.stack([np.einsum("ij,ij->i", e, e) for e in (e0, e1, e2)], axis=1)
    if np.any(l2 == 0):
        raise DegenerateGeometryError(f"face {int(np.argmax(np.any(l2 == 0, axis=1)))} has a zero-length edge")
    cross = np.cross(p1 - p0, p2 - p0)
    dbl = np.linalg.norm(cross, axis=1)
    if np.any(dbl == 0) or np.any(dbl <= 1e-14 * l2.max(axis=1)):
        raise DegenerateGeometryError(f"face {int(np.argmin(dbl))} has zero area")
    # dot products of the two edges meeting at each corner
    dots = np.stack(
        [
            -np.einsum("ij,ij->i", e1, e2),
            -np.einsum("ij,ij->i", e2, e0),
            -np.einsum("ij,ij->i", e0, e1),
        ],
        axis=1,
    )
    angles = np.arctan2(dbl[:, None], dots)
    cot = dots / dbl[:, None]
    return {"l2": l2, "area": dbl / 2.0, "normal": cross, "angles": angles, "cot": cot}


def _mixed_corner_areas(g):
    l2, cot, area = g["l2"], g["cot"], g["area"]
    # circumcentric share of corner k: (|e_{k+1}|^2 cot_{k+1} + |e_{k+2}|^2 cot_{k+2}) / 8
    corner = np.empty_like(l2)
    for k in range(3):
        a, b = (k + 1) % 3, (k + 2) % 3
        corner[:, k] = (l2[:, a] * cot[:, a] + l2[:, b] * cot[:, b]) / 8.0
    obtuse = cot < 0
    any_obtuse = obtuse.any(axis=1)
    corner[any_obtuse] = np.where(obtuse[any_obtuse], area[any_obtuse, None] / 2.0,
                                  area[any_obtuse, None] / 4.0)
    return corner


def _scatter(mesh, per_corner):
    n = mesh.n_vertices
    f = mesh.faces
    if per_corner.ndim == 2:
        return np.bincount(f.ravel(), weights=per_corner.ravel(), minlength=n)
    return np.stack(
        [np.bincount(f.ravel(), weights=per_corner[..., d].ravel(), minlength=n) for d in range(per_corner.shape[-1])],
        axis=-1,
    )


def _check_coverage(mesh):
    used = np.bincount(mesh.faces.ravel(), minlength=mesh.n_vertices)
    if np.any(used == 0):
        raise DegenerateGeometryError(f"vertex {int(np.argmin(used))} belongs to no face")


def voronoi_areas(mesh):
    """Mixed Voronoi area per vertex.

    Circumcentric cells for non-obtuse triangles; for an obtuse triangle the
    obtuse corner gets half the face area and the other two a quarter each.
    The areas sum to the total surface area.
    """
    _check_coverage(mesh)
    g = _face_geometry(mesh)
    return _scatter(mesh, _mixed_corner_areas(g))


def surface_area(mesh):
    return float(np.sum(_face_geometry(mesh)["area"]))


def discrete_curvatures(mesh, return_areas=False):
    """Angle-deficit Gaussian curvature and cotangent mean curvature.

    ``gaussian[i]`` is the angle deficit (``2*pi - sum(theta)`` inside,
    ``pi - sum(theta)`` on the boundary) divided by the mixed area.
    ``mean[i]`` is half the norm of the mean-curvature normal, signed
    positive when it agrees with the area-weighted vertex normal.
    """
    _check_coverage(mesh)
    g = _face_geometry(mesh)
    area = _scatter(mesh, _mixed_corner_areas(g))
    angle_sum = _scatter(mesh, g["angles"])
    full = np.where(mesh.boundary_vertices(), np.pi, 2.0 * np.pi)
    deficit = full - angle_sum
    deficit[np.abs(deficit) <= _SNAP * 2 * np.pi] = 0.0

    f = mesh.faces
    v = mesh.vertices
    cot = g["cot"]
    lap = np.zeros((mesh.n_vertices, 3))
    scale = np.zeros(mesh.n_vertices)
    for k in range(3):
        i, j = f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        d = v[i] - v[j]
        c = cot[:, k]
        contrib = c[:, None] * d
        for axis in range(3):
            lap[:, axis] += np.bincount(i, weights=contrib[:, axis], minlength=len(v))
            lap[:, axis] -= np.bincount(j, weights=contrib[:, axis], minlength=len(v))
        mag = np.abs(c) * np.sqrt(g["l2"][:, k])
        scale += np.bincount(i, weights=mag, minlength=len(v)) + np.bincount(j, weights=mag, minlength=len(v))
    norm = np.linalg.norm(lap, axis=1)
    norm[norm <= _SNAP * scale] = 0.0
    vnormal = _scatter(mesh, np.repeat(g["normal"][:, None, :], 3, axis=1))
    sign = np.where(np.einsum("ij,ij->i", lap, vnormal) < 0, -1.0, 1.0)
    curv = CurvatureField(deficit / area, sign * norm / (4.0 * area))
    if return_areas:
        return curv, area
    return curv


def curvature_weight(curv, area, lam=0.5, rho=1.0):
    """Curvature weight ``w`` normalized so that ``sum(w * area) == 1``.

    ``w_i = lam |k_i|^rho / sum_k |k_k|^rho nu_k
    + (1 - lam) |h_i|^rho / sum_k |h_k|^rho nu_k``
    with ``k`` the Gaussian and ``h`` the mean curvature.  A term whose
    coefficient is zero is skipped entirely.
    """
    area = np.asarray(area, dtype=np.float64)
    if len(area) != len(curv.gaussian):
        raise DimensionMismatch(f"{len(curv.gaussian)} curvature values but {len(area)} areas")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    if not rho > 0:
        raise ValidationError(f"rho must be positive, got {rho}")
    w = np.zeros_like(area)
    for coef, values, name in ((lam, curv.gaussian, "Gaussian"), (1.0 - lam, curv.mean, "mean")):
        if coef == 0:
            continue
        mag = np.abs(values) ** rho
        total = float(np.sum(mag * area))
        if total <= 0:
            raise AllZeroCurvatureError(f"{name} curvature vanishes identically but its coefficient is {coef}")
        w += coef * mag / total
    return WeightField(w, area)


def mesh_weights(mesh, lam=0.5, rho=1.0):
    curv, area = discrete_curvatures(mesh, return_areas=True)
    return curvature_weight(curv, area, lam, rho)


def surface_variation(points, k=10):
    """PCA surface variation ``l_min / sum(l)`` of each point's k-NN covariance.

    The neighborhood includes the point itself.
    """
    x = as_points(points)
    n = len(x)
    if not 4 <= k < n:
        raise ValidationError(f"neighbor count must satisfy 4 <= k < N={n}, got {k}")
    _, nbr = cKDTree(x).query(x, k=k)
    local = x[nbr]
    local = local - local.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", local, local) / k
    ev = np.linalg.eigvalsh(cov)
    tr = ev.sum(axis=1)
    scale = np.einsum("nki,nki->n", local, local) / k
    if np.any(scale == 0):
        raise DegenerateNeighborhoodError(f"all neighbors of point {int(np.argmin(scale))} coincide")
    var = np.clip(ev[:, 0], 0.0, None) / tr
    var[var <= _SNAP] = 0.0
    return var


def pointcloud_importance(cloud, k=10, uniform=False):
    """Importance weights for a point cloud, each point carrying area ``1/N``.

    Uses surface variation as a connectivity-free curvature proxy.  With
    ``uniform=True`` every weight is 1.
    """
    n = len(as_points(cloud))
    if uniform:
        return uniform_weights(n)
    var = surface_variation(cloud, k)
    area = np.full(n, 1.0 / n)
    total = float(np.sum(var * area))
    if total <= 0:
        raise AllZeroCurvatureError("surface variation vanishes at every point (planar cloud)")
    return WeightField(var / total, area)


def write_geometry_csv(path, curv, wf):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["vertex_index", "kappa", "eta", "nu", "w"])
        for i in range(len(wf)):
            out.writerow([i, repr(float(curv.gaussian[i])), repr(float(curv.mean[i])),
                          repr(float(wf.area[i])), repr(float(wf.weight[i]))])
