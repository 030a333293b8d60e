import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from gplandmark import shapes
from gplandmark.errors import AllZeroCurvatureError, DegenerateGeometryError, DegenerateNeighborhoodError
from gplandmark.geometry import (
    CurvatureField,
    curvature_weight,
    discrete_curvatures,
    mesh_weights,
    pointcloud_importance,
    surface_area,
    surface_variation,
    voronoi_areas,
    write_geometry_csv,
)
from gplandmark.mesh_io import TriangleMesh


def _moved(mesh, rot, shift, scale=1.0):
    return TriangleMesh(scale * mesh.vertices @ rot.T + shift, mesh.faces)


def test_equilateral_triangle_areas():
    v = np.array([[0, 0, 0], [1, 0, 0], [0.5, math.sqrt(3) / 2, 0]])
    area = voronoi_areas(TriangleMesh(v, np.array([[0, 1, 2]])))
    assert np.allclose(area, math.sqrt(3) / 12, rtol=1e-12)


def test_unit_square_areas_sum_to_one():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    area = voronoi_areas(TriangleMesh(v, np.array([[0, 1, 2], [0, 2, 3]])))
    assert area.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(area > 0)


def test_obtuse_triangle_uses_midpoint_split():
    v = np.array([[0, 0, 0], [4, 0, 0], [2, 0.5, 0]])
    area = voronoi_areas(TriangleMesh(v, np.array([[0, 1, 2]])))
    total = 0.5 * 4 * 0.5
    assert area[2] == pytest.approx(total / 2)
    assert area[0] == pytest.approx(total / 4) and area[1] == pytest.approx(total / 4)


@pytest.mark.parametrize("mesh", [shapes.icosphere(3), shapes.torus(), shapes.grid_patch(7, 5)])
def test_area_conservation(mesh):
    assert voronoi_areas(mesh).sum() == pytest.approx(surface_area(mesh), rel=1e-9)


def test_sphere_area_below_four_pi():
    total = voronoi_areas(shapes.icosphere(4)).sum()
    assert total < 4 * math.pi
    assert total == pytest.approx(4 * math.pi, rel=5e-3)


def test_icosahedron_gauss_bonnet_and_symmetry():
    mesh = shapes.icosahedron()
    curv, area = discrete_curvatures(mesh, return_areas=True)
    assert np.allclose(curv.gaussian, curv.gaussian[0], rtol=1e-12)
    assert np.sum(curv.gaussian * area) == pytest.approx(4 * math.pi, rel=1e-6)


@pytest.mark.parametrize("mesh", [shapes.icosahedron(), shapes.icosphere(3), shapes.torus(1.0, 0.3, 30, 12)])
def test_gauss_bonnet(mesh):
    curv, area = discrete_curvatures(mesh, return_areas=True)
    total = np.sum(curv.gaussian * area)
    assert abs(total - 2 * math.pi * mesh.euler_characteristic()) <= 1e-6 * max(1.0, abs(total))


def test_flat_grid_interior_is_flat():
    mesh = shapes.grid_patch(6, 6)
    curv = discrete_curvatures(mesh)
    interior = ~mesh.boundary_vertices()
    assert np.abs(curv.gaussian[interior]).max() <= 1e-10
    assert np.abs(curv.mean[interior]).max() <= 1e-10


def test_sphere_mean_curvature():
    curv = discrete_curvatures(shapes.icosphere(4, radius=2.0))
    assert np.allclose(curv.mean, 0.5, rtol=0.05)


def test_degenerate_face_geometry():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
    with pytest.raises(DegenerateGeometryError):
        voronoi_areas(TriangleMesh(v, np.array([[0, 1, 2]])))


def test_isolated_vertex_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], dtype=float)
    with pytest.raises(DegenerateGeometryError):
        discrete_curvatures(TriangleMesh(v, np.array([[0, 1, 2]])))


def test_curvature_field_rejects_nan():
    with pytest.raises(DegenerateGeometryError):
        CurvatureField(np.array([0.0, np.nan]), np.zeros(2))


def test_constant_weight_on_icosahedron():
    mesh = shapes.icosahedron()
    curv, area = discrete_curvatures(mesh, return_areas=True)
    wf = curvature_weight(curv, area, lam=1.0, rho=1.0)
    assert np.allclose(wf.weight, 1.0 / area.sum(), rtol=1e-12)


@pytest.mark.parametrize("lam,rho", [(0.5, 1.0), (0.0, 2.0), (1.0, 0.5), (0.3, 3.0)])
def test_weight_normalization(lam, rho):
    wf = mesh_weights(shapes.torus(1.0, 0.35, 24, 12), lam, rho)
    assert np.sum(wf.weight * wf.area) == pytest.approx(1.0, rel=1e-9)
    assert np.all(wf.weight >= 0)


def test_flat_mesh_gaussian_term_raises():
    mesh = shapes.grid_patch(4, 4)
    curv, area = discrete_curvatures(mesh, return_areas=True)
    flat = CurvatureField(np.zeros_like(curv.gaussian), curv.mean)
    with pytest.raises(AllZeroCurvatureError):
        curvature_weight(flat, area, lam=0.5)
    all_flat = CurvatureField(np.zeros_like(curv.gaussian), np.zeros_like(curv.mean))
    with pytest.raises(AllZeroCurvatureError):
        curvature_weight(all_flat, area, lam=0.0)


def test_negative_curvature_contributes_magnitude():
    curv = CurvatureField(np.array([-2.0, 2.0, 0.0]), np.array([1.0, 1.0, 1.0]))
    wf = curvature_weight(curv, np.ones(3), lam=1.0)
    assert wf.weight[0] == wf.weight[1] > 0 and wf.weight[2] == 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 5.0))
def test_rigid_motion_invariance_and_scale_covariance(seed, scale):
    rng = np.random.default_rng(seed)
    mesh = shapes.torus(1.0, 0.4, 16, 8)
    rot = Rotation.random(random_state=rng).as_matrix()
    shift = rng.normal(size=3) * 10
    c0, a0 = discrete_curvatures(mesh, return_areas=True)
    c1, a1 = discrete_curvatures(_moved(mesh, rot, shift), return_areas=True)
    for x, y in ((c0.gaussian, c1.gaussian), (c0.mean, c1.mean), (a0, a1)):
        assert np.allclose(x, y, rtol=1e-9, atol=1e-9 * np.abs(x).max())
    w0 = curvature_weight(c0, a0).weight
    w1 = curvature_weight(c1, a1).weight
    assert np.allclose(w0, w1, rtol=1e-9, atol=1e-9 * w0.max())

    c2, a2 = discrete_curvatures(_moved(mesh, np.eye(3), 0.0, scale), return_areas=True)
    assert np.allclose(a2, a0 * scale**2, rtol=1e-9)
    assert np.allclose(c2.gaussian, c0.gaussian / scale**2, rtol=1e-9, atol=1e-9 * np.abs(c2.gaussian).max())
    assert np.allclose(c2.mean, c0.mean / scale, rtol=1e-9)


def test_weights_are_deterministic():
    mesh = shapes.icosphere(3)
    a, b = mesh_weights(mesh), mesh_weights(mesh)
    assert np.array_equal(a.weight, b.weight)


def _brute_variation(x, i, k):
    d = np.linalg.norm(x - x[i], axis=1)
    nbr = x[np.argsort(d, kind="stable")[:k]]
    ev = np.linalg.eigvalsh(np.cov(nbr.T, bias=True))
    return ev[0] / ev.sum()


def test_surface_variation_matches_brute_force():
    x = shapes.sample_sphere(300, seed=2).points
    var = surface_variation(x, 12)
    for i in (0, 17, 150, 299):
        assert var[i] == pytest.approx(_brute_variation(x, i, 12), rel=1e-9, abs=1e-15)


def test_cube_corner_beats_face_center():
    x = shapes.sample_cube_surface(400, seed=1).points
    var = surface_variation(x, 16)
    corner = int(np.argmin(np.linalg.norm(x - np.array([1.0, 1.0, 1.0]), axis=1)))
    center = int(np.argmin(np.linalg.norm(x - np.array([0.0, 0.0, 1.0]), axis=1)))
    assert var[corner] > var[center]


def test_planar_cloud_raises():
    g = np.stack(np.meshgrid(np.linspace(0, 1, 8), np.linspace(0, 1, 8)), -1).reshape(-1, 2)
    x = np.column_stack([g, np.zeros(len(g))])
    with pytest.raises(AllZeroCurvatureError):
        pointcloud_importance(x, 6)


def test_degenerate_neighborhood():
    x = np.array([[0.0, 0.0, 0.0]] * 5 + [[1.0, 2.0, 3.0]] * 1)
    with pytest.raises(DegenerateNeighborhoodError):
        surface_variation(x, 4)


def test_pointcloud_importance_normalization():
    x = shapes.sample_torus(500, seed=4)
    wf = pointcloud_importance(x, 10)
    assert np.allclose(wf.area, 1 / 500)
    assert np.sum(wf.weight * wf.area) == pytest.approx(1.0, rel=1e-9)
    uni = pointcloud_importance(x, 10, uniform=True)
    assert np.all(uni.weight == 1.0) and np.sum(uni.weight * uni.area) == pytest.approx(1.0)


def test_geometry_csv(tmp_path):
    mesh = shapes.icosahedron()
    curv, area = discrete_curvatures(mesh, return_areas=True)
    path = tmp_path / "g.csv"
    write_geometry_csv(str(path), curv, curvature_weight(curv, area))
    lines = path.read_text().splitlines()
    assert lines[0] == "vertex_index,kappa,eta,nu,w"
    assert len(lines) == 13
