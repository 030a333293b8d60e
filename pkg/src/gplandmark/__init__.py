"""Gaussian-process landmarking on triangle meshes and point clouds."""

__version__ = "0.1.0"

from .errors import GPLandmarkError
from .mesh_io import PointCloud, TriangleMesh, load_mesh, load_point_cloud
from .geometry import CurvatureField, WeightField, curvature_weight, discrete_curvatures, pointcloud_importance
from .kernel import KernelMatrix, build_kernel, default_bandwidth
from .landmarking import LandmarkTrace, gp_landmark, mspe_field, pivoted_cholesky

__all__ = [
    "GPLandmarkError",
    "PointCloud",
    "TriangleMesh",
    "load_mesh",
    "load_point_cloud",
    "CurvatureField",
    "WeightField",
    "curvature_weight",
    "discrete_curvatures",
    "pointcloud_importance",
    "KernelMatrix",
    "build_kernel",
    "default_bandwidth",
    "LandmarkTrace",
    "gp_landmark",
    "mspe_field",
    "pivoted_cholesky",
]
