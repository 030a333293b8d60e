"""Dense squared-exponential kernels and their curvature-reweighted variant.

Bandwidth convention: ``K(x, y) = exp(-|x - y|^2 / eps)``.  A reweighted
kernel requested at effective bandwidth ``eps`` is assembled from inner
Euclidean factors at ``eps / 2``, i.e. ``K_w = K_{eps/2} diag(w nu) K_{eps/2}``.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DimensionMismatch, InvalidBandwidth
from .mesh_io import as_points

EUCLIDEAN = "euclidean"
REWEIGHTED = "reweighted"
KINDS = (EUCLIDEAN, REWEIGHTED)

JITTER = 1e-12
BANDWIDTH_FACTOR = 0.2

_BLOCK = 512


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Dense symmetric Gram matrix over the sample points.

    ``bandwidth`` is the effective bandwidth ``eps`` of the kernel, for both
    kinds.  ``metadata`` records post-processing such as diagonal jitter.
    """

    entries: np.ndarray
    bandwidth: float
    kind: str = EUCLIDEAN
    metadata: dict = field(default_factory=dict)
    diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"kernel must be square, got shape {a.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        a.setflags(write=False)
        d = a.diagonal().copy()
        d.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "diag", d)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def max_diag(self):
        return float(self.diag.max())

    def __len__(self):
        return self.n


def _check_bandwidth(eps):
    try:
        eps = float(eps)
    except (TypeError, ValueError):
        raise InvalidBandwidth(f"bandwidth must be a positive number, got {eps!r}") from None
    if not np.isfinite(eps) or eps <= 0:
        raise InvalidBandwidth(f"bandwidth must be a positive finite number, got {eps}")
    return eps


def default_bandwidth(points, factor=BANDWIDTH_FACTOR):
    """``(factor * bounding-box diagonal)^2``."""
    x = as_points(points)
    diag = float(np.linalg.norm(x.max(axis=0) - x.min(axis=0)))
    return (factor * diag) ** 2


def squared_exponential_kernel(points, eps):
    x = as_points(points)
    eps = _check_bandwidth(eps)
    if len(x) == 1:
        return KernelMatrix(np.ones((1, 1)), eps, EUCLIDEAN)
    # squareform of a condensed vector is symmetric bit-for-bit
    d2 = squareform(pdist(x, "sqeuclidean"))
    d2 /= -eps
    np.exp(d2, out=d2)
    return KernelMatrix(d2, eps, EUCLIDEAN)


def _mirror_upper(a):
    n = a.shape[0]
    for i0 in range(0, n, _BLOCK):
        i1 = min(i0 + _BLOCK, n)
        a[i0:i1, :i0] = a[:i0, i0:i1].T
        blk = a[i0:i1, i0:i1]
        blk[np.tril_indices(i1 - i0, -1)] = blk.T[np.tril_indices(i1 - i0, -1)]
    return a


def reweighted_kernel(K, wf):
    """``K^T diag(w * nu) K`` for a Euclidean kernel ``K``.

    ``K`` should be assembled at half the desired effective bandwidth; the
    result reports ``2 * K.bandwidth``.
    """
    if K.kind != EUCLIDEAN:
        raise ValueError("reweighted_kernel expects a Euclidean kernel")
    mass = np.asarray(wf.mass if hasattr(wf, "mass") else wf, dtype=np.float64)
    if mass.shape != (K.n,):
        raise DimensionMismatch(f"weight field has length {mass.shape[0]}, kernel has N={K.n}")
    if np.any(mass < 0):
        raise ValueError("weight masses must be nonnegative")
    g = np.sqrt(mass)[:, None] * K.entries
    kw = _mirror_upper(g.T @ g)
    return KernelMatrix(kw, 2.0 * K.bandwidth, REWEIGHTED)


def build_kernel(points, eps, kind=EUCLIDEAN, weights=None):
    """Assemble a kernel of the given kind at effective bandwidth ``eps``."""
    eps = _check_bandwidth(eps)
    if kind == EUCLIDEAN:
        return squared_exponential_kernel(points, eps)
    if kind == REWEIGHTED:
        if weights is None:
            raise ValueError("reweighted kernel needs a weight field")
        return reweighted_kernel(squared_exponential_kernel(points, eps / 2.0), weights)
    raise ValueError(f"unknown kernel kind {kind!r}")


def psd_floor(K, policy="none"):
    """Optionally add ``1e-12 * max_diag`` to the diagonal."""
    if policy == "none":
        return K
    if policy != "relative":
        raise ValueError(f"unknown jitter policy {policy!r}")
    shift = JITTER * K.max_diag
    a = K.entries.copy()
    a[np.diag_indices_from(a)] += shift
    meta = dict(K.metadata, jitter=JITTER, jitter_abs=shift)
    return KernelMatrix(a, K.bandwidth, K.kind, meta)


# ---------------------------------------------------------------- binary dump
# layout: int64 N, int64 kind (0 euclidean, 1 reweighted), float64 eps,
# then N*N float64 row-major, all little-endian

_HEADER = struct.Struct("<qqd")


def write_kernel_binary(K, path):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(K.n, KINDS.index(K.kind), K.bandwidth))
        fh.write(np.ascontiguousarray(K.entries, dtype="<f8").tobytes())


def read_kernel_binary(path):
    with open(path, "rb") as fh:
        n, kind, eps = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError(f"expected {n * n} entries, found {data.size}")
    return KernelMatrix(data.reshape(n, n).astype(np.float64), eps, KINDS[kind])
