"""Greedy Gaussian-process landmarking.

At every step the vertex with the largest mean squared prediction error
(posterior variance) is added to the design.  The posterior is maintained
through a growing Cholesky factor of the selected submatrix, which makes the
loop a left-looking diagonally pivoted Cholesky factorization of the kernel.
"""

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .errors import NumericalBreakdownError, SingularSubmatrixError, ValidationError

logger = logging.getLogger(__name__)

# pivot <= PIVOT_RTOL * max_diag means the numerical rank is exhausted
PIVOT_RTOL = 1e-12
# values within TIE_RTOL * max_diag of the maximum count as tied
TIE_RTOL = 1e-12
# a squared Cholesky pivot below this (relative) marks a singular submatrix
SINGULAR_RTOL = 1e-14

TIE_RULES = ("lowest", "random")
BUDGET, TOLERANCE = "budget", "tolerance"


def _entries(K):
    return K.entries if hasattr(K, "entries") else np.asarray(K, dtype=np.float64)


def _check_indices(selected, n):
    sel = np.asarray(selected, dtype=np.int64).ravel()
    if sel.size and (sel.min() < 0 or sel.max() >= n):
        raise ValidationError(f"design indices must lie in [0, {n})")
    if len(np.unique(sel)) != len(sel):
        raise ValidationError("design indices must be distinct")
    return sel


def select_next(sigma, tie_rule="lowest", tie_tol=0.0, rng=None, exclude=None):
    """Index of the largest entry of ``sigma``.

    Entries within ``tie_tol`` of the maximum are tied; ties go to the lowest
    index, or to a uniformly random one when ``tie_rule="random"``.
    ``exclude`` masks indices that may not be chosen.
    """
    s = np.asarray(sigma, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty MSPE field")
    if exclude is not None and len(exclude):
        s = s.copy()
        s[np.asarray(exclude, dtype=np.int64)] = -np.inf
    top = s.max()
    tied = np.flatnonzero(s >= top - tie_tol)
    if tie_rule == "lowest" or len(tied) == 1:
        return int(tied[0])
    if tie_rule == "random":
        if rng is None:
            raise ValueError("random tie rule needs an rng")
        return int(rng.choice(tied))
    raise ValueError(f"unknown tie rule {tie_rule!r}")


def _factor(sub, max_diag, policy="none"):
    if policy == "relative":
        sub = sub + PIVOT_RTOL * max_diag * np.eye(len(sub))
    try:
        L = cholesky(sub, lower=True, check_finite=False)
    except LinAlgError:
        raise SingularSubmatrixError("selected submatrix is not numerically positive definite") from None
    if np.any(np.diag(L) ** 2 <= SINGULAR_RTOL * max_diag):
        raise SingularSubmatrixError("selected submatrix is numerically singular")
    return L


def mspe_field(K, selected, policy="none"):
    """Posterior variance at every vertex given observations at ``selected``.

    ``K_ii - k_i^T K_nn^{-1} k_i``, computed from scratch; for an empty
    design this is the diagonal of ``K``.
    """
    a = _entries(K)
    diag = np.diag(a).copy()
    sel = _check_indices(selected, len(a))
    if sel.size == 0:
        return diag
    L = _factor(a[np.ix_(sel, sel)], diag.max(), policy)
    B = solve_triangular(L, a[sel, :], lower=True, check_finite=False)
    return np.maximum(diag - np.einsum("ij,ij->j", B, B), 0.0)


def blp_predict(K, selected, observations, query=None, policy="none"):
    """Simple-kriging (zero mean) prediction ``k(x)^T K_nn^{-1} y``."""
    a = _entries(K)
    sel = _check_indices(selected, len(a))
    y = np.asarray(observations, dtype=np.float64)
    if y.shape != (len(sel),):
        raise ValidationError(f"{len(sel)} design points but {y.size} observations")
    q = np.arange(len(a)) if query is None else np.asarray(query, dtype=np.int64)
    if sel.size == 0:
        return np.zeros(len(q))
    L = _factor(a[np.ix_(sel, sel)], np.diag(a).max(), policy)
    alpha = solve_triangular(L.T, solve_triangular(L, y, lower=True), lower=False)
    return a[np.ix_(q, sel)] @ alpha


class PosteriorState:
    """Running posterior for the greedy loop.

    Attributes
    ----------
    selected : list of int
    factor : ndarray, shape (n, n)
        Lower Cholesky factor of ``K[selected][:, selected]``.
    basis : ndarray, shape (N, n)
        Back-solved cross-covariance ``K[:, selected] @ factor^{-T}``.
    sigma : ndarray, shape (N,)
        Current MSPE field.
    """

    def __init__(self, K, capacity=None):
        self._a = _entries(K)
        n = len(self._a)
        cap = n if capacity is None else min(int(capacity), n)
        self.max_diag = float(np.diag(self._a).max())
        self.selected = []
        self._factor = np.zeros((cap, cap))
        self._basis = np.zeros((n, cap))
        self.sigma = np.diag(self._a).copy()

    @property
    def n_selected(self):
        return len(self.selected)

    @property
    def factor(self):
        m = self.n_selected
        return self._factor[:m, :m]

    @property
    def basis(self):
        return self._basis[:, : self.n_selected]

    @property
    def cross_covariance(self):
        return self._a[:, self.selected]

    def _grow(self):
        cap = self._factor.shape[0]
        new = min(2 * cap + 1, len(self._a))
        f = np.zeros((new, new))
        f[:cap, :cap] = self._factor
        b = np.zeros((len(self._a), new))
        b[:, :cap] = self._basis
        self._factor, self._basis = f, b


def rank_one_update(state, new_index):
    """Add ``new_index`` to the design in O(N n) work.

    Raises NumericalBreakdownError when the MSPE at ``new_index`` is not
    above ``PIVOT_RTOL * max_diag``.
    """
    new_index = int(new_index)
    if new_index in state.selected:
        raise ValidationError(f"index {new_index} is already selected")
    pivot = state.sigma[new_index]
    if not pivot > PIVOT_RTOL * state.max_diag:
        raise NumericalBreakdownError(
            f"MSPE at {new_index} is {pivot:.3e}, numerical rank exhausted"
        )
    m = state.n_selected
    if m == state._factor.shape[0]:
        state._grow()
    row = state._basis[new_index, :m].copy()
    d = np.sqrt(pivot)
    col = (state._a[:, new_index] - state._basis[:, :m] @ row) / d
    state._basis[:, m] = col
    state._factor[m, :m] = row
    state._factor[m, m] = d
    state.sigma -= col * col
    np.maximum(state.sigma, 0.0, out=state.sigma)
    state.selected.append(new_index)
    return state


@dataclass
class LandmarkTrace:
    """Ordered greedy design with the max-MSPE recorded before each pick.

    ``sigma_history[n]`` is the largest MSPE given the first ``n`` landmarks,
    so ``sigma_history[0]`` is the largest diagonal entry of the kernel.
    """

    selected: list
    sigma_history: list
    stop_reason: str
    params: dict = field(default_factory=dict)
    final_max_mspe: float = None
    final_mspe: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.selected)

    def to_dict(self):
        return {
            "selected": [int(i) for i in self.selected],
            "sigma_history": [float(s) for s in self.sigma_history],
            "stop_reason": self.stop_reason,
            "final_max_mspe": None if self.final_max_mspe is None else float(self.final_max_mspe),
            "params": self.params,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["selected"]), list(d["sigma_history"]), d["stop_reason"],
                   dict(d.get("params", {})), d.get("final_max_mspe"))

    @classmethod
    def read_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def write_json(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["step", "vertex_index", "sigma"])
            for step, (i, s) in enumerate(zip(self.selected, self.sigma_history), start=1):
                out.writerow([step, int(i), repr(float(s))])


def gp_landmark(K, budget, tolerance=None, tie_rule="lowest", seed=None, params=None):
    """Greedy max-MSPE landmarking.

    Stops after ``budget`` landmarks, or earlier once the largest MSPE drops
    to ``tolerance * max_diag`` or the numerical rank is exhausted.
    """
    a = _entries(K)
    n = len(a)
    budget = int(budget)
    if not 1 <= budget <= n:
        raise ValidationError(f"number of landmarks must lie in [1, {n}], got {budget}")
    if tolerance is not None and tolerance < 0:
        raise ValidationError("tolerance must be nonnegative")
    if tie_rule not in TIE_RULES:
        raise ValidationError(f"unknown tie rule {tie_rule!r}")
    rng = np.random.default_rng(seed) if tie_rule == "random" else None

    state = PosteriorState(a, capacity=min(budget, 64))
    floor = PIVOT_RTOL * state.max_diag
    tie_tol = TIE_RTOL * state.max_diag
    history = []
    reason = BUDGET
    while state.n_selected < budget:
        top = float(state.sigma.max())
        if top <= floor or (tolerance is not None and top <= tolerance * state.max_diag):
            reason = TOLERANCE
            break
        idx = select_next(state.sigma, tie_rule, tie_tol, rng, exclude=state.selected)
        try:
            rank_one_update(state, idx)
        except NumericalBreakdownError:
            logger.info("numerical rank exhausted after %d landmarks", state.n_selected)
            reason = TOLERANCE
            break
        history.append(top)

    meta = {"tie_rule": tie_rule, "kernel_kind": getattr(K, "kind", None),
            "epsilon": getattr(K, "bandwidth", None)}
    if tie_rule == "random":
        meta["seed"] = seed
    meta.update(params or {})
    return LandmarkTrace(list(state.selected), history, reason, meta,
                         float(state.sigma.max()), state.sigma.copy())


def pivoted_cholesky(K, L, return_schur=False):
    """Right-looking diagonally pivoted Cholesky, ``L`` steps.

    Each pivot is the largest diagonal entry of the current Schur complement
    (same tie rule as :func:`gp_landmark`).  Returns the pivot order and the
    ``(N, L)`` factor ``F`` in original row order, with ``F @ F.T``
    approximating ``K``.  ``F[pivots]`` is lower triangular.
    """
    S = np.array(_entries(K), dtype=np.float64)
    n = len(S)
    L = int(L)
    if not 0 <= L <= n:
        raise ValidationError(f"number of steps must lie in [0, {n}], got {L}")
    max_diag = float(np.diag(S).max())
    F = np.zeros((n, L))
    pivots = []
    for k in range(L):
        d = np.diag(S)
        p = select_next(d, "lowest", TIE_RTOL * max_diag, exclude=pivots)
        if not d[p] > PIVOT_RTOL * max_diag:
            raise NumericalBreakdownError(f"nonpositive pivot {d[p]:.3e} at step {k}")
        col = S[:, p] / np.sqrt(d[p])
        F[:, k] = col
        S -= np.outer(col, col)
        pivots.append(p)
    if return_schur:
        return pivots, F, np.diag(S).copy()
    return pivots, F
