"""Thin linear-programming helpers on top of scipy's HiGHS interface.

All solves are deterministic, which the experiment harness relies on for
byte-stable reports.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleBody, SolverFailure

_FREE = (None, None)


def _solve(c, A_ub, b_ub, A_eq=None, b_eq=None, bounds=None):
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds if bounds is not None else [_FREE] * len(c),
        method="highs",
    )
    return res


def feasible_point(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Any point of {x : Nx <= c}; raises InfeasibleBody when empty."""
    n = normals.shape[1]
    res = _solve(np.zeros(n), normals, offsets)
    if res.status == 2:
        raise InfeasibleBody("half-space intersection is empty")
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"feasibility LP ended with status {res.status}")
    return np.asarray(res.x, dtype=float)


def chebyshev_center(normals: np.ndarray, offsets: np.ndarray):
    """Deepest interior point: (center, inradius).

    Maximizes r subject to <v_i, x> + r ||v_i|| <= c_i.  The inradius can be
    infinite (slabs); in that case the returned radius is np.inf and the
    center is some feasible point.
    """
    m, n = normals.shape
    row_norms = np.linalg.norm(normals, axis=1)
    A = np.hstack([normals, row_norms[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    bounds = [_FREE] * n + [(0.0, None)]
    res = _solve(c, A, offsets, bounds=bounds)
    if res.status in (2, 3):
        # status 2 may be a presolve mislabel of an unbounded inradius;
        # feasible_point raises InfeasibleBody when the body is truly empty.
        return feasible_point(normals, offsets), np.inf
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"Chebyshev LP ended with status {res.status}")
    return np.asarray(res.x[:n], dtype=float), float(res.x[n])


def support_value(normals: np.ndarray, offsets: np.ndarray, direction: np.ndarray) -> float:
    """max <direction, x> over {Nx <= c}; np.inf when unbounded."""
    return support_point(normals, offsets, direction)[0]


def support_point(normals: np.ndarray, offsets: np.ndarray, direction: np.ndarray):
    """(max <direction, x>, argmax point); (np.inf, None) when unbounded."""
    res = _solve(-np.asarray(direction, dtype=float), normals, offsets)
    if res.status == 2:
        # HiGHS presolve can label an unbounded-but-feasible LP infeasible;
        # a zero-objective re-solve disambiguates.
        feasible_point(normals, offsets)
        return np.inf, None
    if res.status == 3:
        return np.inf, None
    if res.status != 0:
        raise SolverFailure(f"support LP ended with status {res.status}")
    return float(-res.fun), np.asarray(res.x, dtype=float)


def convex_coefficients(points: np.ndarray, target: np.ndarray):
    """Coefficients mu >= 0, sum 1, with sum_i mu_i points[i] = target.

    Returns None when the target is outside the convex hull.  HiGHS returns a
    basic solution, so the support already has at most dim+1 points for
    nondegenerate inputs.
    """
    m, n = points.shape
    A_eq = np.vstack([points.T, np.ones((1, m))])
    b_eq = np.concatenate([target, [1.0]])
    res = _solve(np.zeros(m), None, None, A_eq=A_eq, b_eq=b_eq, bounds=[(0.0, None)] * m)
    if res.status == 2:
        return None
    if res.status != 0 or res.x is None:
        raise SolverFailure(f"hull-membership LP ended with status {res.status}")
    return np.asarray(res.x, dtype=float)


def vpolytope_gauge_values(vertices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Gauge of conv(vertices) at each row of points via min total-mass LPs.

    gauge(x) = min sum(nu) s.t. V^T nu = x, nu >= 0; infeasible rows map to
    np.inf (the point is outside the cone spanned by the vertices).
    """
    m, n = vertices.shape
    out = np.empty(len(points))
    for k, x in enumerate(np.atleast_2d(points)):
        res = _solve(
            np.ones(m),
            None,
            None,
            A_eq=vertices.T,
            b_eq=np.asarray(x, dtype=float),
            bounds=[(0.0, None)] * m,
        )
        if res.status == 2:
            out[k] = np.inf
        elif res.status == 0:
            out[k] = max(float(res.fun), 0.0)
        else:
            raise SolverFailure(f"gauge LP ended with status {res.status}")
    return out


def cone_trapped_direction(rows: np.ndarray, tol: float = 1e-9):
    """A direction d != 0 with rows @ d <= 0, or None when only d = 0 works.

    Used both for recession-cone checks (rows = facet normals) and for
    origin-in-interior checks on vertex sets (rows = vertices).
    """
    m, n = rows.shape
    box = [(-1.0, 1.0)] * n
    for j in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[j] = -sign
            res = _solve(c, rows, np.zeros(m), bounds=box)
            if res.status != 0 or res.x is None:
                raise SolverFailure(f"cone LP ended with status {res.status}")
            if -res.fun > tol:
                return np.asarray(res.x, dtype=float)
    return None
