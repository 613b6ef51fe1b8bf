"""John and Loewner positioning: extremal ellipsoids, contact points, weights.

The decomposition recovered here is the algebraic certificate that a body is
in John position: unit contact vectors u_j and positive weights a_j with
sum a_j u_j (x) u_j = Id and sum a_j u_j = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from . import lp
from .bodies import Ellipsoid, HPolytope, VPolytope, gauge_many, is_bounded
from .errors import (
    DegenerateBody,
    DegeneratePointSet,
    NoValidDecomposition,
    SolverFailure,
    TooFewContacts,
    Unbounded,
)

CONTACT_TOL = 1e-5
WEIGHT_STRIP_TOL = 1e-10
IDENTITY_RESIDUAL_CAP = 1e-4


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> linear @ x + shift with invertible linear part."""

    linear: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=float)
        shift = np.asarray(self.shift, dtype=float).ravel()
        if linear.shape != (shift.size, shift.size):
            raise ValueError("linear part must be n x n")
        if abs(np.linalg.det(linear)) == 0.0:
            raise ValueError("linear part must be invertible")
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "shift", shift)

    def apply(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = pts @ self.linear.T + self.shift
        return out if np.asarray(points).ndim > 1 else out[0]

    def apply_h(self, P: HPolytope) -> HPolytope:
        """Image of an H-polytope: y = Lx + s turns <v,x> <= c into
        <L^-T v, y> <= c + <L^-T v, s>."""
        vt = np.linalg.solve(self.linear.T, P.normals.T).T
        return HPolytope(vt, P.offsets + vt @ self.shift)

    def apply_v(self, V: VPolytope) -> VPolytope:
        return VPolytope(self.apply(V.vertices))

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.shift)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: x -> self(other(x))."""
        return AffineMap(self.linear @ other.linear, self.linear @ other.shift + self.shift)


@dataclass(frozen=True, eq=False)
class JohnDecomposition:
    """Unit contact vectors with nonnegative weights reproducing the identity."""

    dim: int
    contacts: np.ndarray
    weights: np.ndarray
    residual_identity: float
    residual_barycenter: float
    source_indices: np.ndarray = None

    def __post_init__(self):
        contacts = np.atleast_2d(np.asarray(self.contacts, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if contacts.shape[0] != weights.size:
            raise ValueError("one weight per contact")
        if contacts.shape[1] != self.dim:
            raise ValueError("contact vectors must have length dim")
        norms = np.linalg.norm(contacts, axis=1)
        if np.abs(norms - 1.0).max() > 1e-8:
            raise ValueError("contacts must be unit vectors")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        idx = self.source_indices
        idx = np.arange(len(weights)) if idx is None else np.asarray(idx, dtype=int)
        object.__setattr__(self, "contacts", contacts)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "source_indices", idx)

    @property
    def size(self) -> int:
        return len(self.weights)

    def moment_matrix(self) -> np.ndarray:
        return np.einsum("j,ji,jk->ik", self.weights, self.contacts, self.contacts)

    def barycenter(self) -> np.ndarray:
        return self.weights @ self.contacts

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "contacts": self.contacts.tolist(),
                "weights": self.weights.tolist(),
                "residuals": {
                    "identity": self.residual_identity,
                    "barycenter": self.residual_barycenter,
                },
                "source_indices": self.source_indices.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "JohnDecomposition":
        data = json.loads(text)
        return cls(
            dim=data["dim"],
            contacts=np.array(data["contacts"], dtype=float),
            weights=np.array(data["weights"], dtype=float),
            residual_identity=data["residuals"]["identity"],
            residual_barycenter=data["residuals"]["barycenter"],
            source_indices=np.array(data.get("source_indices", range(len(data["weights"])))),
        )


def _mvie_cvxpy(P: HPolytope):
    import cvxpy as cp

    n = P.dim
    B = cp.Variable((n, n), PSD=True)
    d = cp.Variable(n)
    constraints = [
        cp.norm(B @ P.normals[i]) + P.normals[i] @ d <= P.offsets[i]
        for i in range(P.n_halfspaces)
    ]
    problem = cp.Problem(cp.Maximize(cp.log_det(B)), constraints)
    tight = {"tol_gap_abs": 1e-11, "tol_gap_rel": 1e-11, "tol_feas": 1e-11}
    # "optimal_inaccurate" under the tightened tolerances still beats the
    # default-tolerance "optimal" by an order of magnitude; feasibility is
    # re-certified by the shrink-to-fit step either way.
    for solver, kwargs in (
        (cp.CLARABEL, tight),
        (cp.CLARABEL, {}),
        (cp.SCS, {"eps": 1e-10, "max_iters": 200_000}),
    ):
        try:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                problem.solve(solver=solver, **kwargs)
        except cp.error.SolverError:
            continue
        if problem.status in ("optimal", "optimal_inaccurate") and B.value is not None:
            return np.asarray(B.value), np.asarray(d.value)
    raise SolverFailure(f"inscribed-ellipsoid solve failed with status {problem.status!r}")


def max_inscribed_ellipsoid(P: HPolytope) -> Ellipsoid:
    """Maximum-volume inscribed ellipsoid of a bounded full-dimensional polytope.

    log-det program over the ellipsoid parameterization {Bu + d : |u| <= 1};
    the result is shrunk onto the feasible side so E <= P holds facet by
    facet.
    """
    if not is_bounded(P):
        raise Unbounded("inscribed ellipsoid needs a bounded polytope")
    center, radius = lp.chebyshev_center(P.normals, P.offsets)
    if radius <= 1e-9:
        raise DegenerateBody("polytope has empty interior")
    n = P.dim
    if n == 1:
        lo = -lp.support_value(P.normals, P.offsets, np.array([-1.0]))
        hi = lp.support_value(P.normals, P.offsets, np.array([1.0]))
        half = 0.5 * (hi - lo)
        return Ellipsoid(np.array([0.5 * (hi + lo)]), np.array([[1.0 / half**2]]))
    B, d = _mvie_cvxpy(P)
    B = 0.5 * (B + B.T)
    # shrink so that sup over each facet is certified: sup_E <v,x> = <v,d> + |Bv|
    sup_terms = np.linalg.norm(P.normals @ B, axis=1)
    slack = P.offsets - P.normals @ d
    if np.any(slack <= 0.0):
        raise SolverFailure("ellipsoid center escaped the polytope")
    t = float(np.min(slack / np.maximum(sup_terms, 1e-300)))
    if t < 1.0:
        B = B * t
    eigvals, eigvecs = np.linalg.eigh(B)
    if eigvals[0] <= 0.0:
        raise DegenerateBody("inscribed ellipsoid collapsed")
    inv_sq = eigvecs @ np.diag(1.0 / eigvals**2) @ eigvecs.T
    return Ellipsoid(d, 0.5 * (inv_sq + inv_sq.T))


def min_enclosing_ellipsoid(points, tol: float = 1e-8, max_iter: int = 500_000) -> Ellipsoid:
    """Loewner ellipsoid of a point set by Khachiyan multiplicative weights.

    Uses Wolfe-Atwood away steps for linear local convergence; stops when the
    lifted dual gap is within tol on both sides, then inflates minimally so
    every point satisfies the quadratic within 1 + 1e-8.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = pts.shape
    centered_rank = np.linalg.matrix_rank(pts - pts.mean(axis=0), tol=1e-9)
    if centered_rank < n:
        raise DegeneratePointSet("points do not affinely span the space")
    q = np.hstack([pts, np.ones((m, 1))])
    d = n + 1
    u = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        V = q.T @ (q * u[:, None])
        try:
            Vi = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            raise DegeneratePointSet("weight matrix became singular")
        w = np.einsum("ij,jk,ik->i", q, Vi, q)
        i_hi = int(np.argmax(w))
        k_hi = w[i_hi]
        active = u > 0.0
        w_active = np.where(active, w, np.inf)
        i_lo = int(np.argmin(w_active))
        k_lo = w_active[i_lo]
        if k_hi <= d * (1.0 + tol) and k_lo >= d * (1.0 - tol):
            break
        if (k_hi - d) >= (d - k_lo):
            step = (k_hi - d) / (d * (k_hi - 1.0))
            u *= 1.0 - step
            u[i_hi] += step
        else:
            if k_lo > 1.0:
                step = (d - k_lo) / (d * (k_lo - 1.0))
            else:
                step = np.inf
            cap = u[i_lo] / (1.0 - u[i_lo]) if u[i_lo] < 1.0 else np.inf
            step = min(step, cap)
            u *= 1.0 + step
            u[i_lo] = max(u[i_lo] - step, 0.0)
            u /= u.sum()
    center = u @ pts
    S = pts.T @ (pts * u[:, None]) - np.outer(center, center)
    if n == 1:
        H = np.array([[1.0 / S[0, 0]]])
    else:
        H = np.linalg.inv(S) / n
    H = 0.5 * (H + H.T)
    E = Ellipsoid(center, H)
    quad = E.boundary_quadratic(pts)
    peak = float(quad.max())
    if peak > 1.0 + 1e-8:
        E = Ellipsoid(center, H / peak)
    return E


def normalize(body, mode: str):
    """Map a body so its extremal ellipsoid becomes the unit ball.

    mode 'john' takes an HPolytope (maximum inscribed ellipsoid); mode
    'loewner' takes a VPolytope (minimum enclosing ellipsoid of its
    vertices).  Returns (AffineMap, normalized body).
    """
    if mode == "john":
        if not isinstance(body, HPolytope):
            raise TypeError("john normalization expects an HPolytope")
        E = max_inscribed_ellipsoid(body)
    elif mode == "loewner":
        if not isinstance(body, VPolytope):
            raise TypeError("loewner normalization expects a VPolytope")
        E = min_enclosing_ellipsoid(body.vertices)
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    eigvals, eigvecs = np.linalg.eigh(E.shape)
    root = eigvecs @ np.diag(np.sqrt(eigvals)) @ eigvecs.T
    T = AffineMap(root, -root @ E.center)
    normalized = T.apply_h(body) if mode == "john" else T.apply_v(body)
    return T, normalized


def extract_contacts(body, tol: float = CONTACT_TOL, symmetric: bool = False):
    """Unit contact vectors of a body in John/Loewner position, with indices.

    HPolytope: facets whose distance to the origin is 1 within tol (contact
    point = normalized facet normal).  VPolytope: vertices of norm 1 within
    tol.  Raises TooFewContacts below John's minimum (n+1, or n when the
    symmetric flag is set).
    """
    if isinstance(body, HPolytope):
        norms = np.linalg.norm(body.normals, axis=1)
        if np.any(body.offsets <= 0.0):
            raise ValueError("body must contain the origin in its interior")
        dist = body.offsets / norms
        mask = np.abs(dist - 1.0) <= tol
        vectors = body.normals[mask] / norms[mask, None]
    elif isinstance(body, VPolytope):
        norms = np.linalg.norm(body.vertices, axis=1)
        mask = np.abs(norms - 1.0) <= tol
        vectors = body.vertices[mask] / norms[mask, None]
    else:
        raise TypeError(f"unsupported body type {type(body)!r}")
    indices = np.flatnonzero(mask)
    n = body.dim
    minimum = n if symmetric else n + 1
    if len(indices) < minimum:
        raise TooFewContacts(
            f"found {len(indices)} contacts, need at least {minimum}; "
            "positioning tolerance may be too loose"
        )
    return vectors, indices


def recover_weights(contacts, source_indices=None) -> JohnDecomposition:
    """Nonnegative weights solving the stacked identity/barycenter/trace system.

    Off-diagonal identity rows carry sqrt(2) so the least-squares objective is
    the Frobenius distance; the NNLS residual doubles as the audit metric.
    Contacts with weight below 1e-10 are stripped.
    """
    U = np.atleast_2d(np.asarray(contacts, dtype=float))
    m, n = U.shape
    if m < n + 1:
        raise NoValidDecomposition(f"{m} contacts cannot span, need at least {n + 1}")
    rows = []
    target = []
    for p in range(n):
        for qi in range(p, n):
            scale = 1.0 if p == qi else math.sqrt(2.0)
            rows.append(scale * U[:, p] * U[:, qi])
            target.append(1.0 if p == qi else 0.0)
    for p in range(n):
        rows.append(U[:, p])
        target.append(0.0)
    rows.append(np.ones(m))
    target.append(float(n))
    A = np.array(rows)
    y = np.array(target)
    weights, _ = nnls(A, y)
    keep = weights > WEIGHT_STRIP_TOL
    if keep.sum() < n + 1:
        raise NoValidDecomposition("too few positive weights after stripping")
    U_kept = U[keep]
    w_kept = weights[keep]
    moment = np.einsum("j,ji,jk->ik", w_kept, U_kept, U_kept)
    residual_identity = float(np.abs(np.linalg.eigvalsh(moment - np.eye(n))).max())
    residual_barycenter = float(np.linalg.norm(w_kept @ U_kept))
    if residual_identity > IDENTITY_RESIDUAL_CAP:
        raise NoValidDecomposition(
            f"identity residual {residual_identity:.3e} exceeds {IDENTITY_RESIDUAL_CAP:.0e}; "
            "contact extraction may have missed points"
        )
    idx = np.arange(m) if source_indices is None else np.asarray(source_indices, dtype=int)
    return JohnDecomposition(
        dim=n,
        contacts=U_kept / np.linalg.norm(U_kept, axis=1, keepdims=True),
        weights=w_kept,
        residual_identity=residual_identity,
        residual_barycenter=residual_barycenter,
        source_indices=idx[keep],
    )


@dataclass(frozen=True)
class DecompositionReport:
    """Audit of the classical decomposition identities."""

    trace_error: float
    max_quadform_error: float
    ball_inside_margin: float
    tol: float

    @property
    def trace_ok(self) -> bool:
        return abs(self.trace_error) <= self.tol

    @property
    def quadform_ok(self) -> bool:
        return self.max_quadform_error <= self.tol

    @property
    def ball_inside_ok(self) -> bool:
        return self.ball_inside_margin <= 1.0 + self.tol

    @property
    def all_ok(self) -> bool:
        return self.trace_ok and self.quadform_ok and self.ball_inside_ok


def validate_decomposition(
    D: JohnDecomposition,
    tol: float = 1e-8,
    seed: int = 0,
    n_directions: int = 100,
) -> DecompositionReport:
    """Check sum a_j = n, the unit quadratic form, and (1/n)B inside conv(contacts)."""
    n = D.dim
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_directions, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    trace_error = float(D.weights.sum() - n)
    quad = np.einsum("j,kj->k", D.weights, (dirs @ D.contacts.T) ** 2)
    max_quadform_error = float(np.abs(quad - 1.0).max())
    hull = VPolytope(D.contacts)
    ball_points = dirs / n
    margins = gauge_many(hull, ball_points)
    return DecompositionReport(
        trace_error=trace_error,
        max_quadform_error=max_quadform_error,
        ball_inside_margin=float(margins.max()),
        tol=tol,
    )
