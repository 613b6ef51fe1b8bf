"""Polytope primitives: H/V representations, polarity, gauges, volume, diameter.

Conventions: an HPolytope is {x : <x, normal_i> <= offset_i}; a VPolytope is
conv(vertices).  All operations are pure functions on immutable values.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection

from . import lp
from .errors import (
    DegenerateBody,
    DimensionTooLarge,
    OriginNotInterior,
    Unbounded,
)

VERTEX_DEDUPE_TOL = 1e-9
EXACT_DIM_CAP = 8


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Intersection of half-spaces <x, v_i> <= c_i, stable index order."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).ravel()
        if normals.ndim != 2 or normals.shape[0] != offsets.shape[0]:
            raise ValueError("normals and offsets must have matching first dimension")
        if normals.shape[1] < 1:
            raise ValueError("dimension must be >= 1")
        if np.any(np.linalg.norm(normals, axis=1) == 0.0):
            raise ValueError("every normal must be nonzero")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_halfspaces(self) -> int:
        return self.normals.shape[0]

    def translate(self, t) -> "HPolytope":
        """The translated body P + t."""
        t = np.asarray(t, dtype=float)
        return HPolytope(self.normals, self.offsets + self.normals @ t)

    def scale(self, factor: float) -> "HPolytope":
        """Dilation about the origin."""
        return HPolytope(self.normals, self.offsets * float(factor))

    def subfamily(self, indices) -> "HPolytope":
        idx = np.asarray(indices, dtype=int)
        return HPolytope(self.normals[idx], self.offsets[idx])

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(pts @ self.normals.T <= self.offsets + tol, axis=1)

    def normalized_offsets(self) -> "HPolytope":
        """Rescale normals so every offset equals 1 (needs 0 in the interior)."""
        if np.any(self.offsets <= 0.0):
            raise OriginNotInterior("offset normalization needs strictly positive offsets")
        return HPolytope(self.normals / self.offsets[:, None], np.ones(self.n_halfspaces))

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "halfspaces": [
                    {"normal": list(v), "offset": c}
                    for v, c in zip(self.normals.tolist(), self.offsets.tolist())
                ],
            }
        )

    @classmethod
    def from_dict(cls, data: dict) -> "HPolytope":
        hs = data["halfspaces"]
        return cls(
            np.array([h["normal"] for h in hs], dtype=float),
            np.array([h["offset"] for h in hs], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "HPolytope":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of a nonempty finite point set."""

    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if vertices.shape[0] == 0:
            raise ValueError("vertex list must be nonempty")
        object.__setattr__(self, "vertices", vertices)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def to_json(self) -> str:
        return json.dumps({"dim": self.dim, "vertices": self.vertices.tolist()})

    @classmethod
    def from_dict(cls, data: dict) -> "VPolytope":
        return cls(np.array(data["vertices"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "VPolytope":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """{x : (x - center)^T shape (x - center) <= 1} with shape symmetric PD."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).ravel()
        shape = np.asarray(self.shape, dtype=float)
        if shape.shape != (center.size, center.size):
            raise ValueError("shape matrix must be n x n")
        scale = max(np.abs(shape).max(), 1.0)
        if np.abs(shape - shape.T).max() > 1e-10 * scale:
            raise ValueError("shape matrix must be symmetric")
        shape = 0.5 * (shape + shape.T)
        if np.linalg.eigvalsh(shape)[0] <= 0.0:
            raise ValueError("shape matrix must be positive definite")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return self.center.size

    def boundary_quadratic(self, points) -> np.ndarray:
        d = np.atleast_2d(points) - self.center
        return np.einsum("ki,ij,kj->k", d, self.shape, d)

    def log_volume_factor(self) -> float:
        """log of vol(E)/vol(B_2^n) = -0.5 log det(shape)."""
        sign, logdet = np.linalg.slogdet(self.shape)
        return -0.5 * logdet


@dataclass(frozen=True, eq=False)
class ContainmentCertificate:
    """Outcome of the scaled-containment test z + inner <= scale * (z + outer)."""

    inner: HPolytope
    outer: HPolytope
    scale: float
    center: np.ndarray
    satisfied: bool
    witness: np.ndarray | None = None
    margin: float = field(default=float("nan"))


def _interior_point(P: HPolytope):
    center, radius = lp.chebyshev_center(P.normals, P.offsets)
    return center, radius


def is_bounded(P: HPolytope) -> bool:
    """True iff every linear functional is bounded above on P.

    Decided by 2n coordinate LPs plus an explicit recession-cone emptiness
    check; raises InfeasibleBody on an empty intersection.
    """
    lp.feasible_point(P.normals, P.offsets)
    n = P.dim
    for j in range(n):
        for sign in (1.0, -1.0):
            d = np.zeros(n)
            d[j] = sign
            if not np.isfinite(lp.support_value(P.normals, P.offsets, d)):
                return False
    return lp.cone_trapped_direction(P.normals) is None


def _dedupe_points(points: np.ndarray, tol: float) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    keep = [pts[0]]
    for p in pts[1:]:
        if all(np.abs(p - q).max() > tol for q in keep[-64:]):
            keep.append(p)
        elif all(np.abs(p - q).max() > tol for q in keep):
            keep.append(p)
    return np.array(keep)


def _extreme_filter(points: np.ndarray) -> np.ndarray:
    """Keep only points that are vertices of conv(points)."""
    keep = []
    for i in range(len(points)):
        others = np.delete(points, i, axis=0)
        if len(others) == 0:
            keep.append(i)
            continue
        mu = lp.convex_coefficients(others, points[i])
        if mu is None:
            keep.append(i)
    return points[keep]


def _brute_force_vertices(P: HPolytope, tol: float) -> np.ndarray:
    m, n = P.normals.shape
    if math.comb(m, n) > 200_000:
        raise DegenerateBody("too many facet combinations for degenerate enumeration")
    pts = []
    for combo in itertools.combinations(range(m), n):
        A = P.normals[list(combo)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, P.offsets[list(combo)])
        if np.all(P.normals @ x <= P.offsets + 1e-8):
            pts.append(x)
    if not pts:
        raise DegenerateBody("no basic feasible points found")
    return _extreme_filter(_dedupe_points(np.array(pts), tol))


def enumerate_vertices(P: HPolytope, max_dim: int = EXACT_DIM_CAP) -> VPolytope:
    """Exact extreme points of a bounded polytope, deduplicated within 1e-9."""
    n = P.dim
    if n > max_dim:
        raise DimensionTooLarge(f"vertex enumeration capped at dimension {max_dim}")
    if not is_bounded(P):
        raise Unbounded("polytope has a recession direction")
    if n == 1:
        lo = -lp.support_value(P.normals, P.offsets, np.array([-1.0]))
        hi = lp.support_value(P.normals, P.offsets, np.array([1.0]))
        pts = np.array([[lo]]) if abs(hi - lo) <= VERTEX_DEDUPE_TOL else np.array([[lo], [hi]])
        return VPolytope(pts)
    center, radius = _interior_point(P)
    if radius > 1e-9:
        halfspaces = np.hstack([P.normals, -P.offsets[:, None]])
        hs = HalfspaceIntersection(halfspaces, center)
        pts = np.asarray(hs.intersections, dtype=float)
        if not np.all(np.isfinite(pts)):
            raise Unbounded("non-finite vertex produced despite boundedness check")
        pts = _dedupe_points(pts, VERTEX_DEDUPE_TOL)
    else:
        pts = _brute_force_vertices(P, VERTEX_DEDUPE_TOL)
    return VPolytope(pts)


def polar_dual(body):
    """Polar body, exchanging H- and V-representations.

    H-polytope {<x, v_i> <= c_i} with 0 interior maps to conv{v_i / c_i};
    V-polytope conv{p_i} with 0 interior maps to {<x, p_i> <= 1}.
    """
    if isinstance(body, HPolytope):
        if np.any(body.offsets <= 0.0):
            raise OriginNotInterior("0 is not interior to the H-polytope")
        return VPolytope(body.normals / body.offsets[:, None])
    if isinstance(body, VPolytope):
        if lp.cone_trapped_direction(body.vertices) is not None:
            raise OriginNotInterior("0 is not interior to the V-polytope")
        return HPolytope(body.vertices, np.ones(len(body.vertices)))
    raise TypeError(f"unsupported body type {type(body)!r}")


def remove_redundant_generators(V: VPolytope) -> VPolytope:
    """Drop generators interior to the hull of the others."""
    return VPolytope(_extreme_filter(_dedupe_points(V.vertices, VERTEX_DEDUPE_TOL)))


def prune_redundant(P: HPolytope, tol: float = 1e-9) -> HPolytope:
    """Drop half-spaces implied by the remaining ones (LP test per facet)."""
    keep = []
    m = P.n_halfspaces
    for i in range(m):
        rest = [j for j in range(m) if j != i and (j in keep or j > i)]
        if not rest:
            keep.append(i)
            continue
        sub = P.subfamily(rest)
        cap = HPolytope(
            np.vstack([sub.normals, P.normals[i][None]]),
            np.concatenate([sub.offsets, [P.offsets[i] + 1.0]]),
        )
        val = lp.support_value(cap.normals, cap.offsets, P.normals[i])
        if val > P.offsets[i] + tol:
            keep.append(i)
    return P.subfamily(keep)


def _affine_rank(points: np.ndarray, tol: float = 1e-9) -> int:
    centered = points - points.mean(axis=0)
    if len(points) == 1:
        return 0
    s = np.linalg.svd(centered, compute_uv=False)
    scale = s[0] if s[0] > 0 else 1.0
    return int(np.sum(s > tol * scale))


def _fan_volume(vertices: np.ndarray, apex: np.ndarray) -> float:
    n = vertices.shape[1]
    opts = "Qt" if n <= 4 else "Qt Qx"
    hull = ConvexHull(vertices, qhull_options=opts)
    total = 0.0
    fact = math.factorial(n)
    for simplex in hull.simplices:
        total += abs(np.linalg.det(vertices[simplex] - apex)) / fact
    return total


def volume(
    P: HPolytope,
    mode: str = "exact",
    mc_samples: int = 1_000_000,
    seed: int = 0,
):
    """(volume, stderr); stderr is 0.0 in exact mode.

    Exact mode triangulates a fan from the Chebyshev center over the facet
    triangulation of the vertex hull.  Monte Carlo mode draws i.i.d. uniform
    samples in the tight coordinate bounding box, so the estimate is unbiased
    and the reported standard error is the exact binomial one.
    """
    n = P.dim
    if mode == "exact":
        V = enumerate_vertices(P)
        if _affine_rank(V.vertices) < n:
            raise DegenerateBody("affine hull has dimension below the ambient space")
        if n == 1:
            return float(V.vertices.max() - V.vertices.min()), 0.0
        center, radius = _interior_point(P)
        if radius <= 1e-12:
            raise DegenerateBody("no interior point for fan triangulation")
        return _fan_volume(V.vertices, center), 0.0
    if mode != "monte_carlo":
        raise ValueError(f"unknown volume mode {mode!r}")
    if not is_bounded(P):
        raise Unbounded("Monte Carlo volume needs a bounded polytope")
    lo = np.empty(n)
    hi = np.empty(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        hi[j] = lp.support_value(P.normals, P.offsets, e)
        lo[j] = -lp.support_value(P.normals, P.offsets, -e)
    box_vol = float(np.prod(hi - lo))
    if box_vol <= 0.0:
        raise DegenerateBody("bounding box has zero volume")
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = int(mc_samples)
    chunk = 200_000
    while remaining > 0:
        k = min(chunk, remaining)
        pts = rng.uniform(lo, hi, size=(k, n))
        hits += int(np.sum(np.all(pts @ P.normals.T <= P.offsets, axis=1)))
        remaining -= k
    p = hits / mc_samples
    est = box_vol * p
    stderr = box_vol * math.sqrt(max(p * (1.0 - p), 0.0) / mc_samples)
    return est, stderr


def diameter(P: HPolytope) -> float:
    """Largest pairwise vertex distance (attained at vertices)."""
    V = enumerate_vertices(P).vertices
    if len(V) == 1:
        return 0.0
    sq = np.sum(V * V, axis=1)
    best = 0.0
    chunk = 1024
    for start in range(0, len(V), chunk):
        block = V[start : start + chunk]
        d2 = sq[start : start + chunk, None] + sq[None, :] - 2.0 * block @ V.T
        best = max(best, float(d2.max()))
    return math.sqrt(max(best, 0.0))


def gauge(body, x) -> float:
    """Minkowski functional inf{lambda > 0 : x in lambda * body}."""
    return float(gauge_many(body, np.atleast_2d(np.asarray(x, dtype=float)))[0])


def gauge_many(body, points: np.ndarray) -> np.ndarray:
    """Vectorized gauge evaluation; the interior precondition is checked once.

    Large V-polytope batches go through the polar's vertex set (the gauge is
    the support function of the polar), which is exact and avoids one LP per
    point; the LP path remains the fallback.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(body, HPolytope):
        if np.any(body.offsets <= 0.0):
            raise OriginNotInterior("gauge needs 0 in the interior (positive offsets)")
        vals = (points @ body.normals.T) / body.offsets
        return np.maximum(vals.max(axis=1), 0.0)
    if isinstance(body, VPolytope):
        if lp.cone_trapped_direction(body.vertices) is not None:
            raise OriginNotInterior("gauge needs 0 in the interior of the hull")
        if body.dim <= EXACT_DIM_CAP and len(points) >= 8:
            try:
                polar = HPolytope(body.vertices, np.ones(len(body.vertices)))
                pverts = enumerate_vertices(polar).vertices
                return np.maximum((points @ pverts.T).max(axis=1), 0.0)
            except (Unbounded, DegenerateBody):
                pass
        return lp.vpolytope_gauge_values(body.vertices, points)
    raise TypeError(f"unsupported body type {type(body)!r}")


def check_containment(inner: HPolytope, outer: HPolytope, scale: float, center) -> ContainmentCertificate:
    """Decide (center + inner) <= scale * (center + outer) by vertex gauges.

    The witness, when present, is a vertex of the translated inner body whose
    gauge in the translated outer body exceeds the scale.
    """
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    center = np.asarray(center, dtype=float)
    inner_t = inner.translate(center)
    outer_t = outer.translate(center)
    verts = enumerate_vertices(inner_t).vertices
    vals = gauge_many(outer_t, verts)
    margin = float(vals.max())
    if margin <= scale + 1e-12:
        return ContainmentCertificate(inner, outer, float(scale), center, True, None, margin)
    witness = verts[int(np.argmax(vals))]
    return ContainmentCertificate(inner, outer, float(scale), center, False, witness, margin)


def cube(n: int) -> HPolytope:
    """[-1, 1]^n as 2n offset-1 half-spaces."""
    eye = np.eye(n)
    return HPolytope(np.vstack([eye, -eye]), np.ones(2 * n))


def simplex_contacts(n: int) -> np.ndarray:
    """n+1 unit vectors with pairwise inner products -1/n (regular simplex frame).

    Built by centering the standard basis of R^{n+1} and expressing it in an
    orthonormal basis of the hyperplane sum(x) = 0.
    """
    raw = np.eye(n + 1) - np.ones((n + 1, n + 1)) / (n + 1)
    _, _, vt = np.linalg.svd(raw)
    pts = raw @ vt[:n].T
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts


def regular_simplex(n: int) -> HPolytope:
    """Regular simplex in John position: facets tangent to the unit ball."""
    return HPolytope(simplex_contacts(n), np.ones(n + 1))


def cross_polytope(n: int) -> HPolytope:
    """H-form of conv{+-e_i}: one facet per sign pattern."""
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    return HPolytope(signs, np.ones(len(signs)))


def cross_polytope_vertices(n: int) -> VPolytope:
    eye = np.eye(n)
    return VPolytope(np.vstack([eye, -eye]))
