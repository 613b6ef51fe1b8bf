"""Subfamily selectors with certified volume/diameter control.

Three routes:
  * volume: John position, sparsified contact multiset sigma, plus a
    Caratheodory patch tau so the rescaled centroid stays in the hull;
  * contact: the delta=2 shortcut that keeps exactly the decomposition's
    contact half-spaces;
  * diameter: polar generators, Loewner position, thrifty approximation of
    the polar, and a bisection-certified containment factor.

Sign convention: the sparsifier reports the multiset mean u_bar; the
selection internally uses u := -u_bar when building the patch target
w = 3u/(2 sqrt(n) eps), matching the proof pipeline rather than the
sparsification contract (the two sources state opposite signs; only the
norm is contractual).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .bodies import (
    HPolytope,
    VPolytope,
    check_containment,
    enumerate_vertices,
    gauge_many,
    is_bounded,
    volume,
)
from .errors import (
    EmptyInterior,
    NotInHull,
    NotInPosition,
    OriginNotInterior,
    SandwichViolated,
    Unbounded,
)
from .john import (
    JohnDecomposition,
    extract_contacts,
    min_enclosing_ellipsoid,
    normalize,
    recover_weights,
)
from .sparsify import (
    SparseDecomposition,
    default_budget,
    epsilon_schedule,
    sparsify,
)

EXACT_ORACLE_CAP = 6
MC_ORACLE_CAP = 10
MC_RELATIVE_STDERR_CAP = 0.05
POSITION_AUDIT_TOL = 1e-6
MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Chosen indices plus the achieved and theoretical bound values."""

    indices: tuple
    s: int
    delta: float
    admissible_cap: int
    z: np.ndarray
    achieved: float | None
    bound: float
    pipeline: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("selected indices must be distinct")
        if self.s != len(idx):
            raise ValueError("s must equal the number of selected indices")
        if self.s > self.admissible_cap:
            raise ValueError("selection exceeds the admissible cap")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))

    def to_json(self) -> str:
        return json.dumps(
            {
                "indices": list(self.indices),
                "s": self.s,
                "delta": self.delta,
                "admissible_cap": self.admissible_cap,
                "z": self.z.tolist(),
                "achieved": self.achieved,
                "bound": self.bound,
                "pipeline": self.pipeline,
                "provenance": self.provenance,
            }
        )


@dataclass(frozen=True, eq=False)
class BLExponents:
    """Exponents of the approximate Brascamp-Lieb inequality in dimension n+1."""

    k: np.ndarray
    gamma: float
    sum_k: float

    def __post_init__(self):
        object.__setattr__(self, "k", np.asarray(self.k, dtype=float))


@dataclass(frozen=True)
class LiftedAudit:
    """Numerics of the dimension-lifting step of the volume proof."""

    lifted_min: float
    lifted_max: float
    t_norm: float
    a_min: float
    a_max: float
    epsilon: float

    @property
    def lifted_sandwich_ok(self) -> bool:
        return self.lifted_max <= 1 + self.epsilon + 1e-9 and self.lifted_min >= 1 - self.epsilon - 1e-9

    @property
    def t_bound_ok(self) -> bool:
        return self.t_norm <= self.epsilon + 1e-9


@dataclass(frozen=True, eq=False)
class ThriftyResult:
    """Small vector set X with B_2^n inside factor * conv(X)."""

    vectors: np.ndarray
    indices: tuple
    factor: float
    sparse: SparseDecomposition
    decomposition: JohnDecomposition
    provenance: dict = field(default_factory=dict)


def caratheodory_reduce(points, target, tol: float = 1e-8):
    """Convex combination of at most n+1 of the points reaching the target.

    Starts from any feasible LP solution and removes support by pivoting
    along affine dependencies, zeroing one coefficient per round.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.asarray(target, dtype=float)
    m, n = pts.shape
    mu = lp.convex_coefficients(pts, w)
    if mu is None:
        raise NotInHull("target is not a convex combination of the points")
    support = np.flatnonzero(mu > 1e-12)
    while len(support) > n + 1:
        G = np.vstack([pts[support].T, np.ones(len(support))])
        _, _, vt = np.linalg.svd(G)
        gamma = vt[-1]
        if np.abs(gamma).max() < 1e-14:
            break
        if gamma.max() <= 0.0:
            gamma = -gamma
        pos = gamma > 1e-14
        ratios = mu[support[pos]] / gamma[pos]
        t = ratios.min()
        mu[support] = np.maximum(mu[support] - t * gamma, 0.0)
        support = np.flatnonzero(mu > 1e-12)
    rho = mu[support]
    rho = rho / rho.sum()
    if np.linalg.norm(rho @ pts[support] - w) > tol:
        raise NotInHull(f"reduced combination misses the target beyond {tol}")
    return support.tolist(), rho


def _conic_reduce(columns: np.ndarray, coeffs: np.ndarray, max_support: int):
    """Shrink the support of a nonnegative combination without moving its value.

    columns is d x m; any conic combination can be carried by at most d
    linearly independent columns (Caratheodory for cones).
    """
    mu = coeffs.copy()
    support = np.flatnonzero(mu > 1e-12)
    while len(support) > max_support:
        sub = columns[:, support]
        _, s, vt = np.linalg.svd(sub)
        gamma = vt[-1]
        if s[-1] > 1e-10 * max(s[0], 1.0):
            break
        if gamma.max() <= 0.0:
            gamma = -gamma
        pos = gamma > 1e-14
        if not np.any(pos):
            break
        t = (mu[support[pos]] / gamma[pos]).min()
        mu[support] = np.maximum(mu[support] - t * gamma, 0.0)
        support = np.flatnonzero(mu > 1e-12)
    return support, mu


def _lifted_vectors(S: SparseDecomposition, source: JohnDecomposition):
    n = source.dim
    scale = math.sqrt(n / (n + 1.0))
    picks = source.contacts[list(S.sigma)]
    v = np.hstack([-picks, np.full((len(picks), 1), 1.0 / math.sqrt(n))]) * scale
    b = (n + 1.0) / len(picks)
    return v, b


def bl_exponents(S: SparseDecomposition, source: JohnDecomposition, epsilon: float | None = None) -> BLExponents:
    """Exponents k_j = b_j <A^-1 v_j, v_j> of the lifted operator A.

    Verifies the (1 +- 2 eps) sandwich first and raises SandwichViolated when
    it fails; by the trace identity the exponents sum to n+1.
    """
    eps = S.epsilon_target if epsilon is None else float(epsilon)
    V, b = _lifted_vectors(S, source)
    A = b * V.T @ V
    lam = np.linalg.eigvalsh(A)
    if lam[-1] > 1 + 2 * eps + 1e-9 or lam[0] < 1 - 2 * eps - 1e-9:
        raise SandwichViolated(
            f"lifted operator spectrum [{lam[0]:.6f}, {lam[-1]:.6f}] escapes 1 +- {2 * eps:.6f}"
        )
    k = b * np.einsum("ji,ji->j", V @ np.linalg.inv(A), V)
    return BLExponents(k=k, gamma=(1 + 2 * eps) / (1 - 2 * eps), sum_k=float(k.sum()))


def lifted_operator_audit(S: SparseDecomposition, source: JohnDecomposition) -> LiftedAudit:
    """Assemble the lifted centered operator and the rank-two remainder T."""
    n = source.dim
    eps = S.epsilon_target
    V, b = _lifted_vectors(S, source)
    u3 = -S.centroid  # proof-side sign convention
    v = -math.sqrt(n / (n + 1.0)) * np.concatenate([u3, [0.0]])
    shifted = V + v
    L = b * shifted.T @ shifted
    lam_l = np.linalg.eigvalsh(L)
    T = np.zeros((n + 1, n + 1))
    T[:n, :n] = -n * np.outer(u3, u3)
    T[:n, n] = -math.sqrt(n) * u3
    T[n, :n] = -math.sqrt(n) * u3
    t_norm = float(np.abs(np.linalg.eigvalsh(T)).max())
    A = b * V.T @ V
    lam_a = np.linalg.eigvalsh(A)
    return LiftedAudit(
        lifted_min=float(lam_l[0]),
        lifted_max=float(lam_l[-1]),
        t_norm=t_norm,
        a_min=float(lam_a[0]),
        a_max=float(lam_a[-1]),
        epsilon=eps,
    )


def _normalize_family(family: HPolytope) -> HPolytope:
    if np.any(family.offsets <= 0.0):
        raise OriginNotInterior("half-space family must have positive offsets")
    return family.normalized_offsets()


def _volume_ratio(family: HPolytope, indices, oracle: str, mc_samples: int, seed: int):
    """(ratio, mode, detail) with ratio = (vol(Q)/vol(P))^(1/n) or None."""
    n = family.dim
    if oracle == "auto":
        mode = "exact" if n <= EXACT_ORACLE_CAP else ("mc" if n <= MC_ORACLE_CAP else "skipped")
    else:
        mode = oracle
    if mode == "skipped" or mode == "skip":
        return None, "skipped", {}
    Q = family.subfamily(sorted(indices))
    if mode == "exact":
        vol_p, _ = volume(family, mode="exact")
        vol_q, _ = volume(Q, mode="exact")
        ratio = (vol_q / vol_p) ** (1.0 / n)
        return float(ratio), "exact", {"vol_p": vol_p, "vol_q": vol_q}
    vol_p, err_p = volume(family, mode="monte_carlo", mc_samples=mc_samples, seed=seed)
    vol_q, err_q = volume(Q, mode="monte_carlo", mc_samples=mc_samples, seed=seed + 1)
    detail = {"vol_p": vol_p, "vol_q": vol_q, "stderr_p": err_p, "stderr_q": err_q}
    if vol_p <= 0.0 or err_p / vol_p > MC_RELATIVE_STDERR_CAP or vol_q <= 0.0 or err_q / vol_q > MC_RELATIVE_STDERR_CAP:
        return None, "skipped", detail
    ratio = (vol_q / vol_p) ** (1.0 / n)
    return float(ratio), "mc", detail


def select_volume_subfamily(
    family: HPolytope,
    delta: float,
    strategy: str = "barrier",
    seed: int = 0,
    budget_factor: float = 16.0,
    budget: int | None = None,
    oracle: str = "auto",
    mc_samples: int = 1_000_000,
    contact_tol: float = 1e-5,
) -> SelectionResult:
    """Volume-certified subfamily sigma union tau of an offset-1 family.

    Positions the intersection, sparsifies its contact decomposition at the
    scheduled accuracy, patches with a Caratheodory reduction of the rescaled
    centroid, and measures (vol(Q)/vol(P))^(1/n) in the original coordinates
    (the ratio is affine-invariant).
    """
    P0 = _normalize_family(family)
    if not is_bounded(P0):
        raise Unbounded("family intersection is unbounded")
    n = P0.dim
    T, Pn = normalize(P0, "john")
    vectors, idx = extract_contacts(Pn, tol=contact_tol)
    D = recover_weights(vectors, source_indices=idx)
    eps = epsilon_schedule(n, delta, "volume")
    if budget is None:
        budget = default_budget(n, eps, budget_factor)
    S = sparsify(D, eps, budget=budget, strategy=strategy, seed=seed)
    u = -S.centroid
    w = 3.0 * u / (2.0 * math.sqrt(n) * eps)
    w_norm = float(np.linalg.norm(w))
    if w_norm > 1.0 / n + 1e-9:
        raise RuntimeError("internal invariant broken: ||w|| exceeds 1/n despite audit")
    tau, rho = caratheodory_reduce(D.contacts, w)
    local = sorted(set(S.sigma) | set(tau))
    indices = sorted(int(D.source_indices[j]) for j in local)
    cap = int(budget) + n + 1
    audit = lifted_operator_audit(S, D)
    bl = bl_exponents(S, D)
    ratio, mode, detail = _volume_ratio(P0, indices, oracle, mc_samples, seed)
    provenance = {
        "epsilon": eps,
        "budget": int(budget),
        "strategy": strategy,
        "seed": seed,
        "sigma_size": S.size,
        "sigma_distinct": len(set(S.sigma)),
        "tau_size": len(tau),
        "contact_count": D.size,
        "residual_identity": D.residual_identity,
        "residual_barycenter": D.residual_barycenter,
        "epsilon_achieved": S.epsilon_achieved,
        "centroid_norm": S.centroid_norm,
        "w_norm": w_norm,
        "oracle_mode": mode,
        "oracle_detail": detail,
        "lifted": {
            "min": audit.lifted_min,
            "max": audit.lifted_max,
            "t_norm": audit.t_norm,
            "a_min": audit.a_min,
            "a_max": audit.a_max,
        },
        "bl": {"sum_k": bl.sum_k, "gamma": bl.gamma, "max_k_over_b": float(bl.k.max() * S.size / (n + 1.0))},
        "implied_alpha": len(indices) / float(n) ** delta,
    }
    return SelectionResult(
        indices=tuple(indices),
        s=len(indices),
        delta=float(delta),
        admissible_cap=cap,
        z=np.zeros(n),
        achieved=ratio,
        bound=float(n) ** ((3.0 - delta) / 2.0),
        pipeline="volume",
        provenance=provenance,
    )


def select_contact_subfamily(
    family: HPolytope,
    oracle: str = "auto",
    mc_samples: int = 1_000_000,
    seed: int = 0,
    contact_tol: float = 1e-5,
) -> SelectionResult:
    """The delta=2 route: keep the contact half-spaces carrying the weights.

    The decomposition support never needs more than n(n+3)/2 contacts; a
    conic pivot reduces it when the solver returns extra ones.
    """
    P0 = _normalize_family(family)
    if not is_bounded(P0):
        raise Unbounded("family intersection is unbounded")
    n = P0.dim
    T, Pn = normalize(P0, "john")
    vectors, idx = extract_contacts(Pn, tol=contact_tol)
    D = recover_weights(vectors, source_indices=idx)
    cap = n * (n + 3) // 2
    if D.size > cap:
        cols = []
        for u in D.contacts:
            outer = np.outer(u, u)
            rows = [outer[p, q] * (1.0 if p == q else math.sqrt(2.0)) for p in range(n) for q in range(p, n)]
            cols.append(np.concatenate([rows, u]))
        columns = np.array(cols).T
        support, mu = _conic_reduce(columns, D.weights, cap)
        contacts = D.contacts[support]
        weights = mu[support]
        source = D.source_indices[support]
    else:
        contacts, weights, source = D.contacts, D.weights, D.source_indices
    indices = sorted(int(i) for i in source)
    ratio, mode, detail = _volume_ratio(P0, indices, oracle, mc_samples, seed)
    provenance = {
        "contact_count": D.size,
        "support_count": len(indices),
        "residual_identity": D.residual_identity,
        "residual_barycenter": D.residual_barycenter,
        "oracle_mode": mode,
        "oracle_detail": detail,
    }
    return SelectionResult(
        indices=tuple(indices),
        s=len(indices),
        delta=2.0,
        admissible_cap=cap,
        z=np.zeros(n),
        achieved=ratio,
        bound=float(n) ** 0.5,
        pipeline="contact",
        provenance=provenance,
    )


def _audit_loewner_position(points: np.ndarray, tol: float = POSITION_AUDIT_TOL):
    E = min_enclosing_ellipsoid(points)
    center_err = float(np.linalg.norm(E.center))
    shape_err = float(np.abs(np.linalg.eigvalsh(E.shape - np.eye(points.shape[1]))).max())
    if center_err > tol or shape_err > tol:
        raise NotInPosition(
            f"re-solve audit failed: center error {center_err:.2e}, shape error {shape_err:.2e}"
        )


def thrifty_approximation(
    K: VPolytope,
    delta: float,
    strategy: str = "barrier",
    seed: int = 0,
    budget_factor: float = 16.0,
    contact_tol: float = 1e-5,
    n_probe_directions: int = 256,
) -> ThriftyResult:
    """Few sphere contacts X of a Loewner-positioned body with B inside t conv(X).

    The factor t is exact: the gauge of conv(X) over the sphere is maximal at
    the farthest vertex of the polar {y : <y, x> <= 1 for x in X}, so t is
    that vertex norm; seeded sphere probes cross-check it from below.
    """
    _audit_loewner_position(K.vertices)
    n = K.dim
    vectors, idx = extract_contacts(K, tol=contact_tol)
    D = recover_weights(vectors, source_indices=idx)
    eps = epsilon_schedule(n, delta, "diameter")
    budget = default_budget(n, eps, budget_factor)
    S = sparsify(D, eps, budget=budget, strategy=strategy, seed=seed)
    # the uncentered operator keeps the 1 +- 2 eps sandwich after removing T
    picks = D.contacts[list(S.sigma)]
    A = (n / len(picks)) * picks.T @ picks
    lam = np.linalg.eigvalsh(A)
    if lam[-1] > 1 + 2 * eps + 1e-9 or lam[0] < 1 - 2 * eps - 1e-9:
        raise SandwichViolated("uncentered operator escaped the 1 +- 2 eps sandwich")
    u = -S.centroid
    w = 3.0 * u / (2.0 * math.sqrt(n) * eps)
    tau, _ = caratheodory_reduce(D.contacts, w)
    local = sorted(set(S.sigma) | set(tau))
    X = D.contacts[local]
    indices = tuple(int(D.source_indices[j]) for j in local)
    bl = bl_exponents(S, D)
    polar = HPolytope(X, np.ones(len(X)))
    rng = np.random.default_rng(seed)
    probes = rng.normal(size=(n_probe_directions, n))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    if n <= 8:
        pverts = enumerate_vertices(polar).vertices
        factor = float(np.linalg.norm(pverts, axis=1).max())
        # LP cross-checks: gauge at the extreme direction matches the vertex
        # norm, and no probe direction beats it
        top = pverts[int(np.argmax(np.linalg.norm(pverts, axis=1)))]
        hull = VPolytope(X)
        lp_val = float(gauge_many(hull, top[None, :] / np.linalg.norm(top))[0])
        if abs(lp_val - factor) > 1e-6 * max(factor, 1.0):
            raise RuntimeError("polar-vertex factor and LP gauge disagree")
        probe_vals = gauge_many(hull, probes)
        factor_mode = "exact"
        if probe_vals.max() > factor + 1e-9:
            raise RuntimeError("sphere probe exceeded the polar-vertex factor")
    else:
        hull = VPolytope(X)
        factor = float(gauge_many(hull, probes).max())
        factor_mode = "sampled"
    provenance = {
        "epsilon": eps,
        "budget": int(budget),
        "strategy": strategy,
        "seed": seed,
        "sigma_size": S.size,
        "tau_size": len(tau),
        "contact_count": D.size,
        "epsilon_achieved": S.epsilon_achieved,
        "centroid_norm": S.centroid_norm,
        "factor_mode": factor_mode,
        "bl": {"sum_k": bl.sum_k, "gamma": bl.gamma},
        "uncentered_spectrum": [float(lam[0]), float(lam[-1])],
    }
    return ThriftyResult(
        vectors=X,
        indices=indices,
        factor=factor,
        sparse=S,
        decomposition=D,
        provenance=provenance,
    )


def certify_containment_factor(
    inner: HPolytope,
    outer: HPolytope,
    center,
    lo: float = 1.0,
    hi: float | None = None,
    iterations: int = 40,
):
    """Smallest beta with center + inner inside beta (center + outer), by bisection.

    The vertex set of the translated inner body is enumerated once and the
    per-beta predicate is the same gauge test check_containment performs.
    """
    center = np.asarray(center, dtype=float)
    inner_t = inner.translate(center)
    outer_t = outer.translate(center)
    verts = enumerate_vertices(inner_t).vertices
    vals = gauge_many(outer_t, verts)

    def satisfied(beta: float) -> bool:
        return bool(vals.max() <= beta + 1e-12)

    if hi is None:
        hi = 10.0 * outer.dim**2
    expansions = 0
    while not satisfied(hi):
        hi *= 4.0
        expansions += 1
        if expansions > 8:
            raise Unbounded("containment factor did not certify at any tested scale")
    if satisfied(lo):
        return lo
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


def select_diameter_subfamily(
    family: list,
    delta: float,
    strategy: str = "barrier",
    seed: int = 0,
    budget_factor: float = 16.0,
    contact_tol: float = 1e-5,
) -> SelectionResult:
    """Few bodies whose intersection is containment-certified against the full one.

    Pipeline: translate the deep point of P to the origin, collect the
    polar generators of all bodies, put their hull in Loewner position,
    thrifty-approximate it, attribute each kept contact to a body (minimal
    support value, ties to the lowest index), and certify beta by bisection.
    """
    bodies = list(family)
    if not bodies:
        raise ValueError("family must be nonempty")
    n = bodies[0].dim
    all_normals = np.vstack([B.normals for B in bodies])
    all_offsets = np.concatenate([B.offsets for B in bodies])
    P_all = HPolytope(all_normals, all_offsets)
    center, radius = lp.chebyshev_center(P_all.normals, P_all.offsets)
    if not np.isfinite(radius) or radius <= 1e-9:
        if np.isfinite(radius):
            raise EmptyInterior("family intersection has no interior point")
        raise Unbounded("family intersection is unbounded")
    if not is_bounded(P_all):
        raise Unbounded("family intersection is unbounded")
    translated = [B.translate(-center) for B in bodies]
    gens = []
    attribution = []
    for i, B in enumerate(translated):
        if np.any(B.offsets <= 0.0):
            raise EmptyInterior("deep point is not interior to every body")
        gens.append(B.normals / B.offsets[:, None])
        attribution.extend([i] * B.n_halfspaces)
    G = np.vstack(gens)
    attribution = np.array(attribution)
    K0 = VPolytope(G)
    Tmap, Kn = normalize(K0, "loewner")
    thrifty = thrifty_approximation(
        Kn,
        delta,
        strategy=strategy,
        seed=seed,
        budget_factor=budget_factor,
        contact_tol=contact_tol,
    )
    selected_bodies = set()
    attributions = []
    for gen_index in thrifty.indices:
        v = G[gen_index]
        values = []
        for i, B in enumerate(translated):
            values.append(lp.support_value(B.normals, B.offsets, v))
        values = np.array(values)
        best = int(np.argmin(values))
        if values[best] > 1.0 + MEMBERSHIP_TOL:
            best = int(attribution[gen_index])
        selected_bodies.add(best)
        attributions.append(best)
    indices = sorted(selected_bodies)
    Q = HPolytope(
        np.vstack([bodies[i].normals for i in indices]),
        np.concatenate([bodies[i].offsets for i in indices]),
    )
    z = -center
    beta = certify_containment_factor(Q, P_all, z)
    certificate = check_containment(Q, P_all, beta, z)
    if not certificate.satisfied:
        raise RuntimeError("bisection returned an uncertified containment factor")
    diam_detail = {}
    if n <= 8:
        from .bodies import diameter as _diameter

        dq = _diameter(Q)
        dp = _diameter(P_all)
        diam_detail = {"diam_q": dq, "diam_p": dp, "diam_ratio": dq / dp}
    eps = thrifty.provenance["epsilon"]
    cap = int(thrifty.provenance["budget"]) + n + 1
    provenance = {
        "epsilon": eps,
        "budget": thrifty.provenance["budget"],
        "strategy": strategy,
        "seed": seed,
        "thrifty_factor": thrifty.factor,
        "contact_count": thrifty.provenance["contact_count"],
        "sigma_size": thrifty.provenance["sigma_size"],
        "selected_generators": len(thrifty.indices),
        "attributions": attributions,
        "containment_margin": certificate.margin,
        "oracle_mode": "exact" if diam_detail else "skipped",
        **diam_detail,
        "implied_alpha": len(indices) / float(n) ** delta,
    }
    return SelectionResult(
        indices=tuple(indices),
        s=len(indices),
        delta=float(delta),
        admissible_cap=cap,
        z=z,
        achieved=float(beta),
        bound=float(n) ** (2.0 - delta / 2.0),
        pipeline="diameter",
        provenance=provenance,
    )
