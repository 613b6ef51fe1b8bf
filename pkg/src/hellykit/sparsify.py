"""Sparsified approximate decompositions of the identity.

Target contract: a multiset sigma of source indices (repetitions allowed)
whose centered, uniformly weighted second-moment operator

    (n/|sigma|) * sum_{j in sigma} (u_j - u)(u_j - u)^T,   u = mean over sigma,

has all eigenvalues in [1-eps, 1+eps] while ||u||_2 <= 2*eps/(3*sqrt(n)).
Size guarantee in the source theorem is n/(c eps^2) with an unspecified
constant; the default budget uses c = 1/16 and honest failure is
BudgetInfeasible.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetInfeasible, IndexOutOfRange
from .john import JohnDecomposition

EPSILON_MAX = 0.75
DEFAULT_BUDGET_FACTOR = 16.0
# producer-side safety margin so the independent auditor always agrees
_PRODUCER_MARGIN = 1e-9


def epsilon_schedule(n: int, delta: float, pipeline: str) -> float:
    """Accuracy as a function of the admissible intersection count n^delta.

    Both pipelines use (1/4) n^((1-delta)/2); the exponent is written
    (1/2 - delta/2) in the diameter argument but is the same number.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if not 1.0 <= delta <= 2.0:
        raise ValueError("delta must lie in [1, 2]")
    if pipeline not in ("volume", "diameter"):
        raise ValueError(f"unknown pipeline {pipeline!r}")
    return 0.25 * float(n) ** ((1.0 - delta) / 2.0)


def default_budget(n: int, epsilon: float, factor: float = DEFAULT_BUDGET_FACTOR) -> int:
    return int(math.ceil(factor * n / epsilon**2))


@dataclass(frozen=True, eq=False)
class SparseDecomposition:
    """Multiset sigma with uniform output weights n/|sigma|."""

    dim: int
    source_size: int
    sigma: tuple
    centroid: np.ndarray
    epsilon_target: float
    epsilon_achieved: float
    centroid_norm: float
    budget: int

    def __post_init__(self):
        sigma = tuple(int(j) for j in self.sigma)
        if len(sigma) == 0:
            raise ValueError("sigma must be nonempty")
        if len(sigma) > self.budget:
            raise ValueError("sigma exceeds the budget")
        if any(j < 0 or j >= self.source_size for j in sigma):
            raise IndexOutOfRange("sigma index outside the source decomposition")
        object.__setattr__(self, "sigma", tuple(sorted(sigma)))
        object.__setattr__(self, "centroid", np.asarray(self.centroid, dtype=float))

    @property
    def size(self) -> int:
        return len(self.sigma)

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "source_size": self.source_size,
                "sigma": list(self.sigma),
                "centroid": self.centroid.tolist(),
                "epsilon_target": self.epsilon_target,
                "epsilon_achieved": self.epsilon_achieved,
                "centroid_norm": self.centroid_norm,
                "budget": self.budget,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SparseDecomposition":
        d = json.loads(text)
        return cls(
            dim=d["dim"],
            source_size=d["source_size"],
            sigma=tuple(d["sigma"]),
            centroid=np.array(d["centroid"], dtype=float),
            epsilon_target=d["epsilon_target"],
            epsilon_achieved=d["epsilon_achieved"],
            centroid_norm=d["centroid_norm"],
            budget=d["budget"],
        )


@dataclass(frozen=True)
class AuditResult:
    lambda_min: float
    lambda_max: float
    centroid_norm: float
    passed: bool


def centroid_bound(n: int, epsilon: float) -> float:
    return 2.0 * epsilon / (3.0 * math.sqrt(n))


def _centered_stats(U: np.ndarray, sigma) -> tuple:
    """(lambda_min, lambda_max, centroid, centroid_norm) of the scaled operator."""
    n = U.shape[1]
    idx = np.asarray(sigma, dtype=int)
    s = len(idx)
    pts = U[idx]
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    M = (n / s) * centered.T @ centered
    lam = np.linalg.eigvalsh(M)
    return float(lam[0]), float(lam[-1]), centroid, float(np.linalg.norm(centroid))


def _feasible(lam_min, lam_max, cen_norm, epsilon, bound, margin=0.0) -> bool:
    return (
        lam_max - 1.0 <= epsilon - margin
        and 1.0 - lam_min <= epsilon - margin
        and cen_norm <= bound - margin
    )


def audit_sparsification(S: SparseDecomposition, source: JohnDecomposition) -> AuditResult:
    """Recompute the centered spectrum and centroid from scratch.

    Depends only on the unit vectors and sigma, never on the source weights,
    so rescaling the weights cannot change the verdict.
    """
    if any(j < 0 or j >= source.size for j in S.sigma):
        raise IndexOutOfRange("sigma index outside the source decomposition")
    lam_min, lam_max, _, cen_norm = _centered_stats(source.contacts, S.sigma)
    eps = S.epsilon_target
    passed = _feasible(lam_min, lam_max, cen_norm, eps, centroid_bound(source.dim, eps))
    return AuditResult(lam_min, lam_max, cen_norm, passed)


def _build(dim, m, sigma, epsilon, budget, U) -> SparseDecomposition:
    lam_min, lam_max, centroid, cen_norm = _centered_stats(U, sigma)
    return SparseDecomposition(
        dim=dim,
        source_size=m,
        sigma=tuple(sigma),
        centroid=centroid,
        epsilon_target=float(epsilon),
        epsilon_achieved=float(max(lam_max - 1.0, 1.0 - lam_min)),
        centroid_norm=cen_norm,
        budget=int(budget),
    )


def _barrier_select(U: np.ndarray, epsilon: float, budget: int, seed: int):
    """Deterministic greedy with two-sided barrier potentials.

    At step t the running centered sum is held between widening linear
    barriers; candidates are scored by the inverse-slack potential plus a
    hinge penalty on the running centroid.  The loop exits as soon as the
    exact audit quantities pass with margin.
    """
    m, n = U.shape
    bound = centroid_bound(n, epsilon)
    outer_all = np.einsum("mi,mj->mij", U, U)
    A = np.zeros((n, n))
    b = np.zeros(n)
    sigma = []
    for t in range(1, budget + 1):
        A_c = A[None, :, :] + outer_all
        b_c = b[None, :] + U
        Z_c = A_c - np.einsum("mi,mj->mij", b_c, b_c) / t
        lam = np.linalg.eigvalsh(Z_c)
        upper = (t * (1.0 + 0.75 * epsilon) + 2.0 * n) / n
        lower = (t * (1.0 - 0.75 * epsilon) - 2.0 * n) / n
        du = upper - lam
        dl = lam - lower
        ok = (du.min(axis=1) > 1e-12) & (dl.min(axis=1) > 1e-12)
        with np.errstate(divide="ignore", over="ignore"):
            pot = (1.0 / np.maximum(du, 1e-300)).sum(axis=1) + (
                1.0 / np.maximum(dl, 1e-300)
            ).sum(axis=1)
        pot = np.where(ok, pot, np.inf)
        cen_ratio = np.linalg.norm(b_c, axis=1) / t / bound
        pot = pot + 4.0 * n * np.maximum(cen_ratio - 0.5, 0.0) ** 2
        j = int(np.argmin(pot))
        if not np.isfinite(pot[j]):
            break
        A += outer_all[j]
        b += U[j]
        sigma.append(j)
        if t >= n + 1:
            scaled = (n / t) * lam[j]
            cen = float(np.linalg.norm(b) / t)
            if _feasible(scaled[0], scaled[-1], cen, epsilon, bound, _PRODUCER_MARGIN):
                return sorted(sigma)
    return _polish(U, sigma, epsilon, budget)


def _multiset_objective(U, counts, epsilon, bound):
    idx = np.repeat(np.arange(len(counts)), counts)
    lam_min, lam_max, _, cen = _centered_stats(U, idx)
    eps_ach = max(lam_max - 1.0, 1.0 - lam_min)
    return max(eps_ach / epsilon, cen / bound)


def _polish(U, sigma, epsilon, budget, rounds: int = 60):
    """Local search over single-element swaps/additions of the multiset."""
    if len(sigma) < U.shape[1] + 1:
        return None
    m, n = U.shape
    bound = centroid_bound(n, epsilon)
    counts = np.bincount(np.asarray(sigma, dtype=int), minlength=m)
    best = _multiset_objective(U, counts, epsilon, bound)
    for _ in range(rounds):
        if best <= 1.0 - _PRODUCER_MARGIN:
            break
        improved = False
        for r in np.flatnonzero(counts):
            for a in range(m):
                if a == r:
                    continue
                counts[r] -= 1
                counts[a] += 1
                val = _multiset_objective(U, counts, epsilon, bound)
                if val < best - 1e-15:
                    best = val
                    improved = True
                    break
                counts[r] += 1
                counts[a] -= 1
            if improved:
                break
        if not improved and counts.sum() < budget:
            trial_best = None
            for a in range(m):
                counts[a] += 1
                val = _multiset_objective(U, counts, epsilon, bound)
                if trial_best is None or val < trial_best[0]:
                    trial_best = (val, a)
                counts[a] -= 1
            if trial_best is not None and trial_best[0] < best - 1e-15:
                best = trial_best[0]
                counts[trial_best[1]] += 1
                improved = True
        if not improved:
            break
    if best <= 1.0 - _PRODUCER_MARGIN:
        return sorted(np.repeat(np.arange(m), counts).tolist())
    return None


def _sampling_select(U: np.ndarray, weights: np.ndarray, epsilon: float, budget: int, seed: int):
    """Weighted i.i.d. draws with probabilities a_j/n over a ladder of sizes."""
    m, n = U.shape
    bound = centroid_bound(n, epsilon)
    probs = weights / weights.sum()
    base = max(n + 1, int(math.ceil(n / epsilon**2)))
    sizes = []
    s = base
    while s < budget:
        sizes.append(s)
        s = int(math.ceil(s * 1.5))
    sizes.append(budget)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes) * 50)
    k = 0
    for size in sizes:
        for _ in range(50):
            rng = np.random.default_rng(seeds[k])
            k += 1
            sigma = np.sort(rng.choice(m, size=size, p=probs))
            lam_min, lam_max, _, cen = _centered_stats(U, sigma)
            if _feasible(lam_min, lam_max, cen, epsilon, bound, _PRODUCER_MARGIN):
                return sigma.tolist()
    return None


EXHAUSTIVE_SOURCE_CAP = 12
EXHAUSTIVE_BUDGET_CAP = 8


def _exhaustive_select(U: np.ndarray, epsilon: float, budget: int):
    """Smallest feasible multiset by complete enumeration (m <= 12, budget <= 8)."""
    m, n = U.shape
    if m > EXHAUSTIVE_SOURCE_CAP:
        raise ValueError(f"exhaustive strategy capped at {EXHAUSTIVE_SOURCE_CAP} source vectors")
    cap = min(budget, EXHAUSTIVE_BUDGET_CAP)
    bound = centroid_bound(n, epsilon)
    for size in range(n + 1, cap + 1):
        combos = itertools.combinations_with_replacement(range(m), size)
        while True:
            chunk = list(itertools.islice(combos, 8192))
            if not chunk:
                break
            idx = np.array(chunk, dtype=int)
            pts = U[idx]
            centroid = pts.mean(axis=1, keepdims=True)
            centered = pts - centroid
            M = (n / size) * np.einsum("csi,csj->cij", centered, centered)
            lam = np.linalg.eigvalsh(M)
            cen = np.linalg.norm(centroid[:, 0, :], axis=1)
            good = (
                (lam[:, -1] - 1.0 <= epsilon)
                & (1.0 - lam[:, 0] <= epsilon)
                & (cen <= bound)
            )
            hits = np.flatnonzero(good)
            if len(hits):
                return list(chunk[hits[0]])
    return None


def sparsify(
    D: JohnDecomposition,
    epsilon: float,
    budget: int | None = None,
    strategy: str = "barrier",
    seed: int = 0,
) -> SparseDecomposition:
    """Select a multiset meeting the accuracy and centroid targets.

    Strategies: 'barrier' (deterministic greedy + local polish), 'sampling'
    (seeded weighted i.i.d. retries), 'exhaustive' (complete enumeration for
    tiny inputs, returns the smallest feasible multiset).  Raises
    BudgetInfeasible when the search limit is reached without a certified
    candidate.
    """
    if not 0.0 < epsilon <= EPSILON_MAX:
        raise ValueError(f"epsilon must lie in (0, {EPSILON_MAX}]")
    n = D.dim
    if budget is None:
        budget = default_budget(n, epsilon)
    if budget < n + 1:
        raise ValueError("budget must be at least n + 1")
    U = D.contacts
    if strategy == "barrier":
        sigma = _barrier_select(U, epsilon, budget, seed)
    elif strategy == "sampling":
        sigma = _sampling_select(U, D.weights, epsilon, budget, seed)
    elif strategy == "exhaustive":
        sigma = _exhaustive_select(U, epsilon, budget)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if sigma is None:
        raise BudgetInfeasible(
            f"no multiset of size <= {budget} met epsilon={epsilon} with the "
            "centroid bound; consider raising the budget"
        )
    S = _build(D.dim, D.size, sigma, epsilon, budget, U)
    if not audit_sparsification(S, D).passed:
        raise BudgetInfeasible("candidate failed its own audit; search was exhausted")
    return S
