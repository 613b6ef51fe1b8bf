import itertools

import numpy as np
import pytest

from hellykit import cross_polytope, simplex_contacts
from hellykit.errors import BudgetInfeasible, IndexOutOfRange
from hellykit.john import JohnDecomposition, extract_contacts, normalize, recover_weights
from hellykit.sparsify import (
    SparseDecomposition,
    audit_sparsification,
    centroid_bound,
    default_budget,
    epsilon_schedule,
    sparsify,
)


def cube_decomposition(n):
    return recover_weights(np.vstack([np.eye(n), -np.eye(n)]))


def simplex_decomposition(n):
    return recover_weights(simplex_contacts(n))


def random_decomposition(n, m, seed):
    attempt = 0
    while True:
        normals = np.random.default_rng(seed * 1000 + attempt).normal(size=(m, n))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        attempt += 1
        try:
            D = recover_weights(normals)
        except Exception:
            continue
        if D.residual_identity < 1e-9 and D.residual_barycenter < 1e-9:
            return D


def brute_force_min_size(U, epsilon, budget):
    """Independent oracle: smallest multiset size meeting both conditions."""
    m, n = U.shape
    bound = centroid_bound(n, epsilon)
    for size in range(2, budget + 1):
        for combo in itertools.combinations_with_replacement(range(m), size):
            pts = U[list(combo)]
            c = pts.mean(axis=0)
            centered = pts - c
            M = (n / size) * centered.T @ centered
            lam = np.linalg.eigvalsh(M)
            if lam[-1] - 1 <= epsilon and 1 - lam[0] <= epsilon and np.linalg.norm(c) <= bound:
                return size
    return None


class TestSchedule:
    def test_volume_values(self):
        assert epsilon_schedule(4, 1.0, "volume") == pytest.approx(0.25)
        assert epsilon_schedule(4, 2.0, "volume") == pytest.approx(0.125)

    def test_diameter_value(self):
        assert epsilon_schedule(9, 2.0, "diameter") == pytest.approx(1.0 / 12.0)

    def test_schedules_coincide(self):
        # the two pipelines write the same exponent two ways
        for n in (2, 5, 9):
            for delta in (1.0, 1.4, 2.0):
                assert epsilon_schedule(n, delta, "volume") == epsilon_schedule(n, delta, "diameter")

    def test_always_within_sparsifier_precondition(self):
        for n in range(1, 30):
            for delta in np.linspace(1.0, 2.0, 7):
                assert epsilon_schedule(n, float(delta), "volume") <= 0.25

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            epsilon_schedule(3, 0.5, "volume")
        with pytest.raises(ValueError):
            epsilon_schedule(3, 1.5, "area")


class TestExhaustive:
    def test_cube2_exact_multiset(self):
        D = cube_decomposition(2)
        S = sparsify(D, 0.1, budget=4, strategy="exhaustive")
        assert S.sigma == (0, 1, 2, 3)
        assert S.epsilon_achieved == pytest.approx(0.0, abs=1e-12)
        assert S.centroid_norm == 0.0

    def test_simplex2_loose_epsilon(self):
        D = simplex_decomposition(2)
        S = sparsify(D, 0.5, budget=6, strategy="exhaustive")
        assert S.epsilon_achieved <= 0.5
        assert S.centroid_norm <= 2 * 0.5 / (3 * np.sqrt(2))
        assert S.size <= 6

    def test_epsilon_precondition(self):
        D = cube_decomposition(2)
        with pytest.raises(ValueError):
            sparsify(D, 0.9, budget=8, strategy="exhaustive")

    def test_budget_infeasible(self):
        # three picks from {+-e_1, +-e_2} always leave a spectral gap > 1/3
        D = cube_decomposition(2)
        with pytest.raises(BudgetInfeasible):
            sparsify(D, 0.01, budget=3, strategy="exhaustive")

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force_minimum(self, seed):
        # identity systems need >= n(n+3)/2 generic vectors to be solvable
        n = 2 + seed % 2
        m = (7, 10)[n - 2] + (seed // 2)
        D = random_decomposition(n, m, seed)
        epsilon = 0.5
        oracle = brute_force_min_size(D.contacts, epsilon, 6)
        if oracle is None:
            with pytest.raises(BudgetInfeasible):
                sparsify(D, epsilon, budget=6, strategy="exhaustive")
        else:
            S = sparsify(D, epsilon, budget=6, strategy="exhaustive")
            assert S.size == oracle

    def test_monotone_in_epsilon(self):
        D = random_decomposition(2, 6, 3)
        sizes = []
        for eps in (0.3, 0.5, 0.7):
            try:
                sizes.append(sparsify(D, eps, budget=8, strategy="exhaustive").size)
            except BudgetInfeasible:
                sizes.append(np.inf)
        assert sizes == sorted(sizes, reverse=True)


class TestAudit:
    def test_cube_all_four(self):
        D = cube_decomposition(2)
        S = sparsify(D, 0.1, budget=4, strategy="exhaustive")
        res = audit_sparsification(S, D)
        assert (res.lambda_min, res.lambda_max, res.centroid_norm) == (1.0, 1.0, 0.0)
        assert res.passed

    def test_rank_deficient_fails(self):
        D = cube_decomposition(2)
        S = SparseDecomposition(
            dim=2,
            source_size=D.size,
            sigma=(0, 0),
            centroid=np.array([1.0, 0.0]),
            epsilon_target=0.25,
            epsilon_achieved=1.0,
            centroid_norm=1.0,
            budget=4,
        )
        res = audit_sparsification(S, D)
        assert res.lambda_min == pytest.approx(0.0, abs=1e-12)
        assert not res.passed

    def test_index_out_of_range(self):
        D = cube_decomposition(2)
        with pytest.raises(IndexOutOfRange):
            SparseDecomposition(
                dim=2,
                source_size=D.size,
                sigma=(0, 99),
                centroid=np.zeros(2),
                epsilon_target=0.25,
                epsilon_achieved=0.0,
                centroid_norm=0.0,
                budget=4,
            )

    def test_centroid_recomputable(self):
        D = simplex_decomposition(3)
        S = sparsify(D, 0.5, strategy="barrier")
        pts = D.contacts[list(S.sigma)]
        assert np.abs(pts.mean(axis=0) - S.centroid).max() < 1e-12
        assert abs(np.linalg.norm(S.centroid) - S.centroid_norm) < 1e-12

    def test_weight_rescaling_is_irrelevant(self):
        # the contract depends only on unit vectors and sigma
        D = random_decomposition(3, 12, 7)
        S = sparsify(D, 0.4, strategy="barrier")
        scaled = JohnDecomposition(
            dim=D.dim,
            contacts=D.contacts,
            weights=D.weights * 7.5,
            residual_identity=D.residual_identity,
            residual_barycenter=D.residual_barycenter,
            source_indices=D.source_indices,
        )
        a1 = audit_sparsification(S, D)
        a2 = audit_sparsification(S, scaled)
        assert a1 == a2


class TestProducerAuditorAgreement:
    @pytest.mark.parametrize("strategy", ["barrier", "sampling"])
    @pytest.mark.parametrize("seed", range(3))
    def test_every_output_passes_audit(self, strategy, seed):
        n = 2 + seed
        D = random_decomposition(n, n * (n + 3) // 2 + 2 * n, seed + 11)
        for eps in (0.25, 0.5):
            S = sparsify(D, eps, strategy=strategy, seed=seed)
            res = audit_sparsification(S, D)
            assert res.passed
            assert S.size <= default_budget(n, eps)
            assert S.epsilon_achieved <= eps
            assert S.centroid_norm <= centroid_bound(n, eps)

    def test_cross_polytope_normalized_pipeline(self):
        T, Pn = normalize(cross_polytope(3), "john")
        vec, idx = extract_contacts(Pn)
        D = recover_weights(vec, source_indices=idx)
        S = sparsify(D, 0.25, strategy="barrier")
        assert audit_sparsification(S, D).passed

    def test_budget_cap_respected(self):
        D = cube_decomposition(3)
        S = sparsify(D, 0.25, budget=12, strategy="barrier")
        assert S.size <= 12


class TestSerialization:
    def test_json_roundtrip(self):
        D = simplex_decomposition(2)
        S = sparsify(D, 0.5, strategy="barrier")
        S2 = SparseDecomposition.from_json(S.to_json())
        assert S2.sigma == S.sigma
        assert S2.epsilon_target == S.epsilon_target
        assert S2.epsilon_achieved == S.epsilon_achieved
        assert np.array_equal(S2.centroid, S.centroid)
