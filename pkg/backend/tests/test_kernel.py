"""
Tests for the linear-algebra kernel: ranks, simplex, positive-linear dependence
and the Caratheodory reduction.
"""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.core.exceptions import PreconditionViolation
from app.services.kernel import (
    LPStatus,
    VecFamily,
    basis_subset,
    caratheodory_reduce,
    find_feasible,
    matrix_rank,
    num_rank,
    positive_linear_dependent,
    solve_lp,
)


def circuit_oracle(pos, free):
    """Dependence via circuits: some minimal dependent subset has same-sign weights on ``pos``.

    Every null vector is a conformal sum of circuits, so a nonnegative-on-pos
    combination exists iff some circuit is sign-consistent on its pos entries.
    """
    vectors = [("p", v) for v in pos] + [("f", v) for v in free]
    for size in range(1, len(vectors) + 1):
        for subset in itertools.combinations(range(len(vectors)), size):
            M = np.array([vectors[i][1] for i in subset], dtype=float)
            if np.linalg.matrix_rank(M, tol=1e-9) != size - 1:
                continue
            _, _, vt = np.linalg.svd(M.T)
            null = vt[-1]
            if np.any(np.abs(null) < 1e-9):
                continue  # not minimal
            signs = [np.sign(null[k]) for k, i in enumerate(subset) if vectors[i][0] == "p"]
            if not signs or all(s == signs[0] for s in signs):
                return True
    return False


def families(pos, free, dim):
    return (
        VecFamily.of([(i, v) for i, v in enumerate(pos)], dim=dim),
        VecFamily.of([(100 + j, v) for j, v in enumerate(free)], dim=dim),
    )


small_vectors = st.integers(1, 3).flatmap(
    lambda dim: st.tuples(
        st.just(dim),
        st.lists(st.lists(st.integers(-2, 2), min_size=dim, max_size=dim), min_size=0, max_size=4),
        st.integers(0, 4),
    )
)


def test_rank_of_dependent_rows():
    assert matrix_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert matrix_rank(np.zeros((0, 3))) == 0


def test_basis_subset_prefers_low_labels():
    fam = VecFamily.of([(3, [1.0, 0.0]), (1, [2.0, 0.0]), (2, [0.0, 1.0])])
    assert basis_subset(fam) == [1, 2]


def test_empty_family_needs_dimension():
    with pytest.raises(ValueError):
        VecFamily.of([])
    assert len(VecFamily.of([], dim=2)) == 0


@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=6))
@settings(max_examples=1000, deadline=None)
def test_rank_monotone_under_extension(rows):
    fam = VecFamily.of(list(enumerate(rows)))
    for k in range(1, len(rows)):
        head = fam.subfamily(fam.labels[:k])
        longer = fam.subfamily(fam.labels[: k + 1])
        assert num_rank(head) <= num_rank(longer) <= num_rank(head) + 1


def test_simplex_optimal_vertex():
    # min -x1 - x2  s.t. x1 + 2 x2 + s1 = 4, 3 x1 + x2 + s2 = 6
    c = np.array([-1.0, -1.0, 0.0, 0.0])
    A = np.array([[1.0, 2.0, 1.0, 0.0], [3.0, 1.0, 0.0, 1.0]])
    result = solve_lp(c, A, np.array([4.0, 6.0]))
    assert result.status == LPStatus.OPTIMAL
    assert result.x[:2] == pytest.approx([1.6, 1.2])
    assert result.objective == pytest.approx(-2.8)


def test_simplex_infeasible_and_unbounded():
    infeasible = find_feasible(np.array([[1.0, 1.0]]), np.array([-1.0]))
    assert infeasible.status == LPStatus.INFEASIBLE
    assert not infeasible.feasible
    unbounded = solve_lp(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))
    assert unbounded.status == LPStatus.UNBOUNDED


def test_simplex_redundant_rows():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    result = find_feasible(A, np.array([1.0, 2.0]))
    assert result.feasible
    assert A @ result.x == pytest.approx([1.0, 2.0])


def test_pld_opposite_vectors():
    pos, free = families([[1.0, 0.0], [-1.0, 0.0]], [], 2)
    dependent, cert = positive_linear_dependent(pos, free)
    assert dependent
    assert cert.alphas["0"] == pytest.approx(0.5)
    assert cert.residual < 1e-8


def test_pld_independent_pair():
    pos, free = families([[1.0, 0.0]], [[0.0, 1.0]], 2)
    assert positive_linear_dependent(pos, free) == (False, None)


def test_pld_positive_span_not_enough():
    # a + b = c with c on the free side: dependent through alpha on pos
    pos, free = families([[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0]], 2)
    dependent, cert = positive_linear_dependent(pos, free)
    assert dependent
    assert all(a >= -1e-12 for a in cert.alphas.values())


def test_pld_both_empty_rejected():
    pos, free = families([], [], 2)
    with pytest.raises(PreconditionViolation):
        positive_linear_dependent(pos, free)


@given(small_vectors)
@settings(max_examples=300, deadline=None)
def test_pld_matches_circuit_oracle(case):
    dim, vectors, split = case
    if not vectors:
        return
    split = min(split, len(vectors))
    pos_vectors, free_vectors = vectors[:split], vectors[split:]
    pos, free = families(pos_vectors, free_vectors, dim)
    dependent, cert = positive_linear_dependent(pos, free)
    assert dependent == circuit_oracle(pos_vectors, free_vectors)
    if dependent:
        assert cert.residual < 1e-7
        assert sum(abs(a) for a in cert.alphas.values()) + sum(abs(b) for b in cert.betas.values()) == pytest.approx(1.0)


@given(small_vectors, st.lists(st.floats(0.25, 4.0), min_size=4, max_size=4))
@settings(max_examples=300, deadline=None)
def test_pld_invariant_under_positive_rescaling(case, scales):
    dim, vectors, split = case
    if not vectors:
        return
    split = min(split, len(vectors))
    scaled = [[s * v for v in vec] for s, vec in zip(scales, vectors)]
    expected, _ = positive_linear_dependent(*families(vectors[:split], vectors[split:], dim))
    dependent, _ = positive_linear_dependent(*families(scaled[:split], scaled[split:], dim))
    assert dependent == expected


@pytest.mark.slow
def test_pld_matches_circuit_oracle_on_seeded_corpus():
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(10_000):
        dim = int(rng.integers(1, 4))
        count = int(rng.integers(1, 5))
        vectors = rng.integers(-2, 3, size=(count, dim)).astype(float).tolist()
        split = int(rng.integers(0, count + 1))
        pos, free = families(vectors[:split], vectors[split:], dim)
        dependent, _ = positive_linear_dependent(pos, free)
        mismatches += dependent != circuit_oracle(vectors[:split], vectors[split:])
    assert mismatches == 0


@given(st.integers(0, 10_000))
@settings(max_examples=1000, deadline=None)
def test_caratheodory_reduction_invariants(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 4))
    indep = VecFamily.of([("e0", np.eye(dim)[0])])
    positive = VecFamily.of([(f"w{i}", rng.normal(size=dim)) for i in range(int(rng.integers(1, 6)))])
    coeffs = {"e0": float(rng.normal())}
    coeffs.update({label: float(rng.uniform(0.1, 2.0)) for label in positive.labels})
    z = coeffs["e0"] * indep.matrix[0] + sum(coeffs[l] * positive.vector(l) for l in positive.labels)
    if np.linalg.norm(z) < 1e-6:
        return

    result = caratheodory_reduce(z, indep, positive, coeffs)

    kept = VecFamily.of([("e0", indep.matrix[0])] + [(l, positive.vector(l)) for l in result.kept_positive_labels])
    assert matrix_rank(kept.matrix) == len(kept)
    assert set(result.kept_positive_labels) <= set(positive.labels)
    assert all(result.coefficients[l] >= -1e-9 for l in result.kept_positive_labels)
    assert result.residual <= 1e-7 * max(1.0, float(np.linalg.norm(z)))


def test_caratheodory_rejects_bad_coefficients():
    indep = VecFamily.of([], dim=2)
    positive = VecFamily.of([("a", [1.0, 0.0])])
    with pytest.raises(PreconditionViolation):
        caratheodory_reduce(np.array([1.0, 0.0]), indep, positive, {"a": 2.0})
