import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from deflatron.dense import sym_eig
from deflatron.errors import PreconditionError, RankDeficientError
from deflatron.problems import grid_index, laplace_bilinear
from deflatron.projection import Provenance
from deflatron.subspaces import (
    AggregateSet,
    CfSplitting,
    PerturbationSpec,
    aggregate_restricted_eigen_basis,
    aggregation_basis,
    direct_interpolation,
    eigen_basis,
    full_coarsening,
    injection,
    orthonormal_completion,
    perturbed_eigen_basis,
    qr_perturbation_bound,
    verify_wap_tau,
)

from conftest import laplace_1d, random_spd


def test_aggregation_basis_examples():
    v = aggregation_basis(AggregateSet(np.array([0, 0, 1, 1]))).dense()
    np.testing.assert_array_equal(v, [[1, 0], [1, 0], [0, 1], [0, 1]])
    one = aggregation_basis(AggregateSet(np.zeros(5, dtype=int))).dense()
    np.testing.assert_array_equal(one, np.ones((5, 1)))


def test_singleton_aggregates_need_m_less_than_n():
    agg = AggregateSet(np.array([0, 1, 2, 2]))
    np.testing.assert_array_equal(aggregation_basis(agg).dense()[:3, :3], np.eye(3))
    with pytest.raises(RankDeficientError):
        aggregation_basis(AggregateSet(np.arange(3)))


def test_aggregate_validation_and_json():
    with pytest.raises(PreconditionError):
        AggregateSet(np.array([0, 2, 2]))
    agg = AggregateSet(np.array([1, 0, 1, 0]))
    back = AggregateSet.from_json(agg.to_json())
    np.testing.assert_array_equal(back.assignments, agg.assignments)
    assert AggregateSet.from_json("[0, 0, 1]").count == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31))
def test_aggregation_columns_disjoint(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.integers(1, n)
    assign = np.concatenate([np.arange(m), rng.integers(0, m, n - m)])
    rng.shuffle(assign)
    v = aggregation_basis(AggregateSet(assign)).dense()
    gram = v.T @ v
    np.testing.assert_array_equal(gram, np.diag(np.diag(gram)))
    assert v.sum() == n


def test_eigen_basis():
    eig = sym_eig(np.diag([3.0, 2.0, 1.0]))
    v = eigen_basis(eig, 2).dense()
    assert v.shape == (3, 1)
    np.testing.assert_allclose(np.abs(v[:, 0]), [0.0, 0.0, 1.0])
    assert eigen_basis(eig, 2).provenance is Provenance.EXACT_EIGEN
    with pytest.raises(PreconditionError):
        eigen_basis(eig, 3)


def test_perturbed_eigen_basis():
    a = random_spd(10, 1)
    eig = sym_eig(a)
    d = np.random.default_rng(0).standard_normal((10, 3))
    d /= np.linalg.norm(d)
    same = perturbed_eigen_basis(eig, 7, PerturbationSpec(d, 0.0)).dense()
    np.testing.assert_array_equal(same, eigen_basis(eig, 7).dense())
    with pytest.raises(PreconditionError):
        perturbed_eigen_basis(eig, 7, PerturbationSpec(d, 5.0))
    with pytest.raises(ValueError):
        PerturbationSpec(2 * d, 0.1)


def test_subspace_angle_grows_with_magnitude():
    import scipy.linalg

    eig = sym_eig(random_spd(12, 5))
    d = np.random.default_rng(1).standard_normal((12, 2))
    d /= np.linalg.norm(d)
    q1 = eigen_basis(eig, 10).dense()
    angles = [
        scipy.linalg.subspace_angles(perturbed_eigen_basis(eig, 10, PerturbationSpec(d, t)).dense(), q1).max()
        for t in (0.01, 0.05, 0.1, 0.3, 0.6)
    ]
    assert all(b > a for a, b in zip(angles, angles[1:]))


def test_completion_zero_and_rotation():
    q = np.eye(4)
    c = orthonormal_completion(q[:, :2], q[:, 2:], np.zeros((4, 2)))
    assert c.delta == 0.0
    theta = 0.3
    q1 = np.array([[1.0], [0.0]])
    q2 = np.array([[0.0], [1.0]])
    rot = np.array([[np.cos(theta)], [np.sin(theta)]])
    c = orthonormal_completion(q1, q2, rot - q1)
    assert c.delta == pytest.approx(2 * abs(np.sin(theta / 2)), abs=1e-13)


def test_completion_bound_random():
    q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((20, 20)))
    e1 = np.random.default_rng(3).standard_normal((20, 5))
    e1 *= 0.1 / np.linalg.norm(e1)
    c = orthonormal_completion(q[:, :5], q[:, 5:], e1)
    assert c.delta <= qr_perturbation_bound(e1)
    with pytest.raises(PreconditionError):
        orthonormal_completion(q[:, :5], q[:, 5:], 20 * e1)


def test_aggregate_restricted_examples():
    agg = AggregateSet(np.array([0, 0, 1, 1]))
    v = aggregate_restricted_eigen_basis(agg, np.array([1.0, 2.0, 3.0, 4.0])).dense()
    np.testing.assert_array_equal(v, [[1, 0], [2, 0], [0, 3], [0, 4]])
    same = aggregate_restricted_eigen_basis(agg, np.ones(4)).dense()
    np.testing.assert_array_equal(same, aggregation_basis(agg).dense())
    # a restriction that vanishes is dropped
    v = aggregate_restricted_eigen_basis(agg, np.array([1.0, 1.0, 0.0, 0.0])).dense()
    assert v.shape == (4, 1)


def test_aggregate_restricted_rank_repair():
    agg = AggregateSet(np.array([0, 0, 0, 1, 1, 1]))
    w = np.column_stack([np.arange(6.0), 2 * np.arange(6.0)])
    v = aggregate_restricted_eigen_basis(agg, w).dense()
    assert v.shape == (6, 2)
    np.testing.assert_allclose(v.T @ v, np.eye(2), atol=1e-12)


def test_full_coarsening_counts():
    for p in range(2, 8):
        N = 2**p - 1
        assert full_coarsening(N, index_base=1).m == (2 ** (p - 1) - 1) ** 2
        assert full_coarsening(N).m == 2 ** (2 * p - 2)
    split = full_coarsening(3, index_base=1)
    assert split.coarse_points.tolist() == [grid_index(3, 2, 2)]
    assert full_coarsening(7, index_base=1).m == 9
    with pytest.raises(PreconditionError):
        full_coarsening(2)


def test_splitting_json():
    split = full_coarsening(5)
    back = CfSplitting.from_json(split.to_json())
    np.testing.assert_array_equal(back.coarse, split.coarse)
    assert set(json.loads(split.to_json())["flags"]) <= {"C", "F"}


def test_direct_interpolation_1d():
    a = laplace_1d(7)
    split = CfSplitting(np.arange(7) % 2 == 1)
    v = direct_interpolation(a, split).dense()
    assert v.shape == (7, 3)
    np.testing.assert_allclose(v[2], [0.5, 0.5, 0.0])
    np.testing.assert_allclose(v[1], [1.0, 0.0, 0.0])
    # boundary F point has one coarse neighbour and a non-zero row sum
    assert v[0, 0] == pytest.approx(0.5)


def test_direct_interpolation_grid_rows():
    N = 15
    prob = laplace_bilinear(N)
    split = full_coarsening(N)
    v = direct_interpolation(prob.matrix, split).dense()
    a = prob.matrix.toarray()
    interior = np.abs(a.sum(axis=1)) < 1e-12
    f = ~split.coarse
    np.testing.assert_allclose(v[f & interior].sum(axis=1), 1.0, atol=1e-12)
    assert np.all(v >= 0.0)
    np.testing.assert_array_equal(v[split.coarse], np.eye(split.m))


def test_direct_interpolation_errors():
    a = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    with pytest.raises(PreconditionError):
        direct_interpolation(a, CfSplitting(np.array([False, False, True])))
    with pytest.raises(PreconditionError):
        direct_interpolation(laplace_1d(5), CfSplitting(np.array([True, False, False, False, True])))
    with pytest.raises(RankDeficientError):
        direct_interpolation(laplace_1d(4), CfSplitting(np.ones(4, dtype=bool)))


def test_tau_examples():
    for N in (7, 15):
        prob = laplace_bilinear(N)
        split = full_coarsening(N)
        assert verify_wap_tau(prob.matrix, split, direct_interpolation(prob.matrix, split)) <= 4.0
    split = CfSplitting(np.array([True, True, True, False]))
    v = np.eye(4)[:, :3]
    from deflatron.projection import DeflationBasis

    assert verify_wap_tau(np.eye(4), split, DeflationBasis(v)) == pytest.approx(1.0)
    assert injection(split).shape == (3, 4)
