import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msa.core import (
    Dataset,
    LossClampWarning,
    LossSpec,
    MixtureWeights,
    Sample,
    empirical_loss,
    point_loss,
    project_to_simplex,
    read_csv,
    write_csv,
)


def test_point_loss_examples():
    sq = LossSpec.squared()
    assert point_loss(sq, 1.0, 1.0) == 0.0
    assert point_loss(sq, 3.0, 1.0) == 4.0
    ce = LossSpec.cross_entropy()
    assert point_loss(ce, [0.0, 1.0], 1) == 0.0


def test_cross_entropy_zero_probability_clamps():
    ce = LossSpec.cross_entropy(M=7.0)
    with pytest.warns(LossClampWarning, match="infinite loss clamped to M"):
        assert point_loss(ce, [1.0, 0.0], 1) == 7.0


def test_squared_loss_clamped_at_M():
    with pytest.warns(LossClampWarning):
        assert point_loss(LossSpec.squared(M=1.0), 10.0, 0.0) == 1.0


def test_loss_spec_consistency():
    from msa.core import LossKind, LossModel

    with pytest.raises(ValueError):
        LossSpec(LossModel.PROBABILITY, LossKind.SQUARED)
    with pytest.raises(ValueError):
        LossSpec(LossModel.REGRESSION, LossKind.CROSS_ENTROPY)
    with pytest.raises(ValueError):
        LossSpec.squared(M=0.0)


@given(pred=st.floats(-1e3, 1e3), label=st.floats(-1e3, 1e3))
def test_point_loss_bounded(pred, label):
    spec = LossSpec.squared(M=50.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LossClampWarning)
        v = point_loss(spec, pred, label)
    assert 0.0 <= v <= 50.0


def test_empirical_loss_examples():
    data = Dataset(np.array([[0.0], [1.0]]), np.array([2.0, 2.0]), None, 1)
    assert empirical_loss(data, lambda X: np.full(len(X), 2.0), LossSpec.squared()) == 0.0
    data = Dataset(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]), None, 1)
    # point losses 0 and 4
    assert empirical_loss(data, lambda X: np.full(len(X), 1.0), LossSpec.squared()) == 2.0


def test_empirical_loss_requires_labels():
    data = Dataset(np.array([[0.0]]), None, None, 1)
    with pytest.raises(ValueError):
        empirical_loss(data, lambda X: X[:, 0], LossSpec.squared())


def test_empirical_loss_permutation_invariant():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(500, 2))
    y = rng.normal(size=500)
    data = Dataset(X, y, None, 1)
    perm = rng.permutation(500)
    h = lambda Z: Z @ np.array([0.3, -1.2])
    a = empirical_loss(data, h, LossSpec.squared())
    b = empirical_loss(data.subset(perm), h, LossSpec.squared())
    assert abs(a - b) <= 1e-15


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        Dataset(np.zeros((0, 1)), None, None, 1)
    with pytest.raises(ValueError, match="no samples"):
        Dataset.from_samples([], 1)


def test_dataset_domain_range():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), None, np.array([0, 2]), 2)


def test_samples_roundtrip():
    ds = Dataset.from_samples([Sample(np.array([1.0, 2.0]), 1.0, 0), Sample(np.array([3.0, 4.0]), None, None)], 2)
    out = list(ds.samples)
    assert out[0].y == 1.0 and out[0].domain == 0
    assert out[1].y is None and out[1].domain is None
    assert ds.d == 2 and ds.m == 2


def test_csv_roundtrip(tmp_path):
    X = np.array([[0.1, -2.5], [1e-17, 3.0]])
    ds = Dataset(X, np.array([1.0, np.nan]), np.array([0, -1]), 2)
    path = tmp_path / "d.csv"
    write_csv(path, ds)
    back = read_csv(path, p=2)
    np.testing.assert_array_equal(back.X, X)
    assert back.y[0] == 1.0 and np.isnan(back.y[1])
    assert back.domain.tolist() == [0, -1]


def test_csv_rejects_ragged(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x0,y,domain\n1.0,1,0\n2.0,1\n")
    with pytest.raises(ValueError, match="expected 3 fields"):
        read_csv(path)


# simplex projection -------------------------------------------------------


def _brute_force_projection(v, step=1e-3):
    # every point of the 2-simplex on a 1e-3 lattice
    t = np.arange(0, 1 + step / 2, step)
    pts = np.stack([t, 1 - t], axis=1)
    return pts[np.argmin(((pts - v) ** 2).sum(axis=1))]


def test_projection_examples():
    np.testing.assert_allclose(project_to_simplex([0.2, 0.8]).z, [0.2, 0.8], atol=1e-12)
    np.testing.assert_allclose(project_to_simplex([0.5, 0.5, 0.5]).z, [1 / 3] * 3, atol=1e-15)
    out = project_to_simplex([2.0, 0.0]).z
    np.testing.assert_allclose(out, _brute_force_projection(np.array([2.0, 0.0])), atol=1e-12)
    np.testing.assert_allclose(out, [1.0, 0.0])


@pytest.mark.parametrize("v", [[0.7, -0.4], [3.0, 2.5], [-1.0, -1.2], [0.1, 0.3]])
def test_projection_matches_brute_force(v):
    v = np.array(v)
    got = project_to_simplex(v).z
    ref = _brute_force_projection(v)
    # no lattice point is closer than the projection
    assert ((got - v) ** 2).sum() <= ((ref - v) ** 2).sum() + 1e-12
    np.testing.assert_allclose(got, ref, atol=1e-3)


def test_projection_rejects_nonfinite():
    with pytest.raises(ValueError):
        project_to_simplex([np.nan, 1.0])


@settings(max_examples=200)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda v: sum(v) > 0))
def test_projection_idempotent(v):
    z = project_to_simplex(np.array(v) / math.fsum(v))
    again = project_to_simplex(z.z)
    np.testing.assert_allclose(again.z, z.z, atol=1e-12)


@settings(max_examples=200)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8))
def test_projection_output_valid(v):
    z = project_to_simplex(v)
    assert np.all(z.z >= 0)
    assert abs(math.fsum(z.z.tolist()) - 1.0) <= 1e-12


def test_mixture_weights_validation():
    with pytest.raises(ValueError):
        MixtureWeights([0.5, 0.6])
    with pytest.raises(ValueError):
        MixtureWeights([1.2, -0.2])
    assert MixtureWeights.vertex(1, 3).z.tolist() == [0.0, 1.0, 0.0]
