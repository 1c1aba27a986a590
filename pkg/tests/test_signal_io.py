import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsgp import errors
from hsgp.signal_io import (
    BoldMatrix,
    FunctionalNetwork,
    load_bold_csv,
    node_features,
    pearson_adjacency,
    pearson_network,
    save_bold_csv,
    save_network_csv,
)


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadBoldCsv:
    def test_shape_passthrough(self, tmp_path):
        p = write_csv(
            tmp_path / "a.csv",
            "node,t0,t1,t2,t3,t4\nr1,1,2,3,4,5\nr2,5,4,3,2,1\nr3,1,1,2,2,3\n",
        )
        b = load_bold_csv(p)
        assert b.n_nodes == 3
        assert b.n_timepoints == 5
        assert b.node_labels == ["r1", "r2", "r3"]
        np.testing.assert_allclose(b.data[0], [1, 2, 3, 4, 5])

    def test_missing_file(self, tmp_path):
        with pytest.raises(errors.MissingFile):
            load_bold_csv(str(tmp_path / "nope.csv"))

    def test_nan_cell_rejected(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", "node,t0,t1,t2,t3\nr1,1,NaN,3,4\nr2,1,2,3,4\n")
        with pytest.raises(errors.NonFiniteValue) as exc:
            load_bold_csv(p)
        assert exc.value.row == 2
        assert exc.value.col == 3

    def test_non_numeric_cell(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", "node,t0,t1,t2,t3\nr1,1,x,3,4\nr2,1,2,3,4\n")
        with pytest.raises(errors.ParseError) as exc:
            load_bold_csv(p)
        assert (exc.value.row, exc.value.col) == (2, 3)

    def test_too_few_timepoints(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", "node,t0,t1\nr1,1,2\nr2,3,4\n")
        with pytest.raises(errors.TooFewTimepoints):
            load_bold_csv(p)

    def test_too_few_nodes(self, tmp_path):
        p = write_csv(tmp_path / "a.csv", "node,t0,t1,t2,t3\nr1,1,2,3,4\n")
        with pytest.raises(errors.TooFewNodes):
            load_bold_csv(p)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        b = BoldMatrix(rng.normal(size=(4, 6)))
        path = tmp_path / "b.csv"
        save_bold_csv(b, str(path))
        b2 = load_bold_csv(str(path))
        assert b2.node_labels == b.node_labels
        np.testing.assert_array_equal(b2.data, b.data)


class TestNodeFeatures:
    def test_constant_row_is_zero(self):
        b = BoldMatrix(np.array([[5.0, 5, 5, 5], [1.0, 2, 3, 4]]))
        np.testing.assert_array_equal(node_features(b)[0], [0.0, 0.0])

    def test_alternating_row(self):
        b = BoldMatrix(np.array([[-1.0, 1, -1, 1], [1.0, 2, 3, 4]]))
        skew, kurt = node_features(b)[0]
        assert skew == pytest.approx(0.0, abs=1e-15)
        assert kurt == pytest.approx(-2.0, abs=1e-12)

    def test_hand_computed_moments(self):
        # frozen from an exact rational-arithmetic computation of the
        # population moments of [1, 2, 3, 10]: m2=25/2, m3=45, m4=697/2
        b = BoldMatrix(np.array([[1.0, 2, 3, 10], [0.0, 1, 0, 1]]))
        skew, kurt = node_features(b)[0]
        assert skew == pytest.approx(1.0182337649086284, abs=1e-13)
        assert kurt == pytest.approx(-0.7696, abs=1e-13)

    @given(shift=st.floats(-50, 50), scale=st.floats(0.01, 50))
    @settings(max_examples=40, deadline=None)
    def test_invariant_to_positive_affine(self, shift, scale):
        rng = np.random.default_rng(11)
        data = rng.normal(size=(3, 20))
        base = node_features(BoldMatrix(data))
        moved = node_features(BoldMatrix(data * scale + shift))
        np.testing.assert_allclose(moved, base, atol=1e-9)


class TestPearsonNetwork:
    def test_identical_rows_correlate_one(self):
        a = pearson_adjacency(np.array([[1.0, 2, 3, 4], [1.0, 2, 3, 4]]))
        assert a[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_negated_rows_correlate_minus_one(self):
        a = pearson_adjacency(np.array([[1.0, 2, 3, 4], [-1.0, -2, -3, -4]]))
        assert a[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_hand_computed_value(self):
        # sqrt(27/28), from the closed form r = 1/sqrt(1 + Var residual ratio)
        a = pearson_adjacency(np.array([[1.0, 2, 3], [1.0, 2, 4]]))
        assert a[0, 1] == pytest.approx(0.9819805060619657, abs=1e-14)

    def test_constant_row_convention(self):
        a = pearson_adjacency(np.array([[2.0, 2, 2, 2], [1.0, 2, 3, 4]]))
        assert np.all(a[0] == 0.0)
        assert np.all(a[:, 0] == 0.0)

    def test_invariants_over_random_matrices(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(2, 9))
            a = pearson_adjacency(rng.normal(size=(n, 12)))
            np.testing.assert_array_equal(a, a.T)
            assert np.all(np.abs(a) <= 1.0)
            assert np.all(np.diag(a) == 0.0)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_invariant_to_row_affine(self, seed):
        rng = np.random.default_rng(seed)
        data = rng.normal(size=(4, 15))
        scales = rng.uniform(0.1, 5.0, size=(4, 1))
        shifts = rng.uniform(-3.0, 3.0, size=(4, 1))
        np.testing.assert_allclose(
            pearson_adjacency(data * scales + shifts), pearson_adjacency(data), atol=1e-10
        )

    def test_network_carries_features_and_labels(self):
        b = BoldMatrix(np.arange(12.0).reshape(3, 4) ** 2, ["a", "b", "c"])
        net = pearson_network(b)
        assert net.node_labels == ["a", "b", "c"]
        np.testing.assert_array_equal(net.features, node_features(b))

    def test_network_export(self, tmp_path):
        b = BoldMatrix(np.random.default_rng(0).normal(size=(3, 8)), ["a", "b", "c"])
        net = pearson_network(b)
        out = tmp_path / "net.csv"
        save_network_csv(net, str(out))
        lines = out.read_text().strip().splitlines()
        assert lines[0] == ",a,b,c"
        assert len(lines) == 4


class TestFunctionalNetworkValidation:
    def test_rejects_asymmetric(self):
        with pytest.raises(errors.AsymmetricInput):
            FunctionalNetwork(np.array([[0.0, 0.5], [0.2, 0.0]]), np.zeros((2, 2)), ["a", "b"])

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(errors.ShapeMismatch):
            FunctionalNetwork(np.array([[1.0, 0.5], [0.5, 1.0]]), np.zeros((2, 2)), ["a", "b"])

    def test_rejects_out_of_range(self):
        with pytest.raises(errors.ShapeMismatch):
            FunctionalNetwork(np.array([[0.0, 1.5], [1.5, 0.0]]), np.zeros((2, 2)), ["a", "b"])
