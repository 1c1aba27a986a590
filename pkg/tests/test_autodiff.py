import numpy as np
import pytest

from hsgp import autodiff as ad


def numeric_grad(f, arrays, eps=1e-6):
    """Central-difference gradient of scalar f w.r.t. each array."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f()
            flat[i] = orig - eps
            lo = f()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def check_op(build, arrays, atol=1e-7):
    """Compare backward() grads against central differences."""
    tensors = [ad.Tensor(a, requires_grad=True) for a in arrays]
    out = build(*tensors)
    out.backward()
    analytic = [t.grad for t in tensors]

    def f():
        vals = [ad.Tensor(a) for a in arrays]
        return float(build(*vals).value)

    numeric = numeric_grad(f, arrays)
    for got, want in zip(analytic, numeric):
        assert got is not None
        np.testing.assert_allclose(got, want, atol=atol, rtol=1e-5)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_add_broadcast(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4,))
    check_op(lambda x, y: ad.tsum((x + y) * (x + y)), [a, b])


def test_sub_broadcast(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 1))
    check_op(lambda x, y: ad.tsum((x - y) * (x - y)), [a, b])


def test_mul_div(rng):
    a = rng.normal(size=(2, 5))
    b = rng.normal(size=(2, 5)) + 3.0
    check_op(lambda x, y: ad.tsum(x * y + x / y), [a, b])


def test_scalar_sugar(rng):
    a = rng.normal(size=(4,))
    check_op(lambda x: ad.tsum(2.0 * x - x / 3.0 + (-x) + (1.0 - x)), [a])


@pytest.mark.parametrize("sa,sb", [((3, 4), (4, 2)), ((3, 4), (4,)), ((4,), (4, 2)), ((4,), (4,))])
def test_matmul_shapes(rng, sa, sb):
    a = rng.normal(size=sa)
    b = rng.normal(size=sb)
    check_op(lambda x, y: ad.tsum(x @ y), [a, b])


def test_sum_axis_keepdims(rng):
    a = rng.normal(size=(3, 4))
    check_op(lambda x: ad.tsum(ad.tsum(x, axis=0) * 2.0), [a])
    check_op(lambda x: ad.tsum(x * ad.tsum(x, axis=1, keepdims=True)), [a])


def test_mean(rng):
    a = rng.normal(size=(3, 4))
    check_op(lambda x: ad.mean(x * x), [a])
    check_op(lambda x: ad.tsum(ad.mean(x, axis=1) * 3.0), [a])


def test_elementwise_nonlinear(rng):
    a = rng.normal(size=(3, 3))
    check_op(lambda x: ad.tsum(ad.tanh(x)), [a])
    check_op(lambda x: ad.tsum(ad.exp(x)), [a])
    b = np.abs(rng.normal(size=(3, 3))) + 0.5
    check_op(lambda x: ad.tsum(ad.log(x)), [b])
    check_op(lambda x: ad.tsum(ad.sqrt(x)), [b])


def test_abs_leaky_relu_away_from_kink(rng):
    a = rng.normal(size=(4, 4))
    a[np.abs(a) < 0.05] = 0.1
    check_op(lambda x: ad.tsum(ad.absolute(x)), [a])
    check_op(lambda x: ad.tsum(ad.leaky_relu(x, 0.2)), [a])


def test_leaky_relu_values():
    x = ad.Tensor(np.array([-2.0, 0.0, 3.0]))
    y = ad.leaky_relu(x, 0.2)
    np.testing.assert_allclose(y.value, [-0.4, 0.0, 3.0])


def test_transpose_reshape(rng):
    a = rng.normal(size=(2, 3))
    check_op(lambda x: ad.tsum(x.T @ x), [a])
    check_op(lambda x: ad.tsum(ad.reshape(x, (3, 2)) * 1.5), [a])


def test_concat(rng):
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(2, 2))
    check_op(lambda x, y: ad.tsum(ad.concat([x, y], axis=1) * 2.0), [a, b])


def test_take_rows_duplicates(rng):
    a = rng.normal(size=(4, 3))
    idx = np.array([0, 2, 2, 3])
    check_op(lambda x: ad.tsum(ad.take_rows(x, idx) * ad.take_rows(x, idx)), [a])


def test_take_cols(rng):
    a = rng.normal(size=(3, 5))
    idx = np.array([4, 1, 1])
    check_op(lambda x: ad.tsum(ad.take_cols(x, idx) * ad.take_cols(x, idx)), [a])
    out = ad.take_cols(ad.Tensor(a), idx)
    np.testing.assert_array_equal(out.value, a[:, idx])


def test_masked_softmax_matches_dense(rng):
    scores = rng.normal(size=(3, 3))
    mask = np.ones((3, 3))
    out = ad.masked_softmax(ad.Tensor(scores), mask)
    want = np.exp(scores) / np.exp(scores).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(out.value, want, atol=1e-12)


def test_masked_softmax_empty_row(rng):
    scores = rng.normal(size=(2, 3))
    mask = np.array([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    out = ad.masked_softmax(ad.Tensor(scores), mask)
    assert np.all(out.value[1] == 0.0)
    assert out.value[0, 1] == 0.0
    assert abs(out.value[0].sum() - 1.0) < 1e-12


def test_masked_softmax_grad(rng):
    scores = rng.normal(size=(3, 3))
    mask = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]])
    target = rng.normal(size=(3, 3))
    check_op(lambda s: ad.tsum(ad.masked_softmax(s, mask) * target), [scores])


def test_log_softmax_grad(rng):
    a = rng.normal(size=(2, 4))
    target = rng.normal(size=(2, 4))
    check_op(lambda x: ad.tsum(ad.log_softmax(x) * target), [a])
    out = ad.log_softmax(ad.Tensor(a))
    np.testing.assert_allclose(np.exp(out.value).sum(axis=1), [1.0, 1.0], atol=1e-12)


def test_grad_accumulates_on_reuse(rng):
    a = ad.Tensor(np.array([2.0, 3.0]), requires_grad=True)
    out = ad.tsum(a * a + a)
    out.backward()
    np.testing.assert_allclose(a.grad, [5.0, 7.0])


def test_no_grad_blocks_graph():
    a = ad.Tensor(np.array([1.0]), requires_grad=True)
    with ad.no_grad():
        out = a * 2.0
    assert not out.requires_grad
    assert out._backward_fn is None


def test_backward_requires_scalar():
    a = ad.Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        (a * 2.0).backward()


def test_detach_cuts_graph(rng):
    a = ad.Tensor(rng.normal(size=(3,)), requires_grad=True)
    out = ad.tsum(a.detach() * a)
    out.backward()
    np.testing.assert_allclose(a.grad, a.value)
