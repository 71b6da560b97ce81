import numpy as np
import pytest

from conftest import max_relative_gradient_error
from qstbench import autodiff as ad
from qstbench.errors import ShapeError

TOL = 1e-4


class TestElementwiseOps:
    def test_add_broadcast(self, rng):
        a = ad.parameter(rng.standard_normal((3, 4)), "a")
        b = ad.parameter(rng.standard_normal(4), "b")
        err = max_relative_gradient_error(lambda: (a + b).sum(), [a, b])
        assert err < TOL

    def test_mul_div(self, rng):
        a = ad.parameter(rng.standard_normal(6) + 3.0, "a")
        b = ad.parameter(rng.standard_normal(6) + 3.0, "b")
        err = max_relative_gradient_error(lambda: ((a * b) / (a + b)).sum(), [a, b])
        assert err < TOL

    def test_neg_sub(self, rng):
        a = ad.parameter(rng.standard_normal(5), "a")
        err = max_relative_gradient_error(lambda: (-(a - 2.0) * a).mean(), [a])
        assert err < TOL

    def test_scalar_div_broadcast(self, rng):
        a = ad.parameter(rng.standard_normal((3, 3)), "a")
        scale = ad.parameter(np.array(2.5), "s")
        err = max_relative_gradient_error(lambda: (a / scale).sum(), [a, scale])
        assert err < TOL


class TestMatmul:
    def test_matrix_matrix(self, rng):
        a = ad.parameter(rng.standard_normal((4, 3)), "a")
        b = ad.parameter(rng.standard_normal((3, 2)), "b")
        err = max_relative_gradient_error(lambda: (a @ b).sum(), [a, b])
        assert err < TOL

    def test_matrix_vector(self, rng):
        a = ad.parameter(rng.standard_normal((4, 3)), "a")
        x = ad.parameter(rng.standard_normal(3), "x")
        err = max_relative_gradient_error(lambda: (a @ x).sum(), [a, x])
        assert err < TOL

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            ad.matmul(ad.constant(np.zeros((2, 3))), ad.constant(np.zeros((2, 3))))
        with pytest.raises(ShapeError):
            ad.matmul(ad.constant(np.zeros(3)), ad.constant(np.zeros(3)))


class TestStructuralOps:
    def test_reshape_transpose(self, rng):
        a = ad.parameter(rng.standard_normal((4, 6)), "a")
        err = max_relative_gradient_error(
            lambda: (a.reshape(6, 4).transpose() * 1.5).sum(), [a]
        )
        assert err < TOL

    def test_concatenate(self, rng):
        a = ad.parameter(rng.standard_normal(3), "a")
        b = ad.parameter(rng.standard_normal(5), "b")
        err = max_relative_gradient_error(
            lambda: (ad.concatenate([a, b]) * ad.concatenate([a, b])).sum(), [a, b]
        )
        assert err < TOL

    def test_take_channel(self, rng):
        a = ad.parameter(rng.standard_normal((3, 3, 2)), "a")
        err = max_relative_gradient_error(
            lambda: (ad.take_channel(a, 0) * ad.take_channel(a, 1)).sum(), [a]
        )
        assert err < TOL

    def test_diamond_accumulation(self):
        # the same node feeding two consumers must accumulate both gradients
        x = ad.parameter(np.array([2.0]), "x")
        y = (x * 3.0) + (x * 4.0)
        y.sum().backward()
        assert x.grad[0] == pytest.approx(7.0)


class TestActivations:
    def test_leaky_relu_values(self):
        x = ad.constant(np.array([-1.0, 3.0]))
        out = ad.leaky_relu(x)
        assert np.allclose(out.values, [-0.2, 3.0])

    @pytest.mark.parametrize("fn", [ad.leaky_relu, ad.tanh, ad.sigmoid, ad.softplus])
    def test_gradients(self, fn, rng):
        x = ad.parameter(rng.standard_normal(8) * 2.0 + 0.05, "x")
        err = max_relative_gradient_error(lambda: fn(x).sum(), [x])
        assert err < TOL

    def test_sigmoid_stability(self):
        x = ad.constant(np.array([-800.0, 800.0]))
        y = ad.sigmoid(x).values
        assert np.all(np.isfinite(y))
        assert y[0] == pytest.approx(0.0, abs=1e-12)
        assert y[1] == pytest.approx(1.0, abs=1e-12)

    def test_softplus_stability(self):
        y = ad.softplus(ad.constant(np.array([-800.0, 800.0]))).values
        assert y[0] == pytest.approx(0.0, abs=1e-12)
        assert y[1] == pytest.approx(800.0, rel=1e-12)


class TestConvTranspose:
    def _reference(self, x, k, stride):
        # direct scatter definition, independent of the production code path
        h, w, cin = x.shape
        ksz, cout = k.shape[0], k.shape[3]
        pad = (ksz - stride) // 2
        oh, ow = h * stride, w * stride
        out = np.zeros((oh, ow, cout))
        for i in range(h):
            for j in range(w):
                for a in range(ksz):
                    for b in range(ksz):
                        r, c = i * stride + a - pad, j * stride + b - pad
                        if 0 <= r < oh and 0 <= c < ow:
                            for ci in range(cin):
                                out[r, c, :] += x[i, j, ci] * k[a, b, ci, :]
        return out

    @pytest.mark.parametrize("stride", [1, 2])
    def test_forward_matches_reference(self, stride, rng):
        x = rng.standard_normal((3, 3, 2))
        k = rng.standard_normal((4, 4, 2, 3))
        got = ad.conv2d_transpose_values(x, k, stride)
        assert got.shape == (3 * stride, 3 * stride, 3)
        assert np.allclose(got, self._reference(x, k, stride), atol=1e-12)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_gradients(self, stride, rng):
        x = ad.parameter(rng.standard_normal((3, 3, 2)), "x")
        k = ad.parameter(rng.standard_normal((4, 4, 2, 2)) * 0.5, "k")
        err = max_relative_gradient_error(
            lambda: ad.tanh(ad.conv2d_transpose(x, k, stride)).sum(), [x, k]
        )
        assert err < TOL

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            ad.conv2d_transpose(ad.constant(np.zeros((3, 3, 2))), ad.constant(np.zeros((4, 4, 5, 2))), 1)
        with pytest.raises(ShapeError):
            ad.conv2d_transpose(ad.constant(np.zeros((3, 3))), ad.constant(np.zeros((4, 4, 2, 2))), 1)
        with pytest.raises(ShapeError):
            ad.conv2d_transpose(ad.constant(np.zeros((3, 3, 2))), ad.constant(np.zeros((1, 1, 2, 2))), 2)


class TestInstanceNorm:
    def test_constant_channel_zeroes(self):
        x = ad.constant(np.full((4, 4, 2), 3.7))
        gain = ad.constant(np.ones(2))
        bias = ad.constant(np.zeros(2))
        out = ad.instance_norm(x, gain, bias)
        assert np.allclose(out.values, 0.0, atol=1e-8)

    def test_normalizes_per_channel(self, rng):
        x = ad.constant(rng.standard_normal((8, 8, 3)) * 5 + 2)
        out = ad.instance_norm(x, ad.constant(np.ones(3)), ad.constant(np.zeros(3)))
        assert np.allclose(out.values.mean(axis=(0, 1)), 0.0, atol=1e-10)
        assert np.allclose(out.values.std(axis=(0, 1)), 1.0, atol=1e-3)

    def test_gradients(self, rng):
        x = ad.parameter(rng.standard_normal((4, 4, 2)), "x")
        gain = ad.parameter(np.ones(2) + 0.3, "g")
        bias = ad.parameter(np.zeros(2) + 0.1, "b")
        err = max_relative_gradient_error(
            lambda: ad.sigmoid(ad.instance_norm(x, gain, bias)).sum(), [x, gain, bias]
        )
        assert err < TOL


class TestRnnCell:
    def test_unrolled_gradients(self, rng):
        wx = ad.parameter(rng.standard_normal((4, 2)) * 0.5, "wx")
        wh = ad.parameter(rng.standard_normal((4, 4)) * 0.5, "wh")
        b = ad.parameter(rng.standard_normal(4) * 0.1, "b")
        xs = rng.standard_normal((5, 2))

        def loss():
            h = ad.constant(np.zeros(4))
            for t in range(5):
                h = ad.simple_rnn_cell(ad.constant(xs[t]), h, wx, wh, b)
            return (h * h).sum()

        assert max_relative_gradient_error(loss, [wx, wh, b]) < TOL


class TestBackwardContract:
    def test_requires_scalar(self):
        x = ad.parameter(np.zeros(3), "x")
        with pytest.raises(ShapeError):
            (x * 2.0).backward()

    def test_constant_backward_rejected(self):
        with pytest.raises(ShapeError):
            ad.constant(np.array(1.0)).backward()

    def test_detach_cuts_graph(self):
        x = ad.parameter(np.array([3.0]), "x")
        y = (x * 2.0).detach()
        z = (y * 5.0).sum()
        assert not z.requires_grad

    def test_grad_zero_initialized(self):
        x = ad.parameter(np.ones((2, 2)), "x")
        assert np.all(x.grad == 0.0)
