"""Unit tests for the layers module: convolution theorem, adjoints and finite differences."""

import numpy as np
import pytest

from src.errors import InvalidShapeError, ShapeMismatchError, StateError
from src.layers import (
    ConvMode,
    Domain,
    PointwiseKind,
    SpectralConvLayer,
    SpectralPoolLayer,
    dense_backward,
    dense_forward,
    max_pool_backward,
    max_pool_forward,
    pointwise,
    pointwise_grad,
    spatial_conv_backward,
    spatial_conv_forward,
    spectral_conv_backward,
    spectral_conv_forward,
    spectral_pool_backward,
    spectral_pool_forward,
)
from src.tensor import ComplexTensor4, RealTensor4, fft2, ifft2, real_part

EPS = 1e-5
RTOL = 1e-4


def numeric_grad(f, x, eps=EPS):
    """Central differences of a scalar function of a real array."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[idx] += eps
        minus[idx] -= eps
        grad[idx] = (f(plus) - f(minus)) / (2 * eps)
    return grad


def assert_grad_close(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), 1e-8)
    assert np.max(np.abs(analytic - numeric)) / scale < RTOL


def circular_reference(k, x):
    """y[s, o, n] = sum_i sum_m k[o, i, m] x[s, i, (n - m) mod N]."""
    s, c, h, w = x.shape
    out = np.zeros((s, k.shape[0], h, w))
    for m1 in range(k.shape[2]):
        for m2 in range(k.shape[3]):
            shifted = np.roll(x, shift=(m1, m2), axis=(2, 3))
            out += np.einsum("oi,sihw->sohw", k[:, :, m1, m2], shifted)
    return out


def _complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestSpectralConv:
    """Test cases for spectral convolution."""

    def test_convolution_theorem_oracle(self, rng):
        """Test spectral products equal circular convolution on 100 random instances."""
        worst = 0.0
        for _ in range(100):
            side = int(rng.choice([8, 16, 32]))
            k_size = int(rng.integers(3, 8))
            x = RealTensor4(rng.standard_normal((1, 1, side, side)))
            k = RealTensor4(rng.standard_normal((1, 1, k_size, k_size)))
            layer = SpectralConvLayer(kernels=k, input_hw=(side, side))
            spectral = real_part(ifft2(spectral_conv_forward(layer, fft2(x)))).data
            spatial = spatial_conv_forward(k, x, ConvMode.CIRCULAR).data
            worst = max(worst, np.max(np.abs(spectral - spatial)) / np.max(np.abs(spatial)))
        assert worst < 1e-9

    def test_channel_summation(self, rng):
        """Test multi-channel outputs sum over input channels."""
        x = rng.standard_normal((2, 3, 8, 8))
        k = rng.standard_normal((4, 3, 3, 3))
        layer = SpectralConvLayer(kernels=RealTensor4(k), input_hw=(8, 8))
        out = real_part(ifft2(spectral_conv_forward(layer, fft2(RealTensor4(x))))).data
        np.testing.assert_allclose(out, circular_reference(k, x), atol=1e-9)

    def test_spectra_are_cached(self, rng):
        """Test the kernel FFT is computed once per kernel value."""
        layer = SpectralConvLayer(
            kernels=RealTensor4(rng.standard_normal((1, 1, 3, 3))), input_hw=(8, 8)
        )
        assert layer.spectra() is layer.spectra()
        updated = layer.with_kernels(RealTensor4(np.ones((1, 1, 3, 3))))
        assert updated.cached_spectra is None

    def test_wrong_input_size(self, rng):
        """Test planes of another size are rejected."""
        layer = SpectralConvLayer(kernels=RealTensor4(np.ones((1, 1, 3, 3))), input_hw=(8, 8))
        with pytest.raises(ShapeMismatchError):
            spectral_conv_forward(layer, fft2(RealTensor4(np.ones((1, 1, 16, 16)))))

    def test_backward_needs_forward_input(self, rng):
        """Test backward without the cached input is a state error."""
        layer = SpectralConvLayer(kernels=RealTensor4(np.ones((1, 1, 3, 3))), input_hw=(8, 8))
        with pytest.raises(StateError):
            spectral_conv_backward(layer, None, ComplexTensor4(np.zeros((1, 1, 8, 8))))

    def test_gradients_match_finite_differences(self, rng):
        """Test kernel and input gradients for L = Re sum(conj(C) * Y)."""
        x = _complex(rng, (2, 2, 8, 8))
        k = rng.standard_normal((3, 2, 3, 3))
        C = _complex(rng, (2, 3, 8, 8))

        def loss(kernels, inputs):
            layer = SpectralConvLayer(kernels=RealTensor4(kernels), input_hw=(8, 8))
            Y = spectral_conv_forward(layer, ComplexTensor4(inputs)).data
            return float(np.sum((np.conj(C) * Y).real))

        layer = SpectralConvLayer(kernels=RealTensor4(k), input_hw=(8, 8))
        bundle = spectral_conv_backward(layer, ComplexTensor4(x), ComplexTensor4(C))

        assert_grad_close(
            bundle.param_grads["kernels"].data, numeric_grad(lambda kk: loss(kk, x), k)
        )
        d_re = numeric_grad(lambda re: loss(k, re + 1j * x.imag), x.real.copy())
        d_im = numeric_grad(lambda im: loss(k, x.real + 1j * im), x.imag.copy())
        assert_grad_close(bundle.input_grad.data, d_re + 1j * d_im)


class TestSpectralPool:
    """Test cases for spectral pooling."""

    def test_constant_image_preserved(self):
        """Test a constant image stays constant after pooling."""
        x = RealTensor4(np.full((1, 1, 16, 16), 0.7))
        out = spectral_pool_forward(SpectralPoolLayer((4, 4)), x, Domain.SPATIAL)
        np.testing.assert_allclose(out.data, 0.7, atol=1e-12)

    def test_domains_agree(self, rng):
        """Test spatial-domain pooling equals the spectral path wrapped in transforms."""
        x = RealTensor4(rng.standard_normal((2, 2, 16, 16)))
        pool = SpectralPoolLayer((8, 8))
        spatial = spectral_pool_forward(pool, x, Domain.SPATIAL).data
        spectral = real_part(ifft2(spectral_pool_forward(pool, fft2(x)))).data
        np.testing.assert_allclose(spatial, spectral, atol=1e-12)

    def test_spectral_domain_needs_complex_input(self, rng):
        """Test real input to the spectral-domain pool is refused."""
        with pytest.raises(ShapeMismatchError):
            spectral_pool_forward(SpectralPoolLayer((4, 4)), RealTensor4(np.ones((1, 1, 8, 8))))

    def test_spectral_domain_gradient(self, rng):
        """Test the spectral-domain backward against finite differences."""
        X = _complex(rng, (1, 2, 8, 8))
        C = _complex(rng, (1, 2, 4, 4))
        pool = SpectralPoolLayer((4, 4))

        def loss(re, im):
            Y = spectral_pool_forward(pool, ComplexTensor4(re + 1j * im)).data
            return float(np.sum((np.conj(C) * Y).real))

        g = spectral_pool_backward(pool, ComplexTensor4(C), (8, 8)).data
        d_re = numeric_grad(lambda re: loss(re, X.imag), X.real.copy())
        d_im = numeric_grad(lambda im: loss(X.real, im), X.imag.copy())
        assert_grad_close(g, d_re + 1j * d_im)

    def test_spatial_domain_gradient(self, rng):
        """Test the spatial-domain backward against finite differences."""
        x = rng.standard_normal((1, 1, 8, 8))
        C = rng.standard_normal((1, 1, 4, 4))
        pool = SpectralPoolLayer((4, 4))

        def loss(values):
            y = spectral_pool_forward(pool, RealTensor4(values), Domain.SPATIAL).data
            return float(np.sum(C * y))

        g = spectral_pool_backward(pool, RealTensor4(C), (8, 8), Domain.SPATIAL).data
        assert_grad_close(g, numeric_grad(loss, x))

    def test_gradient_shape_checked(self):
        """Test an upstream gradient of the wrong size fails."""
        with pytest.raises(ShapeMismatchError):
            spectral_pool_backward(
                SpectralPoolLayer((4, 4)), ComplexTensor4(np.zeros((1, 1, 8, 8))), (8, 8)
            )


class TestSpatialConv:
    """Test cases for direct convolution."""

    def test_circular_matches_reference(self, rng):
        """Test circular mode against an explicit roll-and-sum."""
        x = rng.standard_normal((2, 2, 8, 8))
        k = rng.standard_normal((3, 2, 3, 3))
        out = spatial_conv_forward(RealTensor4(k), RealTensor4(x), ConvMode.CIRCULAR)
        np.testing.assert_allclose(out.data, circular_reference(k, x), atol=1e-12)

    def test_zero_pad_delta_kernel_is_identity(self, rng):
        """Test a centered delta kernel copies the input in zero_pad mode."""
        x = rng.standard_normal((1, 1, 8, 8))
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 1] = 1.0
        out = spatial_conv_forward(RealTensor4(k), RealTensor4(x))
        np.testing.assert_allclose(out.data, x)

    def test_zero_pad_border(self):
        """Test zero padding at the border of an all-ones image."""
        out = spatial_conv_forward(
            RealTensor4(np.ones((1, 1, 3, 3))), RealTensor4(np.ones((1, 1, 4, 4)))
        ).data[0, 0]
        assert out[0, 0] == pytest.approx(4.0)
        assert out[1, 1] == pytest.approx(9.0)
        assert out[0, 1] == pytest.approx(6.0)

    def test_kernel_larger_than_image(self):
        """Test oversized kernels are rejected."""
        with pytest.raises(InvalidShapeError):
            spatial_conv_forward(
                RealTensor4(np.ones((1, 1, 5, 5))), RealTensor4(np.ones((1, 1, 4, 4)))
            )

    @pytest.mark.parametrize("mode", [ConvMode.CIRCULAR, ConvMode.ZERO_PAD])
    @pytest.mark.parametrize("k_size", [2, 3])
    def test_gradients_match_finite_differences(self, rng, mode, k_size):
        """Test kernel and input gradients in both boundary modes."""
        x = rng.standard_normal((2, 2, 6, 6))
        k = rng.standard_normal((2, 2, k_size, k_size))
        C = rng.standard_normal((2, 2, 6, 6))

        def loss(kernels, inputs):
            out = spatial_conv_forward(RealTensor4(kernels), RealTensor4(inputs), mode)
            return float(np.sum(C * out.data))

        bundle = spatial_conv_backward(RealTensor4(k), RealTensor4(x), RealTensor4(C), mode)
        assert_grad_close(
            bundle.param_grads["kernels"].data, numeric_grad(lambda kk: loss(kk, x), k)
        )
        assert_grad_close(bundle.input_grad.data, numeric_grad(lambda xx: loss(k, xx), x))


class TestMaxPool:
    """Test cases for max pooling."""

    def test_forward_and_indices(self):
        """Test window maxima and their recorded positions."""
        x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
        out, idx = max_pool_forward(RealTensor4(x), 2)
        np.testing.assert_array_equal(out.data[0, 0], [[5, 7], [13, 15]])
        np.testing.assert_array_equal(idx.flat[0, 0], [[5, 7], [13, 15]])

    def test_ties_pick_first_element(self):
        """Test ties resolve to the first row-major element."""
        _, idx = max_pool_forward(RealTensor4(np.ones((1, 1, 2, 2))), 2)
        g = max_pool_backward(idx, RealTensor4(np.ones((1, 1, 1, 1)))).data
        np.testing.assert_array_equal(g[0, 0], [[1, 0], [0, 0]])

    def test_gradient_matches_finite_differences(self, rng):
        """Test the scatter backward on tie-free inputs."""
        x = rng.standard_normal((2, 2, 4, 4))
        C = rng.standard_normal((2, 2, 2, 2))
        _, idx = max_pool_forward(RealTensor4(x), 2)
        g = max_pool_backward(idx, RealTensor4(C)).data

        def loss(values):
            return float(np.sum(C * max_pool_forward(RealTensor4(values), 2)[0].data))

        assert_grad_close(g, numeric_grad(loss, x))


class TestPointwiseAndDense:
    """Test cases for activations and the dense backend."""

    def test_pointwise_kinds(self):
        """Test relu, square and identity values."""
        x = RealTensor4(np.array([-2.0, 0.0, 3.0]).reshape(1, 1, 1, 3))
        np.testing.assert_array_equal(pointwise(PointwiseKind.RELU, x).data.ravel(), [0, 0, 3])
        np.testing.assert_array_equal(pointwise(PointwiseKind.SQUARE, x).data.ravel(), [4, 0, 9])
        np.testing.assert_array_equal(
            pointwise(PointwiseKind.IDENTITY, x).data.ravel(), [-2, 0, 3]
        )

    def test_pointwise_grads(self):
        """Test relu'(0) = 0 and square' = 2x."""
        x = np.array([[-2.0, 0.0, 3.0]])
        g = np.ones_like(x)
        np.testing.assert_array_equal(pointwise_grad(PointwiseKind.RELU, x, g), [[0, 0, 1]])
        np.testing.assert_array_equal(pointwise_grad(PointwiseKind.SQUARE, x, g), [[-4, 0, 6]])

    def test_dense_gradients(self, rng):
        """Test dense gradients against finite differences."""
        Wm = rng.standard_normal((3, 5))
        b = rng.standard_normal(3)
        x = rng.standard_normal((4, 5))
        C = rng.standard_normal((4, 3))
        bundle = dense_backward(Wm, x, C)

        assert_grad_close(
            bundle.param_grads["weight"],
            numeric_grad(lambda w: float(np.sum(C * dense_forward(w, b, x))), Wm),
        )
        assert_grad_close(
            bundle.param_grads["bias"],
            numeric_grad(lambda bb: float(np.sum(C * dense_forward(Wm, bb, x))), b),
        )
        assert_grad_close(
            bundle.input_grad,
            numeric_grad(lambda xx: float(np.sum(C * dense_forward(Wm, b, xx))), x),
        )

    def test_dense_shape_mismatch(self, rng):
        """Test a wrong input width fails."""
        with pytest.raises(ShapeMismatchError):
            dense_forward(np.ones((3, 5)), np.zeros(3), np.ones((2, 4)))
