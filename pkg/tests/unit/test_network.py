"""Unit tests for network specs, execution and parameter persistence."""

import numpy as np
import pytest

from src.distill import cross_entropy, softmax
from src.errors import ConfigError, FormatError, ShapeMismatchError, StateError, TransformError
from src.layers import PointwiseKind
from src.network import (
    LayerKind,
    LayerShape,
    NetworkSpec,
    ParamStore,
    activation,
    backend_only,
    backward,
    build_teacher,
    conv,
    copy_backend,
    dense,
    flatten,
    forward,
    forward_features,
    infer_shapes,
    init_params,
    linear_counterpart,
    load_params,
    max_pool,
    mini_alexnet,
    save_params,
    square_variant,
    tiny_cnn,
)
from src.tensor import RealTensor4, Shape4

INPUT = Shape4(1, 2, 8, 8)


@pytest.fixture
def teacher():
    return tiny_cnn(INPUT, class_count=3)


@pytest.fixture
def batch(rng):
    return RealTensor4(rng.uniform(0, 1, (4, 2, 8, 8)))


def _loss_and_grad(net, params, batch, labels):
    logits, tape = forward(net, params, batch, record_tape=True)
    loss, grad = cross_entropy(softmax(logits), labels)
    return loss, grad, tape


def _check_param_grads(net, params, batch, labels, rng, samples=6):
    _, grad, tape = _loss_and_grad(net, params, batch, labels)
    grads = backward(net, params, tape, grad)
    assert set(grads) == {layer.name for layer in net.learnable_layers()}
    eps = 1e-5
    for name, entries in params.params.items():
        for key, value in entries.items():
            for _ in range(samples):
                idx = tuple(int(rng.integers(0, d)) for d in value.shape)
                plus, minus = params.copy(), params.copy()
                plus.params[name][key][idx] += eps
                minus.params[name][key][idx] -= eps
                numeric = (
                    _loss_and_grad(net, plus, batch, labels)[0]
                    - _loss_and_grad(net, minus, batch, labels)[0]
                ) / (2 * eps)
                analytic = grads[name][key][idx]
                assert abs(analytic - numeric) <= 1e-4 * max(abs(numeric), 1e-3)


class TestSpecs:
    """Test cases for spec construction and shape inference."""

    def test_infer_shapes(self, teacher):
        """Test shapes after every tiny-cnn layer."""
        shapes = infer_shapes(teacher)
        assert shapes[0] == LayerShape("spatial", (2, 8, 8))
        assert shapes[1] == LayerShape("spatial", (4, 8, 8))
        assert shapes[3] == LayerShape("spatial", (4, 4, 4))
        assert shapes[-1] == LayerShape("flat", (3,))

    def test_mismatched_dense_rejected(self):
        """Test a dense layer with the wrong fan-in fails shape inference."""
        spec = NetworkSpec(
            "bad",
            (conv("c", 1, 2, 3), flatten(), dense("fc", 10, 2)),
            Shape4(1, 1, 4, 4),
            2,
        )
        with pytest.raises(ShapeMismatchError):
            infer_shapes(spec)

    def test_duplicate_names_rejected(self):
        """Test layer names must be unique."""
        with pytest.raises(ConfigError):
            NetworkSpec(
                "dup",
                (activation("a"), activation("a"), flatten(), dense("fc", 16, 2)),
                Shape4(1, 1, 4, 4),
                2,
            )

    def test_registry(self):
        """Test teachers are built by name."""
        assert build_teacher("mini-alexnet", Shape4(1, 3, 32, 32), 10).name == "mini-alexnet"
        with pytest.raises(ConfigError):
            build_teacher("resnet", INPUT, 3)

    def test_mini_alexnet_layout(self):
        """Test three conv blocks and a dense backend."""
        spec = mini_alexnet(Shape4(1, 3, 32, 32))
        kinds = [layer.kind for layer in spec.layers]
        assert kinds.count(LayerKind.SPATIAL_CONV) == 3
        assert kinds.count(LayerKind.MAX_POOL) == 3
        assert spec.layers[-1].in_features == 64 * 4 * 4

    @pytest.mark.parametrize(
        "side,blocks,features",
        [(8, 2, 32 * 2 * 2), (16, 3, 64 * 2 * 2), (32, 3, 64 * 4 * 4)],
    )
    def test_mini_alexnet_every_sweep_side(self, side, blocks, features):
        """Test the teacher and its counterpart build at every resolution-sweep side."""
        teacher = build_teacher("mini-alexnet", Shape4(1, 3, side, side), 10)
        kinds = [layer.kind for layer in teacher.layers]
        assert kinds.count(LayerKind.SPATIAL_CONV) == blocks
        assert teacher.layers[-1].in_features == features
        student = linear_counterpart(teacher)
        assert [layer.kind for layer in student.layers].count(LayerKind.SPECTRAL_CONV) == blocks
        assert infer_shapes(student)[-1] == LayerShape("flat", (10,))

    def test_mini_alexnet_input_below_first_kernel(self):
        """Test an input smaller than the first kernel is rejected."""
        with pytest.raises(ShapeMismatchError):
            mini_alexnet(Shape4(1, 3, 4, 4))


class TestLinearCounterpart:
    """Test cases for the spectral linear-counterpart transform."""

    def test_structure(self, teacher):
        """Test convs become spectral, relu is dropped and pools are cropped."""
        student = linear_counterpart(teacher)
        kinds = [layer.kind for layer in student.layers]
        assert kinds == [
            LayerKind.TO_SPECTRAL,
            LayerKind.SPECTRAL_CONV,
            LayerKind.SPECTRAL_POOL,
            LayerKind.TO_SPATIAL,
            LayerKind.FLATTEN,
            LayerKind.DENSE,
        ]
        assert student.layers[2].out_hw == (4, 4)
        assert [l.name for l in student.learnable_layers()] == ["conv1", "fc"]

    def test_max_pool_variant(self, teacher):
        """Test pooling="max" keeps max pooling between converters."""
        student = linear_counterpart(teacher, pooling="max")
        kinds = [layer.kind for layer in student.layers]
        assert LayerKind.MAX_POOL in kinds
        assert LayerKind.SPECTRAL_POOL not in kinds
        assert student.name.endswith("-maxpool")

    def test_square_has_no_counterpart(self, teacher):
        """Test a square nonlinearity cannot be linearized."""
        with pytest.raises(TransformError):
            linear_counterpart(square_variant(teacher))

    def test_unknown_pooling(self, teacher):
        """Test unknown pooling variants fail."""
        with pytest.raises(TransformError):
            linear_counterpart(teacher, pooling="average")

    def test_square_variant(self, teacher):
        """Test relu is swapped for square."""
        sq = square_variant(teacher)
        acts = [l.activation for l in sq.layers if l.kind is LayerKind.POINTWISE]
        assert acts == [PointwiseKind.SQUARE]

    def test_frontend_is_linear(self, teacher, rng):
        """Test features(a x) = a features(x) for the linear counterpart."""
        student = linear_counterpart(teacher)
        params = init_params(student, seed=3)
        x = RealTensor4(rng.standard_normal((2, 2, 8, 8)))
        base = forward_features(student, params, x)
        for a in rng.uniform(-2, 2, size=5):
            scaled = forward_features(student, params, RealTensor4(a * x.data))
            assert np.max(np.abs(scaled - a * base)) < 1e-8


class TestExecution:
    """Test cases for forward and backward passes."""

    def test_forward_shapes(self, teacher, batch):
        """Test logits have one row per sample."""
        logits, tape = forward(teacher, init_params(teacher), batch)
        assert logits.shape == (4, 3)
        assert tape is None

    def test_wrong_input_shape(self, teacher):
        """Test inputs must match the network input shape."""
        with pytest.raises(ShapeMismatchError):
            forward(teacher, init_params(teacher), RealTensor4(np.zeros((1, 1, 8, 8))))

    def test_backward_needs_tape(self, teacher, batch):
        """Test backward without a recorded tape fails."""
        with pytest.raises(StateError):
            backward(teacher, init_params(teacher), None, np.zeros((4, 3)))

    def test_student_gradients(self, teacher, batch, rng):
        """Test end-to-end student gradients against finite differences."""
        student = linear_counterpart(teacher)
        _check_param_grads(student, init_params(student, 1), batch, np.array([0, 1, 2, 0]), rng)

    def test_maxpool_student_gradients(self, teacher, batch, rng):
        """Test the max-pool student, whose pool sits in the spatial domain."""
        student = linear_counterpart(teacher, pooling="max")
        _check_param_grads(student, init_params(student, 2), batch, np.array([2, 1, 0, 0]), rng)

    def test_square_teacher_gradients(self, teacher, batch, rng):
        """Test the smooth square-activation teacher."""
        net = square_variant(teacher)
        _check_param_grads(net, init_params(net, 4), batch, np.array([1, 1, 2, 0]), rng)

    def test_deeper_student_gradients(self, rng):
        """Test two spectral blocks stacked."""
        teacher = mini_alexnet(Shape4(1, 1, 8, 8), 2, channels=(2, 2), kernels=(3, 3))
        student = linear_counterpart(teacher)
        x = RealTensor4(rng.uniform(0, 1, (3, 1, 8, 8)))
        _check_param_grads(student, init_params(student, 5), x, np.array([0, 1, 1]), rng)


class TestParams:
    """Test cases for initialization and persistence."""

    def test_init_is_deterministic(self, teacher):
        """Test the same seed gives identical stores."""
        assert init_params(teacher, 7).checksum() == init_params(teacher, 7).checksum()
        assert init_params(teacher, 7).checksum() != init_params(teacher, 8).checksum()

    def test_init_bounds(self, teacher):
        """Test the He-uniform bound before relu."""
        params = init_params(teacher, 0)
        bound = np.sqrt(2.0) * np.sqrt(3.0 / (2 * 9))
        assert np.max(np.abs(params.params["conv1"]["kernels"])) <= bound
        assert not params.params["fc"]["bias"].any()

    def test_momentum_starts_at_zero(self, teacher):
        """Test momentum buffers mirror every parameter."""
        params = init_params(teacher)
        assert not params.momentum["fc"]["weight"].any()
        assert params.momentum["fc"]["weight"].shape == params.params["fc"]["weight"].shape

    def test_save_and_load(self, teacher, tmp_path):
        """Test a checkpoint restores parameters and momentum."""
        params = init_params(teacher, 1)
        params.momentum["fc"]["weight"] += 0.5
        save_params(params, tmp_path / "t.sclcp")
        loaded = load_params(tmp_path / "t.sclcp", teacher)
        np.testing.assert_array_equal(
            loaded.params["conv1"]["kernels"], params.params["conv1"]["kernels"]
        )
        np.testing.assert_array_equal(
            loaded.momentum["fc"]["weight"], params.momentum["fc"]["weight"]
        )

    def test_corrupt_checkpoint(self, teacher):
        """Test a flipped byte fails the CRC."""
        buf = bytearray(init_params(teacher).to_bytes())
        buf[20] ^= 0xFF
        with pytest.raises(FormatError):
            ParamStore.from_bytes(bytes(buf))

    def test_load_against_other_spec(self, teacher, tmp_path):
        """Test loading into a different architecture fails."""
        save_params(init_params(teacher), tmp_path / "t.sclcp")
        with pytest.raises(ShapeMismatchError):
            load_params(tmp_path / "t.sclcp", backend_only(INPUT, 3))

    def test_copy_backend(self, teacher):
        """Test the student's dense layer is taken from the teacher."""
        student = linear_counterpart(teacher)
        t_params = init_params(teacher, 1)
        s_params = copy_backend(init_params(student, 2), t_params, student)
        np.testing.assert_array_equal(
            s_params.params["fc"]["weight"], t_params.params["fc"]["weight"]
        )
        assert not np.array_equal(
            s_params.params["conv1"]["kernels"], t_params.params["conv1"]["kernels"]
        )
