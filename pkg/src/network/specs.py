"""Declarative network specs, shape propagation and the linear-counterpart transform."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

from src.errors import ConfigError, ShapeMismatchError, TransformError
from src.layers import ConvMode, Domain, PointwiseKind
from src.tensor import Shape4, is_power_of_two

logger = logging.getLogger(__name__)


class LayerKind(Enum):
    """Every layer kind a network may contain."""

    SPATIAL_CONV = "spatial_conv"
    SPECTRAL_CONV = "spectral_conv"
    MAX_POOL = "max_pool"
    SPECTRAL_POOL = "spectral_pool"
    POINTWISE = "pointwise"
    DENSE = "dense"
    FLATTEN = "flatten"
    TO_SPECTRAL = "to_spectral"
    TO_SPATIAL = "to_spatial"


LEARNABLE = (LayerKind.SPATIAL_CONV, LayerKind.SPECTRAL_CONV, LayerKind.DENSE)


@dataclass(frozen=True)
class LayerSpec:
    """One layer and its hyperparameters; unused fields stay None."""

    kind: LayerKind
    name: str
    in_channels: Optional[int] = None
    out_channels: Optional[int] = None
    kernel_size: Optional[int] = None
    pool: Optional[int] = None
    stride: Optional[int] = None
    out_hw: Optional[Tuple[int, int]] = None
    activation: Optional[PointwiseKind] = None
    in_features: Optional[int] = None
    out_features: Optional[int] = None
    domain: Domain = Domain.SPECTRAL
    conv_mode: ConvMode = ConvMode.ZERO_PAD

    @property
    def learnable(self) -> bool:
        return self.kind in LEARNABLE


def conv(name: str, in_channels: int, out_channels: int, kernel_size: int) -> LayerSpec:
    return LayerSpec(
        LayerKind.SPATIAL_CONV,
        name,
        in_channels=in_channels,
        out_channels=out_channels,
        kernel_size=kernel_size,
    )


def activation(name: str, kind: PointwiseKind = PointwiseKind.RELU) -> LayerSpec:
    return LayerSpec(LayerKind.POINTWISE, name, activation=kind)


def max_pool(name: str, pool: int = 2, stride: Optional[int] = None) -> LayerSpec:
    return LayerSpec(LayerKind.MAX_POOL, name, pool=pool, stride=stride or pool)


def flatten(name: str = "flatten") -> LayerSpec:
    return LayerSpec(LayerKind.FLATTEN, name)


def dense(name: str, in_features: int, out_features: int) -> LayerSpec:
    return LayerSpec(
        LayerKind.DENSE, name, in_features=in_features, out_features=out_features
    )


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list for inputs of shape (any, C, H, W)."""

    name: str
    layers: Tuple[LayerSpec, ...]
    input_shape: Shape4
    class_count: int

    def __post_init__(self):
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ConfigError(f"layer names must be unique in {self.name}: {names}")

    def learnable_layers(self) -> List[LayerSpec]:
        return [layer for layer in self.layers if layer.learnable]


class LayerShape(NamedTuple):
    """Domain and per-sample shape of a feature map."""

    domain: str  # "spatial", "spectral" or "flat"
    dims: Tuple[int, ...]


def _fail(layer: LayerSpec, message: str) -> ShapeMismatchError:
    return ShapeMismatchError(f"layer '{layer.name}' ({layer.kind.value}): {message}")


def _propagate(layer: LayerSpec, current: LayerShape) -> LayerShape:
    domain, dims = current
    kind = layer.kind

    def need(expected: str) -> None:
        if domain != expected:
            raise _fail(layer, f"expects {expected} input, got {domain}")

    if kind in (LayerKind.SPATIAL_CONV, LayerKind.SPECTRAL_CONV):
        need("spatial" if kind is LayerKind.SPATIAL_CONV else "spectral")
        c, h, w = dims
        if layer.in_channels != c:
            raise _fail(layer, f"expects {layer.in_channels} channels, got {c}")
        if layer.kernel_size > h or layer.kernel_size > w:
            raise _fail(layer, f"kernel {layer.kernel_size} larger than {h}x{w}")
        return LayerShape(domain, (layer.out_channels, h, w))

    if kind is LayerKind.MAX_POOL:
        need("spatial")
        c, h, w = dims
        if layer.pool > h or layer.pool > w:
            raise _fail(layer, f"window {layer.pool} larger than {h}x{w}")
        stride = layer.stride or layer.pool
        return LayerShape(
            domain, (c, (h - layer.pool) // stride + 1, (w - layer.pool) // stride + 1)
        )

    if kind is LayerKind.SPECTRAL_POOL:
        need(layer.domain.value)
        c, h, w = dims
        h2, w2 = layer.out_hw
        if h2 > h or w2 > w:
            raise _fail(layer, f"cannot crop {h}x{w} to {h2}x{w2}")
        return LayerShape(domain, (c, h2, w2))

    if kind is LayerKind.POINTWISE:
        if domain == "spectral" and layer.activation is not PointwiseKind.IDENTITY:
            raise _fail(layer, "nonlinear activations need spatial or flat input")
        return current

    if kind is LayerKind.TO_SPECTRAL:
        need("spatial")
        if not (is_power_of_two(dims[1]) and is_power_of_two(dims[2])):
            raise _fail(layer, f"{dims[1]}x{dims[2]} is not a power-of-two plane")
        return LayerShape("spectral", dims)

    if kind is LayerKind.TO_SPATIAL:
        need("spectral")
        return LayerShape("spatial", dims)

    if kind is LayerKind.FLATTEN:
        need("spatial")
        c, h, w = dims
        return LayerShape("flat", (c * h * w,))

    need("flat")
    if layer.in_features != dims[0]:
        raise _fail(layer, f"expects {layer.in_features} features, got {dims[0]}")
    return LayerShape("flat", (layer.out_features,))


def infer_shapes(spec: NetworkSpec) -> List[LayerShape]:
    """
    Predict the feature shape after every layer.

    Args:
        spec: Network to check

    Returns:
        Shapes with the input shape first, then one entry per layer
    """
    inp = spec.input_shape
    shapes = [LayerShape("spatial", (inp.c, inp.h, inp.w))]
    for layer in spec.layers:
        shapes.append(_propagate(layer, shapes[-1]))
    final = shapes[-1]
    if final != LayerShape("flat", (spec.class_count,)):
        raise ShapeMismatchError(
            f"{spec.name} ends in {final}, expected {spec.class_count} logits"
        )
    return shapes


def linear_counterpart(teacher: NetworkSpec, pooling: str = "spectral") -> NetworkSpec:
    """
    Build the spectral linear counterpart of a nonlinear CNN.

    Convolutions become spectral convolutions, relu is dropped, max pools
    become spectral crops (or stay max pools when pooling="max"), and the
    domain converters are inserted around the spectral section.

    Args:
        teacher: Nonlinear spatial network
        pooling: "spectral" or "max"

    Returns:
        Student NetworkSpec with the same learnable layer names
    """
    if pooling not in ("spectral", "max"):
        raise TransformError(f"unknown pooling variant: {pooling}")
    shapes = infer_shapes(teacher)

    layers: List[LayerSpec] = []
    domain = "spatial"
    converters = 0

    def to(target: str) -> None:
        nonlocal domain, converters
        if domain == target:
            return
        converters += 1
        kind = LayerKind.TO_SPECTRAL if target == "spectral" else LayerKind.TO_SPATIAL
        layers.append(LayerSpec(kind, f"{kind.value}_{converters}"))
        domain = target

    for layer, before in zip(teacher.layers, shapes[:-1]):
        kind = layer.kind
        if kind is LayerKind.SPATIAL_CONV:
            to("spectral")
            layers.append(replace(layer, kind=LayerKind.SPECTRAL_CONV))
        elif kind is LayerKind.POINTWISE:
            if layer.activation is PointwiseKind.SQUARE:
                raise TransformError(f"layer '{layer.name}': square has no linear counterpart")
        elif kind is LayerKind.MAX_POOL:
            if pooling == "max":
                to("spatial")
                layers.append(layer)
            else:
                to("spectral")
                stride = layer.stride or layer.pool
                _, h, w = before.dims
                layers.append(
                    LayerSpec(
                        LayerKind.SPECTRAL_POOL,
                        layer.name,
                        out_hw=(h // stride, w // stride),
                        domain=Domain.SPECTRAL,
                    )
                )
        elif kind is LayerKind.FLATTEN:
            to("spatial")
            layers.append(layer)
        elif kind is LayerKind.DENSE:
            layers.append(layer)
        else:
            raise TransformError(
                f"layer '{layer.name}': {kind.value} is not a teacher layer kind"
            )
        if kind is LayerKind.FLATTEN or kind is LayerKind.DENSE:
            domain = "flat"

    student = NetworkSpec(
        name=f"{teacher.name}-sclc" + ("-maxpool" if pooling == "max" else ""),
        layers=tuple(layers),
        input_shape=teacher.input_shape,
        class_count=teacher.class_count,
    )
    infer_shapes(student)
    logger.info(
        "Linear counterpart of %s: %s layers -> %s layers",
        teacher.name,
        len(teacher.layers),
        len(student.layers),
    )
    return student


def square_variant(teacher: NetworkSpec) -> NetworkSpec:
    """Same network with every relu replaced by a square nonlinearity."""
    layers = tuple(
        replace(layer, activation=PointwiseKind.SQUARE)
        if layer.kind is LayerKind.POINTWISE and layer.activation is PointwiseKind.RELU
        else layer
        for layer in teacher.layers
    )
    return replace(teacher, name=f"{teacher.name}-sq", layers=layers)


def backend_only(input_shape: Shape4, class_count: int) -> NetworkSpec:
    """A single dense layer on flattened pixels."""
    features = input_shape.c * input_shape.h * input_shape.w
    return NetworkSpec(
        name="backend-only",
        layers=(flatten(), dense("fc", features, class_count)),
        input_shape=input_shape,
        class_count=class_count,
    )


def mini_alexnet(
    input_shape: Shape4,
    class_count: int = 10,
    channels: Tuple[int, ...] = (16, 32, 64),
    kernels: Tuple[int, ...] = (5, 3, 3),
) -> NetworkSpec:
    """
    Blocks of [conv, relu, max-pool 2] followed by one dense layer.

    Blocks stop once the feature map is smaller than the next kernel, so small
    inputs (8x8) get a shallower frontend with the same first layers.
    """
    layers: List[LayerSpec] = []
    c, h, w = input_shape.c, input_shape.h, input_shape.w
    for i, (out_c, k) in enumerate(zip(channels, kernels), start=1):
        if k > min(h, w) or min(h, w) < 2:
            logger.info("mini-alexnet at %sx%s: stopping after %s blocks", h, w, i - 1)
            break
        layers += [
            conv(f"conv{i}", c, out_c, k),
            activation(f"relu{i}"),
            max_pool(f"pool{i}", 2),
        ]
        c, h, w = out_c, h // 2, w // 2
    if not layers:
        raise ShapeMismatchError(
            f"input {input_shape.h}x{input_shape.w} is smaller than the first kernel {kernels[0]}"
        )
    layers += [flatten(), dense("fc", c * h * w, class_count)]
    return NetworkSpec("mini-alexnet", tuple(layers), input_shape, class_count)


def tiny_cnn(input_shape: Shape4, class_count: int = 10) -> NetworkSpec:
    """One conv block; small enough for unit tests."""
    spec = mini_alexnet(input_shape, class_count, channels=(4,), kernels=(3,))
    return replace(spec, name="tiny")


SPEC_REGISTRY: Dict[str, Callable[[Shape4, int], NetworkSpec]] = {
    "mini-alexnet": mini_alexnet,
    "tiny": tiny_cnn,
}


def build_teacher(name: str, input_shape: Shape4, class_count: int) -> NetworkSpec:
    """Look up a teacher architecture by name."""
    try:
        factory = SPEC_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown teacher spec '{name}', expected one of {sorted(SPEC_REGISTRY)}"
        ) from None
    return factory(input_shape, class_count)
