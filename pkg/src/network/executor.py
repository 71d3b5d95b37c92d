"""End-to-end forward and backward execution of a NetworkSpec."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

import numpy as np

from src.errors import NonFiniteError, ShapeMismatchError, StateError
from src.layers import (
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
from src.tensor import (
    ComplexTensor4,
    RealTensor4,
    fft2,
    fft2_array,
    ifft2,
    ifft2_array,
    real_part,
)

from .params import ParamGrads, ParamStore
from .specs import LayerKind, LayerSpec, NetworkSpec, infer_shapes

logger = logging.getLogger(__name__)


@dataclass
class Tape:
    """Per-layer values cached by a forward pass for the backward pass."""

    spec_name: str
    entries: List[Any] = field(default_factory=list)


def build_runtime(net: NetworkSpec, params: ParamStore) -> List[Optional[SpectralConvLayer]]:
    """Spectral-conv layer objects (with cached kernel spectra) per layer index."""
    shapes = infer_shapes(net)
    runtime: List[Optional[SpectralConvLayer]] = []
    for layer, before in zip(net.layers, shapes[:-1]):
        if layer.kind is LayerKind.SPECTRAL_CONV:
            runtime.append(
                SpectralConvLayer(
                    kernels=RealTensor4(params.params[layer.name]["kernels"]),
                    input_hw=before.dims[1:],
                )
            )
        else:
            runtime.append(None)
    return runtime


def _forward_layer(layer: LayerSpec, rt, params: ParamStore, value):
    """Returns (output, tape entry)."""
    kind = layer.kind
    if kind is LayerKind.SPATIAL_CONV:
        kernels = RealTensor4(params.params[layer.name]["kernels"])
        return spatial_conv_forward(kernels, value, layer.conv_mode), value
    if kind is LayerKind.SPECTRAL_CONV:
        return spectral_conv_forward(rt, value), value
    if kind is LayerKind.MAX_POOL:
        return max_pool_forward(value, layer.pool, layer.stride)
    if kind is LayerKind.SPECTRAL_POOL:
        shape = value.shape
        out = spectral_pool_forward(SpectralPoolLayer(layer.out_hw), value, layer.domain)
        return out, (shape.h, shape.w)
    if kind is LayerKind.POINTWISE:
        return pointwise(layer.activation, value), value
    if kind is LayerKind.TO_SPECTRAL:
        return fft2(value), None
    if kind is LayerKind.TO_SPATIAL:
        return real_part(ifft2(value)), None
    if kind is LayerKind.FLATTEN:
        return value.data.reshape(value.data.shape[0], -1), value.data.shape
    entry = params.params[layer.name]
    out = dense_forward(entry["weight"], entry["bias"], value)
    if not np.isfinite(out).all():
        raise NonFiniteError("non-finite dense output")
    return out, value


def _run(
    net: NetworkSpec,
    params: ParamStore,
    batch: RealTensor4,
    record_tape: bool,
    runtime=None,
    stop_before: Optional[LayerKind] = None,
) -> Tuple[Any, Optional[Tape]]:
    inp = net.input_shape
    shape = batch.shape
    if (shape.c, shape.h, shape.w) != (inp.c, inp.h, inp.w):
        raise ShapeMismatchError(
            f"{net.name} expects inputs (*, {inp.c}, {inp.h}, {inp.w}), "
            f"got {shape.as_tuple()}"
        )
    runtime = runtime if runtime is not None else build_runtime(net, params)
    tape = Tape(spec_name=net.name) if record_tape else None
    value: Any = batch
    for layer, rt in zip(net.layers, runtime):
        if stop_before is not None and layer.kind is stop_before:
            break
        try:
            value, entry = _forward_layer(layer, rt, params, value)
        except NonFiniteError as exc:
            raise NonFiniteError(
                f"non-finite activation in layer '{layer.name}' ({layer.kind.value}): {exc}"
            ) from exc
        if tape is not None:
            tape.entries.append((entry, rt))
    return value, tape


def forward(
    net: NetworkSpec,
    params: ParamStore,
    batch: RealTensor4,
    record_tape: bool = False,
    runtime=None,
) -> Tuple[np.ndarray, Optional[Tape]]:
    """
    Run a batch through the network.

    Args:
        net: Network spec
        params: Parameters for every learnable layer
        batch: (S, C, H, W) inputs
        record_tape: Keep every activation needed by backward
        runtime: Prebuilt spectral layers from build_runtime (optional)

    Returns:
        (logits of shape (S, class_count), tape or None)
    """
    return _run(net, params, batch, record_tape, runtime)


def forward_features(net: NetworkSpec, params: ParamStore, batch: RealTensor4) -> np.ndarray:
    """Flattened features handed to the first dense layer."""
    value, _ = _run(net, params, batch, False, stop_before=LayerKind.DENSE)
    if not isinstance(value, np.ndarray):
        raise ShapeMismatchError(f"{net.name} has no flatten before its dense backend")
    return value


def backward(
    net: NetworkSpec, params: ParamStore, tape: Optional[Tape], logit_grad: np.ndarray
) -> ParamGrads:
    """
    Chain layer backward passes in reverse order.

    Args:
        net: Network spec used for the forward pass
        params: Same parameters as the forward pass
        tape: Tape recorded by forward(record_tape=True)
        logit_grad: dLoss/dlogits, shape (S, class_count)

    Returns:
        Gradients keyed like ParamStore.params
    """
    if tape is None or tape.spec_name != net.name or len(tape.entries) != len(net.layers):
        raise StateError(f"backward for {net.name} needs the tape of a full forward pass")

    first_learnable = next(
        (i for i, layer in enumerate(net.layers) if layer.learnable), len(net.layers)
    )
    grads: ParamGrads = {}
    g: Any = np.asarray(logit_grad, dtype=np.float64)

    for index in range(len(net.layers) - 1, first_learnable - 1, -1):
        layer = net.layers[index]
        entry, rt = tape.entries[index]
        kind = layer.kind
        if kind is LayerKind.DENSE:
            bundle = dense_backward(params.params[layer.name]["weight"], entry, g)
            grads[layer.name] = bundle.param_grads
            g = bundle.input_grad
        elif kind is LayerKind.FLATTEN:
            g = RealTensor4(g.reshape(entry))
        elif kind is LayerKind.TO_SPATIAL:
            h, w = g.shape.h, g.shape.w
            g = ComplexTensor4(fft2_array(g.data) / (h * w))
        elif kind is LayerKind.TO_SPECTRAL:
            h, w = g.shape.h, g.shape.w
            g = RealTensor4(np.ascontiguousarray((h * w) * ifft2_array(g.data).real))
        elif kind is LayerKind.POINTWISE:
            g = pointwise_grad(layer.activation, entry, g)
        elif kind is LayerKind.SPECTRAL_POOL:
            g = spectral_pool_backward(SpectralPoolLayer(layer.out_hw), g, entry, layer.domain)
        elif kind is LayerKind.MAX_POOL:
            g = max_pool_backward(entry, g)
        elif kind is LayerKind.SPECTRAL_CONV:
            bundle = spectral_conv_backward(rt, entry, g)
            grads[layer.name] = {"kernels": bundle.param_grads["kernels"].data}
            g = bundle.input_grad
        else:
            kernels = RealTensor4(params.params[layer.name]["kernels"])
            bundle = spatial_conv_backward(kernels, entry, g, layer.conv_mode)
            grads[layer.name] = {"kernels": bundle.param_grads["kernels"].data}
            g = bundle.input_grad
    return grads
