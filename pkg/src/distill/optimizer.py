"""SGD with momentum and weight decay."""

from __future__ import annotations

from src.errors import ShapeMismatchError
from src.network import ParamGrads, ParamStore

from .config import TrainConfig


def sgd_step(params: ParamStore, grads: ParamGrads, cfg: TrainConfig) -> ParamStore:
    """
    One update; the input store is left untouched.

    v <- momentum * v + grad + weight_decay * param
    param <- param - lr * v

    Layers absent from grads (e.g. frozen ones) are copied unchanged.
    """
    out = params.copy()
    for layer, layer_grads in grads.items():
        if layer not in out.params:
            raise ShapeMismatchError(f"gradient for unknown layer '{layer}'")
        for key, grad in layer_grads.items():
            param = out.params[layer][key]
            if grad.shape != param.shape:
                raise ShapeMismatchError(
                    f"'{layer}.{key}': gradient {grad.shape} vs parameter {param.shape}"
                )
            velocity = cfg.momentum * out.momentum[layer][key] + grad + cfg.weight_decay * param
            out.momentum[layer][key] = velocity
            out.params[layer][key] = param - cfg.lr * velocity
    return out
