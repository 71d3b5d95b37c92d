"""Network module - specs, the linear-counterpart transform, execution and persistence."""

from .executor import Tape, backward, build_runtime, forward, forward_features
from .params import (
    ParamGrads,
    ParamStore,
    copy_backend,
    init_params,
    load_params,
    param_shapes,
    save_params,
)
from .specs import (
    SPEC_REGISTRY,
    LayerKind,
    LayerShape,
    LayerSpec,
    NetworkSpec,
    activation,
    backend_only,
    build_teacher,
    conv,
    dense,
    flatten,
    infer_shapes,
    linear_counterpart,
    max_pool,
    mini_alexnet,
    square_variant,
    tiny_cnn,
)

__all__ = [
    "SPEC_REGISTRY",
    "LayerKind",
    "LayerShape",
    "LayerSpec",
    "NetworkSpec",
    "ParamGrads",
    "ParamStore",
    "Tape",
    "activation",
    "backend_only",
    "backward",
    "build_runtime",
    "build_teacher",
    "conv",
    "copy_backend",
    "dense",
    "flatten",
    "forward",
    "forward_features",
    "infer_shapes",
    "init_params",
    "linear_counterpart",
    "load_params",
    "max_pool",
    "mini_alexnet",
    "param_shapes",
    "save_params",
    "square_variant",
    "tiny_cnn",
]
