from .checkpoint import CheckpointError, load_arrays, save_arrays
from .optim import (
    NondeterminismError,
    clip_global_norm,
    global_norm,
    gradient_check,
    make_rng,
    xavier_uniform_init,
)
from .tensor import (
    DTYPE,
    Parameter,
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    add,
    as_tensor,
    backward,
    concat,
    dropout,
    embedding_lookup,
    log,
    lstm,
    matmul,
    mul,
    pick,
    reshape,
    scatter_add,
    sigmoid,
    softmax,
    sub,
    take,
    tanh,
    total,
    transpose,
)

__all__ = [
    "CheckpointError",
    "DTYPE",
    "NondeterminismError",
    "Parameter",
    "ShapeError",
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "as_tensor",
    "backward",
    "clip_global_norm",
    "concat",
    "dropout",
    "embedding_lookup",
    "global_norm",
    "gradient_check",
    "load_arrays",
    "log",
    "lstm",
    "make_rng",
    "matmul",
    "mul",
    "pick",
    "reshape",
    "save_arrays",
    "scatter_add",
    "sigmoid",
    "softmax",
    "sub",
    "take",
    "tanh",
    "total",
    "transpose",
    "xavier_uniform_init",
]
