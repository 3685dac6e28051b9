"""Initialization, gradient checking and gradient clipping helpers."""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .tensor import DTYPE, Parameter, Tape, Tensor, backward


class NondeterminismError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """The project-wide generator: numpy's PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def xavier_uniform_init(shape, seed: int | np.random.Generator,
                        limit: float = 0.1) -> np.ndarray:
    """Uniform draws on the open interval (-limit, limit).

    No fan-in scaling is applied; the range is fixed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    low = np.nextafter(-limit, 0.0)
    return rng.uniform(low, limit, size=shape).astype(DTYPE)


def global_norm(params: Iterable[Parameter]) -> float:
    return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params)))


def clip_global_norm(params: Sequence[Parameter], max_norm: float) -> float:
    """Rescale all grads so their joint L2 norm is at most ``max_norm``.

    Returns the factor that was applied (1.0 when no clipping happened).
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(params)
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for p in params:
        p.grad *= factor
    return factor


def gradient_check(f: Callable[[], Tensor], params: Sequence[Parameter],
                   eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` builds the scalar loss from the current parameter values. The error
    per entry is ``|a - n| / max(1, |a|, |n|)``.
    """
    first = float(f().data)
    second = float(f().data)
    if first != second:
        raise NondeterminismError(
            f"loss differs between identical evaluations ({first!r} vs {second!r}); "
            "disable dropout before checking gradients")

    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    backward(loss, tape)

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        analytic = p.grad.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = float(f().data)
            flat[k] = orig - eps
            down = float(f().data)
            flat[k] = orig
            numeric = (up - down) / (2.0 * eps)
            a = analytic[k]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst
