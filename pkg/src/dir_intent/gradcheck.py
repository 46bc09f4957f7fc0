"""Central finite-difference checks for analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor as tn
from .tensor import Tensor


def relative_error(analytic, numeric, floor: float = 1e-6) -> np.ndarray:
    a, n = np.asarray(analytic, dtype=float), np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def check_gradients(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], step: float = 1e-5,
                    max_entries: int | None = 25, rng: np.random.Generator | None = None,
                    floor: float = 1e-6) -> float:
    """Largest relative error between backprop and central differences.

    ``loss_fn`` rebuilds the graph from the current parameter values. When
    ``max_entries`` is set, that many entries per parameter are sampled.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    analytic = tn.grads_for(loss_fn(), params)
    worst = 0.0
    for p, g in zip(params, analytic):
        if not p.data.flags.c_contiguous:
            p.data = np.ascontiguousarray(p.data)
        flat = p.data.reshape(-1)
        picks = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            picks = np.sort(rng.choice(flat.size, max_entries, replace=False))
        for i in picks:
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn().item()
            flat[i] = orig - step
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            worst = max(worst, float(relative_error(g.reshape(-1)[i], numeric, floor)))
    return worst
