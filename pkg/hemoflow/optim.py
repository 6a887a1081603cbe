from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFiniteError

__all__ = ["AdamState", "adam_step"]


@dataclass(frozen=True, eq=False)
class AdamState:
    """Moment estimates and hyper-parameters of the Adam optimizer

    `m` and `v` are lists of arrays shaped like the optimized parameters;
    `step` counts the updates taken so far.
    """

    m: list
    v: list
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    labels: tuple = field(default=())

    @classmethod
    def zeros_like(cls, params, labels=(), **hyper):
        """Return a fresh state for parameters shaped like `params`"""
        return cls(
            [np.zeros_like(p, dtype=float) for p in params],
            [np.zeros_like(p, dtype=float) for p in params],
            labels=tuple(labels),
            **hyper,
        )

    def hyper_parameters(self):
        """Return the hyper-parameters as a dictionary"""
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }


def adam_step(params, grads, state):
    """Return the parameters and state after one bias-corrected Adam update

    Raises `ValueError` if the shapes of `params`, `grads` and the state
    disagree, and `NonFiniteError` (naming the parameter group) if a gradient
    is not finite; the step is then rejected and nothing is updated.
    """
    if not (len(params) == len(grads) == len(state.m)):
        raise ValueError(f"expected {len(state.m)} parameter groups, got {len(params)} and {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g) or np.shape(p) != state.m[i].shape:
            raise ValueError(f"shape mismatch in parameter group {i}")
        if not np.all(np.isfinite(g)):
            label = state.labels[i] if i < len(state.labels) else str(i)
            raise NonFiniteError(f"non-finite gradient for {label}", label=label)

    b1, b2 = state.beta1, state.beta2
    k = state.step + 1
    correction1 = 1.0 - b1 ** k
    correction2 = 1.0 - b2 ** k
    result, ms, vs = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        update = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        result.append(p - update)
        ms.append(m)
        vs.append(v)
    return result, replace(state, m=ms, v=vs, step=k)
