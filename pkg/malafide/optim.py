"""Adam, shared by countermeasure training and Malafide filter optimisation."""

from dataclasses import dataclass, field

import numpy as np

from malafide.errors import NumericalError, ValidationError


@dataclass
class AdamState:
    """
    Moment estimates for one parameter vector.

    Args:
        first_moment (np.ndarray): Running mean of gradients.
        second_moment (np.ndarray): Running mean of squared gradients.
        step_count (int): Number of updates applied so far.
    """

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)

    def __post_init__(self):
        if self.first_moment.shape != self.second_moment.shape:
            raise ValidationError("Adam moments must have the same shape")
        if self.step_count < 0:
            raise ValidationError("Adam step_count must be >= 0")


def adam_update(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    weight_decay: float = 0.0,
) -> tuple[np.ndarray, AdamState]:
    """
    One bias-corrected Adam descent step.

    Weight decay enters as an L2 term added to the gradient.

    Args:
        param (np.ndarray): Current parameters.
        grad (np.ndarray): Gradient of the loss being minimised.
        state (AdamState): Moments before the step.
        learning_rate (float): Step size.
        beta1 (float, optional): First-moment decay. Defaults to 0.9.
        beta2 (float, optional): Second-moment decay. Defaults to 0.999.
        epsilon (float, optional): Denominator floor. Defaults to 1e-8.
        weight_decay (float, optional): L2 coefficient. Defaults to 0.0.

    Returns:
        tuple[np.ndarray, AdamState]: Updated parameters and moments (inputs are not modified).
    """
    if grad.shape != param.shape:
        raise ValidationError(f"gradient shape {grad.shape} != parameter shape {param.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient passed to Adam")

    g = grad + weight_decay * param
    t = state.step_count + 1
    m = beta1 * state.first_moment + (1.0 - beta1) * g
    v = beta2 * state.second_moment + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_param = param - learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
    return new_param, AdamState(m, v, t)


@dataclass
class Adam:
    """
    Adam over a list of parameter arrays, minimising.

    Args:
        learning_rate (float): Step size.
        beta1 (float, optional): Defaults to 0.9.
        beta2 (float, optional): Defaults to 0.999.
        epsilon (float, optional): Defaults to 1e-8.
        weight_decay (float, optional): Defaults to 0.0.
    """

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    states: list[AdamState] = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        if not self.states:
            self.states = [AdamState.zeros(p.size) for p in params]
        updated = []
        for i, (param, grad) in enumerate(zip(params, grads)):
            new_param, self.states[i] = adam_update(
                param.reshape(-1),
                grad.reshape(-1),
                self.states[i],
                self.learning_rate,
                self.beta1,
                self.beta2,
                self.epsilon,
                self.weight_decay,
            )
            updated.append(new_param.reshape(param.shape))
        return updated
