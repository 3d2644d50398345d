"""Single-step update rules: the Adam family, plain gradient descent, and
per-coordinate adaptive steps with restarts.

The four Adam variants share one moment pipeline (exponential averages with
bias correction, epsilon added outside the square root) and differ only in
how the decay coefficient ``lam`` couples to the iterate:

* ``adam_l2_step``     adds ``lam * x`` to the gradient before the moments,
                       so the decay is filtered through the adaptive scaling;
* ``adamw_step``       shrinks the iterate by ``1 - lam * eta_t`` next to the
                       adaptive step, leaving the moments untouched;
* ``adamprox_step``    divides the stepped point by ``1 + lam * eta_t``
                       (the implicit form of the same shrink);
* ``adamproxl2_step``  pulls the stepped point toward the origin by at most
                       ``lam * eta_t`` in euclidean norm (shrink on the whole
                       vector rather than per coordinate).

At ``lam = 0`` all four reduce to the identical update, and the tests pin
that coincidence exactly.  Steps are pure: they return a fresh state and
never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import InvalidConstants, NonFiniteValue
from .vectors import as_vector

__all__ = [
    "AdamHyper",
    "AdamState",
    "init_adam_state",
    "adam_l2_step",
    "adamw_step",
    "adamprox_step",
    "adamproxl2_step",
    "gd_step",
    "project_hypercube",
    "AdaGradState",
    "init_adagrad_state",
    "adagrad_step",
    "averaged_iterate",
    "run_adagrad",
    "restart_round_settings",
    "restarted_adagrad",
    "restarted_adagrad_rounds",
    "ADAM_STEP_FNS",
]


@dataclass(frozen=True)
class AdamHyper:
    """Hyperparameters shared by the Adam variants.

    ``lam`` is the decay coefficient (the reserved word rules out the greek
    spelling).  ``epsilon`` is added to the root of the second moment, not
    under it; ``epsilon = 0`` is allowed and is the scale-free setting.
    """

    alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    lam: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not (0.0 <= b < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        if not (self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (self.lam >= 0.0):
            raise ValueError(f"lam must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class AdamState:
    """Iterate plus first/second moment accumulators after ``t`` steps."""

    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int


def init_adam_state(x0) -> AdamState:
    x0 = as_vector(x0, "x0")
    return AdamState(x=x0.copy(), m=np.zeros_like(x0), v=np.zeros_like(x0), t=0)


def _moments(state: AdamState, hyper: AdamHyper, g: np.ndarray):
    """Advance the exponential moment averages and bias-correct them."""
    t = state.t + 1
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
    v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * (g * g)
    m_hat = m / (1.0 - hyper.beta1**t)
    v_hat = v / (1.0 - hyper.beta2**t)
    return t, m, v, m_hat, v_hat


def _direction(m_hat: np.ndarray, v_hat: np.ndarray, epsilon: float) -> np.ndarray:
    """m_hat / (sqrt(v_hat) + epsilon), with 0/0 resolved to 0.

    The denominator vanishes only when epsilon = 0 and no gradient mass has
    arrived at that coordinate, in which case m_hat vanishes too and the
    coordinate should simply not move.
    """
    den = np.sqrt(v_hat) + epsilon
    out = np.zeros_like(m_hat)
    np.divide(m_hat, den, out=out, where=den > 0.0)
    return out


def _check_grad(state: AdamState, grad) -> np.ndarray:
    g = as_vector(grad, "grad")
    if g.shape != state.x.shape:
        raise ValueError(f"grad has length {g.shape[0]}, state has {state.x.shape[0]}")
    return g


def adam_l2_step(state: AdamState, hyper: AdamHyper, grad, eta_t: float) -> AdamState:
    """Adam on the decay-augmented gradient ``grad + lam * x``."""
    g = _check_grad(state, grad) + hyper.lam * state.x
    t, m, v, m_hat, v_hat = _moments(state, hyper, g)
    x = state.x - eta_t * hyper.alpha * _direction(m_hat, v_hat, hyper.epsilon)
    return AdamState(x=x, m=m, v=v, t=t)


def adamw_step(state: AdamState, hyper: AdamHyper, grad, eta_t: float) -> AdamState:
    """Adam step with the decay applied directly to the iterate."""
    g = _check_grad(state, grad)
    t, m, v, m_hat, v_hat = _moments(state, hyper, g)
    shrink = 1.0 - hyper.lam * eta_t
    x = shrink * state.x - eta_t * hyper.alpha * _direction(m_hat, v_hat, hyper.epsilon)
    return AdamState(x=x, m=m, v=v, t=t)


def adamprox_step(state: AdamState, hyper: AdamHyper, grad, eta_t: float) -> AdamState:
    """Adam step followed by the exact shrink ``u / (1 + lam * eta_t)``.

    First-order in ``eta_t`` this is the same update as :func:`adamw_step`;
    the exact per-coordinate gap between the two, for equal incoming state
    and gradient, is ``lam * eta^2 * |lam * x + p| / (1 + lam * eta)`` where
    ``p`` is the adaptive direction times alpha.
    """
    g = _check_grad(state, grad)
    t, m, v, m_hat, v_hat = _moments(state, hyper, g)
    u = state.x - eta_t * hyper.alpha * _direction(m_hat, v_hat, hyper.epsilon)
    x = u / (1.0 + hyper.lam * eta_t)
    return AdamState(x=x, m=m, v=v, t=t)


def adamproxl2_step(state: AdamState, hyper: AdamHyper, grad, eta_t: float) -> AdamState:
    """Adam step followed by a euclidean-norm shrink toward the origin.

    The stepped point ``u`` is rescaled by ``max(1 - lam * eta_t / ||u||, 0)``;
    a zero ``u`` maps to zero.  Unlike the per-coordinate variants this one
    couples all coordinates through ``||u||``.
    """
    g = _check_grad(state, grad)
    t, m, v, m_hat, v_hat = _moments(state, hyper, g)
    u = state.x - eta_t * hyper.alpha * _direction(m_hat, v_hat, hyper.epsilon)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        x = np.zeros_like(u)
    else:
        x = max(1.0 - hyper.lam * eta_t / norm, 0.0) * u
    return AdamState(x=x, m=m, v=v, t=t)


ADAM_STEP_FNS = {
    "adam_l2": adam_l2_step,
    "adamw": adamw_step,
    "adamprox": adamprox_step,
    "adamproxl2": adamproxl2_step,
}


def iterate_adam(step_fn, hyper: AdamHyper, schedule, gradient_fn, x0, n_steps: int):
    """Yield the state after each of ``n_steps`` steps.

    ``gradient_fn`` maps the current iterate to a gradient; lockstep
    comparisons zip two of these generators and never retain trajectories.
    """
    state = init_adam_state(x0)
    for t in range(1, int(n_steps) + 1):
        g = gradient_fn(state.x)
        state = step_fn(state, hyper, g, schedule(t))
        yield state


def gd_step(x, grad, step_size: float) -> np.ndarray:
    """Plain gradient descent step; overflow raises :class:`NonFiniteValue`."""
    x = as_vector(x, "x")
    g = as_vector(grad, "grad")
    out = x - step_size * g
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("gradient step produced a non-finite iterate")
    return out


def project_hypercube(x, center, radius: float) -> np.ndarray:
    """Clamp each coordinate into ``[center_i - radius, center_i + radius]``.

    With ``radius = inf`` this is the identity; the projection is idempotent.
    """
    if not (radius >= 0.0):
        raise ValueError(f"radius must be >= 0, got {radius}")
    x = as_vector(x, "x")
    center = np.broadcast_to(np.asarray(center, dtype=np.float64), x.shape)
    return np.clip(x, center - radius, center + radius)


@dataclass(frozen=True)
class AdaGradState:
    """Per-coordinate adaptive-step state over a hypercube domain.

    ``x`` is the current iterate, ``sumsq`` the running sum of squared
    gradients, ``x_sum`` the running sum of the iterates at which gradients
    were evaluated (the averaged output divides it by ``t``).
    """

    x: np.ndarray
    sumsq: np.ndarray
    x_sum: np.ndarray
    t: int
    eta: float
    box_center: np.ndarray
    box_radius: float


def init_adagrad_state(x0, eta: float, box_center=None, box_radius: float = np.inf) -> AdaGradState:
    x0 = as_vector(x0, "x0")
    if not (eta > 0.0):
        raise ValueError(f"eta must be positive, got {eta}")
    if box_center is None:
        center = np.zeros_like(x0)
    else:
        center = as_vector(box_center, "box_center")
        if center.shape != x0.shape:
            raise ValueError("box_center length differs from x0")
    return AdaGradState(
        x=x0.copy(),
        sumsq=np.zeros_like(x0),
        x_sum=np.zeros_like(x0),
        t=0,
        eta=float(eta),
        box_center=center,
        box_radius=float(box_radius),
    )


def adagrad_step(state: AdaGradState, grad) -> AdaGradState:
    """One projected adaptive step.

    The step size for coordinate i is ``eta / sqrt(sumsq_i)`` including the
    incoming gradient, with 0/0 resolved to 0 (a coordinate that has never
    seen gradient mass stays put).  The pre-step iterate enters ``x_sum``:
    the averaged output is over the points where gradients were taken.
    """
    g = as_vector(grad, "grad")
    if g.shape != state.x.shape:
        raise ValueError(f"grad has length {g.shape[0]}, state has {state.x.shape[0]}")
    sumsq = state.sumsq + g * g
    step = np.zeros_like(g)
    np.divide(state.eta, np.sqrt(sumsq), out=step, where=sumsq > 0.0)
    x = project_hypercube(state.x - step * g, state.box_center, state.box_radius)
    return replace(state, x=x, sumsq=sumsq, x_sum=state.x_sum + state.x, t=state.t + 1)


def averaged_iterate(state: AdaGradState) -> np.ndarray:
    """Mean of the iterates the gradients were evaluated at."""
    if state.t == 0:
        raise ValueError("no steps taken yet")
    return state.x_sum / state.t


def run_adagrad(problem, x0, steps: int, eta: float, box_center=None,
                box_radius: float = np.inf):
    """Run the adaptive method for ``steps`` steps; return (final state, record).

    The record keeps the per-step objective values and squared gradient
    norms needed by the regret check, plus the iterates themselves.
    """
    state = init_adagrad_state(x0, eta, box_center, box_radius)
    losses = np.empty(steps)
    grad_sq = np.empty(steps)
    iterates = np.empty((steps, state.x.shape[0]))
    for i in range(steps):
        iterates[i] = state.x
        losses[i] = problem.value(state.x)
        g = problem.gradient(state.x)
        grad_sq[i] = float(np.dot(g, g))
        state = adagrad_step(state, g)
    return state, {"loss": losses, "grad_sq": grad_sq, "iterates": iterates}


def _check_restart_constants(d_inf: float, mu: float, m_smooth: float, rounds: int):
    if not (d_inf > 0.0):
        raise InvalidConstants(f"d_inf must be positive, got {d_inf}")
    if not (mu > 0.0):
        raise InvalidConstants(f"mu must be positive, got {mu}")
    if not (m_smooth >= mu):
        raise InvalidConstants(f"m_smooth must be >= mu, got {m_smooth} < {mu}")
    if int(rounds) < 1:
        raise InvalidConstants(f"rounds must be >= 1, got {rounds}")


def restart_round_settings(d_inf: float, round_index: int) -> tuple[float, float]:
    """(box radius, inner step constant) for 1-based round ``round_index``.

    Both halve every round: radius ``d_inf / 2**(i-1)`` and step constant
    ``(d_inf / sqrt(2)) / 2**(i-1)``.
    """
    if int(round_index) < 1:
        raise InvalidConstants(f"round_index must be >= 1, got {round_index}")
    scale = 2.0 ** (int(round_index) - 1)
    return d_inf / scale, (d_inf / math.sqrt(2.0)) / scale


def restarted_adagrad_rounds(problem, x0, d_inf: float, mu: float, m_smooth: float,
                             rounds: int) -> list[np.ndarray]:
    """Run the restarted scheme and return the averaged iterate of every round.

    Round i (1-based) re-centers the hypercube on the previous round's
    average, sizes it by :func:`restart_round_settings`, and runs
    ``ceil(32 * d * m_smooth / mu)`` inner steps from that center with fresh
    gradient accumulators.
    """
    _check_restart_constants(d_inf, mu, m_smooth, rounds)
    x0 = as_vector(x0, "x0")
    d = x0.shape[0]
    inner_steps = math.ceil(32.0 * d * m_smooth / mu)
    center = x0.copy()
    averages = []
    for i in range(1, int(rounds) + 1):
        radius, eta = restart_round_settings(d_inf, i)
        state = init_adagrad_state(center, eta, box_center=center, box_radius=radius)
        for _ in range(inner_steps):
            state = adagrad_step(state, problem.gradient(state.x))
        center = averaged_iterate(state)
        averages.append(center)
    return averages


def restarted_adagrad(problem, x0, d_inf: float, mu: float, m_smooth: float,
                      rounds: int) -> np.ndarray:
    """Final averaged iterate of :func:`restarted_adagrad_rounds`."""
    return restarted_adagrad_rounds(problem, x0, d_inf, mu, m_smooth, rounds)[-1]
