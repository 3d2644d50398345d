"""Estimator-style front ends for the update rules.

Each optimizer is a scikit-learn style estimator: hyperparameters go to
``__init__`` verbatim, ``fit(problem, x0)`` runs the optimizer from ``x0``
against the problem's gradient oracle, and the results land in trailing
underscore attributes (``x_``, ``trace_``, ``diverged_``).  ``get_params`` /
``set_params`` / ``clone`` therefore work, which is what the grid harness
leans on to sweep (alpha, weight_decay) cells from one template.

A run that overflows is not an exception at this level: the fit stops at the
last finite iterate and flags ``diverged_``, because divergence is a result
we want to record and compare, not a crash.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import NonFiniteValue
from .schedules import make_schedule
from .trace import RunTrace
from .updates import (
    ADAM_STEP_FNS,
    AdamHyper,
    averaged_iterate,
    gd_step,
    init_adam_state,
    restarted_adagrad_rounds,
    run_adagrad,
)
from .vectors import as_vector

__all__ = [
    "AdamL2",
    "AdamW",
    "AdamProx",
    "AdamProxL2",
    "GradientDescent",
    "AdaGrad",
    "RestartedAdaGrad",
    "OPTIMIZERS",
]


def _probe_value(problem, x0):
    """Whether the problem serves loss values (some oracles are gradient-only)."""
    if not hasattr(problem, "value"):
        return False
    try:
        problem.value(x0)
    except NotImplementedError:
        return False
    return True


class _AdamFamily(BaseEstimator):
    """Shared fit loop; subclasses pick the update rule via ``_variant``."""

    _variant: str = ""

    def __init__(self, alpha=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8,
                 weight_decay=0.0, steps=500, schedule="constant", eta0=1.0,
                 record_iterates=False, record_updates=False):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.weight_decay = weight_decay
        self.steps = steps
        self.schedule = schedule
        self.eta0 = eta0
        self.record_iterates = record_iterates
        self.record_updates = record_updates

    def _hyper(self) -> AdamHyper:
        return AdamHyper(alpha=self.alpha, beta1=self.beta1, beta2=self.beta2,
                         epsilon=self.epsilon, lam=self.weight_decay)

    def fit(self, problem, x0, histogram=None, histogram_window=None):
        """Run ``steps`` updates from ``x0``.

        ``histogram``, if given, accumulates ``|delta x| / alpha`` for the
        steps inside the inclusive 1-based ``histogram_window`` (all steps
        when the window is None).
        """
        step_fn = ADAM_STEP_FNS[self._variant]
        hyper = self._hyper()
        sched = make_schedule(self.schedule, self.eta0, horizon=self.steps)
        x0 = as_vector(x0, "x0")
        state = init_adam_state(x0)
        minimizer = getattr(problem, "minimizer", None)
        has_vg = hasattr(problem, "value_and_gradient")
        has_value = has_vg or _probe_value(problem, x0)

        n = int(self.steps)
        eta_arr = np.empty(n)
        loss_arr = np.full(n, np.nan)
        err_arr = np.empty(n) if minimizer is not None else None
        iter_arr = np.empty((n, x0.shape[0])) if self.record_iterates else None
        upd_arr = np.empty((n, x0.shape[0])) if self.record_updates else None
        lo_win, hi_win = histogram_window if histogram_window else (1, n)

        diverged = False
        done = 0
        for t in range(1, n + 1):
            try:
                if has_vg:
                    loss, g = problem.value_and_gradient(state.x)
                elif has_value:
                    loss, g = problem.value(state.x), problem.gradient(state.x)
                else:
                    loss, g = np.nan, problem.gradient(state.x)
                eta = sched(t)
                new_state = step_fn(state, hyper, g, eta)
            except NonFiniteValue:
                diverged = True
                break
            i = t - 1
            eta_arr[i] = eta
            loss_arr[i] = loss
            if err_arr is not None:
                err_arr[i] = float(np.max(np.abs(new_state.x - minimizer)))
            if upd_arr is not None or histogram is not None:
                delta = np.abs(new_state.x - state.x)
                if upd_arr is not None:
                    upd_arr[i] = delta
                if histogram is not None and lo_win <= t <= hi_win:
                    histogram.add(delta / hyper.alpha)
            if iter_arr is not None:
                iter_arr[i] = new_state.x
            state = new_state
            done = t

        self.state_ = state
        self.x_ = state.x
        self.diverged_ = diverged
        self.n_steps_ = done
        self.trace_ = RunTrace(
            steps=np.arange(1, done + 1),
            eta=eta_arr[:done],
            loss=loss_arr[:done],
            err_inf=err_arr[:done] if err_arr is not None else None,
            iterates=iter_arr[:done] if iter_arr is not None else None,
            update_mags=upd_arr[:done] if upd_arr is not None else None,
            metadata={
                "optimizer": self._variant,
                "alpha": hyper.alpha,
                "weight_decay": hyper.lam,
                "epsilon": hyper.epsilon,
                "beta1": hyper.beta1,
                "beta2": hyper.beta2,
                "schedule": self.schedule,
                "eta0": self.eta0,
                "diverged": diverged,
            },
        )
        return self


class AdamL2(_AdamFamily):
    """Adam with the decay folded into the gradient before the moments."""

    _variant = "adam_l2"


class AdamW(_AdamFamily):
    """Adam with the decay applied directly to the iterate."""

    _variant = "adamw"


class AdamProx(_AdamFamily):
    """Adam with the exact divide-through shrink after the adaptive step."""

    _variant = "adamprox"


class AdamProxL2(_AdamFamily):
    """Adam with a euclidean-norm shrink after the adaptive step."""

    _variant = "adamproxl2"


class GradientDescent(BaseEstimator):
    """Fixed-step gradient descent, scheduled like the adaptive methods.

    The effective step at time t is ``step_size * eta_t``.  Overflow sets
    ``diverged_`` and keeps the trace up to the last finite iterate.
    """

    def __init__(self, step_size=1.0, steps=500, schedule="constant", eta0=1.0,
                 record_iterates=False):
        self.step_size = step_size
        self.steps = steps
        self.schedule = schedule
        self.eta0 = eta0
        self.record_iterates = record_iterates

    def fit(self, problem, x0):
        sched = make_schedule(self.schedule, self.eta0, horizon=self.steps)
        x = as_vector(x0, "x0")
        minimizer = getattr(problem, "minimizer", None)
        has_value = _probe_value(problem, x)

        n = int(self.steps)
        eta_arr = np.empty(n)
        loss_arr = np.full(n, np.nan)
        err_arr = np.empty(n) if minimizer is not None else None
        iter_arr = np.empty((n, x.shape[0])) if self.record_iterates else None

        diverged = False
        done = 0
        # overflow on a divergent run is an expected, recorded outcome
        with np.errstate(over="ignore", invalid="ignore"):
            for t in range(1, n + 1):
                try:
                    loss = problem.value(x) if has_value else np.nan
                    g = problem.gradient(x)
                    eta = sched(t)
                    x_new = gd_step(x, g, self.step_size * eta)
                except NonFiniteValue:
                    diverged = True
                    break
                i = t - 1
                eta_arr[i] = eta
                loss_arr[i] = loss
                if err_arr is not None:
                    err_arr[i] = float(np.max(np.abs(x_new - minimizer)))
                if iter_arr is not None:
                    iter_arr[i] = x_new
                x = x_new
                done = t

        self.x_ = x
        self.diverged_ = diverged
        self.n_steps_ = done
        self.trace_ = RunTrace(
            steps=np.arange(1, done + 1),
            eta=eta_arr[:done],
            loss=loss_arr[:done],
            err_inf=err_arr[:done] if err_arr is not None else None,
            iterates=iter_arr[:done] if iter_arr is not None else None,
            metadata={
                "optimizer": "gd",
                "step_size": self.step_size,
                "schedule": self.schedule,
                "eta0": self.eta0,
                "diverged": diverged,
            },
        )
        return self


class AdaGrad(BaseEstimator):
    """Per-coordinate adaptive steps over a hypercube domain.

    ``fit`` exposes both the averaged output (``x_``, the estimator's answer)
    and the last iterate (``final_iterate_``); ``record_`` keeps the
    per-step losses and squared gradient norms the regret checker consumes.
    """

    def __init__(self, eta=1.0, steps=500, box_radius=np.inf, box_center=None):
        self.eta = eta
        self.steps = steps
        self.box_radius = box_radius
        self.box_center = box_center

    def fit(self, problem, x0):
        state, record = run_adagrad(
            problem, x0, int(self.steps), self.eta,
            box_center=self.box_center, box_radius=self.box_radius,
        )
        self.state_ = state
        self.x_ = averaged_iterate(state)
        self.final_iterate_ = state.x
        self.record_ = record
        self.n_steps_ = state.t
        minimizer = getattr(problem, "minimizer", None)
        err = None
        if minimizer is not None:
            err = np.max(np.abs(record["iterates"] - minimizer), axis=1)
        self.trace_ = RunTrace(
            steps=np.arange(1, state.t + 1),
            eta=np.full(state.t, float(self.eta)),
            loss=record["loss"],
            err_inf=err,
            iterates=record["iterates"],
            metadata={"optimizer": "adagrad", "eta": float(self.eta),
                      "box_radius": float(self.box_radius)},
        )
        return self


class RestartedAdaGrad(BaseEstimator):
    """Restarted variant: halve the box and the step constant every round."""

    def __init__(self, d_inf=1.0, mu=1.0, m_smooth=1.0, rounds=5):
        self.d_inf = d_inf
        self.mu = mu
        self.m_smooth = m_smooth
        self.rounds = rounds

    def fit(self, problem, x0):
        averages = restarted_adagrad_rounds(
            problem, x0, self.d_inf, self.mu, self.m_smooth, self.rounds)
        self.round_averages_ = averages
        self.x_ = averages[-1]
        self.n_rounds_ = len(averages)
        return self


OPTIMIZERS = {
    "adam_l2": AdamL2,
    "adamw": AdamW,
    "adamprox": AdamProx,
    "adamproxl2": AdamProxL2,
    "gd": GradientDescent,
    "adagrad": AdaGrad,
    "restarted_adagrad": RestartedAdaGrad,
}
