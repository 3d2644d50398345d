"""Structural invariants tying the four adaptive update rules together."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from sfopt.problems import LossScaler, Quadratic, RescaledOracle
from sfopt.schedules import ConstantSchedule
from sfopt.diagnostics import scalefree_equivalence
from sfopt.updates import (
    ADAM_STEP_FNS,
    AdamHyper,
    AdamState,
    adamprox_step,
    adamw_step,
    init_adam_state,
    iterate_adam,
)
from sfopt.vectors import rng_stream


def _toy_quadratic():
    q = Quadratic((1.5, 0.8), (0.3, -0.7))
    x0 = np.array([0.5, -1.0])
    return q, x0


# ---------------------------------------------------------------------------
# the rules coincide without decay
# ---------------------------------------------------------------------------

def test_all_rules_identical_without_decay():
    # at lam = 0 the shrink factors are exactly 1 in every variant, so the
    # four trajectories must agree bit for bit
    q, x0 = _toy_quadratic()
    hyper = AdamHyper(alpha=0.05)
    sched = ConstantSchedule(1.0)
    runs = [iterate_adam(fn, hyper, sched, q.gradient, x0, 50)
            for fn in ADAM_STEP_FNS.values()]
    for states in zip(*runs):
        ref = states[0]
        for other in states[1:]:
            assert_array_equal(other.x, ref.x)
            assert_array_equal(other.m, ref.m)
            assert_array_equal(other.v, ref.v)


# ---------------------------------------------------------------------------
# gradient-rescaling invariance
# ---------------------------------------------------------------------------

def test_pow2_rescaling_is_bit_exact_without_epsilon():
    # powers of two only shift float exponents, so with the epsilon floor
    # removed the rescaled run reproduces the base run exactly, not merely
    # to rounding
    q, x0 = _toy_quadratic()
    rescaled = RescaledOracle(q, (0.25, 4.0))
    for kind in ("adamw", "adamprox"):
        hyper = AdamHyper(alpha=0.01, epsilon=0.0, lam=1e-3)
        report = scalefree_equivalence(kind, hyper, ConstantSchedule(1.0),
                                       q, rescaled, x0, 100)
        assert report.max_rel_dev == 0.0
        assert report.passed


def test_generic_rescaling_within_rounding():
    # [DERIVED] a non-pow2 scale still cancels analytically; only float
    # rounding separates the runs
    q, x0 = _toy_quadratic()
    rescaled = RescaledOracle(q, (10.0, 0.01))
    hyper = AdamHyper(alpha=0.01, epsilon=0.0, lam=1e-3)
    report = scalefree_equivalence("adamw", hyper, ConstantSchedule(1.0),
                                   q, rescaled, x0, 200)
    assert report.max_rel_dev <= 1e-12


def test_loss_rescaling_matches_gradient_rescaling():
    # multiplying the loss by a constant is the uniform-scale special case
    q, x0 = _toy_quadratic()
    hyper = AdamHyper(alpha=0.01, epsilon=0.0, lam=1e-3)
    report = scalefree_equivalence("adamw", hyper, ConstantSchedule(1.0),
                                   q, LossScaler(q, 8.0), x0, 100)
    assert report.max_rel_dev == 0.0
    report = scalefree_equivalence("adamprox", hyper, ConstantSchedule(1.0),
                                   q, LossScaler(q, 10.0), x0, 100)
    assert report.max_rel_dev <= 1e-12


def test_coupled_decay_breaks_invariance():
    # folding lam * x into the moments mixes an unscaled term into a scaled
    # gradient, so the cancellation fails by construction
    q, x0 = _toy_quadratic()
    rescaled = RescaledOracle(q, (10.0, 0.01))
    hyper = AdamHyper(alpha=0.01, epsilon=0.0, lam=1e-3)
    report = scalefree_equivalence("adam_l2", hyper, ConstantSchedule(1.0),
                                   q, rescaled, x0, 200)
    assert report.max_rel_dev > 1e-3
    assert not report.passed


def test_epsilon_floor_breaks_invariance():
    # with epsilon back in the denominator the scale no longer cancels
    q, x0 = _toy_quadratic()
    rescaled = RescaledOracle(q, (10.0, 0.01))
    hyper = AdamHyper(alpha=0.01, epsilon=1e-8, lam=1e-3)
    report = scalefree_equivalence("adamw", hyper, ConstantSchedule(1.0),
                                   q, rescaled, x0, 200)
    assert report.max_rel_dev > 1e-9


# ---------------------------------------------------------------------------
# the exact gap between the decoupled and the divide-through shrink
# ---------------------------------------------------------------------------

def _random_decay_states(n_states, dim, seed):
    rng = rng_stream(seed, 6)
    for k in range(n_states):
        yield (
            AdamState(
                x=rng.uniform(-3.0, 3.0, dim),
                m=np.zeros(dim),
                v=rng.uniform(0.0, 4.0, dim),
                t=int(rng.integers(1, 500)),
            ),
            float(rng.uniform(0.05, 1.5)),   # eta
            float(rng.uniform(0.0, 1.0)),    # lam
        )


def test_gap_formula_exact_in_decay_regime():
    # [DERIVED] with zero gradient and zero first moment both rules move by
    # the shrink alone, and the per-coordinate gap collapses to
    # lam^2 eta^2 |x| / (1 + lam eta) exactly
    total = 0
    for state, eta, lam in _random_decay_states(20, 500, seed=1729):
        hyper = AdamHyper(alpha=1e-3, lam=lam)
        g = np.zeros_like(state.x)
        xw = adamw_step(state, hyper, g, eta).x
        xp = adamprox_step(state, hyper, g, eta).x
        predicted = lam**2 * eta**2 * np.abs(state.x) / (1.0 + lam * eta)
        assert np.max(np.abs(np.abs(xw - xp) - predicted)) <= 1e-12
        total += state.x.shape[0]
    assert total == 10_000


def test_gap_formula_general_states():
    # [DERIVED] for arbitrary states the gap is
    # -lam eta^2 (lam x + alpha dir') / (1 + lam eta), with dir' the shared
    # post-step adaptive direction
    rng = rng_stream(1729, 7)
    beta1, beta2, eps, alpha = 0.9, 0.999, 1e-8, 0.05
    for _ in range(50):
        dim = int(rng.integers(1, 30))
        state = AdamState(
            x=rng.uniform(-3.0, 3.0, dim),
            m=rng.uniform(-1.0, 1.0, dim),
            v=rng.uniform(0.0, 2.0, dim),
            t=int(rng.integers(1, 200)),
        )
        g = rng.uniform(-2.0, 2.0, dim)
        eta = float(rng.uniform(0.05, 1.5))
        lam = float(rng.uniform(0.0, 1.0))
        hyper = AdamHyper(alpha=alpha, beta1=beta1, beta2=beta2,
                          epsilon=eps, lam=lam)

        t2 = state.t + 1
        m2 = beta1 * state.m + (1.0 - beta1) * g
        v2 = beta2 * state.v + (1.0 - beta2) * g * g
        direction = (m2 / (1.0 - beta1**t2)) / (
            np.sqrt(v2 / (1.0 - beta2**t2)) + eps)
        predicted = -lam * eta**2 * (lam * state.x + alpha * direction) / (
            1.0 + lam * eta)

        measured = adamw_step(state, hyper, g, eta).x - \
            adamprox_step(state, hyper, g, eta).x
        assert_allclose(measured, predicted, rtol=0.0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(0.0, 1.0),
    eta=st.floats(0.01, 1.5),
    x=st.floats(-10.0, 10.0),
)
def test_gap_formula_property(lam, eta, x):
    # [DERIVED] scalar decay-only case over hypothesis-chosen constants
    state = AdamState(x=np.array([x]), m=np.zeros(1), v=np.zeros(1), t=3)
    hyper = AdamHyper(alpha=1e-3, lam=lam)
    g = np.zeros(1)
    gap = abs(adamw_step(state, hyper, g, eta).x[0]
              - adamprox_step(state, hyper, g, eta).x[0])
    predicted = lam**2 * eta**2 * abs(x) / (1.0 + lam * eta)
    assert abs(gap - predicted) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(1e-6, 0.99),
    x=st.floats(-100.0, 100.0).filter(lambda v: abs(v) > 1e-12),
)
def test_decay_shrink_never_overshoots(lam, x):
    # with no gradient mass, both decoupled shrinks keep the sign and
    # reduce the magnitude for lam * eta in (0, 1)
    state = AdamState(x=np.array([x]), m=np.zeros(1), v=np.zeros(1), t=0)
    hyper = AdamHyper(alpha=1.0, lam=lam)
    g = np.zeros(1)
    for step_fn in (adamw_step, adamprox_step):
        out = step_fn(state, hyper, g, 1.0).x[0]
        assert np.sign(out) == np.sign(x)
        assert abs(out) < abs(x)


def test_moments_never_see_decoupled_decay():
    # [TRIVIAL] decoupled variants update moments from the raw gradient
    q, x0 = _toy_quadratic()
    g = q.gradient(x0)
    for kind in ("adamw", "adamprox", "adamproxl2"):
        hyper = AdamHyper(alpha=0.1, lam=0.7)
        out = ADAM_STEP_FNS[kind](init_adam_state(x0), hyper, g, 1.0)
        assert_array_equal(out.m, (1.0 - 0.9) * g)
        assert_array_equal(out.v, (1.0 - 0.999) * g * g)
