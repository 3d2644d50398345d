"""Step-size schedules: endpoint values, monotonicity, horizon enforcement."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sfopt.exceptions import OutOfHorizon
from sfopt.schedules import ConstantSchedule, CosineSchedule, make_schedule


def test_constant_schedule():
    sched = ConstantSchedule(0.25)
    assert [sched(t) for t in (1, 2, 500)] == [0.25, 0.25, 0.25]


def test_constant_default_is_one():
    assert ConstantSchedule()(1) == 1.0


def test_step_index_is_one_based():
    with pytest.raises(ValueError, match=">= 1"):
        ConstantSchedule()(0)
    with pytest.raises(ValueError, match=">= 1"):
        CosineSchedule(1.0, 10)(-3)


def test_cosine_endpoints():
    # [TRIVIAL] cos(0) = 1 exactly, so the first step returns eta0 itself;
    # at t = T + 1 the argument is exactly pi and the value reaches zero
    sched = CosineSchedule(0.7, horizon=100)
    assert sched(1) == 0.7
    assert abs(sched(101)) <= 1e-16


def test_cosine_midpoint():
    # [DERIVED] oracle: eta0 * (1 + cos(pi/2)) / 2 = eta0 / 2 up to the
    # rounding of cos near its zero crossing
    sched = CosineSchedule(2.0, horizon=100)
    assert_allclose(sched(51), 1.0, atol=1e-15)


def test_cosine_matches_formula_everywhere():
    # [DERIVED] oracle: direct transcription with math.cos
    eta0, horizon = 0.35, 37
    sched = CosineSchedule(eta0, horizon)
    for t in range(1, horizon + 2):
        want = eta0 * 0.5 * (1.0 + math.cos(math.pi * (t - 1) / horizon))
        assert sched(t) == want


def test_cosine_nonincreasing():
    sched = CosineSchedule(1.0, horizon=200)
    values = np.array([sched(t) for t in range(1, 202)])
    assert np.all(np.diff(values) <= 0.0)


def test_cosine_out_of_horizon():
    sched = CosineSchedule(1.0, horizon=10)
    sched(11)  # the zero endpoint is still defined
    with pytest.raises(OutOfHorizon):
        sched(12)


def test_schedule_validation():
    with pytest.raises(ValueError, match="eta0 must be positive"):
        ConstantSchedule(0.0)
    with pytest.raises(ValueError, match="eta0 must be positive"):
        CosineSchedule(-1.0, 10)
    with pytest.raises(ValueError, match="horizon must be >= 1"):
        CosineSchedule(1.0, 0)


def test_make_schedule_dispatch():
    assert isinstance(make_schedule("constant", 0.5), ConstantSchedule)
    cos = make_schedule("cosine", 0.5, horizon=20)
    assert isinstance(cos, CosineSchedule)
    assert cos.horizon == 20
    with pytest.raises(ValueError, match="needs a horizon"):
        make_schedule("cosine", 0.5)
    with pytest.raises(ValueError, match="unknown schedule kind"):
        make_schedule("linear", 0.5)
