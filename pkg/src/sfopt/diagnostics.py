"""Measurements on runs: update-magnitude histograms, dispersion statistics,
pairwise run equivalence, and the two inequality checkers.

The histogram is the workhorse.  Update magnitudes are recorded as
``|delta x| / alpha`` and dropped into 29 fixed base-2 bins: one bin per
octave ``[2**k, 2**(k+1))`` for ``k`` from -27 to -2, plus ``[0.5, 1)``,
with a catch-all at or below ``2**-27`` on the left and at or above 1 on the
right.  Fixed bins mean histograms from different runs, epochs, or workers
add cell by cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    AllZero,
    DimensionMismatch,
    EmptyWindow,
    MissingTraceFields,
    NonFiniteValue,
)
from .trace import format_float, read_csv, write_csv
from .updates import ADAM_STEP_FNS, iterate_adam
from .vectors import as_vector

__all__ = [
    "N_BINS",
    "UpdateHistogram",
    "record_update_histogram",
    "DispersionStats",
    "dispersion",
    "EquivalenceReport",
    "relative_deviation",
    "vector_deviation",
    "trajectory_deviation",
    "scalefree_equivalence",
    "RegretReport",
    "check_regret_bound",
    "hypercube_grid",
    "ContractionReport",
    "check_restart_contraction",
]

N_BINS = 29
_LOW_EXP = -27  # smallest resolved octave


def _bin_edges() -> np.ndarray:
    """The 30 bin boundaries: 0, 2**-27, ..., 0.5, 1, inf."""
    return np.concatenate(
        ([0.0], 2.0 ** np.arange(_LOW_EXP, 1.0), [np.inf])
    )


class UpdateHistogram:
    """Streaming fixed-bin histogram of nonnegative magnitudes."""

    def __init__(self):
        self.counts = np.zeros(N_BINS, dtype=np.int64)

    edges = staticmethod(_bin_edges)

    def add(self, magnitudes) -> "UpdateHistogram":
        m = np.asarray(magnitudes, dtype=np.float64).ravel()
        if np.any(np.isnan(m)):
            raise NonFiniteValue("magnitudes contain NaN")
        if np.any(m < 0.0):
            raise ValueError("magnitudes must be nonnegative")
        low = m <= 2.0**_LOW_EXP
        high = m >= 1.0
        self.counts[0] += int(low.sum())
        self.counts[N_BINS - 1] += int(high.sum())
        mid = m[~(low | high)]
        if mid.size:
            k = np.floor(np.log2(mid)).astype(np.int64)  # in [-27, -1]
            np.add.at(self.counts, k - _LOW_EXP + 1, 1)
        return self

    def merge(self, other: "UpdateHistogram") -> "UpdateHistogram":
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, path):
        edges = _bin_edges()
        rows = []
        for i in range(N_BINS):
            lo = -np.inf if i == 0 else edges[i]  # left catch-all marker
            rows.append([format_float(lo), format_float(edges[i + 1]),
                         str(int(self.counts[i]))])
        write_csv(path, ["bin_lo", "bin_hi", "count"], rows)

    @classmethod
    def from_csv(cls, path) -> "UpdateHistogram":
        header, rows = read_csv(path)
        if header != ["bin_lo", "bin_hi", "count"] or len(rows) != N_BINS:
            raise ValueError(f"not a {N_BINS}-bin histogram file: {path}")
        edges = _bin_edges()
        hist = cls()
        for i, row in enumerate(rows):
            lo, hi = float(row[0]), float(row[1])
            want_lo = -np.inf if i == 0 else edges[i]
            if lo != want_lo or hi != edges[i + 1]:
                raise ValueError(f"bin {i} edges ({lo}, {hi}) do not match the contract")
            hist.counts[i] = int(row[2])
        return hist


def record_update_histogram(trace, window: tuple[int, int],
                            alpha: float | None = None) -> UpdateHistogram:
    """Histogram the per-coordinate ``|delta x| / alpha`` of a step window.

    ``window`` is an inclusive 1-based step range.  The trace must have been
    recorded with raw update magnitudes retained; ``alpha`` defaults to the
    trace's own metadata.
    """
    if trace.update_mags is None:
        raise MissingTraceFields("trace has no retained update magnitudes")
    if alpha is None:
        alpha = trace.metadata.get("alpha")
        if alpha is None:
            raise MissingTraceFields("no alpha in trace metadata and none given")
    lo, hi = window
    mask = (trace.steps >= lo) & (trace.steps <= hi)
    if not mask.any():
        raise EmptyWindow(f"window [{lo}, {hi}] selects no recorded steps")
    hist = UpdateHistogram()
    hist.add(trace.update_mags[mask] / float(alpha))
    return hist


@dataclass(frozen=True)
class DispersionStats:
    """Quantile summary of log2 magnitudes; spreads are in octaves."""

    median_log2: float
    iqr_octaves: float
    p5_log2: float
    p95_log2: float
    n_zero: int
    n_total: int


def dispersion(magnitudes) -> DispersionStats:
    """Location and spread of ``log2 |m|`` over the nonzero magnitudes.

    Zeros carry no scale information, so they are excluded and counted
    separately; all-zero input raises :class:`AllZero`.
    """
    m = np.abs(np.asarray(magnitudes, dtype=np.float64).ravel())
    if np.any(~np.isfinite(m)):
        raise NonFiniteValue("magnitudes contain non-finite entries")
    nonzero = m[m > 0.0]
    n_zero = m.size - nonzero.size
    if nonzero.size == 0:
        raise AllZero("every magnitude is zero")
    logs = np.log2(nonzero)
    p5, p25, p50, p75, p95 = np.percentile(logs, [5, 25, 50, 75, 95])
    return DispersionStats(
        median_log2=float(p50),
        iqr_octaves=float(p75 - p25),
        p5_log2=float(p5),
        p95_log2=float(p95),
        n_zero=int(n_zero),
        n_total=int(m.size),
    )


REL_DEV_FLOOR = 1e-12


def relative_deviation(a, b) -> float:
    """Largest coordinatewise relative gap, floored so zeros cannot blow up.

    Symmetric in its arguments: the denominator is the larger magnitude of
    the two coordinates (floored at 1e-12).
    """
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), REL_DEV_FLOOR)
    return float(np.max(np.abs(a - b) / den))


def vector_deviation(a, b) -> float:
    """Sup-norm gap between two iterates relative to their overall size.

    Individual coordinates routinely pass through zero during a run, so a
    coordinatewise ratio would report order-one deviation for any pair of
    trajectories that are not bit-identical.  Comparing the largest
    coordinate gap against the largest coordinate magnitude (floored at
    1e-12) keeps the measure meaningful for whole parameter vectors.
    """
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    den = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), REL_DEV_FLOOR)
    return float(np.max(np.abs(a - b))) / den


def trajectory_deviation(xs_a, xs_b) -> float:
    """Worst per-step :func:`vector_deviation` over two recorded runs."""
    xs_a = np.atleast_2d(np.asarray(xs_a, dtype=np.float64))
    xs_b = np.atleast_2d(np.asarray(xs_b, dtype=np.float64))
    if xs_a.shape != xs_b.shape:
        raise DimensionMismatch(
            f"trajectories have shapes {xs_a.shape} and {xs_b.shape}")
    worst = 0.0
    for row_a, row_b in zip(xs_a, xs_b):
        worst = max(worst, vector_deviation(row_a, row_b))
    return worst


@dataclass(frozen=True)
class EquivalenceReport:
    max_rel_dev: float
    tol: float
    n_steps: int
    passed: bool


def scalefree_equivalence(step_kind, hyper, schedule, problem_a, problem_b, x0,
                          n_steps: int, tol: float = 1e-12) -> EquivalenceReport:
    """Run one update rule against two gradient oracles in lockstep.

    Reports the largest per-step relative iterate deviation.  The intended
    pairs are a problem and its per-coordinate rescaling (identical paths for
    the decoupled variants at ``epsilon = 0``) or a loss and its multiple.
    """
    step_fn = ADAM_STEP_FNS[step_kind] if isinstance(step_kind, str) else step_kind
    x0 = as_vector(x0, "x0")
    run_a = iterate_adam(step_fn, hyper, schedule, problem_a.gradient, x0, n_steps)
    run_b = iterate_adam(step_fn, hyper, schedule, problem_b.gradient, x0, n_steps)
    worst = 0.0
    for state_a, state_b in zip(run_a, run_b):
        worst = max(worst, vector_deviation(state_a.x, state_b.x))
    return EquivalenceReport(max_rel_dev=worst, tol=tol, n_steps=int(n_steps),
                             passed=worst <= tol)


@dataclass(frozen=True)
class RegretReport:
    violations: np.ndarray
    max_violation: float
    rhs: float
    passed: bool


def check_regret_bound(problem, record, comparators, d_inf: float) -> RegretReport:
    """Compare a run's summed loss against the adaptive regret guarantee.

    For each comparator point ``u`` the checked quantity is::

        sum_t f(x_t) - T * f(u)  -  sqrt(2 * d * d_inf**2 * sum_t ||g_t||**2)

    where ``d_inf`` is the domain's sup-norm diameter.  A positive value is a
    violation.  ``record`` needs per-step ``loss`` and ``grad_sq``; missing
    fields are an error, not a silent pass.
    """
    for key in ("loss", "grad_sq"):
        if key not in record:
            raise MissingTraceFields(f"record lacks {key!r}")
    comparators = np.atleast_2d(np.asarray(comparators, dtype=np.float64))
    losses = np.asarray(record["loss"], dtype=np.float64)
    grad_sq = np.asarray(record["grad_sq"], dtype=np.float64)
    t_total = losses.shape[0]
    d = comparators.shape[1]
    rhs = float(np.sqrt(2.0 * d * d_inf**2 * grad_sq.sum()))
    lhs = np.array([losses.sum() - t_total * problem.value(u) for u in comparators])
    violations = lhs - rhs
    worst = float(violations.max())
    return RegretReport(violations=violations, max_violation=worst, rhs=rhs,
                        passed=worst <= 0.0)


def hypercube_grid(center, radius: float, n_points: int) -> np.ndarray:
    """About ``n_points`` comparators on a regular lattice over the box.

    Uses ``round(n_points ** (1/d))`` points per axis, so the exact count is
    that number to the d-th power (100 requested in 2-D gives exactly 100).
    """
    center = as_vector(center, "center")
    d = center.shape[0]
    per_axis = max(2, round(n_points ** (1.0 / d)))
    axes = [np.linspace(c - radius, c + radius, per_axis) for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class ContractionReport:
    sq_errors: np.ndarray
    bounds: np.ndarray
    per_round_ok: np.ndarray
    passed: bool


def check_restart_contraction(round_averages, x_star, d_inf: float) -> ContractionReport:
    """Verify the per-round halving of the sup-norm error.

    Round i's averaged iterate must satisfy
    ``||avg_i - x*||_inf**2 <= d_inf**2 / 4**i``, checked with no slack.
    """
    x_star = as_vector(x_star, "x_star")
    sq_errors = np.array([
        float(np.max(np.abs(as_vector(avg, "avg") - x_star)) ** 2)
        for avg in round_averages
    ])
    rounds = np.arange(1, len(sq_errors) + 1)
    bounds = d_inf**2 / 4.0**rounds
    ok = sq_errors <= bounds
    return ContractionReport(sq_errors=sq_errors, bounds=bounds, per_round_ok=ok,
                             passed=bool(ok.all()))
