"""Vector plumbing: validated float64 arrays, seeded streams, derivative checks.

Everything downstream works on flat vectors of 64-bit floats.  ``as_vector``
is the single entry point enforcing that convention; the elementwise helpers
mirror the handful of array operations the update rules are built from, with
explicit errors in place of numpy warnings.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .exceptions import DimensionMismatch, DivisionByZero, NonFiniteValue

__all__ = [
    "as_vector",
    "elementwise",
    "linf_norm",
    "rng_stream",
    "fd_gradient",
]


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Coerce ``values`` to a 1-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatch(f"{name} must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise NonFiniteValue(f"{name}[{bad}] is not finite")
    return arr


_BINARY_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "max": np.maximum,
}


def elementwise(kind: str, a, b) -> np.ndarray:
    """Elementwise binary op on two equal-length vectors.

    ``kind`` is one of ``add``, ``sub``, ``mul``, ``div``, ``max``.  Division
    by a zero coordinate raises :class:`DivisionByZero` carrying the first
    offending index.
    """
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if kind == "div":
        zeros = np.flatnonzero(b == 0.0)
        if zeros.size:
            raise DivisionByZero(zeros[0])
        return a / b
    try:
        op = _BINARY_OPS[kind]
    except KeyError:
        raise ValueError(f"unknown elementwise op {kind!r}") from None
    return op(a, b)


def linf_norm(v) -> float:
    """Largest absolute coordinate."""
    v = as_vector(v, "v")
    return float(np.max(np.abs(v)))


def rng_stream(seed: int, stream_id=0) -> np.random.Generator:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Built on the counter-based Philox generator so distinct stream ids give
    statistically independent streams from one experiment seed; the same pair
    always replays the same draws, which is what makes parallel grid cells
    bit-reproducible.  ``stream_id`` may be an int or a tuple of ints (used
    to key streams by several values at once).
    """
    if isinstance(stream_id, (tuple, list)):
        key = tuple(int(s) for s in stream_id)
    else:
        key = (int(stream_id),)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def fd_gradient(fun: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, one probe per coordinate.

    Used as the independent cross-check for every analytic gradient in the
    library.  Raises :class:`NonFiniteValue` if a probe returns NaN or inf.
    """
    x = as_vector(x, "x")
    if not (h > 0.0):
        raise ValueError(f"h must be positive, got {h}")
    g = np.empty_like(x)
    probe = x.copy()
    for i in range(x.shape[0]):
        orig = probe[i]
        probe[i] = orig + h
        hi = float(fun(probe))
        probe[i] = orig - h
        lo = float(fun(probe))
        probe[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NonFiniteValue(f"objective is non-finite near coordinate {i}")
        g[i] = (hi - lo) / (2.0 * h)
    return g
