"""First-crossing detection for trigger functions: forward scan plus bisection."""

from __future__ import annotations

import numpy as np

_CHUNK_START = 64
_CHUNK_MAX = 4096


def first_crossing(phi, start: float, horizon: float, step: float, tol: float):
    """Smallest t in [start, horizon] with phi(t) >= 0, or None if there is none.

    phi maps an array of times to an array of values and must be continuous
    where finite; +inf entries are treated as "already crossed". The scan walks
    forward in increments of `step` (growing chunks keep far roots cheap), then
    bisects the bracketing interval down to width `tol` and returns its upper
    end, so phi at the returned time is nonnegative.
    """
    if step <= 0 or tol <= 0:
        raise ValueError("step and tol must be positive")
    if horizon < start:
        return None
    if phi(np.array([start]))[0] >= 0:
        return float(start)

    lo = float(start)
    chunk = _CHUNK_START
    while lo < horizon:
        count = min(chunk, max(1, int(np.ceil((horizon - lo) / step))))
        ts = lo + step * np.arange(1, count + 1)
        if ts[-1] >= horizon:
            ts = np.append(ts[ts < horizon], horizon)
        vals = phi(ts)
        crossed = vals >= 0
        if np.any(crossed):
            k = int(np.argmax(crossed))
            a = lo if k == 0 else float(ts[k - 1])
            b = float(ts[k])
            return _bisect(phi, a, b, tol)
        lo = float(ts[-1])
        chunk = min(chunk * 2, _CHUNK_MAX)
    return None


def _bisect(phi, a: float, b: float, tol: float) -> float:
    # invariant: phi(a) < 0 <= phi(b)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if phi(np.array([mid]))[0] >= 0:
            b = mid
        else:
            a = mid
    return b
