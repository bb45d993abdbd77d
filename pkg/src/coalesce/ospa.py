"""OSPA set metrics between finite point sets.

Both the standard (cardinality-averaged) metric and the modified variant
that adds rather than averages over targets are provided.  Distances can
be restricted to a coordinate mask, e.g. position components of a
position-velocity state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transport import solve_assignment


@dataclass
class OspaParams:
    p: float = 1.0
    c: float = 20.0
    mask: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.p < 1.0:
            raise ValueError("OSPA order p must be >= 1")
        if self.c <= 0.0:
            raise ValueError("OSPA cutoff c must be positive")


def _as_points(x, mask: tuple[int, ...] | None) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 0)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if mask is not None:
        pts = pts[:, list(mask)]
    return pts


def cutoff_cost_matrix(x, y, params: OspaParams) -> np.ndarray:
    """Matrix of min(c, ||x_i - y_j||)^p over the masked coordinates."""
    xp = _as_points(x, params.mask)
    yp = _as_points(y, params.mask)
    diff = xp[:, None, :] - yp[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return np.minimum(dist, params.c) ** params.p


def _matched_power_cost(x, y, params: OspaParams) -> tuple[float, int, int]:
    """Optimal-assignment sum of cutoff distances^p plus cardinality penalty."""
    xp = _as_points(x, params.mask)
    yp = _as_points(y, params.mask)
    n, m = xp.shape[0], yp.shape[0]
    if n == 0 and m == 0:
        return 0.0, 0, 0
    if n == 0 or m == 0:
        return params.c**params.p * abs(n - m), n, m
    big = max(n, m)
    cost = np.full((big, big), params.c**params.p)
    cost[:n, :m] = cutoff_cost_matrix(xp, yp, params)
    _, value = solve_assignment(cost)
    return value, n, m


def ospa(x, y, params: OspaParams | None = None) -> float:
    """OSPA distance of order p with cutoff c between two point sets."""
    params = params or OspaParams()
    value, n, m = _matched_power_cost(x, y, params)
    if n == 0 and m == 0:
        return 0.0
    return float((value / max(n, m)) ** (1.0 / params.p))


def ospa_modified(x, y, params: OspaParams | None = None) -> float:
    """Modified OSPA: adds over targets instead of averaging.

    Unlike the standard metric it grows with the number of missed or
    spurious targets, which makes it suitable as an estimation objective.
    """
    params = params or OspaParams()
    value, n, m = _matched_power_cost(x, y, params)
    if n == 0 and m == 0:
        return 0.0
    return float(value ** (1.0 / params.p))
