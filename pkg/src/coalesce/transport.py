"""Transportation LP solver via a forward auction with epsilon scaling.

The problem solved here is

    minimize    sum_{h,j} C[h, j] q[h, j]
    subject to  sum_h q[h, j] = 1        for every column j
                sum_j q[h, j] = p[h]     for every row h
                q >= 0

Fractional row supplies are scaled to integer unit counts (denominator
``UNIT_DENOM``) and the auction trades blocks of units, so run time does
not grow with the denominator.  Costs are reduced by row and column
offsets first; the feasible sums are fixed, so this shifts the objective
by a constant and only shortens the epsilon ladder.  Epsilon scaling
warm-starts each phase from the previous assignment: only pairs violating
the tighter complementary-slackness bound are unassigned and
re-auctioned, and each owner's unit blocks are consolidated per column so
fragmentation cannot build up across phases.  Near-degenerate instances
can trap a sliver of surplus in an eviction cycle that raises prices one
eps per bid, so each phase gets a bid budget; leftovers are then placed
on open units directly and the mass-weighted slack certificate decides
termination, declaring success once it bounds the objective gap by
``n_cols * eps_final``.  The worst single-unit slack is reported as a
diagnostic and can exceed ``eps_final`` on such degenerate ties.

The exact rectangular assignment solver reused by the set metrics lives
here as well.
"""

from __future__ import annotations

from bisect import insort
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NumericsError

UNIT_DENOM = 10**9
PHASE_BID_BUDGET = 50_000
MAX_PHASES = 1000
_NEG_INF = float("-inf")

# A lot is [price, n_units, owner]; owner -1 marks units open for bids.
Lots = list[list[list]]


@dataclass
class TransportPlan:
    """Solution of the transportation LP with solver diagnostics.

    ``objective`` is within ``q.shape[1] * eps_final`` of the optimum.
    ``cs_residual`` is the worst per-unit price slack at the final prices;
    it can exceed ``eps_final`` for a sliver of mass on degenerate ties.
    """

    q: np.ndarray
    objective: float
    iterations: int
    phases: int
    eps_final: float
    cs_residual: float


def solve_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact min-cost assignment for an m x n cost matrix with m <= n.

    Returns the assigned column per row and the total cost.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-d matrix")
    if cost.shape[0] > cost.shape[1]:
        raise ValueError("assignment requires at least as many columns as rows")
    if not np.all(np.isfinite(cost)):
        raise ValueError("assignment cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    value = float(cost[rows, cols].sum())
    perm = np.empty(cost.shape[0], dtype=int)
    perm[rows] = cols
    return perm, value


def _integer_supplies(supplies: np.ndarray, n_cols: int) -> np.ndarray:
    """Round supplies to units summing exactly to n_cols * UNIT_DENOM."""
    units = np.rint(supplies * UNIT_DENOM).astype(np.int64)
    units = np.maximum(units, 0)
    deficit = n_cols * UNIT_DENOM - int(units.sum())
    # Spread the rounding residue over the largest rows, one unit at a time.
    order = np.argsort(-supplies, kind="stable")
    i = 0
    while deficit != 0:
        idx = order[i % len(order)]
        step = 1 if deficit > 0 else -1
        if units[idx] + step >= 0:
            units[idx] += step
            deficit -= step
        i += 1
    return units


def _release_violators(
    cost: np.ndarray, lots: Lots, eps: float, surplus: list[int], noise: float
) -> deque:
    """Unassign lots violating eps-complementary slackness at current prices.

    Each owner's blocks within a column are first merged at their maximum
    price; lifting an owner's cheaper units to a price it already pays
    elsewhere in the column keeps its own slack bound and can only shrink
    everyone else's.  Released units keep their price but become open.
    Prices never drop, so a single scan is enough.  ``noise`` pads the
    threshold by the roundoff of the price arithmetic: re-auctioning a lot
    whose violation is pure float noise shifts the whole price level one
    eps up and reproduces the same state, a treadmill that never ends.
    """
    for j, col in enumerate(lots):
        counts: dict[int, int] = {}
        prices: dict[int, float] = {}
        for price, count, owner in col:
            counts[owner] = counts.get(owner, 0) + count
            prices[owner] = max(prices.get(owner, _NEG_INF), price)
        lots[j] = sorted([prices[o], counts[o], o] for o in counts)
    lam = np.array([col[0][0] for col in lots])
    best = (-cost - lam).max(axis=1)
    for j, col in enumerate(lots):
        for lot in col:
            price, count, owner = lot
            if owner >= 0 and best[owner] - (-cost[owner, j] - price) > eps + noise:
                surplus[owner] += count
                lot[2] = -1
    return deque(h for h in range(len(surplus)) if surplus[h] > 0)


def _duality_gap_bound(cost: np.ndarray, lots: Lots) -> float:
    """Bound the objective suboptimality of the current assignment.

    For any complete assignment, the gap to the LP optimum is at most the
    mass-weighted sum of per-unit slacks measured against the column
    minimum prices.  Uniform eps-slackness makes this n_cols * eps, which
    is the advertised guarantee, so the auction may stop as soon as the
    measured certificate reaches that level even if a few griefed lots
    still sit past their owner's tolerance.
    """
    lam = np.array([col[0][0] for col in lots])
    best = (-cost - lam).max(axis=1)
    gap = 0.0
    for j, col in enumerate(lots):
        for price, count, owner in col:
            if owner >= 0:
                slack = best[owner] - (-cost[owner, j] - price)
                if slack > 0.0:
                    gap += slack * (count / UNIT_DENOM)
    return gap


def _force_place(
    neg_rows: list[list[float]], lots: Lots, surplus: list[int]
) -> None:
    """Assign leftover supply to open units at their current prices.

    A phase that exhausts its bid budget is shuffling a sliver of mass
    around a degenerate cycle, raising prices by one eps per bid.  Unit
    conservation means exactly as many open units as leftover supply
    exist, so the leftovers can be placed directly without displacing
    anyone or moving a price; the next violator sweep or the final gap
    certificate then decides whether the shortcut was acceptable.
    """
    for h in range(len(surplus)):
        need = surplus[h]
        while need > 0:
            row = neg_rows[h]
            best_j = -1
            best_v = _NEG_INF
            for j, col in enumerate(lots):
                for lot in col:
                    if lot[2] < 0:
                        v = row[j] - lot[0]
                        if v > best_v:
                            best_v = v
                            best_j = j
                        break
            if best_j < 0:
                raise NumericsError("transport auction lost open units")
            col = lots[best_j]
            pos = next(i for i, lot in enumerate(col) if lot[2] < 0)
            price, count, _ = col.pop(pos)
            grab = count if count <= need else need
            if count > grab:
                insort(col, [price, count - grab, -1])
            insort(col, [price, grab, h])
            need -= grab
        surplus[h] = 0


def _auction_phase(
    neg_rows: list[list[float]],
    lots: Lots,
    eps: float,
    surplus: list[int],
    queue: deque,
    budget: int,
) -> int:
    """Run forward-auction bids until supply is placed or the budget ends."""
    n = len(lots)
    lam = [col[0][0] for col in lots]
    bids = 0
    while queue:
        if bids >= budget:
            break
        bids += 1
        h = queue.popleft()
        delta = surplus[h]
        if delta <= 0:
            continue
        row = neg_rows[h]
        j_star = 0
        best_v = row[0] - lam[0]
        w2 = _NEG_INF
        for j in range(1, n):
            v = row[j] - lam[j]
            if v > best_v:
                w2 = best_v
                best_v = v
                j_star = j
            elif v > w2:
                w2 = v
        cut = row[j_star] - w2  # prices below this are worth taking
        col = lots[j_star]
        taken = 0
        freed: dict[int, int] = {}
        first = True
        while col and taken < delta:
            lot0 = col[0]
            if not first and lot0[0] >= cut:
                break
            need = delta - taken
            count = lot0[1]
            if need >= count:
                col.pop(0)
                grab = count
            else:
                lot0[1] = count - need
                grab = need
                remnant = lot0
            owner = lot0[2]
            if owner >= 0:
                freed[owner] = freed.get(owner, 0) + grab
            taken += grab
            first = False
        if col:
            nxt = row[j_star] - col[0][0]
            w_prime = w2 if w2 > nxt else nxt
        else:
            w_prime = w2
        if w_prime != _NEG_INF:
            new_price = row[j_star] - w_prime + eps
        else:
            new_price = lam[j_star] + eps
        # Absorb this row's cheaper blocks in the column to limit fragmentation.
        block = taken
        i = 0
        while i < len(col):
            li = col[i]
            if li[0] > new_price:
                break
            if li[2] == h:
                block += li[1]
                col.pop(i)
            else:
                i += 1
        insort(col, [new_price, block, h])
        lam[j_star] = col[0][0]
        surplus[h] = delta - taken
        for owner, count in freed.items():
            if surplus[owner] == 0:
                queue.append(owner)
            surplus[owner] += count
        if delta > taken:
            queue.append(h)
    return bids


def solve_transport(
    cost: np.ndarray,
    supplies: np.ndarray,
    eps_final: float | None = None,
) -> TransportPlan:
    """Solve the transportation LP for the given cost matrix and row supplies.

    Column demands are all 1; ``sum(supplies)`` must equal the number of
    columns to within 1e-9 (supplies are renormalized to remove that
    residue).  Rows with zero supply are dropped before the auction and
    come back as zero rows of the plan.
    """
    cost = np.asarray(cost, dtype=float)
    supplies = np.asarray(supplies, dtype=float).reshape(-1)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-d matrix")
    m, n = cost.shape
    if supplies.shape[0] != m:
        raise ValueError("supplies length must match the number of cost rows")
    if not np.all(np.isfinite(cost)):
        raise ValueError("transport cost matrix must be finite")
    if np.any(supplies < -1e-12):
        raise ValueError("supplies must be nonnegative")
    supplies = np.maximum(supplies, 0.0)
    total = float(supplies.sum())
    if abs(total - n) > 1e-9 * max(1.0, n):
        raise ValueError(f"supplies sum to {total}, expected {n}")
    if total <= 0.0:
        raise ValueError("total supply is zero")
    supplies = supplies * (n / total)

    if n == 1 or m == 1:
        # The feasible set is a single point; no auction needed.
        q = supplies[:, None] if n == 1 else np.ones((1, n))
        eps = eps_final if eps_final is not None else 1e-9 * max(1.0, float(np.abs(cost).max()))
        return TransportPlan(q, float(np.sum(cost * q)), 0, 0, eps, 0.0)

    active = np.flatnonzero(supplies > 0.0)
    units = _integer_supplies(supplies[active], n)
    keep = units > 0
    active = active[keep]
    units = units[keep]
    sub_cost = cost[active]
    # Row and column offsets shift the objective by a constant only.
    if sub_cost.size:
        sub_cost = sub_cost - sub_cost.min(axis=1, keepdims=True)
        sub_cost = sub_cost - sub_cost.min(axis=0, keepdims=True)

    scale = float(sub_cost.max()) if sub_cost.size else 0.0
    if eps_final is None:
        eps_final = 1e-9 * max(1.0, scale)
    # Comparisons against eps decide at exact float boundaries in the
    # degenerate stalemates, so pad them by the price-arithmetic roundoff.
    noise = 256.0 * np.finfo(float).eps * max(1.0, scale)
    eps = max(scale, 4.0 * eps_final)
    neg_rows = (-sub_cost).tolist()
    lots: Lots = [[[0.0, UNIT_DENOM, -1]] for _ in range(n)]
    surplus = [int(u) for u in units]
    queue = deque(range(len(surplus)))
    total_bids = 0
    phases = 0
    while True:
        total_bids += _auction_phase(
            neg_rows, lots, eps, surplus, queue, PHASE_BID_BUDGET
        )
        phases += 1
        if any(s > 0 for s in surplus):
            _force_place(neg_rows, lots, surplus)
        if eps <= eps_final:
            # Force-placement can leave a sliver of mass past its owner's
            # tolerance, so re-run at the final tolerance until the gap
            # certificate meets the advertised bound.
            if _duality_gap_bound(sub_cost, lots) <= n * (eps_final + noise):
                break
            queue = _release_violators(sub_cost, lots, eps_final, surplus, noise)
            if not queue:
                break
            if phases >= MAX_PHASES:
                raise NumericsError(
                    f"transport auction exceeded {MAX_PHASES} phases"
                )
        else:
            eps = max(eps / 4.0, eps_final)
            queue = _release_violators(sub_cost, lots, eps, surplus, noise)

    q = np.zeros((m, n))
    lam = np.array([col[0][0] for col in lots])
    best = (-sub_cost - lam).max(axis=1)
    cs_residual = 0.0
    for j, col in enumerate(lots):
        for price, count, owner in col:
            if owner < 0:
                raise NumericsError("transport auction left unassigned demand")
            q[active[owner], j] += count / UNIT_DENOM
            own = -sub_cost[owner, j] - price
            cs_residual = max(cs_residual, best[owner] - own)
    objective = float(np.sum(cost * q))
    return TransportPlan(q, objective, total_bids, phases, eps_final, cs_residual)
