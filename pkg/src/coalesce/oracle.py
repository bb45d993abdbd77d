"""Brute-force set-integral machinery on small 1-d grids.

Random finite sets are discretized onto a uniform grid so that set
integrals, set KL divergences, and the multi-Bernoulli decomposition
identity can be evaluated exactly (up to grid resolution) by explicit
enumeration. Everything here is exponential in cardinality and is meant
for validating the reduction machinery at tiny scale, not for tracking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import NumericsError

MASS_TOL = 1e-9
DECOMPOSITION_TOL = 1e-8


@dataclass(frozen=True)
class GridSpace:
    """Uniform 1-d grid carrying the cell width used as the Jacobian."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1)
        if pts.size < 2:
            raise ValueError("grid needs at least 2 points")
        steps = np.diff(pts)
        if np.any(steps <= 0.0):
            raise ValueError("grid points must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-12, atol=1e-12):
            raise ValueError("grid spacing must be uniform")
        object.__setattr__(self, "points", pts)

    @property
    def dx(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def size(self) -> int:
        return int(self.points.size)


def normalize_density(space: GridSpace, values) -> np.ndarray:
    """Scale nonnegative grid values so they integrate to one."""
    vals = np.asarray(values, dtype=float).reshape(-1)
    if vals.size != space.size:
        raise ValueError("density length must match the grid")
    if np.any(vals < 0.0):
        raise ValueError("density values must be nonnegative")
    mass = vals.sum() * space.dx
    if mass <= 0.0:
        raise ValueError("density must have positive mass")
    return vals / mass


@dataclass
class GridRfs:
    """Set density stored as one symmetric weight array per cardinality.

    ``weights[n]`` has shape ``(k,) * n`` and holds the density value at
    each ordered tuple of grid points; ``weights[0]`` is the scalar
    weight of the empty set. The set integral of the whole family must
    equal one.
    """

    space: GridSpace
    weights: list = field(default_factory=list)

    def __post_init__(self):
        k = self.space.size
        arrays = []
        for n, w in enumerate(self.weights):
            arr = np.asarray(w, dtype=float)
            if arr.shape != (k,) * n:
                raise ValueError("weight array %d has wrong shape" % n)
            if np.any(arr < 0.0):
                raise ValueError("set density values must be nonnegative")
            for axis in range(1, n):
                if not np.array_equal(arr, np.swapaxes(arr, 0, axis)):
                    raise ValueError("weight array %d is not symmetric" % n)
            arrays.append(arr)
        if not arrays:
            raise ValueError("at least the empty-set weight is required")
        self.weights = arrays
        mass = self.total_mass()
        if abs(mass - 1.0) > MASS_TOL:
            raise ValueError("set density mass %.3e is not 1" % mass)

    @property
    def n_max(self) -> int:
        return len(self.weights) - 1

    def value(self, indices: tuple) -> float:
        """Density at the set of grid points given by ``indices``."""
        n = len(indices)
        if n > self.n_max:
            return 0.0
        return float(self.weights[n][tuple(indices)])

    def total_mass(self) -> float:
        dx = self.space.dx
        return sum(
            float(w.sum()) * dx**n / math.factorial(n)
            for n, w in enumerate(self.weights)
        )

    def cardinality(self) -> np.ndarray:
        """Pmf of the set cardinality, n = 0..n_max."""
        dx = self.space.dx
        return np.array(
            [
                float(w.sum()) * dx**n / math.factorial(n)
                for n, w in enumerate(self.weights)
            ]
        )

    def phd(self) -> np.ndarray:
        """First-moment intensity by marginalizing each cardinality block."""
        k = self.space.size
        dx = self.space.dx
        out = np.zeros(k)
        for n in range(1, self.n_max + 1):
            w = self.weights[n].reshape(k, -1).sum(axis=1)
            out += w * dx ** (n - 1) / math.factorial(n - 1)
        return out


def _outer(parts, scalar: float) -> np.ndarray:
    if not parts:
        return np.asarray(scalar, dtype=float)
    return scalar * reduce(np.multiply.outer, parts)


def _symmetrize_exact(arr: np.ndarray) -> np.ndarray:
    """Copy each entry from its sorted index tuple.

    Evaluation order makes mirrored entries differ by rounding noise even
    though the array is symmetric mathematically; picking the canonical
    representative restores bitwise symmetry.
    """
    n = arr.ndim
    if n < 2:
        return arr
    k = arr.shape[0]
    idx = np.indices(arr.shape).reshape(n, -1)
    idx.sort(axis=0)
    flat = np.zeros(idx.shape[1], dtype=np.int64)
    for t in range(n):
        flat = flat * k + idx[t]
    return arr.reshape(-1)[flat].reshape(arr.shape)


def bernoulli_grid(space: GridSpace, r: float, density) -> GridRfs:
    """Bernoulli set density with existence r and given spatial density."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("existence probability must lie in [0, 1]")
    p = normalize_density(space, density)
    return GridRfs(space, [np.asarray(1.0 - r), r * p])


def mb_grid(space: GridSpace, components) -> GridRfs:
    """Multi-Bernoulli set density for (r, density) component pairs."""
    rs = [float(r) for r, _ in components]
    ps = [normalize_density(space, d) for _, d in components]
    if any(not 0.0 <= r <= 1.0 for r in rs):
        raise ValueError("existence probability must lie in [0, 1]")
    n_comp = len(rs)
    k = space.size
    weights = []
    for n in range(n_comp + 1):
        w = np.zeros((k,) * n)
        for combo in itertools.permutations(range(n_comp), n):
            chosen = set(combo)
            miss = 1.0
            for j in range(n_comp):
                if j not in chosen:
                    miss *= 1.0 - rs[j]
            w = w + _outer([rs[j] * ps[j] for j in combo], miss)
        weights.append(_symmetrize_exact(w))
    return GridRfs(space, weights)


def mbm_grid(space: GridSpace, globals_) -> GridRfs:
    """Mixture of multi-Bernoulli densities, (weight, components) pairs."""
    total = sum(w for w, _ in globals_)
    if total <= 0.0:
        raise ValueError("mixture weights must have positive total")
    parts = [(w / total, mb_grid(space, comps)) for w, comps in globals_]
    n_max = max(p.n_max for _, p in parts)
    k = space.size
    weights = []
    for n in range(n_max + 1):
        w = np.zeros((k,) * n)
        for wa, f in parts:
            if n <= f.n_max:
                w = w + wa * f.weights[n]
        weights.append(w)
    return GridRfs(space, weights)


def ppp_grid(space: GridSpace, intensity, n_max: int) -> GridRfs:
    """Poisson point-process density truncated at cardinality n_max.

    The truncation tail must be below the mass tolerance, so n_max has
    to be generous relative to the total intensity mass.
    """
    lam = np.asarray(intensity, dtype=float).reshape(-1)
    if lam.size != space.size or np.any(lam < 0.0):
        raise ValueError("intensity must be nonnegative and match the grid")
    rate = float(lam.sum() * space.dx)
    weights = [np.asarray(math.exp(-rate))]
    for n in range(1, n_max + 1):
        weights.append(_symmetrize_exact(_outer([lam] * n, math.exp(-rate))))
    return GridRfs(space, weights)


def iid_cluster_grid(space: GridSpace, cardinality, density) -> GridRfs:
    """Independent identically distributed cluster process density."""
    card = np.asarray(cardinality, dtype=float).reshape(-1)
    if np.any(card < 0.0):
        raise ValueError("cardinality pmf must be nonnegative")
    if abs(card.sum() - 1.0) > MASS_TOL:
        raise ValueError("cardinality pmf must sum to 1")
    s = normalize_density(space, density)
    weights = [np.asarray(card[0])]
    for n in range(1, card.size):
        weights.append(_symmetrize_exact(_outer([s] * n, math.factorial(n) * card[n])))
    return GridRfs(space, weights)


def set_integral(space: GridSpace, v, n_max: int) -> float:
    """Set integral of ``v`` truncated at cardinality ``n_max``.

    ``v`` is evaluated on tuples of grid indices; the empty tuple is the
    empty set. Ordered tuples are enumerated exhaustively and divided by
    n! as in the cardinality expansion of the set integral.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    dx = space.dx
    total = float(v(()))
    for n in range(1, n_max + 1):
        layer = 0.0
        for idx in itertools.product(range(space.size), repeat=n):
            layer += float(v(idx))
        total += layer * dx**n / math.factorial(n)
    return total


def set_kl(f: GridRfs, g: GridRfs) -> float:
    """Set KL divergence between two grid densities on the same space."""
    if f.space.size != g.space.size or f.space.dx != g.space.dx:
        raise ValueError("densities must share a grid")
    dx = f.space.dx
    total = 0.0
    for n in range(f.n_max + 1):
        fw = f.weights[n].reshape(-1)
        gw = (
            g.weights[n].reshape(-1)
            if n <= g.n_max
            else np.zeros_like(fw)
        )
        mask = fw > 0.0
        if np.any(gw[mask] <= 0.0):
            raise ValueError("KL undefined: density is not absolutely continuous")
        vals = fw[mask] * np.log(fw[mask] / gw[mask])
        total += float(vals.sum()) * dx**n / math.factorial(n)
    return total


def best_ppp(f: GridRfs) -> np.ndarray:
    """Intensity of the closest Poisson process, which is the first moment."""
    return f.phd()


def best_iid_cluster(f: GridRfs) -> tuple:
    """Cardinality pmf and spatial density of the closest iid cluster."""
    card = f.cardinality()
    phd = f.phd()
    mass = float(phd.sum() * f.space.dx)
    if mass <= 0.0:
        raise ValueError("density has no spatial mass")
    return card, phd / mass


def _log_matched_sum(g_values: np.ndarray) -> float:
    """log of the permanent-style sum over component permutations."""
    n = g_values.shape[0]
    total = 0.0
    for perm in itertools.permutations(range(n)):
        prod = 1.0
        for i, j in enumerate(perm):
            prod *= g_values[i, j]
        total += prod
    if total <= 0.0:
        raise ValueError("KL undefined: density is not absolutely continuous")
    return math.log(total)


def verify_decomposition(
    space: GridSpace, mixture_globals, g_components, n_max: int | None = None
) -> tuple:
    """Check the Bernoulli decomposition of the set cross entropy.

    ``mixture_globals`` is a list of (weight, components) pairs where each
    components list holds (r, density) Bernoullis; every global must carry
    as many components as ``g_components``. Returns the direct objective
    (negative expected log density by set integral), the decomposed
    objective (explicit sums over globals and component permutations),
    and their gap, which must equal sum_n p_f(n) log (N - n)!.
    """
    n_g = len(g_components)
    if n_g == 0:
        raise ValueError("need at least one candidate component")
    for _, comps in mixture_globals:
        if len(comps) != n_g:
            raise ValueError("every global must have one Bernoulli per component")
    if n_max is None:
        n_max = n_g
    if n_max < n_g:
        raise ValueError("n_max must cover the component count")

    f = mbm_grid(space, mixture_globals)
    g = mb_grid(space, g_components)
    dx = space.dx

    lhs = 0.0
    for n in range(f.n_max + 1):
        fw = f.weights[n].reshape(-1)
        gw = g.weights[n].reshape(-1)
        mask = fw > 0.0
        if np.any(gw[mask] <= 0.0):
            raise ValueError("KL undefined: density is not absolutely continuous")
        lhs -= float((fw[mask] * np.log(gw[mask])).sum()) * dx**n / math.factorial(n)

    g_rs = np.array([float(r) for r, _ in g_components])
    g_ps = np.stack([normalize_density(space, d) for _, d in g_components])
    total_w = sum(w for w, _ in mixture_globals)

    rhs = 0.0
    k = space.size
    for weight, comps in mixture_globals:
        wa = weight / total_w
        f_rs = np.array([float(r) for r, _ in comps])
        f_ps = np.stack([normalize_density(space, d) for _, d in comps])
        for cells in itertools.product(range(-1, k), repeat=n_g):
            prob = wa
            jac = 1.0
            g_vals = np.empty((n_g, n_g))
            for i, cell in enumerate(cells):
                if cell < 0:
                    prob *= 1.0 - f_rs[i]
                    g_vals[i] = 1.0 - g_rs
                else:
                    prob *= f_rs[i] * f_ps[i, cell]
                    jac *= dx
                    g_vals[i] = g_rs * g_ps[:, cell]
            if prob == 0.0:
                continue
            rhs -= prob * jac * _log_matched_sum(g_vals)

    card = f.cardinality()
    expected = sum(
        p * math.log(math.factorial(n_g - n)) for n, p in enumerate(card)
    )
    gap = lhs - rhs
    if abs(gap - expected) > DECOMPOSITION_TOL:
        raise NumericsError(
            "decomposition gap %.3e deviates from %.3e" % (gap, expected)
        )
    return lhs, rhs, gap
