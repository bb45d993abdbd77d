"""Data-association backbone: gating, hypothesis expansion, global
enumeration, clustering, and pruning.

A track coming into an update step carries one or more single-target
hypotheses.  Gating decides which measurements each track could have
produced, clusters group tracks that compete for the same measurements,
and expansion turns every (track, gated measurement) pair plus the
missed-detection event into child hypotheses with unnormalized log
weights.  Global hypotheses select one child per track subject to each
measurement being used at most once; they are enumerated exactly when
the feasible count is small and by Murty-style k-best ranking otherwise.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidStateError
from .gauss import Gaussian, GaussianMixture, LinearGaussianModel, flatten_density, innovation, update
from .rfscore import BernoulliGaussian, GlobalHypothesis, Hypothesis, IdGen, MultiBernoulliMixture, Track, marginals_from_globals

GATE_THRESHOLD_DEFAULT = 16.0
KBEST_CAP_DEFAULT = 200
BIRTH_INTENSITY_DEFAULT = 1e-4
BIRTH_VELOCITY_VAR_DEFAULT = 4.0
_DENSITY_FLOOR = 1e-300

MISS = -1


@dataclass
class AssociationProblem:
    """One scan's association inputs for a set of predicted tracks."""

    tracks: list[Track]
    measurements: np.ndarray
    model: LinearGaussianModel
    pd: float
    lambda_fa_density: float
    gate_threshold: float = GATE_THRESHOLD_DEFAULT

    def __post_init__(self) -> None:
        self.measurements = np.atleast_2d(np.asarray(self.measurements, dtype=float))
        if self.measurements.size == 0:
            self.measurements = self.measurements.reshape(0, self.model.H.shape[0])
        if not 0.0 <= self.pd <= 1.0:
            raise ValueError("detection probability must lie in [0, 1]")
        if self.lambda_fa_density < 0.0:
            raise ValueError("false-alarm density must be nonnegative")
        if self.gate_threshold <= 0.0:
            raise ValueError("gate threshold must be positive")


@dataclass
class Cluster:
    """Connected component of the gating graph."""

    track_indices: list[int]
    measurement_indices: list[int]


@dataclass(frozen=True)
class ChildHypothesis:
    """Single-target hypothesis produced by one association event.

    ``measurement`` is the index of the associated measurement, or
    ``MISS`` for the missed-detection event.  ``log_weight`` is the
    unnormalized event likelihood conditional on the parent hypothesis.
    """

    hyp_id: int
    bernoulli: BernoulliGaussian
    log_weight: float
    measurement: int
    parent: int


@dataclass
class ExpandedTrack:
    track_id: int
    children: list[ChildHypothesis] = field(default_factory=list)

    def child_by_id(self, hyp_id: int) -> ChildHypothesis:
        for child in self.children:
            if child.hyp_id == hyp_id:
                return child
        raise KeyError(f"track {self.track_id} has no child hypothesis {hyp_id}")


def gate(problem: AssociationProblem) -> np.ndarray:
    """Boolean track-by-measurement matrix of gating-test passes.

    A measurement gates to a track when its squared Mahalanobis distance
    under any mixture component of any hypothesis is within threshold.
    """
    n = len(problem.tracks)
    m = problem.measurements.shape[0]
    edges = np.zeros((n, m), dtype=bool)
    if m == 0:
        return edges
    z = problem.measurements
    for i, track in enumerate(problem.tracks):
        best = np.full(m, np.inf)
        for hyp in track.hypotheses:
            _, comps = flatten_density(hyp.bernoulli.density)
            for comp in comps:
                z_pred, s_cov = innovation(comp, problem.model)
                diff = z - z_pred
                sol = np.linalg.solve(s_cov, diff.T)
                d2 = np.einsum("ij,ji->i", diff, sol)
                best = np.minimum(best, d2)
        edges[i] = best <= problem.gate_threshold
    return edges


def build_clusters(edges: np.ndarray) -> tuple[list[Cluster], list[int]]:
    """Partition tracks into clusters sharing measurements.

    Returns the clusters (every track appears in exactly one, tracks with
    no gated measurement as singletons) and the indices of measurements
    gated to no track.
    """
    n, m = edges.shape
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in range(m):
        rows = np.flatnonzero(edges[:, k])
        for a, b in zip(rows[:-1], rows[1:]):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, Cluster] = {}
    for i in range(n):
        root = find(i)
        groups.setdefault(root, Cluster([], [])).track_indices.append(i)
    unclaimed = []
    for k in range(m):
        rows = np.flatnonzero(edges[:, k])
        if rows.size == 0:
            unclaimed.append(k)
        else:
            groups[find(int(rows[0]))].measurement_indices.append(k)
    clusters = [groups[root] for root in sorted(groups)]
    return clusters, unclaimed


def expand_hypotheses(
    track: Track,
    measurements: np.ndarray,
    gated: list[int],
    pd: float,
    lambda_fa_density: float,
    model: LinearGaussianModel,
    idgen: IdGen,
) -> ExpandedTrack:
    """Expand each hypothesis of a track into association-event children.

    The missed-detection child keeps the parent density with existence
    r(1-Pd)/(1-r*Pd) and weight 1-r*Pd.  Each gated measurement yields a
    detection child with existence 1, the Kalman-updated density, and
    weight r*Pd*N(z; z_pred, S)/lambda_fa_density.  Weights are returned
    as logs and are conditional on the parent hypothesis.
    """
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    expanded = ExpandedTrack(track.track_id)
    log_lambda = math.log(max(lambda_fa_density, _DENSITY_FLOOR))
    for hyp in track.hypotheses:
        r = hyp.bernoulli.r
        miss_mass = 1.0 - r * pd
        miss_r = r * (1.0 - pd) / miss_mass if miss_mass > 0.0 else 0.0
        log_miss = math.log(miss_mass) if miss_mass > 0.0 else -math.inf
        expanded.children.append(
            ChildHypothesis(
                idgen.hyp_id(),
                BernoulliGaussian(miss_r, hyp.bernoulli.density),
                log_miss,
                MISS,
                hyp.hyp_id,
            )
        )
        if r <= 0.0 or pd <= 0.0:
            continue
        comp_w, comps = flatten_density(hyp.bernoulli.density)
        with np.errstate(divide="ignore"):
            log_comp_w = np.log(comp_w)
        for k in gated:
            z = measurements[k]
            posts = []
            log_liks = np.empty(len(comps))
            for c, comp in enumerate(comps):
                post, log_lik = update(comp, z, model)
                posts.append(post)
                log_liks[c] = log_comp_w[c] + log_lik
            log_mix = float(logsumexp(log_liks))
            if len(posts) == 1:
                density = posts[0]
            else:
                density = GaussianMixture(np.exp(log_liks - log_mix), posts)
            log_det = math.log(r) + math.log(pd) + log_mix - log_lambda
            expanded.children.append(
                ChildHypothesis(
                    idgen.hyp_id(), BernoulliGaussian(1.0, density), log_det, k, hyp.hyp_id
                )
            )
    return expanded


def birth_track(
    z: np.ndarray,
    model: LinearGaussianModel,
    pd: float,
    lambda_fa_density: float,
    idgen: IdGen,
    birth_intensity: float = BIRTH_INTENSITY_DEFAULT,
    velocity_var: float = BIRTH_VELOCITY_VAR_DEFAULT,
) -> Track:
    """Tentative track for a measurement gated to no existing track.

    Existence is the single-point birth/false-alarm odds
    lambda_b*Pd/(lambda_fa_density + lambda_b*Pd); the density is centered
    on the measurement with a zero-mean velocity prior on the unobserved
    coordinates.  Written for selector-style measurement matrices.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    h_mat = model.H
    d = h_mat.shape[1]
    mean = h_mat.T @ z
    observed = h_mat.T @ h_mat
    cov = h_mat.T @ model.R @ h_mat + velocity_var * (np.eye(d) - observed)
    detect_rate = birth_intensity * pd
    denom = lambda_fa_density + detect_rate
    r = detect_rate / denom if denom > 0.0 else 0.0
    hyp = Hypothesis(idgen.hyp_id(), BernoulliGaussian(r, Gaussian(mean, cov)), 1.0)
    return Track(idgen.track_id(), [hyp])


def enumerate_globals(
    expanded: list[ExpandedTrack], cap: int = KBEST_CAP_DEFAULT
) -> list[GlobalHypothesis]:
    """All (or the cap best) measurement-exclusive child selections.

    Exact enumeration runs when at most ``cap`` selections are feasible;
    otherwise the ``cap`` highest-weight selections are found by Murty
    partitioning of the assignment problem.  Weights are normalized over
    the returned set; ranking ties break by lexicographic assignment
    order.
    """
    if cap < 1:
        raise ValueError("global-hypothesis cap must be at least 1")
    if not expanded:
        return [GlobalHypothesis(1.0, ())]
    entries = _enumerate_exact(expanded, cap)
    if entries is None:
        entries = _enumerate_kbest(expanded, cap)
    logs = np.array([lw for lw, _ in entries])
    total = float(logsumexp(logs))
    if not np.isfinite(total):
        raise InvalidStateError("all feasible global hypotheses have zero weight")
    weights = np.exp(logs - total)
    order = sorted(range(len(entries)), key=lambda i: (-weights[i], entries[i][1]))
    return [GlobalHypothesis(float(weights[i]), entries[i][1]) for i in order]


def _enumerate_exact(
    expanded: list[ExpandedTrack], cap: int
) -> list[tuple[float, tuple[int, ...]]] | None:
    """DFS over feasible selections, or None once more than cap exist."""
    out: list[tuple[float, tuple[int, ...]]] = []
    n = len(expanded)
    used: set[int] = set()
    selection: list[int] = []

    def recurse(i: int, log_w: float) -> None:
        if len(out) > cap:
            return
        if i == n:
            out.append((log_w, tuple(selection)))
            return
        for child in expanded[i].children:
            k = child.measurement
            if k != MISS:
                if k in used:
                    continue
                used.add(k)
            selection.append(child.hyp_id)
            recurse(i + 1, log_w + child.log_weight)
            selection.pop()
            if k != MISS:
                used.discard(k)

    recurse(0, 0.0)
    if len(out) > cap:
        return None
    return out


def _enumerate_kbest(
    expanded: list[ExpandedTrack], cap: int
) -> list[tuple[float, tuple[int, ...]]]:
    """Murty-style ranked enumeration of the cap best selections."""
    from scipy.optimize import linear_sum_assignment

    n = len(expanded)
    meas_ids = sorted(
        {c.measurement for t in expanded for c in t.children if c.measurement != MISS}
    )
    col_of = {k: j for j, k in enumerate(meas_ids)}
    m = len(meas_ids)
    width = m + n
    cost = np.full((n, width), np.inf)
    child_at: list[dict[int, ChildHypothesis]] = [{} for _ in range(n)]
    for i, t in enumerate(expanded):
        for child in t.children:
            col = m + i if child.measurement == MISS else col_of[child.measurement]
            if col in child_at[i]:
                raise ValueError(
                    "k-best enumeration needs one hypothesis per association event"
                )
            child_at[i][col] = child
            cost[i, col] = -child.log_weight

    def solve(
        forced: tuple[tuple[int, int], ...], banned: frozenset[tuple[int, int]]
    ) -> tuple[float, tuple[int, ...]] | None:
        matrix = cost.copy()
        for r, c in banned:
            matrix[r, c] = np.inf
        rows = np.arange(n)
        cols = np.arange(width)
        fixed = 0.0
        if forced:
            f_rows = [r for r, _ in forced]
            f_cols = [c for _, c in forced]
            fixed = float(cost[f_rows, f_cols].sum())
            rows = np.setdiff1d(rows, f_rows)
            cols = np.setdiff1d(cols, f_cols)
            matrix = matrix[np.ix_(rows, cols)]
        try:
            ri, ci = linear_sum_assignment(matrix)
        except ValueError:
            return None
        if not np.all(np.isfinite(matrix[ri, ci])):
            return None
        assign = {int(r): int(c) for r, c in forced}
        for a, b in zip(ri, ci):
            assign[int(rows[a])] = int(cols[b])
        total = fixed + float(matrix[ri, ci].sum())
        return total, tuple(assign[i] for i in range(n))

    heap: list[tuple[float, tuple[int, ...], int, tuple, frozenset]] = []
    counter = 0
    root = solve((), frozenset())
    if root is not None:
        heap.append((root[0], root[1], counter, (), frozenset()))
    out: list[tuple[float, tuple[int, ...]]] = []
    while heap and len(out) < cap:
        total, assign, _, forced, banned = heapq.heappop(heap)
        out.append((-total, _selection_from_columns(expanded, child_at, assign, m)))
        forced_rows = {r for r, _ in forced}
        prefix: list[tuple[int, int]] = list(forced)
        for i in range(n):
            if i in forced_rows:
                continue
            child_banned = banned | {(i, assign[i])}
            counter += 1
            solved = solve(tuple(prefix), child_banned)
            if solved is not None:
                heapq.heappush(
                    heap, (solved[0], solved[1], counter, tuple(prefix), child_banned)
                )
            prefix.append((i, assign[i]))
    return out


def _selection_from_columns(
    expanded: list[ExpandedTrack],
    child_at: list[dict[int, ChildHypothesis]],
    assign: tuple[int, ...],
    m: int,
) -> tuple[int, ...]:
    selection = []
    for i in range(len(expanded)):
        col = assign[i]
        selection.append(child_at[i][col].hyp_id)
    return tuple(selection)


def posterior_mixture(
    expanded: list[ExpandedTrack], globals_: list[GlobalHypothesis]
) -> MultiBernoulliMixture:
    """Assemble the posterior MBM with per-hypothesis marginals filled in."""
    tracks = []
    for ex in expanded:
        hyps = [Hypothesis(c.hyp_id, c.bernoulli, 0.0) for c in ex.children]
        tracks.append(Track(ex.track_id, hyps))
    mixture = MultiBernoulliMixture(tracks, list(globals_))
    marginals_from_globals(mixture)
    _drop_unreferenced(mixture)
    return mixture


def prune(
    mixture: MultiBernoulliMixture,
    hyp_weight_floor: float,
    track_existence_floor: float,
) -> MultiBernoulliMixture:
    """Remove weak globals and weak tracks, renormalizing weights.

    Globals with weight below the floor are deleted; tracks whose best
    hypothesis existence falls under the track floor are dropped from
    every global, with duplicate selections merged.
    """
    kept = [g for g in mixture.globals if g.weight >= hyp_weight_floor]
    if not kept:
        raise InvalidStateError("pruning removed every global hypothesis")
    total = sum(g.weight for g in kept)
    if total <= 0.0:
        raise InvalidStateError("surviving global hypotheses have zero weight")
    kept = [GlobalHypothesis(g.weight / total, g.selection) for g in kept]

    referenced: list[set[int]] = [set() for _ in mixture.tracks]
    for g in kept:
        for slot, hyp_id in enumerate(g.selection):
            referenced[slot].add(hyp_id)
    keep_slot = []
    for slot, track in enumerate(mixture.tracks):
        best = max(
            (h.bernoulli.r for h in track.hypotheses if h.hyp_id in referenced[slot]),
            default=0.0,
        )
        if best >= track_existence_floor:
            keep_slot.append(slot)

    merged: dict[tuple[int, ...], float] = {}
    for g in kept:
        sel = tuple(g.selection[s] for s in keep_slot)
        merged[sel] = merged.get(sel, 0.0) + g.weight
    globals_ = [GlobalHypothesis(w, sel) for sel, w in sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))]
    tracks = [
        Track(mixture.tracks[s].track_id, list(mixture.tracks[s].hypotheses))
        for s in keep_slot
    ]
    pruned = MultiBernoulliMixture(tracks, globals_)
    marginals_from_globals(pruned)
    _drop_unreferenced(pruned)
    return pruned


def _drop_unreferenced(mixture: MultiBernoulliMixture) -> None:
    """Drop hypotheses no surviving global selects."""
    for slot, track in enumerate(mixture.tracks):
        wanted = {g.selection[slot] for g in mixture.globals}
        track.hypotheses = [h for h in track.hypotheses if h.hyp_id in wanted]
