"""Variational multi-Bernoulli reduction.

Reduces a multi-Bernoulli mixture over N tracks to a single N-component
multi-Bernoulli by coordinate descent on a KL upper bound: the M-step
moment-matches each output Bernoulli-Gaussian to the hypothesis mass its
column currently claims, and the E-step reassigns hypothesis mass by
solving a transportation LP whose cost C(h, j) is the set cross-entropy
of hypothesis h under output component j.  With the temperature at 0 the
E-step is the plain LP; a positive temperature smooths the E-step into
an entropy-regularized plan computed by Sinkhorn scaling (experimental).

Rows are indexed by hypothesis id, so hypotheses shared between tracks
(identical ids) pool their marginals into a single supply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import NumericsError
from .gauss import (
    LOG_2PI,
    Gaussian,
    GaussianMixture,
    as_moments,
    cap_mixture,
    chol_factor,
    chol_logdet,
    flatten_density,
    symmetrize,
)
from .rfscore import BernoulliGaussian, Track

R_CLAMP = 1e-9
MIXTURE_CAP_DEFAULT = 10


@dataclass
class VmbConfig:
    """Knobs for the reduction loop."""

    max_iters: int = 100
    rel_tol: float = 1e-6
    temperature: float = 0.0
    mixture_cap: int = MIXTURE_CAP_DEFAULT
    eps_final: float | None = None

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.rel_tol < 0.0:
            raise ValueError("rel_tol must be nonnegative")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must lie in [0, 1]")
        if self.mixture_cap < 1:
            raise ValueError("mixture_cap must be at least 1")


@dataclass
class VmbState:
    """Working state of one reduction: coupling, moments, and diagnostics."""

    row_ids: list[int]
    supplies: np.ndarray
    r: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    densities: list
    q: np.ndarray
    reduced_r: np.ndarray = field(default_factory=lambda: np.empty(0))
    reduced_means: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    reduced_covs: np.ndarray = field(default_factory=lambda: np.empty((0, 0, 0)))
    objective_trace: list[float] = field(default_factory=list)
    temperature: float = 0.0
    iterations: int = 0

    @property
    def n_rows(self) -> int:
        return len(self.row_ids)

    @property
    def n_cols(self) -> int:
        return self.q.shape[1]

    def reduced(self) -> list[BernoulliGaussian]:
        """The Bernoulli-Gaussian reduction as component objects."""
        return [
            BernoulliGaussian(
                float(self.reduced_r[j]),
                Gaussian(self.reduced_means[j], self.reduced_covs[j]),
            )
            for j in range(self.n_cols)
        ]


def vmb_init(tracks: list[Track]) -> VmbState:
    """Initialize the coupling from per-track hypothesis marginals.

    q(h, j) starts at p_j(h), the marginal of hypothesis h in track j;
    the row supply is p_h = sum_j p_j(h).
    """
    if not tracks:
        raise ValueError("reduction needs at least one track")
    row_ids: list[int] = []
    index: dict[int, int] = {}
    rs: list[float] = []
    means: list[np.ndarray] = []
    covs: list[np.ndarray] = []
    densities: list = []
    for track in tracks:
        for hyp in track.hypotheses:
            if hyp.hyp_id not in index:
                index[hyp.hyp_id] = len(row_ids)
                row_ids.append(hyp.hyp_id)
                mean, cov = as_moments(hyp.bernoulli.density)
                rs.append(hyp.bernoulli.r)
                means.append(mean)
                covs.append(cov)
                densities.append(hyp.bernoulli.density)
    n = len(tracks)
    q = np.zeros((len(row_ids), n))
    for j, track in enumerate(tracks):
        for hyp in track.hypotheses:
            q[index[hyp.hyp_id], j] += hyp.marginal
    return VmbState(
        row_ids=row_ids,
        supplies=q.sum(axis=1),
        r=np.array(rs),
        means=np.stack(means),
        covs=np.stack(covs),
        densities=densities,
        q=q,
    )


def m_step(state: VmbState) -> VmbState:
    """Moment-match each output component to its column of the coupling.

    r_j = sum_h q(h,j) r_h, and the Gaussian moments are the existence-
    weighted mean and covariance (with spread-of-means term).  A column
    whose existence mass vanishes keeps the plain q-weighted moments so
    later cost evaluations stay finite.
    """
    q = state.q
    qr = q * state.r[:, None]
    r_hat = qr.sum(axis=0)
    weights = np.where(r_hat[None, :] > 0.0, qr, q)
    norm = weights.sum(axis=0)
    if np.any(norm <= 0.0):
        raise NumericsError("a reduction column received no hypothesis mass")
    weights = weights / norm[None, :]
    means = weights.T @ state.means
    d = state.means.shape[1]
    covs = np.empty((state.n_cols, d, d))
    for j in range(state.n_cols):
        diff = state.means - means[j]
        covs[j] = symmetrize(
            np.einsum("h,hij->ij", weights[:, j], state.covs)
            + np.einsum("h,hi,hj->ij", weights[:, j], diff, diff)
        )
    state.reduced_r = r_hat
    state.reduced_means = means
    state.reduced_covs = covs
    return state


def e_step_cost(hyp: BernoulliGaussian, comp: BernoulliGaussian) -> float:
    """Set cross-entropy cost of one hypothesis under one reduced component.

    C(h,j) = -(1-r_h) log(1-r_j) - r_h log r_j
             + (r_h/2) [tr(S_j^-1 S_h) + (m_h-m_j)^T S_j^-1 (m_h-m_j)
                        + log|2 pi S_j|]
    with r_j clamped away from {0, 1} and 0 log 0 read as 0.
    """
    r_h = hyp.r
    mean_h, cov_h = as_moments(hyp.density)
    r_j = min(max(comp.r, R_CLAMP), 1.0 - R_CLAMP)
    mean_j, cov_j = as_moments(comp.density)
    cost = 0.0
    if r_h < 1.0:
        cost -= (1.0 - r_h) * math.log1p(-r_j)
    if r_h > 0.0:
        cost -= r_h * math.log(r_j)
        chol = chol_factor(cov_j, "reduced covariance")
        diff = np.linalg.solve(chol, mean_h - mean_j)
        trace = float(np.trace(np.linalg.solve(cov_j, cov_h)))
        d = mean_h.shape[0]
        gauss = trace + float(diff @ diff) + d * LOG_2PI + chol_logdet(chol)
        cost += 0.5 * r_h * gauss
    return cost


def _cost_matrix(state: VmbState) -> np.ndarray:
    """Vectorized E-step cost for all hypothesis/component pairs."""
    r_h = state.r
    r_j = np.clip(state.reduced_r, R_CLAMP, 1.0 - R_CLAMP)
    cost = -np.outer(1.0 - r_h, np.log1p(-r_j)) - np.outer(r_h, np.log(r_j))
    d = state.means.shape[1]
    gauss = np.empty((state.n_rows, state.n_cols))
    for j in range(state.n_cols):
        chol = chol_factor(state.reduced_covs[j], "reduced covariance")
        logdet = chol_logdet(chol)
        inv = np.linalg.inv(state.reduced_covs[j])
        diffs = state.means - state.reduced_means[j]
        quad = np.einsum("hi,ij,hj->h", diffs, inv, diffs)
        traces = np.einsum("ij,hji->h", inv, state.covs)
        gauss[:, j] = traces + quad + d * LOG_2PI + logdet
    return cost + 0.5 * r_h[:, None] * gauss


def _sinkhorn(
    cost: np.ndarray, supplies: np.ndarray, temperature: float
) -> np.ndarray:
    """Entropy-regularized transport plan via log-domain Sinkhorn scaling."""
    log_p = np.where(supplies > 0.0, np.log(np.maximum(supplies, 1e-300)), -np.inf)
    log_k = -cost / temperature
    f = np.zeros(cost.shape[0])
    g = np.zeros(cost.shape[1])
    for _ in range(10_000):
        f = log_p - logsumexp(log_k + g[None, :], axis=1)
        g = -logsumexp(log_k + f[:, None], axis=0)
        plan = np.exp(log_k + f[:, None] + g[None, :])
        if np.abs(plan.sum(axis=1) - supplies).max() < 1e-12:
            break
    return plan


def coupling_bound(state: VmbState) -> float:
    """KL upper bound at the state's coupling and reduced components."""
    return float(np.sum(_cost_matrix(state) * state.q))


def vmb_reduce(
    tracks: list[Track],
    config: VmbConfig | None = None,
    init_components: list[BernoulliGaussian] | None = None,
) -> VmbState:
    """Run the reduction loop until LP progress stalls.

    Alternates the moment-matching M-step with the transport E-step,
    recording the LP objective each iteration; stops when the relative
    improvement falls under ``rel_tol`` or after ``max_iters``.  The
    returned state carries the final coupling, the Bernoulli-Gaussian
    reduction consistent with it, and the objective trace.

    ``init_components`` optionally seeds the first E-step with given
    output components instead of the ones moment-matched from the
    initial coupling; descent from a second starting point can land in
    a better local minimum of the same bound (compare ``coupling_bound``
    across runs to pick a winner).
    """
    from .transport import solve_transport

    config = config or VmbConfig()
    state = vmb_init(tracks)
    state.temperature = config.temperature
    seeded = init_components is not None
    if seeded:
        if len(init_components) != state.n_cols:
            raise ValueError("needs one initial component per track")
        moments = [as_moments(c.density) for c in init_components]
        state.reduced_r = np.array([c.r for c in init_components])
        state.reduced_means = np.stack([m for m, _ in moments])
        state.reduced_covs = np.stack([c for _, c in moments])
    previous = None
    for _ in range(config.max_iters):
        if seeded:
            seeded = False
        else:
            m_step(state)
        cost = _cost_matrix(state)
        if config.temperature > 0.0:
            state.q = _sinkhorn(cost, state.supplies, config.temperature)
            objective = float(np.sum(cost * state.q))
        else:
            plan = solve_transport(cost, state.supplies, config.eps_final)
            held = float(np.sum(cost * state.q))
            if plan.objective <= held:
                state.q = plan.q
                objective = plan.objective
            else:
                objective = held
        state.objective_trace.append(objective)
        state.iterations += 1
        if previous is not None and previous - objective <= config.rel_tol * max(
            1.0, abs(previous)
        ):
            break
        previous = objective
    m_step(state)
    return state


def mixture_components(
    state: VmbState, cap: int = MIXTURE_CAP_DEFAULT
) -> list[BernoulliGaussian]:
    """Mixture-retaining variant of the reduction.

    Component j keeps the blended set density g_j = sum_h q(h,j) f_h: its
    existence is r_j from the M-step and its spatial density is the
    existence-weighted mixture of the hypothesis densities, capped to
    ``cap`` Gaussians by merging the lightest tail.
    """
    out = []
    for j in range(state.n_cols):
        # Column masses can land a few ulp above 1 after the LP round trip.
        r_j = min(float(state.reduced_r[j]), 1.0)
        if r_j <= 0.0:
            out.append(
                BernoulliGaussian(
                    0.0, Gaussian(state.reduced_means[j], state.reduced_covs[j])
                )
            )
            continue
        weights: list[float] = []
        comps: list[Gaussian] = []
        for h in range(state.n_rows):
            mass = state.q[h, j] * state.r[h]
            if mass <= 0.0:
                continue
            w_k, g_k = flatten_density(state.densities[h])
            weights.extend(mass * w_k)
            comps.extend(g_k)
        density = cap_mixture(GaussianMixture(np.array(weights), comps), cap)
        out.append(BernoulliGaussian(r_j, density))
    return out
