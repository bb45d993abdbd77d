"""Gaussian densities and the linear-Gaussian predict/update primitives.

Covariances are kept dense and symmetrized after every arithmetic step;
inverses and determinants go through a Cholesky factor with a single
jitter retry so that borderline matrices fail loudly instead of quietly
producing garbage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NumericsError

LOG_2PI = float(np.log(2.0 * np.pi))


def symmetrize(cov: np.ndarray) -> np.ndarray:
    return 0.5 * (cov + cov.T)


def chol_factor(cov: np.ndarray, context: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor with one jitter retry of 1e-9 * mean diagonal."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-9 * np.trace(cov) / cov.shape[0]
        if not np.isfinite(jitter) or jitter <= 0.0:
            raise NumericsError(
                f"{context} is not positive definite (trace={np.trace(cov):g})"
            ) from None
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise NumericsError(
                f"{context} is not positive definite (trace={np.trace(cov):g})"
            ) from exc


def chol_solve(chol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (L L^T) x = rhs given the lower factor L."""
    y = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, y)


def chol_logdet(chol: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


@dataclass
class Gaussian:
    """Multivariate normal with dense mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = symmetrize(np.asarray(self.cov, dtype=float))
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError(
                f"covariance shape {self.cov.shape} does not match state dim {d}"
            )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_pdf(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        chol = chol_factor(self.cov, "Gaussian covariance")
        diff = x - self.mean
        y = np.linalg.solve(chol, diff)
        return -0.5 * (self.dim * LOG_2PI + chol_logdet(chol) + float(y @ y))


@dataclass
class LinearGaussianModel:
    """Linear dynamics x' = F x + w and linear measurement z = H x + v."""

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        self.F = np.asarray(self.F, dtype=float)
        self.Q = symmetrize(np.asarray(self.Q, dtype=float))
        self.H = np.asarray(self.H, dtype=float)
        self.R = symmetrize(np.asarray(self.R, dtype=float))
        d = self.F.shape[0]
        m = self.H.shape[0]
        if self.F.shape != (d, d) or self.Q.shape != (d, d):
            raise ValueError("F and Q must be square with matching dimension")
        if self.H.shape != (m, d) or self.R.shape != (m, m):
            raise ValueError("H and R shapes are inconsistent with F")

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]

    @property
    def meas_dim(self) -> int:
        return self.H.shape[0]


def predict(g: Gaussian, model: LinearGaussianModel) -> Gaussian:
    """Chapman-Kolmogorov step for the linear-Gaussian transition."""
    mean = model.F @ g.mean
    cov = symmetrize(model.F @ g.cov @ model.F.T + model.Q)
    return Gaussian(mean, cov)


def innovation(g: Gaussian, model: LinearGaussianModel) -> tuple[np.ndarray, np.ndarray]:
    """Predicted measurement mean and innovation covariance."""
    z_hat = model.H @ g.mean
    s = symmetrize(model.H @ g.cov @ model.H.T + model.R)
    return z_hat, s


def update(
    g: Gaussian, z: np.ndarray, model: LinearGaussianModel
) -> tuple[Gaussian, float]:
    """Kalman update; returns the posterior and the measurement log-likelihood."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != model.meas_dim:
        raise ValueError(f"measurement dim {z.shape[0]} != model dim {model.meas_dim}")
    z_hat, s = innovation(g, model)
    chol = chol_factor(s, "innovation covariance")
    diff = z - z_hat
    gain = chol_solve(chol, model.H @ g.cov).T
    mean = g.mean + gain @ diff
    # Joseph form keeps the posterior covariance symmetric positive definite.
    eye = np.eye(g.dim)
    a = eye - gain @ model.H
    cov = symmetrize(a @ g.cov @ a.T + gain @ model.R @ gain.T)
    y = np.linalg.solve(chol, diff)
    log_lik = -0.5 * (model.meas_dim * LOG_2PI + chol_logdet(chol) + float(y @ y))
    return Gaussian(mean, cov), log_lik


def moment_match(weights: Sequence[float], components: Sequence[Gaussian]) -> Gaussian:
    """Single Gaussian with the mean and covariance of the weighted mixture.

    The covariance includes the spread-of-means term, so the first two
    moments of the mixture are preserved exactly.
    """
    w = np.asarray(weights, dtype=float)
    if len(components) == 0 or w.shape[0] != len(components):
        raise ValueError("weights and components must be non-empty and aligned")
    if np.any(w < 0.0):
        raise ValueError("mixture weights must be nonnegative")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("at least one mixture weight must be positive")
    w = w / total
    means = np.stack([c.mean for c in components])
    mean = w @ means
    cov = np.zeros_like(components[0].cov)
    for wi, ci in zip(w, components):
        diff = ci.mean - mean
        cov += wi * (ci.cov + np.outer(diff, diff))
    return Gaussian(mean, symmetrize(cov))


@dataclass
class GaussianMixture:
    """Weighted Gaussian mixture; weights are kept normalized."""

    weights: np.ndarray
    components: list[Gaussian] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.weights.shape[0] != len(self.components):
            raise ValueError("weights and components must be aligned")
        if len(self.components) == 0:
            raise ValueError("mixture must have at least one component")
        if np.any(self.weights < 0.0):
            raise ValueError("mixture weights must be nonnegative")
        total = float(self.weights.sum())
        if total <= 0.0:
            raise ValueError("at least one mixture weight must be positive")
        self.weights = self.weights / total

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def moment_matched(self) -> Gaussian:
        return moment_match(self.weights, self.components)

    def top_component(self) -> Gaussian:
        return self.components[int(np.argmax(self.weights))]


Density = Gaussian | GaussianMixture


def as_moments(density: Density) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a Gaussian or a (moment-matched) mixture."""
    if isinstance(density, Gaussian):
        return density.mean, density.cov
    matched = density.moment_matched()
    return matched.mean, matched.cov


def flatten_density(density: Density) -> tuple[np.ndarray, list[Gaussian]]:
    """Weights and Gaussian components of a density (singleton for a Gaussian)."""
    if isinstance(density, Gaussian):
        return np.ones(1), [density]
    return density.weights, list(density.components)


def cap_mixture(density: Density, cap: int) -> Density:
    """Limit a mixture to `cap` components, moment-matching the lightest tail."""
    if isinstance(density, Gaussian) or len(density.components) <= cap:
        return density
    if cap < 1:
        raise ValueError("mixture cap must be at least 1")
    order = np.argsort(-density.weights, kind="stable")
    keep = order[: cap - 1]
    tail = order[cap - 1 :]
    tail_w = density.weights[tail]
    tail_g = moment_match(tail_w, [density.components[i] for i in tail])
    weights = np.concatenate([density.weights[keep], [tail_w.sum()]])
    comps = [density.components[i] for i in keep] + [tail_g]
    if len(comps) == 1:
        return comps[0]
    return GaussianMixture(weights, comps)
