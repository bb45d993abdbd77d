"""Benchmark scenario generation for closely-spaced target tracking.

Targets follow a planar nominally-constant-velocity model and are forced
into close proximity at the midpoint of the run: each trajectory is
initialized at the midpoint and propagated forward with the usual
dynamics and backward with the time-reversed draw
x_{t-1} = F^{-1} (x_t - w), w ~ N(0, Q).  Measurements are positions with
unit-variance noise plus uniform Poisson false alarms over the region.

The backward pass uses fresh process noise rather than conditioning on
the forward trajectory; this is the natural reading of "running forward
and backward dynamics" from a midpoint draw.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gauss import LinearGaussianModel

CASE_CHOICES = (1, 2)
N_TARGETS_GRID = (6, 10, 20)
PD_GRID = (0.3, 0.5, 0.7, 0.98)
LAMBDA_FA_GRID = (10.0, 40.0, 80.0)
HORIZON_DEFAULT = 201
MIDPOINT_DEFAULT = 100
REGION_DEFAULT = ((-100.0, 100.0), (-100.0, 100.0))
CASE1_MIDPOINT_VAR = 1e-6
CASE2_MIDPOINT_VAR = 0.25


def constant_velocity_model(
    q: float = 0.01, dt: float = 1.0, meas_var: float = 1.0
) -> LinearGaussianModel:
    """Planar constant-velocity model with position measurements.

    State ordering is (px, py, vx, vy).  The transition and process-noise
    blocks are the standard white-acceleration discretization with power
    spectral density ``q`` and sampling period ``dt``; measurements are
    position corrupted by isotropic noise of variance ``meas_var``.
    """
    f2 = np.array([[1.0, dt], [0.0, 1.0]])
    q2 = q * np.array(
        [[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]]
    )
    eye2 = np.eye(2)
    f_mat = np.kron(f2, eye2)
    q_mat = np.kron(q2, eye2)
    h_mat = np.hstack([eye2, np.zeros((2, 2))])
    r_mat = meas_var * eye2
    return LinearGaussianModel(f_mat, q_mat, h_mat, r_mat)


@dataclass
class ScenarioConfig:
    """Parameters of one benchmark scenario.

    ``case`` selects the midpoint initialization: case 1 draws all state
    components with variance 1e-6 (targets indistinguishable at t=100,
    the worst case for coalescence) and all targets exist for the whole
    run; case 2 uses variance 0.25 and staggers births at
    {0, 10, ..., 10(n-1)} capped at the midpoint.  Values outside the
    benchmark grids require ``custom=True``.
    """

    case: int = 1
    n_targets: int = 6
    pd: float = 0.7
    lambda_fa: float = 10.0
    horizon: int = HORIZON_DEFAULT
    midpoint: int = MIDPOINT_DEFAULT
    region: tuple = REGION_DEFAULT
    seed: object = 0
    custom: bool = False

    def __post_init__(self) -> None:
        if self.case not in CASE_CHOICES:
            raise ValueError(f"case must be one of {CASE_CHOICES}")
        self.region = tuple(tuple(float(v) for v in axis) for axis in self.region)
        for lo, hi in self.region:
            if not lo < hi:
                raise ValueError("region bounds must satisfy lo < hi")
        if not 0 <= self.midpoint < self.horizon:
            raise ValueError("midpoint must lie within the horizon")
        if self.n_targets < 0:
            raise ValueError("n_targets must be nonnegative")
        if not 0.0 <= self.pd <= 1.0:
            raise ValueError("detection probability must lie in [0, 1]")
        if self.lambda_fa < 0.0:
            raise ValueError("false-alarm rate must be nonnegative")
        if not self.custom:
            on_grid = (
                self.n_targets in N_TARGETS_GRID
                and any(np.isclose(self.pd, v) for v in PD_GRID)
                and any(np.isclose(self.lambda_fa, v) for v in LAMBDA_FA_GRID)
                and self.horizon == HORIZON_DEFAULT
                and self.midpoint == MIDPOINT_DEFAULT
            )
            if not on_grid:
                raise ValueError(
                    "parameters are off the benchmark grid; pass custom=True"
                )

    def birth_times(self) -> list[int]:
        if self.case == 1:
            return [0] * self.n_targets
        return [min(10 * i, self.midpoint) for i in range(self.n_targets)]

    def midpoint_variance(self) -> float:
        return CASE1_MIDPOINT_VAR if self.case == 1 else CASE2_MIDPOINT_VAR


@dataclass
class Trial:
    """Ground truth and measurements of one Monte Carlo run.

    ``states[i]`` holds target i's state sequence from its birth time to
    the end of the horizon, one row per step; ``measurements[t]`` is the
    (m_t, 2) array of position measurements at step t, target-originated
    detections first (in target order) followed by false alarms.
    """

    config: ScenarioConfig
    births: list[int]
    states: list[np.ndarray]
    measurements: list[np.ndarray]

    def alive(self, t: int) -> list[int]:
        """Indices of targets that exist at step t."""
        return [i for i, b in enumerate(self.births) if b <= t]

    def truth_at(self, t: int) -> np.ndarray:
        """Stacked states of the targets alive at step t, shape (n_t, 4)."""
        rows = [self.states[i][t - self.births[i]] for i in self.alive(t)]
        if not rows:
            return np.zeros((0, 4))
        return np.stack(rows)


def generate_trial(
    config: ScenarioConfig, model: LinearGaussianModel | None = None
) -> Trial:
    """Draw one trial: trajectories from the midpoint, then measurements.

    All randomness comes from a single generator seeded by
    ``config.seed`` in a fixed draw order, so identical configs produce
    identical trials.
    """
    model = model or constant_velocity_model()
    rng = np.random.default_rng(config.seed)
    f_mat = model.F
    dim = f_mat.shape[0]
    if np.allclose(model.Q, 0.0):
        noise_chol = np.zeros_like(model.Q)
    else:
        noise_chol = np.linalg.cholesky(model.Q)
    meas_chol = np.linalg.cholesky(model.R)
    mid_sd = np.sqrt(config.midpoint_variance())

    births = config.birth_times()
    states: list[np.ndarray] = []
    for birth in births:
        traj = np.zeros((config.horizon, dim))
        traj[config.midpoint] = mid_sd * rng.standard_normal(dim)
        for t in range(config.midpoint, config.horizon - 1):
            w = noise_chol @ rng.standard_normal(dim)
            traj[t + 1] = f_mat @ traj[t] + w
        for t in range(config.midpoint, birth, -1):
            w = noise_chol @ rng.standard_normal(dim)
            traj[t - 1] = np.linalg.solve(f_mat, traj[t] - w)
        states.append(traj[birth:].copy())

    lows = np.array([axis[0] for axis in config.region])
    spans = np.array([axis[1] - axis[0] for axis in config.region])
    meas_dim = model.H.shape[0]
    measurements: list[np.ndarray] = []
    for t in range(config.horizon):
        rows = []
        for i, birth in enumerate(births):
            if birth > t:
                continue
            if rng.random() < config.pd:
                noise = meas_chol @ rng.standard_normal(meas_dim)
                rows.append(model.H @ states[i][t - birth] + noise)
        n_fa = rng.poisson(config.lambda_fa)
        for _ in range(n_fa):
            rows.append(lows + spans * rng.random(meas_dim))
        if rows:
            measurements.append(np.stack(rows))
        else:
            measurements.append(np.zeros((0, meas_dim)))
    return Trial(config, births, states, measurements)


def config_to_dict(config: ScenarioConfig) -> dict:
    seed = config.seed
    if isinstance(seed, tuple):
        seed = list(seed)
    return {
        "case": config.case,
        "n_targets": config.n_targets,
        "pd": config.pd,
        "lambda_fa": config.lambda_fa,
        "horizon": config.horizon,
        "midpoint": config.midpoint,
        "region": [list(axis) for axis in config.region],
        "seed": seed,
        "custom": config.custom,
    }


def config_from_dict(obj: dict) -> ScenarioConfig:
    seed = obj["seed"]
    if isinstance(seed, list):
        seed = tuple(seed)
    return ScenarioConfig(
        case=obj["case"],
        n_targets=obj["n_targets"],
        pd=obj["pd"],
        lambda_fa=obj["lambda_fa"],
        horizon=obj["horizon"],
        midpoint=obj["midpoint"],
        region=tuple(tuple(axis) for axis in obj["region"]),
        seed=seed,
        custom=obj["custom"],
    )


def trial_to_json(trial: Trial) -> str:
    """Lossless JSON dump of a trial (floats round-trip exactly)."""
    payload = {
        "config": config_to_dict(trial.config),
        "births": list(trial.births),
        "states": [s.tolist() for s in trial.states],
        "measurements": [m.tolist() for m in trial.measurements],
    }
    return json.dumps(payload)


def trial_from_json(text: str) -> Trial:
    obj = json.loads(text)
    meas_dim = 2
    measurements = []
    for entry in obj["measurements"]:
        arr = np.array(entry, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, meas_dim)
        measurements.append(arr)
    return Trial(
        config=config_from_dict(obj["config"]),
        births=list(obj["births"]),
        states=[np.array(s, dtype=float) for s in obj["states"]],
        measurements=measurements,
    )
