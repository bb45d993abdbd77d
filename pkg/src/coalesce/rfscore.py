"""Containers for multi-Bernoulli mixture posteriors over track sets.

A track is a Bernoulli component with one or more data-association
hypotheses; a global hypothesis picks one hypothesis per track.  Hypothesis
ids are opaque integers from a per-run monotone counter so that logs and
serialized dumps are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidStateError
from .gauss import Density, Gaussian, GaussianMixture


@dataclass
class IdGen:
    """Monotone id source for tracks and hypotheses within one filter run."""

    next_track: int = 0
    next_hyp: int = 0

    def track_id(self) -> int:
        tid = self.next_track
        self.next_track += 1
        return tid

    def hyp_id(self) -> int:
        hid = self.next_hyp
        self.next_hyp += 1
        return hid


@dataclass
class BernoulliGaussian:
    """Bernoulli existence probability with a Gaussian (or mixture) density."""

    r: float
    density: Density

    def __post_init__(self) -> None:
        self.r = float(self.r)
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"existence probability {self.r} outside [0, 1]")


@dataclass
class Hypothesis:
    """Single-target hypothesis of a track with its marginal probability."""

    hyp_id: int
    bernoulli: BernoulliGaussian
    marginal: float = 0.0


@dataclass
class Track:
    track_id: int
    hypotheses: list[Hypothesis] = field(default_factory=list)

    def hypothesis(self, hyp_id: int) -> Hypothesis:
        for hyp in self.hypotheses:
            if hyp.hyp_id == hyp_id:
                return hyp
        raise KeyError(f"track {self.track_id} has no hypothesis {hyp_id}")

    def max_existence(self) -> float:
        if not self.hypotheses:
            return 0.0
        return max(h.bernoulli.r for h in self.hypotheses)

    def expected_existence(self) -> float:
        return float(sum(h.marginal * h.bernoulli.r for h in self.hypotheses))


@dataclass
class GlobalHypothesis:
    """One hypothesis id per track, in track order, with a normalized weight."""

    weight: float
    selection: tuple[int, ...]


@dataclass
class MultiBernoulliMixture:
    tracks: list[Track] = field(default_factory=list)
    globals: list[GlobalHypothesis] = field(default_factory=list)

    def validate(self) -> None:
        for g in self.globals:
            if len(g.selection) != len(self.tracks):
                raise InvalidStateError(
                    "global hypothesis selection length does not match track count"
                )
            for track, hyp_id in zip(self.tracks, g.selection):
                track.hypothesis(hyp_id)
        if self.globals:
            total = sum(g.weight for g in self.globals)
            if not np.isclose(total, 1.0, rtol=0.0, atol=1e-6):
                raise InvalidStateError(f"global weights sum to {total}, not 1")


def marginals_from_globals(mbm: MultiBernoulliMixture) -> MultiBernoulliMixture:
    """Fill per-track hypothesis marginals p_i(h) by summing global weights.

    Weights are renormalized first; hypotheses never selected get marginal 0.
    """
    if not mbm.globals:
        raise InvalidStateError("cannot compute marginals without global hypotheses")
    total = sum(g.weight for g in mbm.globals)
    if total <= 0.0:
        raise InvalidStateError("global hypothesis weights sum to zero")
    for i, track in enumerate(mbm.tracks):
        sums = {hyp.hyp_id: 0.0 for hyp in track.hypotheses}
        for g in mbm.globals:
            sums[g.selection[i]] += g.weight / total
        for hyp in track.hypotheses:
            hyp.marginal = sums[hyp.hyp_id]
    return mbm


def cardinality_distribution(existence: "np.ndarray | list[float]") -> np.ndarray:
    """Pmf of the number of existing targets for independent Bernoulli tracks."""
    rs = np.asarray(existence, dtype=float).reshape(-1)
    if np.any(rs < 0.0) or np.any(rs > 1.0):
        raise ValueError("existence probabilities must lie in [0, 1]")
    pmf = np.array([1.0])
    for r in rs:
        pmf = np.convolve(pmf, [1.0 - r, r])
    return pmf


def _density_to_json(density: Density) -> dict:
    if isinstance(density, Gaussian):
        return {"kind": "gaussian", "mean": density.mean.tolist(), "cov": density.cov.tolist()}
    return {
        "kind": "mixture",
        "weights": density.weights.tolist(),
        "components": [
            {"mean": c.mean.tolist(), "cov": c.cov.tolist()} for c in density.components
        ],
    }


def _density_from_json(obj: dict) -> Density:
    if obj["kind"] == "gaussian":
        return Gaussian(np.array(obj["mean"]), np.array(obj["cov"]))
    comps = [Gaussian(np.array(c["mean"]), np.array(c["cov"])) for c in obj["components"]]
    return GaussianMixture(np.array(obj["weights"]), comps)


def to_jsonl(mbm: MultiBernoulliMixture) -> str:
    """Line-oriented JSON debug dump: one track per line, then the globals."""
    lines = []
    for track in mbm.tracks:
        lines.append(
            json.dumps(
                {
                    "type": "track",
                    "track_id": track.track_id,
                    "hypotheses": [
                        {
                            "hyp_id": h.hyp_id,
                            "r": h.bernoulli.r,
                            "marginal": h.marginal,
                            "density": _density_to_json(h.bernoulli.density),
                        }
                        for h in track.hypotheses
                    ],
                }
            )
        )
    lines.append(
        json.dumps(
            {
                "type": "globals",
                "entries": [
                    {"weight": g.weight, "selection": list(g.selection)} for g in mbm.globals
                ],
            }
        )
    )
    return "\n".join(lines) + "\n"


def from_jsonl(text: str) -> MultiBernoulliMixture:
    tracks: list[Track] = []
    globals_: list[GlobalHypothesis] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        if obj["type"] == "track":
            hyps = [
                Hypothesis(
                    h["hyp_id"],
                    BernoulliGaussian(h["r"], _density_from_json(h["density"])),
                    h["marginal"],
                )
                for h in obj["hypotheses"]
            ]
            tracks.append(Track(obj["track_id"], hyps))
        elif obj["type"] == "globals":
            globals_ = [
                GlobalHypothesis(e["weight"], tuple(e["selection"])) for e in obj["entries"]
            ]
    return MultiBernoulliMixture(tracks, globals_)
