"""Smoothing CoV-weighting of the three expert scores.

For each score type the coefficient of variation over a candidate group
measures how much that expert discriminates between candidates. A
temperature softmax over the three CoVs yields convex weights, and each
candidate's combined score is the weighted sum of its expert scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .experts import OracleScores

EPS = 1e-8
DEFAULT_TAU = 1.0
TAU_GRID = (0.2, 0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class CovStats:
    mu: float
    sigma: float
    cov: float


@dataclass(frozen=True)
class CovWeights:
    alpha_f: float
    alpha_h: float
    alpha_c: float
    tau: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha_f, self.alpha_h, self.alpha_c)


UNIFORM = CovWeights(1 / 3, 1 / 3, 1 / 3, math.inf)


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_index: int
    oracle: OracleScores
    s: float


def cov(values: Sequence[float], eps: float = EPS) -> CovStats:
    """Population mean, population std and std / (|mean| + eps)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("cov of an empty list")
    mu = float(x.mean())
    sigma = float(x.std())
    return CovStats(mu, sigma, sigma / (abs(mu) + eps))


def smooth_weights(c_f: float, c_h: float, c_c: float, tau: float = DEFAULT_TAU) -> CovWeights:
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = np.array([c_f, c_h, c_c], dtype=float) / tau
    e = np.exp(z - z.max())
    a = e / e.sum()
    return CovWeights(float(a[0]), float(a[1]), float(a[2]), tau)


def combine(scores: OracleScores, weights: CovWeights) -> float:
    return weights.alpha_f * scores.s_f + weights.alpha_h * scores.s_h + weights.alpha_c * scores.s_c


def group_stats(candidates: Sequence[OracleScores], eps: float = EPS) -> tuple[CovStats, CovStats, CovStats]:
    if not candidates:
        raise ValueError("cannot weight an empty candidate group")
    cols = list(zip(*(c.as_tuple() for c in candidates)))
    return cov(cols[0], eps), cov(cols[1], eps), cov(cols[2], eps)


def weight_group(candidates: Sequence[OracleScores], tau: float = DEFAULT_TAU, *,
                 weights: CovWeights | None = None,
                 uniform: bool = False) -> tuple[CovWeights, list[ScoredCandidate]]:
    """Weight one candidate group.

    ``weights`` forces a fixed weighting (e.g. statistics pooled over the whole
    dataset); ``uniform`` is the equal-thirds ablation, computed as the plain
    mean so that it matches the arithmetic mean exactly.
    """
    if not candidates:
        raise ValueError("cannot weight an empty candidate group")
    if uniform:
        scored = [ScoredCandidate(i, c, (c.s_f + c.s_h + c.s_c) / 3) for i, c in enumerate(candidates)]
        return UNIFORM, scored
    if weights is None:
        f, h, c = group_stats(candidates)
        weights = smooth_weights(f.cov, h.cov, c.cov, tau)
    return weights, [ScoredCandidate(i, c, combine(c, weights)) for i, c in enumerate(candidates)]
