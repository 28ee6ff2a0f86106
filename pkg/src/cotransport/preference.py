"""Subjective cost model and choice probabilities under parameter uncertainty.

Humans weight collision risk through a single-parameter probability
weighting curve (curvature gamma) and perceive distance through a power
law (exponent alpha).  Both parameters are uncertain: integrating the
preferred-option indicator over a uniform (alpha, gamma) box yields a
probability distribution over path options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Calibrated uniform uncertainty ranges for (alpha, gamma).
DEFAULT_ALPHA_RANGE = (0.55, 0.95)
DEFAULT_GAMMA_RANGE = (0.5, 1.1)

DEFAULT_GRID_N = 400


@dataclass(frozen=True)
class PreferenceParams:
    """One human's perception exponents."""

    alpha: float
    gamma: float

    def __post_init__(self):
        if self.alpha <= 0 or self.gamma <= 0:
            raise ValueError("alpha and gamma must be positive")


@dataclass(frozen=True)
class ParamBox:
    """Axis-aligned uniform uncertainty box over (alpha, gamma)."""

    alpha_lo: float = DEFAULT_ALPHA_RANGE[0]
    alpha_hi: float = DEFAULT_ALPHA_RANGE[1]
    gamma_lo: float = DEFAULT_GAMMA_RANGE[0]
    gamma_hi: float = DEFAULT_GAMMA_RANGE[1]

    def __post_init__(self):
        if not (0 < self.alpha_lo < self.alpha_hi):
            raise ValueError("need 0 < alpha_lo < alpha_hi")
        if not (0 < self.gamma_lo < self.gamma_hi):
            raise ValueError("need 0 < gamma_lo < gamma_hi")

    def contains(self, params: PreferenceParams) -> bool:
        return (self.alpha_lo <= params.alpha <= self.alpha_hi
                and self.gamma_lo <= params.gamma <= self.gamma_hi)


DEFAULT_BOX = ParamBox()


@dataclass(frozen=True)
class ChoiceDistribution:
    """Per-option choice probabilities; counts retain the exact grid tally."""

    probs: dict
    counts: dict = field(default_factory=dict)
    total: int = 0

    def __post_init__(self):
        for p in self.probs.values():
            if not -1e-12 <= p <= 1 + 1e-12:
                raise ValueError(f"probability {p} outside [0, 1]")
        if self.probs and abs(sum(self.probs.values()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    def __getitem__(self, key):
        return self.probs[key]

    def total_variation(self, other: "ChoiceDistribution") -> float:
        keys = set(self.probs) | set(other.probs)
        return 0.5 * sum(abs(self.probs.get(k, 0.0) - other.probs.get(k, 0.0))
                         for k in keys)


def perceived_risk(risk, gamma):
    """Probability weighting exp(-(-ln s)^gamma); fixes s=0 -> 0 and s=1 -> 1."""
    if np.isscalar(risk) and np.isscalar(gamma):
        if not 0.0 <= risk <= 1.0:
            raise ValueError(f"risk {risk} outside [0, 1]")
        if risk == 0.0:
            return 0.0
        if risk == 1.0:
            return 1.0
        return math.exp(-((-math.log(risk)) ** gamma))
    risk = np.asarray(risk, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.exp(-((-np.log(risk)) ** gamma))
    return np.where(risk == 0.0, 0.0, np.where(risk == 1.0, 1.0, out))


def perceived_distance(distance, alpha):
    """Power-law distance perception d**alpha."""
    if np.isscalar(distance) and distance < 0:
        raise ValueError("distance must be non-negative")
    return distance ** alpha


def subjective_cost(distance, risk, params: PreferenceParams, risk_weight: float):
    """Perceived distance plus weighted perceived risk."""
    return (perceived_distance(distance, params.alpha)
            + risk_weight * perceived_risk(risk, params.gamma))


def preferred_option(costs: dict):
    """Option id with the lowest cost; ties break to the lowest id."""
    if not costs:
        raise ValueError("no options to choose from")
    return min(costs, key=lambda k: (costs[k], k))


# Midpoint grids and per-risk weighting curves are cached: during a
# simulation the option risks and the box stay fixed while distances
# change every step.
_axis_cache: dict = {}
_risk_curve_cache: dict = {}


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    key = (lo, hi, n)
    hit = _axis_cache.get(key)
    if hit is None:
        edges = np.linspace(lo, hi, n + 1)
        hit = 0.5 * (edges[:-1] + edges[1:])
        _axis_cache[key] = hit
    return hit


def _risk_curve(risk: float, gamma_lo: float, gamma_hi: float, n: int) -> np.ndarray:
    key = (risk, gamma_lo, gamma_hi, n)
    hit = _risk_curve_cache.get(key)
    if hit is None:
        if len(_risk_curve_cache) > 8192:
            _risk_curve_cache.clear()
        hit = perceived_risk(risk, _midpoints(gamma_lo, gamma_hi, n))
        hit.setflags(write=False)
        _risk_curve_cache[key] = hit
    return hit


def _as_option_map(options) -> dict:
    if isinstance(options, dict):
        return options
    return {i: pair for i, pair in enumerate(options, start=1)}


def choice_distribution(options, box: ParamBox, risk_weight: float,
                        grid_n: int = DEFAULT_GRID_N) -> ChoiceDistribution:
    """Integrate the preferred-option indicator over the parameter box.

    options: mapping id -> (distance, risk), or a sequence of pairs keyed
    1..n.  Uses a grid_n x grid_n midpoint grid; each cell votes for its
    lowest-subjective-cost option (ties to the lowest id), and the
    probability of an option is its share of cells.
    """
    opts = _as_option_map(options)
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    if not opts:
        raise ValueError("need at least one option")
    keys = sorted(opts)
    alphas = _midpoints(box.alpha_lo, box.alpha_hi, grid_n)
    costs = np.empty((len(keys), grid_n, grid_n))
    for i, key in enumerate(keys):
        dist, risk = opts[key]
        d_term = np.asarray(dist, dtype=float) ** alphas
        s_term = risk_weight * _risk_curve(float(risk), box.gamma_lo, box.gamma_hi, grid_n)
        costs[i] = d_term[:, None] + s_term[None, :]
    winner = np.argmin(costs, axis=0)  # first minimum = lowest id
    tally = np.bincount(winner.ravel(), minlength=len(keys))
    total = grid_n * grid_n
    return ChoiceDistribution(
        probs={k: int(c) / total for k, c in zip(keys, tally)},
        counts={k: int(c) for k, c in zip(keys, tally)},
        total=total,
    )


def mean_subjective_cost(distance, risk, box: ParamBox, risk_weight: float,
                         grid_n: int = DEFAULT_GRID_N) -> float:
    """Midpoint-rule average of the subjective cost over the parameter box.

    The integrand separates, so the double integral reduces to two 1-D
    midpoint averages.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    alphas = _midpoints(box.alpha_lo, box.alpha_hi, grid_n)
    d_mean = float(np.mean(np.asarray(distance, dtype=float) ** alphas))
    s_mean = float(np.mean(_risk_curve(float(risk), box.gamma_lo, box.gamma_hi, grid_n)))
    return d_mean + risk_weight * s_mean
