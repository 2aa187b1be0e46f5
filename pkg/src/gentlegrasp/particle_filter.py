"""Particle filter for the friction coefficient.

The state is a scalar random walk clamped to ``[mu_min, mu_max]``. The only
observation is the MER tangential resultant, expected to be
``mu * F_n * (1 - cf_target)``. Note that at the controller's equilibrium
(cf == cf_target) this observation agrees with whatever the current estimate
is, so information about the true coefficient arrives mainly through
transients and slip.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .contact import NO_CONTACT_EPS, MerForces
from .exceptions import InvalidConfig

logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EstimatorConfig:
    num_particles: int = 200
    mu_min: float = 0.05
    mu_max: float = 2.0
    sigma_p: float = 0.01
    sigma_o: float = 0.1
    cf_target: float = 0.25
    resample_threshold_fraction: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.num_particles) != self.num_particles or self.num_particles < 2:
            raise InvalidConfig(f"num_particles must be an integer >= 2, got {self.num_particles!r}")
        if not 0 < self.mu_min < self.mu_max:
            raise InvalidConfig(f"need 0 < mu_min < mu_max, got {self.mu_min!r}, {self.mu_max!r}")
        if not self.sigma_p >= 0:
            raise InvalidConfig(f"sigma_p must be >= 0, got {self.sigma_p!r}")
        if not self.sigma_o > 0:
            raise InvalidConfig(f"sigma_o must be > 0, got {self.sigma_o!r}")
        if not 0 < self.cf_target < 1:
            raise InvalidConfig(f"cf_target must lie in (0, 1), got {self.cf_target!r}")
        if not 0 < self.resample_threshold_fraction <= 1:
            raise InvalidConfig(
                f"resample_threshold_fraction must lie in (0, 1], got {self.resample_threshold_fraction!r}"
            )
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < 2**64:
            raise InvalidConfig(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed!r}")
        object.__setattr__(self, "num_particles", int(self.num_particles))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))


@dataclass(eq=False)
class ParticleSet:
    particles: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    weights_reset: bool = False  # last update underflowed and fell back to uniform
    resampled: bool = False

    def __len__(self):
        return len(self.particles)


class FrictionEstimate(NamedTuple):
    mean: float
    ci_low: float
    ci_high: float
    ess: float


class Observation(NamedTuple):
    mer: MerForces


def init(config: EstimatorConfig) -> ParticleSet:
    rng = np.random.default_rng(config.rng_seed)
    m = config.num_particles
    particles = rng.uniform(config.mu_min, config.mu_max, size=m)
    return ParticleSet(particles, np.full(m, 1.0 / m), rng)


def predict(pset: ParticleSet, config: EstimatorConfig) -> ParticleSet:
    """Random-walk transition, clamped to the friction bounds."""
    particles = pset.particles
    if config.sigma_p > 0:
        particles = particles + pset.rng.normal(0.0, config.sigma_p, size=len(particles))
    particles = np.clip(particles, config.mu_min, config.mu_max)
    return replace(pset, particles=particles, weights_reset=False, resampled=False)


def expected_tangential(mu, f_mer_n, cf_target):
    return mu * f_mer_n * (1.0 - cf_target)


def likelihood(residual, sigma_o):
    """Gaussian density N(residual; 0, sigma_o**2)."""
    residual = np.asarray(residual, dtype=float)
    out = np.exp(-0.5 * (residual / sigma_o) ** 2) / (sigma_o * _SQRT_2PI)
    return out if out.ndim else float(out)


def update(pset: ParticleSet, obs: Observation, config: EstimatorConfig) -> ParticleSet:
    """Reweight by the tangential-force likelihood and renormalize.

    Observations with a normal resultant below the no-contact guard carry no
    information and leave the weights untouched.
    """
    f_n, z = obs.mer
    if f_n < NO_CONTACT_EPS:
        return replace(pset, weights_reset=False)
    residual = z - expected_tangential(pset.particles, f_n, config.cf_target)
    weights = pset.weights * likelihood(residual, config.sigma_o)
    total = weights.sum()
    if not (total > 0 and math.isfinite(total)):
        logger.warning("all particle weights underflowed (z=%.4g, F_n=%.4g); resetting to uniform", z, f_n)
        m = len(weights)
        return replace(pset, weights=np.full(m, 1.0 / m), weights_reset=True)
    return replace(pset, weights=weights / total, weights_reset=False)


def effective_sample_size(pset: ParticleSet) -> float:
    m = len(pset.weights)
    return float(min(m, max(1.0, 1.0 / np.dot(pset.weights, pset.weights))))


def systematic_indices(weights, u0):
    """Indices picked by systematic resampling with offset ``u0`` in [0, 1/M)."""
    m = len(weights)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    positions = u0 + np.arange(m) / m
    return np.minimum(np.searchsorted(cdf, positions, side="right"), m - 1)


def resample(pset: ParticleSet) -> ParticleSet:
    m = len(pset.particles)
    idx = systematic_indices(pset.weights, pset.rng.uniform(0.0, 1.0 / m))
    return replace(pset, particles=pset.particles[idx], weights=np.full(m, 1.0 / m), resampled=True)


def weighted_quantile(values, weights, q):
    """Smallest value whose cumulative weight reaches ``q``; ``q`` may be a sequence."""
    order = np.argsort(values, kind="stable")
    cdf = np.cumsum(weights[order])
    # the shrink factor keeps exact ties on the lower value despite round-off
    k = np.searchsorted(cdf, np.asarray(q) * cdf[-1] * (1 - 1e-12), side="left")
    picked = values[order][np.minimum(k, len(values) - 1)]
    return picked.tolist() if picked.ndim else float(picked)


def estimate(pset: ParticleSet) -> FrictionEstimate:
    w, p = pset.weights, pset.particles
    mean = float(np.dot(w, p))
    lo, hi = weighted_quantile(p, w, (0.05, 0.95))
    # a skewed cloud can put the mean outside the percentile band
    return FrictionEstimate(mean, min(lo, mean), max(hi, mean), effective_sample_size(pset))


def step(pset: ParticleSet, obs: Observation, config: EstimatorConfig):
    """One filter cycle: predict, update, resample if degenerate, estimate."""
    pset = predict(pset, config)
    pset = update(pset, obs, config)
    if effective_sample_size(pset) < config.resample_threshold_fraction * len(pset):
        reset = pset.weights_reset
        pset = resample(pset)
        pset.weights_reset = reset
    return pset, estimate(pset)
