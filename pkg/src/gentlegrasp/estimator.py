"""scikit-learn style front ends for the contact model and the friction filter."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import particle_filter as pf
from .contact import ContactPatch, MerForces, mer_forces
from .validation import check_observations


class MerTransformer(TransformerMixin, BaseEstimator):
    """Map a sequence of ``ContactPatch`` frames to rows of (F_MER,n, F_MER,t)."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows = []
        for patch in X:
            if not isinstance(patch, ContactPatch):
                raise TypeError(f"expected ContactPatch, got {type(patch).__name__}")
            rows.append(mer_forces(patch))
        return np.asarray(rows, dtype=float).reshape(-1, 2)


class ParticleFrictionEstimator(BaseEstimator):
    """Online friction-coefficient estimator over an observation stream.

    ``X`` is an array of shape (n_ticks, 2) holding (F_MER,n, F_MER,t) per
    tick. ``fit`` starts from the prior and filters the whole stream;
    ``partial_fit`` continues from the current particle cloud. ``transform``
    also continues the stream and returns one row per tick with columns
    (mean, ci_low, ci_high, ess).

    Example
    -------
    >>> est = ParticleFrictionEstimator(random_state=3).fit([[10.0, 3.75]] * 30)
    >>> round(est.mu_hat_, 1)
    0.5
    """

    def __init__(
        self,
        n_particles=200,
        mu_min=0.05,
        mu_max=2.0,
        sigma_p=0.01,
        sigma_o=0.1,
        cf_target=0.25,
        resample_threshold=0.5,
        random_state=0,
    ):
        self.n_particles = n_particles
        self.mu_min = mu_min
        self.mu_max = mu_max
        self.sigma_p = sigma_p
        self.sigma_o = sigma_o
        self.cf_target = cf_target
        self.resample_threshold = resample_threshold
        self.random_state = random_state

    def _config(self):
        return pf.EstimatorConfig(
            num_particles=self.n_particles,
            mu_min=self.mu_min,
            mu_max=self.mu_max,
            sigma_p=self.sigma_p,
            sigma_o=self.sigma_o,
            cf_target=self.cf_target,
            resample_threshold_fraction=self.resample_threshold,
            rng_seed=self.random_state,
        )

    def _filter(self, X):
        X = check_observations(X)
        config = self.config_
        out = np.empty((len(X), 4))
        pset = self.particle_set_
        for i, (f_n, f_t) in enumerate(X):
            pset, est = pf.step(pset, pf.Observation(MerForces(f_n, f_t)), config)
            out[i] = est
        self.particle_set_ = pset
        self.estimate_ = pf.FrictionEstimate(*(float(v) for v in out[-1]))
        self.n_ticks_ = getattr(self, "n_ticks_", 0) + len(X)
        return out

    def fit(self, X, y=None):
        self.config_ = self._config()
        self.particle_set_ = pf.init(self.config_)
        self.n_ticks_ = 0
        self.trace_ = self._filter(X)
        return self

    def partial_fit(self, X, y=None):
        if not hasattr(self, "particle_set_"):
            self.config_ = self._config()
            self.particle_set_ = pf.init(self.config_)
        self.trace_ = self._filter(X)
        return self

    def transform(self, X):
        if not hasattr(self, "particle_set_"):
            raise NotFittedError("call fit or partial_fit before transform")
        return self._filter(X)

    def fit_transform(self, X, y=None):
        return self.fit(X).trace_

    @property
    def mu_hat_(self):
        if not hasattr(self, "estimate_"):
            raise NotFittedError("estimator has not seen any observations")
        return self.estimate_.mean

    @property
    def particles_(self):
        return self.particle_set_.particles

    @property
    def weights_(self):
        return self.particle_set_.weights
