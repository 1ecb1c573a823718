"""One-dimensional Gaussian mixtures whose components share a single variance.

Parameters travel between map layers as :class:`GmmParams`; fitting goes
through :func:`fit_em` or the scikit-learn compatible
:class:`SharedVarianceGMM`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_generator, check_positive_int, check_samples_1d

__all__ = [
    "GmmParams",
    "SharedVarianceGMM",
    "fit_em",
    "log_likelihood",
    "aic",
    "select_j",
    "cdf",
    "sample",
    "sort_components",
]

_LOG_2PI = math.log(2.0 * math.pi)
_DEAD_WEIGHT = 1e-6


@dataclass(frozen=True, eq=False)
class GmmParams:
    """Immutable mixture parameters: means, weights and the shared std.

    Fitted and merged models always have ascending means; unsorted
    parameters are accepted so that :func:`sort_components` has something to
    act on.
    """

    means: np.ndarray
    weights: np.ndarray
    sigma: float

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64).reshape(-1)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if means.size == 0 or means.shape != weights.shape:
            raise ValueError("means and weights must be non-empty and of equal length")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(weights))):
            raise ValueError("means and weights must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must be non-negative and sum to 1 (sum={weights.sum()!r})")
        sigma = float(self.sigma)
        if not (np.isfinite(sigma) and sigma > 0):
            raise ValueError(f"sigma must be positive, got {sigma!r}")
        means.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_components(self) -> int:
        return self.means.size

    J = n_components

    @property
    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.means) >= 0))

    def __eq__(self, other):
        if not isinstance(other, GmmParams):
            return NotImplemented
        return (
            self.sigma == other.sigma
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def __repr__(self):
        return f"GmmParams(J={self.J}, sigma={self.sigma:.6g}, means={np.round(self.means, 4).tolist()})"

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        z = (x[..., None] - self.means) / self.sigma
        comp = -0.5 * z * z - math.log(self.sigma) - 0.5 * _LOG_2PI
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logsumexp(comp + logw, axis=-1)

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def cdf(self, t):
        return cdf(self, t)

    def to_dict(self) -> dict:
        """Flat JSON form, keys in the order ``J, sigma, means, weights``."""
        return {
            "J": self.J,
            "sigma": self.sigma,
            "means": self.means.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GmmParams":
        params = cls(doc["means"], doc["weights"], doc["sigma"])
        if "J" in doc and int(doc["J"]) != params.J:
            raise ValueError(f"J={doc['J']} does not match {params.J} means")
        return params


def _as_samples(samples) -> np.ndarray:
    return check_samples_1d(getattr(samples, "chi_samples", samples))


def sort_components(params: GmmParams) -> GmmParams:
    """Relabel components by ascending mean; ties keep their original order."""
    order = np.argsort(params.means, kind="stable")
    return GmmParams(params.means[order], params.weights[order], params.sigma)


def log_likelihood(params: GmmParams, samples) -> float:
    """Total log-likelihood ``sum_n log sum_j pi_j N(x_n | mu_j, sigma)``."""
    x = _as_samples(samples)
    return float(np.sum(params.logpdf(x)))


def n_parameters(n_components: int) -> int:
    """Free parameters: J means, J - 1 weights and one shared variance."""
    return 2 * n_components


def aic(params: GmmParams, samples) -> float:
    return 2.0 * n_parameters(params.J) - 2.0 * log_likelihood(params, samples)


def cdf(params: GmmParams, t):
    """Mixture CDF ``sum_j pi_j Phi((t - mu_j) / sigma)``."""
    t = np.asarray(t, dtype=np.float64)
    out = ndtr((t[..., None] - params.means) / params.sigma) @ params.weights
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sample(params: GmmParams, n: int, rng_seed=None) -> np.ndarray:
    """``n`` i.i.d. draws: pick a component by weight, then a normal draw."""
    n = check_positive_int(n, "n")
    rng = as_generator(rng_seed)
    comp = rng.choice(params.J, size=n, p=params.weights)
    return params.means[comp] + params.sigma * rng.standard_normal(n)


# --------------------------------------------------------------------------
# EM


@dataclass
class EmResult:
    params: GmmParams
    log_likelihoods: list[float]
    converged: bool

    @property
    def n_iter(self) -> int:
        return len(self.log_likelihoods) - 1


def _kmeanspp_init(x, n_components, rng, var_floor):
    """k-means++ seeding of the means, uniform weights, pooled variance."""
    n = x.size
    centers = np.empty(n_components)
    centers[0] = x[rng.integers(n)]
    d2 = (x - centers[0]) ** 2
    for j in range(1, n_components):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers[j] = x[idx]
        np.minimum(d2, (x - centers[j]) ** 2, out=d2)
    var = max(float(d2.mean()), var_floor)
    return np.sort(centers), np.full(n_components, 1.0 / n_components), var


class _EStep:
    """Reusable buffers for the E-step on a fixed (centered) sample."""

    def __init__(self, x, n_components):
        self.x = x
        self.buf = np.empty((n_components, x.size))
        self.colmax = np.empty(x.size)
        self.colsum = np.empty(x.size)

    def run(self, means, weights, var):
        """Fill ``self.buf`` with responsibilities; return (log-lik, per-sample log p)."""
        buf = self.buf
        np.subtract(self.x[None, :], means[:, None], out=buf)
        np.square(buf, out=buf)
        buf *= -0.5 / var
        with np.errstate(divide="ignore"):
            buf += (np.log(weights) - 0.5 * (_LOG_2PI + math.log(var)))[:, None]
        np.max(buf, axis=0, out=self.colmax)
        buf -= self.colmax
        np.exp(buf, out=buf)
        np.sum(buf, axis=0, out=self.colsum)
        buf /= self.colsum
        logp = np.log(self.colsum) + self.colmax
        return float(logp.sum()), logp


def _m_step(x, x2_sum, resp, var_floor):
    n = x.size
    nk = resp.sum(axis=1)
    safe = np.maximum(nk, np.finfo(float).tiny)
    means = (resp @ x) / safe
    weights = nk / n
    weights /= weights.sum()
    # pooled responsibility-weighted variance: sum_n x_n^2 - sum_j N_j mu_j^2
    var = (x2_sum - float(nk @ (means * means))) / n
    return means, weights, max(var, var_floor)


def _em_run(x, means, weights, var, tol, max_iter, var_floor) -> tuple:
    estep = _EStep(x, means.size)
    x2_sum = float(x @ x)
    history = []
    converged = False
    for _ in range(max_iter):
        ll, logp = estep.run(means, weights, var)
        if history and abs(ll - history[-1]) <= tol * abs(ll):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        means, weights, var = _m_step(x, x2_sum, estep.buf, var_floor)
        dead = weights < _DEAD_WEIGHT
        if np.any(dead):
            means, weights = _rescue(estep, means, weights, var, dead, logp)
    else:
        ll, _ = estep.run(means, weights, var)
        history.append(ll)
    return means, weights, var, history, converged


def _rescue(estep, means, weights, var, dead, logp):
    """Move dead components onto the worst-explained samples.

    The move is kept only if it does not lower the likelihood, so the EM
    sequence stays monotone.
    """
    current, _ = estep.run(means, weights, var)
    new_means = means.copy()
    new_weights = weights.copy()
    worst = np.argsort(logp, kind="stable")
    for slot, j in enumerate(np.flatnonzero(dead)):
        new_means[j] = estep.x[worst[slot]]
        new_weights[j] = max(new_weights[j], 1.0 / estep.x.size)
    new_weights /= new_weights.sum()
    candidate, _ = estep.run(new_means, new_weights, var)
    if candidate >= current:
        return new_means, new_weights
    return means, weights


def _fit_em(x, n_components, tol, max_iter, n_init, sigma_floor, rng) -> EmResult:
    if x.size < 2 * n_components:
        raise ValueError(
            f"need at least {2 * n_components} samples for {n_components} components, got {x.size}"
        )
    shift = float(x.mean())
    xc = x - shift
    span = float(x.max() - x.min())
    floor_sigma = sigma_floor * (span if span > 0 else max(1.0, abs(shift)))
    var_floor = floor_sigma**2
    best = None
    for _ in range(n_init):
        means, weights, var = _kmeanspp_init(xc, n_components, rng, var_floor)
        run = _em_run(xc, means, weights, var, tol, max_iter, var_floor)
        if best is None or run[3][-1] > best[3][-1]:
            best = run
    means, weights, var, history, converged = best
    params = sort_components(GmmParams(means + shift, weights, math.sqrt(var)))
    return EmResult(params, history, converged)


def fit_em(
    samples,
    n_components: int,
    *,
    tol: float = 1e-6,
    max_iter: int = 200,
    n_init: int = 3,
    sigma_floor: float = 1e-6,
    rng_seed=None,
) -> GmmParams:
    """Maximum-likelihood shared-variance mixture by EM.

    Each of ``n_init`` runs starts from k-means++ seeded means; the run with
    the highest final log-likelihood wins.  A run stops when the relative
    log-likelihood change drops to ``tol`` or after ``max_iter`` iterations.
    The shared standard deviation never falls below ``sigma_floor`` times
    the data range.
    """
    x = _as_samples(samples)
    n_components = check_positive_int(n_components, "n_components")
    rng = as_generator(rng_seed)
    return _fit_em(x, n_components, tol, max_iter, n_init, sigma_floor, rng).params


def select_j(samples, j_max: int, *, plateau: float = 0.005, rng_seed=None, **em_options) -> int:
    """Smallest component count after which AIC stops improving.

    Fits J = 1..j_max.  When adding the J-th component improves AIC by
    less than ``plateau`` (relative to the AIC at J - 1), J - 1 is returned.
    Without such a plateau the AIC minimizer is returned.
    """
    j_max = check_positive_int(j_max, "j_max")
    if j_max == 1:
        return 1
    x = _as_samples(samples)
    rng = as_generator(rng_seed)
    scores = []
    for j in range(1, j_max + 1):
        params = fit_em(x, j, rng_seed=rng, **em_options)
        scores.append(aic(params, x))
        if j > 1:
            prev, cur = scores[-2], scores[-1]
            if prev - cur < plateau * abs(prev):
                return j - 1
    return int(np.argmin(scores)) + 1


class SharedVarianceGMM(DensityMixin, BaseEstimator):
    """scikit-learn estimator wrapper around :func:`fit_em`.

    Parameters
    ----------
    n_components : int, default=7
        Number of mixture components J.
    tol : float, default=1e-6
        Relative log-likelihood change that stops EM.
    max_iter : int, default=200
        EM iteration cap per initialization.
    n_init : int, default=3
        Number of k-means++ initializations; the best likelihood is kept.
    sigma_floor : float, default=1e-6
        Lower bound on the shared standard deviation, as a fraction of the
        data range.
    random_state : int, Generator or None

    Attributes
    ----------
    params_ : GmmParams
    log_likelihood_history_ : list of float
        Total log-likelihood after every EM iteration of the retained run.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, n_components=7, tol=1e-6, max_iter=200, n_init=3, sigma_floor=1e-6, random_state=None):
        self.n_components = n_components
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.sigma_floor = sigma_floor
        self.random_state = random_state

    def fit(self, X, y=None):
        x = _as_samples(X)
        check_positive_int(self.n_components, "n_components")
        check_positive_int(self.n_init, "n_init")
        check_positive_int(self.max_iter, "max_iter")
        rng = as_generator(self.random_state)
        result = _fit_em(x, self.n_components, self.tol, self.max_iter, self.n_init, self.sigma_floor, rng)
        self.params_ = result.params
        self.log_likelihood_history_ = result.log_likelihoods
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        return self

    @property
    def means_(self):
        check_is_fitted(self, "params_")
        return self.params_.means

    @property
    def weights_(self):
        check_is_fitted(self, "params_")
        return self.params_.weights

    @property
    def sigma_(self):
        check_is_fitted(self, "params_")
        return self.params_.sigma

    def score_samples(self, X):
        check_is_fitted(self, "params_")
        return self.params_.logpdf(_as_samples(X))

    def score(self, X, y=None):
        """Mean per-sample log-likelihood."""
        return float(np.mean(self.score_samples(X)))

    def aic(self, X):
        check_is_fitted(self, "params_")
        return aic(self.params_, X)

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        x = _as_samples(X)
        p = self.params_
        logp = -0.5 * ((x[:, None] - p.means) / p.sigma) ** 2
        with np.errstate(divide="ignore"):
            logp = logp + np.log(p.weights)
        return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "params_")
        return sample(self.params_, n_samples, random_state)

    def cdf(self, t):
        check_is_fitted(self, "params_")
        return cdf(self.params_, t)
