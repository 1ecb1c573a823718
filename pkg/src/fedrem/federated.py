"""Update rules for the two map layers.

Local maps blend a freshly fitted (temporal) mixture into the stored one
with a capped sample weight; the global map takes a sample-weighted average
of the platoons' local mixtures.  Components are matched by rank after
sorting by mean, and the shared standard deviation is averaged directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int
from .gmm import GmmParams, sort_components
from .rem import RemEntry

__all__ = ["LearningConfig", "n_th", "local_update", "fed_avg_merge", "weighted_average"]


@dataclass(frozen=True)
class LearningConfig:
    """``k`` caps the stored model's weight at ``k * n_s`` samples."""

    k: int = 5
    n_s: int = 4096

    def __post_init__(self):
        check_positive_int(self.k, "k")
        check_positive_int(self.n_s, "n_s")


def n_th(n_r: int, k: int, n_s: int) -> int:
    """Effective weight of the stored model: ``min(n_r, k * n_s)``."""
    if n_r < 0 or k < 0 or n_s < 0:
        raise ValueError("n_r, k and n_s must be non-negative")
    return min(int(n_r), int(k) * int(n_s))


def _check_same_j(models):
    js = {m.J for m in models}
    if len(js) != 1:
        raise ValueError(f"component counts differ: {sorted(js)}")


def weighted_average(models, weights) -> GmmParams:
    """Component-wise weighted mean of sorted mixtures.

    Every parameter is combined with compensated summation so the result
    does not depend on the order of ``models``.
    """
    models = [sort_components(m) for m in models]
    _check_same_j(models)
    w = [float(v) for v in weights]
    if any(v < 0 for v in w):
        raise ValueError("weights must be non-negative")
    total = math.fsum(w)
    if not total > 0:
        raise ValueError("weights must not all be zero")

    def avg(values):
        if all(v == values[0] for v in values):
            return float(values[0])
        return math.fsum(wi * vi for wi, vi in zip(w, values)) / total

    J = models[0].J
    means = [avg([m.means[j] for m in models]) for j in range(J)]
    mix = np.array([avg([m.weights[j] for m in models]) for j in range(J)])
    sigma = avg([m.sigma for m in models])
    return sort_components(GmmParams(means, mix, sigma))


def local_update(old: RemEntry | None, temporal: GmmParams, cfg: LearningConfig) -> RemEntry:
    """Blend a temporal fit of ``cfg.n_s`` new samples into a local entry.

    Without a stored entry the temporal model is taken as is.
    """
    if old is None:
        return RemEntry(sort_components(temporal), cfg.n_s)
    if old.model.J != temporal.J:
        raise ValueError(f"component counts differ: stored J={old.model.J}, temporal J={temporal.J}")
    weight_old = n_th(old.n_samples_Nr, cfg.k, cfg.n_s)
    if weight_old == 0:
        model = sort_components(temporal)
    else:
        model = weighted_average([old.model, temporal], [weight_old, cfg.n_s])
    return RemEntry(model, old.n_samples_Nr + cfg.n_s)


def fed_avg_merge(local_models) -> GmmParams:
    """Merge ``[(model, n_th_u), ...]`` into one global mixture."""
    local_models = list(local_models)
    if not local_models:
        raise ValueError("nothing to merge")
    models, weights = zip(*local_models)
    return weighted_average(models, weights)
