"""Combine-merge adaptation of a mixture model, with weight/covariance pruning.

Adapting to a drift fits a candidate mixture on warning-zone frames, takes
the union with the current model, merges components that have become
redundant, and optionally prunes components whose ``w**2 / var**2`` score is
negligible next to the best one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .em import EmConfig, select_k_bic
from .errors import DegenerateMergeError, RejectedInputError
from .mixture import VAR_FLOOR, GaussianComponent, MixtureModel


@dataclass(frozen=True)
class AdaptConfig:
    rho: float = 0.5
    tau_merge: float = 0.1
    tau_prune: float = 1e-4
    pruning_enabled: bool = True
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise RejectedInputError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.tau_merge > 0.0:
            raise RejectedInputError(f"tau_merge must be > 0, got {self.tau_merge}")
        if not (0.0 <= self.tau_prune < 1.0):
            raise RejectedInputError(f"tau_prune must lie in [0, 1), got {self.tau_prune}")


def combine(current: MixtureModel, candidate: MixtureModel, rho: float) -> MixtureModel:
    """Union of both component sets, weighted ``1 - rho`` and ``rho``."""
    if current.dim != candidate.dim:
        raise RejectedInputError(
            f"cannot combine models of dimension {current.dim} and {candidate.dim}"
        )
    w = np.concatenate([(1.0 - rho) * current.weights, rho * candidate.weights])
    return MixtureModel(
        w / w.sum(),
        np.vstack([current.means, candidate.means]),
        np.vstack([current.variances, candidate.variances]),
    )


def _merge_arrays(wa, ma, va, wb, mb, vb):
    w = wa + wb
    if not w > 0.0:
        raise DegenerateMergeError("cannot merge two components with zero total weight")
    mean = (wa * ma + wb * mb) / w
    second = (wa * (va + ma * ma) + wb * (vb + mb * mb)) / w
    return w, mean, second - mean * mean


def merge_pair(a: GaussianComponent, b: GaussianComponent) -> GaussianComponent:
    """Moment-matching merge: the result keeps the pair's mass, mean and second moment."""
    if a.dim != b.dim:
        raise RejectedInputError(f"cannot merge components of dimension {a.dim} and {b.dim}")
    w, mean, var = _merge_arrays(a.weight, a.mean, a.variances, b.weight, b.mean, b.variances)
    return GaussianComponent(w, mean, var)


def _symmetric_kl(ma, va, mb, vb) -> np.ndarray:
    # closed form for diagonal Gaussians; broadcasts over leading axes
    d2 = (ma - mb) ** 2
    return 0.5 * np.sum(va / vb + vb / va + d2 / vb + d2 / va - 2.0, axis=-1)


def dissimilarity(a: GaussianComponent, b: GaussianComponent) -> float:
    """Symmetric Kullback-Leibler divergence ``KL(a||b) + KL(b||a)``."""
    if a.dim != b.dim:
        raise RejectedInputError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(_symmetric_kl(a.mean, a.variances, b.mean, b.variances))


def merge_similar(model: MixtureModel, tau_merge: float) -> MixtureModel:
    """Greedily merge the closest pair while its dissimilarity is below ``tau_merge``.

    Distances are recomputed after every merge; ties go to the lowest
    ``(i, j)`` index pair. The merged component takes slot ``i``.
    """
    if model.n_components < 2:
        return model
    w = np.array(model.weights)
    mu = np.array(model.means)
    var = np.array(model.variances)
    dist = _symmetric_kl(mu[:, None, :], var[:, None, :], mu[None, :, :], var[None, :, :])
    alive = np.ones(w.size, dtype=bool)
    np.fill_diagonal(dist, np.inf)
    while alive.sum() > 1:
        masked = np.where(alive[:, None] & alive[None, :], dist, np.inf)
        i, j = divmod(int(np.argmin(masked)), w.size)  # row-major scan: lowest (i, j) on ties
        if not masked[i, j] < tau_merge:
            break
        w[i], mu[i], var[i] = _merge_arrays(w[i], mu[i], var[i], w[j], mu[j], var[j])
        var[i] = np.maximum(var[i], VAR_FLOOR)
        alive[j] = False
        row = _symmetric_kl(mu[i][None, :], var[i][None, :], mu, var)
        dist[i, :] = row
        dist[:, i] = row
        dist[i, i] = np.inf
    if alive.all():
        return model
    return MixtureModel(w[alive] / w[alive].sum(), mu[alive], var[alive])


def prune_scores(model: MixtureModel) -> np.ndarray:
    """``w_k**2 / (mean_j var_kj)**2`` per component."""
    return model.weights**2 / np.mean(model.variances, axis=1) ** 2


def prune(model: MixtureModel, tau_prune: float) -> MixtureModel:
    """Drop components scoring below ``tau_prune`` times the best score; never empties."""
    scores = prune_scores(model)
    best = int(np.argmax(scores))
    keep = scores >= tau_prune * scores[best]
    keep[best] = True
    if keep.all():
        return model
    return model.subset(np.flatnonzero(keep))


def adapt(current: MixtureModel, warning_frames, cfg: AdaptConfig = AdaptConfig()) -> MixtureModel:
    """Fit a candidate on ``warning_frames`` and fold it into ``current``."""
    candidate = select_k_bic(warning_frames, cfg.em)
    out = merge_similar(combine(current, candidate, cfg.rho), cfg.tau_merge)
    if cfg.pruning_enabled:
        out = prune(out, cfg.tau_prune)
    return out
