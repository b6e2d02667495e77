"""Expectation-maximization for diagonal Gaussian mixtures, with BIC order selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, RejectedInputError
from .mixture import VAR_FLOOR, MixtureModel, logsumexp_rows

# Relative floor on per-dimension variance during EM. Keeps single-frame
# components from collapsing onto a point; applied as a clamp so every M-step
# is still an exact constrained maximiser.
REL_VAR_FLOOR = 1e-3
# Effective component mass below which a component counts as empty.
EMPTY_MASS = 1e-10


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 200
    tol: float = 1e-6
    k_max: int = 8
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise RejectedInputError("max_iter must be >= 1")
        if not self.tol > 0:
            raise RejectedInputError("tol must be > 0")
        if self.k_max < 1:
            raise RejectedInputError("k_max must be >= 1")
        if self.restarts < 1:
            raise RejectedInputError("restarts must be >= 1")


@dataclass
class EmTrace:
    """Diagnostics for one EM run."""

    model: MixtureModel
    log_likelihood: list[float] = field(default_factory=list)
    reseeded_at: list[int] = field(default_factory=list)
    converged: bool = False

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihood[-1]


def _canonical_order(x: np.ndarray) -> np.ndarray:
    # lexicographic sort of rows; makes seeding independent of input order
    return x[np.lexsort(x.T[::-1])]


def _farthest_point_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding. Ties on equal-probability candidates resolve by row index."""
    n = x.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((x - x[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # every remaining frame coincides with a seed; take the first unused row
            unused = np.setdiff1d(np.arange(n), idx)
            nxt = int(unused[0])
        else:
            cdf = np.cumsum(d2 / total)
            nxt = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            nxt = min(nxt, n - 1)
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return np.asarray(idx)


def _e_step(x, weights, means, variances, xx=None):
    inv = 1.0 / variances
    if xx is None:
        xx = x * x
    quad = xx @ inv.T - 2.0 * x @ (means * inv).T + np.sum(means * means * inv, axis=1)
    log_norm = -0.5 * (x.shape[1] * math.log(2 * math.pi) + np.sum(np.log(variances), axis=1))
    with np.errstate(divide="ignore"):
        lp = np.log(weights) + log_norm - 0.5 * quad
    per_frame = logsumexp_rows(lp)
    resp = np.exp(lp - per_frame[:, None])
    return resp, per_frame


def _m_step(x, resp, floor, xx=None):
    if xx is None:
        xx = x * x
    nk = resp.sum(axis=0)
    weights = nk / nk.sum()
    safe = np.where(nk > EMPTY_MASS, nk, 1.0)
    means = (resp.T @ x) / safe[:, None]
    variances = (resp.T @ xx) / safe[:, None] - means**2
    variances = np.maximum(variances, floor)
    return weights, means, variances, nk


def _run_em(
    x: np.ndarray, k: int, cfg: EmConfig, rng: np.random.Generator, init: MixtureModel | None = None
) -> EmTrace:
    n, d = x.shape
    # work on centred data: the expanded quadratic forms below lose precision
    # when |mean| >> spread
    shift = x.mean(axis=0)
    x = x - shift
    data_var = x.var(axis=0)
    floor = np.maximum(VAR_FLOOR, REL_VAR_FLOOR * data_var)
    xx = x * x

    if init is not None:
        weights = init.weights / init.weights.sum()
        means = init.means - shift
        variances = np.array(init.variances)
    else:
        seeds = _farthest_point_seeds(x, k, rng)
        means = x[seeds].copy()
        # hard-assign to nearest seed for the starting variances and weights
        d2 = np.sum((x[:, None, :] - means[None, :, :]) ** 2, axis=2)
        resp = np.zeros((n, k))
        resp[np.arange(n), np.argmin(d2, axis=1)] = 1.0
        weights, _, variances, nk = _m_step(x, resp, floor)
        # seeds with no nearest frames start with the global spread
        variances[nk <= EMPTY_MASS] = np.maximum(data_var, floor)
        weights = np.maximum(weights, 1.0 / n)
        weights /= weights.sum()

    trace = EmTrace(model=None)  # type: ignore[arg-type]
    prev = -np.inf
    for it in range(cfg.max_iter):
        resp, per_frame = _e_step(x, weights, means, variances, xx)
        ll = float(per_frame.sum())
        trace.log_likelihood.append(ll)
        if it > 0 and trace.reseeded_at[-1:] != [it - 1]:
            if abs(ll - prev) <= cfg.tol * abs(prev):
                trace.converged = True
                break
        prev = ll
        weights, new_means, variances, nk = _m_step(x, resp, floor, xx)
        empty = nk <= EMPTY_MASS
        means = np.where(empty[:, None], means, new_means)
        if np.any(empty):
            # re-seed each empty component at the currently worst-explained frame
            worst = np.argsort(per_frame, kind="stable")
            for j, comp in enumerate(np.flatnonzero(empty)):
                means[comp] = x[worst[j % n]]
                variances[comp] = np.maximum(data_var, floor)
                weights[comp] = 1.0 / n
            weights /= weights.sum()
            trace.reseeded_at.append(it)

    trace.model = MixtureModel(weights / weights.sum(), means + shift, variances)
    return trace


def _check_frames(frames) -> np.ndarray:
    x = np.asarray(frames, dtype=float)
    if x.ndim != 2:
        raise RejectedInputError(f"frames must be an n x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise RejectedInputError("frames contain non-finite values")
    return x


def em_trace(
    frames, k: int, cfg: EmConfig = EmConfig(), restart: int = 0, init: MixtureModel | None = None
) -> EmTrace:
    """Single EM run (one restart) with its log-likelihood history.

    ``init`` starts the iterations from a given ``k``-component model instead
    of the seeded initialisation.
    """
    x = _check_frames(frames)
    if k < 1:
        raise RejectedInputError("k must be >= 1")
    if x.shape[0] < k:
        raise InsufficientDataError(f"{x.shape[0]} frames cannot support {k} components")
    if init is not None and (init.n_components != k or init.dim != x.shape[1]):
        raise RejectedInputError("init model does not match k and the frame dimension")
    x = _canonical_order(x)
    rng = np.random.default_rng([cfg.seed, k, restart])
    return _run_em(x, k, cfg, rng, init)


def fit_em(frames, k: int, cfg: EmConfig = EmConfig()) -> MixtureModel:
    """Fit a ``k``-component diagonal mixture; best of ``cfg.restarts`` runs."""
    x = _check_frames(frames)
    if k < 1:
        raise RejectedInputError("k must be >= 1")
    n, d = x.shape
    if n < k:
        raise InsufficientDataError(f"{n} frames cannot support {k} components")
    if k == 1:
        # closed form
        var = np.maximum(x.var(axis=0), VAR_FLOOR)
        return MixtureModel([1.0], x.mean(axis=0)[None, :], var[None, :])
    x = _canonical_order(x)
    best = None
    for r in range(cfg.restarts):
        trace = _run_em(x, k, cfg, np.random.default_rng([cfg.seed, k, r]))
        if best is None or trace.final_log_likelihood > best.final_log_likelihood:
            best = trace
    return best.model


def n_parameters(k: int, d: int) -> int:
    return k * 2 * d + (k - 1)


def bic(model: MixtureModel, frames) -> float:
    """``p ln n - 2 LL`` with ``p`` counting diagonal-covariance free parameters."""
    x = _check_frames(frames)
    n = x.shape[0]
    if n < 1:
        raise InsufficientDataError("bic needs at least one frame")
    ll = float(np.sum(model.score_samples(x)))
    return n_parameters(model.n_components, model.dim) * math.log(n) - 2.0 * ll


def select_k_bic(frames, cfg: EmConfig = EmConfig()) -> MixtureModel:
    """Minimum-BIC model over ``k = 1 .. min(k_max, n)``; ties go to smaller ``k``."""
    x = _check_frames(frames)
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 frames for order selection, got {n}")
    best_model, best_score = None, math.inf
    for k in range(1, min(cfg.k_max, n) + 1):
        model = fit_em(x, k, cfg)
        score = bic(model, x)
        if score < best_score:
            best_model, best_score = model, score
    return best_model
