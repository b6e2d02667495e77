"""Diagonal-covariance Gaussian mixtures.

A :class:`MixtureModel` is an immutable value: every operation that changes
a model returns a new one. Parameters are stored as three arrays
(``weights`` ``(k,)``, ``means`` ``(k, d)``, ``variances`` ``(k, d)``) so the
hot paths (scoring, EM, merging) stay vectorised.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import RejectedInputError

VAR_FLOOR = 1e-8
WEIGHT_SUM_TOL = 1e-9
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        var = np.maximum(np.asarray(self.variances, dtype=float).reshape(-1), VAR_FLOOR)
        if mean.shape != var.shape:
            raise RejectedInputError(
                f"mean has dimension {mean.size} but variances has {var.size}"
            )
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variances", var)

    @property
    def dim(self) -> int:
        return self.mean.size


class MixtureModel:
    """Weighted set of diagonal Gaussian components sharing one dimension.

    Variances are floored at ``VAR_FLOOR`` on construction. Weights are
    stored as given; use :meth:`normalized` or :func:`validate` when the
    caller cannot guarantee they sum to one.
    """

    __slots__ = ("weights", "means", "variances")

    def __init__(self, weights, means, variances):
        w = np.array(weights, dtype=float).reshape(-1)
        mu = np.array(means, dtype=float)
        var = np.array(variances, dtype=float)
        if mu.ndim == 1:
            mu = mu.reshape(w.size, -1)
        if var.ndim == 1:
            var = var.reshape(w.size, -1)
        if w.size == 0:
            raise RejectedInputError("a mixture needs at least one component")
        if mu.shape != var.shape or mu.shape[0] != w.size:
            raise RejectedInputError(
                f"inconsistent shapes: weights {w.shape}, means {mu.shape}, "
                f"variances {var.shape}"
            )
        var = np.maximum(var, VAR_FLOOR)
        for arr in (w, mu, var):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    def __setattr__(self, name, value):
        raise AttributeError("MixtureModel is immutable")

    @classmethod
    def from_components(cls, components: Iterable[GaussianComponent]) -> "MixtureModel":
        comps = list(components)
        if not comps:
            raise RejectedInputError("a mixture needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise RejectedInputError(f"components have mixed dimensions {sorted(dims)}")
        return cls(
            [c.weight for c in comps],
            np.stack([c.mean for c in comps]),
            np.stack([c.variances for c in comps]),
        )

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> tuple[GaussianComponent, ...]:
        return tuple(
            GaussianComponent(w, m, v)
            for w, m, v in zip(self.weights, self.means, self.variances)
        )

    def __len__(self) -> int:
        return self.n_components

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixtureModel):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.variances, other.variances)
        )

    __hash__ = None

    def __reduce__(self):
        return (MixtureModel, (self.weights, self.means, self.variances))

    def __repr__(self) -> str:
        return f"MixtureModel(k={self.n_components}, d={self.dim})"

    def normalized(self) -> "MixtureModel":
        return MixtureModel(self.weights / self.weights.sum(), self.means, self.variances)

    def subset(self, keep) -> "MixtureModel":
        """Model restricted to the components selected by ``keep``, renormalised."""
        keep = np.asarray(keep)
        return MixtureModel(
            self.weights[keep], self.means[keep], self.variances[keep]
        ).normalized()

    # -- scoring ----------------------------------------------------------

    def component_log_densities(self, frames) -> np.ndarray:
        """``(n, k)`` matrix of ``ln w_k + ln N(x_i; mu_k, diag var_k)``."""
        x = _as_frames(frames, self.dim)
        diff = x[:, None, :] - self.means[None, :, :]
        quad = np.sum(diff * diff / self.variances[None, :, :], axis=2)
        log_norm = -0.5 * (self.dim * _LOG_2PI + np.sum(np.log(self.variances), axis=1))
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        return log_w + log_norm - 0.5 * quad

    def score_samples(self, frames) -> np.ndarray:
        """Per-frame mixture log-density."""
        return logsumexp_rows(self.component_log_densities(frames))

    def mean_log_likelihood(self, frames) -> float:
        return float(np.mean(self.score_samples(frames)))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "components": [
                {"w": float(w), "mean": m.tolist(), "var": v.tolist()}
                for w, m, v in zip(self.weights, self.means, self.variances)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MixtureModel":
        problems = validate(data)
        if problems:
            raise RejectedInputError("invalid model: " + "; ".join(problems))
        comps = data["components"]
        return cls(
            [c["w"] for c in comps],
            [c["mean"] for c in comps],
            [c["var"] for c in comps],
        )

    def to_json(self) -> str:
        # repr of a Python float is the shortest string that round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MixtureModel":
        return cls.from_dict(json.loads(text))


def logsumexp_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp; rows that are entirely ``-inf`` give ``-inf``."""
    top = np.max(a, axis=1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(a - safe[:, None]), axis=1))


def _as_frames(frames, dim: int) -> np.ndarray:
    x = np.asarray(frames, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise RejectedInputError(f"expected frames of dimension {dim}, got shape {x.shape}")
    return x


def log_density(model: MixtureModel, x) -> float:
    """``ln sum_k w_k N(x; mu_k, diag var_k)`` for a single point ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.dim:
        raise RejectedInputError(f"expected a point of dimension {model.dim}, got shape {x.shape}")
    return float(model.score_samples(x[None, :])[0])


def mixture_moments(model: MixtureModel) -> tuple[np.ndarray, np.ndarray]:
    """Mixture mean and per-dimension raw second moment."""
    w = model.weights[:, None]
    mean = np.sum(w * model.means, axis=0)
    second = np.sum(w * (model.variances + model.means**2), axis=0)
    return mean, second


def sample(model: MixtureModel, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. frames; deterministic for a fixed ``seed``."""
    if n < 1:
        raise RejectedInputError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = model.weights / model.weights.sum()
    idx = rng.choice(model.n_components, size=n, p=p)
    noise = rng.standard_normal((n, model.dim))
    return model.means[idx] + noise * np.sqrt(model.variances[idx])


def validate(model) -> list[str]:
    """Every invariant violation of ``model``; an empty list means valid.

    Accepts a :class:`MixtureModel` or its JSON mapping form, so decoded
    input can be checked before construction (which floors variances).
    """
    if isinstance(model, MixtureModel):
        comps = [
            {"w": w, "mean": m, "var": v}
            for w, m, v in zip(model.weights, model.means, model.variances)
        ]
        dim = model.dim
    else:
        try:
            comps = list(model["components"])
        except (KeyError, TypeError):
            return ["missing 'components'"]
        dim = model.get("dim")

    problems: list[str] = []
    if not comps:
        return ["model has no components"]

    weights = []
    for i, c in enumerate(comps):
        try:
            w = float(c["w"])
            mean = np.asarray(c["mean"], dtype=float).reshape(-1)
            var = np.asarray(c["var"], dtype=float).reshape(-1)
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"component {i}: unreadable ({exc})")
            continue
        weights.append(w)
        if not (0.0 <= w <= 1.0):
            problems.append(f"component {i}: weight {w} outside [0, 1]")
        if mean.size != var.size:
            problems.append(f"component {i}: mean dim {mean.size} != variance dim {var.size}")
        if dim is None:
            dim = mean.size
        if mean.size != dim:
            problems.append(f"component {i}: dimension {mean.size} != model dimension {dim}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            problems.append(f"component {i}: non-finite parameter")
        elif np.any(var < VAR_FLOOR):
            problems.append(f"component {i}: variance below floor {VAR_FLOOR}")

    total = math.fsum(weights)
    if weights and abs(total - 1.0) > WEIGHT_SUM_TOL:
        problems.append(f"weights sum to {total!r}, not 1")
    return problems
