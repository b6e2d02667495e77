"""KD3: windowed kernel-density drift detection with a warning-zone data buffer.

The detector watches one scalar per step. The first ``window`` values after a
reset form a fixed reference window, later values slide through a current
window of the same length, and every step the two windows are compared with
:func:`~driftgmm.kde.tv_divergence`.

Two KDEs of 45 i.i.d. points already differ by ~0.13 in total variation on
average, so comparing the raw distance to margins like ``alpha=0.1`` would
fire on pure noise. With ``calibrate=True`` (the default) the detector instead
scores ``null_scale * max(0, tv - q)``, where ``q`` is the ``null_quantile``
(default: median) of the distance between two same-distribution windows of
the configured length. ``q`` is estimated once per window length by a seeded
simulation, so detection stays deterministic. With the defaults ``alpha=0.1``
needs a raw distance of about 0.43 at ``window=45``, far in the null tail,
while margins around 0.001 sit just above the typical noise level.

Besides the warning buffer, the detector remembers the payloads of the steps
in its current window. When a drift fires, :meth:`take_adaptation_data`
returns the warning-zone frames together with the payloads of the most recent
``ceil(tv * window)`` steps: for two well separated concepts the raw distance
is close to the fraction of the current window that already comes from the
new one, so this picks out the post-change instances even when a small
``alpha`` lets the divergence jump straight past the warning band.
"""

from __future__ import annotations

import enum
import functools
import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .errors import RejectedInputError
from .kde import tv_divergence

_NULL_DRAWS = 2000
_NULL_SEED = 20201116


class SignalKind(str, enum.Enum):
    STABLE = "stable"
    WARNING = "warning"
    DRIFT = "drift"


@dataclass(frozen=True)
class Signal:
    kind: SignalKind
    divergence: float

    @property
    def is_drift(self) -> bool:
        return self.kind is SignalKind.DRIFT

    @property
    def is_warning(self) -> bool:
        return self.kind is SignalKind.WARNING


@dataclass(frozen=True)
class Kd3Config:
    """Detector margins and buffer limits.

    ``alpha`` is the drift margin, ``beta`` the warning margin and ``window``
    the length of both the reference and the current window.
    """

    alpha: float = 0.1
    beta: float = 0.001
    window: int = 45
    buffer_cap: int = 500
    min_adapt_frames: int = 30
    calibrate: bool = True
    null_quantile: float = 0.5
    null_scale: float = 1.0 / 3.0

    def __post_init__(self):
        if not (0.0 < self.beta < self.alpha <= 1.0):
            raise RejectedInputError(
                f"need 0 < beta < alpha <= 1, got beta={self.beta}, alpha={self.alpha}"
            )
        if self.window < 2:
            raise RejectedInputError("window must be >= 2")
        if self.buffer_cap < 1:
            raise RejectedInputError("buffer_cap must be >= 1")
        if self.min_adapt_frames < 0:
            raise RejectedInputError("min_adapt_frames must be >= 0")
        if not (0.0 <= self.null_quantile < 1.0):
            raise RejectedInputError("null_quantile must lie in [0, 1)")
        if not self.null_scale > 0:
            raise RejectedInputError("null_scale must be > 0")


@functools.lru_cache(maxsize=64)
def null_divergence_level(window: int, quantile: float) -> float:
    """``quantile`` of tv_divergence between two independent N(0, 1) windows.

    The KDE distance is affine invariant (Silverman bandwidths scale with the
    data and the grid is data-anchored), so the Gaussian null stands in for
    any location-scale family.
    """
    rng = np.random.default_rng([_NULL_SEED, window])
    draws = rng.standard_normal((_NULL_DRAWS, 2, window))
    values = np.array([tv_divergence(a, b) for a, b in draws])
    return float(np.quantile(values, quantile))


class KD3:
    """Single-writer drift detector for one monitored scalar stream."""

    def __init__(self, config: Kd3Config | None = None):
        self.config = config or Kd3Config()
        self.reset()

    def reset(self) -> "KD3":
        """Forget both windows and the warning buffer; the next values form a new reference."""
        self.reference: list[float] = []
        self.current: deque[float] = deque(maxlen=self.config.window)
        self._buffer: deque[tuple[int, np.ndarray]] = deque()
        self._buffered = 0
        self._recent: deque[tuple[int, np.ndarray]] = deque(maxlen=self.config.window)
        self.steps_since_reset = 0
        self.last_divergence = 0.0
        self.last_raw_divergence = 0.0
        return self

    @property
    def threshold_offset(self) -> float:
        cfg = self.config
        return null_divergence_level(cfg.window, cfg.null_quantile) if cfg.calibrate else 0.0

    @property
    def buffered_frames(self) -> int:
        return self._buffered

    def divergence(self) -> float:
        raw = tv_divergence(self.reference, self.current)
        self.last_raw_divergence = raw
        if not self.config.calibrate:
            return raw
        return self.config.null_scale * max(0.0, raw - self.threshold_offset)

    def update(self, value: float, payload=None) -> Signal:
        value = float(value)
        if not math.isfinite(value):
            raise RejectedInputError(f"monitored value must be finite, got {value}")
        cfg = self.config
        step = self.steps_since_reset
        if len(self.reference) < cfg.window:
            self.reference.append(value)
        else:
            self.current.append(value)
            if payload is not None:
                self._recent.append((step, np.atleast_2d(np.asarray(payload, dtype=float))))
        self.steps_since_reset += 1
        if self.steps_since_reset < 2 * cfg.window:
            return Signal(SignalKind.STABLE, 0.0)

        d = self.divergence()
        self.last_divergence = d
        if d > cfg.alpha:
            # the drifting step's own frames are the strongest evidence of the new concept
            self._push(step, payload)
            return Signal(SignalKind.DRIFT, d)
        if d > cfg.beta:
            self._push(step, payload)
            return Signal(SignalKind.WARNING, d)
        self._buffer.clear()
        self._buffered = 0
        return Signal(SignalKind.STABLE, d)

    def _push(self, step: int, payload) -> None:
        if payload is None:
            return
        frames = np.atleast_2d(np.asarray(payload, dtype=float))
        if frames.shape[0] == 0:
            return
        self._buffer.append((step, frames))
        self._buffered += frames.shape[0]
        cap = self.config.buffer_cap
        while self._buffered > cap:
            head_step, head = self._buffer[0]
            excess = self._buffered - cap
            if head.shape[0] <= excess:
                self._buffer.popleft()
                self._buffered -= head.shape[0]
            else:
                self._buffer[0] = (head_step, head[excess:])
                self._buffered -= excess

    def take_warning_data(self) -> np.ndarray:
        """Buffered warning-zone frames, oldest first; empties the buffer."""
        if not self._buffer:
            return np.empty((0, 0))
        out = np.concatenate([f for _, f in self._buffer], axis=0)
        self._buffer.clear()
        self._buffered = 0
        return out

    def recent_change_steps(self) -> int:
        """Estimated number of current-window steps drawn from the new concept."""
        if len(self.current) < self.config.window:
            return 0
        return min(len(self._recent), max(1, math.ceil(self.last_raw_divergence * self.config.window)))

    def adaptation_frames_available(self) -> int:
        return self._select_adaptation_blocks()[1]

    def _select_adaptation_blocks(self):
        n_recent = self.recent_change_steps()
        blocks = dict(self._buffer)
        if n_recent:
            blocks.update(list(self._recent)[-n_recent:])
        ordered = [blocks[k] for k in sorted(blocks)]
        # keep only the freshest buffer_cap frames
        kept, total = [], 0
        for frames in reversed(ordered):
            take = min(frames.shape[0], self.config.buffer_cap - total)
            if take <= 0:
                break
            kept.append(frames[frames.shape[0] - take:])
            total += take
        kept.reverse()
        return kept, total

    def take_adaptation_data(self) -> np.ndarray:
        """Warning-zone frames plus the estimated post-change frames of the
        current window, oldest first, capped at ``buffer_cap`` rows. Empties
        the warning buffer."""
        kept, total = self._select_adaptation_blocks()
        self._buffer.clear()
        self._buffered = 0
        if not total:
            return np.empty((0, 0))
        return np.concatenate(kept, axis=0)

    # -- checkpointing ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "reference": list(self.reference),
            "current": list(self.current),
            "warning_buffer": [[k, b.tolist()] for k, b in self._buffer],
            "recent": [[k, b.tolist()] for k, b in self._recent],
            "steps_since_reset": self.steps_since_reset,
            "last_divergence": self.last_divergence,
            "last_raw_divergence": self.last_raw_divergence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KD3":
        det = cls(Kd3Config(**data["config"]))
        det.reference = [float(v) for v in data["reference"]]
        det.current.extend(float(v) for v in data["current"])
        for step, block in data["warning_buffer"]:
            arr = np.asarray(block, dtype=float)
            det._buffer.append((int(step), arr))
            det._buffered += arr.shape[0]
        for step, block in data.get("recent", []):
            det._recent.append((int(step), np.asarray(block, dtype=float)))
        det.steps_since_reset = int(data["steps_since_reset"])
        det.last_divergence = float(data["last_divergence"])
        det.last_raw_divergence = float(data.get("last_raw_divergence", 0.0))
        return det
