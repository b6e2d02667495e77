"""Per-scene mixture classifier with one KD3 detector per scene."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cmgmm import AdaptConfig, adapt
from .em import EmConfig, select_k_bic
from .errors import InsufficientDataError, RejectedInputError
from .kd3 import KD3, Kd3Config, Signal, SignalKind
from .mixture import MixtureModel


@dataclass(frozen=True)
class Instance:
    """One labelled stream element: ``n_f x d`` frames plus its scene label."""

    id: int
    label: str
    frames: np.ndarray

    def __post_init__(self):
        frames = np.atleast_2d(np.asarray(self.frames, dtype=float))
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise RejectedInputError(f"instance {self.id}: frames must be a non-empty matrix")
        object.__setattr__(self, "frames", frames)


@dataclass(frozen=True)
class StepOutcome:
    instance_id: int
    label: str
    predicted: str
    correct: bool
    signal: Signal
    adapted: bool
    scores: dict[str, float] = field(repr=False, compare=False)


@dataclass
class AdaptationEvent:
    instance_id: int
    scene: str
    frames: int
    components_before: int
    components_after: int


class SceneClassifier:
    """Generative scene classifier driven by prequential test-then-train steps.

    ``models`` and ``detectors`` share one key per scene. Only the true
    scene's model and detector change during :meth:`process`.
    """

    def __init__(
        self,
        models: Mapping[str, MixtureModel],
        kd3_cfg: Kd3Config | None = None,
        adapt_cfg: AdaptConfig | None = None,
    ):
        if not models:
            raise RejectedInputError("classifier needs at least one scene model")
        dims = {m.dim for m in models.values()}
        if len(dims) != 1:
            raise RejectedInputError(f"scene models have mixed dimensions {sorted(dims)}")
        self.kd3_cfg = kd3_cfg or Kd3Config()
        self.adapt_cfg = adapt_cfg or AdaptConfig()
        self.scenes: tuple[str, ...] = tuple(sorted(models))
        self.models: dict[str, MixtureModel] = {s: models[s] for s in self.scenes}
        self.detectors: dict[str, KD3] = {s: KD3(self.kd3_cfg) for s in self.scenes}
        self.adaptation_log: list[AdaptationEvent] = []
        self.false_alarms = 0

    @property
    def dim(self) -> int:
        return next(iter(self.models.values())).dim

    @classmethod
    def train_initial(
        cls,
        frames_by_scene: Mapping[str, np.ndarray | Sequence[np.ndarray]],
        em_cfg: EmConfig | None = None,
        kd3_cfg: Kd3Config | None = None,
        adapt_cfg: AdaptConfig | None = None,
    ) -> "SceneClassifier":
        """One BIC-selected mixture per scene.

        Each value may be a frame matrix or a list of per-instance frame
        matrices, which are stacked.
        """
        em_cfg = em_cfg or (adapt_cfg.em if adapt_cfg else EmConfig())
        models = {}
        for scene, frames in frames_by_scene.items():
            x = _stack(frames)
            if x.shape[0] < 2:
                raise InsufficientDataError(
                    f"scene {scene!r} has {x.shape[0]} training frames; need at least 2"
                )
            models[scene] = select_k_bic(x, em_cfg)
        return cls(models, kd3_cfg=kd3_cfg, adapt_cfg=adapt_cfg)

    @classmethod
    def from_instances(cls, instances: Iterable[Instance], **kwargs) -> "SceneClassifier":
        grouped: dict[str, list[np.ndarray]] = {}
        for inst in instances:
            grouped.setdefault(inst.label, []).append(inst.frames)
        return cls.train_initial(grouped, **kwargs)

    def component_counts(self) -> dict[str, int]:
        return {s: m.n_components for s, m in self.models.items()}

    def scores(self, frames) -> dict[str, float]:
        """Mean frame log-likelihood of ``frames`` under every scene model."""
        x = np.atleast_2d(np.asarray(frames, dtype=float))
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise RejectedInputError(
                f"instance frames have shape {x.shape}; models expect dimension {self.dim}"
            )
        return {s: m.mean_log_likelihood(x) for s, m in self.models.items()}

    def predict(self, instance: Instance | np.ndarray) -> tuple[str, dict[str, float]]:
        frames = instance.frames if isinstance(instance, Instance) else instance
        scores = self.scores(frames)
        best = self.scenes[0]
        for s in self.scenes[1:]:
            # strict comparison keeps the lexicographically first scene on ties
            if scores[s] > scores[best]:
                best = s
        return best, scores

    def process(self, instance: Instance) -> StepOutcome:
        """Predict, reveal the label, monitor, and adapt the true scene on drift."""
        predicted, scores = self.predict(instance.frames)
        return self.observe(instance, predicted, scores)

    def observe(self, instance: Instance, predicted: str, scores: Mapping[str, float]) -> StepOutcome:
        """Second half of a prequential step, once the label is revealed.

        ``predicted`` and ``scores`` must come from :meth:`predict` on the same
        frames before any other update.
        """
        label = instance.label
        if label not in self.models:
            raise RejectedInputError(f"unknown label {label!r}")

        detector = self.detectors[label]
        signal = detector.update(scores[label], instance.frames)
        adapted = False
        if signal.kind is SignalKind.DRIFT:
            if detector.adaptation_frames_available() >= self.kd3_cfg.min_adapt_frames:
                data = detector.take_adaptation_data()
                before = self.models[label]
                after = adapt(before, data, self.adapt_cfg)
                self.models[label] = after
                self.adaptation_log.append(
                    AdaptationEvent(
                        instance.id, label, data.shape[0], before.n_components, after.n_components
                    )
                )
                adapted = True
            else:
                self.false_alarms += 1
            detector.reset()
        return StepOutcome(
            instance_id=instance.id,
            label=label,
            predicted=predicted,
            correct=predicted == label,
            signal=signal,
            adapted=adapted,
            scores=dict(scores),
        )

    # -- checkpointing ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kd3": asdict(self.kd3_cfg),
            "adapt": asdict(self.adapt_cfg),
            "models": {s: m.to_dict() for s, m in self.models.items()},
            "detectors": {s: d.to_dict() for s, d in self.detectors.items()},
            "adaptation_log": [asdict(e) for e in self.adaptation_log],
            "false_alarms": self.false_alarms,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SceneClassifier":
        models = {s: MixtureModel.from_dict(m) for s, m in data["models"].items()}
        if set(models) != set(data["detectors"]):
            raise RejectedInputError("checkpoint models and detectors have different scene sets")
        clf = cls(models, Kd3Config(**data["kd3"]), _adapt_from_dict(data["adapt"]))
        clf.detectors = {s: KD3.from_dict(data["detectors"][s]) for s in clf.scenes}
        clf.adaptation_log = [AdaptationEvent(**e) for e in data["adaptation_log"]]
        clf.false_alarms = int(data.get("false_alarms", 0))
        return clf

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SceneClassifier":
        return cls.from_dict(json.loads(text))


def _stack(frames) -> np.ndarray:
    if isinstance(frames, np.ndarray):
        return np.atleast_2d(frames)
    blocks = [np.atleast_2d(np.asarray(f, dtype=float)) for f in frames]
    if not blocks:
        return np.empty((0, 0))
    return np.vstack(blocks)


def _adapt_from_dict(d: Mapping) -> AdaptConfig:
    d = dict(d)
    d["em"] = EmConfig(**d["em"])
    return AdaptConfig(**d)
