"""Synthetic concept-drift streams in feature space.

Every scene owns a base Gaussian mixture. Drift is produced by overlaying
"event" components on the base mixture according to a drift type:

* ``A``  base -> +e1 -> +e2 -> ...  (each event replaces the previous one)
* ``B``  base -> +e1 -> +e1+e2 -> ...  (events stack)
* ``C1`` base -> +e1 -> base -> +e1 ...  (recurring)
* ``C2`` base -> +e1 -> +e1+e2 -> +e1 -> +e1+e2 ...  (stack, then cycle)

and an event placement scenario:

* ``T1`` every scene has its own events, assigned in a fixed order
* ``T2`` every scene has a pool of events; the active one is drawn at random
* ``T3`` like T2, but pools are shared by groups of scenes
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .classifier import Instance
from .errors import SpecError, StreamParseError
from .mixture import MixtureModel

DRIFT_TYPES = ("A", "B", "C1", "C2")
SCENARIOS = ("T1", "T2", "T3")
POOL_SIZE = 5
N_GROUPS = 3
# events never take more than this share of a scene's frames in total
EVENT_BUDGET = 0.9


@dataclass(frozen=True)
class DriftStreamSpec:
    drift_type: str = "A"
    scenario: str = "T1"
    n_scenes: int = 15
    n_instances: int = 12000
    frames_per_instance: int = 20
    dim: int = 8
    event_gain_range: tuple[float, float] = (0.2, 0.4)
    drift_points: tuple[float, ...] | None = None
    seed: int = 0
    base_mean_range: float = 5.0
    base_var_range: tuple[float, float] = (0.5, 1.5)
    event_mean_range: float = 5.0
    event_var_range: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if self.drift_type not in DRIFT_TYPES:
            raise SpecError(f"drift_type must be one of {DRIFT_TYPES}, got {self.drift_type!r}")
        if self.scenario not in SCENARIOS:
            raise SpecError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.n_scenes < 1 or self.n_instances < self.n_scenes:
            raise SpecError("need n_scenes >= 1 and n_instances >= n_scenes")
        if self.n_instances % self.n_scenes:
            raise SpecError(
                f"n_instances={self.n_instances} is not divisible by n_scenes={self.n_scenes}"
            )
        if self.frames_per_instance < 1 or self.dim < 1:
            raise SpecError("frames_per_instance and dim must be >= 1")
        lo, hi = self.event_gain_range
        if not (0.0 < lo <= hi < 1.0):
            raise SpecError(f"event_gain_range must satisfy 0 < lo <= hi < 1, got {self.event_gain_range}")
        object.__setattr__(self, "event_gain_range", (float(lo), float(hi)))
        object.__setattr__(self, "base_var_range", tuple(map(float, self.base_var_range)))
        object.__setattr__(self, "event_var_range", tuple(map(float, self.event_var_range)))
        if self.drift_points is None:
            object.__setattr__(self, "drift_points", default_drift_points(self.drift_type))
        pts = tuple(float(p) for p in self.drift_points)
        if not pts or any(not 0.0 < p < 1.0 for p in pts) or any(
            b <= a for a, b in zip(pts, pts[1:])
        ):
            raise SpecError(f"drift_points must be strictly increasing in (0, 1), got {pts}")
        object.__setattr__(self, "drift_points", pts)

    @property
    def per_scene(self) -> int:
        return self.n_instances // self.n_scenes

    @property
    def scene_names(self) -> tuple[str, ...]:
        width = max(2, len(str(self.n_scenes - 1)))
        return tuple(f"scene{i:0{width}d}" for i in range(self.n_scenes))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("event_gain_range", "drift_points", "base_var_range", "event_var_range"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DriftStreamSpec":
        d = dict(d)
        for key in ("event_gain_range", "drift_points", "base_var_range", "event_var_range"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def default_drift_points(drift_type: str) -> tuple[float, ...]:
    if drift_type in ("A", "B"):
        return (0.25, 0.5, 0.75)
    return tuple(k / 8 for k in range(1, 8))


@dataclass(frozen=True)
class EventComponent:
    id: str
    mean: np.ndarray
    variances: np.ndarray


@dataclass
class SceneConcepts:
    base: MixtureModel
    pool: list[EventComponent]
    # event slot k of the drift schedule -> index into pool
    slot_events: list[int] = field(default_factory=list)
    # event gain per slot
    slot_gains: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class Interval:
    start: int
    stop: int
    events: tuple[str, ...]


@dataclass
class ConceptTimeline:
    per_scene: dict[str, list[Interval]]

    def active_at(self, scene: str, index: int) -> tuple[str, ...]:
        for iv in self.per_scene[scene]:
            if iv.start <= index < iv.stop:
                return iv.events
        raise IndexError(f"{scene}: index {index} outside the timeline")


@dataclass
class DriftAnnotation:
    scene: str
    at: int
    kind: str


@dataclass
class GeneratedStream:
    spec: DriftStreamSpec
    instances: list[Instance]
    annotations: list[DriftAnnotation]
    timeline: ConceptTimeline
    concepts: dict[str, SceneConcepts]

    def write_jsonl(self, path) -> None:
        write_stream(self.instances, path)

    def annotations_dict(self) -> dict:
        return {"drifts": [asdict(a) for a in self.annotations]}


def slot_sets(drift_type: str, n_intervals: int) -> list[tuple[int, ...]]:
    """Active event slots per interval (slot numbers start at 0)."""
    sets = []
    for k in range(n_intervals):
        if k == 0:
            sets.append(())
        elif drift_type == "A":
            sets.append((k - 1,))
        elif drift_type == "B":
            sets.append(tuple(range(k)))
        elif drift_type == "C1":
            sets.append(() if k % 2 == 0 else (0,))
        else:  # C2
            sets.append((0,) if k % 2 == 1 else (0, 1))
    return sets


def slots_needed(drift_type: str, n_intervals: int) -> int:
    return max((max(s) + 1 for s in slot_sets(drift_type, n_intervals) if s), default=0)


def _random_base(rng, spec: DriftStreamSpec) -> MixtureModel:
    k = int(rng.integers(2, 5))
    w = rng.dirichlet(np.full(k, 5.0))
    means = rng.uniform(-spec.base_mean_range, spec.base_mean_range, (k, spec.dim))
    var = rng.uniform(*spec.base_var_range, (k, spec.dim))
    return MixtureModel(w, means, var)


def _random_event(rng, spec: DriftStreamSpec, event_id: str) -> EventComponent:
    mean = rng.uniform(-spec.event_mean_range, spec.event_mean_range, spec.dim)
    var = rng.uniform(*spec.event_var_range, spec.dim)
    return EventComponent(event_id, mean, var)


def _draw_gains(rng, spec: DriftStreamSpec, n_slots: int, stacked: bool) -> list[float]:
    lo, hi = spec.event_gain_range
    if not stacked:
        return [float(rng.uniform(lo, hi)) for _ in range(n_slots)]
    if lo * n_slots > EVENT_BUDGET:
        raise SpecError(
            f"{n_slots} stacked events at minimum gain {lo} exceed the event budget {EVENT_BUDGET}"
        )
    gains, used = [], 0.0
    for j in range(n_slots):
        remaining = n_slots - j - 1
        top = min(hi, EVENT_BUDGET - used - lo * remaining)
        g = float(rng.uniform(lo, top))
        gains.append(g)
        used += g
    return gains


def build_concepts(spec: DriftStreamSpec) -> dict[str, SceneConcepts]:
    """Base mixture, event pool and slot->event assignment for every scene."""
    rng = np.random.default_rng([spec.seed, 1])
    n_intervals = len(spec.drift_points) + 1
    n_slots = slots_needed(spec.drift_type, n_intervals)
    stacked = spec.drift_type in ("B", "C2")
    names = spec.scene_names

    group_pools: list[list[EventComponent]] = []
    if spec.scenario == "T3":
        group_pools = [
            [_random_event(rng, spec, f"g{g}e{j}") for j in range(POOL_SIZE)]
            for g in range(N_GROUPS)
        ]

    concepts = {}
    for idx, scene in enumerate(names):
        base = _random_base(rng, spec)
        if spec.scenario == "T1":
            pool = [_random_event(rng, spec, f"{scene}e{j}") for j in range(n_slots)]
            slot_events = list(range(n_slots))
        else:
            if spec.scenario == "T2":
                pool = [_random_event(rng, spec, f"{scene}e{j}") for j in range(POOL_SIZE)]
            else:
                pool = group_pools[scene_group(idx, spec.n_scenes)]
            if n_slots > len(pool):
                raise SpecError(
                    f"drift type {spec.drift_type} needs {n_slots} distinct events "
                    f"but the pool holds {len(pool)}"
                )
            slot_events = [int(i) for i in rng.permutation(len(pool))[:n_slots]]
        gains = _draw_gains(rng, spec, n_slots, stacked)
        concepts[scene] = SceneConcepts(base, pool, slot_events, gains)
    return concepts


def scene_group(scene_index: int, n_scenes: int) -> int:
    """Contiguous blocks of scenes share a group (5 per group for 15 scenes)."""
    size = -(-n_scenes // N_GROUPS)
    return min(scene_index // size, N_GROUPS - 1)


def schedule_drift(spec: DriftStreamSpec, concepts: dict[str, SceneConcepts]) -> ConceptTimeline:
    n = spec.per_scene
    cuts = [0] + [int(round(p * n)) for p in spec.drift_points] + [n]
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise SpecError("drift points collapse onto the same instance; use more instances")
    sets = slot_sets(spec.drift_type, len(cuts) - 1)
    per_scene = {}
    for scene, c in concepts.items():
        if slots_needed(spec.drift_type, len(sets)) > len(c.slot_events):
            raise SpecError(f"{scene}: pool too small for the drift schedule")
        per_scene[scene] = [
            Interval(cuts[k], cuts[k + 1], tuple(c.pool[c.slot_events[s]].id for s in sets[k]))
            for k in range(len(sets))
        ]
    return ConceptTimeline(per_scene)


def active_mixture(concepts: SceneConcepts, events: Sequence[str]) -> MixtureModel:
    """Base mixture with the given events overlaid at their slot gains."""
    if not events:
        return concepts.base
    by_id = {concepts.pool[e].id: (concepts.pool[e], concepts.slot_gains[s])
             for s, e in enumerate(concepts.slot_events)}
    comps = [by_id[e] for e in events]
    total = sum(g for _, g in comps)
    base = concepts.base
    w = np.concatenate([base.weights * (1.0 - total), [g for _, g in comps]])
    means = np.vstack([base.means] + [c.mean[None, :] for c, _ in comps])
    var = np.vstack([base.variances] + [c.variances[None, :] for c, _ in comps])
    return MixtureModel(w, means, var)


def transition_kind(previous: Sequence[tuple[str, ...]], new: tuple[str, ...]) -> str:
    before = previous[-1]
    if any(set(new) == set(p) for p in previous):
        return "recur"
    if not before:
        return "appear"
    if set(before) < set(new):
        return "stack"
    return "replace"


def generate(spec: DriftStreamSpec) -> GeneratedStream:
    """Round-robin stream of instances with ground-truth drift annotations."""
    concepts = build_concepts(spec)
    timeline = schedule_drift(spec, concepts)
    names = spec.scene_names
    rng = np.random.default_rng([spec.seed, 2])

    mixtures = {
        scene: [active_mixture(concepts[scene], iv.events) for iv in timeline.per_scene[scene]]
        for scene in names
    }
    instances = []
    annotations = []
    for j in range(spec.per_scene):
        for s_idx, scene in enumerate(names):
            i = j * spec.n_scenes + s_idx
            ivs = timeline.per_scene[scene]
            k = next(k for k, iv in enumerate(ivs) if iv.start <= j < iv.stop)
            if k > 0 and ivs[k].start == j:
                kind = transition_kind([iv.events for iv in ivs[:k]], ivs[k].events)
                annotations.append(DriftAnnotation(scene, i, kind))
            frames = _sample(mixtures[scene][k], spec.frames_per_instance, rng)
            instances.append(Instance(i, scene, frames))
    return GeneratedStream(spec, instances, annotations, timeline, concepts)


def _sample(model: MixtureModel, n: int, rng: np.random.Generator) -> np.ndarray:
    idx = rng.choice(model.n_components, size=n, p=model.weights / model.weights.sum())
    return model.means[idx] + rng.standard_normal((n, model.dim)) * np.sqrt(model.variances[idx])


# -- stream files -------------------------------------------------------------


def instance_record(inst: Instance) -> str:
    return json.dumps({"i": inst.id, "label": inst.label, "frames": inst.frames.tolist()})


def write_stream(instances: Sequence[Instance], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(instance_record(inst))
            fh.write("\n")


def iter_stream(path) -> Iterator[Instance]:
    """Parse a JSON Lines stream file; errors carry the 1-based line number."""
    with open(path, encoding="utf-8") as fh:
        dim = None
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StreamParseError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(rec, dict) or not {"i", "label", "frames"} <= rec.keys():
                raise StreamParseError("record needs keys 'i', 'label' and 'frames'", lineno)
            if not isinstance(rec["i"], int) or not isinstance(rec["label"], str):
                raise StreamParseError("'i' must be an integer and 'label' a string", lineno)
            try:
                frames = np.asarray(rec["frames"], dtype=float)
            except (TypeError, ValueError):
                raise StreamParseError("'frames' must be a matrix of numbers", lineno) from None
            if frames.ndim != 2 or frames.shape[0] < 1 or not np.all(np.isfinite(frames)):
                raise StreamParseError("'frames' must be a non-empty finite matrix", lineno)
            if dim is None:
                dim = frames.shape[1]
            elif frames.shape[1] != dim:
                raise StreamParseError(
                    f"frame dimension {frames.shape[1]} differs from earlier records ({dim})", lineno
                )
            yield Instance(rec["i"], rec["label"], frames)


def read_stream(path) -> list[Instance]:
    return list(iter_stream(path))


def write_annotations(stream: GeneratedStream, path) -> None:
    Path(path).write_text(json.dumps(stream.annotations_dict(), indent=2) + "\n", encoding="utf-8")


def write_spec(spec: DriftStreamSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_spec(path) -> DriftStreamSpec:
    return DriftStreamSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
