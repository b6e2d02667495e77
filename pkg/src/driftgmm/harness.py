"""Prequential evaluation, hyperparameter sweeps and report files."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .classifier import Instance, SceneClassifier
from .cmgmm import AdaptConfig
from .em import EmConfig
from .errors import InsufficientDataError, RejectedInputError
from .kd3 import Kd3Config

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    kd3: Kd3Config = field(default_factory=Kd3Config)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    em: EmConfig = field(default_factory=EmConfig)
    batch: int = 100
    train_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.batch < 1:
            raise RejectedInputError("batch must be >= 1")
        if not (0.0 < self.train_fraction < 0.5):
            raise RejectedInputError("train_fraction must lie in (0, 0.5)")

    def seeded_em(self) -> EmConfig:
        return replace(self.em, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "kd3": asdict(self.kd3),
            "adapt": {k: v for k, v in asdict(self.adapt).items() if k != "em"},
            "em": asdict(self.em),
            "batch": self.batch,
            "train_fraction": self.train_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        em = EmConfig(**d.get("em", {}))
        adapt = AdaptConfig(**{**d.get("adapt", {}), "em": em})
        return cls(
            kd3=Kd3Config(**d.get("kd3", {})),
            adapt=adapt,
            em=em,
            batch=d.get("batch", 100),
            train_fraction=d.get("train_fraction", 0.1),
            seed=d.get("seed", 0),
        )


@dataclass
class PrequentialReport:
    mean_accuracy: float
    window_accuracy: list[float]
    batch_sizes: list[int]
    batch_adaptations: list[int]
    adaptations_total: int
    adaptations_per_scene: dict[str, int]
    components_E1: dict[str, int]
    components_En: dict[str, int]
    false_alarms: int
    n_train: int
    n_eval: int
    config: dict
    wall_time: float = field(default=0.0, compare=False)

    @property
    def mean_E1(self) -> float:
        return sum(self.components_E1.values()) / len(self.components_E1)

    @property
    def mean_En(self) -> float:
        return sum(self.components_En.values()) / len(self.components_En)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = asdict(self)
        if not include_timing:
            # keeps report files byte-identical across repeated runs
            d.pop("wall_time")
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PrequentialReport":
        return cls(**d)


def split_training(instances: Sequence[Instance], train_fraction: float):
    """First ``ceil(train_fraction * count)`` instances of every scene train; the rest evaluate."""
    counts: dict[str, int] = {}
    for inst in instances:
        counts[inst.label] = counts.get(inst.label, 0) + 1
    quota = {s: max(1, math.ceil(train_fraction * c)) for s, c in counts.items()}
    seen: dict[str, int] = {}
    train, evaluate = [], []
    for inst in instances:
        n = seen.get(inst.label, 0)
        (train if n < quota[inst.label] else evaluate).append(inst)
        seen[inst.label] = n + 1
    return train, evaluate


def run_prequential(
    stream: Sequence[Instance], cfg: RunConfig = RunConfig(), hide_labels: bool = False
) -> PrequentialReport:
    """Train on the warm-up prefix, then test-then-train over the rest of the stream.

    With ``hide_labels`` the prediction is made from a copy of the frames
    that carries no label, and the label is only attached afterwards; the
    result must be identical to the normal path.
    """
    start = time.perf_counter()
    stream = list(stream)
    train, evaluate = split_training(stream, cfg.train_fraction)
    if len(evaluate) < 2 * cfg.batch:
        raise InsufficientDataError(
            f"stream leaves {len(evaluate)} evaluation instances; need at least {2 * cfg.batch}"
        )
    em = cfg.seeded_em()
    adapt_cfg = replace(cfg.adapt, em=em)
    clf = SceneClassifier.from_instances(train, em_cfg=em, kd3_cfg=cfg.kd3, adapt_cfg=adapt_cfg)
    e1 = clf.component_counts()

    window, sizes, batch_adapt = [], [], []
    correct_total = hits = adapted = in_batch = 0
    for inst in evaluate:
        if hide_labels:
            predicted, scores = clf.predict(inst.frames.copy())
            outcome = clf.observe(inst, predicted, scores)
        else:
            outcome = clf.process(inst)
        hits += outcome.correct
        adapted += outcome.adapted
        in_batch += 1
        if in_batch == cfg.batch:
            window.append(hits / in_batch)
            sizes.append(in_batch)
            batch_adapt.append(adapted)
            correct_total += hits
            hits = adapted = in_batch = 0
    if in_batch:
        window.append(hits / in_batch)
        sizes.append(in_batch)
        batch_adapt.append(adapted)
        correct_total += hits

    per_scene = {s: 0 for s in clf.scenes}
    for ev in clf.adaptation_log:
        per_scene[ev.scene] += 1
    report = PrequentialReport(
        mean_accuracy=correct_total / len(evaluate),
        window_accuracy=window,
        batch_sizes=sizes,
        batch_adaptations=batch_adapt,
        adaptations_total=len(clf.adaptation_log),
        adaptations_per_scene=per_scene,
        components_E1=e1,
        components_En=clf.component_counts(),
        false_alarms=clf.false_alarms,
        n_train=len(train),
        n_eval=len(evaluate),
        config=cfg.to_dict(),
        wall_time=time.perf_counter() - start,
    )
    log.info(
        "run done: accuracy=%.4f adaptations=%d in %.1fs",
        report.mean_accuracy,
        report.adaptations_total,
        report.wall_time,
    )
    return report


# -- sweeps --------------------------------------------------------------------


@dataclass(frozen=True)
class StreamEntry:
    """A stream plus the labels its sweep rows are keyed by."""

    name: str
    instances: tuple[Instance, ...]
    drift_type: str = "?"
    scenario: str = "?"


@dataclass(frozen=True)
class GridPoint:
    alpha: float
    beta: float
    window: int
    pruning: bool

    def key(self) -> str:
        return f"a={self.alpha!r},b={self.beta!r},h={self.window},prune={int(self.pruning)}"


@dataclass
class SweepRow:
    stream: str
    drift_type: str
    scenario: str
    point: GridPoint
    seed: int
    run_seed: int
    report: PrequentialReport | None = None
    error: str | None = None

    @property
    def key(self) -> str:
        return f"{self.stream}|{self.point.key()}|seed={self.seed}"


def grid_points(
    alphas: Sequence[float],
    betas: Sequence[float],
    windows: Sequence[int],
    pruning: Sequence[bool] = (True,),
) -> list[GridPoint]:
    points = [GridPoint(a, b, w, p) for a, b, w, p in itertools.product(alphas, betas, windows, pruning)]
    if not points:
        raise RejectedInputError("sweep grid is empty")
    return points


def row_seed(base_seed: int, key: str) -> int:
    # crc32 rather than hash(): stable across interpreter runs and processes
    return (base_seed ^ zlib.crc32(key.encode("utf-8"))) & 0x7FFFFFFF


def _run_row(args) -> SweepRow:
    entry, point, seed, base_cfg = args
    row = SweepRow(entry.name, entry.drift_type, entry.scenario, point, seed, 0)
    row.run_seed = row_seed(seed, row.key)
    try:
        kd3 = replace(base_cfg.kd3, alpha=point.alpha, beta=point.beta, window=point.window)
        adapt = replace(base_cfg.adapt, pruning_enabled=point.pruning)
        cfg = replace(base_cfg, kd3=kd3, adapt=adapt, seed=row.run_seed)
        row.report = run_prequential(entry.instances, cfg)
    except Exception as exc:  # one bad grid point must not sink the sweep
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("sweep row %s failed: %s", row.key, row.error)
    return row


def sweep(
    streams: Sequence[StreamEntry],
    points: Sequence[GridPoint],
    seeds: Sequence[int] = (0,),
    base_cfg: RunConfig = RunConfig(),
    jobs: int = 1,
) -> list[SweepRow]:
    """Every (stream, grid point, seed) combination as an independent run.

    Rows come back in input order whatever ``jobs`` is, and each row's
    run seed depends only on its own key.
    """
    if not points:
        raise RejectedInputError("sweep grid is empty")
    tasks = [(s, p, seed, base_cfg) for s in streams for p in points for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_row, tasks))
    return [_run_row(t) for t in tasks]


LONG_COLUMNS = [
    "stream", "drift_type", "scenario", "alpha", "beta", "window", "pruning", "seed",
    "run_seed", "mean_accuracy", "adaptations", "mean_E1", "mean_En", "error",
]


def sweep_long_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LONG_COLUMNS)
    for r in rows:
        rep = r.report
        w.writerow([
            r.stream, r.drift_type, r.scenario, repr(r.point.alpha), repr(r.point.beta),
            r.point.window, int(r.point.pruning), r.seed, r.run_seed,
            "" if rep is None else repr(rep.mean_accuracy),
            "" if rep is None else rep.adaptations_total,
            "" if rep is None else repr(rep.mean_E1),
            "" if rep is None else repr(rep.mean_En),
            r.error or "",
        ])
    return buf.getvalue()


def summarize(rows: Sequence[SweepRow]) -> dict:
    """Mean accuracy and adaptation count over seeds per (type, point, scenario)."""
    acc: dict = {}
    for r in rows:
        if r.report is None:
            continue
        key = (r.drift_type, r.point, r.scenario)
        a = acc.setdefault(key, [0.0, 0.0, 0])
        a[0] += r.report.mean_accuracy
        a[1] += r.report.adaptations_total
        a[2] += 1
    return {k: (v[0] / v[2], v[1] / v[2], v[2]) for k, v in acc.items()}


def scenario_table_csv(rows: Sequence[SweepRow]) -> str:
    """Wide layout: one line per (drift type, grid point), scenario columns for
    mean accuracy and mean adaptation count."""
    summary = summarize(rows)
    scenarios = sorted({r.scenario for r in rows})
    groups = sorted({(k[0], k[1]) for k in summary}, key=lambda t: (t[0], -t[1].alpha, t[1].key()))
    failed = {(r.drift_type, r.point) for r in rows if r.error}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["drift_type", "alpha", "beta", "window", "pruning"]
        + [f"accuracy_{s}" for s in scenarios]
        + [f"adaptations_{s}" for s in scenarios]
        + ["failed_rows"]
    )
    for dt, p in groups:
        cells = [summary.get((dt, p, s)) for s in scenarios]
        w.writerow(
            [dt, repr(p.alpha), repr(p.beta), p.window, int(p.pruning)]
            + ["" if c is None else f"{c[0]:.4f}" for c in cells]
            + ["" if c is None else f"{c[1]:.2f}" for c in cells]
            + [int((dt, p) in failed)]
        )
    return buf.getvalue()


# -- report files --------------------------------------------------------------


def batch_rows(report: PrequentialReport) -> list[dict]:
    rows, seen, correct = [], 0, 0.0
    for b, (acc, size, n_adapt) in enumerate(
        zip(report.window_accuracy, report.batch_sizes, report.batch_adaptations)
    ):
        seen += size
        correct += round(acc * size)
        rows.append(
            {
                "batch": b,
                "window_accuracy": acc,
                "cumulative_accuracy": correct / seen,
                "adaptations": n_adapt,
            }
        )
    return rows


def report_csv(report: PrequentialReport) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(
        buf, ["batch", "window_accuracy", "cumulative_accuracy", "adaptations"], lineterminator="\n"
    )
    w.writeheader()
    for row in batch_rows(report):
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def report_emit(report: PrequentialReport, json_path=None, csv_path=None, include_timing=False) -> None:
    """Write the full report as JSON and/or the per-batch series as CSV."""
    if json_path is not None:
        text = json.dumps(report.to_dict(include_timing), indent=2, sort_keys=True) + "\n"
        Path(json_path).write_text(text, encoding="utf-8")
    if csv_path is not None:
        Path(csv_path).write_text(report_csv(report), encoding="utf-8")


def load_report(path) -> PrequentialReport:
    return PrequentialReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
