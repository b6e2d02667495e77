import json

import numpy as np
import pytest

from driftgmm.classifier import Instance, SceneClassifier
from driftgmm.errors import InsufficientDataError, RejectedInputError
from driftgmm.kd3 import Kd3Config
from driftgmm.mixture import MixtureModel, sample

CENTRES = {"a": [-6.0, 0.0], "b": [6.0, 0.0], "c": [0.0, 6.0]}


def blob(name):
    return MixtureModel([1.0], [CENTRES[name]], [[1.0, 1.0]])


def instances(models, labels, seed, n_f=20):
    rng = np.random.default_rng(seed)
    return [Instance(i, lab, sample(models[lab], n_f, rng)) for i, lab in enumerate(labels)]


def round_robin(n, scenes=("a", "b", "c")):
    return [scenes[i % len(scenes)] for i in range(n)]


def trained(seed=0, **kwargs):
    truth = {s: blob(s) for s in CENTRES}
    train = instances(truth, round_robin(300), seed)
    return SceneClassifier.from_instances(train, **kwargs), truth


def test_train_initial_cardinality_and_bic():
    clf, _ = trained()
    assert clf.scenes == ("a", "b", "c")
    assert set(clf.models) == set(clf.detectors)
    # each scene is one Gaussian blob
    assert clf.component_counts() == {"a": 1, "b": 1, "c": 1}
    assert clf.adaptation_log == []


def test_train_initial_complexity_varies():
    rng = np.random.default_rng(1)
    simple = rng.normal(0, 1, (400, 2))
    complex_ = np.vstack([rng.normal(c, 0.5, (100, 2)) for c in ([-8, 0], [8, 0], [0, 8], [0, -8])])
    clf = SceneClassifier.train_initial({"simple": simple, "complex": complex_})
    assert clf.component_counts()["simple"] < clf.component_counts()["complex"]


def test_train_initial_insufficient_frames_names_scene():
    with pytest.raises(InsufficientDataError, match="lonely"):
        SceneClassifier.train_initial({"lonely": np.zeros((1, 2)), "ok": np.zeros((5, 2))})


def test_predict_single_scene_and_tie():
    only = SceneClassifier({"z": blob("a")})
    assert only.predict(np.zeros((3, 2)))[0] == "z"
    same = SceneClassifier({"beta": blob("a"), "alpha": blob("a")})
    assert same.predict(np.ones((3, 2)))[0] == "alpha"


def test_predict_self_consistency():
    models = {s: blob(s) for s in CENTRES}
    clf = SceneClassifier(models)
    trials = instances(models, round_robin(200), seed=2)
    hits = sum(clf.predict(t)[0] == t.label for t in trials)
    assert hits >= 190


def test_predict_scores_are_mean_frame_log_likelihood():
    models = {s: blob(s) for s in CENTRES}
    clf = SceneClassifier(models)
    frames = np.random.default_rng(3).normal(size=(7, 2))
    _, scores = clf.predict(frames)
    for s, m in models.items():
        assert scores[s] == pytest.approx(float(np.mean(m.score_samples(frames))), rel=1e-14)


def test_dimension_and_label_errors():
    clf = SceneClassifier({s: blob(s) for s in CENTRES})
    with pytest.raises(RejectedInputError):
        clf.predict(np.zeros((3, 5)))
    with pytest.raises(RejectedInputError):
        clf.process(Instance(0, "nope", np.zeros((3, 2))))
    with pytest.raises(RejectedInputError):
        SceneClassifier({"x": blob("a"), "y": MixtureModel([1.0], [[0.0]], [[1.0]])})


def test_stationary_stream_no_adaptation():
    clf, truth = trained(seed=4, kd3_cfg=Kd3Config(alpha=0.1))
    for inst in instances(truth, round_robin(1000), seed=5):
        clf.process(inst)
    assert clf.adaptation_log == []


def test_single_class_shift_adapts_only_that_scene():
    clf, truth = trained(seed=6, kd3_cfg=Kd3Config(alpha=0.1))
    shifted = dict(truth)
    shifted["b"] = MixtureModel([0.6, 0.4], [CENTRES["b"], [6.0, -8.0]], [[1.0, 1.0], [1.0, 1.0]])
    stream = instances(truth, round_robin(300), seed=7) + instances(shifted, round_robin(900), seed=8)
    untouched = {s: clf.models[s] for s in ("a", "c")}
    for inst in stream:
        clf.process(inst)
    scenes = {ev.scene for ev in clf.adaptation_log}
    assert scenes == {"b"}
    assert all(clf.models[s] == m for s, m in untouched.items())


def test_prediction_precedes_update():
    clf, truth = trained(seed=9, kd3_cfg=Kd3Config(alpha=0.05))
    shifted = {s: MixtureModel([1.0], [np.add(CENTRES[s], 2.0)], [[1.0, 1.0]]) for s in CENTRES}
    stream = instances(truth, round_robin(300), seed=10) + instances(shifted, round_robin(600), seed=13)
    n_adapted = 0
    for inst in stream:
        expected, _ = clf.predict(inst.frames)
        before = dict(clf.models)
        out = clf.process(inst)
        assert out.predicted == expected
        changed = {s for s in clf.models if clf.models[s] != before[s]}
        assert changed <= {inst.label}
        assert out.adapted == bool(changed)
        n_adapted += out.adapted
    assert n_adapted == len(clf.adaptation_log) > 0


def test_checkpoint_round_trip_resumes_identically():
    clf, truth = trained(seed=11, kd3_cfg=Kd3Config(alpha=0.05))
    shifted = dict(truth)
    shifted["a"] = MixtureModel([0.5, 0.5], [CENTRES["a"], [-6.0, 8.0]], [[1.0, 1.0]] * 2)
    stream = instances(shifted, round_robin(600), seed=12)
    for inst in stream[:250]:
        clf.process(inst)
    copy = SceneClassifier.from_json(json.dumps(json.loads(clf.to_json())))
    rest_a = [clf.process(i) for i in stream[250:]]
    rest_b = [copy.process(i) for i in stream[250:]]
    assert [(o.predicted, o.signal, o.adapted) for o in rest_a] == [
        (o.predicted, o.signal, o.adapted) for o in rest_b
    ]
    assert clf.to_json() == copy.to_json()
