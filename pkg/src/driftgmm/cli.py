"""Command-line entry point: ``driftgmm gen|run|sweep``.

Every subcommand also takes ``--config FILE``, a flat JSON object whose keys
are the long option names (dashes or underscores). Explicit flags win over
file values, which win over the built-in defaults. Failures print one JSON
error record on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .cmgmm import AdaptConfig
from .errors import DriftGMMError, RejectedInputError
from .harness import (
    RunConfig,
    StreamEntry,
    grid_points,
    report_emit,
    run_prequential,
    sweep,
    sweep_long_csv,
    scenario_table_csv,
)
from .kd3 import Kd3Config
from .streamgen import DriftStreamSpec, generate, read_spec, read_stream, write_annotations, write_spec

EXIT_FAILURE = 1

_DEFAULTS = {
    "gen": {
        "type": "A", "scenario": "T1", "scenes": 15, "instances": 12000, "dim": 8,
        "frames": 20, "seed": 0, "annotations": None, "spec_out": None,
    },
    "run": {
        "alpha": 0.1, "beta": 0.001, "window": 45, "no_prune": False, "rho": 0.5,
        "tau_merge": 0.1, "tau_prune": 1e-4, "seed": 0, "batch": 100,
        "train_fraction": 0.1, "csv": None, "timing": False,
    },
    "sweep": {
        "alphas": "0.1,0.05,0.01,0.005,0.001", "betas": "0.001", "windows": "45",
        "prune": "on", "seeds": "0", "jobs": 1, "long_out": None,
    },
}
_REQUIRED = {"gen": ["out"], "run": ["stream", "report"], "sweep": ["streams", "out"]}


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    # defaults stay None so we can tell "not given" apart from a config-file value
    p = argparse.ArgumentParser(prog="driftgmm", description="Drift-adaptive GMM scene classification toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic drift stream")
    g.add_argument("--config")
    g.add_argument("--type", choices=["A", "B", "C1", "C2"])
    g.add_argument("--scenario", choices=["T1", "T2", "T3"])
    g.add_argument("--scenes", type=int)
    g.add_argument("--instances", type=int)
    g.add_argument("--dim", type=int)
    g.add_argument("--frames", type=int, help="frames per instance")
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--annotations")
    g.add_argument("--spec-out", help="where to write the generating spec (default: <out>.spec.json)")

    r = sub.add_parser("run", help="prequential run over one stream")
    r.add_argument("--config")
    r.add_argument("--stream")
    r.add_argument("--alpha", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--window", type=int)
    r.add_argument("--no-prune", action="store_const", const=True, default=None)
    r.add_argument("--rho", type=float)
    r.add_argument("--tau-merge", type=float)
    r.add_argument("--tau-prune", type=float)
    r.add_argument("--batch", type=int)
    r.add_argument("--train-fraction", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--report")
    r.add_argument("--csv")
    r.add_argument("--timing", action="store_const", const=True, default=None,
                   help="include wall time in the JSON report (breaks byte-identity)")

    s = sub.add_parser("sweep", help="grid sweep over several streams")
    s.add_argument("--config")
    s.add_argument("--streams", nargs="+")
    s.add_argument("--alphas")
    s.add_argument("--betas")
    s.add_argument("--windows")
    s.add_argument("--prune", choices=["both", "on", "off"])
    s.add_argument("--seeds")
    s.add_argument("--jobs", type=int)
    s.add_argument("--out")
    s.add_argument("--long-out", help="optional per-row CSV")
    return p


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from ``--config`` and then from the defaults."""
    cmd = args.command
    file_values = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise RejectedInputError("config file must hold a JSON object")
        file_values = {k.replace("-", "_"): v for k, v in data.items()}
    known = set(_DEFAULTS[cmd]) | set(_REQUIRED[cmd])
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise RejectedInputError(f"unknown config keys for {cmd}: {', '.join(unknown)}")
    for key in known:
        if getattr(args, key, None) is None:
            if key in file_values:
                setattr(args, key, file_values[key])
            else:
                setattr(args, key, _DEFAULTS[cmd].get(key))
    missing = [f"--{k.replace('_', '-')}" for k in _REQUIRED[cmd] if getattr(args, k) in (None, [])]
    if missing:
        raise RejectedInputError(f"missing required option(s): {', '.join(missing)}")
    return args


def spec_sidecar(stream_path) -> Path:
    p = Path(stream_path)
    return p.with_name(p.name + ".spec.json")


def cmd_gen(args) -> dict:
    spec = DriftStreamSpec(
        drift_type=args.type,
        scenario=args.scenario,
        n_scenes=int(args.scenes),
        n_instances=int(args.instances),
        frames_per_instance=int(args.frames),
        dim=int(args.dim),
        seed=int(args.seed),
    )
    stream = generate(spec)
    stream.write_jsonl(args.out)
    write_spec(spec, args.spec_out or spec_sidecar(args.out))
    if args.annotations:
        write_annotations(stream, args.annotations)
    return {"instances": len(stream.instances), "drifts": len(stream.annotations), "out": str(args.out)}


def run_config_from_args(args) -> RunConfig:
    kd3 = Kd3Config(alpha=float(args.alpha), beta=float(args.beta), window=int(args.window))
    adapt = AdaptConfig(
        rho=float(args.rho),
        tau_merge=float(args.tau_merge),
        tau_prune=float(args.tau_prune),
        pruning_enabled=not bool(args.no_prune),
    )
    return RunConfig(
        kd3=kd3, adapt=adapt, em=adapt.em, batch=int(args.batch),
        train_fraction=float(args.train_fraction), seed=int(args.seed),
    )


def cmd_run(args) -> dict:
    cfg = run_config_from_args(args)
    instances = read_stream(args.stream)
    report = run_prequential(instances, cfg)
    report_emit(report, args.report, args.csv, include_timing=bool(args.timing))
    return {
        "mean_accuracy": report.mean_accuracy,
        "adaptations": report.adaptations_total,
        "report": str(args.report),
    }


def _stream_entry(path) -> StreamEntry:
    sidecar = spec_sidecar(path)
    dt, sc = "?", "?"
    if sidecar.exists():
        spec = read_spec(sidecar)
        dt, sc = spec.drift_type, spec.scenario
    return StreamEntry(Path(path).name, tuple(read_stream(path)), dt, sc)


def cmd_sweep(args) -> dict:
    streams = args.streams if isinstance(args.streams, list) else [args.streams]
    pruning = {"on": (True,), "off": (False,), "both": (True, False)}[args.prune]
    points = grid_points(_floats(args.alphas), _floats(args.betas), _ints(args.windows), pruning)
    entries = [_stream_entry(p) for p in streams]
    rows = sweep(entries, points, _ints(args.seeds), RunConfig(), jobs=int(args.jobs))
    Path(args.out).write_text(scenario_table_csv(rows), encoding="utf-8")
    if args.long_out:
        Path(args.long_out).write_text(sweep_long_csv(rows), encoding="utf-8")
    failed = [r.key for r in rows if r.error]
    return {"rows": len(rows), "failed": failed, "out": str(args.out)}


_COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        resolve(args)
        summary = _COMMANDS[args.command](args)
    except (DriftGMMError, OSError, ValueError, KeyError, TypeError) as exc:
        record = {
            "status": "error",
            "command": args.command,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        line = getattr(exc, "line", None)
        if line is not None:
            record["line"] = line
        print(json.dumps(record), file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps({"status": "ok", "command": args.command, **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
