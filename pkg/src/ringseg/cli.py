"""Command-line entry point: generate, segment, classify, evaluate, pipeline."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .config import ConfigError, PipelineConfig, load_config, merge
from .evaluator import EvaluationError, classify, default_sweep, k_sweep, prepare_dataset
from .features import build_all
from .knn import FULL, DistanceTable, knn_retrieve
from .segmenter import (
    detect_changepoints,
    detect_changepoints_per_feature,
    filter_changepoints,
    segments_from_changepoints,
)
from .synth.dataset import ScenarioSpec, SpecError, build_dataset, load_spec
from .trace import TraceError, dumps_json, load_trace, save_trace, write_atomic

PROG = "ringseg"


class CliError(Exception):
    def __init__(self, msg: str, code: int = 1) -> None:
        super().__init__(msg)
        self.code = code


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"no such file: {path}", code=2)
    return p


def _trace_files(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for path in paths:
        p = _require_file(path)
        files += sorted(p.glob("*.json")) if p.is_dir() else [p]
    if not files:
        raise CliError("no trace files found", code=2)
    return files


def _k_value(text: str) -> int | str:
    if text == "auto":
        return text
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("k must be a positive integer or 'auto'") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be a positive integer or 'auto'")
    return k


def pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, then the --config file, then command-line flags."""
    doc: dict[str, Any] = PipelineConfig().to_dict()
    if getattr(args, "config", None):
        file_cfg = load_config(_require_file(args.config))
        doc = merge(doc, file_cfg.to_dict())
    flags = {
        "segmenter": {
            "alpha": getattr(args, "alpha", None),
            "sg_window": getattr(args, "window", None),
            "min_gap": getattr(args, "min_gap", None),
            "lowpass_cutoff": getattr(args, "cutoff", None),
        },
        "features": {"poly_degree": getattr(args, "poly_degree", None)},
        "k": getattr(args, "k", None),
        "seed": getattr(args, "seed", None),
    }
    return PipelineConfig.from_dict(merge(doc, flags))


def scenario_spec(args: argparse.Namespace) -> ScenarioSpec:
    if args.spec:
        path = _require_file(args.spec)
        load_spec(path)  # validate the file on its own first
        base = json.loads(path.read_text(encoding="utf-8"))
    else:
        base = {"name": args.scenario}
    overrides: dict[str, Any] = {
        "seed": args.seed,
        "rate": args.rate,
        "noise": {"lambda": args.lam, "betas": None if args.beta is None else [args.beta]},
    }
    return ScenarioSpec.from_dict(merge(base, overrides))


def _load(path: Path):
    try:
        return load_trace(path)
    except TraceError as exc:
        raise CliError(f"{path.name}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    spec = scenario_spec(args)
    out = Path(args.out)
    spec_text = json.dumps(spec.to_dict(), sort_keys=True)
    written = []
    for stem, trace in build_dataset(spec):
        trace = type(trace)(trace.sample_rate, trace.frames, trace.annotations, {**trace.meta, "spec": spec_text})
        path = out / f"{stem}.json"
        save_trace(trace, path)
        written.append(path)
    for path in written:
        print(path)
    return 0


def _segment_doc(path: Path, cfg: PipelineConfig, debug: bool):
    trace = _load(path)
    try:
        candidates = detect_changepoints(trace, cfg.segmenter)
    except ValueError as exc:
        raise CliError(f"{path.name}: {exc}") from None
    kept = filter_changepoints(trace, candidates, cfg.segmenter)
    segs = segments_from_changepoints(trace, kept)
    doc: dict[str, Any] = {
        "config": cfg.to_dict(),
        "trace": path.name,
        "changepoints": [{"t": c.t, "idx": c.index, "feature": c.source_feature} for c in kept],
        "segments": [s.to_json() for s in segs],
    }
    if debug:
        per_feature = detect_changepoints_per_feature(trace, cfg.segmenter)
        doc["debug"] = {
            "per_feature": [[int(i) for i in idx] for idx in per_feature],
            "candidates": [{"t": c.t, "idx": c.index, "feature": c.source_feature} for c in candidates],
        }
    return trace, segs, doc


def cmd_segment(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    path = _require_file(args.trace)
    _, segs, doc = _segment_doc(path, cfg, args.debug)
    text = dumps_json(doc)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"{len(segs)} segments", file=sys.stderr)
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    traces = [_load(p) for p in _trace_files(args.dataset)]
    if all(t.annotations is not None for t in traces):
        data = prepare_dataset(traces, cfg)
        report = classify(data, cfg)
        doc = {"config": cfg.to_dict(), **report.retrievals_json()}
        features = data.features
    else:
        # without ground truth, every query must be pinned in the config
        if cfg.k == "auto" or not cfg.exemplars:
            raise CliError("unannotated traces need an integer --k and exemplars in --config")
        segs, features = [], []
        for tr in traces:
            try:
                found = segments_from_changepoints(
                    tr, filter_changepoints(tr, detect_changepoints(tr, cfg.segmenter), cfg.segmenter)
                )
            except ValueError as exc:
                raise CliError(str(exc)) from None
            segs += found
            features += build_all(tr, found, cfg.features)
        table = DistanceTable(features)
        queries = []
        for action, q in sorted(cfg.exemplars.items()):
            if q >= len(features):
                raise CliError(f"exemplar {q} for {action} is not a segment id")
            mask = cfg.masks.get(action, FULL)
            ret = knn_retrieve(q, table, min(cfg.k, len(features)), mask=mask)
            queries.append(
                {"action": action, "query_id": q, "mask": mask.to_json(), "members": [list(m) for m in ret.members]}
            )
        doc = {"config": cfg.to_dict(), "k": cfg.k, "queries": queries}
    write_atomic(Path(args.out), dumps_json(doc))
    if args.features:
        write_atomic(Path(args.features), dumps_json([f.to_json() for f in features]))
    return 0


def _sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "average_f1"])
    for k, f1 in rows:
        w.writerow([k, f"{100 * f1:.2f}"])
    return buf.getvalue()


def _evaluate(traces, cfg: PipelineConfig, out: Path, sweep: bool) -> None:
    data = prepare_dataset(traces, cfg)
    report = classify(data, cfg)
    write_atomic(out / "report.json", dumps_json(report.to_json()))
    write_atomic(out / "report.csv", report.to_csv())
    write_atomic(out / "classification.json", dumps_json({"config": cfg.to_dict(), **report.retrievals_json()}))
    if sweep:
        rows = k_sweep(data, default_sweep(data, cfg), cfg)
        write_atomic(out / "k_sweep.csv", _sweep_csv(rows))
    sys.stdout.write(report.to_csv())


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = pipeline_config(args)
    traces = [_load(p) for p in _trace_files(args.dataset)]
    _evaluate(traces, cfg, Path(args.out), args.k_sweep)
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    spec = scenario_spec(args)
    cfg = pipeline_config(args)
    out = Path(args.out)
    spec_text = json.dumps(spec.to_dict(), sort_keys=True)
    traces = []
    for stem, trace in build_dataset(spec):
        trace = type(trace)(trace.sample_rate, trace.frames, trace.annotations, {**trace.meta, "spec": spec_text})
        path = out / "traces" / f"{stem}.json"
        save_trace(trace, path)
        _, _, doc = _segment_doc(path, cfg, debug=False)
        write_atomic(out / "segments" / f"{stem}.json", dumps_json(doc))
        traces.append(trace)
    _evaluate(traces, cfg, out, args.k_sweep)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="pipeline config JSON (flags override it)")
    g.add_argument("--alpha", type=float, help="peak threshold as a fraction of the largest peak")
    g.add_argument("--window", type=int, help="Savitzky-Golay window (odd sample count)")
    g.add_argument("--min-gap", type=float, help="minimum seconds between changepoints")
    g.add_argument("--cutoff", type=float, help="low-pass cutoff in Hz")
    g.add_argument("--poly-degree", type=int, help="degree of the per-segment polynomial fit")
    g.add_argument("--k", type=_k_value, help="neighbourhood size, or 'auto'")


def _generator_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("generation")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--spec", help="scenario spec JSON")
    src.add_argument("--scenario", default="standard", help="scenario or dataset name when no spec is given")
    g.add_argument("--rate", type=float, help="sample rate in Hz")
    g.add_argument("--beta", type=float, help="add one noisy replica with this spectral scale")
    g.add_argument("--lambda", dest="lam", type=float, help="noise spectral exponent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic annotated traces")
    _generator_flags(p)
    p.add_argument("--seed", type=int, help="scenario seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("segment", help="segment one trace")
    p.add_argument("trace")
    _pipeline_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="segments JSON (default: stdout)")
    p.add_argument("--debug", action="store_true", help="include per-feature candidate changepoints")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("classify", help="retrieve one neighbour set per action class")
    p.add_argument("dataset", nargs="+", help="trace files or directories")
    _pipeline_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="classification JSON")
    p.add_argument("--features", help="also dump per-segment features here")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score segmentation and classification")
    p.add_argument("dataset", nargs="+", help="trace files or directories")
    _pipeline_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--k-sweep", action="store_true", help="also write average F1 for a range of k")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="generate, segment and evaluate in one go")
    _generator_flags(p)
    _pipeline_flags(p)
    p.add_argument("--seed", type=int, help="scenario seed, also recorded in the config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k-sweep", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, SpecError, EvaluationError, TraceError, ValueError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, FileNotFoundError) else 1


if __name__ == "__main__":
    sys.exit(main())
