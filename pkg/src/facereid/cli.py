"""Command-line surface: analyze, simulate, ablate, stories, replay.

Exit codes: 0 success, 1 usage or input problem, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import importlib
import sys
from dataclasses import fields
from pathlib import Path

from . import ablation, catalog
from .pipeline import RunSummary, run
from .providers import ReplayError, frame_dir_source, replay, simulate, synthetic_source
from .scenario import ScenarioScript, ScriptError, load_script
from .types import EngineParams, ValidationPolicy, params_from_dict, validate_params

_INT_PARAMS = {"t_min", "min_hold_appearances", "embedding_dim", "t_lookback"}
_FLOAT_PARAMS = {"sigma_h", "tau_d", "tau_iou"}


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_bool(raw: str, name: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{name} must be a boolean (true/false), got {raw!r}")


def _coerce_param(name: str, raw: str):
    if name in _INT_PARAMS:
        return int(raw)
    if name in _FLOAT_PARAMS:
        return float(raw)
    if name == "exclusive_match":
        return _parse_bool(raw, name)
    if name == "validation_policy":
        return ValidationPolicy(raw.strip().lower())
    raise ValueError(f"unknown parameter: {name}")


def load_params_file(path: str | Path) -> dict:
    """Flat ``key = value`` file mirroring the engine parameter names."""
    known = {f.name for f in fields(EngineParams)}
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        name, _, value = line.partition("=")
        name = name.strip()
        if name not in known:
            raise ValueError(f"{path}:{lineno}: unknown parameter: {name}")
        try:
            values[name] = _coerce_param(name, value.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {name}: {exc}") from None
    return values


def _resolve_params(args) -> EngineParams:
    """Defaults, overlaid by the params file, overlaid by --set flags."""
    values: dict = {}
    if getattr(args, "params", None):
        values.update(load_params_file(args.params))
    for assignment in getattr(args, "set", None) or []:
        if "=" not in assignment:
            raise ValueError(f"--set expects key=value, got {assignment!r}")
        name, _, value = assignment.partition("=")
        name = name.strip()
        values[name] = _coerce_param(name, value.strip())
    return validate_params(params_from_dict(values))


def _print_summary(summary: RunSummary) -> None:
    gallery = summary.gallery
    print(
        f"frames={summary.frames} active={gallery.get('active', 0)} "
        f"held={gallery.get('held', 0)} discarded={gallery.get('discarded', 0)}"
    )
    pairs = " ".join(f"{k}={v}" for k, v in summary.outcomes.items())
    print(f"outcomes: {pairs}")
    if summary.embed_failures:
        print(f"embed_failures={summary.embed_failures}")
    if summary.truncated:
        print(f"TRUNCATED: {summary.error}", file=sys.stderr)
    for warning in summary.warnings:
        print(f"warning: {warning}", file=sys.stderr)


def _load_provider_factory(spec: str):
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise ValueError(f"--provider expects module:callable, got {spec!r}")
    module = importlib.import_module(module_name)
    factory = getattr(module, attr)
    return factory()


def cmd_analyze(args) -> int:
    try:
        params = _resolve_params(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    input_path = Path(args.input)
    if not input_path.exists():
        print(f"error: input {input_path} does not exist", file=sys.stderr)
        return 1

    fps = None
    if input_path.is_dir():
        if not args.provider:
            print(
                "error: analyzing a frame directory requires --provider "
                "module:callable supplying (detector, embedder)",
                file=sys.stderr,
            )
            return 1
        try:
            detector, embedder = _load_provider_factory(args.provider)
        except Exception as exc:
            print(f"error: cannot load provider {args.provider!r}: {exc}", file=sys.stderr)
            return 1
        source = frame_dir_source(input_path, detector, embedder)
        provider_desc = {
            "kind": "frame_dir",
            "directory": str(input_path),
            "provider": args.provider,
        }
    else:
        try:
            script = load_script(input_path)
        except ScriptError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        source = synthetic_source(script, embedding_dim=params.embedding_dim)
        provider_desc = _synthetic_descriptor(script, input_path)
        fps = script.fps

    try:
        with catalog.LogWriter(args.log) as sink:
            summary = run(
                source,
                params,
                sink,
                embed_in_log=args.embed_in_log,
                deterministic=args.deterministic,
                provider=provider_desc,
                fps=fps,
            )
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(summary)
    return 0


def _synthetic_descriptor(script: ScenarioScript, path: Path) -> dict:
    return {
        "kind": "synthetic",
        "script": path.name,
        "seed": script.seed,
        "frame_size": list(script.frame_size),
    }


def cmd_simulate(args) -> int:
    try:
        script = load_script(args.input)
    except ScriptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    embedding_dim = args.embedding_dim
    lines = ["frame,true_id,occluded,score,x1,y1,x2,y2"]
    detections = 0
    false_positives = 0
    try:
        for frame in simulate(script, embedding_dim=embedding_dim):
            for det, true_id, occ in zip(frame.detections, frame.true_ids, frame.occluded):
                detections += 1
                if true_id is None:
                    false_positives += 1
                box = det.box
                lines.append(
                    f"{frame.frame_index},{'' if true_id is None else true_id},"
                    f"{int(occ)},{det.score:.4f},"
                    f"{box.x1:.2f},{box.y1:.2f},{box.x2:.2f},{box.y2:.2f}"
                )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"frames={script.frame_count} persons={len(script.persons)} "
        f"detections={detections} false_positives={false_positives}"
    )
    return 0


def cmd_ablate(args) -> int:
    if args.counts:
        try:
            counts = [int(c) for c in args.counts.split(",")]
            report = ablation.report_from_counts(counts)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    else:
        if not args.input:
            print("error: ablate needs --input <script> or --counts", file=sys.stderr)
            return 1
        try:
            base = _resolve_params(args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        try:
            script = load_script(args.input)
        except ScriptError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        try:
            report = ablation.run_ablation(script, base)
        except Exception as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    print(ablation.format_report(report))
    if args.report:
        ablation.write_report_csv(report, args.report)
    return 0


def _story_identities(records, identity_arg: str) -> list[int]:
    if identity_arg == "all":
        return catalog.active_identity_ids(records)
    return [int(identity_arg)]


def cmd_stories(args) -> int:
    try:
        records = catalog.read_log(args.log)
    except (OSError, catalog.LogFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        identities = _story_identities(records, args.identity)
        if args.mode == "timeline":
            timeline = catalog.presence_timeline(records)
            catalog.write_presence_csv(timeline, out_dir / "presence.csv")
            catalog.render_presence_svg(timeline, out_dir / "presence.svg")
            print(f"wrote presence.csv and presence.svg for {len(timeline.identity_ids)} identities")
        elif args.mode == "segments":
            segments = []
            for identity_id in identities:
                segments.extend(
                    catalog.build_segments(records, identity_id, args.max_gap)
                )
            catalog.write_segments_csv(segments, out_dir / "segments.csv")
            print(f"wrote segments.csv with {len(segments)} segments")
        else:  # face or mouth crops
            scale = _parse_scale(args.scale) if args.scale else None
            total_rows = 0
            for identity_id in identities:
                manifest = catalog.crop_manifest(
                    records, identity_id, args.mode, scale=scale
                )
                catalog.write_manifest_csv(
                    manifest, out_dir / f"manifest_id{identity_id:04d}_{args.mode}.csv"
                )
                total_rows += len(manifest.rows)
                if args.frames:
                    result = catalog.apply_crops(
                        manifest, args.frames, out_dir / f"crops_id{identity_id:04d}"
                    )
                    for warning in result.warnings:
                        print(f"warning: {warning}", file=sys.stderr)
            print(f"wrote {args.mode} manifests for {len(identities)} identities ({total_rows} rows)")
    except (catalog.CatalogError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _parse_scale(raw: str) -> tuple[int, int]:
    parts = raw.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"--scale expects WxH, got {raw!r}")
    return int(parts[0]), int(parts[1])


def cmd_replay(args) -> int:
    try:
        stream = replay(args.log)
    except (OSError, catalog.LogFormatError, ReplayError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.params or args.set:
            params = _resolve_params(args)
        else:
            params = validate_params(params_from_dict(stream.header.params))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    provider_desc = {"kind": "replay", "source_log": str(args.log)}
    try:
        with catalog.LogWriter(args.out_log) as sink:
            summary = run(
                stream,
                params,
                sink,
                embed_in_log=args.embed_in_log,
                deterministic=args.deterministic,
                provider=provider_desc,
                fps=stream.header.fps,
            )
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_summary(summary)
    return 0


def _add_params_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params", help="parameters file (key = value per line)")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one engine parameter (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facereid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[], help="run the engine over a scenario script or frame directory")
    p.add_argument("--input", required=True, help="scenario script file or frame directory")
    p.add_argument("--log", required=True, help="analysis log output path")
    _add_params_flags(p)
    p.add_argument("--embed-in-log", action="store_true", help="include embeddings in the log (needed for replay)")
    p.add_argument("--deterministic", action="store_true", help="suppress wall-clock fields for byte-stable logs")
    p.add_argument("--provider", help="module:callable returning (detector, embedder) for directory input")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="dump a scenario's ground-truth detection stream")
    p.add_argument("--input", required=True, help="scenario script file")
    p.add_argument("--out", help="ground truth CSV output path")
    p.add_argument("--embedding-dim", type=int, default=512)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ablate", help="run the four-configuration ablation")
    p.add_argument("--input", help="scenario script file")
    p.add_argument("--report", help="report CSV output path")
    p.add_argument("--counts", help="skip the runs and compute the gain from e1,e2,e3,e4")
    _add_params_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("stories", help="build identity catalogs from an analysis log")
    p.add_argument("--log", required=True, help="analysis log path")
    p.add_argument("--identity", default="all", help="identity id or 'all'")
    p.add_argument("--mode", required=True, choices=["face", "mouth", "segments", "timeline"])
    p.add_argument("--frames", help="frame image directory (enables crop image output)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", help="crop output size WxH")
    p.add_argument("--max-gap", type=int, default=12, help="max frame gap merged into one segment")
    p.set_defaults(func=cmd_stories)

    p = sub.add_parser("replay", help="re-run the engine on a previously recorded log")
    p.add_argument("--log", required=True, help="input analysis log (with embeddings)")
    p.add_argument("--out-log", required=True, help="new analysis log output path")
    _add_params_flags(p)
    p.add_argument("--embed-in-log", action="store_true")
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
