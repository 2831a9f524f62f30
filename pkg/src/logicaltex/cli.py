"""Operator entry point: detect, convert, degrade, validate and batch runs.

Exit codes form a fixed lattice: 0 all pass, 1 any warning, 2 any
failure, 3 usage or I/O error.  The default output mode writes a
suffixed copy next to the input; nothing is overwritten unless asked
for twice (--output inplace --force).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import difflib
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .arxiv import ArxivClient, ArxivError, is_valid_id
from .converter import ConversionPolicy, Scope, convert
from .degrader import PROFILE_NAMES, emit_pairs
from .detector import classify, detect_all
from .lexer import decode_source, parse
from .model import extract_logical, strip_styling
from .validator import (
    ExtractedMetadata,
    MetadataScores,
    Thresholds,
    Verdict,
    compare_metadata,
    validate,
)

SCHEMA_VERSION = 1
DEFAULT_SUFFIX = ".logical.tex"

EXIT_PASS = 0
EXIT_WARN = 1
EXIT_FAIL = 2
EXIT_USAGE = 3


@dataclass
class RunConfig:
    scope: str = "metadata"
    threshold: float = 0.5
    affiliation_cmd: str = "thanks"
    aggressive: bool = False
    output: str = "copy"  # copy | stdout | inplace
    force: bool = False
    suffix: str = DEFAULT_SUFFIX
    report: str = "human"  # human | machine
    profiles: list[str] = field(default_factory=lambda: ["centerline-style"])
    seeds: list[int] = field(default_factory=lambda: [0])
    out_dir: str = "degraded"
    jobs: int = 1
    cache_dir: str = ""
    offline: bool = False
    arxiv_id: str = ""
    title_threshold: float = 0.9
    author_threshold: float = 0.9
    abstract_threshold: float = 0.85

    def policy(self) -> ConversionPolicy:
        return ConversionPolicy(
            scope=Scope.FULL if self.scope == "full" else Scope.METADATA_ONLY,
            affiliation_command=self.affiliation_cmd,
            apply_threshold=self.threshold,
            aggressive=self.aggressive,
        )

    def thresholds(self) -> Thresholds:
        return Thresholds(self.title_threshold, self.author_threshold,
                          self.abstract_threshold)

    def resolved_cache_dir(self) -> Path:
        if self.cache_dir:
            return Path(self.cache_dir)
        env = os.environ.get("LOGICALTEX_CACHE_DIR")
        if env:
            return Path(env)
        return Path.home() / ".cache" / "logicaltex" / "arxiv"


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        known = set(cfg.__dataclass_fields__)
        unknown = set(file_values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **file_values)
    for name in cfg.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg


class _Reporter:
    def __init__(self, mode: str, out=None):
        self.mode = mode
        self.out = out or sys.stdout

    def emit(self, record: dict, human: str):
        if self.mode == "machine":
            record = {"schema": SCHEMA_VERSION, **record}
            print(json.dumps(record, ensure_ascii=False), file=self.out)
        else:
            print(human, file=self.out)


def _read(path: Path) -> bytes:
    return path.read_bytes()


def _worst(verdicts) -> int:
    order = {Verdict.PASS: EXIT_PASS, Verdict.WARN: EXIT_WARN, Verdict.FAIL: EXIT_FAIL}
    code = EXIT_PASS
    for v in verdicts:
        code = max(code, order[v])
    return code


def _detection_rows(dets) -> list[dict]:
    rows = []
    for det in sorted(dets.all(), key=lambda d: (d.span.start, d.kind.value)):
        rows.append({
            "kind": det.kind.value,
            "span": [det.span.start, det.span.end],
            "line": det.span.line,
            "confidence": det.confidence,
            "cues": sorted(c.kind.value for c in det.cues),
        })
    return rows


def cmd_detect(paths: list[Path], cfg: RunConfig) -> int:
    reporter = _Reporter(cfg.report)
    for path in paths:
        tree = parse(_read(path))
        dets = detect_all(tree)
        cls = classify(tree)
        rows = _detection_rows(dets)
        human_lines = [f"{path}: {cls.label.value} (visual score {cls.score:.2f})"]
        for r in rows:
            human_lines.append(
                f"  line {r['line']:>4}  {r['kind']:<17} conf {r['confidence']:.2f}  "
                f"cues: {', '.join(r['cues'])}")
        reporter.emit(
            {"command": "detect", "path": str(path), "class": cls.label.value,
             "score": cls.score, "detections": rows},
            "\n".join(human_lines))
    return EXIT_PASS


def _convert_one(path: Path, cfg: RunConfig):
    source = _read(path)
    output, report = convert(source, cfg.policy())
    return source, output, report


def _output_path(path: Path, cfg: RunConfig) -> Path:
    return path.with_name(path.stem + cfg.suffix)


def cmd_convert(paths: list[Path], cfg: RunConfig) -> int:
    reporter = _Reporter(cfg.report)
    worst = EXIT_PASS
    for path in paths:
        source, output, report = _convert_one(path, cfg)
        if cfg.output == "stdout":
            sys.stdout.write(decode_source(output))
        elif cfg.output == "inplace":
            path.write_bytes(output if isinstance(output, bytes) else output.encode())
        else:
            _output_path(path, cfg).write_bytes(
                output if isinstance(output, bytes) else output.encode())
        record = {
            "command": "convert",
            "path": str(path),
            "output": (str(_output_path(path, cfg)) if cfg.output == "copy"
                       else cfg.output),
            "class_before": report.class_before.label.value,
            "class_after": report.class_after.label.value,
            "applied": [
                {"kind": d.kind.value, "span": [e.span.start, e.span.end],
                 "confidence": d.confidence, "replacement": e.replacement}
                for d, e in report.applied],
            "skipped": [
                {"kind": d.kind.value, "span": [d.span.start, d.span.end],
                 "confidence": d.confidence, "reason": r}
                for d, r in report.skipped],
            "warnings": report.warnings,
        }
        human = [f"{path}: {report.class_before.label.value} -> "
                 f"{report.class_after.label.value}, "
                 f"{len(report.applied)} applied, {len(report.skipped)} skipped"]
        if cfg.report == "human" and report.applied:
            diff = difflib.unified_diff(
                decode_source(source).splitlines(keepends=True),
                decode_source(output).splitlines(keepends=True),
                fromfile=str(path), tofile=str(_output_path(path, cfg)))
            human.append("".join(diff))
        for d, r in report.skipped:
            human.append(f"  skipped {d.kind.value} (conf {d.confidence:.2f}): {r}")
        for w in report.warnings:
            human.append(f"  warning: {w}")
        reporter.emit(record, "\n".join(human))
        if report.warnings:
            worst = max(worst, EXIT_WARN)
    return worst


def cmd_degrade(paths: list[Path], cfg: RunConfig) -> int:
    reporter = _Reporter(cfg.report)
    worst = EXIT_PASS
    if len(paths) == 1 and paths[0].is_dir():
        corpus = paths[0]
    else:
        corpus = None
    out_dir = Path(cfg.out_dir)
    if corpus is not None:
        rows = emit_pairs(corpus, out_dir, cfg.profiles, cfg.seeds)
    else:
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            stage = Path(tmp)
            for p in paths:
                (stage / p.name).write_bytes(_read(p))
            rows = emit_pairs(stage, out_dir, cfg.profiles, cfg.seeds)
    for row in rows:
        if "skipped" in row:
            worst = max(worst, EXIT_WARN)
            reporter.emit({"command": "degrade", **row},
                          f"{row['source']}: skipped ({row['skipped']})")
        else:
            reporter.emit({"command": "degrade", **row},
                          f"{row['source']} -> {row['visual']} (seed {row['seed']})")
    reporter.emit(
        {"command": "degrade-summary", "pairs": sum(1 for r in rows if "visual" in r),
         "skipped": sum(1 for r in rows if "skipped" in r),
         "manifest": str(out_dir / "manifest.jsonl")},
        f"manifest: {out_dir / 'manifest.jsonl'}")
    return worst


def _infer_arxiv_id(path: Path) -> str | None:
    stem = path.name
    for suffix in (".visual.tex", ".logical.tex", ".tex"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
            break
    candidate = stem.replace("_", "/")
    if is_valid_id(stem):
        return stem
    if is_valid_id(candidate):
        return candidate
    return None


def _extracted_from(output) -> ExtractedMetadata:
    logical = extract_logical(parse(output))
    return ExtractedMetadata(
        title=logical.title_plain,
        authors=[strip_styling(a.name_raw) for a in logical.authors],
        abstract=strip_styling(logical.abstract_raw)
        if logical.abstract_raw is not None else None,
    )


def _sidecar_reference(path: Path):
    from .degrader import GroundTruth

    name = path.name
    for suffix in (".visual.tex", ".tex"):
        if name.endswith(suffix):
            stem = name[: -len(suffix)]
            sidecar = path.with_name(stem + ".truth.json")
            if sidecar.exists():
                truth = GroundTruth.from_json(sidecar.read_text(encoding="utf-8"))
                return ExtractedMetadata(
                    title=truth.title,
                    authors=[n for n, _ in truth.authors],
                    abstract=truth.abstract,
                )
    return None


def _validate_one(path: Path, cfg: RunConfig, client: ArxivClient | None):
    source = _read(path)
    output, report = convert(source, cfg.policy())
    scores: MetadataScores | None = None
    notes: list[str] = []
    reference = _sidecar_reference(path)
    arxiv_id = cfg.arxiv_id or _infer_arxiv_id(path)
    if reference is None and arxiv_id and client is not None:
        try:
            reference = client.fetch(arxiv_id)
        except ArxivError as exc:
            notes.append(f"no reference record: {exc}")
    if reference is not None:
        scores = compare_metadata(_extracted_from(output), reference)
    result = validate(source, output, report.plan, scores, cfg.thresholds())
    result.notes.extend(notes)
    return output, report, result


def cmd_validate(paths: list[Path], cfg: RunConfig) -> int:
    reporter = _Reporter(cfg.report)
    client = ArxivClient(cfg.resolved_cache_dir(), offline=cfg.offline)
    verdicts = []
    for path in paths:
        output, report, result = _validate_one(path, cfg, client)
        verdicts.append(result.verdict)
        record = {"command": "validate", "path": str(path), **result.to_dict()}
        human = [f"{path}: {result.verdict.value.upper()} "
                 f"(body preserved: {result.body_preserved}, "
                 f"structural delta: {len(result.structural_delta)})"]
        if result.metadata is not None:
            human.append(f"  scores: {result.metadata.to_dict()}")
        for n in result.notes:
            human.append(f"  note: {n}")
        reporter.emit(record, "\n".join(human))
    return _worst(verdicts)


def _batch_worker(args: tuple[str, dict]) -> dict:
    path_str, cfg_dict = args
    cfg = RunConfig(**cfg_dict)
    path = Path(path_str)
    try:
        source = _read(path)
        cls_before = classify(parse(source))
        output, report, result = _validate_one(path, cfg, None)
        return {
            "path": path_str,
            "class": cls_before.label.value,
            "verdict": result.verdict.value,
            "body_preserved": result.body_preserved,
            "structural_delta": len(result.structural_delta),
            "metadata": result.metadata.to_dict() if result.metadata else None,
            "warnings": report.warnings,
        }
    except Exception as exc:  # per-file failures never abort the batch
        return {"path": path_str, "error": f"{type(exc).__name__}: {exc}",
                "verdict": Verdict.FAIL.value, "class": "error"}


def _batch_paths(corpus: Path) -> list[Path]:
    visual = sorted(corpus.glob("*.visual.tex"))
    if visual:
        return visual
    return sorted(p for p in corpus.glob("*.tex")
                  if not p.name.endswith(DEFAULT_SUFFIX))


def cmd_batch(corpus: Path, cfg: RunConfig) -> int:
    reporter = _Reporter(cfg.report)
    paths = _batch_paths(corpus)
    cfg_dict = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    jobs = max(1, cfg.jobs)
    work = [(str(p), cfg_dict) for p in paths]
    if jobs == 1:
        results = [_batch_worker(w) for w in work]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_batch_worker, work))
    results.sort(key=lambda r: r["path"])
    tallies = {"pass": 0, "warn": 0, "fail": 0}
    classes = {"logical": 0, "mixed": 0, "visual": 0, "error": 0}
    for r in results:
        tallies[r["verdict"]] += 1
        classes[r.get("class", "error")] += 1
        reporter.emit({"command": "batch-file", **r},
                      f"{r['path']}: {r.get('class', '?')} -> {r['verdict']}")
    total = len(results) or 1
    prevalence = (classes["mixed"] + classes["visual"]) / total
    summary = {
        "command": "batch-summary",
        "files": len(results),
        "classes": classes,
        "conversion": tallies,
        "visual_prevalence": prevalence,
    }
    reporter.emit(summary,
                  f"{len(results)} files: {classes} | conversions {tallies} | "
                  f"visual prevalence {prevalence:.1%}")
    if tallies["fail"]:
        return EXIT_FAIL
    if tallies["warn"]:
        return EXIT_WARN
    return EXIT_PASS


class _Parser(argparse.ArgumentParser):
    # usage errors belong to exit code 3, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="logicaltex",
        description="Rewrite visually formatted LaTeX into logical LaTeX, "
                    "verifiably.")
    parser.add_argument("--config", help="JSON config file mirroring the flags")
    parser.add_argument("--report", choices=["human", "machine"], default=None,
                        help="report format (default: human)")
    parser.add_argument("--cache-dir", dest="cache_dir", default=None,
                        help="metadata cache directory "
                             "(env: LOGICALTEX_CACHE_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="list detections and classify")
    p_detect.add_argument("paths", nargs="+", type=Path)

    p_convert = sub.add_parser("convert", help="rewrite to logical commands")
    p_convert.add_argument("paths", nargs="+", type=Path)
    p_convert.add_argument("--scope", choices=["metadata", "full"], default=None)
    p_convert.add_argument("--threshold", type=float, default=None)
    p_convert.add_argument("--affiliation-cmd", dest="affiliation_cmd",
                           choices=["thanks", "affiliation"], default=None)
    p_convert.add_argument("--aggressive", action="store_true", default=None)
    p_convert.add_argument("--output", choices=["copy", "stdout", "inplace"],
                           default=None)
    p_convert.add_argument("--force", action="store_true", default=None,
                           help="required for --output inplace")
    p_convert.add_argument("--suffix", default=None,
                           help=f"suffix for copies (default {DEFAULT_SUFFIX})")

    p_degrade = sub.add_parser("degrade", help="make visual pairs with ground truth")
    p_degrade.add_argument("paths", nargs="+", type=Path,
                           help="corpus directory or .tex files")
    p_degrade.add_argument("--out", dest="out_dir", default=None)
    p_degrade.add_argument("--profiles", type=lambda s: s.split(","), default=None,
                           help="comma list from: " + ", ".join(PROFILE_NAMES))
    p_degrade.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")],
                           default=None)

    p_validate = sub.add_parser("validate", help="check conversions")
    p_validate.add_argument("paths", nargs="+", type=Path)
    p_validate.add_argument("--arxiv-id", dest="arxiv_id", default=None)
    p_validate.add_argument("--offline", action="store_true", default=None)
    p_validate.add_argument("--cache-dir", dest="cache_dir",
                            default=argparse.SUPPRESS)
    p_validate.add_argument("--scope", choices=["metadata", "full"], default=None)
    p_validate.add_argument("--aggressive", action="store_true", default=None)

    p_batch = sub.add_parser("batch", help="aggregate a whole corpus")
    p_batch.add_argument("corpus", type=Path)
    p_batch.add_argument("--jobs", type=int, default=None)
    p_batch.add_argument("--scope", choices=["metadata", "full"], default=None)
    p_batch.add_argument("--aggressive", action="store_true", default=None)
    p_batch.add_argument("--offline", action="store_true", default=None)
    p_batch.add_argument("--cache-dir", dest="cache_dir",
                         default=argparse.SUPPRESS)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "detect":
            return cmd_detect(args.paths, cfg)
        if args.command == "convert":
            if cfg.output == "inplace" and not cfg.force:
                print("error: --output inplace requires --force", file=sys.stderr)
                return EXIT_USAGE
            return cmd_convert(args.paths, cfg)
        if args.command == "degrade":
            return cmd_degrade(args.paths, cfg)
        if args.command == "validate":
            return cmd_validate(args.paths, cfg)
        if args.command == "batch":
            if not args.corpus.is_dir():
                print(f"error: {args.corpus} is not a directory", file=sys.stderr)
                return EXIT_USAGE
            return cmd_batch(args.corpus, cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser.error("unknown command")
    return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
