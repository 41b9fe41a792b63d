"""Command-line surface: extract, predict, train, aggregate, evaluate, simulate, compare.

Every command accepts ``--config FILE`` (flat ``key = value`` lines with
``${VAR}`` environment interpolation, intended for secrets only); command-line
flags override config values. Each run writes a metadata file recording the
argv, config digest, and outputs, sufficient to re-execute the run.

Exit codes: 0 success, 2 config error, 3 input error, 4 backend failure,
5 internal invariant breach.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .aggregate import (
    LrHyperparams,
    ThresholdRule,
    compute_stats,
    feature_matrix,
    load_model_card,
    predict_video,
    save_model_card,
    threshold_aggregate,
    train_aggregator,
    write_features_csv,
)
from .backends import BackendError, BackendSpec
from .core import (
    ExtractionMode,
    FrameLabel,
    FramePrediction,
    InputError,
    PipelineError,
    SchemaViolation,
    group_predictions_by_video,
    read_dataset_manifest,
    read_prediction_log,
    sha256_hex,
    validate_prediction_log,
    write_dataset_manifest,
    write_prediction_log,
    VideoVerdict,
    read_jsonl,
    write_jsonl,
)
from .evaluation import (
    EXPECTED_RUNS,
    evaluate_frames,
    evaluate_videos,
    frame_labels_by_video,
    paired_t_test,
    write_comparison_json,
    write_report_csv,
    write_report_json,
)
from .keyframes import ExtractionConfig, ImageFormat, extract_keyframes, load_manifest, manifest_path_for, write_manifest
from .prompting import get_category_set
from .rng import stable_generator
from .sequencer import PolicyKind, ReferencePolicy, load_pair_table, process_video
from .synth import PatternSpec, gen_corpus, load_truth_table, write_truth_table


class ConfigError(PipelineError):
    """Invalid configuration file or flag combination."""


class InternalInvariantError(PipelineError):
    """The pipeline produced output violating its own contract."""


_CONFIG_LINE_RE = re.compile(r"^([A-Za-z0-9_.-]+)\s*=\s*(.*)$")
_ENV_REF_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def load_config(path: str | Path) -> dict[str, str]:
    """Parse the flat key = value config format with ${VAR} interpolation."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = _CONFIG_LINE_RE.match(stripped)
        if not match:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, raw_value = match.group(1), match.group(2).strip()

        def expand(m: re.Match) -> str:
            name = m.group(1)
            if name not in os.environ:
                raise ConfigError(f"{path}:{lineno}: environment variable {name} is not set")
            return os.environ[name]

        values[key] = _ENV_REF_RE.sub(expand, raw_value)
    return values


@dataclass
class Settings:
    """Flag-over-config-over-default resolution for one command invocation."""

    config: dict[str, str]
    config_path: Path | None

    def get(self, key: str, flag_value, default=None, cast=str):
        if flag_value is not None:
            return flag_value
        if key in self.config:
            raw = self.config[key]
            try:
                if cast is bool:
                    return raw.lower() in ("1", "true", "yes", "on")
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key}: cannot parse {raw!r}") from exc
        return default


def _write_runmeta(command: str, argv: Sequence[str], settings: Settings, outputs: Sequence[Path], started: float) -> None:
    if not outputs:
        return
    runmeta_dir = Path(outputs[0]).resolve().parent / "runmeta"
    runmeta_dir.mkdir(parents=True, exist_ok=True)
    config_digest = None
    if settings.config_path is not None:
        config_digest = sha256_hex(Path(settings.config_path).read_bytes())
    doc = {
        "command": command,
        "argv": list(argv),
        "config_path": str(settings.config_path) if settings.config_path else None,
        "config_digest": config_digest,
        "package_version": __version__,
        "python_version": sys.version.split()[0],
        "started_at_unix": started,
        "finished_at_unix": time.time(),
        "outputs": [str(p) for p in outputs],
    }
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime(started))
    digest = sha256_hex(json.dumps(doc["argv"]))[:8]
    (runmeta_dir / f"{command}-{stamp}-{digest}.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )


def _parse_range(text: str, flag: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise ConfigError(f"{flag} expects LO:HI, got {text!r}") from exc


def _parse_extraction_mode(text: str) -> ExtractionMode:
    if text.lower() == "iframes":
        return ExtractionMode.iframes()
    if text.lower().startswith("fps:"):
        try:
            return ExtractionMode.fixed_fps(float(text[4:]))
        except ValueError as exc:
            raise ConfigError(f"bad extraction mode {text!r}") from exc
    raise ConfigError(f"extraction mode must be 'iframes' or 'fps:<rate>', got {text!r}")


def _parse_image_format(text: str) -> ImageFormat:
    if text.lower() == "png":
        return ImageFormat("PNG")
    if text.lower().startswith("jpeg:"):
        try:
            return ImageFormat("JPEG", int(text[5:]))
        except ValueError as exc:
            raise ConfigError(f"bad image format {text!r}") from exc
    raise ConfigError(f"image format must be 'png' or 'jpeg:<quality>', got {text!r}")


_POLICY_NAMES = {
    "noref": PolicyKind.NO_REF,
    "lastclean": PolicyKind.LAST_CLEAN_FRAME,
    "previous": PolicyKind.PREVIOUS_FRAME,
    "random": PolicyKind.RANDOM_FRAME,
    "manual": PolicyKind.MANUAL_PAIRS,
}


def _build_policy(settings: Settings, args: argparse.Namespace) -> ReferencePolicy:
    name = settings.get("policy", args.policy, default="lastclean").lower()
    if name not in _POLICY_NAMES:
        raise ConfigError(f"unknown policy {name!r} (choose from {', '.join(_POLICY_NAMES)})")
    kind = _POLICY_NAMES[name]
    if kind is PolicyKind.MANUAL_PAIRS:
        table_path = settings.get("pair_table", args.pair_table)
        if not table_path:
            raise ConfigError("manual policy requires --pair-table")
        return ReferencePolicy.manual_pairs(load_pair_table(table_path))
    seed = settings.get("policy.seed", args.policy_seed, default=0, cast=int)
    return ReferencePolicy(kind, seed=seed)


def _build_backend_spec(settings: Settings, args: argparse.Namespace) -> BackendSpec:
    kind = settings.get("backend.kind", args.backend, default="simulated").lower()
    try:
        return BackendSpec(
            kind=kind,
            tpr=settings.get("backend.tpr", args.tpr, default=1.0, cast=float),
            fpr=settings.get("backend.fpr", args.fpr, default=0.0, cast=float),
            seed=settings.get("backend.seed", args.seed, default=0, cast=int),
            cache_dir=settings.get("backend.cache_dir", args.cache_dir),
            strict=not settings.get("backend.lenient", args.lenient or None, default=False, cast=bool),
            endpoint_url=settings.get("backend.endpoint_url", args.endpoint),
            model_name=settings.get("backend.model_name", args.model),
            api_key_env_var=settings.get("backend.api_key_env", args.api_key_env, default="OPENAI_API_KEY"),
            timeout_s=settings.get("backend.timeout_s", args.timeout, default=60.0, cast=float),
            max_retries=settings.get("backend.max_retries", args.retries, default=3, cast=int),
            request_image_max_dim=settings.get("backend.image_max_dim", args.image_max_dim, cast=int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _collect_manifests(paths: Sequence[str]) -> list[Path]:
    out: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            out.extend(sorted(path.glob("*.manifest.json")))
        elif path.exists():
            out.append(path)
        else:
            raise InputError(f"no such manifest or directory: {path}")
    if not out:
        raise InputError("no manifests found")
    return out


def cmd_simulate(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()
    out_dir = Path(args.out)
    spec = PatternSpec(
        duration_frames=_parse_range(args.duration, "--duration"),
        onset_fraction=args.onset_fraction,
        onset_jitter_frames=args.onset_jitter,
        tail_clean_frames=_parse_range(args.tail, "--tail"),
        seed=args.seed,
    )
    corpus = gen_corpus(args.n_glitchy, args.n_clean, spec, fps=args.fps)
    dataset_path = out_dir / "dataset.jsonl"
    truth_path = out_dir / "truth.jsonl"
    write_dataset_manifest(corpus.records, dataset_path)
    write_truth_table(corpus.truth, truth_path)
    manifest_dir = out_dir / "manifests"
    for manifest in corpus.manifests:
        write_manifest(manifest, manifest_path_for(manifest.video_id, manifest_dir))
    print(f"simulate: {args.n_glitchy} glitchy + {args.n_clean} clean videos -> {out_dir}")
    _write_runmeta("simulate", argv, settings, [dataset_path, truth_path, manifest_dir], started)
    return 0


def cmd_extract(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()
    mode = _parse_extraction_mode(settings.get("extraction.mode", args.mode, default="iframes"))
    image_format = _parse_image_format(settings.get("extraction.format", args.format, default="png"))
    out_dir = Path(args.out)
    cfg = ExtractionConfig(
        mode=mode,
        output_dir=out_dir / "frames",
        image_format=image_format,
        decoder_binary=settings.get("extraction.decoder", args.decoder),
    )
    videos = [Path(v) for v in args.videos]
    ids = [v.stem for v in videos]
    duplicates = {i for i in ids if ids.count(i) > 1}
    if duplicates:
        raise InputError(f"video_id collision: {', '.join(sorted(duplicates))}")
    workers = settings.get("workers", args.workers, default=1, cast=int)
    manifest_dir = out_dir / "manifests"

    def run_one(video: Path):
        manifest = extract_keyframes(video, cfg)
        write_manifest(manifest, manifest_path_for(manifest.video_id, manifest_dir))
        return manifest

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        manifests = list(pool.map(run_one, videos))
    for manifest in manifests:
        print(f"extract: {manifest.video_id}: {len(manifest)} frames")
    _write_runmeta("extract", argv, settings, [manifest_dir], started)
    return 0


def cmd_predict(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()
    manifests = [load_manifest(p) for p in _collect_manifests(args.manifests)]
    manifests.sort(key=lambda m: m.video_id)
    seen: set[str] = set()
    for manifest in manifests:
        if manifest.video_id in seen:
            raise InputError(f"video_id collision: {manifest.video_id}")
        seen.add(manifest.video_id)

    policy = _build_policy(settings, args)
    spec = _build_backend_spec(settings, args)
    truth = None
    if spec.kind == "simulated":
        truth_path = settings.get("truth", args.truth)
        if not truth_path:
            raise ConfigError("simulated backend requires --truth")
        truth = load_truth_table(truth_path)
    backend = spec.build(truth=truth)
    cats = get_category_set(settings.get("categories", args.categories, default="realworld9"))
    default_on_fail = FrameLabel.GLITCHY if args.default_on_fail == "glitchy" else FrameLabel.CLEAN

    log_path = Path(args.out)
    existing_by_video: dict[str, list[FramePrediction]] = {}
    if log_path.exists():
        existing_by_video = group_predictions_by_video(read_prediction_log(log_path))

    workers = settings.get("workers", args.workers, default=1, cast=int)
    n_failed = 0
    results: dict[str, list[FramePrediction]] = {}

    def run_one(manifest) -> tuple[str, list[FramePrediction] | None, str | None]:
        existing = existing_by_video.get(manifest.video_id, [])
        if len(existing) == len(manifest):
            return manifest.video_id, existing, None
        try:
            preds = process_video(
                manifest, policy, backend, cats, default_on_fail=default_on_fail, existing=existing
            )
            return manifest.video_id, preds, None
        except BackendError as exc:
            return manifest.video_id, None, str(exc)

    try:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for video_id, preds, error in pool.map(run_one, manifests):
                if error is not None:
                    n_failed += 1
                    print(f"predict: {video_id}: FAILED: {error}", file=sys.stderr)
                    continue
                violations = validate_prediction_log(preds)
                if violations:
                    raise InternalInvariantError(f"{video_id}: " + "; ".join(violations[:3]))
                results[video_id] = preds
    finally:
        # Rewrite the complete log sorted by video: completed results, the
        # untouched prefix of anything unfinished, and log entries for videos
        # outside this run's manifest set are all preserved.
        merged = dict(existing_by_video)
        for manifest in manifests:
            preds = results.get(manifest.video_id, existing_by_video.get(manifest.video_id, []))
            if preds:
                merged[manifest.video_id] = preds
        ordered = [pred for video_id in sorted(merged) for pred in merged[video_id]]
        if ordered:
            tmp = log_path.with_suffix(log_path.suffix + ".tmp")
            write_prediction_log(ordered, tmp)
            tmp.rename(log_path)

    done = len(results)
    print(f"predict: {done}/{len(manifests)} videos -> {log_path}" + (f" ({n_failed} failed)" if n_failed else ""))
    _write_runmeta("predict", argv, settings, [log_path], started)
    if n_failed:
        raise BackendError(f"{n_failed} video(s) failed")
    return 0


def _training_subset(records, labels_by_video, n_glitchy: int, n_clean: int, seed: int):
    glitchy_ids = sorted(r.video_id for r in records if r.video_label is FrameLabel.GLITCHY and r.video_id in labels_by_video)
    clean_ids = sorted(r.video_id for r in records if r.video_label is FrameLabel.CLEAN and r.video_id in labels_by_video)
    if len(glitchy_ids) < n_glitchy or len(clean_ids) < n_clean:
        raise InputError(
            f"training subset needs {n_glitchy}+{n_clean} videos, have {len(glitchy_ids)}+{len(clean_ids)}"
        )
    rng = stable_generator("trainsplit", seed)
    pick_glitchy = [glitchy_ids[i] for i in rng.permutation(len(glitchy_ids))[:n_glitchy]]
    pick_clean = [clean_ids[i] for i in rng.permutation(len(clean_ids))[:n_clean]]
    return sorted(pick_glitchy), sorted(pick_clean)


def cmd_train(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()
    log = read_prediction_log(args.log)
    records = read_dataset_manifest(args.dataset)
    labels_by_video = frame_labels_by_video(log, include_failed=not args.exclude_failed)
    n_glitchy = settings.get("train.glitchy", args.train_glitchy, default=100, cast=int)
    n_clean = settings.get("train.clean", args.train_clean, default=100, cast=int)
    seed = settings.get("train.seed", args.seed, default=0, cast=int)
    train_glitchy, train_clean = _training_subset(records, labels_by_video, n_glitchy, n_clean, seed)

    train_ids = train_glitchy + train_clean
    stats_rows = [compute_stats(labels_by_video[v]) for v in train_ids]
    X = feature_matrix(stats_rows)
    y01 = np.array([1.0] * len(train_glitchy) + [0.0] * len(train_clean))
    hp = LrHyperparams(
        C=settings.get("train.C", args.C, default=3.0, cast=float),
        max_iter=settings.get("train.max_iter", args.max_iter, default=500, cast=int),
        tol=settings.get("train.tol", args.tol, default=1e-6, cast=float),
        k_folds=settings.get("train.k_folds", args.k_folds, default=5, cast=int),
        seed=seed,
    )
    model = train_aggregator(X, y01, hp)
    save_model_card(model, args.out)
    outputs = [Path(args.out)]
    if args.features_csv:
        label_by_video = {r.video_id: r.video_label for r in records}
        write_features_csv(
            args.features_csv,
            ((v, compute_stats(labels_by_video[v]), label_by_video.get(v)) for v in sorted(labels_by_video)),
        )
        outputs.append(Path(args.features_csv))
    if args.split_out:
        Path(args.split_out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.split_out).write_text(
            json.dumps({"seed": seed, "train_video_ids": train_ids}, indent=2) + "\n", encoding="utf-8"
        )
        outputs.append(Path(args.split_out))
    print(f"train: {len(train_ids)} videos, threshold={model.threshold:.4f} -> {args.out}")
    _write_runmeta("train", argv, settings, outputs, started)
    return 0


def cmd_aggregate(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()
    model_path = settings.get("aggregator.model_card", args.model_card)
    threshold_k = settings.get("aggregator.threshold_k", args.threshold_k, cast=int)
    if (model_path is None) == (threshold_k is None):
        raise ConfigError("choose exactly one of --model-card or --threshold-k")
    log = read_prediction_log(args.log)
    labels_by_video = frame_labels_by_video(log, include_failed=not args.exclude_failed)
    verdicts: list[VideoVerdict] = []
    if model_path is not None:
        model = load_model_card(model_path)
        for video_id in sorted(labels_by_video):
            verdicts.append(predict_video(model, labels_by_video[video_id], video_id))
    else:
        rule = ThresholdRule(threshold_k)
        for video_id in sorted(labels_by_video):
            verdicts.append(threshold_aggregate(labels_by_video[video_id], rule, video_id))
    write_jsonl(args.out, (v.to_json_dict() for v in verdicts))
    print(f"aggregate: {len(verdicts)} verdicts -> {args.out}")
    _write_runmeta("aggregate", argv, settings, [Path(args.out)], started)
    return 0


def _read_verdicts(path: str | Path) -> list[VideoVerdict]:
    out = []
    for lineno, obj in read_jsonl(path):
        try:
            out.append(VideoVerdict.from_json_dict(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad verdict record: {exc}", line=lineno, path=path) from exc
    return out


def cmd_evaluate(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()
    exclude: set[str] = set()
    if args.exclude_videos:
        doc = json.loads(Path(args.exclude_videos).read_text(encoding="utf-8"))
        exclude = set(doc["train_video_ids"])
    if args.level == "video":
        if not args.dataset:
            raise ConfigError("video-level evaluation requires --dataset")
        records = [r for r in read_dataset_manifest(args.dataset) if r.video_id not in exclude]
        verdicts = [v for v in _read_verdicts(args.pred) if v.video_id not in exclude]
        report = evaluate_videos(verdicts, records, setting_id=args.setting_id, by_category=args.by_category)
    else:
        if not args.truth:
            raise ConfigError("frame-level evaluation requires --truth")
        if args.by_category and not args.dataset:
            raise ConfigError("--by-category at frame level requires --dataset for the glitch types")
        truth = load_truth_table(args.truth)
        log = [p for p in read_prediction_log(args.pred) if p.video_id not in exclude]
        records = read_dataset_manifest(args.dataset) if args.dataset else None
        report = evaluate_frames(
            log,
            truth,
            setting_id=args.setting_id,
            include_failed=args.include_failed,
            records=records,
            by_category=args.by_category,
        )
    write_report_json(report, args.out)
    outputs = [Path(args.out)]
    if args.csv:
        write_report_csv(report, args.csv)
        outputs.append(Path(args.csv))
    overall = report.overall
    print(
        f"evaluate[{report.level}] {args.setting_id}: n={overall.n} acc={overall.accuracy:.4f} "
        f"f1={overall.f1:.4f} p={overall.precision:.4f} r={overall.recall:.4f} -> {args.out}"
    )
    _write_runmeta("evaluate", argv, settings, outputs, started)
    return 0


def cmd_compare(args: argparse.Namespace, settings: Settings, argv: Sequence[str]) -> int:
    started = time.time()

    def read_scores(paths: Sequence[str], metric: str) -> list[float]:
        scores = []
        for p in paths:
            doc = json.loads(Path(p).read_text(encoding="utf-8"))
            if metric not in doc:
                raise InputError(f"{p}: report has no {metric!r} field")
            scores.append(float(doc[metric]))
        return scores

    if len(args.a) != len(args.b):
        raise InputError(f"mismatched run counts: {len(args.a)} vs {len(args.b)}")
    if args.expect_runs and len(args.a) != args.expect_runs:
        raise InputError(
            f"expected {args.expect_runs} matched runs (repeated-run protocol), got {len(args.a)}; "
            "pass --expect-runs 0 to override"
        )
    metric_names = ["accuracy", "f1"] if args.metric == "both" else [args.metric]
    results = {}
    for metric_name in metric_names:
        results[metric_name] = paired_t_test(read_scores(args.a, metric_name), read_scores(args.b, metric_name))
    write_comparison_json(args.out, setting_a=args.setting_a, setting_b=args.setting_b, results_by_metric=results)
    for metric_name, res in results.items():
        verdict = "significant" if res.significant_at_0_05 else "not significant"
        print(f"compare[{metric_name}]: t={res.t_stat:.4f} df={res.df} p={res.p_two_sided:.4g} ({verdict})")
    _write_runmeta("compare", argv, settings, [Path(args.out)], started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glitchtriage",
        description="Reference-guided glitch detection pipeline for gameplay videos.",
    )
    parser.add_argument("--config", help="flat key = value config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic corpus (dataset, truth table, manifests)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-glitchy", type=int, default=500)
    p.add_argument("--n-clean", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", default="25:90", help="keyframe count range LO:HI")
    p.add_argument("--onset-fraction", type=float, default=1 / 3)
    p.add_argument("--onset-jitter", type=int, default=2)
    p.add_argument("--tail", default="5:15", help="clean tail range LO:HI")
    p.add_argument("--fps", type=float, default=5.0, help="frame rate recorded in manifests")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extract", help="extract keyframes from video files into manifests")
    p.add_argument("videos", nargs="+", help="video files")
    p.add_argument("--out", required=True, help="output directory (frames/ and manifests/)")
    p.add_argument("--mode", help="iframes or fps:<rate>")
    p.add_argument("--format", help="png or jpeg:<quality>")
    p.add_argument("--decoder", help="decoder binary (default: $GLITCHTRIAGE_FFMPEG or ffmpeg)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("predict", help="run reference-guided prompting over manifests (resumable)")
    p.add_argument("--manifests", nargs="+", required=True, help="manifest files or directories")
    p.add_argument("--out", required=True, help="prediction log (JSONL)")
    p.add_argument("--backend", choices=["simulated", "replay", "http_chat"])
    p.add_argument("--policy", choices=sorted(_POLICY_NAMES))
    p.add_argument("--policy-seed", type=int)
    p.add_argument("--pair-table", help="JSONL pair table for the manual policy")
    p.add_argument("--categories", choices=["realworld9", "refglitch5"])
    p.add_argument("--truth", help="truth table JSONL (simulated backend)")
    p.add_argument("--tpr", type=float)
    p.add_argument("--fpr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--cache-dir", help="replay cache directory")
    p.add_argument("--lenient", action="store_true", help="replay: misses return empty instead of failing")
    p.add_argument("--endpoint", help="chat-completions endpoint URL")
    p.add_argument("--model", help="model name for http_chat")
    p.add_argument("--api-key-env", help="environment variable holding the API key")
    p.add_argument("--timeout", type=float)
    p.add_argument("--retries", type=int)
    p.add_argument("--image-max-dim", type=int)
    p.add_argument("--default-on-fail", choices=["clean", "glitchy"], default="clean")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("train", help="train the learned aggregator on a labeled subset")
    p.add_argument("--log", required=True, help="prediction log")
    p.add_argument("--dataset", required=True, help="dataset manifest with video labels")
    p.add_argument("--out", required=True, help="model card path")
    p.add_argument("--train-glitchy", type=int)
    p.add_argument("--train-clean", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--C", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--k-folds", type=int)
    p.add_argument("--exclude-failed", action="store_true")
    p.add_argument("--features-csv", help="also dump the per-video feature table")
    p.add_argument("--split-out", help="write the training video ids for later exclusion")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("aggregate", help="fuse frame predictions into video verdicts")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True, help="verdicts JSONL")
    p.add_argument("--model-card")
    p.add_argument("--threshold-k", type=int)
    p.add_argument("--exclude-failed", action="store_true")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("evaluate", help="score predictions or verdicts against ground truth")
    p.add_argument("--pred", required=True, help="verdicts JSONL (video) or prediction log (frame)")
    p.add_argument("--level", choices=["video", "frame"], required=True)
    p.add_argument("--dataset", help="dataset manifest (video truth / categories)")
    p.add_argument("--truth", help="truth table JSONL (frame level)")
    p.add_argument("--by-category", action="store_true")
    p.add_argument("--include-failed", action="store_true")
    p.add_argument("--exclude-videos", help="split JSON from train --split-out")
    p.add_argument("--setting-id", default="")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--csv", help="CSV mirror")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="paired t-test between two settings over matched runs")
    p.add_argument("--a", nargs="+", required=True, help="report JSONs for setting A, in seed order")
    p.add_argument("--b", nargs="+", required=True, help="report JSONs for setting B, in seed order")
    p.add_argument("--setting-a", default="A")
    p.add_argument("--setting-b", default="B")
    p.add_argument("--metric", choices=["accuracy", "f1", "both"], default="both")
    p.add_argument("--expect-runs", type=int, default=EXPECTED_RUNS)
    p.add_argument("--out", required=True, help="comparison JSONL")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(
            config=load_config(args.config) if args.config else {},
            config_path=Path(args.config) if args.config else None,
        )
        return args.func(args, settings, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 4
    except InternalInvariantError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return 5
    except PipelineError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
