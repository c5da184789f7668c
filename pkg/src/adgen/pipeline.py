"""Pipeline orchestration: per-clip parallel execution of the full chain
(shots, tracks, identities, overlays, context, prompt, backend), caching,
the optional two-pass context-AD replay, and evaluation."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from adgen import ingest
from adgen.annotate import OverlayStyle, render_overlays, sample_frames
from adgen.backends import create_backend
from adgen.config import RunConfig
from adgen.context import build_context, select_prev_ads, select_subtitle_window
from adgen.faceid import (
    CastGallery,
    GalleryEntry,
    assign_identities,
    build_cast_gallery,
    identify_faces_individually,
    load_gallery,
)
from adgen.metrics import EvalReport, evaluate_run
from adgen.promptgen import (
    ADOutput,
    GenerationError,
    LengthPolicy,
    build_ad_prompt,
    build_frame_caption_prompt,
    bundle_hash,
    generate_ad,
    generate_ad_two_stage,
    load_templates,
    two_stage_hash,
)
from adgen.shotseg import detect_shots, load_boundaries, shots_from_boundaries
from adgen.tracker import build_tracklets, filter_tracklets

log = logging.getLogger("adgen")


@dataclass
class ClipStatus:
    clip_id: str
    status: str  # done | cached | failed
    prompt_hash: str = ""
    error: str = ""
    elapsed_s: float = 0.0


@dataclass
class RunManifest:
    config: dict
    clips: list[ClipStatus] = field(default_factory=list)

    def to_dict(self) -> dict:
        totals = {"done": 0, "cached": 0, "failed": 0}
        for c in self.clips:
            totals[c.status] += 1
        return {
            "config": self.config,
            "totals": totals,
            "clips": [dataclasses.asdict(c) for c in self.clips],
        }

    @property
    def failed(self) -> list[ClipStatus]:
        return [c for c in self.clips if c.status == "failed"]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def cache_lookup(prompt_hash: str, cache_dir: Path | None) -> ADOutput | None:
    """Content-addressed lookup; corrupt entries count as misses."""
    if cache_dir is None:
        return None
    path = Path(cache_dir) / f"{prompt_hash}.json"
    if not path.exists():
        return None
    try:
        out = ADOutput.from_json(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        log.warning("corrupt cache entry %s (%s); treating as miss", path, exc)
        return None
    if out.prompt_hash != prompt_hash:
        log.warning("cache entry %s does not match its key; treating as miss", path)
        return None
    return out


def cache_store(output: ADOutput, cache_dir: Path | None) -> None:
    if cache_dir is None:
        return
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(cache_dir / f"{output.prompt_hash}.json", output.to_json())


def _per_movie_path(base: Path, movie_id: str, suffix: str) -> Path:
    return base / f"{movie_id}{suffix}" if base.is_dir() else base


@dataclass
class MovieInputs:
    subtitles: list
    cast: list
    gallery: CastGallery
    originals_gallery: CastGallery
    ad_timestamps: list[float]
    character_by_cast_id: dict[str, str]


@dataclass
class PreparedRun:
    clips: list
    detections: dict
    movies: dict[str, MovieInputs]
    ground_truth: dict


def _movie_gallery(
    cast: list, embeddings_path: Path, queries, cfg: RunConfig
) -> tuple[CastGallery, CastGallery]:
    """Exemplar-augmented gallery plus the originals-only view, both in cast
    list order."""
    stored = load_gallery(embeddings_path)
    originals_by_cast = {}
    for member in cast:
        try:
            entry = stored.entry(member.cast_id)
        except KeyError:
            log.warning("cast %s has no profile embedding; skipping", member.cast_id)
            continue
        if entry.original.shape[0] == 0:
            log.warning("cast %s has no original embeddings; skipping", member.cast_id)
            continue
        originals_by_cast[member.cast_id] = list(entry.original)
    if not originals_by_cast:
        raise ValueError(f"no usable cast embeddings in {embeddings_path}")
    augmented = build_cast_gallery(
        originals_by_cast, queries, k=cfg.exemplar_k, cutoff=cfg.exemplar_cutoff
    )
    originals_only = CastGallery(
        entries=[
            GalleryEntry(e.cast_id, e.original, e.exemplars[:0]) for e in augmented.entries
        ]
    )
    return augmented, originals_only


def prepare_run(cfg: RunConfig) -> PreparedRun:
    clips = ingest.load_clips(cfg.clips, cfg.frames_root)
    detections = ingest.load_detections(cfg.detections, known_clips={c.clip_id for c in clips})
    ground_truth = {}
    if cfg.ground_truth is not None:
        ground_truth = {g.clip_id: g for g in ingest.load_ground_truth(cfg.ground_truth)}

    movies: dict[str, MovieInputs] = {}
    for movie_id in sorted({c.movie_id for c in clips}):
        movie_clips = [c for c in clips if c.movie_id == movie_id]
        subtitles = []
        if cfg.subtitles is not None:
            srt_path = _per_movie_path(cfg.subtitles, movie_id, ".srt")
            if srt_path.exists():
                subtitles = ingest.load_subtitles(srt_path)
        cast = ingest.load_cast(_per_movie_path(cfg.cast, movie_id, ".json"))
        if cfg.movie_level_exemplars:
            query_clips = movie_clips
        else:
            query_clips = []  # per-clip galleries are built in the worker
        queries = [
            d.face_embedding
            for c in query_clips
            for d in detections.get(c.clip_id, [])
            if d.face_embedding is not None
        ]
        gallery, originals_only = _movie_gallery(
            cast, _per_movie_path(cfg.cast_embeddings, movie_id, ".jsonl"), queries, cfg
        )
        if ground_truth:
            stamps = sorted(
                ground_truth[c.clip_id].start_s
                for c in movie_clips
                if c.clip_id in ground_truth
            )
        else:
            stamps = sorted(c.start_s for c in movie_clips)
        movies[movie_id] = MovieInputs(
            subtitles=subtitles,
            cast=cast,
            gallery=gallery,
            originals_gallery=originals_only,
            ad_timestamps=stamps,
            character_by_cast_id={m.cast_id: m.character_name for m in cast},
        )
    return PreparedRun(clips=clips, detections=detections, movies=movies, ground_truth=ground_truth)


def _clip_shots(clip, frames, cfg: RunConfig):
    if cfg.boundaries_dir is not None:
        bfile = Path(cfg.boundaries_dir) / f"{clip.clip_id}.json"
        if bfile.exists():
            return shots_from_boundaries(load_boundaries(bfile), len(frames))
    return detect_shots(frames, min_shot_len=cfg.min_shot_len, k_sigma=cfg.k_sigma)


def build_clip_tracklets(clip, frames, detections, cfg: RunConfig):
    """Shots, tracking, and background filtering for one clip."""
    shots = _clip_shots(clip, frames, cfg)
    by_frame: dict[int, list] = {}
    for det in detections:
        by_frame.setdefault(det.frame_idx, []).append(det)
    tracklets = []
    next_id = 0
    for shot in shots:
        shot_dets = {f: by_frame[f] for f in range(shot.start_frame, shot.end_frame) if f in by_frame}
        built = build_tracklets(shot_dets, shot, iou_min=cfg.iou_min, id_start=next_id)
        if built:
            next_id = built[-1].tracklet_id + 1
        tracklets.extend(built)
    return filter_tracklets(tracklets, min_len=cfg.min_track_len, min_conf=cfg.min_track_conf)


def identify_clip(clip, frames, detections, movie: MovieInputs, cfg: RunConfig):
    """Name the clip's tracklets; returns (tracklets, cast_ids, names).

    In frame_level_only mode tracklets stay unnamed and the identity set is
    the union of independent per-face matches against the originals-only
    gallery.
    """
    if cfg.frame_level_only:
        embeddings = [d.face_embedding for d in detections if d.face_embedding is not None]
        cast_ids = identify_faces_individually(
            embeddings, movie.originals_gallery, tau=cfg.tau
        )
        names = {movie.character_by_cast_id[cid] for cid in cast_ids}
        return [], cast_ids, names
    tracklets = build_clip_tracklets(clip, frames, detections, cfg)
    if not cfg.movie_level_exemplars:
        queries = [d.face_embedding for d in detections if d.face_embedding is not None]
        gallery = build_cast_gallery(
            {e.cast_id: list(e.original) for e in movie.originals_gallery.entries},
            queries,
            k=cfg.exemplar_k,
            cutoff=cfg.exemplar_cutoff,
        )
    else:
        gallery = movie.gallery
    for tracklet, assignment in zip(tracklets, assign_identities(tracklets, gallery, tau=cfg.tau)):
        if assignment.cast_id is not None:
            tracklet.cast_id = assignment.cast_id
            tracklet.name = movie.character_by_cast_id[assignment.cast_id]
    cast_ids = {t.cast_id for t in tracklets if t.cast_id}
    names = {t.name for t in tracklets if t.name}
    return tracklets, cast_ids, names


def _overlay_style(cfg: RunConfig) -> OverlayStyle:
    return OverlayStyle(
        mode=cfg.overlay_mode,
        box_thickness=cfg.box_thickness,
        label_scale=cfg.label_scale,
    )


def process_clip(
    clip,
    prepared: PreparedRun,
    cfg: RunConfig,
    backend,
    templates,
    prev_ads: list[tuple[float, str]] | None = None,
) -> tuple[ClipStatus, ADOutput | None]:
    """Run the whole chain for one clip; failures are caught by the caller."""
    start = time.monotonic()
    movie = prepared.movies[clip.movie_id]
    detections = prepared.detections.get(clip.clip_id, [])
    frames = ingest.load_frames(clip.frame_dir)
    tracklets, _, names = identify_clip(clip, frames, detections, movie, cfg)

    sampled_idx = sample_frames(len(frames), cfg.num_prompt_frames)
    annotated = render_overlays(
        [frames[i] for i in sampled_idx], sampled_idx, tracklets, _overlay_style(cfg)
    )
    if cfg.dump_annotated is not None:
        dump_dir = Path(cfg.dump_annotated) / clip.clip_id
        dump_dir.mkdir(parents=True, exist_ok=True)
        for idx, frame in zip(sampled_idx, annotated):
            frame.save_png(dump_dir / f"{idx:06d}.png")

    window = select_subtitle_window(
        movie.subtitles, movie.ad_timestamps, clip.start_s, t=cfg.context_t
    )
    prev = select_prev_ads(prev_ads, clip.start_s, cfg.prev_ad_limit) if prev_ads else []
    context = build_context(window, prev, t=cfg.context_t)

    policy = LengthPolicy.parse(cfg.length_policy)
    gt_wc = None
    if policy.kind == "gt_length":
        gt = prepared.ground_truth.get(clip.clip_id)
        if gt is None:
            raise GenerationError(f"gt_length policy but no ground truth for {clip.clip_id}")
        gt_wc = gt.word_count

    if cfg.mode == "one-stage":
        bundle = build_ad_prompt(
            clip, annotated, context, names, policy,
            ad_style=cfg.ad_style, templates=templates, gt_word_count=gt_wc,
        )
        prompt_hash = bundle_hash(bundle)
    else:
        caption_bundles = [
            build_frame_caption_prompt(i, f, len(annotated), clip=clip, templates=templates)
            for i, f in enumerate(annotated)
        ]
        prompt_hash = two_stage_hash(
            caption_bundles, context, names, policy, cfg.ad_style, templates, gt_wc
        )

    cached = cache_lookup(prompt_hash, cfg.cache_dir)
    if cached is not None:
        return ClipStatus(clip.clip_id, "cached", prompt_hash, "", time.monotonic() - start), cached

    if cfg.mode == "one-stage":
        output = generate_ad(bundle, backend, retries=cfg.retries, backoff_s=cfg.backoff_s)
    else:
        output = generate_ad_two_stage(
            clip, annotated, context, names, policy, backend,
            ad_style=cfg.ad_style, templates=templates, gt_word_count=gt_wc,
            retries=cfg.retries, backoff_s=cfg.backoff_s,
        )
    cache_store(output, cfg.cache_dir)
    return ClipStatus(clip.clip_id, "done", prompt_hash, "", time.monotonic() - start), output


def _run_pass(
    prepared: PreparedRun, cfg: RunConfig, backend, templates, prev_ads
) -> tuple[list[ClipStatus], dict[str, ADOutput]]:
    statuses: dict[str, ClipStatus] = {}
    outputs: dict[str, ADOutput] = {}

    def work(clip):
        try:
            return clip.clip_id, process_clip(clip, prepared, cfg, backend, templates, prev_ads)
        except Exception as exc:  # per-clip isolation: record and continue
            log.warning("clip %s failed: %s", clip.clip_id, exc)
            return clip.clip_id, (ClipStatus(clip.clip_id, "failed", "", str(exc)), None)

    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        for clip_id, (status, output) in pool.map(work, prepared.clips):
            statuses[clip_id] = status
            if output is not None:
                outputs[clip_id] = output
    ordered = [statuses[c.clip_id] for c in prepared.clips]
    return ordered, outputs


def run_pipeline(cfg: RunConfig) -> tuple[RunManifest, list[ADOutput]]:
    """Process every clip exactly once (twice with context-AD enabled: a
    subtitles-only pass, then a replay that sees the first pass's ADs).
    Outputs and manifest are written atomically under output_dir."""
    cfg.validate()
    prepared = prepare_run(cfg)
    backend = _backend_from_config(cfg)
    templates = load_templates(cfg.template_version)

    statuses, outputs = _run_pass(prepared, cfg, backend, templates, prev_ads=None)
    if cfg.context_ad:
        prev = [
            (c.start_s, outputs[c.clip_id].text)
            for c in prepared.clips
            if c.clip_id in outputs
        ]
        statuses, outputs = _run_pass(prepared, cfg, backend, templates, prev_ads=prev)

    manifest = RunManifest(config=cfg.snapshot(), clips=statuses)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered_outputs = [outputs[c.clip_id] for c in prepared.clips if c.clip_id in outputs]
    _atomic_write(
        out_dir / "outputs.jsonl",
        "".join(o.to_json() + "\n" for o in ordered_outputs),
    )
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest.to_dict(), indent=2))
    return manifest, ordered_outputs


def _backend_from_config(cfg: RunConfig):
    if cfg.backend == "http":
        return create_backend(
            "http",
            endpoint=cfg.endpoint,
            model=cfg.model,
            api_key_env=cfg.api_key_env,
            temperature=cfg.temperature,
            max_tokens=cfg.max_tokens,
        )
    if cfg.backend == "mock-fail":
        return create_backend("mock-fail", fail_times=cfg.mock_fail_times)
    if cfg.backend == "mock-fixed":
        return create_backend("mock-fixed", fixed_text=cfg.mock_fixed_text)
    return create_backend("mock-echo")


def run_eval(cfg: RunConfig, outputs_path: Path | str) -> EvalReport:
    """Score a finished run against ground truth and persist the report."""
    if cfg.ground_truth is None:
        raise ValueError("evaluation requires a ground_truth path")
    outputs = [
        ADOutput.from_json(line)
        for line in Path(outputs_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    ground_truth = ingest.load_ground_truth(cfg.ground_truth)
    cast = _all_cast(cfg)
    report = evaluate_run(outputs, ground_truth, cast)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.save_json(out_dir / "eval_report.json")
    report.save_csv(out_dir / "eval_per_clip.csv")
    return report


def _all_cast(cfg: RunConfig):
    clips = ingest.load_clips(cfg.clips, cfg.frames_root)
    seen = set()
    cast = []
    for movie_id in sorted({c.movie_id for c in clips}):
        for member in ingest.load_cast(_per_movie_path(cfg.cast, movie_id, ".json")):
            if member.cast_id not in seen:
                seen.add(member.cast_id)
                cast.append(member)
    return cast


def run_identify(cfg: RunConfig) -> list[dict]:
    """Character recognition only: per-clip identity sets, written as
    JSON-lines (for recognition-method comparisons)."""
    cfg.validate(require_backend_inputs=False)
    prepared = prepare_run(cfg)
    rows = []
    for clip in prepared.clips:
        movie = prepared.movies[clip.movie_id]
        detections = prepared.detections.get(clip.clip_id, [])
        frames = ingest.load_frames(clip.frame_dir)
        _, cast_ids, names = identify_clip(clip, frames, detections, movie, cfg)
        rows.append(
            {"clip_id": clip.clip_id, "cast_ids": sorted(cast_ids), "names": sorted(names)}
        )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(
        out_dir / "identify.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    )
    return rows


def run_annotate_dump(cfg: RunConfig, dump_dir: Path | str) -> int:
    """Render and save the annotated prompt frames for every clip; returns
    the number of frames written."""
    cfg.validate(require_backend_inputs=False)
    prepared = prepare_run(cfg)
    count = 0
    for clip in prepared.clips:
        movie = prepared.movies[clip.movie_id]
        detections = prepared.detections.get(clip.clip_id, [])
        frames = ingest.load_frames(clip.frame_dir)
        tracklets, _, _ = identify_clip(clip, frames, detections, movie, cfg)
        sampled_idx = sample_frames(len(frames), cfg.num_prompt_frames)
        annotated = render_overlays(
            [frames[i] for i in sampled_idx], sampled_idx, tracklets, _overlay_style(cfg)
        )
        clip_dir = Path(dump_dir) / clip.clip_id
        clip_dir.mkdir(parents=True, exist_ok=True)
        for idx, frame in zip(sampled_idx, annotated):
            frame.save_png(clip_dir / f"{idx:06d}.png")
            count += 1
    return count
