"""Prompt construction and backend driving.

Prompts are assembled from versioned template assets so ablations (AD style
vs caption style, word-count policies, one- vs two-stage generation) never
require code changes. Construction is pure: identical inputs produce
byte-identical prompts and therefore identical prompt hashes.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from importlib import resources

from adgen.annotate import FrameBuffer
from adgen.backends import BackendError
from adgen.context import ContextWindow

MAX_PROMPT_FRAMES = 10


class GenerationError(RuntimeError):
    """Raised when a clip's generation exhausts its retry budget."""


@dataclass
class PromptTemplates:
    version: str
    parts: dict[str, str]

    def __getitem__(self, key: str) -> str:
        return self.parts[key]


def load_templates(version: str = "v1") -> PromptTemplates:
    ref = resources.files("adgen").joinpath(f"templates/{version}.json")
    try:
        parts = json.loads(ref.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ValueError(f"unknown template version {version!r}") from exc
    return PromptTemplates(version=version, parts=parts)


@dataclass(frozen=True)
class LengthPolicy:
    kind: str  # none | fixed | gt_length
    n: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "fixed", "gt_length"):
            raise ValueError(f"unknown length policy {self.kind!r}")
        if self.kind == "fixed" and (self.n is None or self.n < 1):
            raise ValueError("fixed length policy needs n >= 1")

    @classmethod
    def none(cls) -> "LengthPolicy":
        return cls("none")

    @classmethod
    def fixed(cls, n: int) -> "LengthPolicy":
        return cls("fixed", n)

    @classmethod
    def gt_length(cls) -> "LengthPolicy":
        return cls("gt_length")

    @classmethod
    def parse(cls, text: str) -> "LengthPolicy":
        text = text.strip()
        if text == "none":
            return cls.none()
        if text in ("gt", "gt_length"):
            return cls.gt_length()
        if text.startswith("fixed:"):
            return cls.fixed(int(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse length policy {text!r}")

    def resolve_word_count(self, gt_word_count: int | None) -> int | None:
        if self.kind == "none":
            return None
        if self.kind == "fixed":
            return self.n
        if gt_word_count is None:
            raise ValueError("gt_length policy requires a ground-truth word count")
        return gt_word_count


@dataclass
class BundleMetadata:
    clip_id: str
    movie_title: str
    requested_word_count: int | None = None


@dataclass
class PromptBundle:
    system_text: str
    user_text: str
    frames: list[FrameBuffer] = field(default_factory=list)
    metadata: BundleMetadata | None = None

    def __post_init__(self):
        if len(self.frames) > MAX_PROMPT_FRAMES:
            raise ValueError(f"a prompt carries at most {MAX_PROMPT_FRAMES} frames")
        if self.metadata is not None and self.metadata.requested_word_count is not None:
            if self.metadata.requested_word_count < 1:
                raise ValueError("requested_word_count must be >= 1")


@dataclass
class ADOutput:
    clip_id: str
    text: str
    word_count: int
    mode: str  # one-stage | two-stage
    prompt_hash: str

    @classmethod
    def from_text(cls, clip_id: str, text: str, mode: str, prompt_hash: str) -> "ADOutput":
        text = text.strip()
        return cls(clip_id, text, len(text.split()), mode, prompt_hash)

    def to_json(self) -> str:
        return json.dumps(
            {
                "clip_id": self.clip_id,
                "text": self.text,
                "word_count": self.word_count,
                "mode": self.mode,
                "prompt_hash": self.prompt_hash,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "ADOutput":
        obj = json.loads(line)
        return cls(
            clip_id=obj["clip_id"],
            text=obj["text"],
            word_count=int(obj["word_count"]),
            mode=obj["mode"],
            prompt_hash=obj["prompt_hash"],
        )


def bundle_hash(bundle: PromptBundle) -> str:
    """Content hash of a serialized bundle; the cache key for one-stage runs."""
    payload = {
        "system": bundle.system_text,
        "user": bundle.user_text,
        "frames": [f.digest() for f in bundle.frames],
        "meta": {
            "clip_id": bundle.metadata.clip_id if bundle.metadata else None,
            "title": bundle.metadata.movie_title if bundle.metadata else None,
            "words": bundle.metadata.requested_word_count if bundle.metadata else None,
        },
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _context_block(context: ContextWindow | None, templates: PromptTemplates) -> list[str]:
    if context is None or context.is_empty:
        return []
    lines = []
    if context.subtitles:
        lines.append(templates["subtitles_header"])
        lines.extend(
            templates["context_entry"].format(text=s.text) for s in context.subtitles
        )
    if context.previous_ads:
        lines.append(templates["prev_ads_header"])
        lines.extend(
            templates["context_entry"].format(text=t) for _, t in context.previous_ads
        )
    return lines


def _task_line(
    ad_style: bool, word_count: int | None, templates: PromptTemplates, summary: bool = False
) -> str:
    if summary:
        task = templates["summary_task_ad"] if ad_style else templates["summary_task_caption"]
    else:
        task = templates["task_ad"] if ad_style else templates["task_caption"]
    if word_count is not None:
        task += templates["wordcount_clause"].format(n=word_count)
    return task + templates["task_end"]


def build_ad_prompt(
    clip,
    frames: list[FrameBuffer],
    context: ContextWindow | None,
    character_names: set[str],
    policy: LengthPolicy,
    ad_style: bool = True,
    templates: PromptTemplates | None = None,
    gt_word_count: int | None = None,
) -> PromptBundle:
    """One-stage prompt: title, context, characters, then the task line."""
    templates = templates or load_templates()
    word_count = policy.resolve_word_count(gt_word_count)
    lines = [templates["title_line"].format(title=clip.title)]
    lines.extend(_context_block(context, templates))
    if character_names:
        lines.append(
            templates["characters_line"].format(names=", ".join(sorted(character_names)))
        )
    lines.append(templates["frames_note"].format(n=len(frames)))
    lines.append(_task_line(ad_style, word_count, templates))
    return PromptBundle(
        system_text=templates["system"],
        user_text="\n".join(lines),
        frames=list(frames),
        metadata=BundleMetadata(clip.clip_id, clip.title, word_count),
    )


def build_frame_caption_prompt(
    frame_idx: int,
    frame: FrameBuffer,
    total: int,
    clip=None,
    templates: PromptTemplates | None = None,
) -> PromptBundle:
    """First stage of two-stage generation: one frame, one detailed caption."""
    templates = templates or load_templates()
    lines = []
    title = ""
    clip_id = ""
    if clip is not None:
        title = clip.title
        clip_id = clip.clip_id
        lines.append(templates["title_line"].format(title=title))
    lines.append(templates["frame_caption_task"].format(idx=frame_idx + 1, total=total))
    return PromptBundle(
        system_text=templates["system"],
        user_text="\n".join(lines),
        frames=[frame],
        metadata=BundleMetadata(clip_id, title, None),
    )


def build_summary_prompt(
    captions: list[str],
    frame_count: int,
    context: ContextWindow | None,
    character_names: set[str],
    policy: LengthPolicy,
    ad_style: bool = True,
    clip=None,
    templates: PromptTemplates | None = None,
    gt_word_count: int | None = None,
) -> PromptBundle:
    """Second stage: no frames, all captions in order, same context and
    length clauses as one-stage."""
    if len(captions) != frame_count:
        raise ValueError(f"got {len(captions)} captions for {frame_count} frames")
    templates = templates or load_templates()
    word_count = policy.resolve_word_count(gt_word_count)
    title = clip.title if clip is not None else ""
    clip_id = clip.clip_id if clip is not None else ""
    lines = []
    if title:
        lines.append(templates["title_line"].format(title=title))
    lines.append(templates["summary_intro"])
    lines.extend(
        templates["summary_entry"].format(idx=i + 1, caption=c)
        for i, c in enumerate(captions)
    )
    lines.extend(_context_block(context, templates))
    if character_names:
        lines.append(
            templates["characters_line"].format(names=", ".join(sorted(character_names)))
        )
    lines.append(_task_line(ad_style, word_count, templates, summary=True))
    return PromptBundle(
        system_text=templates["system"],
        user_text="\n".join(lines),
        frames=[],
        metadata=BundleMetadata(clip_id, title, word_count),
    )


def _complete_with_retry(bundle: PromptBundle, backend, retries: int, backoff_s: float) -> str:
    last: BackendError | None = None
    for attempt in range(max(1, retries)):
        try:
            return backend.complete(bundle)
        except BackendError as exc:
            last = exc
            if attempt + 1 < retries and backoff_s > 0:
                time.sleep(backoff_s * 2**attempt)
    raise GenerationError(f"backend failed after {retries} attempts: {last}")


def generate_ad(
    bundle: PromptBundle, backend, retries: int = 3, backoff_s: float = 0.0
) -> ADOutput:
    """Single backend call; raises GenerationError after the retry budget."""
    text = _complete_with_retry(bundle, backend, retries, backoff_s)
    return ADOutput.from_text(
        clip_id=bundle.metadata.clip_id if bundle.metadata else "",
        text=text,
        mode="one-stage",
        prompt_hash=bundle_hash(bundle),
    )


def _context_digest(context: ContextWindow | None) -> list:
    if context is None:
        return []
    return [[s.start_s, s.end_s, s.text] for s in context.subtitles] + [
        [t, txt] for t, txt in context.previous_ads
    ]


def two_stage_hash(
    caption_bundles: list[PromptBundle],
    context: ContextWindow | None,
    character_names: set[str],
    policy: LengthPolicy,
    ad_style: bool,
    templates: PromptTemplates,
    gt_word_count: int | None = None,
) -> str:
    """Cache key for a two-stage run, computable before any backend call
    (the summary prompt itself depends on the caption completions)."""
    payload = {
        "mode": "two-stage",
        "captions": [bundle_hash(b) for b in caption_bundles],
        "context": _context_digest(context),
        "names": sorted(character_names),
        "policy": [policy.kind, policy.n],
        "ad_style": ad_style,
        "template": templates.version,
        "gt_words": gt_word_count,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def generate_ad_two_stage(
    clip,
    frames: list[FrameBuffer],
    context: ContextWindow | None,
    character_names: set[str],
    policy: LengthPolicy,
    backend,
    ad_style: bool = True,
    templates: PromptTemplates | None = None,
    gt_word_count: int | None = None,
    retries: int = 3,
    backoff_s: float = 0.0,
) -> ADOutput:
    """Two-stage generation: one caption call per frame, then one summary
    call over the captions (len(frames) + 1 backend calls)."""
    templates = templates or load_templates()
    caption_bundles = [
        build_frame_caption_prompt(i, f, len(frames), clip=clip, templates=templates)
        for i, f in enumerate(frames)
    ]
    run_hash = two_stage_hash(
        caption_bundles, context, character_names, policy, ad_style, templates, gt_word_count
    )
    captions = [
        _complete_with_retry(b, backend, retries, backoff_s).strip()
        for b in caption_bundles
    ]
    summary = build_summary_prompt(
        captions,
        len(frames),
        context,
        character_names,
        policy,
        ad_style=ad_style,
        clip=clip,
        templates=templates,
        gt_word_count=gt_word_count,
    )
    text = _complete_with_retry(summary, backend, retries, backoff_s)
    return ADOutput.from_text(clip.clip_id, text, "two-stage", run_hash)
