"""Run configuration: every ablation axis of the pipeline in one dataclass,
loadable from a TOML-style file and overridable from CLI flags.

The stdlib of the supported Python floor has no TOML parser, so a minimal
reader for the subset this config needs (sections, strings, numbers,
booleans, flat arrays, comments) lives here.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

OVERLAY_CHOICES = ("none", "bbox_only", "name_only", "bbox_and_name")
MODE_CHOICES = ("one-stage", "two-stage")
BACKEND_CHOICES = ("mock-echo", "mock-fixed", "mock-fail", "http")

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.-]+)\]$")
_KEY_RE = re.compile(r"^([A-Za-z0-9_-]+)\s*=\s*(.+)$")


class ConfigError(ValueError):
    pass


def _parse_scalar(raw: str, where: str):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    if raw == "true":
        return True
    if raw == "false":
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    raise ConfigError(f"{where}: cannot parse value {raw!r}")


def parse_toml_min(text: str) -> dict:
    """Parse the TOML subset used by config files into {section: {key: value}}
    with top-level keys under the "" section."""
    out: dict[str, dict] = {"": {}}
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION_RE.match(stripped)
        if m:
            section = m.group(1)
            out.setdefault(section, {})
            continue
        m = _KEY_RE.match(stripped)
        if not m:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, raw = m.group(1), m.group(2)
        if "#" in raw and not raw.strip().startswith('"'):
            raw = raw.split("#", 1)[0]
        raw = raw.strip()
        if raw.startswith("[") and raw.endswith("]"):
            inner = raw[1:-1].strip()
            value = (
                [_parse_scalar(v, f"line {lineno}") for v in inner.split(",")]
                if inner
                else []
            )
        else:
            value = _parse_scalar(raw, f"line {lineno}")
        out[section][key] = value
    return out


@dataclass
class RunConfig:
    # inputs; cast/subtitles/cast_embeddings may be a single file or a
    # directory of per-movie files named <movie_id> with the usual extension
    clips: Path | None = None
    frames_root: Path | None = None
    detections: Path | None = None
    subtitles: Path | None = None
    cast: Path | None = None
    cast_embeddings: Path | None = None
    ground_truth: Path | None = None
    boundaries_dir: Path | None = None
    output_dir: Path = Path("out")
    cache_dir: Path | None = None
    dump_annotated: Path | None = None

    # shot detection
    min_shot_len: int = 8
    k_sigma: float = 3.0

    # tracker
    iou_min: float = 0.3
    min_track_len: int = 5
    min_track_conf: float = 0.5

    # identification
    tau: float = 0.6
    exemplar_k: int = 5
    exemplar_cutoff: float | None = None
    movie_level_exemplars: bool = True
    frame_level_only: bool = False

    # overlays / prompt frames
    overlay_mode: str = "name_only"
    num_prompt_frames: int = 10
    box_thickness: int = 3
    label_scale: int = 1

    # context
    context_t: int = 100
    context_ad: bool = False
    prev_ad_limit: int = 10

    # prompting
    length_policy: str = "fixed:10"
    ad_style: bool = True
    mode: str = "one-stage"
    template_version: str = "v1"

    # backend
    backend: str = "mock-echo"
    endpoint: str = ""
    model: str = "gpt-4-vision-preview"
    api_key_env: str = "ADGEN_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 300
    mock_fail_times: int = 0
    mock_fixed_text: str = "Someone crosses the room."
    concurrency: int = 4
    retries: int = 3
    backoff_s: float = 0.5

    _PATH_FIELDS = (
        "clips", "frames_root", "detections", "subtitles", "cast",
        "cast_embeddings", "ground_truth", "boundaries_dir", "output_dir",
        "cache_dir", "dump_annotated",
    )

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = cls.field_names()
        kwargs = {}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in cls._PATH_FIELDS and value is not None:
                value = Path(value)
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Path | str) -> "RunConfig":
        sections = parse_toml_min(Path(path).read_text(encoding="utf-8"))
        flat: dict = {}
        for keys in sections.values():
            for key, value in keys.items():
                if key in flat:
                    raise ConfigError(f"duplicate config key {key!r}")
                flat[key] = value
        return cls.from_mapping(flat)

    def apply_overrides(self, overrides: dict) -> "RunConfig":
        merged = dataclasses.asdict(self)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_mapping(merged)

    def snapshot(self) -> dict:
        """JSON-friendly copy for the run manifest."""
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = str(v) if isinstance(v, Path) else v
        return out

    def validate(self, require_backend_inputs: bool = True) -> None:
        for name in ("clips", "detections", "cast", "cast_embeddings"):
            p = getattr(self, name)
            if p is None:
                raise ConfigError(f"config field {name!r} is required")
            if not Path(p).exists():
                raise ConfigError(f"{name} path does not exist: {p}")
        for name in ("subtitles", "ground_truth", "frames_root", "boundaries_dir"):
            p = getattr(self, name)
            if p is not None and not Path(p).exists():
                raise ConfigError(f"{name} path does not exist: {p}")
        if self.overlay_mode not in OVERLAY_CHOICES:
            raise ConfigError(f"overlay_mode must be one of {OVERLAY_CHOICES}")
        if self.mode not in MODE_CHOICES:
            raise ConfigError(f"mode must be one of {MODE_CHOICES}")
        if self.backend not in BACKEND_CHOICES:
            raise ConfigError(f"backend must be one of {BACKEND_CHOICES}")
        if require_backend_inputs and self.backend == "http" and not self.endpoint:
            raise ConfigError("http backend requires an endpoint")
        if not 1 <= self.num_prompt_frames <= 10:
            raise ConfigError("num_prompt_frames must be in [1, 10]")
        if self.tau <= 0 or self.tau > 2:
            raise ConfigError("tau must be in (0, 2]")
        if self.exemplar_k < 0:
            raise ConfigError("exemplar_k must be >= 0")
        if self.context_t < 0:
            raise ConfigError("context_t must be >= 0")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.retries < 1:
            raise ConfigError("retries must be >= 1")
        if self.min_shot_len < 1:
            raise ConfigError("min_shot_len must be >= 1")
        if not 0 <= self.iou_min <= 1:
            raise ConfigError("iou_min must be in [0, 1]")
        from adgen.promptgen import LengthPolicy

        policy = LengthPolicy.parse(self.length_policy)
        if policy.kind == "gt_length" and self.ground_truth is None:
            raise ConfigError("gt_length policy requires a ground_truth path")
