"""Textual context for a clip: the subtitle window bounded by the T-th
preceding AD timestamp, and optionally previously generated ADs."""

from __future__ import annotations

from dataclasses import dataclass, field

from adgen.ingest import Subtitle


@dataclass
class ContextWindow:
    subtitles: list[Subtitle] = field(default_factory=list)
    previous_ads: list[tuple[float, str]] = field(default_factory=list)
    t: int = 0

    def merged_entries(self) -> list[tuple[float, str]]:
        """All context lines (subtitles and prior ADs) globally time-ordered."""
        entries = [(s.start_s, s.text) for s in self.subtitles]
        entries.extend(self.previous_ads)
        entries.sort(key=lambda e: e[0])
        return entries

    @property
    def is_empty(self) -> bool:
        return not self.subtitles and not self.previous_ads


def select_subtitle_window(
    all_subtitles: list[Subtitle],
    all_ad_timestamps: list[float],
    current_start_s: float,
    t: int = 100,
) -> list[Subtitle]:
    """Subtitles between the T-th preceding AD timestamp and the clip start.

    The lower bound is the timestamp of the T-th AD counting backward from
    current_start_s; with fewer than T prior ADs every earlier subtitle
    qualifies. T = 0 yields an empty window.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return []
    prior = [ts for ts in all_ad_timestamps if ts < current_start_s]
    t0 = prior[-t] if len(prior) >= t else float("-inf")
    window = [s for s in all_subtitles if t0 <= s.start_s < current_start_s]
    window.sort(key=lambda s: (s.start_s, s.index))
    return window


def select_prev_ads(
    generated_ads: list[tuple[float, str]], current_start_s: float, limit: int
) -> list[tuple[float, str]]:
    """Up to `limit` most recent ADs strictly before the clip start,
    returned in time order."""
    if limit <= 0:
        return []
    prior = sorted(
        (ad for ad in generated_ads if ad[0] < current_start_s), key=lambda a: a[0]
    )
    return prior[-limit:]


def build_context(
    subtitles: list[Subtitle],
    previous_ads: list[tuple[float, str]],
    t: int = 0,
) -> ContextWindow:
    """Merge pre-selected subtitles and prior ADs into one time-ordered window."""
    return ContextWindow(
        subtitles=sorted(subtitles, key=lambda s: (s.start_s, s.index)),
        previous_ads=sorted(previous_ads, key=lambda a: a[0]),
        t=t,
    )
