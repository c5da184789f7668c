"""Vision-LLM backends: an HTTP chat-completion client and deterministic
mocks for offline runs and tests.

A backend consumes a prompt bundle (system_text, user_text, frames) and
returns the completion text. Mocks record every call, including the number
of simultaneously in-flight requests, so tests can assert call counts and
concurrency bounds.
"""

from __future__ import annotations

import base64
import io
import os
import re
import threading
import time
from dataclasses import dataclass, field

import requests
from PIL import Image

_WORD_CLAUSE_RE = re.compile(r"exactly (\d+) words")

DEFAULT_CANNED_SENTENCE = (
    "A figure moves through the dim room and pauses near the window while "
    "distant voices echo and the camera slowly drifts toward the waiting "
    "door outside."
)


class BackendError(RuntimeError):
    """A backend call failed; the caller decides whether to retry."""


@dataclass
class RecordedCall:
    system_text: str
    user_text: str
    n_frames: int
    frame_digests: list[str]


@dataclass
class MockBackend:
    """Deterministic offline backend.

    Modes:
      echo  - parse "exactly N words" from the prompt and reply with the
              first N words of the canned sentence (cycled when N exceeds
              it); without a word-count clause the whole sentence is used.
      fixed - always reply with fixed_text.
      fail  - raise BackendError for the first fail_times calls, then echo.
    """

    mode: str = "echo"
    canned: str = DEFAULT_CANNED_SENTENCE
    fixed_text: str = "Someone crosses the room."
    fail_times: int = 0
    latency_s: float = 0.0

    calls: list[RecordedCall] = field(default_factory=list)
    max_in_flight: int = field(default=0, init=False)
    _in_flight: int = field(default=0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.mode not in ("echo", "fixed", "fail"):
            raise ValueError(f"unknown mock mode {self.mode!r}")

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def complete(self, bundle) -> str:
        with self._lock:
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
            self.calls.append(
                RecordedCall(
                    system_text=bundle.system_text,
                    user_text=bundle.user_text,
                    n_frames=len(bundle.frames),
                    frame_digests=[f.digest() for f in bundle.frames],
                )
            )
            call_idx = len(self.calls)
        try:
            if self.latency_s:
                time.sleep(self.latency_s)
            if self.mode == "fail" and call_idx <= self.fail_times:
                raise BackendError(f"mock failure {call_idx}/{self.fail_times}")
            if self.mode == "fixed":
                return self.fixed_text
            return self._echo(bundle.user_text)
        finally:
            with self._lock:
                self._in_flight -= 1

    def _echo(self, user_text: str) -> str:
        m = _WORD_CLAUSE_RE.search(user_text)
        words = self.canned.replace(".", "").split()
        if m is None:
            return self.canned
        n = int(m.group(1))
        out = [words[i % len(words)] for i in range(n)]
        return " ".join(out) + "."


def _frame_to_data_url(frame) -> str:
    buf = io.BytesIO()
    Image.fromarray(frame.pixels, mode="RGB").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


@dataclass
class HttpBackend:
    """OpenAI-style chat-completion endpoint with image parts.

    The secret key is read from the environment variable named by
    api_key_env; it is never stored in config files.
    """

    endpoint: str
    model: str
    api_key_env: str = "ADGEN_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 300
    timeout_s: float = 120.0

    def complete(self, bundle) -> str:
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise BackendError(f"environment variable {self.api_key_env} is not set")
        content: list[dict] = [{"type": "text", "text": bundle.user_text}]
        for frame in bundle.frames:
            content.append(
                {"type": "image_url", "image_url": {"url": _frame_to_data_url(frame)}}
            )
        messages = []
        if bundle.system_text:
            messages.append({"role": "system", "content": bundle.system_text})
        messages.append({"role": "user", "content": content})
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        try:
            resp = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise BackendError(f"request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"backend returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc


def create_backend(name: str, **params):
    """Factory keyed by the config's backend field."""
    if name == "mock-echo":
        return MockBackend(mode="echo", **params)
    if name == "mock-fixed":
        return MockBackend(mode="fixed", **params)
    if name == "mock-fail":
        return MockBackend(mode="fail", **params)
    if name == "http":
        return HttpBackend(**params)
    raise ValueError(f"unknown backend {name!r}")
