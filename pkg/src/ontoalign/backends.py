"""Chat backends: live HTTP, scripted, and record/replay wrappers.

Replay keys are ``stage:request-digest`` where the digest covers the
model, generation parameters, and the full message list, so a replayed
conversation must be byte-identical to the recorded one.  A replay
backend holds no inner backend and therefore cannot touch the network.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path


class BackendError(Exception):
    pass


class ReplayMissError(BackendError):
    def __init__(self, stage: str, digest: str):
        self.stage = stage
        self.digest = digest
        super().__init__(f"no replay entry for stage {stage!r} (digest {digest})")


@dataclass(frozen=True)
class BackendRequest:
    stage: str
    model: str
    temperature: float
    messages: tuple[tuple[str, str], ...]

    def digest(self) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "temperature": self.temperature,
                "messages": [list(m) for m in self.messages],
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def key(self) -> str:
        return f"{self.stage}:{self.digest()}"


@dataclass(frozen=True)
class BackendResponse:
    text: str
    finish: str = "stop"
    attempts: int = 1


class ReplayStore:
    """request-key -> response text mapping persisted as sorted JSON.

    The store remembers the descriptor of the backend it was recorded
    from, so a replayed transcript is byte-identical to the original.
    """

    def __init__(
        self,
        entries: dict[str, dict] | None = None,
        path: str | Path | None = None,
        backend: str = "replay",
    ):
        self.entries = dict(entries or {})
        self.path = Path(path) if path else None
        self.backend = backend
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> "ReplayStore":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            entries=data.get("entries", {}),
            path=path,
            backend=data.get("backend", "replay"),
        )

    def save(self, path: str | Path | None = None):
        target = Path(path) if path else self.path
        if target is None:
            raise ValueError("no path to save the replay store to")
        target.parent.mkdir(parents=True, exist_ok=True)
        body = json.dumps(
            {"backend": self.backend, "entries": self.entries},
            sort_keys=True,
            ensure_ascii=False,
            indent=2,
        )
        target.write_text(body + "\n", encoding="utf-8")

    def put(self, request: BackendRequest, response: BackendResponse):
        with self._lock:
            self.entries[request.key()] = {"text": response.text, "finish": response.finish}
            if self.path is not None:
                self.save()

    def get(self, request: BackendRequest) -> BackendResponse | None:
        entry = self.entries.get(request.key())
        if entry is None:
            return None
        return BackendResponse(text=entry["text"], finish=entry.get("finish", "stop"))


class HttpBackend:
    """POSTs ``{model, messages, temperature}`` JSON to a chat endpoint.

    Transient failures (connection errors, 429, 5xx) are retried with
    exponential backoff up to ``retries`` extra attempts.  The API key is
    read from the environment at call time and never stored.
    """

    RETRYABLE_STATUS = {429, 500, 502, 503, 504}

    def __init__(
        self,
        endpoint: str,
        model: str,
        key_env: str | None = None,
        retries: int = 2,
        backoff_base: float = 0.5,
        timeout: float = 120.0,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.key_env = key_env
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._sleep = sleep

    @property
    def descriptor(self) -> str:
        return f"http:{self.model}@{self.endpoint}"

    def complete(self, request: BackendRequest) -> BackendResponse:
        import os

        import requests

        headers = {"Content-Type": "application/json"}
        if self.key_env:
            key = os.environ.get(self.key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": request.model or self.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
        }
        last_error = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = f"request failed: {exc}"
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            text, finish = _extract_text(resp.json())
            if not text:
                raise BackendError("backend returned an empty assistant message")
            return BackendResponse(text=text, finish=finish, attempts=attempt + 1)
        raise BackendError(
            f"backend failed after {self.retries + 1} attempts: {last_error}"
        )


def _extract_text(payload: dict) -> tuple[str, str]:
    choices = payload.get("choices")
    if isinstance(choices, list) and choices:
        choice = choices[0]
        message = choice.get("message", {})
        return message.get("content", "") or "", choice.get("finish_reason", "stop") or "stop"
    if "text" in payload:
        return payload.get("text") or "", payload.get("finish", "stop")
    raise BackendError("unrecognized response JSON shape")


class ScriptedBackend:
    """Canned per-stage responses, for tests and for authoring replay stores."""

    def __init__(self, responses_by_stage: dict[str, str | list[str]], descriptor: str = "scripted"):
        self._responses: dict[str, list[str]] = {}
        for stage, value in responses_by_stage.items():
            self._responses[stage] = list(value) if isinstance(value, list) else [value]
        self.descriptor = descriptor

    def complete(self, request: BackendRequest) -> BackendResponse:
        queue = self._responses.get(request.stage)
        if not queue:
            raise BackendError(f"scripted backend has no response for stage {request.stage!r}")
        text = queue[0] if len(queue) == 1 else queue.pop(0)
        return BackendResponse(text=text)


class RecordingBackend:
    """Wraps a live backend and persists every request/response pair."""

    def __init__(self, inner, store: ReplayStore):
        self.inner = inner
        self.store = store
        self.store.backend = getattr(inner, "descriptor", "backend")

    @property
    def descriptor(self) -> str:
        return getattr(self.inner, "descriptor", "backend")

    def complete(self, request: BackendRequest) -> BackendResponse:
        response = self.inner.complete(request)
        self.store.put(request, response)
        return response


class ReplayBackend:
    """Serves stored responses only; a miss is an error, never a network call."""

    def __init__(self, store: ReplayStore):
        self.store = store

    @property
    def descriptor(self) -> str:
        return self.store.backend

    def complete(self, request: BackendRequest) -> BackendResponse:
        response = self.store.get(request)
        if response is None:
            raise ReplayMissError(request.stage, request.digest())
        return response


class CountingBackend:
    """Test helper: counts how often an inner backend is actually consulted."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    @property
    def descriptor(self) -> str:
        return getattr(self.inner, "descriptor", "backend")

    def complete(self, request: BackendRequest) -> BackendResponse:
        self.calls += 1
        return self.inner.complete(request)


def record(backend, store: ReplayStore) -> RecordingBackend:
    return RecordingBackend(backend, store)


def replay(store: ReplayStore) -> ReplayBackend:
    return ReplayBackend(store)
