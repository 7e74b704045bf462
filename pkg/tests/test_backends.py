from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from ontoalign import backends


def _request(stage="query-entities", content="hello"):
    return backends.BackendRequest(
        stage=stage,
        model="test-model",
        temperature=0.0,
        messages=(("user", content),),
    )


class _StubHandler(BaseHTTPRequestHandler):
    # class-level script: list of (status, payload) consumed per request
    script: list[tuple[int, dict]] = []
    seen: list[dict] = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        type(self).seen.append(
            {"body": body, "authorization": self.headers.get("Authorization")}
        )
        status, payload = (
            self.script.pop(0) if self.script else (200, {"choices": []})
        )
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_stub():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    _StubHandler.script = []
    _StubHandler.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat", _StubHandler
    server.shutdown()


def _ok_payload(text="the answer"):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
    }


def test_http_backend_wire_contract(http_stub, monkeypatch):
    endpoint, handler = http_stub
    monkeypatch.setenv("TEST_API_KEY", "secret-key")
    handler.script = [(200, _ok_payload("found it"))]
    backend = backends.HttpBackend(endpoint, model="test-model", key_env="TEST_API_KEY")
    response = backend.complete(_request(content="what matches?"))
    assert response.text == "found it"
    assert response.attempts == 1
    sent = handler.seen[0]
    assert sent["body"] == {
        "model": "test-model",
        "messages": [{"role": "user", "content": "what matches?"}],
        "temperature": 0.0,
    }
    assert sent["authorization"] == "Bearer secret-key"
    # the key never leaks into the transcript-facing descriptor
    assert "secret-key" not in backend.descriptor


def test_http_backend_retries_transient_failures(http_stub):
    endpoint, handler = http_stub
    handler.script = [(503, {}), (429, {}), (200, _ok_payload())]
    delays = []
    backend = backends.HttpBackend(
        endpoint, model="m", retries=3, backoff_base=0.5, sleep=delays.append
    )
    response = backend.complete(_request())
    assert response.text == "the answer"
    assert response.attempts == 3
    assert delays == [0.5, 1.0]  # exponential backoff


def test_http_backend_gives_up_after_retries(http_stub):
    endpoint, handler = http_stub
    handler.script = [(500, {}), (500, {}), (500, {})]
    backend = backends.HttpBackend(endpoint, model="m", retries=2, sleep=lambda _: None)
    with pytest.raises(backends.BackendError) as exc:
        backend.complete(_request())
    assert "3 attempts" in str(exc.value)


def test_http_backend_client_error_is_not_retried(http_stub):
    endpoint, handler = http_stub
    handler.script = [(400, {"error": "bad request"})]
    backend = backends.HttpBackend(endpoint, model="m", retries=5, sleep=lambda _: None)
    with pytest.raises(backends.BackendError) as exc:
        backend.complete(_request())
    assert "HTTP 400" in str(exc.value)
    assert len(handler.seen) == 1


def test_http_backend_plain_text_shape(http_stub):
    endpoint, handler = http_stub
    handler.script = [(200, {"text": "direct", "finish": "stop"})]
    backend = backends.HttpBackend(endpoint, model="m")
    assert backend.complete(_request()).text == "direct"


def test_http_backend_empty_response_rejected(http_stub):
    endpoint, handler = http_stub
    handler.script = [(200, _ok_payload(""))]
    backend = backends.HttpBackend(endpoint, model="m")
    with pytest.raises(backends.BackendError):
        backend.complete(_request())


def test_request_digest_is_stable_and_content_sensitive():
    a = _request(content="one")
    assert a.digest() == _request(content="one").digest()
    assert a.digest() != _request(content="two").digest()
    assert a.key().startswith("query-entities:")


def test_replay_store_save_load_round_trip(tmp_path):
    store = backends.ReplayStore(backend="scripted")
    request = _request()
    store.put(request, backends.BackendResponse(text="stored"))
    path = tmp_path / "store.json"
    store.save(path)
    loaded = backends.ReplayStore.load(path)
    assert loaded.backend == "scripted"
    assert loaded.get(request).text == "stored"


def test_replay_miss_error():
    backend = backends.ReplayBackend(backends.ReplayStore())
    with pytest.raises(backends.ReplayMissError):
        backend.complete(_request())


def test_recording_backend_adopts_inner_descriptor():
    store = backends.ReplayStore()
    scripted = backends.ScriptedBackend({"query-entities": "yes"}, descriptor="live-x")
    recorder = backends.RecordingBackend(scripted, store)
    recorder.complete(_request())
    assert store.backend == "live-x"
    assert backends.ReplayBackend(store).descriptor == "live-x"


def test_scripted_backend_pops_multiple_responses():
    backend = backends.ScriptedBackend({"query-entities": ["first", "second"]})
    assert backend.complete(_request()).text == "first"
    assert backend.complete(_request()).text == "second"


def test_scripted_backend_missing_stage():
    backend = backends.ScriptedBackend({})
    with pytest.raises(backends.BackendError):
        backend.complete(_request())


def test_counting_backend():
    counter = backends.CountingBackend(backends.ScriptedBackend({"query-entities": "hi"}))
    counter.complete(_request())
    counter.complete(_request())
    assert counter.calls == 2


def test_concurrent_requests_supported():
    store = backends.ReplayStore()
    scripted = backends.ScriptedBackend({"query-entities": "same answer"})
    recorder = backends.RecordingBackend(scripted, store)
    errors = []

    def worker(i):
        try:
            recorder.complete(_request(content=f"q{i}"))
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert len(store.entries) == 16
