import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from slicescope.llm import (
    HTTPLLMClient,
    ReplayLLMClient,
    StrictParseError,
    StubLLMClient,
    TransportError,
    parse_json_response,
)


def test_stub_queue_order_and_exhaustion():
    stub = StubLLMClient(responses=["a", "b"])
    assert stub.complete("s", "u") == "a"
    assert stub.complete("s", "u") == "b"
    with pytest.raises(TransportError):
        stub.complete("s", "u")
    assert len(stub.calls) == 2


def test_stub_responder_sees_request():
    stub = StubLLMClient(responder=lambda s, u, imgs: f"{s}|{u}|{len(imgs or [])}")
    assert stub.complete("sys", "usr", images=["i1", "i2"]) == "sys|usr|2"


def test_stub_requires_exactly_one_source():
    with pytest.raises(ValueError):
        StubLLMClient()
    with pytest.raises(ValueError):
        StubLLMClient(responses=["x"], responder=lambda *a: "y")


def test_replay_reproduces_and_verifies():
    stub = StubLLMClient(responses=["r1", "r2"])
    stub.complete("s1", "u1")
    stub.complete("s2", "u2", images=["img"])
    replay = ReplayLLMClient(stub.calls)
    assert replay.complete("s1", "u1") == "r1"
    assert replay.complete("s2", "u2", images=["img"]) == "r2"

    replay = ReplayLLMClient(stub.calls)
    with pytest.raises(TransportError, match="mismatch"):
        replay.complete("s1", "DIFFERENT")


def test_replay_exhaustion():
    replay = ReplayLLMClient([])
    with pytest.raises(TransportError, match="exhausted"):
        replay.complete("s", "u")


def test_strict_parse_rejects_prose():
    with pytest.raises(StrictParseError):
        parse_json_response("Sure! Here is the form: {\"a\": 1}")
    assert parse_json_response("{\"a\": 1}") == {"a": 1}


class _Echo(BaseHTTPRequestHandler):
    def log_message(self, *a):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        out = json.dumps({"text": f"echo:{body['user']}"}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)


def test_http_client_round_trip():
    server = HTTPServer(("127.0.0.1", 0), _Echo)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        client = HTTPLLMClient(f"http://127.0.0.1:{server.server_address[1]}/")
        assert client.complete("sys", "hello") == "echo:hello"
    finally:
        server.shutdown()


def test_http_client_unreachable_is_transport_error():
    client = HTTPLLMClient("http://127.0.0.1:1/", timeout=0.2)
    with pytest.raises(TransportError):
        client.complete("s", "u")
