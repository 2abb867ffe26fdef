"""Text-completion client abstraction with stub, replay, and HTTP transports.

Every pipeline stage talks to a multimodal model through this one
interface, so tests run against deterministic stubs and recorded
transcripts while production points the HTTP transport at a real
service.  Responses are expected to be a single structured document
(JSON); parsing is strict, surrounding prose is a failure the caller
handles with one repair re-prompt.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from typing import Callable, Optional, Sequence


class TransportError(RuntimeError):
    """The client could not reach its backing service."""


class StrictParseError(ValueError):
    """The response was not a single well-formed JSON document."""


class LLMClient(ABC):
    """Text in, text out; images are passed as opaque references."""

    @abstractmethod
    def complete(
        self,
        system_prompt: str,
        user_payload: str,
        images: Optional[Sequence[str]] = None,
    ) -> str:
        raise NotImplementedError


class StubLLMClient(LLMClient):
    """Scripted client for tests.

    Responses come either from a fixed queue (consumed in call order) or
    from a callable receiving the full request.  Every request/response
    is kept in ``calls`` for assertions.
    """

    def __init__(
        self,
        responses: Optional[Sequence[str]] = None,
        responder: Optional[Callable[[str, str, Optional[Sequence[str]]], str]] = None,
    ):
        if (responses is None) == (responder is None):
            raise ValueError("provide exactly one of responses / responder")
        self._queue = list(responses) if responses is not None else None
        self._responder = responder
        self.calls: list[dict] = []

    def complete(self, system_prompt, user_payload, images=None):
        if self._queue is not None:
            if not self._queue:
                raise TransportError("scripted stub ran out of responses")
            response = self._queue.pop(0)
        else:
            response = self._responder(system_prompt, user_payload, images)
        self.calls.append(
            {
                "system": system_prompt,
                "payload": user_payload,
                "images": list(images) if images else [],
                "response": response,
            }
        )
        return response


class ReplayLLMClient(LLMClient):
    """Replays a recorded transcript in order, verifying each request.

    A transcript is a list of {system, payload, images, response}
    records, e.g. a generation session's audit log.  Requests must match
    the recording exactly; any divergence means the caller is not
    reproducing the recorded run.
    """

    def __init__(self, transcript: Sequence[dict], strict: bool = True):
        self.transcript = list(transcript)
        self.strict = strict
        self._pos = 0

    def complete(self, system_prompt, user_payload, images=None):
        if self._pos >= len(self.transcript):
            raise TransportError("transcript exhausted")
        rec = self.transcript[self._pos]
        self._pos += 1
        if self.strict:
            want = (rec["system"], rec["payload"], list(rec.get("images") or []))
            got = (system_prompt, user_payload, list(images) if images else [])
            if want != got:
                raise TransportError(
                    f"replay mismatch at call {self._pos}: request differs from recording"
                )
        return rec["response"]


class HTTPLLMClient(LLMClient):
    """POSTs requests as JSON to a completion endpoint.

    The endpoint receives {"system", "user", "images"} and must answer
    {"text": "..."}.  Network and protocol failures surface as
    TransportError; retrying is the caller's policy, not the transport's.
    """

    def __init__(self, url: str, timeout: float = 60.0, headers: Optional[dict] = None):
        self.url = url
        self.timeout = timeout
        self.headers = {"Content-Type": "application/json", **(headers or {})}

    def complete(self, system_prompt, user_payload, images=None):
        body = json.dumps(
            {"system": system_prompt, "user": user_payload, "images": list(images or [])}
        ).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers=self.headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise TransportError(f"completion request failed: {exc}") from exc
        if not isinstance(payload, dict) or "text" not in payload:
            raise TransportError("completion endpoint returned no 'text' field")
        return str(payload["text"])


def parse_json_response(text: str):
    """Parse a response that must be one JSON document and nothing else."""
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise StrictParseError(f"response is not a single JSON document: {exc}") from exc
