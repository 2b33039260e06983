"""Verbatim passthrough chat client for a local LLM runner.

The outbound payload contains exactly the student-authored messages of the
session: no system prompt, no rewriting, no added context. The transcript
records what was sent and the concatenation of the streamed chunks.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Iterator

import httpx

MAX_SESSION_MESSAGES = 20  # keep context small enough for local models


class LlmUnavailableError(RuntimeError):
    """Runner unreachable or refused the request."""


@dataclass
class ChatMessage:
    role: str  # "user" | "assistant"
    content: str

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class ChatTranscript:
    outbound_messages: list[ChatMessage]
    response: str
    model_name: str
    latency: float
    truncated: bool = False
    question_record_id: str | None = None


@dataclass
class LlmGateway:
    runner_url: str = "http://localhost:11434"
    model_name: str = "llama3.2:3b"
    timeout: float = 120.0
    _client: httpx.Client = field(default=None, repr=False)

    def __post_init__(self):
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout)

    def chat(self, session_messages: list[ChatMessage]) -> Iterator[str]:
        """Stream the runner's response chunks for the given session.

        Returns a generator of content fragments. After exhaustion the
        full transcript is available as ``last_transcript``; an aborted
        stream leaves a transcript marked truncated.
        """
        if not session_messages or session_messages[-1].role != "user":
            raise ValueError("last message must be a user message")
        if not session_messages[-1].content.strip():
            raise ValueError("user message is empty")
        messages = session_messages[-MAX_SESSION_MESSAGES:]
        payload = {
            "model": self.model_name,
            "messages": [m.to_dict() for m in messages],
            "stream": True,
        }
        return self._stream(messages, payload)

    def _stream(self, messages: list[ChatMessage], payload: dict) -> Iterator[str]:
        url = self.runner_url.rstrip("/") + "/api/chat"
        start = time.monotonic()
        chunks: list[str] = []
        truncated = True
        try:
            with self._client.stream("POST", url, json=payload) as resp:
                if resp.status_code // 100 != 2:
                    raise LlmUnavailableError(f"runner returned HTTP {resp.status_code}")
                for line in resp.iter_lines():
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    fragment = obj.get("message", {}).get("content", "")
                    if fragment:
                        chunks.append(fragment)
                        yield fragment
                    if obj.get("done"):
                        truncated = False
                        break
        except httpx.HTTPError as exc:
            if not chunks:
                raise LlmUnavailableError(f"runner unreachable: {exc}") from exc
            # partial response: keep what arrived, marked truncated
        finally:
            if chunks or not truncated:
                self.last_transcript = ChatTranscript(
                    outbound_messages=messages,
                    response="".join(chunks),
                    model_name=self.model_name,
                    latency=time.monotonic() - start,
                    truncated=truncated,
                )

    def healthcheck(self) -> dict:
        """Distinguish runner-down from model-missing; never raises."""
        url = self.runner_url.rstrip("/") + "/api/tags"
        try:
            resp = self._client.get(url)
            resp.raise_for_status()
        except httpx.HTTPError:
            return {"available": False, "model_present": False}
        models = {m.get("name") for m in resp.json().get("models", [])}
        # runner tags may carry ":latest" suffixes
        present = self.model_name in models or f"{self.model_name}:latest" in models
        return {"available": True, "model_present": present}
