"""Chat-completion gateway with live and scripted backends.

Live mode speaks the de-facto chat-completion wire shape against a
configurable base URL. Scripted mode replays canned responses keyed by
(role, digest of the normalized user content), which makes whole pipeline
runs reproducible offline.
"""

from __future__ import annotations

import ast
import hashlib
import json
import math
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import requests

from .errors import (
    BackendUnavailable,
    JsonSyntax,
    NoJsonFound,
    RateLimited,
    TranscriptMiss,
    UnknownSession,
)
from .prompts import AgentRole, declared_slots, render_prompt


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )

    def as_dict(self) -> Dict[str, int]:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}


@dataclass(frozen=True)
class CompletionRequest:
    role: AgentRole
    user_content: str
    context: Tuple[Tuple[str, str], ...] = ()
    temperature: float = 0.0
    system: Optional[str] = None


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    usage: TokenUsage


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return re.sub(r"\s+", " ", text).strip()


def input_digest(text: str) -> str:
    """SHA-256 over the normalized text, hex-encoded."""
    return hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()


def _default_usage(user_content: str, response: str) -> TokenUsage:
    return TokenUsage(
        max(1, math.ceil(len(user_content) / 4)),
        max(1, math.ceil(len(response) / 4)),
    )


class Transcript:
    """Canned responses for scripted runs.

    File format: JSON array of objects with keys ``role``,
    ``input_digest``, ``response``, and ``usage``.
    """

    def __init__(self):
        self._entries: Dict[Tuple[str, str], Tuple[str, TokenUsage]] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def record(
        self,
        role: AgentRole,
        user_content: str,
        response: str,
        usage: Optional[TokenUsage] = None,
    ) -> None:
        """Register a canned response for this role and input text."""
        if usage is None:
            usage = _default_usage(user_content, response)
        self._entries[(role.value, input_digest(user_content))] = (response, usage)

    def lookup(self, role: AgentRole, user_content: str) -> Tuple[str, TokenUsage]:
        key = (role.value, input_digest(user_content))
        if key not in self._entries:
            raise TranscriptMiss(role.value, key[1], normalize_text(user_content)[:80])
        return self._entries[key]

    def merge(self, other: "Transcript") -> None:
        self._entries.update(other._entries)

    def declared_usage_total(self) -> TokenUsage:
        total = TokenUsage()
        for _, usage in self._entries.values():
            total = total + usage
        return total

    def to_jsonable(self) -> List[dict]:
        rows = []
        for (role, digest), (response, usage) in self._entries.items():
            rows.append(
                {
                    "role": role,
                    "input_digest": digest,
                    "response": response,
                    "usage": usage.as_dict(),
                }
            )
        return rows

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_jsonable(), indent=2, ensure_ascii=False),
            encoding="utf-8",
        )

    @classmethod
    def from_jsonable(cls, rows: Sequence[dict]) -> "Transcript":
        out = cls()
        for row in rows:
            usage = TokenUsage(**row.get("usage", {"input_tokens": 0, "output_tokens": 0}))
            out._entries[(row["role"], row["input_digest"])] = (row["response"], usage)
        return out

    @classmethod
    def load(cls, path) -> "Transcript":
        return cls.from_jsonable(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def load_dir(cls, directory) -> "Transcript":
        """Merge every ``*.json`` transcript file in a directory."""
        merged = cls()
        for path in sorted(Path(directory).glob("*.json")):
            merged.merge(cls.load(path))
        return merged


class _SessionBook:
    """Thread-safe per-session token accounting."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: Dict[str, TokenUsage] = {}

    def open(self, session_id: str) -> None:
        with self._lock:
            self._sessions.setdefault(session_id, TokenUsage())

    def charge(self, session_id: str, usage: TokenUsage) -> None:
        with self._lock:
            current = self._sessions.setdefault(session_id, TokenUsage())
            self._sessions[session_id] = current + usage

    def report(self, session_id: str) -> TokenUsage:
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSession(session_id)
            return self._sessions[session_id]


class LLMGateway:
    """Base gateway: sessions, accounting, and the complete() entrypoint."""

    def __init__(self):
        self._book = _SessionBook()

    def open_session(self, session_id: str) -> None:
        self._book.open(session_id)

    def usage_report(self, session_id: str) -> TokenUsage:
        return self._book.report(session_id)

    def complete(self, req: CompletionRequest, session_id: str = "default") -> CompletionResponse:
        response = self._complete(req)
        self._book.charge(session_id, response.usage)
        return response

    def _complete(self, req: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


class ScriptedGateway(LLMGateway):
    """Replays transcript entries; raises TranscriptMiss on unknown input."""

    def __init__(self, transcript: Transcript):
        super().__init__()
        self.transcript = transcript
        self._calls = 0

    @property
    def call_count(self) -> int:
        return self._calls

    def _complete(self, req: CompletionRequest) -> CompletionResponse:
        text, usage = self.transcript.lookup(req.role, req.user_content)
        self._calls += 1
        return CompletionResponse(text, usage)


class LiveGateway(LLMGateway):
    """Talks to a chat-completion endpoint over HTTP with retries."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        model: str = "gpt-4o",
        retry_limit: int = 3,
        timeout: float = 60.0,
        sleeper=time.sleep,
    ):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.retry_limit = retry_limit
        self.timeout = timeout
        self._sleep = sleeper

    def _messages(self, req: CompletionRequest) -> List[dict]:
        messages = []
        if req.system:
            messages.append({"role": "system", "content": req.system})
        for speaker, text in req.context:
            messages.append({"role": speaker, "content": text})
        messages.append({"role": "user", "content": req.user_content})
        return messages

    def _complete(self, req: CompletionRequest) -> CompletionResponse:
        payload = {
            "model": self.model,
            "messages": self._messages(req),
            "temperature": req.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Optional[Exception] = None
        rate_limited = False
        for attempt in range(self.retry_limit + 1):
            if attempt:
                self._sleep(0.5 * (2 ** (attempt - 1)))
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error, rate_limited = exc, False
                continue
            if resp.status_code == 429:
                last_error, rate_limited = RuntimeError("429"), True
                continue
            if resp.status_code >= 500:
                last_error, rate_limited = RuntimeError(f"HTTP {resp.status_code}"), False
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            body = resp.json()
            usage = body.get("usage", {})
            return CompletionResponse(
                body["choices"][0]["message"]["content"],
                TokenUsage(
                    int(usage.get("prompt_tokens", 0)),
                    int(usage.get("completion_tokens", 0)),
                ),
            )
        if rate_limited:
            raise RateLimited(f"gave up after {self.retry_limit + 1} attempts")
        raise BackendUnavailable(str(last_error))


_FENCE = re.compile(r"```([A-Za-z0-9_+-]*)[ \t]*\n(.*?)```", re.DOTALL)


def fenced_blocks(text: str) -> List[Tuple[str, str]]:
    """All fenced code blocks as (language tag, body) pairs, in order."""
    return [(m.group(1).lower(), m.group(2)) for m in _FENCE.finditer(text)]


def last_fenced_block(text: str, language: Optional[str] = None) -> Optional[str]:
    """Body of the last fenced block, optionally restricted to a language."""
    picked = None
    for lang, body in fenced_blocks(text):
        if language is None or lang == language:
            picked = body
    return picked


def _parse_tolerant(payload: str):
    """JSON first; then trailing-comma cleanup; then Python literals."""
    try:
        return json.loads(payload)
    except json.JSONDecodeError as err:
        cleaned = re.sub(r",(\s*[}\]])", r"\1", payload)
        try:
            return json.loads(cleaned)
        except json.JSONDecodeError:
            pass
        try:
            return ast.literal_eval(payload.strip())
        except (ValueError, SyntaxError):
            raise JsonSyntax(err.pos, err.msg)


def extract_json(text: str):
    """Structured value from an agent reply.

    Takes the LAST fenced block (reasoning may precede it); with no fence,
    tries the whole text.
    """
    blocks = fenced_blocks(text)
    if blocks:
        return _parse_tolerant(blocks[-1][1])
    stripped = text.strip()
    if stripped.startswith("{") or stripped.startswith("["):
        return _parse_tolerant(stripped)
    raise NoJsonFound(f"no fenced block or JSON payload in reply: {stripped[:80]!r}")


RETRY_NOTE = (
    "Your previous response could not be parsed. "
    "Reply again with the same content as a single fenced json block."
)


def ask_json(
    gateway: LLMGateway,
    role: AgentRole,
    user_content: str,
    session_id: str = "default",
    system: Optional[str] = None,
    context: Tuple[Tuple[str, str], ...] = (),
):
    """complete() then extract_json(), with one corrective re-ask.

    When no system prompt is given and the role's template needs no slot
    values, the template itself is used.
    """
    if system is None and not declared_slots(role):
        system = render_prompt(role)
    req = CompletionRequest(role=role, user_content=user_content, context=context, system=system)
    response = gateway.complete(req, session_id)
    try:
        return extract_json(response.text), response
    except (NoJsonFound, JsonSyntax):
        retry = CompletionRequest(
            role=role,
            user_content=f"{user_content}\n\n{RETRY_NOTE}",
            context=context,
            system=system,
        )
        response = gateway.complete(retry, session_id)
        return extract_json(response.text), response
