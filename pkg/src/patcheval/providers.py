"""Provider gateway: remote chat-completion endpoints and replay fixtures.

One request per task, never re-prompted on unsatisfactory content; only
transport failures may be retried, up to a configured count. The raw text is
persisted by the pipeline before any parsing happens.
"""

from __future__ import annotations

import json
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .errors import PatchEvalError
from .miner import CommitKind, CommitTask
from .prompts import Prompt
from . import splicer


class ProviderError(PatchEvalError):
    pass


class ProviderTimeout(ProviderError):
    pass


class ContextOverflow(ProviderError):
    pass


class TransportError(ProviderError):
    pass


class NoCodeFound(ProviderError):
    """Response has no brace-bearing content; lands in Empty/Partial downstream."""


@dataclass
class ProviderConfig:
    provider_id: str
    endpoint: str  # http(s) URL, or a fixture directory for replay
    model_name: str = ""
    max_context_tokens: int = 128_000
    timeout: float = 120.0
    rate_limit: int = 60  # requests per minute; 0 disables
    knowledge_cutoff: date | None = None
    api_key: str | None = None
    network_retries: int = 2
    request_params: dict = field(default_factory=dict)  # decoding params, passed through
    strict_output: bool = False
    attachment_mode: str = "inline"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @property
    def is_replay(self) -> bool:
        return not self.endpoint.startswith(("http://", "https://"))


@dataclass
class RawResponse:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    latency: float = 0.0
    truncated: bool = False
    citations: list[str] = field(default_factory=list)


@dataclass
class GeneratedPatch:
    function_text: str
    scope: str  # "function" | "whole-file"
    is_empty: bool
    is_partial: bool
    stripped_citations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "function_text": self.function_text,
            "scope": self.scope,
            "is_empty": self.is_empty,
            "is_partial": self.is_partial,
            "stripped_citations": self.stripped_citations,
        }


def estimate_tokens(text: str) -> int:
    """chars/4 heuristic; close enough to decide overflow before a request."""
    return (len(text) + 3) // 4


class _RateLimiter:
    def __init__(self, per_minute: int):
        self.interval = 60.0 / per_minute if per_minute > 0 else 0.0
        self.lock = threading.Lock()
        self.next_slot = 0.0

    def wait(self) -> None:
        if self.interval == 0.0:
            return
        with self.lock:
            now = time.monotonic()
            slot = max(now, self.next_slot)
            self.next_slot = slot + self.interval
        delay = slot - now
        if delay > 0:
            time.sleep(delay)


class Gateway:
    """Shared across worker threads; enforces per-provider rate limits."""

    def __init__(self):
        self._limiters: dict[str, _RateLimiter] = {}
        self._lock = threading.Lock()

    def _limiter(self, config: ProviderConfig) -> _RateLimiter:
        with self._lock:
            if config.provider_id not in self._limiters:
                self._limiters[config.provider_id] = _RateLimiter(config.rate_limit)
            return self._limiters[config.provider_id]

    def generate(self, prompt: Prompt, config: ProviderConfig) -> RawResponse:
        attachment = prompt.attachments[0][1] if prompt.attachments else ""
        estimate = estimate_tokens(prompt.text) + estimate_tokens(attachment)
        if estimate > config.max_context_tokens:
            raise ContextOverflow(
                f"prompt estimate {estimate} tokens exceeds limit {config.max_context_tokens}"
            )
        if config.is_replay:
            return self._generate_replay(prompt, config)
        self._limiter(config).wait()
        return self._generate_http(prompt, config)

    def _generate_replay(self, prompt: Prompt, config: ProviderConfig) -> RawResponse:
        fixture = Path(config.endpoint) / prompt.task_id
        if not fixture.is_file():
            # Allow a .txt suffix for editor friendliness.
            alt = fixture.with_suffix(".txt")
            if alt.is_file():
                fixture = alt
            else:
                raise TransportError(f"no replay fixture for task {prompt.task_id!r} in {config.endpoint}")
        return RawResponse(text=fixture.read_text(), latency=0.0)

    def _generate_http(self, prompt: Prompt, config: ProviderConfig) -> RawResponse:
        content = prompt.text
        if prompt.attachments:
            name, text = prompt.attachments[0]
            content += f"\n\nFile `{name}`:\n```c\n{text}\n```"
        body = {
            "model": config.model_name,
            "messages": [{"role": "user", "content": content}],
        }
        body.update(config.request_params)
        payload = json.dumps(body).encode()
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"

        last_error: Exception | None = None
        for attempt in range(config.network_retries + 1):
            request = urllib.request.Request(config.endpoint, data=payload, headers=headers)
            start = time.monotonic()
            try:
                with urllib.request.urlopen(request, timeout=config.timeout) as resp:
                    data = json.loads(resp.read().decode())
                latency = time.monotonic() - start
                return _parse_chat_completion(data, latency)
            except TimeoutError as exc:
                raise ProviderTimeout(f"{config.provider_id}: no response within {config.timeout}s") from exc
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, TimeoutError):
                    raise ProviderTimeout(
                        f"{config.provider_id}: no response within {config.timeout}s"
                    ) from exc
                last_error = exc
                if attempt < config.network_retries:
                    time.sleep(min(2.0**attempt, 10.0))
                    continue
            except (json.JSONDecodeError, KeyError) as exc:
                raise TransportError(f"{config.provider_id}: malformed response: {exc}") from exc
        raise TransportError(f"{config.provider_id}: {last_error}") from last_error


def _parse_chat_completion(data: dict, latency: float) -> RawResponse:
    choice = data["choices"][0]
    text = choice.get("message", {}).get("content") or choice.get("text") or ""
    usage = data.get("usage", {})
    citations = list(data.get("citations", []))
    return RawResponse(
        text=text,
        prompt_tokens=usage.get("prompt_tokens"),
        completion_tokens=usage.get("completion_tokens"),
        latency=latency,
        truncated=choice.get("finish_reason") == "length",
        citations=citations,
    )


# --- patch extraction -----------------------------------------------------------

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_URL_RE = re.compile(r"https?://[^\s)\"'>`]+")
_URL_COMMENT_LINE_RE = re.compile(
    r"^\s*(//|/\*|\*)?\s*(source|sources|see|ref|reference)?:?\s*https?://\S+\s*(\*/)?\s*$",
    re.IGNORECASE,
)


def _whitespace_normal(text: str) -> str:
    return " ".join(text.split())


def _brace_balanced(text: str) -> bool:
    masked, _ = splicer.mask_source(text)
    depth = 0
    for ch in masked:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _largest_fenced_block(text: str) -> str | None:
    blocks = _FENCE_RE.findall(text)
    if not blocks:
        return None
    best = blocks[0]
    for b in blocks[1:]:
        if len(b) > len(best):  # first occurrence wins ties
            best = b
    return best


def _trim_citation_lines(block: str) -> tuple[str, list[str]]:
    """Drop URL-only comment lines at the block's edges; keep the middle intact."""
    lines = block.splitlines(keepends=True)
    stripped: list[str] = []
    start, end = 0, len(lines)
    while start < end and _URL_COMMENT_LINE_RE.match(lines[start]):
        stripped.extend(_URL_RE.findall(lines[start]))
        start += 1
    while end > start and _URL_COMMENT_LINE_RE.match(lines[end - 1]):
        stripped.extend(_URL_RE.findall(lines[end - 1]))
        end -= 1
    return "".join(lines[start:end]), stripped


def extract_patch(raw: RawResponse, task: CommitTask) -> GeneratedPatch:
    """Pull a usable candidate out of a raw response.

    Takes the largest fenced code block (whole text when unfenced), records
    citation URLs, detects whole-file responses, and sets the empty/partial
    flags against the pre-commit function.
    """
    block = _largest_fenced_block(raw.text)
    if block is None:
        block = raw.text
    block, edge_citations = _trim_citation_lines(block)
    citations = list(raw.citations)
    citations.extend(edge_citations)
    for url in _URL_RE.findall(block):
        if url not in citations:
            citations.append(url)

    if "{" not in block:
        raise NoCodeFound("response contains no brace-bearing content")

    scope = "function"
    try:
        pre_spans = splicer.scan_functions(task.context_file_pre)
    except splicer.SplicerError:
        pre_spans = []
    if pre_spans:
        try:
            block_names = {s.name for s in splicer.scan_functions(block)}
        except splicer.SplicerError:
            block_names = set()
        pre_names = [s.name for s in pre_spans]
        overlap = len(block_names & set(pre_names))
        if pre_names[0] in block_names and overlap >= 0.8 * len(pre_names):
            scope = "whole-file"

    function_text = block
    if scope == "function":
        # Narrow multi-definition blocks down to the target when present.
        try:
            span = splicer.locate_function(block, task.function_name)
            function_text = splicer.extract_span(block, span)
        except splicer.SplicerError:
            function_text = block

    is_partial = raw.truncated or not _brace_balanced(function_text)
    is_empty = False
    if not is_partial and task.kind is CommitKind.BUG_FIX and task.function_span_pre:
        pre_fn = _pre_function_text(task)
        candidate_fn = function_text
        if scope == "whole-file":
            try:
                span = splicer.locate_function(block, task.function_name)
                candidate_fn = splicer.extract_span(block, span)
            except splicer.SplicerError:
                candidate_fn = ""
        if candidate_fn and _whitespace_normal(candidate_fn) == _whitespace_normal(pre_fn):
            is_empty = True

    return GeneratedPatch(
        function_text=function_text,
        scope=scope,
        is_empty=is_empty,
        is_partial=is_partial,
        stripped_citations=citations,
    )


def _pre_function_text(task: CommitTask) -> str:
    lines = task.context_file_pre.splitlines(keepends=True)
    lo, hi = task.function_span_pre
    return "".join(lines[lo - 1 : hi])
