"""Model-provider boundary with live, record, and replay modes.

Every stage of the engine talks to a language model through ``Provider``. A
request is fingerprinted over its purpose plus full message list; in record
mode each response is archived under that fingerprint, and in replay mode the
archive is the only source of responses. That makes any pipeline built on
top of this module bit-reproducible offline.

Mode, endpoint, and credentials come from environment variables
(``UIGEN_PROVIDER_MODE``, ``UIGEN_PROVIDER_ENDPOINT``, ``UIGEN_PROVIDER_API_KEY``,
``UIGEN_REPLAY_ARCHIVE``); credentials are never written into archives.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from .errors import EngineError

PURPOSES = frozenset(
    {
        "requirement_spec",
        "representation",
        "ui_code",
        "reward_rubric",
        "metric_scoring",
        "suite_generation",
        "listwise_ranking",
    }
)

MODES = ("live", "record", "replay")

_LIVE_FORBIDDEN = False


def forbid_live_calls(flag: bool = True) -> None:
    """Process-wide assertion switch: test suites flip this so live mode can never run."""
    global _LIVE_FORBIDDEN
    _LIVE_FORBIDDEN = flag


class ProviderError(EngineError):
    """Base class for all provider-side failures."""


class BackendError(ProviderError):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class CompletionTimeoutError(ProviderError):
    pass


class ReplayMissError(ProviderError):
    def __init__(self, purpose: str, fingerprint: str):
        super().__init__(f"no archived response for a {purpose!r} request (fingerprint {fingerprint[:12]}…)")
        self.purpose = purpose
        self.fingerprint = fingerprint


class LiveCallsForbiddenError(ProviderError):
    pass


class ArchiveCollisionError(ProviderError):
    pass


class ExtractionError(ProviderError):
    """Model output could not be turned into the requested structured document."""

    def __init__(self, message: str, excerpt: str = ""):
        super().__init__(f"{message}: {excerpt[:200]!r}" if excerpt else message)
        self.excerpt = excerpt


@dataclass(frozen=True)
class Message:
    role: str  # "system" | "user"
    content: str


@dataclass(frozen=True)
class Attachment:
    """Optional binary input, e.g. a rendered screenshot for judging."""

    kind: str
    media_type: str
    data_base64: str


@dataclass(frozen=True)
class Budget:
    max_output_units: int = 4096
    timeout_s: float = 120.0


@dataclass(frozen=True)
class ProviderRequest:
    purpose: str
    messages: tuple[Message, ...]
    response_contract: str = "free_text"  # "free_text" | "structured_document"
    budget: Budget = field(default_factory=Budget)
    attachments: tuple[Attachment, ...] = ()

    def __post_init__(self):
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown request purpose {self.purpose!r}")
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.budget.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        for message in self.messages:
            if message.role not in ("system", "user"):
                raise ValueError(f"unknown message role {message.role!r}")


@dataclass(frozen=True)
class Usage:
    input_units: int = 0
    output_units: int = 0


@dataclass(frozen=True)
class ProviderResponse:
    content: str
    usage: Usage = field(default_factory=Usage)
    latency_ms: float = 0.0


def fingerprint(request: ProviderRequest) -> str:
    """Stable hash over purpose plus the full message list."""
    payload = {
        "purpose": request.purpose,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
    }
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    )
    return digest.hexdigest()


class ReplayArchive:
    """Fingerprint-keyed response store, persisted as one JSON file per scenario."""

    def __init__(self, backend_label: str = "scripted", created_at: str | None = None):
        self.entries: dict[str, ProviderResponse] = {}
        self.metadata = {
            "created_at": created_at or datetime.now(timezone.utc).isoformat(),
            "backend": backend_label,
        }
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path) -> "ReplayArchive":
        data = json.loads(Path(path).read_text())
        archive = cls(
            backend_label=data.get("metadata", {}).get("backend", "unknown"),
            created_at=data.get("metadata", {}).get("created_at"),
        )
        for fp, raw in data.get("entries", {}).items():
            usage = raw.get("usage", {})
            archive.entries[fp] = ProviderResponse(
                content=raw["content"],
                usage=Usage(usage.get("input_units", 0), usage.get("output_units", 0)),
                latency_ms=raw.get("latency_ms", 0.0),
            )
        return archive

    def save(self, path: str | Path) -> None:
        import os
        import tempfile

        # the lock covers snapshot AND write: whichever save runs last writes
        # the latest state, so concurrent recorders can never lose entries
        with self._lock:
            payload = {
                "metadata": self.metadata,
                "entries": {
                    fp: {
                        "content": resp.content,
                        "usage": {
                            "input_units": resp.usage.input_units,
                            "output_units": resp.usage.output_units,
                        },
                        "latency_ms": resp.latency_ms,
                    }
                    for fp, resp in sorted(self.entries.items())
                },
            }
            target = Path(path)
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, scratch = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
            os.replace(scratch, target)

    def insert(self, fp: str, response: ProviderResponse) -> None:
        with self._lock:
            existing = self.entries.get(fp)
            if existing is not None and existing != response:
                raise ArchiveCollisionError(
                    f"fingerprint {fp[:12]}… already archived with different content"
                )
            self.entries[fp] = response

    def get(self, fp: str) -> ProviderResponse | None:
        return self.entries.get(fp)

    def content_hash(self) -> str:
        joined = "".join(fp for fp in sorted(self.entries))
        return hashlib.sha256(joined.encode("ascii")).hexdigest()


Backend = Callable[[ProviderRequest], ProviderResponse]


class Provider:
    """Pluggable completion boundary.

    live:   forward to the configured backend with retries.
    record: forward, then archive (fingerprint -> response) and persist.
    replay: answer from the archive only; misses raise ReplayMissError.
    """

    def __init__(
        self,
        mode: str,
        backend: Backend | None = None,
        archive: ReplayArchive | None = None,
        archive_path: str | Path | None = None,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown provider mode {mode!r}")
        if mode in ("live", "record") and backend is None:
            raise ValueError(f"{mode} mode requires a backend")
        if mode in ("record", "replay") and archive is None:
            raise ValueError(f"{mode} mode requires an archive")
        self.mode = mode
        self.backend = backend
        self.archive = archive
        self.archive_path = Path(archive_path) if archive_path else None
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.sleep = sleep
        self.calls = 0

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.calls += 1
        fp = fingerprint(request)
        if self.mode == "replay":
            assert self.archive is not None
            response = self.archive.get(fp)
            if response is None:
                raise ReplayMissError(request.purpose, fp)
            return response
        if self.mode == "live" and _LIVE_FORBIDDEN:
            raise LiveCallsForbiddenError("live provider calls are forbidden in this process")
        response = self._call_with_retries(request)
        if self.mode == "record":
            assert self.archive is not None
            self.archive.insert(fp, response)
            if self.archive_path is not None:
                self.archive.save(self.archive_path)
        return response

    def _call_with_retries(self, request: ProviderRequest) -> ProviderResponse:
        assert self.backend is not None
        last: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                return self.backend(request)
            except CompletionTimeoutError:
                raise
            except (BackendError, ConnectionError, OSError) as exc:
                last = exc
                if attempt < self.max_attempts:
                    self.sleep(self.backoff_s * 2 ** (attempt - 1))
        raise BackendError(f"backend failed after {self.max_attempts} attempts: {last}", attempts=self.max_attempts)


class HttpBackend:
    """Minimal JSON-over-HTTP completion backend for live and record modes."""

    def __init__(self, endpoint: str, api_key: str = ""):
        self.endpoint = endpoint
        self.api_key = api_key

    def __call__(self, request: ProviderRequest) -> ProviderResponse:
        import httpx

        headers = {"content-type": "application/json"}
        if self.api_key:
            headers["authorization"] = f"Bearer {self.api_key}"
        payload = {
            "purpose": request.purpose,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "max_output_units": request.budget.max_output_units,
        }
        if request.attachments:
            payload["attachments"] = [
                {"kind": a.kind, "media_type": a.media_type, "data": a.data_base64}
                for a in request.attachments
            ]
        started = time.monotonic()
        try:
            response = httpx.post(
                self.endpoint, json=payload, headers=headers, timeout=request.budget.timeout_s
            )
        except httpx.TimeoutException as exc:
            raise CompletionTimeoutError(str(exc)) from None
        except httpx.HTTPError as exc:
            raise BackendError(f"transport failure: {exc}") from None
        if response.status_code != 200:
            raise BackendError(f"backend returned status {response.status_code}")
        body = response.json()
        usage = body.get("usage", {})
        return ProviderResponse(
            content=body.get("content", ""),
            usage=Usage(usage.get("input_units", 0), usage.get("output_units", 0)),
            latency_ms=(time.monotonic() - started) * 1000.0,
        )


def provider_from_env(env: dict[str, str] | None = None) -> Provider:
    import os

    env = dict(os.environ if env is None else env)
    mode = env.get("UIGEN_PROVIDER_MODE", "replay")
    archive_path = env.get("UIGEN_REPLAY_ARCHIVE", "")
    archive: ReplayArchive | None = None
    if archive_path and Path(archive_path).exists():
        archive = ReplayArchive.load(archive_path)
    elif archive_path and mode == "replay":
        raise FileNotFoundError(f"replay archive {archive_path!r} does not exist")
    backend: Backend | None = None
    if mode in ("live", "record"):
        endpoint = env.get("UIGEN_PROVIDER_ENDPOINT", "")
        if not endpoint:
            raise ValueError(f"{mode} mode requires UIGEN_PROVIDER_ENDPOINT")
        backend = HttpBackend(endpoint, env.get("UIGEN_PROVIDER_API_KEY", ""))
    if mode == "record" and archive is None:
        # recording into a fresh archive file is the normal first-run case
        archive = ReplayArchive(backend_label=env.get("UIGEN_PROVIDER_ENDPOINT", "http"))
    return Provider(mode=mode, backend=backend, archive=archive, archive_path=archive_path or None)


# ---------------------------------------------------------------------------
# Structured extraction

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)

_SCHEMA_PARSERS: dict[str, Callable[[str], Any]] = {}


def register_schema_parser(kind: str, parser: Callable[[str], Any]) -> None:
    _SCHEMA_PARSERS[kind] = parser


def strip_fences(text: str) -> str:
    """Return the content of the largest fenced block, or the text unchanged."""
    blocks = _FENCE_RE.findall(text)
    if blocks:
        return max(blocks, key=len).strip()
    return text.strip()


def extract_json_text(text: str) -> str:
    """Locate the JSON body of a possibly chatty response.

    Tries, in order: the whole text, the largest fenced block, and the
    outermost brace/bracket span. Raises ExtractionError when nothing parses.
    """
    candidates = [text.strip(), strip_fences(text)]
    for opener, closer in (("{", "}"), ("[", "]")):
        start, end = text.find(opener), text.rfind(closer)
        if start != -1 and end > start:
            candidates.append(text[start : end + 1])
    for candidate in candidates:
        if not candidate:
            continue
        try:
            json.loads(candidate)
        except (json.JSONDecodeError, ValueError):
            continue
        return candidate
    raise ExtractionError("no structured document found in response", excerpt=text)


def extract_structured(response: ProviderResponse, schema_kind: str) -> Any:
    """Strip narrative wrapping and delegate to the parser registered for the schema."""
    parser = _SCHEMA_PARSERS.get(schema_kind)
    if parser is None:
        raise ValueError(f"no parser registered for schema kind {schema_kind!r}")
    body = extract_json_text(response.content)
    try:
        return parser(body)
    except ExtractionError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ExtractionError(f"response does not match the {schema_kind} schema ({exc})", excerpt=body) from None
