"""Append-only, file-backed session store.

Every session is one JSONL event log under ``<root>/sessions/<id>.log``;
events are never rewritten, each append is flushed and fsynced, and a session
snapshot is a pure fold over its log. Annotations live in a store-wide
``annotations.log`` with the same discipline. All indexes (session ids,
artifact locations, annotation keys) are rebuildable from the logs alone, so
a process killed between events loses nothing that was acknowledged.
"""

from __future__ import annotations

import json
import os
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import EngineError
from .evalharness import PairwiseJudgment, judgment_from_dict, judgment_to_dict

SESSION_EVENT_TYPES = (
    "created",
    "spec_ready",
    "representation_ready",
    "reward_ready",
    "iteration_done",
    "converged",
    "exhausted",
    "failed",
)

TERMINAL_EVENTS = ("converged", "exhausted", "failed")


class UnknownSessionError(KeyError):
    pass


class UnknownArtifactError(KeyError):
    pass


class DuplicateAnnotationError(EngineError):
    pass


@dataclass
class SessionSnapshot:
    """Consistent cut of a session log."""

    id: str
    created_at: str = ""
    query: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    status: str = "running"
    spec: dict[str, Any] | None = None
    representation: dict[str, Any] | None = None
    prose: str | None = None
    reward_fn: dict[str, Any] | None = None
    iterations: list[dict[str, Any]] = field(default_factory=list)
    final_artifact: str | None = None
    error: str | None = None
    event_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "created_at": self.created_at,
            "query": self.query,
            "config": self.config,
            "spec": self.spec,
            "reward_fn": self.reward_fn,
            "iterations": self.iterations,
            "status": self.status,
            "final_artifact": self.final_artifact,
            "error": self.error,
        }
        if self.prose is not None:
            out["prose"] = self.prose
        else:
            out["representation"] = self.representation
        return out

    def summary(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "status": self.status,
            "query": self.query.get("text", ""),
            "iterations": [
                {
                    "index": record["index"],
                    "scores": [c["evaluation"]["overall"] for c in record["candidates"]],
                    "selected": record["selected"],
                    "best_so_far": record["best_so_far"],
                }
                for record in self.iterations
            ],
            "final_artifact": self.final_artifact,
            "error": self.error,
            "event_count": self.event_count,
        }


def fold_events(session_id: str, events: Iterable[dict[str, Any]]) -> SessionSnapshot:
    snapshot = SessionSnapshot(id=session_id)
    for event in events:
        kind = event["type"]
        data = event.get("data", {})
        snapshot.event_count += 1
        if kind == "created":
            snapshot.created_at = data.get("created_at", event.get("ts", ""))
            snapshot.query = data.get("query", {})
            snapshot.config = data.get("config", {})
        elif kind == "spec_ready":
            snapshot.spec = data.get("spec")
        elif kind == "representation_ready":
            snapshot.representation = data.get("representation")
            snapshot.prose = data.get("prose")
        elif kind == "reward_ready":
            snapshot.reward_fn = {"origin": data.get("origin"), "metrics": data.get("metrics", [])}
        elif kind == "iteration_done":
            snapshot.iterations.append(data["record"])
        elif kind in ("converged", "exhausted"):
            snapshot.status = kind
            snapshot.final_artifact = data.get("final_artifact")
        elif kind == "failed":
            snapshot.status = "failed"
            snapshot.error = data.get("error")
    return snapshot


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.annotations_path = self.root / "annotations.log"
        self._master_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._seq: dict[str, int] = {}
        self._annotation_keys: set[tuple[str, str]] = set()
        self._annotation_seq = 0
        self._load_annotation_index()

    # -- internals ----------------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._master_lock:
            return self._session_locks[session_id]

    def _log_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.log"

    @staticmethod
    def _append_line(path: Path, record: dict[str, Any]) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with path.open("a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())

    @staticmethod
    def _read_lines(path: Path) -> list[dict[str, Any]]:
        if not path.exists():
            return []
        out = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line:
                out.append(json.loads(line))
        return out

    def _load_annotation_index(self) -> None:
        for record in self._read_lines(self.annotations_path):
            data = record.get("data", {})
            self._annotation_keys.add((data.get("instance_id", ""), data.get("annotator_id", "")))
            self._annotation_seq = max(self._annotation_seq, record.get("seq", 0))

    # -- session events ------------------------------------------------------

    def session_ids(self) -> list[str]:
        return sorted(path.stem for path in self.sessions_dir.glob("*.log"))

    def has_session(self, session_id: str) -> bool:
        return self._log_path(session_id).exists()

    def append_event(self, session_id: str, event_type: str, data: dict[str, Any], ts: str) -> int:
        if event_type not in SESSION_EVENT_TYPES:
            raise ValueError(f"unknown session event type {event_type!r}")
        with self._lock_for(session_id):
            if session_id not in self._seq:
                self._seq[session_id] = len(self._read_lines(self._log_path(session_id)))
            seq = self._seq[session_id] + 1
            self._append_line(
                self._log_path(session_id), {"seq": seq, "ts": ts, "type": event_type, "data": data}
            )
            self._seq[session_id] = seq
            return seq

    def read_events(self, session_id: str) -> list[dict[str, Any]]:
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownSessionError(session_id)
        return self._read_lines(path)

    def snapshot(self, session_id: str) -> SessionSnapshot:
        return fold_events(session_id, self.read_events(session_id))

    def artifact(self, artifact_id: str) -> dict[str, Any]:
        """Locate an artifact record by scanning iteration events; logs are the index."""
        for session_id in self.session_ids():
            for event in self.read_events(session_id):
                if event["type"] != "iteration_done":
                    continue
                for candidate in event["data"]["record"]["candidates"]:
                    if candidate["artifact"]["id"] == artifact_id:
                        return candidate["artifact"]
        raise UnknownArtifactError(artifact_id)

    # -- annotations ----------------------------------------------------------

    def append_annotation(self, judgment: PairwiseJudgment, ts: str) -> str:
        key = (judgment.instance_id, judgment.annotator_id)
        with self._master_lock:
            if key in self._annotation_keys:
                raise DuplicateAnnotationError(
                    f"annotator {judgment.annotator_id!r} already judged instance {judgment.instance_id!r}"
                )
            self._annotation_seq += 1
            self._append_line(
                self.annotations_path,
                {
                    "seq": self._annotation_seq,
                    "ts": ts,
                    "type": "annotation_received",
                    "data": judgment_to_dict(judgment),
                },
            )
            self._annotation_keys.add(key)
        return f"{judgment.instance_id}/{judgment.annotator_id}"

    def read_annotations(self) -> list[PairwiseJudgment]:
        return [
            judgment_from_dict(record["data"]) for record in self._read_lines(self.annotations_path)
        ]

    def trap_keys(self) -> dict[str, str]:
        """Optional trap mandates, loaded from <root>/traps.json when present."""
        path = self.root / "traps.json"
        if not path.exists():
            return {}
        return {str(k): str(v) for k, v in json.loads(path.read_text()).items()}
