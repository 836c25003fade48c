"""Iterative generate-evaluate refinement loop.

Each iteration generates a batch of interface candidates, scores them against
the session's reward function, and carries the best artifact seen so far
forward; from the second iteration on, the previous best document and its
full per-metric feedback are part of the generation context. The loop stops
as soon as the best overall score reaches the threshold (default 90) or after
the iteration cap (default 5). A one-shot session is a single iteration with
a single candidate and no feedback context.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable

from .errors import EngineError, InvalidConfigError
from .pipeline import (
    GenerationPipeline,
    InterfaceArtifact,
    NaturalDescription,
    Provenance,
    RefinementFeedback,
    UserQuery,
)
from .provider import Provider
from .representation import StructuredRepresentation, representation_to_obj
from .reward import CandidateEvaluation, RewardFunction, build_adaptive_reward, score_candidate, static_reward

logger = logging.getLogger(__name__)

REWARD_ORIGINS = ("adaptive", "static")
GENERATION_MODES = ("iterative", "one_shot")
REPRESENTATION_MODES = ("structured", "natural_language")

STATUS_RUNNING = "running"
STATUS_CONVERGED = "converged"
STATUS_EXHAUSTED = "exhausted"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class RefinementConfig:
    candidates_per_iteration: int = 3
    max_iterations: int = 5
    score_threshold: float = 90.0
    reward_origin: str = "adaptive"
    generation_mode: str = "iterative"
    representation_mode: str = "structured"

    def __post_init__(self):
        if self.reward_origin not in REWARD_ORIGINS:
            raise InvalidConfigError(f"unknown reward origin {self.reward_origin!r}")
        if self.generation_mode not in GENERATION_MODES:
            raise InvalidConfigError(f"unknown generation mode {self.generation_mode!r}")
        if self.representation_mode not in REPRESENTATION_MODES:
            raise InvalidConfigError(f"unknown representation mode {self.representation_mode!r}")
        if self.generation_mode == "one_shot":
            # one-shot is exactly one iteration with one candidate
            object.__setattr__(self, "candidates_per_iteration", 1)
            object.__setattr__(self, "max_iterations", 1)
        if self.candidates_per_iteration < 1:
            raise InvalidConfigError("candidates_per_iteration must be at least 1")
        if self.max_iterations < 1:
            raise InvalidConfigError("max_iterations must be at least 1")
        if not 0.0 <= self.score_threshold <= 100.0:
            raise InvalidConfigError("score_threshold must be within [0, 100]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "candidates_per_iteration": self.candidates_per_iteration,
            "max_iterations": self.max_iterations,
            "score_threshold": self.score_threshold,
            "reward_origin": self.reward_origin,
            "generation_mode": self.generation_mode,
            "representation_mode": self.representation_mode,
        }


@dataclass(frozen=True)
class IterationRecord:
    index: int  # 1-based
    candidates: tuple[tuple[InterfaceArtifact, CandidateEvaluation], ...]
    selected: int  # 1-based candidate index, argmax with lowest-index tie-break
    best_so_far: tuple[str, float]  # (artifact id, overall score), monotone across iterations

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "candidates": [
                {"artifact": artifact.to_dict(), "evaluation": evaluation.to_dict()}
                for artifact, evaluation in self.candidates
            ],
            "selected": self.selected,
            "best_so_far": {"artifact_id": self.best_so_far[0], "score": self.best_so_far[1]},
        }


@dataclass
class RefinementSession:
    id: str
    query: UserQuery
    config: RefinementConfig
    reward_fn: RewardFunction | None = None
    spec: Any = None
    representation: StructuredRepresentation | NaturalDescription | None = None
    iterations: list[IterationRecord] = field(default_factory=list)
    status: str = STATUS_RUNNING
    final_artifact: str | None = None
    error: str | None = None
    created_at: str = ""

    @property
    def best_so_far(self) -> tuple[str, float] | None:
        return self.iterations[-1].best_so_far if self.iterations else None

    def find_artifact(self, artifact_id: str) -> InterfaceArtifact | None:
        for record in self.iterations:
            for artifact, _ in record.candidates:
                if artifact.id == artifact_id:
                    return artifact
        return None


class RewardEngine:
    """Builds rubrics and scores candidates; swap-in point for scoring policy."""

    def __init__(self, per_metric_calls: bool = False):
        self.per_metric_calls = per_metric_calls

    def build(self, query: UserQuery, provider: Provider, origin: str) -> RewardFunction:
        if origin == "static":
            return static_reward()
        return build_adaptive_reward(query, provider)

    def score(self, artifact: InterfaceArtifact, fn: RewardFunction, provider: Provider) -> CandidateEvaluation:
        return score_candidate(artifact, fn, provider, per_metric_calls=self.per_metric_calls)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def step(
    session: RefinementSession,
    provider: Provider,
    pipeline: GenerationPipeline,
    reward: RewardEngine,
    components=None,
    examples=None,
    clock: Callable[[], str] = _utc_now,
) -> IterationRecord:
    """Run one iteration: generate and score a candidate batch, append the record."""
    if session.status != STATUS_RUNNING:
        raise ValueError(f"session {session.id} is {session.status}, not running")
    assert session.reward_fn is not None and session.spec is not None
    assert session.representation is not None
    if components is None:
        components = pipeline.lookup_components(session.representation)
    if examples is None:
        examples = pipeline.retrieve_examples(session.query)

    index = len(session.iterations) + 1
    feedback = None
    if index > 1:
        best_id, _ = session.iterations[-1].best_so_far
        best_artifact = session.find_artifact(best_id)
        best_evaluation = next(
            evaluation
            for record in session.iterations
            for artifact, evaluation in record.candidates
            if artifact.id == best_id
        )
        assert best_artifact is not None
        feedback = RefinementFeedback(document=best_artifact.document, evaluation=best_evaluation)

    candidates: list[tuple[InterfaceArtifact, CandidateEvaluation]] = []
    for candidate_index in range(1, session.config.candidates_per_iteration + 1):
        artifact = pipeline.generate_ui(
            session.query,
            session.spec,
            session.representation,
            components,
            examples,
            provider,
            feedback=feedback,
            provenance=Provenance(session_id=session.id, iteration=index, candidate=candidate_index),
            created_at=clock(),
            # unique per (iteration, candidate): keeps generation requests
            # distinct so record/replay can tell candidates apart
            variation_seed=f"i{index}c{candidate_index}",
        )
        evaluation = reward.score(artifact, session.reward_fn, provider)
        candidates.append((artifact, evaluation))

    selected = 1
    for i, (_, evaluation) in enumerate(candidates, 1):
        if evaluation.overall > candidates[selected - 1][1].overall:
            selected = i
    best_candidate = candidates[selected - 1]
    best = (best_candidate[0].id, best_candidate[1].overall)
    if session.iterations and session.iterations[-1].best_so_far[1] >= best[1]:
        best = session.iterations[-1].best_so_far

    record = IterationRecord(
        index=index, candidates=tuple(candidates), selected=selected, best_so_far=best
    )
    session.iterations.append(record)
    return record


def run_refinement(
    query: UserQuery,
    config: RefinementConfig,
    provider: Provider,
    pipeline: GenerationPipeline | None = None,
    reward: RewardEngine | None = None,
    session_id: str | None = None,
    clock: Callable[[], str] = _utc_now,
    observer: Any = None,
) -> RefinementSession:
    """Drive a full session. Stage errors mark the session failed, preserving the partial trace.

    The observer, when given, is notified with (event_name, payload) after
    each persisted milestone; the service uses this to journal sessions.
    """
    pipeline = pipeline or GenerationPipeline()
    reward = reward or RewardEngine()
    session = RefinementSession(
        id=session_id or uuid.uuid4().hex[:12],
        query=query,
        config=config,
        created_at=clock(),
    )

    def notify(event: str, payload: dict) -> None:
        if observer is not None:
            observer(event, payload)

    try:
        session.spec = pipeline.generate_requirement_spec(query, provider)
        notify("spec_ready", {"spec": session.spec.to_dict()})
        session.representation = pipeline.generate_representation(
            session.spec, query, provider, config.representation_mode
        )
        if isinstance(session.representation, NaturalDescription):
            notify("representation_ready", {"prose": session.representation.text})
        else:
            notify(
                "representation_ready",
                {"representation": representation_to_obj(session.representation)},
            )
        session.reward_fn = reward.build(query, provider, config.reward_origin)
        notify(
            "reward_ready",
            {
                "origin": session.reward_fn.origin,
                "metrics": [
                    {
                        "name": m.name,
                        "description": m.description,
                        "criteria": list(m.criteria),
                        "weight": m.weight,
                    }
                    for m in session.reward_fn.metrics
                ],
            },
        )
        components = pipeline.lookup_components(session.representation)
        examples = pipeline.retrieve_examples(query)
        while session.status == STATUS_RUNNING:
            record = step(
                session, provider, pipeline, reward, components=components, examples=examples, clock=clock
            )
            notify("iteration_done", {"record": record.to_dict()})
            if record.best_so_far[1] >= config.score_threshold:
                session.status = STATUS_CONVERGED
            elif len(session.iterations) >= config.max_iterations:
                session.status = STATUS_EXHAUSTED
        session.final_artifact = session.iterations[-1].best_so_far[0]
        notify(
            session.status,
            {"final_artifact": session.final_artifact, "best_score": session.iterations[-1].best_so_far[1]},
        )
    except EngineError as exc:
        logger.warning("session %s failed: %s", session.id, exc)
        session.status = STATUS_FAILED
        session.error = f"{type(exc).__name__}: {exc}"
        notify("failed", {"error": session.error})
    return session


def session_to_dict(session: RefinementSession) -> dict[str, Any]:
    """Full session trace as one JSON-ready document."""
    representation: dict[str, Any]
    if session.representation is None:
        representation = {}
    elif isinstance(session.representation, NaturalDescription):
        representation = {"prose": session.representation.text}
    else:
        representation = {"representation": representation_to_obj(session.representation)}
    return {
        "id": session.id,
        "created_at": session.created_at,
        "query": {
            "id": session.query.id,
            "text": session.query.text,
            "domain": session.query.domain,
            "detail_level": session.query.detail_level,
            "query_type": session.query.query_type,
        },
        "config": session.config.to_dict(),
        "spec": session.spec.to_dict() if session.spec is not None else None,
        **representation,
        "reward_fn": (
            {
                "origin": session.reward_fn.origin,
                "metrics": [
                    {
                        "name": m.name,
                        "description": m.description,
                        "criteria": list(m.criteria),
                        "weight": m.weight,
                    }
                    for m in session.reward_fn.metrics
                ],
            }
            if session.reward_fn is not None
            else None
        ),
        "iterations": [record.to_dict() for record in session.iterations],
        "status": session.status,
        "final_artifact": session.final_artifact,
        "error": session.error,
    }
