"""Reward rubrics and candidate scoring.

A reward function is a weighted set of metrics, each carrying human-readable
criteria. Rubrics are either built per query by the model (adaptive) or taken
from a fixed seven-dimension rubric (static). Candidates are scored 0-100 per
metric and aggregated to a weighted overall score, rounded half-up to one
decimal so threshold comparisons are unambiguous.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .errors import EngineError
from .provider import (
    Budget,
    ExtractionError,
    Message,
    Provider,
    ProviderRequest,
    extract_structured,
    register_schema_parser,
)

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 0.001
RENORMALIZE_BAND = 0.05

RUBRIC_WRAPPER_NAME = "generate_metrics"


class RubricInvalidError(EngineError):
    pass


class LengthMismatchError(EngineError):
    pass


class WeightSumError(EngineError):
    pass


@dataclass(frozen=True)
class RewardMetric:
    name: str
    description: str
    criteria: tuple[str, ...]
    weight: float


@dataclass(frozen=True)
class RewardFunction:
    query_id: str
    origin: str  # "adaptive" | "static"
    metrics: tuple[RewardMetric, ...]

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(m.weight for m in self.metrics)


@dataclass(frozen=True)
class MetricScore:
    name: str
    score: float
    feedback: str = ""


@dataclass(frozen=True)
class CandidateEvaluation:
    artifact_id: str
    per_metric: tuple[MetricScore, ...]
    overall: float

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "per_metric": [
                {"name": s.name, "score": s.score, "feedback": s.feedback} for s in self.per_metric
            ],
            "overall": self.overall,
        }


# ---------------------------------------------------------------------------
# Aggregation

def round_half_up(value: float, decimals: int = 1) -> float:
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(str(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def weighted_mean(scores: Sequence[float], weights: Sequence[float]) -> float:
    """Unrounded weighted mean; strict about lengths and the weight-sum contract."""
    if len(scores) != len(weights):
        raise LengthMismatchError(f"{len(scores)} scores vs {len(weights)} weights")
    total = sum(weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise WeightSumError(f"weights sum to {total}, expected 1.0 ± {WEIGHT_SUM_TOLERANCE}")
    return sum(w * s for w, s in zip(weights, scores))


def aggregate(scores: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted mean of per-metric scores, rounded half-up to one decimal."""
    return round_half_up(weighted_mean(scores, weights), 1)


# ---------------------------------------------------------------------------
# Rubric construction

def _normalize_weights(metrics: list[RewardMetric]) -> list[RewardMetric]:
    total = sum(m.weight for m in metrics)
    if abs(total - 1.0) <= WEIGHT_SUM_TOLERANCE:
        return metrics
    if abs(total - 1.0) <= RENORMALIZE_BAND:
        logger.warning("rubric weights sum to %.4f; renormalizing to 1.0", total)
        return [replace(m, weight=m.weight / total) for m in metrics]
    raise RubricInvalidError(f"rubric weights sum to {total:.4f}, outside the ±{RENORMALIZE_BAND} band")


def parse_reward_function(text: str, query_id: str = "", origin: str = "adaptive") -> RewardFunction:
    """Parse a rubric document; accepts the wrapped shape, a bare object, or a bare list."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RubricInvalidError(f"malformed rubric document: {exc}") from None
    if isinstance(data, dict) and data.get("name") == RUBRIC_WRAPPER_NAME:
        data = data.get("args", {})
    if isinstance(data, dict):
        data = data.get("metrics", data)
    if not isinstance(data, list) or not data:
        raise RubricInvalidError("rubric must contain a non-empty metrics list")
    metrics: list[RewardMetric] = []
    for i, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise RubricInvalidError(f"metrics[{i}] is not an object")
        name = raw.get("name", "")
        criteria = raw.get("criteria", [])
        weight = raw.get("weight")
        if not name or not isinstance(name, str):
            raise RubricInvalidError(f"metrics[{i}] has no name")
        if not isinstance(criteria, list) or not criteria:
            raise RubricInvalidError(f"metric {name!r} has empty criteria")
        if not isinstance(weight, (int, float)) or not 0 < weight <= 1:
            raise RubricInvalidError(f"metric {name!r} has weight {weight!r}, expected a fraction in (0, 1]")
        metrics.append(
            RewardMetric(
                name=name,
                description=str(raw.get("description", "")),
                criteria=tuple(str(c) for c in criteria),
                weight=float(weight),
            )
        )
    return RewardFunction(query_id=query_id, origin=origin, metrics=tuple(_normalize_weights(metrics)))


def serialize_reward_function(fn: RewardFunction) -> str:
    payload = {
        "name": RUBRIC_WRAPPER_NAME,
        "args": {
            "metrics": [
                {
                    "description": m.description,
                    "weight": m.weight,
                    "name": m.name,
                    "criteria": list(m.criteria),
                }
                for m in fn.metrics
            ]
        },
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


register_schema_parser("reward_rubric", parse_reward_function)


_RUBRIC_PROMPT = """You design evaluation rubrics for generated web interfaces.
Given a user query, produce the metrics a careful reviewer would score the
interface on: name, one-line description, a list of concrete pass/fail
criteria, and a weight. Weights must sum to 1. Respond with JSON only, in the
shape {"name": "generate_metrics", "args": {"metrics": [...]}}.
"""


def build_adaptive_reward(query, provider: Provider, re_asks: int = 2) -> RewardFunction:
    """Ask the model for a query-specific rubric; re-ask on unusable output."""
    base = (
        Message("system", _RUBRIC_PROMPT),
        Message("user", f"User query:\n{query.text}\n\nGenerate the evaluation metrics."),
    )
    messages = base
    last: Exception | None = None
    for attempt in range(re_asks + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="reward_rubric",
                messages=messages,
                response_contract="structured_document",
                budget=Budget(max_output_units=2048),
            )
        )
        try:
            fn = extract_structured(response, "reward_rubric")
            return replace(fn, query_id=query.id)
        except (ExtractionError, RubricInvalidError) as exc:
            last = exc
            messages = messages + (
                Message(
                    "user",
                    f"The previous rubric was unusable ({exc}). "
                    "Emit only the corrected JSON document.",
                ),
            )
    assert last is not None
    raise last


_STATIC_CRITERIA = {
    "QIC": (
        "Query-Interface Consistency",
        (
            "The interface directly addresses what the query asked for.",
            "No requested capability is missing or replaced by filler.",
        ),
    ),
    "TaskEff": (
        "Task Efficiency",
        (
            "The primary task can be completed in few steps.",
            "No redundant input or navigation is required.",
        ),
    ),
    "Usability": (
        "Usability",
        (
            "Controls are clearly labeled and behave as labeled.",
            "Layout groups related actions together.",
        ),
    ),
    "Learnability": (
        "Learnability",
        (
            "A first-time user can start without instructions.",
            "Affordances follow common web conventions.",
        ),
    ),
    "IC": (
        "Information Clarity",
        (
            "Content is organized with a readable hierarchy.",
            "Key information is visible without digging.",
        ),
    ),
    "ASA": (
        "Aesthetic or Stylistic Appeal",
        (
            "Visual style is consistent across the page.",
            "Spacing, color, and type choices look deliberate.",
        ),
    ),
    "IES": (
        "Interaction Experience Satisfaction",
        (
            "Interactions give immediate, visible feedback.",
            "Using the interface feels responsive and coherent.",
        ),
    ),
}


def static_reward() -> RewardFunction:
    """The fixed seven-dimension rubric, identical across queries."""
    weight = 1.0 / len(_STATIC_CRITERIA)
    metrics = tuple(
        RewardMetric(name=name, description=description, criteria=criteria, weight=weight)
        for name, (description, criteria) in _STATIC_CRITERIA.items()
    )
    return RewardFunction(query_id="*", origin="static", metrics=metrics)


# ---------------------------------------------------------------------------
# Scoring

def _parse_scores(text: str) -> list[MetricScore]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("scores", data)
    if not isinstance(data, list):
        raise ValueError("scores must be a list")
    out = []
    for raw in data:
        if not isinstance(raw, dict) or "name" not in raw or "score" not in raw:
            raise ValueError("each score needs a name and a score")
        out.append(
            MetricScore(
                name=str(raw["name"]),
                score=float(raw["score"]),
                feedback=str(raw.get("feedback", "")),
            )
        )
    return out


register_schema_parser("scores", _parse_scores)


_SCORING_PROMPT = """You score a generated web interface against an evaluation rubric.
Score every metric from 0 to 100 and give one sentence of actionable feedback
per metric. Respond with JSON only:
{"scores": [{"name": "<metric>", "score": <0-100>, "feedback": "..."}]}
"""


def _rubric_block(fn: RewardFunction, metrics: Sequence[RewardMetric]) -> str:
    lines = []
    for m in metrics:
        lines.append(f"- {m.name} (weight {m.weight:.4f}): {m.description}")
        for criterion in m.criteria:
            lines.append(f"    * {criterion}")
    return "\n".join(lines)


def _clamp(score: MetricScore) -> MetricScore:
    if 0.0 <= score.score <= 100.0:
        return score
    clamped = min(100.0, max(0.0, score.score))
    logger.warning("score %s for %r out of range; clamped to %s", score.score, score.name, clamped)
    return replace(score, score=clamped)


def _ask_for_scores(provider: Provider, fn: RewardFunction, metrics, artifact, re_asks: int) -> list[MetricScore]:
    base = (
        Message("system", _SCORING_PROMPT),
        Message(
            "user",
            "Rubric:\n"
            + _rubric_block(fn, metrics)
            + "\n\nInterface document:\n"
            + artifact.document,
        ),
    )
    messages = base
    wanted = [m.name for m in metrics]
    last: Exception | None = None
    for attempt in range(re_asks + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="metric_scoring",
                messages=messages,
                response_contract="structured_document",
                budget=Budget(max_output_units=2048),
            )
        )
        try:
            scores = extract_structured(response, "scores")
            by_name = {s.name: s for s in scores}
            missing = [name for name in wanted if name not in by_name]
            if missing:
                raise ExtractionError(f"missing scores for {missing}", excerpt=response.content)
            return [by_name[name] for name in wanted]
        except ExtractionError as exc:
            last = exc
            messages = messages + (
                Message(
                    "user",
                    f"The previous answer was unusable ({exc}). "
                    "Emit only the corrected JSON document with one entry per metric.",
                ),
            )
    assert last is not None
    raise last


def score_candidate(
    artifact,
    reward_fn: RewardFunction,
    provider: Provider,
    per_metric_calls: bool = False,
    re_asks: int = 2,
) -> CandidateEvaluation:
    """Score one artifact against the rubric.

    Default is a single listwise call covering all metrics; per_metric_calls
    switches to one call per metric. Out-of-range scores are clamped with a
    warning, never raised.
    """
    if per_metric_calls:
        raw: list[MetricScore] = []
        for metric in reward_fn.metrics:
            raw.extend(_ask_for_scores(provider, reward_fn, [metric], artifact, re_asks))
    else:
        raw = _ask_for_scores(provider, reward_fn, reward_fn.metrics, artifact, re_asks)
    scores = tuple(_clamp(s) for s in raw)
    overall = aggregate([s.score for s in scores], reward_fn.weights)
    return CandidateEvaluation(artifact_id=artifact.id, per_metric=scores, overall=overall)
