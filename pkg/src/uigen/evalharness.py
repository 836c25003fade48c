"""Pairwise evaluation harness: prompt suite, majority voting, agreement statistics.

Human judging works on instances: one query, two interface variants shown
side by side, one choice of Left / Right / Tie per perception dimension plus
Overall. Three judgments per instance are aggregated by strict majority
voting (a three-way split is a Tie), rolled up into win/tie/loss tables, and
checked for inter-rater agreement with Fleiss' kappa. Submissions pass a
filtering pass (trap questions, comment-consistency flags, low-agreement
flags) before any aggregation. An LLM listwise judge scores all variants of
a query jointly on the same dimensions, and its preferences can be compared
against the human majorities as an agreement rate.
"""

from __future__ import annotations

import json
import logging
import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EngineError
from .pipeline import CONCISE_WORD_LIMIT, UserQuery
from .provider import (
    Budget,
    ExtractionError,
    Message,
    Provider,
    ProviderRequest,
    extract_structured,
    register_schema_parser,
)
from .representation import Issue, ValidationReport
from .reward import round_half_up

logger = logging.getLogger(__name__)


class Dimension(str, Enum):
    QIC = "QIC"
    TASK_EFF = "TaskEff"
    USABILITY = "Usability"
    LEARNABILITY = "Learnability"
    IC = "IC"
    ASA = "ASA"
    IES = "IES"
    OVERALL = "Overall"


PERCEPTION_DIMENSIONS = tuple(d for d in Dimension if d is not Dimension.OVERALL)
ALL_DIMENSIONS = tuple(Dimension)

LEFT, RIGHT, TIE = "Left", "Right", "Tie"
CHOICES = (LEFT, RIGHT, TIE)

DOMAINS = (
    "Web & Mobile App Development",
    "Content Creation & Communication",
    "Academic Research & Writing",
    "Education & Career Development",
    "Advanced AI/ML Applications",
    "Business Strategy & Operations",
    "Language Translation",
    "DevOps & Cloud Infrastructure",
    "Digital Marketing & SEO",
    "Data Analysis & Visualization",
)

DETAILS = ("concise", "detailed")
TYPES = ("general", "interactive")
QUADRANTS = tuple((detail, qtype) for detail in DETAILS for qtype in TYPES)

SUITE_SIZE = 100
PER_DOMAIN = 10
PER_DOMAIN_DETAIL = 5
PER_QUADRANT = 25


class ArityError(EngineError):
    pass


class InstanceMismatchError(EngineError):
    pass


class IncompleteJudgmentError(EngineError):
    def __init__(self, missing: Sequence[str]):
        super().__init__(f"judgment missing dimensions: {list(missing)}")
        self.missing = list(missing)


class EmptySetError(EngineError):
    pass


class ShapeError(EngineError):
    pass


class DegenerateError(EngineError):
    pass


class EmptyOverlapError(EngineError):
    pass


class SuiteConstraintError(EngineError):
    def __init__(self, domain: str, detail: str, qtype: str, message: str):
        super().__init__(f"cell ({domain} / {detail} / {qtype}): {message}")
        self.cell = (domain, detail, qtype)


# ---------------------------------------------------------------------------
# Judgments and aggregation


@dataclass(frozen=True)
class PairwiseJudgment:
    instance_id: str
    query_id: str
    left: str
    right: str
    annotator_id: str
    choices: Mapping[Dimension, str]
    comment: str = ""
    trap_marker: str | None = None  # mandated answer when this instance is a trap

    def __post_init__(self):
        normalized = {Dimension(k): v for k, v in self.choices.items()}
        missing = [d.value for d in ALL_DIMENSIONS if d not in normalized]
        if missing:
            raise IncompleteJudgmentError(missing)
        for dimension, choice in normalized.items():
            if choice not in CHOICES:
                raise ValueError(f"invalid choice {choice!r} for {dimension.value}")
        object.__setattr__(self, "choices", normalized)


@dataclass(frozen=True)
class AggregatedComparison:
    instance_id: str
    left: str
    right: str
    decisions: Mapping[Dimension, str]
    votes: Mapping[Dimension, Mapping[str, int]]


def majority_vote(judgments: Sequence[PairwiseJudgment]) -> AggregatedComparison:
    """Aggregate exactly three judgments for one instance by strict majority.

    A dimension with no strict majority (a three-way split) resolves to Tie.
    """
    if len(judgments) != 3:
        raise ArityError(f"majority voting needs exactly 3 judgments, got {len(judgments)}")
    first = judgments[0]
    for judgment in judgments[1:]:
        if judgment.instance_id != first.instance_id:
            raise InstanceMismatchError(
                f"judgments mix instances {first.instance_id!r} and {judgment.instance_id!r}"
            )
        if (judgment.left, judgment.right) != (first.left, first.right):
            raise InstanceMismatchError(f"judgments disagree on pair labels for {first.instance_id!r}")
    decisions: dict[Dimension, str] = {}
    votes: dict[Dimension, dict[str, int]] = {}
    for dimension in ALL_DIMENSIONS:
        counts = Counter(j.choices[dimension] for j in judgments)
        votes[dimension] = {choice: counts.get(choice, 0) for choice in CHOICES}
        choice, top = counts.most_common(1)[0]
        decisions[dimension] = choice if top >= 2 else TIE
    return AggregatedComparison(
        instance_id=first.instance_id,
        left=first.left,
        right=first.right,
        decisions=decisions,
        votes=votes,
    )


# ---------------------------------------------------------------------------
# Win / tie / loss tables


@dataclass(frozen=True)
class WinTieLossRow:
    dimension: Dimension
    wins: int
    ties: int
    losses: int

    @property
    def total(self) -> int:
        return self.wins + self.ties + self.losses

    @property
    def percentages(self) -> tuple[float, float, float]:
        return (
            100.0 * self.wins / self.total,
            100.0 * self.ties / self.total,
            100.0 * self.losses / self.total,
        )

    @property
    def rounded(self) -> tuple[int, int, int]:
        return tuple(int(round_half_up(p, 0)) for p in self.percentages)  # type: ignore[return-value]


@dataclass(frozen=True)
class WinTieLossTable:
    pair: tuple[str, str]  # (variant whose wins are counted, opponent)
    instances: int
    rows: tuple[WinTieLossRow, ...]

    def row(self, dimension: Dimension) -> WinTieLossRow:
        return next(r for r in self.rows if r.dimension is dimension)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair": list(self.pair),
            "instances": self.instances,
            "rows": [
                {
                    "dimension": r.dimension.value,
                    "wins": r.wins,
                    "ties": r.ties,
                    "losses": r.losses,
                    "percentages": list(r.percentages),
                    "rounded": list(r.rounded),
                }
                for r in self.rows
            ],
        }


def compute_win_tie_loss(
    aggregates: Sequence[AggregatedComparison], pair: tuple[str, str]
) -> WinTieLossTable:
    """Per-dimension win/tie/loss percentages for the first variant of the pair."""
    subject, opponent = pair
    relevant = [a for a in aggregates if {a.left, a.right} == {subject, opponent}]
    if not relevant:
        raise EmptySetError(f"no aggregated instances for pair {pair!r}")
    rows = []
    for dimension in ALL_DIMENSIONS:
        wins = ties = losses = 0
        for aggregate in relevant:
            decision = aggregate.decisions[dimension]
            if decision == TIE:
                ties += 1
            elif (decision == LEFT) == (aggregate.left == subject):
                wins += 1
            else:
                losses += 1
        rows.append(WinTieLossRow(dimension=dimension, wins=wins, ties=ties, losses=losses))
    return WinTieLossTable(pair=pair, instances=len(relevant), rows=tuple(rows))


def render_win_tie_loss(table: WinTieLossTable) -> str:
    """Aligned plain-text table: one column per dimension, integer percentages."""
    subject, opponent = table.pair
    headers = [d.value for d in ALL_DIMENSIONS]
    labels = [subject, "Tie", opponent]
    cells = {
        subject: [str(table.row(d).rounded[0]) + "%" for d in ALL_DIMENSIONS],
        "Tie": [str(table.row(d).rounded[1]) + "%" for d in ALL_DIMENSIONS],
        opponent: [str(table.row(d).rounded[2]) + "%" for d in ALL_DIMENSIONS],
    }
    label_width = max(len(label) for label in ["Status"] + labels)
    widths = [max(len(h), 4) for h in headers]
    lines = [
        f"{subject} vs. {opponent}  (n={table.instances})",
        "  ".join(["Status".ljust(label_width)] + [h.rjust(w) for h, w in zip(headers, widths)]),
    ]
    for label in labels:
        lines.append(
            "  ".join([label.ljust(label_width)] + [c.rjust(w) for c, w in zip(cells[label], widths)])
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Fleiss' kappa


def compute_fleiss_kappa(table: Sequence[Sequence[int]], raters_per_instance: int = 3) -> float:
    """Chance-corrected multi-rater agreement over an instance-by-category count matrix."""
    arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeError("ratings must form a non-empty 2-D matrix")
    if not np.all(arr.sum(axis=1) == raters_per_instance):
        raise ShapeError(f"every instance needs exactly {raters_per_instance} ratings")
    n = float(raters_per_instance)
    category_share = arr.sum(axis=0) / arr.sum()
    per_instance = ((arr * arr).sum(axis=1) - n) / (n * (n - 1.0))
    mean_agreement = per_instance.mean()
    chance_agreement = float((category_share * category_share).sum())
    if abs(1.0 - chance_agreement) < 1e-12:
        raise DegenerateError("all ratings fall in one category; kappa is undefined")
    return float((mean_agreement - chance_agreement) / (1.0 - chance_agreement))


def _instances(judgments: Iterable[PairwiseJudgment]) -> dict[str, list[PairwiseJudgment]]:
    grouped: dict[str, list[PairwiseJudgment]] = defaultdict(list)
    for judgment in judgments:
        grouped[judgment.instance_id].append(judgment)
    return grouped


def ratings_by_dimension(
    judgments: Iterable[PairwiseJudgment], dimension: Dimension
) -> list[list[int]]:
    """Instance-by-category count matrix for one dimension (instances with 3 judgments)."""
    rows = []
    for instance_id, group in sorted(_instances(judgments).items()):
        if len(group) != 3:
            continue
        counts = Counter(j.choices[dimension] for j in group)
        rows.append([counts.get(choice, 0) for choice in CHOICES])
    return rows


def fleiss_kappa_report(judgments: Sequence[PairwiseJudgment]) -> dict[str, float]:
    """Kappa pooled over all dimensions plus one labeled value per dimension."""
    report: dict[str, float] = {}
    pooled: list[list[int]] = []
    for dimension in ALL_DIMENSIONS:
        rows = ratings_by_dimension(judgments, dimension)
        pooled.extend(rows)
        try:
            report[dimension.value] = compute_fleiss_kappa(rows)
        except (ShapeError, DegenerateError):
            report[dimension.value] = float("nan")
    report["pooled"] = compute_fleiss_kappa(pooled)
    return report


# ---------------------------------------------------------------------------
# Annotation filtering


@dataclass(frozen=True)
class AnnotatorSubmission:
    annotator_id: str
    judgments: tuple[PairwiseJudgment, ...]


@dataclass(frozen=True)
class Discard:
    annotator_id: str
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class Flag:
    annotator_id: str
    instance_id: str | None
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class FilterReport:
    kept: tuple[PairwiseJudgment, ...]
    discarded: tuple[Discard, ...]
    flags: tuple[Flag, ...]


PolarityChecker = Callable[[str], str | None]

DEFAULT_AGREEMENT_FLOOR = 0.4


def group_submissions(judgments: Iterable[PairwiseJudgment]) -> tuple[AnnotatorSubmission, ...]:
    grouped: dict[str, list[PairwiseJudgment]] = defaultdict(list)
    for judgment in judgments:
        grouped[judgment.annotator_id].append(judgment)
    return tuple(
        AnnotatorSubmission(annotator_id=annotator, judgments=tuple(items))
        for annotator, items in sorted(grouped.items())
    )


def _is_trap(judgment: PairwiseJudgment, trap_keys: Mapping[str, str]) -> str | None:
    if judgment.instance_id in trap_keys:
        return trap_keys[judgment.instance_id]
    return judgment.trap_marker


def _pairwise_agreement(kept: Sequence[PairwiseJudgment]) -> dict[str, float]:
    by_instance = _instances(kept)
    matches: dict[str, int] = defaultdict(int)
    comparisons: dict[str, int] = defaultdict(int)
    for group in by_instance.values():
        for judgment in group:
            for other in group:
                if other.annotator_id == judgment.annotator_id:
                    continue
                for dimension in ALL_DIMENSIONS:
                    comparisons[judgment.annotator_id] += 1
                    if judgment.choices[dimension] == other.choices[dimension]:
                        matches[judgment.annotator_id] += 1
    return {
        annotator: matches[annotator] / comparisons[annotator]
        for annotator in comparisons
        if comparisons[annotator]
    }


def filter_annotations(
    submissions: Sequence[AnnotatorSubmission],
    trap_keys: Mapping[str, str],
    agreement_floor: float = DEFAULT_AGREEMENT_FLOOR,
    polarity_checker: PolarityChecker | None = None,
) -> FilterReport:
    """Multi-stage submission filtering.

    Any failed trap discards the annotator's entire submission. Comment
    polarity contradicting the Overall choice only flags the judgment (and is
    skipped entirely without a polarity checker), as does pairwise agreement
    with co-raters below the floor. Trap items themselves never reach the
    kept set; they are controls, not data.
    """
    discarded: list[Discard] = []
    flags: list[Flag] = []
    kept: list[PairwiseJudgment] = []
    surviving: list[AnnotatorSubmission] = []
    for submission in submissions:
        failed = None
        for judgment in submission.judgments:
            mandate = _is_trap(judgment, trap_keys)
            if mandate is None:
                continue
            if any(choice != mandate for choice in judgment.choices.values()):
                failed = judgment.instance_id
                break
        if failed is not None:
            discarded.append(
                Discard(
                    annotator_id=submission.annotator_id,
                    reason="trap_fail",
                    detail=f"trap instance {failed}",
                )
            )
        else:
            surviving.append(submission)

    for submission in surviving:
        for judgment in submission.judgments:
            if _is_trap(judgment, trap_keys) is not None:
                continue
            kept.append(judgment)
            if polarity_checker is not None and judgment.comment:
                polarity = polarity_checker(judgment.comment)
                if polarity in (LEFT, RIGHT) and polarity != judgment.choices[Dimension.OVERALL]:
                    flags.append(
                        Flag(
                            annotator_id=judgment.annotator_id,
                            instance_id=judgment.instance_id,
                            reason="consistency_flag",
                            detail=f"comment reads {polarity}, choice was {judgment.choices[Dimension.OVERALL]}",
                        )
                    )

    for annotator, agreement in sorted(_pairwise_agreement(kept).items()):
        if agreement < agreement_floor:
            flags.append(
                Flag(
                    annotator_id=annotator,
                    instance_id=None,
                    reason="low_agreement",
                    detail=f"raw agreement {agreement:.2f} below floor {agreement_floor}",
                )
            )

    return FilterReport(kept=tuple(kept), discarded=tuple(discarded), flags=tuple(flags))


def filter_judgments(
    judgments: Iterable[PairwiseJudgment],
    trap_keys: Mapping[str, str],
    agreement_floor: float = DEFAULT_AGREEMENT_FLOOR,
    polarity_checker: PolarityChecker | None = None,
) -> FilterReport:
    return filter_annotations(
        group_submissions(judgments), trap_keys, agreement_floor, polarity_checker
    )


TRAP_INSTRUCTIONS = {LEFT: "Select Example A for all options", RIGHT: "Select Example B for all options"}

DEFAULT_QUESTIONS_PER_TASK = 8
DEFAULT_TRAPS_PER_TASK = 1


@dataclass(frozen=True)
class TrapInstance:
    instance_id: str
    instruction: str
    mandate: str  # the only acceptable choice, on every dimension


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    instance_ids: tuple[str, ...]  # shuffled; traps indistinguishable by position
    traps: tuple[TrapInstance, ...]


def build_annotation_tasks(
    instance_ids: Sequence[str],
    questions_per_task: int = DEFAULT_QUESTIONS_PER_TASK,
    traps_per_task: int = DEFAULT_TRAPS_PER_TASK,
    seed: int = 0,
) -> tuple[list[AnnotationTask], dict[str, str]]:
    """Bundle instances into fixed-size annotator tasks with traps injected.

    Each task carries `questions_per_task` questions of which `traps_per_task`
    are traps; returns the tasks plus the trap-key map that
    filter_annotations later checks against.
    """
    if traps_per_task >= questions_per_task:
        raise ValueError("a task needs at least one real question")
    rng = random.Random(seed)
    per_task = questions_per_task - traps_per_task
    tasks: list[AnnotationTask] = []
    trap_keys: dict[str, str] = {}
    for task_index, start in enumerate(range(0, len(instance_ids), per_task)):
        group = list(instance_ids[start : start + per_task])
        traps = []
        for trap_index in range(traps_per_task):
            mandate = rng.choice((LEFT, RIGHT))
            trap_id = f"trap-{seed}-{task_index}-{trap_index}"
            traps.append(
                TrapInstance(instance_id=trap_id, instruction=TRAP_INSTRUCTIONS[mandate], mandate=mandate)
            )
            trap_keys[trap_id] = mandate
        ids = group + [trap.instance_id for trap in traps]
        rng.shuffle(ids)
        tasks.append(AnnotationTask(task_id=f"task-{task_index}", instance_ids=tuple(ids), traps=tuple(traps)))
    return tasks, trap_keys


def provider_polarity_checker(provider: Provider) -> PolarityChecker:
    """Polarity check backed by the model: does a comment prefer Left or Right?"""

    def check(comment: str) -> str | None:
        response = provider.complete(
            ProviderRequest(
                purpose="metric_scoring",
                messages=(
                    Message(
                        "system",
                        "Classify which example an annotator comment prefers. "
                        'Respond with JSON only: {"preferred": "Left" | "Right" | "None"}.',
                    ),
                    Message("user", comment),
                ),
                response_contract="structured_document",
                budget=Budget(max_output_units=64),
            )
        )
        try:
            data = json.loads(response.content)
        except json.JSONDecodeError:
            return None
        preferred = data.get("preferred")
        return preferred if preferred in (LEFT, RIGHT) else None

    return check


# ---------------------------------------------------------------------------
# Prompt suite


@dataclass(frozen=True)
class SuiteSeedConfig:
    seed: int = 0
    re_asks_per_cell: int = 3


@dataclass(frozen=True)
class SuiteManifest:
    domain_counts: dict[str, int]
    quadrant_counts: dict[str, int]

    @classmethod
    def from_entries(cls, entries: Sequence[UserQuery]) -> "SuiteManifest":
        domains = Counter(e.domain or "?" for e in entries)
        quadrants = Counter(f"{e.detail_level}/{e.query_type}" for e in entries)
        return cls(domain_counts=dict(domains), quadrant_counts=dict(quadrants))


@dataclass(frozen=True)
class PromptSuite:
    entries: tuple[UserQuery, ...]
    manifest: SuiteManifest

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [
                {
                    "id": e.id,
                    "text": e.text,
                    "domain": e.domain,
                    "detail_level": e.detail_level,
                    "query_type": e.query_type,
                }
                for e in self.entries
            ],
            "manifest": {
                "domain_counts": self.manifest.domain_counts,
                "quadrant_counts": self.manifest.quadrant_counts,
            },
        }


def suite_from_dict(data: Mapping[str, Any]) -> PromptSuite:
    entries = tuple(
        UserQuery(
            id=raw.get("id", f"q{i}"),
            text=raw["text"],
            domain=raw.get("domain"),
            detail_level=raw.get("detail_level", "unknown"),
            query_type=raw.get("query_type", "unknown"),
        )
        for i, raw in enumerate(data["entries"])
    )
    return PromptSuite(entries=entries, manifest=SuiteManifest.from_entries(entries))


def default_cell_plan() -> dict[tuple[str, str, str], int]:
    """Per-(domain, detail, type) target counts.

    10 per domain and 25 per quadrant do not divide evenly into 40 cells, so
    domains alternate between a 3/2/2/3 and a 2/3/3/2 split.
    """
    plan: dict[tuple[str, str, str], int] = {}
    for i, domain in enumerate(DOMAINS):
        first = 3 if i % 2 == 0 else 2
        plan[(domain, "concise", "general")] = first
        plan[(domain, "concise", "interactive")] = 5 - first
        plan[(domain, "detailed", "general")] = 5 - first
        plan[(domain, "detailed", "interactive")] = first
    return plan


def _parse_prompts(text: str) -> list[str]:
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("prompts", data)
    if not isinstance(data, list):
        raise ValueError("expected a list of prompts")
    return [str(item) for item in data]


register_schema_parser("prompts", _parse_prompts)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def _prompt_ok(text: str, detail: str) -> str | None:
    if not text.strip():
        return "empty prompt"
    if detail == "concise" and len(text.split()) >= CONCISE_WORD_LIMIT:
        return f"{len(text.split())} words, concise prompts need fewer than {CONCISE_WORD_LIMIT}"
    return None


def _fill_cell(
    provider: Provider, seed_config: SuiteSeedConfig, domain: str, detail: str, qtype: str, count: int
) -> list[UserQuery]:
    accepted: list[str] = []
    base = (
        Message(
            "system",
            "You write realistic user queries for an assistant benchmark. "
            'Respond with JSON only: {"prompts": ["..."]}.',
        ),
        Message(
            "user",
            "\n".join(
                [
                    f"Domain: {domain}",
                    f"Detail level: {detail}"
                    + (
                        f" (strictly fewer than {CONCISE_WORD_LIMIT} words each)"
                        if detail == "concise"
                        else " (explicit goals and rich context)"
                    ),
                    f"Query type: {qtype}",
                    f"Count: {count}",
                    f"Suite seed: {seed_config.seed}",
                ]
            ),
        ),
    )
    messages = base
    for attempt in range(seed_config.re_asks_per_cell + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="suite_generation",
                messages=messages,
                response_contract="structured_document",
                budget=Budget(max_output_units=2048),
            )
        )
        try:
            prompts = extract_structured(response, "prompts")
        except ExtractionError as exc:
            prompts = []
            rejected = [f"unparseable response: {exc}"]
        else:
            rejected = []
            for prompt in prompts:
                problem = _prompt_ok(prompt, detail)
                if problem is None and len(accepted) < count:
                    accepted.append(prompt)
                elif problem is not None:
                    rejected.append(f"{prompt!r}: {problem}")
        if len(accepted) >= count:
            if attempt:
                logger.info("cell (%s / %s / %s) filled after %d re-asks", domain, detail, qtype, attempt)
            break
        logger.warning(
            "cell (%s / %s / %s) short %d prompts after attempt %d: %s",
            domain,
            detail,
            qtype,
            count - len(accepted),
            attempt + 1,
            "; ".join(rejected) or "too few prompts",
        )
        messages = messages + (
            Message(
                "user",
                f"Need {count - len(accepted)} more prompts. Previous problems: "
                + ("; ".join(rejected) or "too few prompts")
                + ". Respond with JSON only.",
            ),
        )
    else:
        raise SuiteConstraintError(
            domain, detail, qtype, f"only {len(accepted)}/{count} prompts after re-ask budget"
        )
    return [
        UserQuery(
            id=f"{_slug(domain)}-{detail}-{qtype}-{i}",
            text=text,
            domain=domain,
            detail_level=detail,
            query_type=qtype,
        )
        for i, text in enumerate(accepted, 1)
    ]


def generate_prompt_suite(provider: Provider, seed_config: SuiteSeedConfig) -> PromptSuite:
    """Fill every (domain, quadrant) cell of the suite, re-asking per cell until constraints hold.

    Cells are independent, so their provider calls run concurrently; entries
    are assembled in the fixed domain-then-quadrant order regardless.
    """
    from concurrent.futures import ThreadPoolExecutor

    plan = default_cell_plan()
    cells = [(domain, detail, qtype) for domain in DOMAINS for detail, qtype in QUADRANTS]
    with ThreadPoolExecutor(max_workers=8) as pool:
        futures = [
            pool.submit(_fill_cell, provider, seed_config, domain, detail, qtype, plan[(domain, detail, qtype)])
            for domain, detail, qtype in cells
        ]
        entries: list[UserQuery] = []
        for future in futures:
            entries.extend(future.result())
    return PromptSuite(entries=tuple(entries), manifest=SuiteManifest.from_entries(entries))


def validate_suite(suite: PromptSuite) -> ValidationReport:
    """Machine-check every suite invariant from the entries and manifest alone."""
    issues: list[Issue] = []
    entries = suite.entries
    if len(entries) != SUITE_SIZE:
        issues.append(
            Issue("error", "suite-size", "entries", f"suite has {len(entries)} entries, expected {SUITE_SIZE}")
        )
    domain_counts: Counter[str] = Counter()
    detail_counts: Counter[tuple[str, str]] = Counter()
    quadrant_counts: Counter[tuple[str, str]] = Counter()
    for i, entry in enumerate(entries):
        path = f"entries[{i}]"
        if entry.domain not in DOMAINS:
            issues.append(Issue("error", "unknown-domain", path, f"unknown domain {entry.domain!r}"))
            continue
        if entry.detail_level == "unknown" or entry.query_type == "unknown":
            issues.append(Issue("error", "unclassified-entry", path, "entry has no quadrant assignment"))
            continue
        domain_counts[entry.domain] += 1
        detail_counts[(entry.domain, entry.detail_level)] += 1
        quadrant_counts[(entry.detail_level, entry.query_type)] += 1
        if entry.detail_level == "concise" and entry.word_count >= CONCISE_WORD_LIMIT:
            issues.append(
                Issue(
                    "error",
                    "concise-word-limit",
                    path,
                    f"concise entry has {entry.word_count} words, needs fewer than {CONCISE_WORD_LIMIT}",
                )
            )
    for domain in DOMAINS:
        if domain_counts.get(domain, 0) != PER_DOMAIN:
            issues.append(
                Issue(
                    "error",
                    "domain-count",
                    f"domains[{domain}]",
                    f"domain {domain!r} has {domain_counts.get(domain, 0)} entries, expected {PER_DOMAIN}",
                )
            )
        for detail in DETAILS:
            if detail_counts.get((domain, detail), 0) != PER_DOMAIN_DETAIL:
                issues.append(
                    Issue(
                        "error",
                        "detail-split",
                        f"domains[{domain}]",
                        f"domain {domain!r} has {detail_counts.get((domain, detail), 0)} {detail} entries, expected {PER_DOMAIN_DETAIL}",
                    )
                )
    for detail, qtype in QUADRANTS:
        if quadrant_counts.get((detail, qtype), 0) != PER_QUADRANT:
            issues.append(
                Issue(
                    "error",
                    "quadrant-count",
                    f"quadrants[{detail}/{qtype}]",
                    f"quadrant {detail}/{qtype} has {quadrant_counts.get((detail, qtype), 0)} entries, expected {PER_QUADRANT}",
                )
            )
    return ValidationReport(tuple(issues))


# ---------------------------------------------------------------------------
# Listwise LLM judging


@dataclass(frozen=True)
class ListwiseScores:
    query_id: str
    scores: Mapping[str, Mapping[Dimension, float]]  # variant label -> dimension -> 0..100
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "seed": self.seed,
            "scores": {
                label: {dim.value: value for dim, value in by_dim.items()}
                for label, by_dim in self.scores.items()
            },
        }


def _parse_listwise(text: str) -> dict[str, dict[str, float]]:
    data = json.loads(text)
    if isinstance(data, dict) and "scores" in data:
        data = data["scores"]
    out: dict[str, dict[str, float]] = {}
    if isinstance(data, list):
        for raw in data:
            label = str(raw["label"])
            out[label] = {k: float(v) for k, v in raw.items() if k != "label"}
    elif isinstance(data, dict):
        for label, by_dim in data.items():
            out[str(label)] = {k: float(v) for k, v in by_dim.items()}
    else:
        raise ValueError("listwise scores must be a list or object")
    return out


register_schema_parser("listwise_scores", _parse_listwise)


_LISTWISE_PROMPT = """You judge several interface variants answering the same user query.
Score each variant from 0 to 100 on every dimension listed. Judge only what
is in front of you. Respond with JSON only:
{"scores": [{"label": "<variant>", "<dimension>": <0-100>, ...}]}
"""


def llm_rank(
    query: UserQuery,
    variants: Sequence[tuple[str, str]],
    provider: Provider,
    dimensions: Sequence[Dimension] = ALL_DIMENSIONS,
    seed: int = 0,
    re_asks: int = 2,
) -> ListwiseScores:
    """One listwise call scoring all variants together.

    Presentation order is shuffled by the recorded seed so position bias is
    exposed rather than baked in.
    """
    if len(variants) < 2:
        raise ArityError(f"listwise ranking needs at least 2 variants, got {len(variants)}")
    order = list(variants)
    random.Random(seed).shuffle(order)
    blocks = "\n\n".join(f"### Variant {label}\n{content}" for label, content in order)
    base = (
        Message("system", _LISTWISE_PROMPT),
        Message(
            "user",
            "\n".join(
                [
                    f"User query:\n{query.text}",
                    f"Dimensions: {', '.join(d.value for d in dimensions)}",
                    f"Presentation seed: {seed}",
                    "",
                    blocks,
                ]
            ),
        ),
    )
    messages = base
    wanted_labels = [label for label, _ in variants]
    last: Exception | None = None
    for attempt in range(re_asks + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="listwise_ranking",
                messages=messages,
                response_contract="structured_document",
                budget=Budget(max_output_units=2048),
            )
        )
        try:
            raw = extract_structured(response, "listwise_scores")
            missing = [label for label in wanted_labels if label not in raw]
            if missing:
                raise ExtractionError(f"missing variants {missing}", excerpt=response.content)
            scores: dict[str, dict[Dimension, float]] = {}
            for label in wanted_labels:
                by_dim: dict[Dimension, float] = {}
                for dimension in dimensions:
                    if dimension.value not in raw[label]:
                        raise ExtractionError(
                            f"variant {label!r} missing dimension {dimension.value}", excerpt=response.content
                        )
                    by_dim[dimension] = min(100.0, max(0.0, raw[label][dimension.value]))
                scores[label] = by_dim
            return ListwiseScores(query_id=query.id, scores=scores, seed=seed)
        except ExtractionError as exc:
            last = exc
            messages = messages + (
                Message("user", f"The previous answer was unusable ({exc}). Respond with JSON only."),
            )
    assert last is not None
    raise last


def compute_agreement_rate(
    llm_scores: Iterable[ListwiseScores], human_aggregates: Sequence[AggregatedComparison]
) -> float:
    """Share of instances where the LLM's Overall preference matches the human majority.

    The LLM prefers the higher-scored variant; equal scores count as Tie.
    """
    by_instance = {scores.query_id: scores for scores in llm_scores}
    matches = 0
    total = 0
    for aggregate in human_aggregates:
        scores = by_instance.get(aggregate.instance_id)
        if scores is None:
            continue
        if aggregate.left not in scores.scores or aggregate.right not in scores.scores:
            continue
        total += 1
        left = scores.scores[aggregate.left][Dimension.OVERALL]
        right = scores.scores[aggregate.right][Dimension.OVERALL]
        preference = LEFT if left > right else RIGHT if right > left else TIE
        if preference == aggregate.decisions[Dimension.OVERALL]:
            matches += 1
    if total == 0:
        raise EmptyOverlapError("no instances shared between LLM scores and human aggregates")
    return 100.0 * matches / total


# ---------------------------------------------------------------------------
# Import / export


def judgment_to_dict(judgment: PairwiseJudgment) -> dict[str, Any]:
    return {
        "instance_id": judgment.instance_id,
        "query_id": judgment.query_id,
        "left": judgment.left,
        "right": judgment.right,
        "annotator_id": judgment.annotator_id,
        "choices": {d.value: c for d, c in judgment.choices.items()},
        "comment": judgment.comment,
        "trap_marker": judgment.trap_marker,
    }


def judgment_from_dict(data: Mapping[str, Any]) -> PairwiseJudgment:
    return PairwiseJudgment(
        instance_id=data["instance_id"],
        query_id=data.get("query_id", ""),
        left=data["left"],
        right=data["right"],
        annotator_id=data["annotator_id"],
        choices={Dimension(k): v for k, v in data.get("choices", {}).items()},
        comment=data.get("comment", ""),
        trap_marker=data.get("trap_marker"),
    )


def write_judgments(path: str | Path, judgments: Iterable[PairwiseJudgment]) -> None:
    lines = [json.dumps(judgment_to_dict(j), ensure_ascii=False) for j in judgments]
    Path(path).write_text("\n".join(lines) + "\n")


def read_judgments(path: str | Path) -> list[PairwiseJudgment]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            out.append(judgment_from_dict(json.loads(line)))
    return out


def aggregate_instances(judgments: Iterable[PairwiseJudgment]) -> list[AggregatedComparison]:
    """Majority-vote every instance that has exactly three judgments."""
    aggregates = []
    for instance_id, group in sorted(_instances(judgments).items()):
        if len(group) == 3:
            aggregates.append(majority_vote(group))
        else:
            logger.warning("instance %s has %d judgments, need 3; skipped", instance_id, len(group))
    return aggregates
