"""Query-to-interface generation pipeline.

Three model-backed stages: a requirement specification is distilled from the
user query, expanded into a structured interface representation (validated,
with regeneration on failure), and finally synthesized into one
self-contained web document. Generation context is enriched by a small
library of reusable component snippets and an optional retrieval hook; both
are best-effort aids, never hard dependencies.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

from .errors import EngineError
from .provider import (
    Budget,
    ExtractionError,
    Message,
    Provider,
    ProviderRequest,
    extract_structured,
    register_schema_parser,
    strip_fences,
)
from .representation import (
    StructuredRepresentation,
    ValidationReport,
    parse_representation,
    serialize_representation,
    validate_representation,
)

logger = logging.getLogger(__name__)

DETAIL_LEVELS = ("concise", "detailed", "unknown")
QUERY_TYPES = ("general", "interactive", "unknown")

CONCISE_WORD_LIMIT = 15  # concise queries have strictly fewer words than this


class PipelineError(EngineError):
    """Base class for generation-stage failures."""


class SpecInvalidError(PipelineError):
    pass


class RepresentationInvalidError(PipelineError):
    def __init__(self, message: str, report: ValidationReport):
        super().__init__(message)
        self.report = report


class SelfContainmentError(PipelineError):
    def __init__(self, references: list[str]):
        super().__init__(f"document references external scripts: {references}")
        self.references = references


class RetrievalError(PipelineError):
    pass


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class UserQuery:
    id: str
    text: str
    domain: str | None = None
    detail_level: str = "unknown"
    query_type: str = "unknown"

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text must be non-empty")
        if self.detail_level not in DETAIL_LEVELS:
            raise ValueError(f"unknown detail level {self.detail_level!r}")
        if self.query_type not in QUERY_TYPES:
            raise ValueError(f"unknown query type {self.query_type!r}")

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class RequirementSpecification:
    main_goal: str
    key_features: tuple[str, ...] = ()
    ui_components: tuple[str, ...] = ()
    interaction_styles: tuple[str, ...] = ()
    problem_solving_strategies: tuple[str, ...] = ()
    technical_requirements: tuple[str, ...] = ()

    def problems(self) -> list[str]:
        out = []
        if not self.main_goal.strip():
            out.append("mainGoal is empty")
        if not self.key_features:
            out.append("keyFeatures is empty")
        return out

    def to_prompt_block(self) -> str:
        def block(label: str, items: Sequence[str]) -> str:
            if not items:
                return f"{label}: (none)"
            return f"{label}:\n" + "\n".join(f"- {item}" for item in items)

        return "\n".join(
            [
                f"Main goal: {self.main_goal}",
                block("Key features", self.key_features),
                block("UI components", self.ui_components),
                block("Interaction styles", self.interaction_styles),
                block("Problem-solving strategies", self.problem_solving_strategies),
                block("Technical requirements", self.technical_requirements),
            ]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "mainGoal": self.main_goal,
            "keyFeatures": list(self.key_features),
            "uiComponents": list(self.ui_components),
            "interactionStyles": list(self.interaction_styles),
            "problemSolvingStrategies": list(self.problem_solving_strategies),
            "technicalRequirements": list(self.technical_requirements),
        }


@dataclass(frozen=True)
class NaturalDescription:
    """Prose stand-in for the structured representation (ablation arm)."""

    text: str


@dataclass(frozen=True)
class ComponentSnippet:
    name: str
    markup_template: str
    script_template: str
    usage_notes: str = ""


@dataclass(frozen=True)
class RetrievedExample:
    source_url: str
    excerpt: str
    relevance_note: str = ""


@dataclass(frozen=True)
class Provenance:
    session_id: str = ""
    iteration: int = 1
    candidate: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {"session_id": self.session_id, "iteration": self.iteration, "candidate": self.candidate}


@dataclass(frozen=True)
class InterfaceArtifact:
    id: str
    document: str
    representation_id: str = ""
    provenance: Provenance = field(default_factory=Provenance)
    created_at: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "document": self.document,
            "representation_id": self.representation_id,
            "provenance": self.provenance.to_dict(),
            "created_at": self.created_at,
        }


def parse_requirement_spec(text: str) -> RequirementSpecification:
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("requirement specification must be an object")

    def str_list(key: str, alias: str) -> tuple[str, ...]:
        raw = data.get(key, data.get(alias, []))
        if not isinstance(raw, list):
            raise ValueError(f"{key} must be a list")
        return tuple(str(item) for item in raw)

    main_goal = data.get("mainGoal", data.get("main_goal", ""))
    if not isinstance(main_goal, str):
        raise ValueError("mainGoal must be a string")
    return RequirementSpecification(
        main_goal=main_goal,
        key_features=str_list("keyFeatures", "key_features"),
        ui_components=str_list("uiComponents", "ui_components"),
        interaction_styles=str_list("interactionStyles", "interaction_styles"),
        problem_solving_strategies=str_list("problemSolvingStrategies", "problem_solving_strategies"),
        technical_requirements=str_list("technicalRequirements", "technical_requirements"),
    )


register_schema_parser("requirement_spec", parse_requirement_spec)
register_schema_parser("representation", parse_representation)


# ---------------------------------------------------------------------------
# Templates and component library

_TEMPLATE_NAMES = ("requirement_spec", "representation", "natural_description", "ui_generation")


def render_template(template: str, **values: str) -> str:
    for name, value in values.items():
        template = template.replace("{{" + name + "}}", value)
    return template


@dataclass(frozen=True)
class TemplateSet:
    templates: dict[str, str]

    def __getitem__(self, name: str) -> str:
        return self.templates[name]

    @classmethod
    def load_default(cls) -> "TemplateSet":
        package = resources.files(__package__) / "templates"
        return cls({name: (package / f"{name}.txt").read_text() for name in _TEMPLATE_NAMES})

    @classmethod
    def load_dir(cls, directory: str | Path) -> "TemplateSet":
        directory = Path(directory)
        return cls({name: (directory / f"{name}.txt").read_text() for name in _TEMPLATE_NAMES})


_LIBRARY_ORDER = ("clock", "map", "calculator", "video_player", "code_viewer", "chart")


def _library_sort_key(name: str) -> tuple[int, str]:
    try:
        return (_LIBRARY_ORDER.index(name), name)
    except ValueError:
        return (len(_LIBRARY_ORDER), name)


def load_component_library(directory: str | Path | None = None) -> tuple[ComponentSnippet, ...]:
    """Load snippets from a directory of JSON files, one snippet per file.

    Library order is the canonical snippet order (clock, map, calculator,
    video_player, code_viewer, chart), then alphabetical for custom snippets.
    """
    if directory is None:
        root = resources.files(__package__) / "components"
        files = sorted(root.iterdir(), key=lambda f: f.name)
    else:
        files = sorted(Path(directory).glob("*.json"))
    snippets: list[ComponentSnippet] = []
    seen: set[str] = set()
    for file in files:
        if not file.name.endswith(".json"):
            continue
        data = json.loads(file.read_text())
        snippet = ComponentSnippet(
            name=data["name"],
            markup_template=data["markup_template"],
            script_template=data["script_template"],
            usage_notes=data.get("usage_notes", ""),
        )
        if snippet.name in seen:
            raise ValueError(f"duplicate component snippet name {snippet.name!r}")
        if not snippet.markup_template or not snippet.script_template:
            raise ValueError(f"component snippet {snippet.name!r} has an empty template")
        seen.add(snippet.name)
        snippets.append(snippet)
    snippets.sort(key=lambda s: _library_sort_key(s.name))
    return tuple(snippets)


# ---------------------------------------------------------------------------
# Stages

def generate_requirement_spec(
    query: UserQuery, provider: Provider, templates: TemplateSet | None = None, re_asks: int = 2
) -> RequirementSpecification:
    """Distill the query into a requirement specification, re-asking on unusable output."""
    templates = templates or TemplateSet.load_default()
    base = (
        Message("system", "You turn user queries into requirement specifications for web interfaces."),
        Message("user", render_template(templates["requirement_spec"], query=query.text)),
    )
    messages = base
    last: Exception | None = None
    for attempt in range(re_asks + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="requirement_spec",
                messages=messages,
                response_contract="structured_document",
                budget=Budget(max_output_units=2048),
            )
        )
        try:
            spec = extract_structured(response, "requirement_spec")
            problems = spec.problems()
            if problems:
                raise SpecInvalidError("; ".join(problems))
            return spec
        except (ExtractionError, SpecInvalidError) as exc:
            last = exc
            logger.warning("requirement spec attempt %d unusable: %s", attempt + 1, exc)
            messages = messages + (
                Message("user", f"The previous answer was unusable ({exc}). Emit only the corrected JSON."),
            )
    assert last is not None
    raise last


def generate_representation(
    spec: RequirementSpecification,
    query: UserQuery,
    provider: Provider,
    mode: str = "structured",
    templates: TemplateSet | None = None,
    re_asks: int = 2,
) -> StructuredRepresentation | NaturalDescription:
    """Expand the specification into a validated representation (or prose, in the ablation arm)."""
    templates = templates or TemplateSet.load_default()
    if mode == "natural_language":
        response = provider.complete(
            ProviderRequest(
                purpose="representation",
                messages=(
                    Message("system", "You describe web interfaces in precise prose."),
                    Message(
                        "user",
                        render_template(
                            templates["natural_description"], query=query.text, spec=spec.to_prompt_block()
                        ),
                    ),
                ),
                response_contract="free_text",
            )
        )
        return NaturalDescription(text=response.content.strip())
    if mode != "structured":
        raise ValueError(f"unknown representation mode {mode!r}")

    base = (
        Message("system", "You design structured interface representations as JSON documents."),
        Message(
            "user",
            render_template(templates["representation"], query=query.text, spec=spec.to_prompt_block()),
        ),
    )
    messages = base
    last_report: ValidationReport | None = None
    last_error: Exception | None = None
    for attempt in range(re_asks + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="representation",
                messages=messages,
                response_contract="structured_document",
                budget=Budget(max_output_units=8192),
            )
        )
        try:
            rep = extract_structured(response, "representation")
        except ExtractionError as exc:
            last_error = exc
            logger.warning("representation attempt %d failed to parse: %s", attempt + 1, exc)
            messages = messages + (
                Message("user", f"The previous document failed to parse ({exc}). Emit only corrected JSON."),
            )
            continue
        report = validate_representation(rep)
        if report.ok:
            if attempt:
                logger.info("representation accepted on attempt %d", attempt + 1)
            return rep
        last_report = report
        last_error = None
        issue_lines = "\n".join(f"- {i.code} at {i.path}: {i.message}" for i in report.errors)
        logger.warning("representation attempt %d invalid:\n%s", attempt + 1, issue_lines)
        messages = messages + (
            Message(
                "user",
                "The previous document failed validation with these issues:\n"
                f"{issue_lines}\nEmit the full corrected JSON document.",
            ),
        )
    if last_report is not None:
        raise RepresentationInvalidError("representation failed validation after retries", last_report)
    assert last_error is not None
    raise last_error


def lookup_components(
    representation: StructuredRepresentation | NaturalDescription,
    library: Sequence[ComponentSnippet],
) -> list[ComponentSnippet]:
    """Snippets whose names occur in element types or functionality text; library order, deduplicated."""
    if isinstance(representation, NaturalDescription):
        corpus = representation.text.lower()
    else:
        corpus = " ".join(
            f"{element.element_type} {element.functionality}" for element in representation.elements
        ).lower()
    matched = []
    for snippet in library:
        spellings = {snippet.name.lower(), snippet.name.lower().replace("_", " ")}
        if any(spelling in corpus for spelling in spellings):
            matched.append(snippet)
    return matched


Retriever = Callable[[str], Sequence[RetrievedExample]]


class StubRetriever:
    """Default no-op retrieval hook."""

    def __call__(self, query_text: str) -> list[RetrievedExample]:
        return []


RETRIEVAL_CAP = 5


def retrieve_examples(query: UserQuery, retriever: Retriever | None = None) -> list[RetrievedExample]:
    """Best-effort retrieval: failures degrade to an empty list with a warning."""
    if retriever is None:
        retriever = StubRetriever()
    try:
        results = list(retriever(query.text))
    except Exception as exc:
        logger.warning("retrieval failed, continuing without examples: %s", exc)
        return []
    return results[:RETRIEVAL_CAP]


_EXTERNAL_SCRIPT_RE = re.compile(
    r"<script[^>]*\bsrc\s*=\s*[\"'](?P<ref>(?:https?:)?//[^\"']+)[\"']", re.IGNORECASE
)


def find_external_scripts(document: str) -> list[str]:
    return [m.group("ref") for m in _EXTERNAL_SCRIPT_RE.finditer(document)]


@dataclass(frozen=True)
class RefinementFeedback:
    """Previous best document plus its evaluation, fed back into generation."""

    document: str
    evaluation: Any  # reward.CandidateEvaluation; kept loose to avoid an import cycle

    def to_prompt_block(self) -> str:
        lines = [
            "Previous best candidate (improve on it; do not regress what already works):",
            self.document,
            "",
            "Evaluation feedback for that candidate:",
        ]
        for score in self.evaluation.per_metric:
            lines.append(f"- {score.name} ({score.score:g}/100): {score.feedback}")
        lines.append(f"Overall score: {self.evaluation.overall:g}/100")
        return "\n".join(lines)


def _components_block(components: Sequence[ComponentSnippet]) -> str:
    if not components:
        return "(none)"
    parts = []
    for snippet in components:
        parts.append(
            f"### {snippet.name}\n{snippet.usage_notes}\n{snippet.markup_template}\n{snippet.script_template}"
        )
    return "\n\n".join(parts)


def _examples_block(examples: Sequence[RetrievedExample]) -> str:
    if not examples:
        return "(none)"
    return "\n".join(f"- {e.source_url}: {e.excerpt}" for e in examples)


def _artifact_id(provenance: Provenance, document: str) -> str:
    if provenance.session_id:
        return f"{provenance.session_id}-i{provenance.iteration}c{provenance.candidate}"
    digest = hashlib.sha1(document.encode("utf-8")).hexdigest()[:10]
    return f"art-{digest}"


def generate_ui(
    query: UserQuery,
    spec: RequirementSpecification,
    representation: StructuredRepresentation | NaturalDescription,
    components: Sequence[ComponentSnippet],
    examples: Sequence[RetrievedExample],
    provider: Provider,
    templates: TemplateSet | None = None,
    feedback: RefinementFeedback | None = None,
    provenance: Provenance = Provenance(),
    created_at: str | None = None,
    variation_seed: int | str | None = None,
    re_asks: int = 2,
) -> InterfaceArtifact:
    """Synthesize one self-contained web document from the assembled context.

    The context order is fixed: query, specification, representation,
    component snippets, retrieved examples; refinement feedback and the
    candidate variation seed are appended after.
    """
    templates = templates or TemplateSet.load_default()
    if isinstance(representation, NaturalDescription):
        representation_block = representation.text
        representation_id = ""
    else:
        representation_block = serialize_representation(representation)
        representation_id = representation.metadata.title
    user = render_template(
        templates["ui_generation"],
        query=query.text,
        spec=spec.to_prompt_block(),
        representation=representation_block,
        components=_components_block(components),
        examples=_examples_block(examples),
        feedback=feedback.to_prompt_block() if feedback else "",
        variation=f"Candidate variation seed: {variation_seed}" if variation_seed is not None else "",
    )
    base = (
        Message("system", "You write complete, self-contained web documents: markup, styles, and scripts inline."),
        Message("user", user),
    )
    messages = base
    last: Exception | None = None
    for attempt in range(re_asks + 1):
        response = provider.complete(
            ProviderRequest(
                purpose="ui_code",
                messages=messages,
                response_contract="free_text",
                budget=Budget(max_output_units=16384),
            )
        )
        document = strip_fences(response.content)
        if document.strip():
            external = find_external_scripts(document)
            if external:
                raise SelfContainmentError(external)
            return InterfaceArtifact(
                id=_artifact_id(provenance, document),
                document=document,
                representation_id=representation_id,
                provenance=provenance,
                created_at=created_at or datetime.now(timezone.utc).isoformat(),
            )
        last = ExtractionError("empty interface document", excerpt=response.content)
        messages = messages + (
            Message("user", "The previous answer was empty. Emit the full HTML document."),
        )
    assert last is not None
    raise last


@dataclass
class GenerationPipeline:
    """Bundle of the non-provider generation dependencies."""

    library: tuple[ComponentSnippet, ...] = field(default_factory=load_component_library)
    retriever: Retriever = field(default_factory=StubRetriever)
    templates: TemplateSet = field(default_factory=TemplateSet.load_default)

    def generate_requirement_spec(self, query, provider):
        return generate_requirement_spec(query, provider, self.templates)

    def generate_representation(self, spec, query, provider, mode="structured"):
        return generate_representation(spec, query, provider, mode, self.templates)

    def lookup_components(self, representation):
        return lookup_components(representation, self.library)

    def retrieve_examples(self, query):
        return retrieve_examples(query, self.retriever)

    def generate_ui(self, query, spec, representation, components, examples, provider, **kwargs):
        return generate_ui(
            query, spec, representation, components, examples, provider, self.templates, **kwargs
        )
