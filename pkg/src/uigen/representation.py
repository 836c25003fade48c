"""Structured interface representation: wire format, validation, state machines, flow graphs.

An interface is captured at two levels. Low-level behavior lives in named
state variables plus per-element event bindings whose effects update those
variables; this compiles into a deterministic finite state machine that can
be simulated offline. High-level behavior lives in interaction flows (ordered
user subgoals), which compile into a directed flow graph rooted at a synthetic
initial view, on which reachability can be checked.

The wire format is a JSON document with camelCase field names
(``initialValue``, ``parentId``, ``className``, ...). snake_case aliases are
accepted on input; serialization always emits the canonical camelCase form
with a deterministic key order, so ``parse(serialize(rep)) == rep`` for any
representation that validates cleanly. Unknown fields survive the round trip
in per-object ``extras`` maps.
"""

from __future__ import annotations

import json
import logging
import re
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

logger = logging.getLogger(__name__)

KNOWN_EVENT_TYPES = frozenset({"onClick", "onHover", "onInput", "onSubmit", "onChange"})
KNOWN_EFFECT_ACTIONS = frozenset({"updateState", "openView", "invokeComponent"})

_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

INITIAL_NODE_ID = "start"


class DocumentSyntaxError(ValueError):
    """The wire document is not syntactically well-formed JSON."""


class SchemaError(ValueError):
    """A required field is missing or has the wrong kind; carries the offending path."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NondeterminismError(ValueError):
    """Two event bindings share the same (element, event type) pair."""


class UnknownEventError(ValueError):
    """A simulated event is not part of the machine's event set."""


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True)
class Effect:
    """One consequence of an event: update a state variable, open a view, ..."""

    target: str
    action: str = "updateState"
    details: str = ""
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class EventBinding:
    event_type: str
    handler_description: str = ""
    affects: tuple[Effect, ...] = ()
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class StateVariable:
    """A named atomic piece of interface state with its initial text literal."""

    name: str
    initial_value: str
    description: str = ""
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class UIElement:
    id: str
    parent_id: str | None = None
    element_type: str = ""
    content: str = ""
    class_names: tuple[str, ...] = ()
    functionality: str = ""
    attributes: dict[str, str] = field(default_factory=dict)
    events: tuple[EventBinding, ...] = ()
    # pseudo-state (hover, focus, ...) -> class names applied in that state
    interactions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Metadata:
    title: str = ""
    meta_description: str = ""
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class InteractionFlow:
    """An ordered sequence of user subgoals, described in free text."""

    name: str
    description: str = ""
    steps: tuple[str, ...] = ()
    resolved_nodes: tuple[str, ...] | None = None
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class StructuredRepresentation:
    description: str = ""
    metadata: Metadata = field(default_factory=Metadata)
    states: tuple[StateVariable, ...] = ()
    elements: tuple[UIElement, ...] = ()
    flows: tuple[InteractionFlow, ...] = ()
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def errors(self) -> tuple[Issue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[Issue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "issues": [
                {"severity": i.severity, "code": i.code, "path": i.path, "message": i.message}
                for i in self.issues
            ],
        }


# An FSM event is the (element id, event type) pair that triggers it.
Event = tuple[str, str]


@dataclass(frozen=True)
class Transition:
    on: Event
    writes: tuple[tuple[str, str], ...] = ()  # (variable name, new value text)


@dataclass(frozen=True)
class FiniteStateMachine:
    variables: tuple[StateVariable, ...]
    events: tuple[Event, ...]
    transitions: tuple[Transition, ...]

    @property
    def initial_state(self) -> dict[str, str]:
        return {v.name: v.initial_value for v in self.variables}


@dataclass(frozen=True)
class SimulationResult:
    final_state: dict[str, str]
    trace: tuple[tuple[Event, dict[str, str]], ...]


@dataclass(frozen=True)
class FlowNode:
    id: str
    label: str
    kind: str  # "view" | "subgoal"


@dataclass(frozen=True)
class FlowEdge:
    source: str
    target: str
    # Either a (element id, event type) pair or a free-text label.
    trigger: Event | str | None = None


@dataclass(frozen=True)
class FlowGraph:
    nodes: tuple[FlowNode, ...]
    edges: tuple[FlowEdge, ...]
    initial_node: str


# ---------------------------------------------------------------------------
# Parsing

def _expect_obj(value: Any, path: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise SchemaError(f"expected an object, got {type(value).__name__}", path)
    return value


def _expect_list(value: Any, path: str) -> list[Any]:
    if not isinstance(value, list):
        raise SchemaError(f"expected an array, got {type(value).__name__}", path)
    return value


def _pop(work: dict[str, Any], canonical: str, *aliases: str) -> tuple[bool, Any]:
    for key in (canonical, *aliases):
        if key in work:
            return True, work.pop(key)
    return False, None


def _scalar_text(value: Any, path: str) -> str:
    """Render a scalar wire value as text ("false", "0", "null", ...)."""
    if isinstance(value, str):
        return value
    if value is None or isinstance(value, (bool, int, float)):
        return json.dumps(value)
    raise SchemaError(f"expected a scalar, got {type(value).__name__}", path)


def _str_field(
    work: dict[str, Any],
    canonical: str,
    path: str,
    *aliases: str,
    required: bool = False,
    default: str = "",
) -> str:
    found, value = _pop(work, canonical, *aliases)
    if not found:
        if required:
            raise SchemaError("missing required field", f"{path}.{canonical}")
        return default
    if not isinstance(value, str):
        raise SchemaError(f"expected a string, got {type(value).__name__}", f"{path}.{canonical}")
    return value


def _str_list(value: Any, path: str) -> tuple[str, ...]:
    items = _expect_list(value, path)
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, str):
            raise SchemaError(f"expected a string, got {type(item).__name__}", f"{path}[{i}]")
        out.append(item)
    return tuple(out)


def _parse_effect(value: Any, path: str) -> Effect:
    work = dict(_expect_obj(value, path))
    target = _str_field(work, "target", path, required=True)
    action = _str_field(work, "action", path, default="updateState")
    found, details = _pop(work, "details")
    details_text = _scalar_text(details, f"{path}.details") if found else ""
    return Effect(target=target, action=action, details=details_text, extras=work)


def _parse_event_binding(value: Any, path: str) -> EventBinding:
    work = dict(_expect_obj(value, path))
    event_type = _str_field(work, "type", path, "event_type", "eventType", required=True)
    handler = _str_field(work, "handlerDescription", path, "handler_description")
    found, affects_raw = _pop(work, "affects")
    affects: tuple[Effect, ...] = ()
    if found:
        affects = tuple(
            _parse_effect(item, f"{path}.affects[{i}]")
            for i, item in enumerate(_expect_list(affects_raw, f"{path}.affects"))
        )
    return EventBinding(
        event_type=event_type, handler_description=handler, affects=affects, extras=work
    )


def _parse_interactions(value: Any, path: str) -> dict[str, tuple[str, ...]]:
    obj = _expect_obj(value, path)
    out: dict[str, tuple[str, ...]] = {}
    for pseudo, spec in obj.items():
        if isinstance(spec, dict):
            class_names = spec.get("className", spec.get("class_names", []))
            out[pseudo] = _str_list(class_names, f"{path}.{pseudo}.className")
        else:
            out[pseudo] = _str_list(spec, f"{path}.{pseudo}")
    return out


def _parse_element(value: Any, path: str) -> UIElement:
    work = dict(_expect_obj(value, path))
    element_id = _str_field(work, "id", path, required=True)
    found, parent = _pop(work, "parentId", "parent_id")
    if found and parent is not None and not isinstance(parent, str):
        raise SchemaError(f"expected a string, got {type(parent).__name__}", f"{path}.parentId")
    element_type = _str_field(work, "elementType", path, "element_type")
    content = _str_field(work, "content", path)
    found, classes_raw = _pop(work, "className", "class_names", "classNames")
    class_names = _str_list(classes_raw, f"{path}.className") if found else ()
    functionality = _str_field(work, "functionality", path)

    found, attrs_raw = _pop(work, "attributes")
    attributes: dict[str, str] = {}
    if found:
        for key, raw in _expect_obj(attrs_raw, f"{path}.attributes").items():
            attributes[key] = _scalar_text(raw, f"{path}.attributes.{key}")

    found, events_raw = _pop(work, "events")
    events: tuple[EventBinding, ...] = ()
    if found:
        events = tuple(
            _parse_event_binding(item, f"{path}.events[{i}]")
            for i, item in enumerate(_expect_list(events_raw, f"{path}.events"))
        )

    found, inter_raw = _pop(work, "interactions")
    interactions = _parse_interactions(inter_raw, f"{path}.interactions") if found else {}

    return UIElement(
        id=element_id,
        parent_id=parent,
        element_type=element_type,
        content=content,
        class_names=class_names,
        functionality=functionality,
        attributes=attributes,
        events=events,
        interactions=interactions,
        extras=work,
    )


def _parse_state(value: Any, path: str) -> StateVariable:
    work = dict(_expect_obj(value, path))
    name = _str_field(work, "name", path, required=True)
    found, initial = _pop(work, "initialValue", "initial_value")
    if not found:
        raise SchemaError("missing required field", f"{path}.initialValue")
    description = _str_field(work, "description", path)
    return StateVariable(
        name=name,
        initial_value=_scalar_text(initial, f"{path}.initialValue"),
        description=description,
        extras=work,
    )


def _parse_flow(value: Any, path: str) -> InteractionFlow:
    work = dict(_expect_obj(value, path))
    name = _str_field(work, "name", path, required=True)
    description = _str_field(work, "description", path)
    found, steps_raw = _pop(work, "steps")
    if not found:
        raise SchemaError("missing required field", f"{path}.steps")
    steps = _str_list(steps_raw, f"{path}.steps")
    found, resolved_raw = _pop(work, "resolvedNodes", "resolved_nodes")
    resolved = _str_list(resolved_raw, f"{path}.resolvedNodes") if found and resolved_raw is not None else None
    return InteractionFlow(
        name=name, description=description, steps=steps, resolved_nodes=resolved, extras=work
    )


def _parse_metadata(value: Any, path: str) -> Metadata:
    work = dict(_expect_obj(value, path))
    title = _str_field(work, "title", path)
    meta_description = _str_field(work, "metaDescription", path, "meta_description")
    return Metadata(title=title, meta_description=meta_description, extras=work)


def representation_from_obj(data: Any) -> StructuredRepresentation:
    """Build a representation from an already-decoded JSON tree."""
    work = dict(_expect_obj(data, "$"))
    if "description" not in work:
        raise SchemaError("missing required field", "description")
    description = _str_field(work, "description", "$")
    found, meta_raw = _pop(work, "metadata")
    if not found:
        raise SchemaError("missing required field", "metadata")
    metadata = _parse_metadata(meta_raw, "metadata")
    parsed: dict[str, tuple] = {}
    for key, parser in (("states", _parse_state), ("elements", _parse_element), ("flows", _parse_flow)):
        found, raw = _pop(work, key)
        if not found:
            raise SchemaError("missing required field", key)
        parsed[key] = tuple(
            parser(item, f"{key}[{i}]") for i, item in enumerate(_expect_list(raw, key))
        )
    return StructuredRepresentation(
        description=description,
        metadata=metadata,
        states=parsed["states"],
        elements=parsed["elements"],
        flows=parsed["flows"],
        extras=work,
    )


def parse_representation(doc: str) -> StructuredRepresentation:
    """Parse a canonical wire document into a representation.

    Raises DocumentSyntaxError for malformed JSON and SchemaError (with a
    path) for missing required fields or wrong field kinds.
    """
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(f"malformed document: {exc}") from None
    return representation_from_obj(data)


# ---------------------------------------------------------------------------
# Serialization

def _with_extras(obj: dict[str, Any], extras: dict[str, Any]) -> dict[str, Any]:
    for key in sorted(extras):
        if key not in obj:
            obj[key] = extras[key]
    return obj


def _effect_to_obj(effect: Effect) -> dict[str, Any]:
    return _with_extras(
        {"target": effect.target, "action": effect.action, "details": effect.details},
        effect.extras,
    )


def _binding_to_obj(binding: EventBinding) -> dict[str, Any]:
    return _with_extras(
        {
            "type": binding.event_type,
            "handlerDescription": binding.handler_description,
            "affects": [_effect_to_obj(e) for e in binding.affects],
        },
        binding.extras,
    )


def _element_to_obj(element: UIElement) -> dict[str, Any]:
    obj: dict[str, Any] = {"id": element.id}
    if element.parent_id is not None:
        obj["parentId"] = element.parent_id
    obj["elementType"] = element.element_type
    obj["content"] = element.content
    obj["className"] = list(element.class_names)
    obj["functionality"] = element.functionality
    obj["attributes"] = dict(element.attributes)
    obj["events"] = [_binding_to_obj(b) for b in element.events]
    obj["interactions"] = {
        pseudo: {"className": list(names)} for pseudo, names in element.interactions.items()
    }
    return _with_extras(obj, element.extras)


def _state_to_obj(state: StateVariable) -> dict[str, Any]:
    return _with_extras(
        {"name": state.name, "initialValue": state.initial_value, "description": state.description},
        state.extras,
    )


def _flow_to_obj(flow: InteractionFlow) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "name": flow.name,
        "description": flow.description,
        "steps": list(flow.steps),
    }
    if flow.resolved_nodes is not None:
        obj["resolvedNodes"] = list(flow.resolved_nodes)
    return _with_extras(obj, flow.extras)


def representation_to_obj(rep: StructuredRepresentation) -> dict[str, Any]:
    metadata = _with_extras(
        {"title": rep.metadata.title, "metaDescription": rep.metadata.meta_description},
        rep.metadata.extras,
    )
    obj: dict[str, Any] = {
        "description": rep.description,
        "metadata": metadata,
        "states": [_state_to_obj(s) for s in rep.states],
        "elements": [_element_to_obj(e) for e in rep.elements],
        "flows": [_flow_to_obj(f) for f in rep.flows],
    }
    return _with_extras(obj, rep.extras)


def serialize_representation(rep: StructuredRepresentation) -> str:
    """Serialize to the canonical wire form: camelCase keys, deterministic order."""
    return json.dumps(representation_to_obj(rep), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# Validation

def _check_states(rep: StructuredRepresentation, issues: list[Issue]) -> None:
    seen: set[str] = set()
    for i, state in enumerate(rep.states):
        path = f"states[{i}]"
        if not _IDENTIFIER_RE.match(state.name):
            issues.append(
                Issue("error", "bad-identifier", f"{path}.name", f"{state.name!r} is not a valid identifier")
            )
        if state.name in seen:
            issues.append(
                Issue("error", "duplicate-state-name", f"{path}.name", f"state {state.name!r} declared twice")
            )
        seen.add(state.name)
        if not state.initial_value:
            issues.append(
                Issue("error", "empty-initial-value", f"{path}.initialValue", f"state {state.name!r} has an empty initial value")
            )


def _check_parents(rep: StructuredRepresentation, issues: list[Issue]) -> None:
    ids = {e.id for e in rep.elements}
    parents: dict[str, str] = {}
    for i, element in enumerate(rep.elements):
        if element.parent_id is None:
            continue
        if element.parent_id not in ids:
            issues.append(
                Issue(
                    "error",
                    "dangling-parent",
                    f"elements[{i}].parentId",
                    f"parent {element.parent_id!r} of {element.id!r} does not exist",
                )
            )
        else:
            parents[element.id] = element.parent_id
    acyclic: set[str] = set()
    reported: set[str] = set()
    index_by_id = {e.id: i for i, e in enumerate(rep.elements)}
    for element_id in parents:
        chain = []
        node: str | None = element_id
        seen_chain: set[str] = set()
        while node is not None and node not in acyclic:
            if node in seen_chain:
                cycle_start = node
                if cycle_start not in reported:
                    reported.add(cycle_start)
                    issues.append(
                        Issue(
                            "error",
                            "parent-cycle",
                            f"elements[{index_by_id[cycle_start]}].parentId",
                            f"parent links of {cycle_start!r} form a cycle",
                        )
                    )
                break
            seen_chain.add(node)
            chain.append(node)
            node = parents.get(node)
        else:
            acyclic.update(chain)


def _check_elements(rep: StructuredRepresentation, issues: list[Issue]) -> None:
    targets = {s.name for s in rep.states} | {e.id for e in rep.elements}
    seen_ids: set[str] = set()
    for i, element in enumerate(rep.elements):
        path = f"elements[{i}]"
        if not _IDENTIFIER_RE.match(element.id):
            issues.append(
                Issue("error", "bad-identifier", f"{path}.id", f"{element.id!r} is not a valid identifier")
            )
        if element.id in seen_ids:
            issues.append(
                Issue("error", "duplicate-element-id", f"{path}.id", f"element {element.id!r} declared twice")
            )
        seen_ids.add(element.id)
        seen_types: set[str] = set()
        for j, binding in enumerate(element.events):
            bpath = f"{path}.events[{j}]"
            if binding.event_type in seen_types:
                issues.append(
                    Issue(
                        "error",
                        "duplicate-event-binding",
                        bpath,
                        f"element {element.id!r} binds {binding.event_type!r} twice",
                    )
                )
            seen_types.add(binding.event_type)
            if not binding.affects:
                issues.append(
                    Issue("error", "empty-affects", f"{bpath}.affects", "event binding affects nothing")
                )
            for k, effect in enumerate(binding.affects):
                if effect.target not in targets:
                    issues.append(
                        Issue(
                            "error",
                            "dangling-target",
                            f"{bpath}.affects[{k}]",
                            f"target {effect.target!r} is neither a state variable nor an element id",
                        )
                    )


def validate_representation(rep: StructuredRepresentation) -> ValidationReport:
    """Check all structural invariants; problems become report entries, never exceptions."""
    issues: list[Issue] = []
    _check_states(rep, issues)
    _check_elements(rep, issues)
    _check_parents(rep, issues)
    for i, flow in enumerate(rep.flows):
        if not flow.steps:
            issues.append(Issue("error", "empty-steps", f"flows[{i}].steps", f"flow {flow.name!r} has no steps"))
    if not rep.elements:
        issues.append(Issue("warning", "no-elements", "elements", "representation declares no elements"))
    if not rep.flows:
        issues.append(Issue("warning", "no-flows", "flows", "representation declares no flows"))
    return ValidationReport(tuple(issues))


# ---------------------------------------------------------------------------
# Finite state machine

def derive_fsm(rep: StructuredRepresentation) -> FiniteStateMachine:
    """Compile the representation's event bindings into a deterministic machine.

    Requires a representation that validates with no errors. Each
    (element, event type) binding becomes one event; its updateState effects
    become writes of the effect details to the target variable.
    """
    state_names = {s.name for s in rep.states}
    events: list[Event] = []
    transitions: list[Transition] = []
    seen: set[Event] = set()
    for element in rep.elements:
        for binding in element.events:
            event: Event = (element.id, binding.event_type)
            if event in seen:
                raise NondeterminismError(
                    f"element {element.id!r} binds {binding.event_type!r} more than once"
                )
            seen.add(event)
            events.append(event)
            writes = tuple(
                (effect.target, effect.details)
                for effect in binding.affects
                if effect.action == "updateState" and effect.target in state_names
            )
            transitions.append(Transition(on=event, writes=writes))
    return FiniteStateMachine(
        variables=rep.states, events=tuple(events), transitions=tuple(transitions)
    )


def simulate(fsm: FiniteStateMachine, events: Sequence[Event]) -> SimulationResult:
    """Apply an event sequence to the machine's initial state.

    Deterministic: equal inputs give equal traces. Raises UnknownEventError
    for events outside the machine's event set.
    """
    valid = set(fsm.events)
    table = {t.on: t.writes for t in fsm.transitions}
    state = dict(fsm.initial_state)
    trace: list[tuple[Event, dict[str, str]]] = []
    for raw in events:
        event: Event = (raw[0], raw[1])
        if event not in valid:
            raise UnknownEventError(f"unknown event {event!r}")
        for variable, value in table.get(event, ()):
            state[variable] = value
        trace.append((event, dict(state)))
    return SimulationResult(final_state=dict(state), trace=tuple(trace))


# ---------------------------------------------------------------------------
# Flow graph

def _flow_node_ids(rep: StructuredRepresentation) -> list[tuple[InteractionFlow, list[str]]]:
    out = []
    for fi, flow in enumerate(rep.flows, 1):
        out.append((flow, [f"flow{fi}-step{si}" for si in range(1, len(flow.steps) + 1)]))
    return out


def _step_trigger(rep: StructuredRepresentation, step: str) -> Event | str:
    matched = False
    for element in rep.elements:
        if element.id and element.id in step:
            matched = True
            if element.events:
                return (element.id, element.events[0].event_type)
    if matched:
        logger.warning("step names an element with no events, keeping text trigger: %r", step)
    else:
        logger.warning("step names no element id, keeping text trigger: %r", step)
    return step


def derive_flow_graph(rep: StructuredRepresentation) -> FlowGraph:
    """Compile interaction flows into a directed graph of subgoal nodes.

    Every flow becomes a chain rooted at a synthetic initial view node. The
    edge into a step is triggered by the first event of the first element
    whose id appears verbatim in the step text; steps naming no element keep
    their text as the trigger.
    """
    nodes = [FlowNode(id=INITIAL_NODE_ID, label=rep.metadata.title or "Start", kind="view")]
    edges: list[FlowEdge] = []
    for flow, node_ids in _flow_node_ids(rep):
        previous = INITIAL_NODE_ID
        for step, node_id in zip(flow.steps, node_ids):
            nodes.append(FlowNode(id=node_id, label=step, kind="subgoal"))
            edges.append(FlowEdge(source=previous, target=node_id, trigger=_step_trigger(rep, step)))
            previous = node_id
    return FlowGraph(nodes=tuple(nodes), edges=tuple(edges), initial_node=INITIAL_NODE_ID)


def attach_flow_nodes(rep: StructuredRepresentation) -> StructuredRepresentation:
    """Return a copy of the representation with each flow's resolved node ids filled."""
    resolved = {flow.name: tuple(ids) for flow, ids in _flow_node_ids(rep)}
    flows = tuple(replace(f, resolved_nodes=resolved[f.name]) for f in rep.flows)
    return replace(rep, flows=flows)


def check_reachability(graph: FlowGraph) -> list[str]:
    """Breadth-first reachability from the initial node; returns sorted unreachable ids."""
    adjacency: dict[str, list[str]] = {}
    for edge in graph.edges:
        adjacency.setdefault(edge.source, []).append(edge.target)
    seen = {graph.initial_node}
    queue: deque[str] = deque([graph.initial_node])
    while queue:
        for successor in adjacency.get(queue.popleft(), ()):
            if successor not in seen:
                seen.add(successor)
                queue.append(successor)
    return sorted(node.id for node in graph.nodes if node.id not in seen)
