"""Deterministic scripted backend for offline runs, fixtures, and tests.

`ScriptedEngineBackend` answers every request purpose the engine emits with
canned, fully deterministic content: a quantum-physics learning scenario for
the generation stages, a schedule-driven score table for candidate scoring,
and label-keyed scores for listwise judging. Recording a run against it
produces a replay archive that pins the whole engine byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Mapping

from .provider import ProviderRequest, ProviderResponse

QUERY_TEXT = "I want to understand quantum physics principles."

SPEC_JSON = json.dumps(
    {
        "mainGoal": "Create an interactive learning interface for understanding quantum physics principles.",
        "keyFeatures": [
            "Step-by-step tutorials on key quantum physics concepts",
            "Interactive simulations demonstrating quantum mechanics principles",
            "Visual aids such as diagrams and animations to enhance comprehension",
            "Quizzes and assessments to test understanding and reinforce learning",
            "Discussion forums for peer interaction and support",
        ],
        "uiComponents": [
            "Navigation header with tutorial, simulation, and help entries",
            "Tutorial cards with progress indicators",
            "Simulation canvas with parameter controls",
            "Help modal with glossary",
        ],
        "interactionStyles": [
            "Click-driven navigation between learning sections",
            "Direct manipulation of simulation parameters",
        ],
        "problemSolvingStrategies": [
            "Scaffold concepts from simple to advanced",
            "Pair every concept with a runnable demonstration",
        ],
        "technicalRequirements": [
            "Single self-contained web document",
            "No external network dependencies",
        ],
    },
    indent=2,
)

# Compact but fully valid default representation; the repo-level fixture file
# can be passed in instead for the full scenario.
_DEFAULT_REPRESENTATION = json.dumps(
    {
        "description": "An interactive educational platform for learning quantum physics principles.",
        "metadata": {
            "title": "Quantum Physics Explorer - Interactive Learning Platform",
            "metaDescription": "Learn quantum physics through interactive tutorials and simulations.",
        },
        "states": [
            {
                "name": "isMobileMenuOpen",
                "initialValue": "false",
                "description": "Controls the visibility of the mobile navigation menu on smaller screens.",
            },
            {
                "name": "isHelpModalOpen",
                "initialValue": "false",
                "description": "Controls the visibility of the help modal.",
            },
        ],
        "elements": [
            {
                "id": "helpButton",
                "elementType": "button",
                "content": "Help",
                "className": ["text-blue-600", "rounded-full", "p-2"],
                "functionality": "Provides access to help resources and tutorials.",
                "attributes": {"ariaLabel": "Get help"},
                "events": [
                    {
                        "type": "onClick",
                        "handlerDescription": "Opens the help modal with tutorials and resources.",
                        "affects": [
                            {"target": "isHelpModalOpen", "action": "updateState", "details": "true"}
                        ],
                    }
                ],
                "interactions": {"hover": {"className": ["text-blue-800"]}},
            }
        ],
        "flows": [
            {
                "name": "Explore Tutorials",
                "description": "User navigates to and interacts with the tutorials section.",
                "steps": [
                    "User opens the tutorials section.",
                    "User works through a tutorial step by step.",
                ],
            }
        ],
    },
    indent=2,
)

RUBRIC_JSON = json.dumps(
    {
        "name": "generate_metrics",
        "args": {
            "metrics": [
                {
                    "description": "Measures the quality of user interaction with simulations, quizzes, and other dynamic components.",
                    "weight": 0.15,
                    "name": "Interactive Elements Quality",
                    "criteria": [
                        "Animations and transitions are smooth and non-distracting.",
                        "User actions (e.g., answering quiz questions, changing simulation variables) receive clear and immediate feedback.",
                        "Interactive components (simulations, quiz buttons) are responsive to user input.",
                        "User flows through tutorials, simulations, and quizzes are intuitive.",
                        "State changes (e.g., quiz progress, simulation results) are accurately reflected.",
                        "Error prevention mechanisms in quizzes (e.g., guiding towards correct answers) are effective.",
                    ],
                },
                {
                    "description": "Assesses layout hierarchy and the visual grouping of learning content.",
                    "weight": 0.2,
                    "name": "Visual Structure",
                    "criteria": [
                        "Sections for tutorials, simulations, and assessment are visually distinct.",
                        "Navigation communicates where the user is in the learning path.",
                    ],
                },
                {
                    "description": "Checks that core quantum physics ideas are actually taught, not just mentioned.",
                    "weight": 0.25,
                    "name": "Explain Physics Concept",
                    "criteria": [
                        "Interactive models effectively demonstrate phenomena like wave-particle duality.",
                        "Each concept pairs prose explanation with a manipulable demonstration.",
                    ],
                },
                {
                    "description": "Evaluates how readable and unambiguous the presented material is.",
                    "weight": 0.15,
                    "name": "Clarity",
                    "criteria": [
                        "Terminology is introduced before it is used.",
                        "Text is concise and scannable.",
                    ],
                },
                {
                    "description": "Verifies the physics content is correct.",
                    "weight": 0.15,
                    "name": "Content Accuracy",
                    "criteria": [
                        "Stated principles match textbook definitions.",
                        "Simulation behavior is qualitatively correct.",
                    ],
                },
                {
                    "description": "Judges the overall visual polish of the page.",
                    "weight": 0.1,
                    "name": "Aesthetic Appeal",
                    "criteria": [
                        "Color and typography are consistent.",
                        "Spacing is deliberate, with no crowded regions.",
                    ],
                },
            ]
        },
    },
    indent=2,
)

# Default score schedule: (iteration, candidate) -> overall score. Iteration 1
# stays under the stop threshold, iteration 2 crosses it.
DEFAULT_SCORE_SCHEDULE: dict[tuple[int, int], float] = {
    (1, 1): 82.0,
    (1, 2): 85.5,
    (1, 3): 79.0,
    (2, 1): 93.5,
    (2, 2): 88.0,
    (2, 3): 90.0,
}

DEFAULT_LISTWISE_BASE = {"GenUI": 88.0, "ConvUI": 62.0, "IUI": 71.0}

_PROVENANCE_SEED_RE = re.compile(r"Candidate variation seed: i(\d+)c(\d+)")
_VARIATION_RE = re.compile(r"Candidate variation seed: (\d+)")
_MARKER_RE = re.compile(r'data-variant="i(\d+)c(\d+)"')
_RUBRIC_LINE_RE = re.compile(r"^- (.+?) \(weight ", re.MULTILINE)
_VARIANT_RE = re.compile(r"^### Variant (.+)$", re.MULTILINE)


def interface_document(iteration: int, candidate: int) -> str:
    extra = "" if iteration == 1 else "\n  <section id=\"glossary\"><h2>Glossary</h2><dl><dt>Superposition</dt><dd>A quantum system can occupy several basis states at once.</dd></dl></section>"
    return f"""<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="candidate" content="i{iteration}c{candidate}">
<title>Quantum Physics Explorer - Interactive Learning Platform</title>
<style>
  body {{ font-family: system-ui, sans-serif; margin: 0; color: #111; }}
  header {{ background: #1e3a8a; color: white; padding: 12px 20px; display: flex; justify-content: space-between; }}
  .modal {{ display: none; position: fixed; inset: 20% 25%; background: white; border: 1px solid #cbd5e1; padding: 20px; box-shadow: 0 10px 30px rgba(0,0,0,.2); }}
  .modal.open {{ display: block; }}
  main {{ padding: 20px; }}
  button {{ cursor: pointer; }}
</style>
</head>
<body data-variant="i{iteration}c{candidate}">
<header>
  <strong>Quantum Physics Explorer</strong>
  <button id="helpButton" aria-label="Get help">Help</button>
</header>
<main>
  <section id="tutorialSection">
    <h1>Quantum Physics Tutorials</h1>
    <p>Step through superposition, entanglement, and wave-particle duality with runnable demonstrations.</p>
    <button id="startSimulationButton">Run simulation</button>
    <canvas id="simCanvas" width="480" height="160"></canvas>
  </section>{extra}
</main>
<div class="modal" id="helpModal" role="dialog" aria-label="Help">
  <h2>Help &amp; Resources</h2>
  <p>Pick a tutorial, run the simulation, and check the glossary for terms.</p>
  <button id="closeHelp">Close</button>
</div>
<script>
(function () {{
  var state = {{ isMobileMenuOpen: "false", isHelpModalOpen: "false", isSimulationRunning: "false" }};
  var modal = document.getElementById("helpModal");
  function render() {{ modal.classList.toggle("open", state.isHelpModalOpen === "true"); }}
  document.getElementById("helpButton").addEventListener("click", function () {{
    state.isHelpModalOpen = "true"; render();
  }});
  document.getElementById("closeHelp").addEventListener("click", function () {{
    state.isHelpModalOpen = "false"; render();
  }});
  document.getElementById("startSimulationButton").addEventListener("click", function () {{
    state.isSimulationRunning = "true";
    var ctx = document.getElementById("simCanvas").getContext("2d");
    ctx.clearRect(0, 0, 480, 160);
    for (var x = 0; x < 480; x += 4) {{
      var y = 80 + Math.sin(x / 18) * 50 * Math.cos(x / 160);
      ctx.fillRect(x, y, 2, 2);
    }}
  }});
  render();
}})();
</script>
</body>
</html>"""


def _stable_base(label: str) -> float:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return 40.0 + digest[0] % 50


class ScriptedEngineBackend:
    """Canned responses for every engine purpose; pure function of the request."""

    def __init__(
        self,
        score_schedule: Mapping[tuple[int, int], float] | None = None,
        representation_json: str | None = None,
        spec_json: str = SPEC_JSON,
        rubric_json: str = RUBRIC_JSON,
        listwise_base: Mapping[str, float] | None = None,
    ):
        self.score_schedule = dict(DEFAULT_SCORE_SCHEDULE if score_schedule is None else score_schedule)
        self.representation_json = representation_json or _DEFAULT_REPRESENTATION
        self.spec_json = spec_json
        self.rubric_json = rubric_json
        self.listwise_base = dict(DEFAULT_LISTWISE_BASE if listwise_base is None else listwise_base)
        self.requests: list[ProviderRequest] = []

    def __call__(self, request: ProviderRequest) -> ProviderResponse:
        self.requests.append(request)
        handler = getattr(self, f"_{request.purpose}", None)
        if handler is None:
            raise ValueError(f"scripted backend has no handler for {request.purpose!r}")
        return ProviderResponse(content=handler(request))

    # One method per purpose; each reads everything it needs from the prompt.

    def _requirement_spec(self, request: ProviderRequest) -> str:
        return self.spec_json

    def _representation(self, request: ProviderRequest) -> str:
        return self.representation_json

    def _reward_rubric(self, request: ProviderRequest) -> str:
        return self.rubric_json

    def _ui_code(self, request: ProviderRequest) -> str:
        text = "\n".join(m.content for m in request.messages)
        tagged = _PROVENANCE_SEED_RE.search(text)
        if tagged:
            return interface_document(int(tagged.group(1)), int(tagged.group(2)))
        variation = _VARIATION_RE.search(text)
        candidate = int(variation.group(1)) if variation else 1
        previous = [int(m.group(1)) for m in _MARKER_RE.finditer(text)]
        iteration = max(previous) + 1 if previous else 1
        return interface_document(iteration, candidate)

    def _metric_scoring(self, request: ProviderRequest) -> str:
        text = "\n".join(m.content for m in request.messages)
        markers = _MARKER_RE.findall(text)
        iteration, candidate = (int(markers[-1][0]), int(markers[-1][1])) if markers else (1, 1)
        overall = self.score_schedule.get((iteration, candidate), 50.0)
        names = _RUBRIC_LINE_RE.findall(text)
        scores = [
            {
                "name": name,
                "score": overall,
                "feedback": f"{name}: solid at {overall:g}; tighten the weakest criterion next round.",
            }
            for name in names
        ]
        return json.dumps({"scores": scores})

    def _suite_generation(self, request: ProviderRequest) -> str:
        text = "\n".join(m.content for m in request.messages)

        def line(label: str) -> str:
            match = re.search(rf"^{label}: (.+)$", text, re.MULTILINE)
            return match.group(1) if match else ""

        domain = line("Domain")
        detail = line("Detail level").split(" ")[0]
        qtype = line("Query type")
        count = int(line("Count") or "1")
        topic = domain.replace(" & ", " and ").lower()
        prompts = []
        for i in range(1, count + 1):
            if detail == "concise" and qtype == "general":
                prompts.append(f"How do I get better at {topic}? (angle {i})")
            elif detail == "concise" and qtype == "interactive":
                prompts.append(f"I want an interactive {topic} workspace, take {i}.")
            elif qtype == "general":
                prompts.append(
                    f"I have spent the last year working on {topic} for a mid-sized team and keep "
                    f"running into the same obstacles around planning, tooling, and review. "
                    f"Walk me through, in depth, how a practitioner would structure this work "
                    f"end to end, including the pitfalls to avoid. (scenario {i})"
                )
            else:
                prompts.append(
                    f"Build me a tool I can actually click through for {topic}: it should let me "
                    f"enter my own data, compare at least two options side by side, and keep a "
                    f"running summary of my decisions as I explore variant {i} of my project."
                )
        return json.dumps({"prompts": prompts})

    def _listwise_ranking(self, request: ProviderRequest) -> str:
        text = "\n".join(m.content for m in request.messages)
        labels = _VARIANT_RE.findall(text)
        dims_match = re.search(r"^Dimensions: (.+)$", text, re.MULTILINE)
        dimensions = [d.strip() for d in dims_match.group(1).split(",")] if dims_match else ["Overall"]
        scores = []
        for label in labels:
            base = self.listwise_base.get(label, _stable_base(label))
            entry: dict[str, object] = {"label": label}
            for j, dimension in enumerate(dimensions):
                entry[dimension] = max(0.0, min(100.0, base - j))
            scores.append(entry)
        return json.dumps({"scores": scores})
