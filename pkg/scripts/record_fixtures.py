#!/usr/bin/env python3
"""Regenerate the replay fixtures under fixtures/.

Runs the engine against the scripted backend in record mode, producing the
archives the test suite (and any offline demo) replays. Rerun after changing
prompt templates or the scripted scenario:

    python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from uigen.demo import QUERY_TEXT, ScriptedEngineBackend, interface_document
from uigen.evalharness import (
    ALL_DIMENSIONS,
    SuiteSeedConfig,
    generate_prompt_suite,
    judgment_to_dict,
    llm_rank,
)
from uigen.pipeline import UserQuery
from uigen.provider import Provider, ReplayArchive
from uigen.refinement import RefinementConfig, run_refinement

FIXTURES = REPO / "fixtures"
EPOCH = "2026-08-10T00:00:00+00:00"


def recorder(backend, path: Path) -> Provider:
    archive = ReplayArchive(backend_label="scripted-demo", created_at=EPOCH)
    return Provider(mode="record", backend=backend, archive=archive, archive_path=path)


def record_quantum() -> None:
    representation = (FIXTURES / "quantum" / "representation.json").read_text()
    backend = ScriptedEngineBackend(representation_json=representation)
    provider = recorder(backend, FIXTURES / "quantum" / "archive.json")
    session = run_refinement(
        UserQuery(id="quantum", text=QUERY_TEXT),
        RefinementConfig(),
        provider,
        clock=lambda: EPOCH,
    )
    assert session.status == "converged", session.status
    assert len(session.iterations) == 2
    print(f"quantum archive: {len(provider.archive.entries)} entries, "
          f"converged at iteration {len(session.iterations)}")


def record_suite() -> None:
    provider = recorder(ScriptedEngineBackend(), FIXTURES / "suite" / "archive.json")
    suite = generate_prompt_suite(provider, SuiteSeedConfig(seed=0))
    assert len(suite.entries) == 100
    (FIXTURES / "suite" / "suite.json").write_text(
        json.dumps(suite.to_dict(), indent=2, ensure_ascii=False) + "\n"
    )
    print(f"suite archive: {len(provider.archive.entries)} entries")


def record_listwise() -> None:
    representation = (FIXTURES / "quantum" / "representation.json").read_text()
    backend = ScriptedEngineBackend(representation_json=representation)
    provider = recorder(backend, FIXTURES / "listwise" / "archive.json")
    transcript = (
        "Quantum physics studies matter and energy at the smallest scales. "
        "Key principles include superposition, entanglement, and wave-particle duality..."
    )
    document = interface_document(2, 1)
    scores = llm_rank(
        UserQuery(id="quantum", text=QUERY_TEXT),
        [("ConvUI", transcript), ("GenUI", document)],
        provider,
        seed=7,
    )
    (FIXTURES / "listwise" / "scores.json").write_text(
        json.dumps(scores.to_dict(), indent=2) + "\n"
    )
    print(f"listwise archive: {len(provider.archive.entries)} entries")


def write_kappa_fixture() -> None:
    matrix = [[3, 0, 0], [0, 3, 0], [1, 1, 1], [2, 1, 0], [0, 2, 1], [1, 0, 2]]
    (FIXTURES / "kappa6.json").write_text(json.dumps({"matrix": matrix}, indent=2) + "\n")
    print("kappa fixture written")


def write_demo_annotations() -> None:
    # 10 instances x 3 annotators, shaped to an 80/10/10 Overall row for GenUI
    from uigen.evalharness import Dimension, PairwiseJudgment

    outcomes = ["Left"] * 8 + ["Tie"] + ["Right"]
    lines = []
    for i, outcome in enumerate(outcomes):
        for annotator in ("ann1", "ann2", "ann3"):
            judgment = PairwiseJudgment(
                instance_id=f"demo-{i:02d}",
                query_id=f"q-{i:02d}",
                left="GenUI",
                right="ConvUI",
                annotator_id=annotator,
                choices={d: outcome for d in ALL_DIMENSIONS},
                comment="",
            )
            lines.append(json.dumps(judgment_to_dict(judgment), ensure_ascii=False))
    path = FIXTURES / "annotations" / "demo.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    print(f"demo annotations: {len(lines)} judgments")


def main() -> None:
    record_quantum()
    record_suite()
    record_listwise()
    write_kappa_fixture()
    write_demo_annotations()


if __name__ == "__main__":
    main()
