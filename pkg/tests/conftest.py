from __future__ import annotations

from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def quantum_doc() -> str:
    return (FIXTURES / "quantum" / "representation.json").read_text()


@pytest.fixture(autouse=True)
def _no_live_provider_calls():
    # The suite must never hit a remote backend, regardless of env vars.
    from uigen import provider

    provider.forbid_live_calls(True)
    yield
    provider.forbid_live_calls(False)
