"""Shared fakes for driving the engine without a real model."""

from __future__ import annotations

from typing import Callable, Iterable

from uigen.provider import Provider, ProviderRequest, ProviderResponse, ReplayArchive


class FakeBackend:
    """Answers by purpose: either a callable(request) -> str or a queue of texts."""

    def __init__(self, by_purpose: dict[str, Callable[[ProviderRequest], str] | Iterable[str]]):
        self.scripts = {
            purpose: script if callable(script) else iter(script)
            for purpose, script in by_purpose.items()
        }
        self.requests: list[ProviderRequest] = []

    def __call__(self, request: ProviderRequest) -> ProviderResponse:
        self.requests.append(request)
        script = self.scripts[request.purpose]
        content = script(request) if callable(script) else next(script)
        return ProviderResponse(content=content)


def fake_provider(by_purpose) -> tuple[Provider, FakeBackend]:
    backend = FakeBackend(by_purpose)
    provider = Provider(mode="record", backend=backend, archive=ReplayArchive(), sleep=lambda s: None)
    return provider, backend


def recording_provider(backend, archive_path=None) -> Provider:
    return Provider(
        mode="record",
        backend=backend,
        archive=ReplayArchive(),
        archive_path=archive_path,
        sleep=lambda s: None,
    )
