"""uigen: turn natural-language queries into validated, iteratively refined web interfaces.

Importing the package wires up the structured-output parsers that the
provider boundary dispatches to, so ``import uigen`` is enough to use
record/replay extraction end to end.
"""

from . import evalharness, pipeline, provider, refinement, representation, reward  # noqa: F401

__all__ = [
    "evalharness",
    "pipeline",
    "provider",
    "refinement",
    "representation",
    "reward",
]
