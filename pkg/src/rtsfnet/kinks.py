"""Branch recording for piecewise-smooth operations.

Ops with a non-differentiable switch (LeakyReLU sign, sort order, max
selection, guarded divisions) report the decision they took. A finite
difference is only a valid derivative estimate when both probes take the same
branches as the base point; :func:`recording` collects the decisions so the
checker can tell.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterator

from torch import Tensor

_log: list[Tensor] | None = None


def active() -> bool:
    return _log is not None


def note(decision: Tensor) -> None:
    if _log is not None:
        _log.append(decision.detach())


@contextmanager
def recording() -> Iterator[list[Tensor]]:
    global _log
    prev, _log = _log, []
    try:
        yield _log
    finally:
        _log = prev


def same(a: list[Tensor], b: list[Tensor]) -> bool:
    return len(a) == len(b) and all(x.shape == y.shape and bool((x == y).all()) for x, y in zip(a, b))
