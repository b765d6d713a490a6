"""Collects one verdict line per acceptance criterion for the terminal summary."""

from __future__ import annotations

from contextlib import contextmanager

RESULTS: dict[int, tuple[str, bool, str]] = {}


@contextmanager
def criterion(number: int, title: str):
    """Record PASS with the collected notes, or FAIL with the error, for one criterion."""
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        RESULTS[number] = (title, False, "; ".join(notes + [msg]))
        print(f"[criterion {number}] FAIL {title}: {msg}")
        raise
    RESULTS[number] = (title, True, "; ".join(notes))
    print(f"[criterion {number}] PASS {title}: {'; '.join(notes)}")
