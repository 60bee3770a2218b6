"""Worker-count policy: MIXBRIDGE_THREADS caps all internal thread pools."""

import os


def max_workers(requested: int | None = None) -> int:
    cap = os.environ.get("MIXBRIDGE_THREADS")
    limit = os.cpu_count() or 1
    if cap is not None:
        try:
            limit = min(limit, max(1, int(cap)))
        except ValueError as exc:
            raise ValueError(f"MIXBRIDGE_THREADS must be an integer, got {cap!r}") from exc
    if requested is not None:
        limit = min(limit, max(1, requested))
    return limit
