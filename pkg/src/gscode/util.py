import os


def num_threads() -> int:
    """Worker-pool size from the GSC_NUM_THREADS environment variable.

    Unset or empty means 1; a non-integer value is a configuration error."""
    raw = os.environ.get("GSC_NUM_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"GSC_NUM_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)
