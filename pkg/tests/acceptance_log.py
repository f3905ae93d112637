"""Collects one verdict per acceptance criterion for the terminal summary."""

import contextlib

RESULTS = {}


@contextlib.contextmanager
def criterion(number, title):
    """Record PASS if the block finishes, FAIL (and re-raise) if it does not.

    The yielded dict collects measured values shown next to the verdict.
    """
    detail = {}
    try:
        yield detail
    except BaseException:
        RESULTS[number] = ("FAIL", title, detail)
        raise
    RESULTS[number] = ("PASS", title, detail)


def summary_lines():
    lines = []
    for number in sorted(RESULTS):
        verdict, title, detail = RESULTS[number]
        measured = ", ".join(f"{k}={_fmt(v)}" for k, v in detail.items())
        lines.append(f"criterion {number:>2} {verdict}  {title}" + (f"  [{measured}]" if measured else ""))
    return lines


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)
