"""Collects one PASS/FAIL line per acceptance criterion for the run summary."""

RESULTS = []


def record(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
    if detail:
        line += f" ({detail})"
    RESULTS.append((number, line))
    print(line)
    return ok
