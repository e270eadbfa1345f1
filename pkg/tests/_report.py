"""Shared record of acceptance-criterion outcomes, printed at session end."""

CRITERIA: dict = {}


def record(label: str, title: str, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {title}: {detail}"
    CRITERIA[label] = line
    print(line)
    return line
