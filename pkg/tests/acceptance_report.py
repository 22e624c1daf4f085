"""Shared collector for the acceptance suite's pass/fail summary lines."""

lines: list[str] = []


def record(ok: bool, description: str) -> None:
    """Log one pass/fail line and fail the calling test when not ok."""
    status = "PASS" if ok else "FAIL"
    lines.append(f"{status}: {description}")
    assert ok, description
