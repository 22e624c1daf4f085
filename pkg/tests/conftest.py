import sys
from pathlib import Path

# Make the sibling helper modules importable regardless of invocation dir.
sys.path.insert(0, str(Path(__file__).parent))

import acceptance_report  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if acceptance_report.lines:
        terminalreporter.section("acceptance summary")
        for line in acceptance_report.lines:
            terminalreporter.write_line(line)
