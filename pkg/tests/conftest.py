import sys
from pathlib import Path

# make tests/helpers.py importable regardless of invocation directory
sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(criterion: str, passed: bool, detail: str):
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_RESULTS.append((criterion, passed, detail))
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {criterion}  ({detail})")
