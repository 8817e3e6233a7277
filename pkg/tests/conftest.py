import contextlib
import re

import pytest

_CRITERIA: dict[str, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    """Context manager that records PASS or FAIL for one acceptance criterion and re-raises failures."""

    @contextlib.contextmanager
    def record(key, title):
        try:
            yield
        except BaseException:
            _CRITERIA[key] = (title, "FAIL")
            print(f"CRITERION {key}: FAIL  {title}")
            raise
        _CRITERIA[key] = (title, "PASS")
        print(f"CRITERION {key}: PASS  {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        title, status = _CRITERIA[key]
        terminalreporter.write_line(f"{status}  criterion {key}: {title}")
