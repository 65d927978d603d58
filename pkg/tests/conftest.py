import pytest


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def report(request):
    """Print and collect one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.acceptance_lines

    def emit(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"
        print(line)
        lines.append((number, line))
        return passed

    return emit


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)
