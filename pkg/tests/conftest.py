import pytest

from herrlt.okring import BaseField

Q3 = BaseField(3, "unramified", (0, 1))
Q5 = BaseField(5, "unramified", (0, 1))
Q2_4 = BaseField(2, "unramified", (1, 1, 1))
Q3_9 = BaseField(3, "unramified", (1, 0, 1))
E5 = BaseField(5, "eisenstein", (-5, 0, 1))

# (p, q) pairs used across the suite
FIELDS = {"3,3": Q3, "2,4": Q2_4, "3,9": Q3_9, "5,5": Q5}
ODD_FIELDS = {"3,3": Q3, "5,5": Q5, "3,9": Q3_9, "e5": E5}


@pytest.fixture(params=sorted(FIELDS), ids=lambda k: f"pq={k}")
def field(request):
    return FIELDS[request.param]


@pytest.fixture(params=sorted(ODD_FIELDS), ids=lambda k: f"ctx={k}")
def odd_field(request):
    return ODD_FIELDS[request.param]


# one verdict line per acceptance criterion, repeated in the terminal summary
VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
