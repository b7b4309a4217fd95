import numpy as np
import pytest

from mroot import fixtures
from mroot.classify import make_samples

ACCEPTANCE_LINES = []


class AcceptanceRecorder:
    def __call__(self, number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)


@pytest.fixture(params=list(fixtures.FIXTURES))
def fixture_name(request):
    return request.param


@pytest.fixture
def spec_and_samples(fixture_name):
    spec = fixtures.fixture(fixture_name)
    return spec, make_samples(spec, fixtures.default_x(fixture_name), count=12)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_metric(seed, n, m):
    """x-dependent m-th root metric dominated by its diagonal, so the cone is non-empty."""
    from mroot.metric import MetricSpec
    from mroot.symtensor import PolyField, build_from_representatives

    r = np.random.default_rng(seed)
    zero = (0,) * n
    entries = []
    for i in range(1, n + 1):
        e = [0] * n
        e[i - 1] = 1
        terms = [(zero, 1.0 + r.uniform(0.0, 0.5)), (tuple(e), r.uniform(-0.2, 0.2))]
        entries.append(((i,) * m, PolyField.from_terms(terms, n)))
    for _ in range(2):
        idx = tuple(sorted(int(v) for v in r.integers(1, n + 1, size=m)))
        if len(set(idx)) == 1 or idx in {k for k, _ in entries}:
            continue
        e = tuple(int(v) for v in r.integers(0, 2, size=n))
        terms = [(zero, r.uniform(-0.05, 0.05)), (e, r.uniform(-0.05, 0.05))]
        entries.append((idx, PolyField.from_terms(terms, n)))
    return MetricSpec(n, m, build_from_representatives(n, m, entries), name=f"random-{n}-{m}-{seed}")
