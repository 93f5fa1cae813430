import numpy as np
import pytest

from priste import events, markov

EXAMPLE_M = np.array([[0.1, 0.2, 0.7],
                      [0.4, 0.1, 0.5],
                      [0.0, 0.1, 0.9]])


@pytest.fixture
def example_model():
    return markov.MarkovModel(EXAMPLE_M)


@pytest.fixture
def example_event():
    return events.presence(3, [0, 1], 3, 4)


def random_model(rng, m, K=1):
    mats = rng.dirichlet(np.ones(m), size=(K, m))
    return markov.MarkovModel(mats if K > 1 else mats[0])


def random_event(rng, m, T, kind=None):
    """PRESENCE or PATTERN with a window inside ``[1, T]``."""
    kind = kind or rng.choice([events.PRESENCE, events.PATTERN])
    start = int(rng.integers(1, T + 1))
    end = int(rng.integers(start, T + 1))
    if kind == events.PRESENCE:
        k = int(rng.integers(1, m + 1))
        return events.presence(m, rng.choice(m, k, replace=False), start, end)
    cells = [rng.choice(m, int(rng.integers(1, m + 1)), replace=False) for _ in range(end - start + 1)]
    return events.pattern(m, cells, start)


def random_columns(rng, m, n):
    return [rng.uniform(0.0, 1.0, size=m) for _ in range(n)]


# acceptance summary ----------------------------------------------------------

ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    def record(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash.setdefault(ACCEPTANCE, {})[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
