from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from condreach import fixtures  # noqa: E402
from condreach.conditional import check_defined  # noqa: E402
from condreach.generate import random_mdp  # noqa: E402
from condreach.model import Query  # noqa: E402

MODELS = Path(__file__).resolve().parent.parent / "models"


def query_for(m, direction="max", **kw):
    return Query(m.label("goal"), m.label("evidence"), direction=direction, **kw)


def defined_instances(count, max_states=6, max_actions=2, seed0=0, **kw):
    """``count`` seeded random models whose evidence is reachable."""
    out = []
    seed = seed0
    while len(out) < count:
        rng = random.Random(seed)
        m = random_mdp(rng, rng.randint(3, max_states), rng.randint(1, max_actions), **kw)
        if check_defined(m, m.label("evidence")):
            out.append((seed, m))
        seed += 1
    return out


@pytest.fixture
def two_exit():
    return fixtures.two_exit_model()


@pytest.fixture
def models_dir():
    return MODELS


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
