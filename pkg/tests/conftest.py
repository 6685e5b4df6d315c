import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from agnostic_il.mdp import random_mdp
from agnostic_il.policies import StochasticPolicy

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def small_mdps(draw, max_h=5, max_width=4, max_actions=3):
    H = draw(st.integers(1, max_h))
    W = draw(st.integers(1, max_width))
    A = draw(st.integers(1, max_actions))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_mdp(H, W, A, np.random.default_rng(seed))


@st.composite
def mdp_with_policies(draw, n_policies=2, **kw):
    mdp = draw(small_mdps(**kw))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    return (mdp, *[StochasticPolicy.random(mdp.n_states, mdp.n_actions, rng) for _ in range(n_policies)])


def within_se(estimate, truth, se, k=3.0):
    return abs(estimate - truth) <= k * se + 1e-12


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
