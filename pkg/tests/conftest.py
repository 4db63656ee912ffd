import pytest

import walshriesz as wr


class BuildRecord:
    """A staged build: the state after each factor, plus its gauge/budget."""

    def __init__(self, psi, budget, stages):
        self.psi = psi
        self.budget = budget
        self.states = []
        state = wr.empty_state()
        for _ in range(stages):
            level = wr.choose_next_level(state, psi, budget)
            state = wr.add_factor(state, level)
            self.states.append(state)
        self.final = state

    def stage_series(self):
        return [wr.state_series(s) for s in self.states]


@pytest.fixture(scope="session")
def flagship_build():
    """Three stages of the log-slow gauge, scaled budget, 13 coordinates."""
    return BuildRecord(wr.PsiSpec.logpow(1.0), wr.SummabilityBudget(scale=2.25), 3)


@pytest.fixture(scope="session")
def power_build():
    """Three stages of the cubic gauge at the default budget: 6 coordinates,
    small enough for fully exhaustive index sweeps."""
    return BuildRecord(wr.PsiSpec.power(1.0), wr.SummabilityBudget(), 3)
