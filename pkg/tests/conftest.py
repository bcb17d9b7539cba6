import os

import pytest
from hypothesis import HealthCheck, settings

from voltfix.comparison import EXAMPLE32_PROBLEM, preset_triple
from voltfix.problem import IntegralProblem

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Same kernel as the worked example with the outer map lifted by 2, so that
# sin(t) + 2 + ln(1 + I) stays positive and a real solution exists.
SHIFTED_F = "2+sin(t)+ln(1+x)+ln(1+y)"


@pytest.fixture(scope="session")
def example32():
    return IntegralProblem.from_strings(**EXAMPLE32_PROBLEM, triple=preset_triple("example32"))


@pytest.fixture(scope="session")
def shifted():
    spec = dict(EXAMPLE32_PROBLEM, f=SHIFTED_F)
    return IntegralProblem.from_strings(**spec, triple=preset_triple("example32"))
