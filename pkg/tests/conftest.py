import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from permlaw import LawSpec, make_law

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


class ComposedCode:
    """outer(base(y, r)) with the base code's domains and direction."""

    def __init__(self, base, outer, outer_increasing=True):
        self.base = base
        self.outer = outer
        self.J = base.J
        self.J2 = base.J2
        if outer_increasing:
            self.dir_second = base.dir_second
        else:
            self.dir_second = (
                "decreasing" if base.dir_second == "increasing" else "increasing"
            )
        self.interpolated = getattr(base, "interpolated", False)

    def __call__(self, y, r):
        return self.outer(self.base(y, r))

    def default_tolerance(self) -> float:
        return 1e-4 if self.interpolated else 1e-9


def law(name, **params):
    return make_law(LawSpec(name=name, params=params, domain=None))


@pytest.fixture
def cylinder():
    return law("cylinder")


@pytest.fixture
def pythagoras():
    return law("pythagoras")


@pytest.fixture
def beer():
    return law("beer")


@pytest.fixture
def lorentz():
    return law("lorentz")


@pytest.fixture
def vanderwaals():
    return law("vanderwaals")


@pytest.fixture
def log_cylinder(cylinder):
    return ComposedCode(cylinder, np.log)
