import numpy as np
import pytest

from jetoptics.base_geometry import MetricField
from jetoptics.jet_geometry import Scenario
from jetoptics.tensor_core import Axis, JetPoint, ScalarField


def make_scenario(h, phi, A, name="test", K=1.0, **flags) -> Scenario:
    p, n = len(h), len(phi)
    return Scenario(
        p, n,
        MetricField.from_strings(h, Axis.TEMPORAL, p, n),
        MetricField.from_strings(phi, Axis.SPATIAL, p, n),
        tuple(ScalarField.parse(str(a), p, n) for a in A),
        name=name, K=K, **flags,
    )


def random_points(s: Scenario, count: int, seed: int, scale: float = 0.6) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(count, s.nvars))


def jet_point(s: Scenario, u) -> JetPoint:
    return JetPoint.from_flat(u, s.p, s.n)


CURVED_PHI3 = [["1 + 0.1*x1^2", "0.1*x2", "0"],
               ["0.1*x2", "1 + 0.2*sin(x3)", "0.05*x1"],
               ["0", "0.05*x1", "1.5 + 0.1*x2*x3"]]
CURVED_H2 = [["1 + 0.2*t1^2", "0.1*t2"], ["0.1*t2", "1 + 0.1*sin(t1)"]]


@pytest.fixture(scope="session")
def aniso():
    """p=2, n=3 with curved h, phi and a fiber- and time-dependent medium."""
    return make_scenario(CURVED_H2, CURVED_PHI3,
                         ["0.3*v11 + 0.2*x1*v12 + 0.1*t1*v21*v31",
                          "0.2*v22*x3 + 0.1*sin(v11) + 0.3*t2",
                          "0.25*v32*v12 + 0.1*x2*x1"], name="aniso")


@pytest.fixture(scope="session")
def single_time():
    """p=1, n=2 with curved phi and a dispersive medium."""
    return make_scenario([["1 + 0.1*t1^2"]],
                         [["1 + 0.1*x1^2", "0.1*x2"], ["0.1*x2", "1 + 0.2*sin(x1)"]],
                         ["0.3*v11 + 0.2*x1*v21 + 0.1*t1*v21^2", "0.2*v21*x2 + 0.1*sin(v11) + 0.3*t1"],
                         name="single")


@pytest.fixture(scope="session")
def sphere():
    return make_scenario([["1"]], [["1", "0"], ["0", "sin(x1)^2"]], ["0", "0"], name="sphere")


@pytest.fixture(scope="session")
def flat22():
    return make_scenario([["1", "0"], ["0", "1"]], [["1", "0"], ["0", "1"]], ["0", "0"], name="flat")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k])
