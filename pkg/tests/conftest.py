import numpy as np
import pytest

from sparsewishart.simulate import SimSpec, sample_mixture


def random_spd(rng, p, ridge=1.0):
    b = rng.standard_normal((p, p))
    return b.T @ b + ridge * np.eye(p)


def two_population_spec(seed=12):
    """Scale I versus 5 I, p = 3, nu = 20, n = 40."""
    return SimSpec(
        n=40, p=3, K=2, tau=[0.5, 0.5], dofs=[20.0, 20.0],
        sigma_specs=[
            {"type": "explicit", "matrix": np.eye(3).tolist()},
            {"type": "explicit", "matrix": (5 * np.eye(3)).tolist()},
        ],
        seed=seed,
    )


@pytest.fixture(scope="session")
def seed12():
    return sample_mixture(two_population_spec(12))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record_verdict(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
