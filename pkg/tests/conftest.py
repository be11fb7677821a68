import numpy as np
import pytest

from mmh import IdParams, NeighborhoodSpec, SphereLineSpec, arithmetic_radii, gen_sphere_line


def random_rotation(D, rng):
    Q, R = np.linalg.qr(rng.standard_normal((D, D)))
    return Q * np.sign(np.diag(R))


@pytest.fixture(scope="session")
def sphere_line():
    return gen_sphere_line(SphereLineSpec(seed=0))


@pytest.fixture(scope="session")
def sphere_line_params():
    return IdParams(0.95, 10, NeighborhoodSpec.ball(arithmetic_radii(2.0, 0.1, 0.1)))


@pytest.fixture(scope="session")
def sphere_line_records(sphere_line, sphere_line_params):
    from mmh import compute_all_ids

    return compute_all_ids(sphere_line, sphere_line_params)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
