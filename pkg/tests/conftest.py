import math

import numpy as np
import pytest

from billiard_lab.geometry import (
    EllipseSpec,
    make_ellipse,
    make_flattened_oval,
    make_fourier_perturbed,
)

E03_A2 = math.sqrt(1.0 - 0.09)  # minor axis of the e = 0.3 unit-major ellipse


@pytest.fixture(scope="session")
def circle():
    return make_ellipse(EllipseSpec(1.0, 1.0), 512)


@pytest.fixture(scope="session")
def ellipse21():
    return make_ellipse(EllipseSpec(2.0, 1.0), 2048)


@pytest.fixture(scope="session")
def ellipse_e03():
    return make_ellipse(EllipseSpec(1.0, E03_A2), 1024)


@pytest.fixture(scope="session")
def oval4():
    return make_flattened_oval(4, 1024)


@pytest.fixture(scope="session")
def perturbed_e03():
    return make_fourier_perturbed(EllipseSpec(1.0, E03_A2), [(3, 0.01, 0.0)], 1024)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
