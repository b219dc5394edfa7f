import math
from pathlib import Path

import numpy as np
import pytest

from jacobi_anosov.config_model import IntegratorConfig
from jacobi_anosov.curvature_models import conformal_chart, constant_profile, expression_profile

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def integrator():
    return IntegratorConfig()


@pytest.fixture
def fast_integrator():
    return IntegratorConfig(max_step=0.05)


@pytest.fixture
def tight_integrator():
    return IntegratorConfig(rel_tol=1e-13, abs_tol=1e-15)


@pytest.fixture
def hyperbolic():
    return constant_profile(-1.0, k=1.0)


@pytest.fixture
def flat():
    return constant_profile(0.0)


@pytest.fixture
def sphere():
    return constant_profile(1.0)


@pytest.fixture
def sine():
    return expression_profile("-1 + 0.9*sin(s)", k=math.sqrt(1.9))


@pytest.fixture
def disk():
    return conformal_chart("2 / (1 - x^2 - y^2)", (-1.0, 1.0, -1.0, 1.0), sample_domain=(-0.5, 0.5, -0.5, 0.5))


@pytest.fixture
def flat_chart():
    return conformal_chart("1", (-10.0, 10.0, -10.0, 10.0))


def random_profiles(count: int, seed: int, kind: str = "negative"):
    """Seeded expression profiles.

    "negative": kappa <= -0.05 everywhere. "mixed": negative constants,
    nonpositive sine bumps with isolated zeros, and the flat profile.
    "wronskian": sign-changing sine profiles.
    """
    rng = np.random.default_rng(seed)
    profiles = []
    for i in range(count):
        w = float(rng.uniform(0.5, 2.0))
        p = float(rng.uniform(0.0, 2.0 * math.pi))
        if kind == "negative":
            b = float(rng.uniform(0.05, 1.0))
            c = float(rng.uniform(0.0, 1.0))
            source = f"-{b!r} - {c!r}*(1 + sin({w!r}*s + {p!r}))/2"
        elif kind == "mixed":
            c = float(rng.uniform(0.2, 1.0))
            source = [f"-{c!r}", f"-{c!r}*(1 + sin({w!r}*s + {p!r}))/2", "0"][i % 3]
        else:
            c0 = float(rng.uniform(-1.0, 0.2))
            c1 = float(rng.uniform(-0.5, 0.5))
            source = f"{c0!r} + {c1!r}*sin({w!r}*s + {p!r})"
        profiles.append(expression_profile(source))
    return profiles
