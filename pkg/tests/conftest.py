import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cdra import CausalDag, Gcm
from cdra.gcm import Cpd, LinearResponse, SeverityDomain


@pytest.fixture(scope="session")
def worked_gcm() -> Gcm:
    """Two-factor confounded model with fully enumerable ground truth.

    P(A=1)=0.5, P(B=1|A)=(0.2, 0.8), success = clamp(0.9 - 0.3A - 0.4B).
    """
    dag = CausalDag(("A", "B", "M"), (("A", "B"), ("A", "M"), ("B", "M")), sink="M")
    dom = SeverityDomain((0, 1))
    return Gcm(
        dag=dag,
        domains={"A": dom, "B": dom},
        cpds={
            "A": Cpd("A", (), {(): [0.5, 0.5]}),
            "B": Cpd("B", ("A",), {(0,): [0.8, 0.2], (1,): [0.2, 0.8]}),
        },
        response=LinearResponse(base=0.9, coefficients={"A": -0.3, "B": -0.4}),
    )


@pytest.fixture(scope="session")
def worked_factor_dag() -> CausalDag:
    return CausalDag(("A", "B"), (("A", "B"),))


@pytest.fixture
def exposure_triangle() -> CausalDag:
    """Lighting drives exposure, f-stop, and ISO; the metric hangs off the
    three camera settings."""
    return CausalDag(
        nodes=("L", "E", "F", "ISO", "M"),
        edges=(("L", "E"), ("L", "F"), ("L", "ISO"),
               ("E", "F"), ("E", "ISO"), ("F", "ISO"),
               ("E", "M"), ("F", "M"), ("ISO", "M")),
        sink="M",
    )


def random_dag_suite(count: int, max_nodes: int = 6, seed: int = 0):
    """Deterministic batch of random DAGs for oracle comparisons."""
    from cdra import random_dag

    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        n = int(rng.integers(2, max_nodes + 1))
        p = float(rng.uniform(0.2, 0.8))
        out.append(random_dag(n, p, rng))
    return out
