from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from czek.dataset import MISSING, ObservationTable, Scalar, VariableMeta, read_table
from czek.distance import DistanceMatrix

settings.register_profile(
    "det",
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("det")

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def skull_table() -> ObservationTable:
    return read_table(
        DATA_DIR / "synthetic_skulls.csv", DATA_DIR / "synthetic_skulls_meta.toml"
    )


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def make_table(rows: list[list[float | None]], **kwargs) -> ObservationTable:
    """Small table from plain numbers; None becomes a missing cell."""
    n_vars = len(rows[0])
    return ObservationTable(
        observations=tuple(f"obs{i}" for i in range(len(rows))),
        variables=tuple(VariableMeta(f"v{j}") for j in range(n_vars)),
        cells=tuple(
            tuple(MISSING if x is None else Scalar(float(x)) for x in row) for row in rows
        ),
        **kwargs,
    )


def random_symmetric(rng: np.random.Generator, n: int, dyadic: bool = False) -> DistanceMatrix:
    """Random distance matrix; dyadic entries make float sums exact in any
    association order, which the exact-equality oracles rely on."""
    if dyadic:
        a = rng.integers(0, 512, (n, n)).astype(float) / 16.0
    else:
        a = rng.uniform(0.1, 10.0, (n, n))
    a = np.triu(a, k=1)
    a = a + a.T
    return DistanceMatrix(labels=tuple(f"x{i}" for i in range(n)), values=a)
