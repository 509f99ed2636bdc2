from __future__ import annotations

import numpy as np
import pytest

from liqopt.ledger import Batch, ParticipantState, Payment


def random_batch(rng, n, max_participants=5, value_scale=5, shape=1.5):
    """A batch of n payments over a small participant pool, Pareto values."""
    npart = int(rng.integers(2, max_participants + 1)) if max_participants > 2 else 2
    pids = [f"B{k}" for k in range(npart)]
    payments = []
    for i in range(n):
        a, b = rng.choice(npart, size=2, replace=False)
        value = max(1, int(round((rng.pareto(shape) + 1.0) * value_scale)))
        payments.append(Payment(f"p{i}", pids[a], pids[b], value, float(i)))
    return Batch(tuple(payments))


def random_start(rng, batch, max_abs=20):
    """Consistent start states (available liquidity never negative)."""
    start = {}
    for pid in batch.participants():
        pos = int(rng.integers(-max_abs, max_abs + 1))
        mndp = int(rng.integers(0, max_abs + 1))
        start[pid] = ParticipantState(pid, pos, max(mndp, -pos))
    return start


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
