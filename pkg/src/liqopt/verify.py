"""Built-in self-checks over small seeded instances.

Each check pairs a library code path with an independently coded
re-computation (cumulative sums from scratch, term-by-term energy
evaluation, full enumeration) so `liqopt verify` can catch regressions
without the test suite installed.
"""

from __future__ import annotations

import itertools

import numpy as np

from .data import SyntheticDayConfig, generate_day
from .ledger import (
    Batch,
    Ordering,
    Payment,
    aggregate_mndp,
    net_position_series,
    required_liquidity,
    settle_and_carry,
)
from .pipeline import run_day
from .qubo import (
    InfeasibilityReport,
    build_cqm,
    build_qubo,
    decode_assignment,
    encode_ordering,
    energy,
)
from .solvers import SolverConfig, solve_exact

# Reference decode fixture: a 7x7 permutation matrix whose order starts with
# the fourth queued payment, and its expected processing order (0-based).
REFERENCE_MATRIX = (
    (0, 1, 0, 0, 0, 0, 0),
    (0, 0, 0, 0, 1, 0, 0),
    (0, 0, 0, 0, 0, 1, 0),
    (1, 0, 0, 0, 0, 0, 0),
    (0, 0, 0, 1, 0, 0, 0),
    (0, 0, 0, 0, 0, 0, 1),
    (0, 0, 1, 0, 0, 0, 0),
)
REFERENCE_ORDER = (3, 0, 6, 4, 1, 2, 5)


def _random_batch(rng: np.random.Generator, n: int, npart: int) -> Batch:
    pids = [f"B{k}" for k in range(npart)]
    payments = []
    for i in range(n):
        a, b = rng.choice(npart, size=2, replace=False)
        value = max(1, int(round((rng.pareto(1.5) + 1.0) * 5)))
        payments.append(Payment(f"p{i}", pids[a], pids[b], value, float(i)))
    return Batch(tuple(payments))


def _brute_required(batch: Batch, ordering: Ordering) -> dict[str, int]:
    """Independent evaluator: rebuild each prefix sum from scratch."""
    out: dict[str, int] = {}
    for pid in batch.participants():
        worst = 0
        for t in range(len(batch) + 1):
            total = 0
            for idx in ordering.permutation[:t]:
                p = batch.payments[idx]
                if p.payer == pid:
                    total -= p.value
                if p.payee == pid:
                    total += p.value
            worst = min(worst, total)
        out[pid] = -worst
    return out


def run_checks(seed: int = 0):
    """Yield (name, passed, detail) for every built-in check."""
    rng = np.random.default_rng(seed)

    batches = [_random_batch(rng, int(rng.integers(1, 7)), int(rng.integers(2, 5)))
               for _ in range(25)]

    ok = True
    for batch in batches:
        order = Ordering(tuple(rng.permutation(len(batch)).astype(int)))
        series = net_position_series(batch, order)
        totals = {sum(col) for col in zip(*series.values())}
        ok &= totals == {0}
    yield "conservation: positions sum to zero at every step", ok, ""

    ok = True
    for batch in batches:
        ends = set()
        for perm in itertools.permutations(range(len(batch))):
            series = net_position_series(batch, Ordering(perm))
            ends.add(tuple(series[pid][-1] for pid in sorted(series)))
            if len(batch) > 4:
                break
        ok &= len(ends) == 1
    yield "endpoint invariance: final positions ignore order", ok, ""

    ok = True
    for batch in batches:
        order = Ordering(tuple(rng.permutation(len(batch)).astype(int)))
        mine = required_liquidity(batch, order).required_liquidity
        ok &= mine == _brute_required(batch, order)
    yield "required liquidity matches brute-force recomputation", ok, ""

    ok = True
    for batch in batches:
        if len(batch) > 5:
            continue
        exact = solve_exact(batch)
        best = min(
            required_liquidity(batch, Ordering(p)).aggregate_cost
            for p in itertools.permutations(range(len(batch)))
        )
        fifo = required_liquidity(batch, Ordering.identity(len(batch))).aggregate_cost
        ok &= exact.aggregate_cost == best <= fifo
    yield "exact solver equals full enumeration, never above FIFO", ok, ""

    matrix = np.array(REFERENCE_MATRIX).reshape(-1)
    model = build_qubo(_random_batch(np.random.default_rng(seed + 1), 7, 3))
    flat = np.zeros(model.num_vars, dtype=np.int8)
    flat[: 49] = matrix
    decoded = decode_assignment(flat, model)
    ok = isinstance(decoded, Ordering) and decoded.permutation == REFERENCE_ORDER
    bad = flat.copy()
    bad[model.assignment_index(1, 4)] = 0
    bad[model.assignment_index(1, 1)] = 1
    report = decode_assignment(bad, model)
    ok &= isinstance(report, InfeasibilityReport) and 1 in report.violated_cols
    yield "reference 7x7 decode fixture and duplicate detection", ok, ""

    ok = True
    for batch in batches:
        if len(batch) > 5:
            continue
        model = build_qubo(batch)
        for perm in itertools.permutations(range(len(batch))):
            order = Ordering(perm)
            bits = encode_ordering(order, batch, None, model)
            roundtrip = decode_assignment(bits, model)
            cost = required_liquidity(batch, order).aggregate_cost
            naive = model.offset
            naive += sum(c for i, c in model.linear.items() if bits[i])
            naive += sum(c for (i, j), c in model.quadratic.items() if bits[i] and bits[j])
            ok &= roundtrip == order
            ok &= energy(model, bits) == cost == naive
    yield "encode/decode round-trip; energy equals exact cost", ok, ""

    batch = batches[0]
    cqm = build_cqm(batch)
    n = len(batch)
    npart = len(batch.participants())
    ok = (
        len(cqm.permutation_constraints) == 2 * n
        and len(cqm.balance_constraints) == npart * n
    )
    result = required_liquidity(batch, Ordering.identity(n))
    ok &= cqm.violations(result.ordering, result.required_liquidity) == []
    yield "constrained-model shape and feasibility of exact top-ups", ok, ""

    day = generate_day(SyntheticDayConfig(num_participants=6, target_volume=120,
                                          value_scale=50, seed=seed))
    cfg = SolverConfig(kind="local-search", num_samples=2, seed=seed)
    run = run_day(day, "day-race", cfg, batch_size=8)
    ok = all(r.savings >= 0 for r in run.records)
    fifo_run = run_day(day, "day-race", SolverConfig(kind="fifo", seed=seed), batch_size=8)
    whole = settle_and_carry(
        Batch(tuple(day)), Ordering.identity(len(day)), None
    )
    ok &= fifo_run.fifo_ledger == whole
    ok &= aggregate_mndp(fifo_run.solver_ledger) == aggregate_mndp(whole)
    yield "pipeline guard non-negative savings; concatenation identity", ok, ""
