"""Full-day batch settlement with a FIFO-versus-optimizer horse race.

Payments are cut into fixed-size arrival windows. Each batch is settled
twice from the scenario-appropriate start state: once in arrival order and
once in the order a solver proposes. Two race styles are supported:

* day-race: the FIFO arm and the optimizer arm each carry their own ledger
  through the whole day. Both arms start the day identically; afterwards
  each evolves only from its own chosen orderings.
* batch-race: before every batch both arms are reset to the same state,
  taken from the FIFO trajectory, so each batch is an isolated comparison
  against what the unmodified system would have done.

A per-batch guard (on by default) falls back to arrival order whenever the
solver's ordering would cost more than FIFO from the same start state, so
per-batch savings can never be negative. Solver failures also settle FIFO
and are logged; a day run never aborts mid-day.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import ValidationError
from .ledger import (
    Batch,
    Money,
    Ordering,
    OrderingResult,
    ParticipantState,
    Payment,
    aggregate_mndp,
    required_liquidity,
    settle_and_carry,
)
from .qubo import auto_base_unit, build_qubo
from .solvers import SolverConfig, select_best, solve_exact, solve_local_search, solve_sa

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1

SCENARIOS = ("day-race", "batch-race")


class BatchClassification(str, Enum):
    """Mutually exclusive batch outcome labels.

    NO_MNDP_MOVEMENT: arrival order needs no top-up, nothing to gain.
    IMPROVED: the solver found a strictly cheaper ordering.
    NOT_IMPROVABLE: some participant's position deepened but no better
    ordering was found (single large payments, one-sided flows, or FIFO
    already optimal).
    """

    NO_MNDP_MOVEMENT = "no-mndp-movement"
    IMPROVED = "improved"
    NOT_IMPROVABLE = "not-improvable"


@dataclass
class BatchRecord:
    """Everything recorded about one settled batch."""

    batch: Batch
    wait_time: float
    solve_time: float
    fifo_result: OrderingResult
    solver_result: OrderingResult
    chosen_result: OrderingResult
    chosen_origin: str  # solver | fifo-passthrough | fifo-fallback | ...
    classification: BatchClassification
    is_partial: bool
    fifo_arm_mndp: Money
    solver_arm_mndp: Money
    end_timestamp: float
    measured_solve_seconds: float = 0.0  # wall clock; kept out of the manifest

    @property
    def savings(self) -> Money:
        return self.fifo_result.aggregate_cost - self.chosen_result.aggregate_cost


@dataclass
class DayRun:
    """Result of replaying one day under a scenario."""

    scenario: str
    batch_size: int
    fallback: bool
    min_solve_size: int
    solve_delay: float
    solver_config: SolverConfig
    records: list[BatchRecord] = field(default_factory=list)
    fifo_ledger: dict[str, ParticipantState] = field(default_factory=dict)
    solver_ledger: dict[str, ParticipantState] = field(default_factory=dict)

    @property
    def end_of_day_savings(self) -> Money:
        """Day-race: gap between the arms' closing aggregate positions.
        Batch-race: sum of per-batch savings (the arms share a trajectory).
        """
        if self.scenario == "day-race":
            return aggregate_mndp(self.fifo_ledger) - aggregate_mndp(self.solver_ledger)
        return sum(r.savings for r in self.records)


def accumulate_batches(payments: Sequence[Payment], batch_size: int) -> list[Batch]:
    """Cut a time-ordered stream into consecutive windows of ``batch_size``.

    The final window may be smaller; it still becomes a batch and the
    caller decides whether it is worth optimizing.
    """
    if batch_size < 1:
        raise ValidationError("batch_size must be >= 1")
    for a, b in zip(payments, payments[1:]):
        if b.submitted_at < a.submitted_at:
            raise ValidationError("payments must be sorted by submitted_at")
    return [
        Batch(tuple(payments[i : i + batch_size]), index=i // batch_size)
        for i in range(0, len(payments), batch_size)
    ]


def classify_batch(
    fifo_result: OrderingResult,
    solver_result: OrderingResult,
    start=None,
) -> BatchClassification:
    """Label a batch from two results computed off identical start states."""
    if fifo_result.aggregate_cost == 0:
        return BatchClassification.NO_MNDP_MOVEMENT
    if solver_result.aggregate_cost < fifo_result.aggregate_cost:
        return BatchClassification.IMPROVED
    return BatchClassification.NOT_IMPROVABLE


def _dispatch_solver(
    batch: Batch, start, config: SolverConfig
) -> OrderingResult | None:
    """Run the configured solver; None means no usable ordering came back."""
    if config.kind == "fifo":
        return required_liquidity(batch, Ordering.identity(len(batch)), start)
    if config.kind == "exact":
        return solve_exact(batch, start, limit=config.exact_limit)
    if config.kind == "local-search":
        samples = solve_local_search(batch, start, config)
        return select_best(samples, batch, start)
    unit = config.base_unit or auto_base_unit(batch, start)
    model = build_qubo(batch, start, base_unit=unit)
    samples = solve_sa(model, config)
    return select_best(samples, batch, start)


def run_day(
    payments: Sequence[Payment],
    scenario: str,
    solver_config: SolverConfig,
    batch_size: int,
    fallback: bool = True,
    min_solve_size: int | None = None,
    solve_delay: float = 0.0,
) -> DayRun:
    """Replay a day of payments as a horse race between FIFO and a solver.

    ``min_solve_size`` defaults to ``batch_size``, so an undersized final
    window settles in arrival order. ``solve_delay`` is the synthetic
    per-batch solver latency recorded in the manifest; wall-clock solve
    times are measured separately and never enter the manifest, keeping
    runs byte-reproducible.
    """
    if scenario not in SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}")
    if min_solve_size is None:
        min_solve_size = batch_size
    run = DayRun(
        scenario=scenario,
        batch_size=batch_size,
        fallback=fallback,
        min_solve_size=min_solve_size,
        solve_delay=solve_delay,
        solver_config=solver_config,
    )
    for batch in accumulate_batches(payments, batch_size):
        n = len(batch)
        identity = Ordering.identity(n)
        is_partial = n < batch_size
        race_start = dict(run.fifo_ledger if scenario == "batch-race" else run.solver_ledger)

        fifo_result = required_liquidity(batch, identity, race_start)

        origin = "solver"
        dispatched = solver_config.kind != "fifo" and n >= min_solve_size
        t0 = time.monotonic()
        if not dispatched:
            solver_result = fifo_result
            origin = "fifo-passthrough" if solver_config.kind == "fifo" else "fifo-undersized"
        else:
            try:
                solved = _dispatch_solver(batch, race_start, solver_config)
                origin = "solver" if solved is not None else "fifo-no-feasible"
            except Exception:
                logger.exception("solver failed on batch %d; settling FIFO", batch.index)
                solved = None
                origin = "fifo-solver-failed"
            if solved is None:
                solver_result = fifo_result
                if origin == "fifo-no-feasible":
                    logger.info(
                        "no feasible sample on batch %d; settling FIFO", batch.index
                    )
            else:
                solver_result = solved
        measured = time.monotonic() - t0

        if fallback and solver_result.aggregate_cost > fifo_result.aggregate_cost:
            chosen, origin = fifo_result, "fifo-fallback"
        else:
            chosen = solver_result

        classification = classify_batch(fifo_result, solver_result, race_start)

        run.fifo_ledger = settle_and_carry(batch, identity, run.fifo_ledger)
        if scenario == "day-race":
            run.solver_ledger = settle_and_carry(
                batch, chosen.ordering, run.solver_ledger
            )
        else:
            run.solver_ledger = settle_and_carry(batch, chosen.ordering, race_start)

        run.records.append(
            BatchRecord(
                batch=batch,
                wait_time=batch.wait_time,
                solve_time=solve_delay if dispatched else 0.0,
                fifo_result=fifo_result,
                solver_result=solver_result,
                chosen_result=chosen,
                chosen_origin=origin,
                classification=classification,
                is_partial=is_partial,
                fifo_arm_mndp=aggregate_mndp(run.fifo_ledger),
                solver_arm_mndp=aggregate_mndp(run.solver_ledger),
                end_timestamp=batch.payments[-1].submitted_at if n else 0.0,
                measured_solve_seconds=measured,
            )
        )
    return run


# ---------------------------------------------------------------------------
# Manifest serialization


def _result_dict(result: OrderingResult) -> dict:
    return {
        "ordering": list(result.ordering.permutation),
        "required": {k: result.required_liquidity[k] for k in sorted(result.required_liquidity)},
        "cost_cents": result.aggregate_cost,
    }


def _solver_config_dict(config: SolverConfig) -> dict:
    return {
        "kind": config.kind,
        "num_samples": config.num_samples,
        "sweeps": config.sweeps,
        "initial_temperature": config.initial_temperature,
        "final_temperature": config.final_temperature,
        "neighborhood": config.neighborhood,
        "seed": config.seed,
        "time_limit": config.time_limit,
        "exact_limit": config.exact_limit,
        "base_unit": config.base_unit,
    }


def to_manifest(run: DayRun) -> dict:
    """Plain-data image of a run: everything reports need, nothing that
    varies between identically-seeded executions."""
    payments_total = sum(
        p.value for r in run.records for p in r.batch.payments
    )
    batches = []
    for r in run.records:
        batches.append(
            {
                "index": r.batch.index,
                "payments": [
                    {
                        "id": p.id,
                        "payer": p.payer,
                        "payee": p.payee,
                        "value_cents": p.value,
                        "submitted_at": p.submitted_at,
                    }
                    for p in r.batch.payments
                ],
                "wait_time": r.wait_time,
                "solve_time": r.solve_time,
                "fifo": _result_dict(r.fifo_result),
                "solver": _result_dict(r.solver_result),
                "chosen": _result_dict(r.chosen_result),
                "chosen_origin": r.chosen_origin,
                "classification": r.classification.value,
                "is_partial": r.is_partial,
                "fifo_arm_mndp_cents": r.fifo_arm_mndp,
                "solver_arm_mndp_cents": r.solver_arm_mndp,
                "end_timestamp": r.end_timestamp,
            }
        )
    final = {}
    for arm, ledger in (("fifo_arm", run.fifo_ledger), ("solver_arm", run.solver_ledger)):
        final[arm] = {
            pid: {"net_position": st.net_position, "mndp": st.mndp}
            for pid, st in sorted(ledger.items())
        }
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "scenario": run.scenario,
        "batch_size": run.batch_size,
        "fallback": run.fallback,
        "min_solve_size": run.min_solve_size,
        "solve_delay_seconds": run.solve_delay,
        "solver": _solver_config_dict(run.solver_config),
        "seed": run.solver_config.seed,
        "num_payments": sum(len(r.batch) for r in run.records),
        "total_value_cents": payments_total,
        "end_of_day_savings_cents": run.end_of_day_savings,
        "batches": batches,
        "final_states": final,
    }


def write_manifest(run: DayRun, path: str | Path) -> None:
    """Serialize deterministically: sorted keys, fixed separators."""
    Path(path).write_text(dumps_manifest(to_manifest(run)))


def dumps_manifest(manifest: dict) -> str:
    return json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n"


def load_manifest(path: str | Path) -> dict:
    manifest = json.loads(Path(path).read_text())
    version = manifest.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported manifest schema_version {version!r}"
        )
    return manifest
