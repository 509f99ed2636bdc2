"""Report tables and plot-ready series, computed from a run manifest.

Every number here is recomputed from the manifest dict alone, so an
archived manifest is sufficient to reproduce all reporting output. Money
stays in integer cents; shares and correlations are rounded to a fixed
precision recorded in the report, and statistics that are undefined
(fewer than two points, zero variance, zero savings) are emitted as
explicit nulls rather than silent zeros.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ValidationError
from .ledger import Batch, Money, Ordering, Payment, net_position_series
from .pipeline import DayRun, to_manifest

REPORT_SCHEMA_VERSION = 1
SHARE_PRECISION = 9

SERIES_KINDS = ("mndp-vs-time", "batch-balances", "mndp-change-bars")


@dataclass
class ParticipantRow:
    participant: str
    savings_cents: Money
    savings_share: float | None
    incoming_value_cents: Money
    incoming_share: float | None
    outgoing_value_cents: Money
    outgoing_share: float | None


@dataclass
class RunReport:
    scenario: str
    value_settled_cents: Money
    total_batches: int
    improved_batches: int
    no_mndp_movement_batches: int
    not_improvable_batches: int
    end_of_day_savings_cents: Money
    total_batch_savings_cents: Money
    mean_wait_time: float | None
    mean_solve_time: float | None
    per_batch: list[dict]
    per_participant: list[ParticipantRow]
    savings_vs_incoming_r: float | None
    savings_vs_outgoing_r: float | None
    share_precision: int = SHARE_PRECISION
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        data = asdict(self)
        data["per_participant"] = [asdict(row) for row in self.per_participant]
        return data


def _pearson(xs: list[float], ys: list[float]) -> float | None:
    """Plain Pearson correlation; None when undefined."""
    n = len(xs)
    if n < 2:
        return None
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return None
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def _round_share(x: float) -> float:
    return round(x, SHARE_PRECISION)


def report_from_manifest(manifest: dict) -> RunReport:
    """Compute the full report from a manifest dict."""
    batches = manifest["batches"]
    classifications = [b["classification"] for b in batches]
    savings = [b["fifo"]["cost_cents"] - b["chosen"]["cost_cents"] for b in batches]

    per_batch = [
        {
            "index": b["index"],
            "savings_cents": s,
            "classification": b["classification"],
            "wait_time": b["wait_time"],
            "solve_time": b["solve_time"],
        }
        for b, s in zip(batches, savings)
    ]

    incoming: dict[str, Money] = {}
    outgoing: dict[str, Money] = {}
    saved: dict[str, Money] = {}
    for b in batches:
        for p in b["payments"]:
            incoming[p["payee"]] = incoming.get(p["payee"], 0) + p["value_cents"]
            outgoing[p["payer"]] = outgoing.get(p["payer"], 0) + p["value_cents"]
            incoming.setdefault(p["payer"], 0)
            outgoing.setdefault(p["payee"], 0)
        for pid, need in b["fifo"]["required"].items():
            saved[pid] = saved.get(pid, 0) + need - b["chosen"]["required"].get(pid, 0)
    participants = sorted(incoming)
    total_in = sum(incoming.values())
    total_out = sum(outgoing.values())
    total_saved = sum(saved.get(pid, 0) for pid in participants)

    rows: list[ParticipantRow] = []
    for pid in participants:
        rows.append(
            ParticipantRow(
                participant=pid,
                savings_cents=saved.get(pid, 0),
                savings_share=(
                    _round_share(saved.get(pid, 0) / total_saved)
                    if total_saved > 0
                    else None
                ),
                incoming_value_cents=incoming[pid],
                incoming_share=(
                    _round_share(incoming[pid] / total_in) if total_in > 0 else None
                ),
                outgoing_value_cents=outgoing[pid],
                outgoing_share=(
                    _round_share(outgoing[pid] / total_out) if total_out > 0 else None
                ),
            )
        )

    active = [
        pid for pid in participants if incoming[pid] + outgoing[pid] > 0
    ]
    if total_saved > 0 and len(active) >= 2:
        shares = [saved.get(pid, 0) / total_saved for pid in active]
        r_in = _pearson(shares, [incoming[pid] / total_in for pid in active])
        r_out = _pearson(shares, [outgoing[pid] / total_out for pid in active])
    else:
        r_in = r_out = None

    wait_times = [b["wait_time"] for b in batches]
    solve_times = [b["solve_time"] for b in batches]
    return RunReport(
        scenario=manifest["scenario"],
        value_settled_cents=manifest["total_value_cents"],
        total_batches=len(batches),
        improved_batches=classifications.count("improved"),
        no_mndp_movement_batches=classifications.count("no-mndp-movement"),
        not_improvable_batches=classifications.count("not-improvable"),
        end_of_day_savings_cents=manifest["end_of_day_savings_cents"],
        total_batch_savings_cents=sum(savings),
        mean_wait_time=sum(wait_times) / len(wait_times) if wait_times else None,
        mean_solve_time=sum(solve_times) / len(solve_times) if solve_times else None,
        per_batch=per_batch,
        per_participant=rows,
        savings_vs_incoming_r=(
            _round_share(r_in) if r_in is not None else None
        ),
        savings_vs_outgoing_r=(
            _round_share(r_out) if r_out is not None else None
        ),
    )


def report_day(run: DayRun) -> RunReport:
    """Report for an in-memory run (serialized first, so the manifest is
    provably sufficient)."""
    return report_from_manifest(to_manifest(run))


# ---------------------------------------------------------------------------
# Plot-ready series


def _batch_from_manifest(entry: dict) -> Batch:
    return Batch(
        tuple(
            Payment(
                id=p["id"],
                payer=p["payer"],
                payee=p["payee"],
                value=p["value_cents"],
                submitted_at=p["submitted_at"],
            )
            for p in entry["payments"]
        ),
        index=entry["index"],
    )


def emit_series(
    manifest: dict, kind: str, batch_index: int | None = None
) -> tuple[list[str], list[list]]:
    """Columnar data for one plot kind: (header, rows).

    mndp-vs-time: per batch, each arm's aggregate max net debit position.
    batch-balances: per participant, positions after each settlement step
    of one batch, under both the arrival order and the chosen order.
    mndp-change-bars: per batch and participant, the top-up both orders
    demanded (the per-participant mndp increase).
    """
    if kind not in SERIES_KINDS:
        raise ValidationError(f"unknown series kind {kind!r}")
    batches = manifest["batches"]

    if kind == "mndp-vs-time":
        header = [
            "batch_index",
            "end_timestamp",
            "fifo_arm_mndp_cents",
            "solver_arm_mndp_cents",
        ]
        rows = [
            [b["index"], b["end_timestamp"], b["fifo_arm_mndp_cents"],
             b["solver_arm_mndp_cents"]]
            for b in batches
        ]
        return header, rows

    if kind == "mndp-change-bars":
        header = ["batch_index", "participant", "fifo_delta_cents", "chosen_delta_cents"]
        rows = []
        for b in batches:
            pids = sorted(set(b["fifo"]["required"]) | set(b["chosen"]["required"]))
            for pid in pids:
                rows.append(
                    [
                        b["index"],
                        pid,
                        b["fifo"]["required"].get(pid, 0),
                        b["chosen"]["required"].get(pid, 0),
                    ]
                )
        return header, rows

    # batch-balances
    if batch_index is None:
        raise ValidationError("batch-balances requires a batch index")
    matches = [b for b in batches if b["index"] == batch_index]
    if not matches:
        raise ValidationError(f"batch index {batch_index} out of range")
    entry = matches[0]
    batch = _batch_from_manifest(entry)
    n = len(batch)
    fifo_series = net_position_series(batch, Ordering.identity(n))
    chosen_series = net_position_series(
        batch, Ordering(tuple(entry["chosen"]["ordering"]))
    )
    header = ["participant", "step", "fifo_balance_cents", "chosen_balance_cents"]
    rows = []
    for pid in sorted(fifo_series):
        for step in range(n + 1):
            rows.append([pid, step, fifo_series[pid][step], chosen_series[pid][step]])
    return header, rows


def format_csv(header: list[str], rows: list[list]) -> str:
    """Render series output; money columns are integer cents throughout."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"
