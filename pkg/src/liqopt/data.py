"""Transaction-log ingestion and synthetic payment-day generation.

The file format is a plain CSV with header ``timestamp,payer_id,payee_id,
value_cents``. Timestamps are seconds since midnight (or ISO-8601, which is
converted on load). The generator draws arrivals from an inhomogeneous
Poisson process with piecewise-constant hourly rates and payment values
from a Pareto distribution, both fully determined by the seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .ledger import Money, Payment

CSV_HEADER = ("timestamp", "payer_id", "payee_id", "value_cents")

# Hourly arrival-rate multipliers over the trading window. The first hour
# carries the morning rush; the tail hours taper off.
DEFAULT_ARRIVAL_PROFILE = (2.5, 1.2, 1.1, 1.0, 1.0, 1.0, 1.0, 1.0, 0.8, 0.5)


@dataclass(frozen=True)
class SyntheticDayConfig:
    """Parameters for one generated day of payments."""

    num_participants: int = 14
    target_volume: int = 5000
    value_shape: float = 1.5
    value_scale: Money = 10_000
    arrival_profile: tuple[float, ...] = DEFAULT_ARRIVAL_PROFILE
    payer_weights: tuple[float, ...] | None = None
    payee_weights: tuple[float, ...] | None = None
    day_start_hour: int = 8
    day_end_hour: int = 18
    seed: int = 0

    def __post_init__(self):
        if self.num_participants < 2:
            raise ValidationError("need at least two participants")
        if self.target_volume < 0:
            raise ValidationError("target_volume must be >= 0")
        if self.value_shape <= 1.0:
            raise ValidationError("value_shape must exceed 1")
        if self.value_scale < 1:
            raise ValidationError("value_scale must be at least one cent")
        if not 0 <= self.day_start_hour < self.day_end_hour <= 24:
            raise ValidationError("invalid day window")
        hours = self.day_end_hour - self.day_start_hour
        if len(self.arrival_profile) != hours:
            raise ValidationError(
                f"arrival_profile needs one multiplier per hour ({hours})"
            )
        if min(self.arrival_profile) < 0 or max(self.arrival_profile) <= 0:
            raise ValidationError(
                "rate multipliers must be non-negative with at least one positive"
            )
        for name, w in (("payer_weights", self.payer_weights),
                        ("payee_weights", self.payee_weights)):
            if w is None:
                continue
            if len(w) != self.num_participants:
                raise ValidationError(f"{name} needs one weight per participant")
            if min(w) < 0 or max(w) <= 0:
                raise ValidationError(
                    f"{name} must be non-negative and not all zero"
                )

    def participant_ids(self) -> tuple[str, ...]:
        return tuple(f"B{k:02d}" for k in range(1, self.num_participants + 1))


def _parse_timestamp(text: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(f"unparseable timestamp {text!r}", line) from None
    midnight = dt.replace(hour=0, minute=0, second=0, microsecond=0)
    return (dt - midnight).total_seconds()


def load_day(path: str | Path) -> list[Payment]:
    """Read and validate one day of payments, sorted by timestamp.

    The sort is stable, so rows with equal timestamps keep file order.
    Malformed rows are rejected with their line number.
    """
    path = Path(path)
    payments: list[Payment] = []
    intern: dict[str, str] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("empty file: header row required", 1) from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValidationError(
                f"bad header {header!r}; expected {','.join(CSV_HEADER)}", 1
            )
        for line, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise ValidationError(f"expected 4 fields, got {len(row)}", line)
            ts = _parse_timestamp(row[0].strip(), line)
            payer = intern.setdefault(row[1].strip(), row[1].strip())
            payee = intern.setdefault(row[2].strip(), row[2].strip())
            if not payer or not payee:
                raise ValidationError("empty participant id", line)
            if payer == payee:
                raise ValidationError(f"self-payment by {payer!r}", line)
            try:
                value = int(row[3].strip())
            except ValueError:
                raise ValidationError(f"bad value {row[3]!r}", line) from None
            if value <= 0:
                raise ValidationError(f"non-positive value {value}", line)
            payments.append(Payment("", payer, payee, value, ts))
    payments.sort(key=lambda p: p.submitted_at)
    return [
        Payment(f"p{k:06d}", p.payer, p.payee, p.value, p.submitted_at)
        for k, p in enumerate(payments)
    ]


def save_day(payments: Iterable[Payment], path: str | Path) -> None:
    """Write payments in the CSV schema, timestamps at millisecond precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for p in payments:
            writer.writerow([f"{p.submitted_at:.3f}", p.payer, p.payee, p.value])


def generate_day(config: SyntheticDayConfig) -> list[Payment]:
    """Draw one synthetic day of payments.

    Hourly arrival counts are Poisson with rates shaped by the profile,
    times uniform within each hour, values ``value_scale`` times a Pareto
    draw rounded to cents, payers drawn by weight and payees uniformly
    (or by weight) among the rest. Byte-identical for a fixed seed.
    """
    rng = np.random.default_rng(config.seed)
    profile = np.asarray(config.arrival_profile, dtype=float)
    hourly_mean = config.target_volume * profile / profile.sum()
    counts = rng.poisson(hourly_mean)
    times_ms: list[int] = []
    for h, count in enumerate(counts):
        base = (config.day_start_hour + h) * 3600.0
        offsets = rng.uniform(0.0, 3600.0, size=int(count))
        times_ms.extend(int(round((base + off) * 1000)) for off in offsets)
    times_ms.sort()
    total = len(times_ms)

    # Pareto(shape) with support [1, inf); numpy's pareto draws the shifted
    # (Lomax) form, hence the +1.
    raw = (rng.pareto(config.value_shape, size=total) + 1.0) * config.value_scale
    values = np.maximum(1, np.rint(raw).astype(np.int64))

    npart = config.num_participants
    payer_w = np.asarray(
        config.payer_weights if config.payer_weights is not None else [1.0] * npart,
        dtype=float,
    )
    payers = rng.choice(npart, size=total, p=payer_w / payer_w.sum())
    if config.payee_weights is None:
        # uniform among the other participants: shift draws past the payer
        shifted = rng.integers(0, npart - 1, size=total)
        payees = shifted + (shifted >= payers)
    else:
        payee_w = np.asarray(config.payee_weights, dtype=float)
        payees = np.empty(total, dtype=np.int64)
        for k in range(total):
            w = payee_w.copy()
            w[payers[k]] = 0.0
            if w.sum() <= 0:
                w = np.ones(npart)
                w[payers[k]] = 0.0
            payees[k] = rng.choice(npart, p=w / w.sum())

    ids = config.participant_ids()
    return [
        Payment(
            id=f"p{k:06d}",
            payer=ids[int(payers[k])],
            payee=ids[int(payees[k])],
            value=int(values[k]),
            submitted_at=times_ms[k] / 1000.0,
        )
        for k in range(total)
    ]
