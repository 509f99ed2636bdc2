"""Exact money-ledger accounting for batch settlement.

All amounts are signed integer cents; arithmetic is exact and never rounds.
For a fixed settlement order the minimum liquidity top-up each participant
needs (its required liquidity) has a closed form: the depth of the running
minimum of its available liquidity over the batch. These functions are the
classical objective oracle that every solver result is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import UnknownParticipantError, ValidationError

# Money is a signed count of cents. Plain ints keep every comparison exact.
Money = int


@dataclass(frozen=True)
class Payment:
    """One indivisible transfer request."""

    id: str
    payer: str
    payee: str
    value: Money
    submitted_at: float = 0.0

    def __post_init__(self):
        if self.payer == self.payee:
            raise ValidationError(f"payment {self.id!r}: payer equals payee")
        if self.value <= 0:
            raise ValidationError(f"payment {self.id!r}: value must be positive")


@dataclass(frozen=True)
class ParticipantState:
    """A bank's running net position and historical max net debit position.

    ``mndp`` is the deepest negative net position reached so far; it equals
    the collateral already posted, so ``net_position + mndp`` is the
    liquidity available before any top-up.
    """

    participant: str
    net_position: Money = 0
    mndp: Money = 0

    def __post_init__(self):
        if self.mndp < 0:
            raise ValidationError(f"{self.participant!r}: mndp must be >= 0")

    @property
    def available(self) -> Money:
        return self.net_position + self.mndp


@dataclass(frozen=True)
class Batch:
    """An ordered window of payments taken from the day's arrival stream."""

    payments: tuple[Payment, ...]
    index: int = 0

    def __len__(self) -> int:
        return len(self.payments)

    @property
    def wait_time(self) -> float:
        """Seconds between the first and last arrival in the window."""
        if not self.payments:
            return 0.0
        return self.payments[-1].submitted_at - self.payments[0].submitted_at

    def participants(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for p in self.payments:
            seen.setdefault(p.payer)
            seen.setdefault(p.payee)
        return tuple(sorted(seen))


@dataclass(frozen=True)
class Ordering:
    """A bijective settlement order: ``permutation[t]`` is the 0-based index
    of the payment settled at slot t."""

    permutation: tuple[int, ...]

    def __post_init__(self):
        n = len(self.permutation)
        if sorted(self.permutation) != list(range(n)):
            raise ValidationError("ordering is not a permutation of 0..n-1")

    def __len__(self) -> int:
        return len(self.permutation)

    @classmethod
    def identity(cls, n: int) -> "Ordering":
        return cls(tuple(range(n)))

    @property
    def is_identity(self) -> bool:
        return self.permutation == tuple(range(len(self.permutation)))


@dataclass(frozen=True)
class OrderingResult:
    """A settlement order with its per-participant required liquidity."""

    ordering: Ordering
    required_liquidity: dict[str, Money]
    aggregate_cost: Money

    def __post_init__(self):
        if any(v < 0 for v in self.required_liquidity.values()):
            raise ValidationError("required liquidity entries must be >= 0")
        if sum(self.required_liquidity.values()) != self.aggregate_cost:
            raise ValidationError("aggregate cost does not match entries")


StateMap = Mapping[str, ParticipantState]


def _state(start: StateMap | None, participant: str) -> ParticipantState:
    if start is None:
        return ParticipantState(participant)
    got = start.get(participant)
    if got is None:
        return ParticipantState(participant)
    return got


def _check_known(batch: Batch, known: Iterable[str] | None) -> None:
    if known is None:
        return
    universe = frozenset(known)
    for p in batch.payments:
        for pid in (p.payer, p.payee):
            if pid not in universe:
                raise UnknownParticipantError(pid, p.id)


def _check_ordering(batch: Batch, ordering: Ordering) -> None:
    if len(ordering) != len(batch):
        raise ValidationError(
            f"ordering length {len(ordering)} != batch size {len(batch)}"
        )


def net_position_series(
    batch: Batch,
    ordering: Ordering,
    start: StateMap | None = None,
    known_participants: Iterable[str] | None = None,
) -> dict[str, list[Money]]:
    """Net position of every participant after each settlement step.

    Returns, for each participant, the length n+1 series ``[N(0), ..., N(n)]``
    where N(t) is the balance after the first t payments of the ordering.
    Participants present only in ``start`` get a constant series.
    """
    _check_ordering(batch, ordering)
    _check_known(batch, known_participants)
    series: dict[str, list[Money]] = {}
    steps = len(batch) + 1
    for pid in batch.participants():
        series[pid] = [_state(start, pid).net_position] * steps
    if start is not None:
        for pid, st in start.items():
            series.setdefault(pid, [st.net_position] * steps)
    for t, idx in enumerate(ordering.permutation, start=1):
        p = batch.payments[idx]
        for pid in series:
            series[pid][t] = series[pid][t - 1]
        series[p.payer][t] -= p.value
        series[p.payee][t] += p.value
    return series


def required_liquidity(
    batch: Batch,
    ordering: Ordering,
    start: StateMap | None = None,
    known_participants: Iterable[str] | None = None,
) -> OrderingResult:
    """Minimum liquidity top-up per participant for a given order.

    For each participant the top-up is the depth of the running minimum of
    ``net_position + mndp`` over settlement steps t = 0..n, floored at zero.
    This is the smallest amount keeping available liquidity non-negative
    throughout, computed in closed form rather than by search.
    """
    _check_ordering(batch, ordering)
    _check_known(batch, known_participants)
    avail: dict[str, Money] = {}
    low: dict[str, Money] = {}
    for pid in batch.participants():
        a = _state(start, pid).available
        avail[pid] = a
        low[pid] = a
    for idx in ordering.permutation:
        p = batch.payments[idx]
        a = avail[p.payer] - p.value
        avail[p.payer] = a
        if a < low[p.payer]:
            low[p.payer] = a
        avail[p.payee] += p.value
    required = {pid: max(0, -m) for pid, m in low.items()}
    return OrderingResult(ordering, required, sum(required.values()))


def settle_and_carry(
    batch: Batch,
    ordering: Ordering,
    start: StateMap | None = None,
    known_participants: Iterable[str] | None = None,
) -> dict[str, ParticipantState]:
    """Settle a batch and return the post-batch states.

    Each settled participant ends with its final net position and an mndp
    grown by its required liquidity, so consecutive batches accumulate the
    same running minimum a single concatenated pass would. Participants not
    in the batch are carried through untouched.
    """
    result = required_liquidity(batch, ordering, start, known_participants)
    out: dict[str, ParticipantState] = {}
    if start is not None:
        out.update(start)
    position: dict[str, Money] = {
        pid: _state(start, pid).net_position for pid in batch.participants()
    }
    for p in batch.payments:
        position[p.payer] -= p.value
        position[p.payee] += p.value
    for pid, pos in position.items():
        out[pid] = ParticipantState(
            participant=pid,
            net_position=pos,
            mndp=_state(start, pid).mndp + result.required_liquidity[pid],
        )
    return out


def aggregate_mndp(states: StateMap) -> Money:
    """Sum of max net debit positions across participants."""
    return sum(st.mndp for st in states.values())


class BatchEvaluator:
    """Array-backed cost evaluation for tight solver loops.

    Precomputes integer arrays for one (batch, start) pair so each candidate
    permutation costs O(n + participants) to score. Results agree bit-exactly
    with :func:`required_liquidity`; solvers still report final answers
    through that function.
    """

    def __init__(self, batch: Batch, start: StateMap | None = None):
        self.batch = batch
        self.participants = batch.participants()
        index = {pid: k for k, pid in enumerate(self.participants)}
        self.payer = [index[p.payer] for p in batch.payments]
        self.payee = [index[p.payee] for p in batch.payments]
        self.value = [p.value for p in batch.payments]
        self.start_available = [
            _state(start, pid).available for pid in self.participants
        ]

    def cost(self, permutation: Sequence[int]) -> Money:
        avail = list(self.start_available)
        low = list(self.start_available)
        payer, payee, value = self.payer, self.payee, self.value
        for idx in permutation:
            k = payer[idx]
            a = avail[k] - value[idx]
            avail[k] = a
            if a < low[k]:
                low[k] = a
            avail[payee[idx]] += value[idx]
        total = 0
        for m in low:
            if m < 0:
                total -= m
        return total
