"""Binary-optimization encodings of the batch reordering problem.

Two forms are built from the same batch:

* a constrained quadratic model: minimize the sum of per-participant
  liquidity top-ups subject to one inequality per (participant, slot) and
  2n one-hot equalities forcing the assignment block to be a permutation;
* an unconstrained quadratic (QUBO) form where each inequality becomes a
  squared penalty with a non-negative slack, and every bounded integer
  (top-ups and slacks) is expanded into weighted binary bits.

The assignment block uses one binary variable per (payment, slot) pair:
x[i, t] = 1 means payment i settles at slot t. Top-up bits carry weights
``base_unit * 2**j``; slack bits always carry single-cent weights so a
feasible ordering encoded with its exact top-ups has zero penalty energy
regardless of the top-up granularity.

Penalty expansion is done with per-pair closed forms instead of literally
squaring each slot's constraint: a cross term between slots tau and sigma
appears in every constraint with t >= max(tau, sigma), so its accumulated
coefficient is the pair product times ``n - max(tau, sigma) + 1``. This
keeps model build time polynomial in the count of emitted coefficients.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EncodingError, ValidationError
from .ledger import (
    Batch,
    Money,
    Ordering,
    StateMap,
    _state,
    required_liquidity,
)

BinaryAssignment = np.ndarray  # 1-d array of 0/1, length num_vars


@dataclass(frozen=True)
class VarTag:
    """Semantic label of one binary variable.

    kind "x": assignment bit for (payment, slot); kind "b": liquidity
    top-up bit (participant, bit); kind "s": slack bit (participant, slot,
    bit). ``weight`` is the cent value the bit contributes when set.
    """

    kind: str
    payment: int | None = None
    slot: int | None = None
    participant: str | None = None
    bit: int | None = None
    weight: Money = 1


@dataclass
class ModelStats:
    """Construction-time accounting used by scaling checks."""

    balance_linear_terms: int = 0
    balance_quadratic_terms: int = 0
    num_assignment_vars: int = 0
    num_liquidity_bits: int = 0
    num_slack_bits: int = 0


@dataclass
class QuboModel:
    """Upper-triangular quadratic objective over binary variables."""

    num_vars: int
    linear: dict[int, float]
    quadratic: dict[tuple[int, int], float]
    offset: float
    var_registry: tuple[VarTag, ...]
    batch_size: int = 0
    base_unit: Money = 1
    penalty_balance: float = 1.0
    penalty_onehot: float = 1.0
    stats: ModelStats = field(default_factory=ModelStats)

    def assignment_index(self, payment: int, slot: int) -> int:
        return payment * self.batch_size + slot


@dataclass(frozen=True)
class CqmConstraint:
    """One linear constraint: terms . vars + constant (sense) 0."""

    label: str
    terms: dict[str, Money]
    constant: Money
    sense: str  # "==" or ">="


@dataclass
class CqmModel:
    """Objective plus explicit constraints over named variables.

    Variable names: "x[i,t]" assignment bits, "b[pid]" integer top-ups.
    """

    batch_size: int
    participants: tuple[str, ...]
    objective: dict[str, Money]
    permutation_constraints: list[CqmConstraint]
    balance_constraints: list[CqmConstraint]

    def violations(
        self, ordering: Ordering, required: Mapping[str, Money]
    ) -> list[str]:
        """Labels of constraints violated by an ordering with given top-ups."""
        values: dict[str, Money] = {}
        for t, i in enumerate(ordering.permutation):
            values[f"x[{i},{t}]"] = 1
        for pid, b in required.items():
            values[f"b[{pid}]"] = b
        bad = []
        for con in self.permutation_constraints + self.balance_constraints:
            lhs = con.constant
            for name, coeff in con.terms.items():
                lhs += coeff * values.get(name, 0)
            ok = lhs == 0 if con.sense == "==" else lhs >= 0
            if not ok:
                bad.append(con.label)
        return bad


def _flows(batch: Batch) -> dict[str, list[tuple[int, Money]]]:
    """Per participant, the (payment index, signed value) list affecting it."""
    flows: dict[str, list[tuple[int, Money]]] = {pid: [] for pid in batch.participants()}
    for i, p in enumerate(batch.payments):
        flows[p.payer].append((i, -p.value))
        flows[p.payee].append((i, p.value))
    return flows


def _bits_for(maximum: Money, unit: Money = 1) -> int:
    """Bit count so that unit * (2**m - 1) >= maximum (at least one bit)."""
    m = 1
    while unit * ((1 << m) - 1) < maximum:
        m += 1
    return m


def build_cqm(batch: Batch, start: StateMap | None = None) -> CqmModel:
    """Constrained form: minimize total top-up subject to balance and
    one-hot constraints.

    Top-up variables exist only for participants that pay at least once;
    a pure payee's balance never decreases, so its top-up is provably zero.
    Balance constraints cover every batch participant at every slot.
    """
    n = len(batch)
    if n == 0:
        raise ValidationError("cannot build a model for an empty batch")
    flows = _flows(batch)
    payers = tuple(sorted({p.payer for p in batch.payments}))
    objective = {f"b[{pid}]": 1 for pid in payers}

    perm_cons: list[CqmConstraint] = []
    for i in range(n):
        terms = {f"x[{i},{t}]": 1 for t in range(n)}
        perm_cons.append(CqmConstraint(f"settle-once[payment={i}]", terms, -1, "=="))
    for t in range(n):
        terms = {f"x[{i},{t}]": 1 for i in range(n)}
        perm_cons.append(CqmConstraint(f"one-per-slot[slot={t}]", terms, -1, "=="))

    bal_cons: list[CqmConstraint] = []
    for pid in batch.participants():
        const = _state(start, pid).available
        for t in range(n):
            terms: dict[str, Money] = {}
            if f"b[{pid}]" in objective:
                terms[f"b[{pid}]"] = 1
            for i, signed in flows[pid]:
                for tau in range(t + 1):
                    terms[f"x[{i},{tau}]"] = signed
            bal_cons.append(
                CqmConstraint(f"balance[{pid},t={t + 1}]", terms, const, ">=")
            )
    return CqmModel(n, batch.participants(), objective, perm_cons, bal_cons)


@dataclass(frozen=True)
class _ParticipantPlan:
    """Precomputed encoding layout for one batch participant."""

    pid: str
    constant: Money            # start net position + start mndp
    flows: tuple[tuple[int, Money], ...]
    b_bits: int                # 0 for pure payees
    b_base: int                # first bit index, -1 if none
    b_cap: Money
    s_bits: int
    s_bases: tuple[int, ...]   # first bit index per slot t=1..n


def _plan_layout(
    batch: Batch,
    start: StateMap | None,
    base_unit: Money,
    slack_bound: Money | None,
) -> tuple[list[_ParticipantPlan], int, list[VarTag]]:
    n = len(batch)
    flows = _flows(batch)
    registry: list[VarTag] = [
        VarTag("x", payment=i, slot=t) for i in range(n) for t in range(n)
    ]
    next_var = n * n

    outgoing = {pid: 0 for pid in batch.participants()}
    incoming = {pid: 0 for pid in batch.participants()}
    for p in batch.payments:
        outgoing[p.payer] += p.value
        incoming[p.payee] += p.value

    plans: list[_ParticipantPlan] = []
    b_layout: list[tuple[str, Money, int, int]] = []
    for pid in batch.participants():
        if outgoing[pid] > 0:
            m = _bits_for(outgoing[pid], base_unit)
            cap = base_unit * ((1 << m) - 1)
            b_base = next_var
            for j in range(m):
                registry.append(
                    VarTag("b", participant=pid, bit=j, weight=base_unit << j)
                )
            next_var += m
        else:
            m, cap, b_base = 0, 0, -1
        b_layout.append((pid, cap, m, b_base))

    for pid, cap, m, b_base in b_layout:
        st = _state(start, pid)
        worst = cap + st.mndp + max(st.net_position, 0) + incoming[pid]
        if slack_bound is not None:
            if slack_bound < worst:
                raise EncodingError(
                    f"slack bound {slack_bound} below worst-case slack {worst} "
                    f"for constraint balance[{pid},t={n}]"
                )
            worst = slack_bound
        k = _bits_for(worst) if worst > 0 else 1
        s_bases = []
        for t in range(1, n + 1):
            s_bases.append(next_var)
            for j in range(k):
                registry.append(
                    VarTag("s", participant=pid, slot=t, bit=j, weight=1 << j)
                )
            next_var += k
        plans.append(
            _ParticipantPlan(
                pid=pid,
                constant=st.available,
                flows=tuple(flows[pid]),
                b_bits=m,
                b_base=b_base,
                b_cap=cap,
                s_bits=k,
                s_bases=tuple(s_bases),
            )
        )
    return plans, next_var, registry


def auto_base_unit(
    batch: Batch, start: StateMap | None = None, max_range_bits: int = 14
) -> Money:
    """Power-of-ten top-up granularity that keeps penalties annealable.

    At one-cent resolution on realistic payment values the balance
    penalties (scaled by 1/unit**2) tower over the one-hot terms and the
    sampler cannot mix the assignment block. Coarsening until the largest
    per-participant slack range fits in ``max_range_bits`` bits restores
    the balance; the exact ledger re-scores decoded orderings, so the lost
    resolution only blurs the search guidance, never the chosen cost.
    """
    worst = 1
    totals: dict[str, Money] = {}
    for p in batch.payments:
        totals[p.payer] = totals.get(p.payer, 0) + 2 * p.value
        totals[p.payee] = totals.get(p.payee, 0) + p.value
    for pid, bound in totals.items():
        st = _state(start, pid)
        worst = max(worst, bound + st.mndp + max(st.net_position, 0))
    unit = 1
    while worst // unit > (1 << max_range_bits) - 1:
        unit *= 10
    return unit


def build_qubo(
    batch: Batch,
    start: StateMap | None = None,
    penalty_balance: float | None = None,
    penalty_onehot: float | None = None,
    base_unit: Money = 1,
    slack_bound: Money | None = None,
) -> QuboModel:
    """Fold the constrained model into a single quadratic penalty objective.

    Default multipliers: the balance penalty is ``1 / base_unit**2`` so a
    one-unit constraint violation costs as much as a one-unit top-up saves,
    and the one-hot penalty is twice the batch's total payment value so any
    duplicated or dropped settlement costs more than the whole objective
    range. Constants are folded into the offset, making energies directly
    comparable across assignments.
    """
    if base_unit < 1:
        raise ValidationError("base_unit must be at least one cent")
    if penalty_balance is None:
        penalty_balance = 1.0 / (base_unit * base_unit)
    n = len(batch)
    if n == 0:
        return QuboModel(0, {}, {}, 0.0, (), 0, base_unit,
                         penalty_balance, penalty_onehot or 1.0)
    if penalty_onehot is None:
        penalty_onehot = float(2 * sum(p.value for p in batch.payments))
    if penalty_balance <= 0 or penalty_onehot <= 0:
        raise ValidationError("penalty multipliers must be positive")

    plans, num_vars, registry = _plan_layout(batch, start, base_unit, slack_bound)
    lam1, lam2 = penalty_balance, penalty_onehot
    linear: dict[int, float] = {}
    quad: dict[tuple[int, int], float] = {}
    offset = 0.0
    stats = ModelStats(num_assignment_vars=n * n)

    def add_lin(i: int, c: float) -> None:
        linear[i] = linear.get(i, 0.0) + c

    def add_quad(i: int, j: int, c: float) -> None:
        if i == j:
            add_lin(i, c)
            return
        key = (i, j) if i < j else (j, i)
        quad[key] = quad.get(key, 0.0) + c

    def xvar(i: int, t: int) -> int:
        return i * n + t

    # One-hot penalties: lam2 * (1 - row sum)^2 and same per column.
    for i in range(n):
        offset += lam2
        for t in range(n):
            add_lin(xvar(i, t), -lam2)
            for u in range(t + 1, n):
                add_quad(xvar(i, t), xvar(i, u), 2.0 * lam2)
    for t in range(n):
        offset += lam2
        for i in range(n):
            add_lin(xvar(i, t), -lam2)
            for j in range(i + 1, n):
                add_quad(xvar(i, t), xvar(j, t), 2.0 * lam2)

    # Balance penalties, accumulated with per-pair slot multiplicities.
    for plan in plans:
        c = plan.constant
        m = len(plan.flows)
        wb = [base_unit << j for j in range(plan.b_bits)]
        stats.num_liquidity_bits += plan.b_bits
        stats.num_slack_bits += plan.s_bits * n
        stats.balance_linear_terms += sum(
            m * t + plan.b_bits + plan.s_bits for t in range(1, n + 1)
        )
        stats.balance_quadratic_terms += sum(
            (m * t + plan.b_bits + plan.s_bits) ** 2 for t in range(1, n + 1)
        )

        offset += lam1 * n * c * c

        # Objective: each set top-up bit costs its own weight.
        # Penalty parts: the top-up square and its cross with the constant
        # appear once per slot, giving n identical copies.
        for j, wj in enumerate(wb):
            add_lin(plan.b_base + j, wj + lam1 * n * (wj * wj + 2 * c * wj))
            for k in range(j + 1, plan.b_bits):
                add_quad(plan.b_base + j, plan.b_base + k, lam1 * n * 2 * wj * wb[k])

        # Flow terms: x[i,tau] appears in constraints t >= tau+1 (0-based tau).
        for a, (i, fa) in enumerate(plan.flows):
            for tau in range(n):
                mult = n - tau  # number of slots t with t > tau (0-based)
                va = xvar(i, tau)
                add_lin(va, lam1 * mult * (fa * fa + 2 * c * fa))
                for j, wj in enumerate(wb):
                    add_quad(plan.b_base + j, va, lam1 * 2 * wj * fa * mult)
            for i2, fb in plan.flows[a + 1:]:
                prod = 2 * fa * fb
                for tau in range(n):
                    va = xvar(i, tau)
                    for sig in range(n):
                        mult = n - max(tau, sig)
                        add_quad(va, xvar(i2, sig), lam1 * prod * mult)
            # Same payment at two different slots: both in row i.
            for tau in range(n):
                va = xvar(i, tau)
                for sig in range(tau + 1, n):
                    mult = n - sig
                    add_quad(va, xvar(i, sig), lam1 * 2 * fa * fa * mult)

        # Slack terms: one independent block per slot t.
        for t1 in range(1, n + 1):
            base = plan.s_bases[t1 - 1]
            for j in range(plan.s_bits):
                wj = 1 << j
                add_lin(base + j, lam1 * (wj * wj - 2 * c * wj))
                for k in range(j + 1, plan.s_bits):
                    add_quad(base + j, base + k, lam1 * 2 * wj * (1 << k))
                for jb, wjb in enumerate(wb):
                    add_quad(plan.b_base + jb, base + j, lam1 * -2 * wjb * wj)
            # Cross with every flow bit at slot tau <= t1.
            for i, fa in plan.flows:
                for tau in range(t1):
                    va = xvar(i, tau)
                    for j in range(plan.s_bits):
                        add_quad(va, base + j, lam1 * -2 * fa * (1 << j))

    linear = {i: c for i, c in linear.items() if c != 0.0}
    quad = {k: c for k, c in quad.items() if c != 0.0}
    return QuboModel(
        num_vars=num_vars,
        linear=linear,
        quadratic=quad,
        offset=offset,
        var_registry=tuple(registry),
        batch_size=n,
        base_unit=base_unit,
        penalty_balance=lam1,
        penalty_onehot=lam2,
        stats=stats,
    )


def energy(model: QuboModel, assignment: Sequence[int] | BinaryAssignment) -> float:
    """Objective value at a bit vector: offset + linear + quadratic terms."""
    bits = np.asarray(assignment)
    if bits.shape != (model.num_vars,):
        raise ValidationError(
            f"assignment length {bits.shape} != num_vars {model.num_vars}"
        )
    total = model.offset
    for i, c in model.linear.items():
        if bits[i]:
            total += c
    for (i, j), c in model.quadratic.items():
        if bits[i] and bits[j]:
            total += c
    return total


@dataclass(frozen=True)
class InfeasibilityReport:
    """Rows/columns of the assignment block whose sums are not one."""

    violated_rows: tuple[int, ...]
    violated_cols: tuple[int, ...]

    def __str__(self) -> str:
        return (
            f"infeasible assignment: rows {list(self.violated_rows)}, "
            f"columns {list(self.violated_cols)} violate one-hot sums"
        )


def decode_assignment(
    assignment: Sequence[int] | BinaryAssignment, model: QuboModel
) -> Ordering | InfeasibilityReport:
    """Extract the settlement order from the assignment block.

    Returns the permutation when every row and column of the x block sums
    to exactly one; otherwise an :class:`InfeasibilityReport` naming the
    violated rows and columns. Top-up and slack bits are ignored: the exact
    ledger recomputes costs from the ordering alone.
    """
    bits = np.asarray(assignment)
    if bits.shape != (model.num_vars,):
        raise ValidationError(
            f"assignment length {bits.shape} != num_vars {model.num_vars}"
        )
    n = model.batch_size
    block = bits[: n * n].reshape(n, n)
    row_sums = block.sum(axis=1)
    col_sums = block.sum(axis=0)
    bad_rows = tuple(int(i) for i in np.flatnonzero(row_sums != 1))
    bad_cols = tuple(int(t) for t in np.flatnonzero(col_sums != 1))
    if bad_rows or bad_cols:
        return InfeasibilityReport(bad_rows, bad_cols)
    perm = tuple(int(np.flatnonzero(block[:, t])[0]) for t in range(n))
    return Ordering(perm)


def encode_ordering(
    ordering: Ordering,
    batch: Batch,
    start: StateMap | None,
    model: QuboModel,
) -> BinaryAssignment:
    """Bit vector for an ordering with its exact top-ups and slacks.

    Top-ups are rounded up to the model's base unit; slack bits absorb the
    remainder exactly, so the balance and one-hot penalties of the returned
    assignment are zero and its energy is the sum of rounded top-ups.
    """
    n = model.batch_size
    if len(ordering) != n or len(batch) != n:
        raise ValidationError("ordering/batch size does not match model")
    bits = np.zeros(model.num_vars, dtype=np.int8)
    for t, i in enumerate(ordering.permutation):
        bits[model.assignment_index(i, t)] = 1

    result = required_liquidity(batch, ordering, start)
    unit = model.base_unit
    plans = _registry_plans(model)
    flows = _flows(batch)
    for pid, plan in plans.items():
        need = result.required_liquidity.get(pid, 0)
        rounded = unit * -(-need // unit)  # ceil to base unit
        if plan["b_bits"]:
            if rounded > plan["b_cap"]:
                raise EncodingError(
                    f"top-up {rounded} for {pid!r} exceeds representable "
                    f"cap {plan['b_cap']}"
                )
            q = rounded // unit
            for j, idx in enumerate(plan["b_index"]):
                bits[idx] = (q >> j) & 1
        elif rounded:
            raise EncodingError(f"{pid!r} needs liquidity but has no top-up bits")

        flow_at = {i: v for i, v in flows[pid]}
        running = _state(start, pid).available + rounded
        s_cap = (1 << plan["s_bits"]) - 1
        for t, i in enumerate(ordering.permutation):
            running += flow_at.get(i, 0)
            if running < 0 or running > s_cap:
                raise EncodingError(
                    f"slack {running} for {pid!r} at slot {t + 1} outside [0, {s_cap}]"
                )
            for j, idx in enumerate(plan["s_index"][t]):
                bits[idx] = (running >> j) & 1
    return bits


def _registry_plans(model: QuboModel) -> dict[str, dict]:
    """Group registry entries back into per-participant bit layouts."""
    plans: dict[str, dict] = {}
    for idx, tag in enumerate(model.var_registry):
        if tag.kind == "x":
            continue
        plan = plans.setdefault(
            tag.participant,
            {"b_bits": 0, "b_cap": 0, "b_index": [], "s_bits": 0,
             "s_index": [[] for _ in range(model.batch_size)]},
        )
        if tag.kind == "b":
            plan["b_bits"] += 1
            plan["b_cap"] += tag.weight
            plan["b_index"].append(idx)
        else:
            plan["s_index"][tag.slot - 1].append(idx)
            plan["s_bits"] = max(plan["s_bits"], tag.bit + 1)
    return plans


def export_qubo(model: QuboModel, stream: io.TextIOBase | None = None) -> str:
    """Plain-text dump: header line "num_vars offset", then one line per
    linear term ("i c") and per quadratic term ("i j c")."""
    out = io.StringIO()
    out.write(f"{model.num_vars} {model.offset!r}\n")
    for i in sorted(model.linear):
        out.write(f"{i} {model.linear[i]!r}\n")
    for i, j in sorted(model.quadratic):
        out.write(f"{i} {j} {model.quadratic[(i, j)]!r}\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text
