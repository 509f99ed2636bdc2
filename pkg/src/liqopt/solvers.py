"""Candidate-ordering search: exact enumeration, simulated annealing over
the QUBO penalty form, permutation local search, and FIFO passthrough.

Sample energies reported by the heuristics are advisory only. Final ranking
always re-scores decoded orderings with the exact integer ledger, so float
drift or coarse top-up granularity can never promote a worse ordering.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ExactLimitError, ValidationError
from .ledger import (
    Batch,
    BatchEvaluator,
    Ordering,
    OrderingResult,
    StateMap,
    required_liquidity,
)
from .qubo import BinaryAssignment, InfeasibilityReport, QuboModel, decode_assignment

logger = logging.getLogger(__name__)

KINDS = ("exact", "sa-qubo", "local-search", "fifo")
NEIGHBORHOODS = ("adjacent-swap", "any-swap")

EXACT_LIMIT_DEFAULT = 9


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the heuristic solvers.

    Temperatures default to None, meaning they are derived from the model's
    coefficient magnitudes at solve time. Determinism holds for a fixed
    seed and config as long as no wall-clock ``time_limit`` is set.
    """

    kind: str = "local-search"
    num_samples: int = 50
    sweeps: int = 1000
    initial_temperature: float | None = None
    final_temperature: float | None = None
    neighborhood: str = "any-swap"
    seed: int = 0
    time_limit: float | None = None
    exact_limit: int = EXACT_LIMIT_DEFAULT
    base_unit: int | None = None  # sa-qubo top-up granularity; None = auto

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown solver kind {self.kind!r}")
        if self.num_samples < 1:
            raise ValidationError("num_samples must be >= 1")
        if self.sweeps < 1:
            raise ValidationError("sweeps must be >= 1")
        if self.neighborhood not in NEIGHBORHOODS:
            raise ValidationError(f"unknown neighborhood {self.neighborhood!r}")
        if self.base_unit is not None and self.base_unit < 1:
            raise ValidationError("base_unit must be at least one cent")
        if (
            self.initial_temperature is not None
            and self.final_temperature is not None
            and not (0 < self.final_temperature < self.initial_temperature)
        ):
            raise ValidationError(
                "need 0 < final_temperature < initial_temperature"
            )


@dataclass
class Sample:
    """One solver restart: an ordering when decodable, else the raw bits."""

    ordering: Ordering | None
    energy: float
    feasible: bool
    assignment: BinaryAssignment | None = None
    infeasibility: InfeasibilityReport | None = None


@dataclass
class SolverStats:
    wall_time: float = 0.0
    num_feasible: int = 0


@dataclass
class SampleSet:
    samples: list[Sample] = field(default_factory=list)
    stats: SolverStats = field(default_factory=SolverStats)


def solve_exact(
    batch: Batch, start: StateMap | None = None, limit: int = EXACT_LIMIT_DEFAULT
) -> OrderingResult:
    """Global minimum over all n! orderings; ties broken by the
    lexicographically smallest permutation.

    The verification oracle for every heuristic. Refuses batches beyond
    ``limit`` payments (default 9, i.e. 362,880 candidate orders).
    """
    n = len(batch)
    if n > limit:
        raise ExactLimitError(
            f"batch of {n} exceeds exhaustive limit {limit}; "
            "use a heuristic solver (sa-qubo or local-search)"
        )
    if n == 0:
        return required_liquidity(batch, Ordering.identity(0), start)
    ev = BatchEvaluator(batch, start)
    best_perm: tuple[int, ...] | None = None
    best_cost = None
    for perm in itertools.permutations(range(n)):
        cost = ev.cost(perm)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_perm = perm
    return required_liquidity(batch, Ordering(best_perm), start)


# ---------------------------------------------------------------------------
# Simulated annealing over the QUBO


def _compile_model(model: QuboModel):
    """Flatten the model into CSR-style arrays for the sweep kernel."""
    nv = model.num_vars
    h = np.zeros(nv, dtype=np.float64)
    if model.linear:
        idx = np.fromiter(model.linear.keys(), dtype=np.int64, count=len(model.linear))
        h[idx] = np.fromiter(
            model.linear.values(), dtype=np.float64, count=len(model.linear)
        )
    nq = len(model.quadratic)
    pairs = np.zeros((nq, 2), dtype=np.int64)
    vals = np.zeros(nq, dtype=np.float64)
    if nq:
        flat = np.fromiter(
            (v for pair in model.quadratic for v in pair), dtype=np.int64, count=2 * nq
        )
        pairs = flat.reshape(nq, 2)
        vals = np.fromiter(model.quadratic.values(), dtype=np.float64, count=nq)
    # symmetric adjacency: every entry appears on both endpoints' rows
    ends = np.concatenate([pairs[:, 0], pairs[:, 1]])
    others = np.concatenate([pairs[:, 1], pairs[:, 0]])
    both = np.concatenate([vals, vals])
    order = np.argsort(ends, kind="stable")
    indices = others[order]
    weights = both[order]
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(np.bincount(ends, minlength=nv), out=indptr[1:])
    return h, indptr, indices, weights


# xorshift64* constants, hoisted so the kernel body stays jittable
_SH12 = np.uint64(12)
_SH25 = np.uint64(25)
_SH27 = np.uint64(27)
_SH63 = np.uint64(63)
_MULT = np.uint64(2685821657736338717)
_INV64 = 1.0 / 18446744073709551616.0


def _make_kernel():
    """Build the sweep kernel, JIT-compiled when numba is available."""

    def kernel(h, indptr, indices, weights, schedule, seed, best_out):
        # Single-bit-flip Metropolis over a fixed variable scan order.
        # Local fields make a proposal O(1); an accepted flip pays O(degree).
        # The inline xorshift64* generator keeps runs reproducible across
        # compiled and interpreted execution.
        nv = h.shape[0]
        state = np.zeros(nv, dtype=np.int8)
        rs = seed
        for i in range(nv):
            rs ^= rs >> _SH12
            rs ^= rs << _SH25
            rs ^= rs >> _SH27
            if (rs * _MULT) >> _SH63:
                state[i] = 1
        field = h.copy()
        energy = 0.0
        for i in range(nv):
            if state[i] == 1:
                energy += h[i]
                for k in range(indptr[i], indptr[i + 1]):
                    j = indices[k]
                    field[j] += weights[k]
                    if state[j] == 1 and j > i:
                        energy += weights[k]
        best = energy
        for i in range(nv):
            best_out[i] = state[i]
        for s in range(schedule.shape[0]):
            temp = schedule[s]
            cutoff = 44.0 * temp  # exp(-44) is below the generator's grain
            for i in range(nv):
                if state[i] == 1:
                    delta = -field[i]
                else:
                    delta = field[i]
                accept = False
                if delta <= 0.0:
                    accept = True
                elif delta <= cutoff:
                    rs ^= rs >> _SH12
                    rs ^= rs << _SH25
                    rs ^= rs >> _SH27
                    u = np.float64(rs * _MULT) * _INV64
                    if u <= 0.0:
                        u = _INV64
                    if -temp * np.log(u) > delta:
                        accept = True
                if accept:
                    if state[i] == 1:
                        state[i] = 0
                        for k in range(indptr[i], indptr[i + 1]):
                            field[indices[k]] -= weights[k]
                    else:
                        state[i] = 1
                        for k in range(indptr[i], indptr[i + 1]):
                            field[indices[k]] += weights[k]
                    energy += delta
                    if energy < best:
                        best = energy
                        for j in range(nv):
                            best_out[j] = state[j]
        return best

    try:
        from numba import njit

        return njit(cache=True, fastmath=False)(kernel)
    except ImportError:  # pragma: no cover - numba is a declared dependency
        logger.warning("numba unavailable; annealing falls back to pure python")
        return kernel


_KERNEL = _make_kernel()


def default_temperatures(model: QuboModel) -> tuple[float, float]:
    """Schedule endpoints for a penalty-form model.

    Permutation mixing is gated by the one-hot multiplier: moving a
    settlement between slots transiently costs about that much, so the hot
    end sits at twice it rather than at the (far larger) worst-case
    per-variable stiffness, which would waste most of the schedule in a
    random walk. The cold end freezes single-cent moves.
    """
    hot = max(2.0 * model.penalty_onehot, 1.0)
    cold = 0.05
    return hot, cold


def solve_sa(model: QuboModel, config: SolverConfig) -> SampleSet:
    """Independent annealing restarts over the penalty objective.

    Each restart starts from random bits, runs ``sweeps`` full passes with
    geometrically falling temperature, and keeps its best-seen state. The
    sample is marked feasible when the assignment block decodes to a
    permutation. Deterministic for a fixed seed.
    """
    t0 = time.monotonic()
    result = SampleSet()
    if model.num_vars == 0:
        for _ in range(config.num_samples):
            result.samples.append(
                Sample(Ordering.identity(0), model.offset, True,
                       np.zeros(0, dtype=np.int8))
            )
        result.stats.num_feasible = len(result.samples)
        result.stats.wall_time = time.monotonic() - t0
        return result

    hot, cold = default_temperatures(model)
    if config.initial_temperature is not None:
        hot = config.initial_temperature
    if config.final_temperature is not None:
        cold = config.final_temperature
    if not 0 < cold < hot:
        raise ValidationError("need 0 < final temperature < initial temperature")
    sweeps = config.sweeps
    if sweeps == 1:
        schedule = np.array([hot])
    else:
        schedule = hot * (cold / hot) ** (np.arange(sweeps) / (sweeps - 1))

    h, indptr, indices, weights = _compile_model(model)
    seeds = np.random.SeedSequence(config.seed).generate_state(
        config.num_samples, dtype=np.uint64
    )
    seeds[seeds == 0] = np.uint64(0x9E3779B97F4A7C15)
    for k in range(config.num_samples):
        if config.time_limit is not None and time.monotonic() - t0 > config.time_limit:
            logger.info("sa time limit hit after %d samples", k)
            break
        best_bits = np.zeros(model.num_vars, dtype=np.int8)
        best = _KERNEL(h, indptr, indices, weights, schedule, seeds[k], best_bits)
        decoded = decode_assignment(best_bits, model)
        feasible = isinstance(decoded, Ordering)
        result.samples.append(
            Sample(
                ordering=decoded if feasible else None,
                energy=float(best) + model.offset,
                feasible=feasible,
                assignment=best_bits,
                infeasibility=None if feasible else decoded,
            )
        )
    result.stats.num_feasible = sum(1 for s in result.samples if s.feasible)
    result.stats.wall_time = time.monotonic() - t0
    return result


# ---------------------------------------------------------------------------
# Permutation local search


def _hill_climb(ev: BatchEvaluator, perm: list[int], adjacent: bool) -> tuple[list[int], int]:
    """First-improvement swap descent with a fixed scan order."""
    n = len(perm)
    cost = ev.cost(perm)
    improved = True
    while improved:
        improved = False
        for a in range(n - 1):
            upper = a + 2 if adjacent else n
            for b in range(a + 1, upper):
                perm[a], perm[b] = perm[b], perm[a]
                trial = ev.cost(perm)
                if trial < cost:
                    cost = trial
                    improved = True
                else:
                    perm[a], perm[b] = perm[b], perm[a]
    return perm, cost


def solve_local_search(
    batch: Batch, start: StateMap | None, config: SolverConfig
) -> SampleSet:
    """Random-restart swap descent over permutations.

    The first restart starts from the arrival order, so the best sample is
    never worse than FIFO; every sample is feasible by construction.
    """
    t0 = time.monotonic()
    n = len(batch)
    result = SampleSet()
    ev = BatchEvaluator(batch, start)
    adjacent = config.neighborhood == "adjacent-swap"
    rng = np.random.default_rng(config.seed)
    for k in range(config.num_samples):
        if config.time_limit is not None and time.monotonic() - t0 > config.time_limit:
            logger.info("local search time limit hit after %d samples", k)
            break
        if k == 0:
            perm = list(range(n))
        else:
            perm = [int(v) for v in rng.permutation(n)]
        perm, cost = _hill_climb(ev, perm, adjacent)
        result.samples.append(Sample(Ordering(tuple(perm)), float(cost), True))
    result.stats.num_feasible = len(result.samples)
    result.stats.wall_time = time.monotonic() - t0
    return result


def select_best(
    samples: SampleSet, batch: Batch, start: StateMap | None = None
) -> OrderingResult | None:
    """Re-score feasible samples with the exact ledger and keep the cheapest.

    Reported energies are never trusted; each feasible ordering's cost is
    recomputed with :func:`required_liquidity`. Ties go to the earliest
    sample. Returns None when no sample is feasible, signalling the caller
    to fall back to the arrival order.
    """
    best: OrderingResult | None = None
    for sample in samples.samples:
        if not sample.feasible or sample.ordering is None:
            continue
        result = required_liquidity(batch, sample.ordering, start)
        if sample.energy != result.aggregate_cost:
            logger.debug(
                "sample energy %s != exact cost %d (discretization); "
                "exact cost wins", sample.energy, result.aggregate_cost,
            )
        if best is None or result.aggregate_cost < best.aggregate_cost:
            best = result
    return best
