"""Reorder interbank payment batches to cut aggregate liquidity needs.

The package settles batches of gross payments under candidate orderings,
scores each ordering by the total liquidity top-up it demands, and searches
for cheaper orders with exact enumeration, a simulated-annealing QUBO
sampler, or permutation local search. A day-level simulator replays whole
payment days as a FIFO-versus-optimizer horse race.
"""

from .data import SyntheticDayConfig, generate_day, load_day, save_day
from .errors import (
    EncodingError,
    ExactLimitError,
    LiqoptError,
    UnknownParticipantError,
    ValidationError,
)
from .ledger import (
    Batch,
    Money,
    Ordering,
    OrderingResult,
    ParticipantState,
    Payment,
    aggregate_mndp,
    net_position_series,
    required_liquidity,
    settle_and_carry,
)
from .pipeline import (
    BatchClassification,
    DayRun,
    accumulate_batches,
    classify_batch,
    load_manifest,
    run_day,
    to_manifest,
    write_manifest,
)
from .qubo import (
    BinaryAssignment,
    CqmModel,
    InfeasibilityReport,
    QuboModel,
    build_cqm,
    build_qubo,
    decode_assignment,
    encode_ordering,
    energy,
    export_qubo,
)
from .reporting import RunReport, emit_series, report_day, report_from_manifest
from .solvers import (
    SampleSet,
    SolverConfig,
    select_best,
    solve_exact,
    solve_local_search,
    solve_sa,
)

__version__ = "0.1.0"
