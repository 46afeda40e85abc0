"""PASCombUCB learning agent: confidence bounds, environment and run engines."""

from agent.confidence import (
    BoundsTable,
    ConfidenceState,
    ItemBounds,
    ItemStats,
    LilConfig,
    default_omegas,
    item_bounds,
    lil,
    lil_inversion_m,
    radii,
    solution_bounds,
    update,
    xi,
)
from agent.engine import (
    EngineInvariantError,
    SafeSets,
    SplitResult,
    absolutely_safe_threshold,
    combucb1_run,
    greedy_split,
    init_select,
    oracle_select,
    pascomb_run,
    safe_sets,
)
from agent.environment import SemiBanditEnvironment
from agent.trace import PhaseRecord, Trace, TraceRecorder

ALGORITHMS = {
    "pascomb": pascomb_run,
    "combucb1": combucb1_run,
}
