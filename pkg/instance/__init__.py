"""Problem instances, solution families, classification and gaps."""

from instance.model import (
    FamilyKind,
    GapTable,
    InfeasibleMomentsError,
    Instance,
    InstanceError,
    NoSafeSolutionError,
    RewardModel,
    SafetyPartition,
    Solution,
    SolutionClass,
    SolutionFamily,
    beta_params_from_moments,
    classify,
    compute_gaps,
    enumerate_solutions,
    format_solution,
    kpath_instance,
    parse_solution_label,
    solution_moments,
)
