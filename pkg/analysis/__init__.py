"""Hardness parameters and regret-bound evaluators."""

from analysis.hardness import (
    CompositeGaps,
    HardnessConstants,
    HardnessContext,
    HardnessReport,
    HEvaluation,
    RegretBounds,
    a_coefficient,
    b_coefficient,
    composite_gaps,
    d_constant,
    g_eval,
    h_eval,
    hardness_H,
    hardness_report,
    m_j,
    regret_bounds,
    series_constant,
)
