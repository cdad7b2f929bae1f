"""Stationary solutions of coagulation-fragmentation equations with power-law coefficients."""

from .sizegrid import SizeGrid, build_geometric_grid, locate_cell, BELOW, ABOVE
from .coefficients import (
    CoagulationParams,
    FragmentationParams,
    DaughterSpec,
    Truncation,
    eval_K,
    eval_K_trunc,
    eval_a_trunc,
    eval_B,
    frak_b,
    frak_Bp,
    m_star,
    predicted_tau,
)
from .operators import (
    CoagTables,
    FragTables,
    DistributionState,
    assemble_coagulation,
    assemble_fragmentation,
    apply_coagulation,
    apply_fragmentation,
    apply_rhs,
)

__version__ = "0.1.0"
