"""Klein-Fock-Gordon-Majorana particles on an interval: operators, evolution, spectra."""

from .boundary import (
    PRESET_NAMES,
    BoundaryConstraints,
    BoundaryParams,
    BoundaryParamsError,
    constraint_rows,
    is_majorana_admissible,
    preset,
    real_constraint_rank,
    unitary_2x2,
    unitary_4x4,
)
from .core import (
    FVState,
    Grid,
    KFGState,
    MajoranaKind,
    PhysicalParams,
    ValidationError,
    c_parity,
    charge_conjugate,
    fv_to_kfg,
    impose_majorana,
    kfg_to_fv,
    majorana_defect,
)
from .evolution import (
    EvolutionConfig,
    NumericalError,
    Trajectory,
    evolve_trajectory,
    second_order_majorana_residual,
    step_fv,
    step_kfg,
    step_majorana_first_order,
)
from .nonrel import (
    EnvelopeState,
    b11_residual,
    b13_identity_defect,
    extract_envelope,
    nonrel_deviation,
    nonrel_ladder,
    step_schrodinger,
)
from .operators import (
    DiscreteHamiltonian,
    Observables,
    ScalarPotential,
    build_hamiltonian,
    charge_density,
    continuity_residual,
    current_density,
    generalized_adjoint,
    pseudo_hermiticity_defect,
    pseudo_inner_product,
)
from .spectrum import (
    ModeSet,
    analytic_reference_spectrum,
    fv_spectrum_symmetry_check,
    stationary_modes,
)

__version__ = "0.1.0"
