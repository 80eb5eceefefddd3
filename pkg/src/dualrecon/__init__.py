"""Adjoint-control reconstruction of PDE initial conditions from sparse data."""

from .spaces import (
    ControlSignal,
    Field,
    Grid1D,
    Grid2D,
    MeasurementSeries,
    TimeGrid,
    inner_x,
    inner_z,
    inner_z_signals,
    norm_x,
    norm_z,
)
from .bases import Basis, daubechies_basis_1d, sine_basis_1d, sine_basis_2d
from .propagators import (
    ConvDiffModel2D,
    DiffusionModel1D,
    DiffusionModel2D,
    Propagator,
    advect_step,
    cn_step,
    forward_trajectory,
    strang_step,
)
from .observation import (
    ObservationOp,
    add_noise,
    apply_c,
    apply_c_adjoint,
    compute_xi,
    simulate_measurements,
)
from .control import (
    ControlMap,
    ControlSolution,
    RegConfig,
    apply_L,
    apply_Lstar,
    balance_fixed_point,
    observability_min_eig,
    select_parameters_balance,
    solve_control,
)
from .reconstruction import (
    ReconstructionResult,
    error_budget,
    final_state_targets,
    reconstruct_final,
    reconstruct_initial,
    sine_time_control_basis,
    variation_reconstruct,
)
from .config import ExperimentConfig
from .errors import (
    BalanceDivisionError,
    CapacityError,
    ConfigError,
    DimensionError,
    DualReconError,
    FingerprintError,
    IllPosedConfigError,
)
from .estimator import DualReconstructor
from .experiments import (
    ExperimentOutcome,
    bank_controls,
    load_controls,
    run_experiment,
    save_controls,
    verify_artifacts,
)
from .presets import preset_config, preset_names

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
