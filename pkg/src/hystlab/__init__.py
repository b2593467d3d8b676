"""hystlab: fast-slow planar systems, generalized play hysteresis, and the
diagnostics connecting them in the singular limit."""

from .core import (
    AffineCurve,
    BoundaryCurvePair,
    BoundsMetadata,
    CompactBox,
    DomainError,
    EvaluationError,
    FastSlowSystem,
    PiecewiseLinearCurve,
    Region,
    SampledPath,
    band_distance,
    band_distance_many,
    classify_region,
    estimate_bounds,
    find_working_box,
    validate_curves,
    validate_system,
)
from .play import (
    PlayState,
    check_rate_independence,
    check_variational_inequality,
    check_volterra,
    play_evaluate,
    play_init,
    play_step,
)
from .integrate import (
    BoxEscapeError,
    EpsRun,
    IntegratorConfig,
    StiffnessError,
    integrate,
    residual_check,
)
from .projection import gap_norms, project_run, projection_lipschitz_estimate, sign_condition_max
from .patched import (
    AdmissibilityError,
    CapabilityError,
    CollarError,
    LinearizedPiece,
    PatchSchedule,
    PatchedSolution,
    advance_until_theta,
    build_patched_solution,
    compute_collar_constants,
    compute_epsilon_delta,
    evaluate_lemma45_bounds,
    linearize_at,
    solve_linear_piece,
    theta_schedule,
)
from .limit import LimitRun, solve_limit, uniqueness_probe
from .analysis import (
    ConvergenceTable,
    bifurcation_sweep,
    epsilon_sweep,
    first_band_arrival,
    norm_Lq,
    norm_sup,
    norm_W1q,
    resample_to_common_grid,
)
from .oscillator import (
    BoundednessError,
    OscillatorParams,
    averaged_equilibria,
    dwell_segments,
    dwell_time_average,
    make_system,
    oscillator_curves,
    preset,
    slow_subsystem_exact,
    verify_slow_closed_form,
)

__version__ = "0.1.0"
