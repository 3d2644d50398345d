"""Scale-free adaptive optimizers, their diagnostics, and a small experiment
harness.

The package splits into plumbing (``vectors``, ``schedules``), the update
rules themselves (``updates``), estimator-style front ends (``estimators``),
test objectives (``problems``, ``mlp``), run measurements (``trace``,
``diagnostics``) and the config-driven harness (``harness``, ``plots``,
``cli``).
"""

from .exceptions import (
    AllZero,
    ConfigError,
    DatasetFormatError,
    DimensionMismatch,
    DivisionByZero,
    EmptyWindow,
    InvalidConstants,
    MissingTraceFields,
    NonFiniteValue,
    NonRectangularGrid,
    OutOfHorizon,
)
from .vectors import as_vector, elementwise, fd_gradient, linf_norm, rng_stream
from .schedules import ConstantSchedule, CosineSchedule, make_schedule
from .updates import (
    AdamHyper,
    AdamState,
    AdaGradState,
    adam_l2_step,
    adamw_step,
    adamprox_step,
    adamproxl2_step,
    adagrad_step,
    averaged_iterate,
    gd_step,
    init_adam_state,
    init_adagrad_state,
    iterate_adam,
    project_hypercube,
    restart_round_settings,
    restarted_adagrad,
    restarted_adagrad_rounds,
    run_adagrad,
)
from .problems import (
    Dataset,
    LossScaler,
    Quadratic,
    RescaledOracle,
    gen_blobs,
    load_dataset_csv,
    save_dataset_csv,
    corollary1_pair,
)
from .mlp import MlpProblem, MlpSpec, mlp_init, mlp_logits, mlp_loss_grad
from .trace import RunTrace
from .diagnostics import (
    DispersionStats,
    UpdateHistogram,
    check_regret_bound,
    check_restart_contraction,
    dispersion,
    hypercube_grid,
    record_update_histogram,
    relative_deviation,
    vector_deviation,
    trajectory_deviation,
    scalefree_equivalence,
)
from .estimators import (
    OPTIMIZERS,
    AdaGrad,
    AdamL2,
    AdamProx,
    AdamProxL2,
    AdamW,
    GradientDescent,
    RestartedAdaGrad,
)
from .harness import (
    ExperimentConfig,
    GridSpec,
    MlpProblemConfig,
    QuadraticProblemConfig,
    RecordConfig,
    ScheduleConfig,
    run_experiment,
    run_grid,
    write_grid_csv,
    read_grid_csv,
)

__version__ = "0.1.0"
