"""Data-regulated physics-informed neural networks with loss-landscape maps.

Small fully-connected ResNets are trained to solve three canonical PDEs via
residual losses, optionally steered by sparse / coarse / line-probe solution
data, and the resulting loss landscapes are extracted via filter-normalised
two-direction weight-space projection.
"""

from .nets import (
    JetBatch,
    NetworkArch,
    NetworkParams,
    forward,
    grad_params,
    init_params,
    jet,
    load_checkpoint,
    save_checkpoint,
)
from .pde import (
    Domain,
    PdeProblem,
    burgers_problem,
    burgers_residual,
    default_arch,
    evaluate_ic_bc,
    make_problem,
    ns_problem,
    ns_residuals,
    wave_problem,
    wave_residual,
)
from .sampling import (
    RegulatorSet,
    TrainSet,
    TrainSetSource,
    extract_coarse,
    extract_line_probe,
    extract_sparse,
    qmc_points,
)
from .losses import LossNotFinite, LossReport, composite_loss, make_loss_fn
from .training import AdamState, TrainConfig, TrainingAborted, adam_step, lr_at, train
from .landscape import (
    DirectionPair,
    LandscapeGrid,
    evaluate_grid,
    load_grid,
    make_loss_eval,
    sample_directions,
    save_grid,
)
from .metrics import L2Report, l2_error

__version__ = "0.1.0"
