"""Partial stabilization of stochastic control-affine systems.

Control Lyapunov functions, a Sontag-type universal feedback, an
Euler-Maruyama integrator and Monte Carlo stability estimators.
"""

from .clf import Clf, GeneratorPair, SclfReport, check_sclf, check_small_control, generator_pair
from .core import Partition, PartitionedState, StochasticControlSystem, closed_loop_rhs, y_norm
from .errors import (
    ControlNoiseLeak,
    ConvergenceOrderOutOfRange,
    EmptyEnsemble,
    IndefiniteClf,
    NumericalBlowup,
    ParstabError,
)
from .integrate import (
    IntegratorConfig,
    SamplePath,
    Termination,
    simulate_ensemble,
    simulate_path,
    weak_strong_convergence_probe,
)
from .models import MODEL_NAMES, build_model
from .sontag import Branch, FeedbackResult, SontagController, sontag_feedback
from .stability import (
    dissipation_scan,
    ensemble_stats,
    estimate_convergence,
    estimate_exceedance,
    supermartingale_check,
    wilson_interval,
)

__version__ = "0.1.0"
