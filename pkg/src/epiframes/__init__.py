"""Two-frame indirect sampling of infected populations on a simulated epidemic.

Typical use::

    from epiframes import SimConfig, run_epidemic, build_world
    trace = run_epidemic(SimConfig(seed=1))
    world = build_world(trace, day=15)
    world.truth.Y, world.truth.Y_A, world.truth.Y_B, world.truth.Y_AB
"""

from .anticipated import AvParams, av_group_A, av_group_B, av_srs_ht, av_strategy, av_table, efficiency
from .designs import (
    ContactScheme,
    Sample,
    TwoFrameSample,
    draw_two_frame,
    sample_contacts,
    sample_size_for_proportion,
    select_panel,
    self_weighting_pi,
    srswor,
    trace_contacts,
    two_stage_institution_sample,
)
from .errors import (
    ConfigError,
    ConsistencyError,
    DesignError,
    EpiFramesError,
    EstimationError,
    NotComputableError,
    NoVerifiedCasesError,
)
from .estimators import (
    EstimateReport,
    GwsmInput,
    alpha_minvar,
    alpha_opt,
    alpha_star,
    composite,
    estimate,
    estimate_alt,
    estimate_YA,
    estimate_YAB,
    estimate_YB,
    gcre,
    gwsm_input,
    two_frame_inputs,
    variance_composite,
    variance_two_stage,
)
from .frames import GroundTruth, LinkView, World, build_world, link_window, true_totals, world_from_arrays
from .harness import ExperimentConfig, ExperimentResult, SchemeId, emit_report, run_experiment, run_scheme
from .kernels import BACKEND
from .rng import stream
from .synthpop import EpidemicTrace, HealthState, SimConfig, run_epidemic
from .waves import WaveConfig, chain_estimate, decompose_delta, run_waves

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
