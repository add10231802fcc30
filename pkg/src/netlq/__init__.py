"""Numerical co-design toolkit for finite-horizon networked
linear-quadratic control: certainty-equivalence gain schedules, encoder
design (quantizers and event-trigger envelopes), dual-effect and
separation diagnostics, and a seeded Monte Carlo oracle."""

__version__ = "0.1.0"

from .coding import (
    INFEASIBLE,
    AdditiveNoise,
    EventTriggered,
    FixedRate,
    InnovationTracker,
    Quantizer,
    SilenceEnvelope,
    VariableRate,
    comm_cost,
    envelope_decide,
    innovation_encode,
    innovation_step,
    quantize,
)
from .design import (
    ConstraintSet,
    GammaCurve,
    StageEncoders,
    StageEncoderSpec,
    constrained_gamma_curve,
    dual_effect_curves,
    dual_effect_probe,
    gamma1_curve,
    greedy_stage_encoder,
    min_gamma,
    restricted_control_u1,
    verify_ce_optimality,
)
from .envelope import (
    PREDICTOR_LINEAR,
    ZOH,
    EnvelopeCostModel,
    EnvelopeDesign,
    EnvelopeGrid,
    optimize_envelope,
    optimize_envelope_with_symmetric_baseline,
)
from .estimation import (
    CellPosterior,
    ParticleCloud,
    TwoStepPosterior,
    filter_error_variance,
    particle_posterior,
    two_step_posterior,
    wbar_moments,
)
from .gauss import (
    Interval,
    Normal,
    TruncatedMoments,
    owen_xgG,
    owen_xgg,
    std_pdf_cdf,
    trunc_moments,
    two_step_cell_integrals,
)
from .lqcore import (
    CostParams,
    GainSchedule,
    PlantParams,
    ce_control,
    gain_schedule,
    stage_cost,
)
from .sim import (
    CEController,
    CompanderEncoder,
    EnvelopeController,
    EnvelopeEncoder,
    FixedU0ThenCE,
    NoiseLaw,
    OpenLoopController,
    QuantizedEncoder,
    RunResult,
    Scenario,
    simulate,
    sweep,
)
