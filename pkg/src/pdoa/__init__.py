"""Two-way narrowband phase-ranging: simulation, joint skew/range estimation,
error lower bounds, and a deterministic Monte Carlo harness.

The sensor's clock-skew and its range from the anchor are estimated jointly
from a P x N grid of two-way phase-difference measurements, collected over P
reply epochs and N hopped carriers. The noiseless grid is a rank-one outer
product of two phasor progressions, so a singular value decomposition plus
shift-ratio estimation (least squares or weighted least squares with
closed-form weights) recovers both parameters.
"""

from .model import (
    ChannelParams,
    ClockModel,
    ModelPhasors,
    SPEED_OF_LIGHT,
    SynthesizerConfig,
    carrier_frequency,
    default_clock,
    default_synthesizer,
    derived_frequency,
    frequency_step,
    model_phasors,
    wrap_phase,
)
from .protocol import (
    MatrixFormatError,
    MeasurementMatrix,
    NoiseSpec,
    PhaseExchange,
    ProtocolConfig,
    add_noise,
    classical_pdoa_vector,
    read_matrix_csv,
    synthesize_matrix,
    time_epoch,
    two_way_phases,
    write_matrix_csv,
)
from .estimator import (
    DegenerateInputError,
    JointEstimate,
    RankOneFactors,
    ambiguity_limits,
    estimate_classical,
    estimate_joint,
    grid_resolution,
    grid_search_oracle,
    rank_one_factors,
    shift_ls,
    shift_wls,
    wls_weights,
)
from .crlb import (
    CrlbResult,
    FisherResult,
    crlb_closed_form,
    derivative_self_check,
    fisher_numeric,
)
from .harness import (
    RmseReport,
    RmseRow,
    Scenario,
    SweepConfig,
    TrialFailureError,
    report_json_summary,
    rmse,
    run_cell,
    run_sweep,
    write_report_csv,
)

__version__ = "0.1.0"
