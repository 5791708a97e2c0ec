"""Desk-scale simulator for tiered body-sensor nodes.

Subpackages by pipeline stage: :mod:`tiersim.trace` (synthetic accelerometer
streams), :mod:`tiersim.node` (per-sample tier policies), :mod:`tiersim.energy`
(calibrated accounting and tier comparison), :mod:`tiersim.classify`
(perceptron / ADALINE / backprop classifiers and windowing),
:mod:`tiersim.station` (frame codec, ingestion, notification stubs),
:mod:`tiersim.store` (file-backed schema persistence), and
:mod:`tiersim.harness` (experiment runner, reports, reference verification).
"""

from .classify import (
    LearnConfig,
    LinearModel,
    MlpModel,
    OutputKind,
    WindowSpec,
    adaline_error,
    linear_forward,
    lms_update,
    mlp_forward,
    mlp_train_step,
    perceptron_update,
    windows,
)
from .energy import (
    CalibrationTargets,
    EnergyParams,
    EnergyReport,
    REFERENCE_TARGETS,
    account,
    calibrate,
    compare,
    reference_params,
)
from .harness import ExperimentConfig, ExperimentResult, emit_report, run_experiment, verify_reference
from .node import Decision, DecisionKind, NodeConfig, NodeLog, Tier, decide, magnitude_sq, run_node
from .station import IngestRecord, Ingestor, RadioFrame, encode_frame, forward, parse_frame, self_test
from .store import Store
from .trace import (
    AccelSample,
    Label,
    REFERENCE_PROFILE,
    Trace,
    TraceSpec,
    generate_trace,
    load_trace,
    write_trace,
)

__version__ = "0.1.0"
